#pragma once

// Similar-image retrieval: per-descriptor exact linear scan over z-scored
// training descriptors, top-alpha per descriptor, concatenated into a
// multiset of 4 * alpha ids.

#include <iostream>
#include <map>
#include <numeric>

#include "sclp/global_descriptors.hpp"

namespace sclp {

struct RetrievalConfig {
    int alpha = 100;
    int rare_class_count = 0;
    int rare_alpha = 0;  // 0 = same as alpha

    int effective_rare_alpha() const { return rare_alpha > 0 ? rare_alpha : alpha; }
};

struct RetrievalSet {
    std::vector<int> image_ids;  // size 4 * alpha in standard mode
    std::vector<int> provenance; // descriptor kind that selected image_ids[i]

    std::size_t size() const { return image_ids.size(); }
};

/// Per-dimension z-score statistics; zero-variance dimensions pass through
/// centered but unscaled.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_std;

    static Standardizer fit(const std::vector<const std::vector<double>*>& rows) {
        Standardizer s;
        if (rows.empty()) return s;
        const std::size_t d = rows.front()->size();
        s.mean.assign(d, 0.0);
        s.inv_std.assign(d, 1.0);
        for (const auto* r : rows)
            for (std::size_t j = 0; j < d; ++j) s.mean[j] += (*r)[j];
        for (double& m : s.mean) m /= static_cast<double>(rows.size());
        std::vector<double> var(d, 0.0);
        for (const auto* r : rows)
            for (std::size_t j = 0; j < d; ++j) {
                const double t = (*r)[j] - s.mean[j];
                var[j] += t * t;
            }
        for (std::size_t j = 0; j < d; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
            s.inv_std[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
        }
        return s;
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (x.size() != mean.size()) throw ArgumentError("descriptor dimension mismatch");
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) * inv_std[j];
        return out;
    }
};

/// Immutable retrieval index over standardized training descriptors. Ids are
/// caller-assigned (training image ids) and drive the tie-break.
class RetrievalIndex {
  public:
    RetrievalIndex() = default;

    RetrievalIndex(std::vector<int> ids, const std::vector<GlobalFeatureSet>& features) : ids_(std::move(ids)) {
        if (ids_.size() != features.size()) throw ArgumentError("retrieval index: id/feature count mismatch");
        if (ids_.empty()) throw ArgumentError("retrieval index is empty");
        for (int k = 0; k < kDescriptorKinds; ++k) {
            std::vector<const std::vector<double>*> rows;
            for (const auto& f : features) rows.push_back(&f.features[k]);
            std_[k] = Standardizer::fit(rows);
            for (const auto& f : features) vectors_[k].push_back(std_[k].apply(f.features[k]));
        }
    }

    std::size_t size() const { return ids_.size(); }
    const std::vector<int>& ids() const { return ids_; }
    const Standardizer& standardizer(int kind) const { return std_[kind]; }

    /// Sub-index over the entries whose id satisfies `keep`, sharing the
    /// parent's standardization.
    template <typename Pred> RetrievalIndex subset(Pred keep) const {
        RetrievalIndex out;
        out.std_ = std_;
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (keep(ids_[i])) {
                out.ids_.push_back(ids_[i]);
                for (int k = 0; k < kDescriptorKinds; ++k) out.vectors_[k].push_back(vectors_[k][i]);
            }
        return out;
    }

    /// Top-n ids for one descriptor: ascending distance, ties by ascending id.
    std::vector<int> nearest(const GlobalFeatureSet& query, int kind, std::size_t n) const {
        const std::vector<double> q = std_[kind].apply(query.features[kind]);
        std::vector<std::pair<double, int>> scored;
        scored.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i) scored.emplace_back(squared_distance(q, vectors_[kind][i]), ids_[i]);
        n = std::min(n, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end());
        std::vector<int> out;
        for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].second);
        return out;
    }

  private:
    std::vector<int> ids_;
    std::array<Standardizer, kDescriptorKinds> std_;
    std::array<std::vector<std::vector<double>>, kDescriptorKinds> vectors_;
};

inline RetrievalSet retrieve(const GlobalFeatureSet& query, const RetrievalIndex& index, int alpha) {
    if (index.size() == 0) throw ArgumentError("retrieval index is empty");
    if (alpha < 1) throw ArgumentError("alpha must be >= 1");
    if (static_cast<std::size_t>(alpha) > index.size())
        throw ArgumentError("alpha " + std::to_string(alpha) + " exceeds training set size " + std::to_string(index.size()));
    RetrievalSet out;
    for (int k = 0; k < kDescriptorKinds; ++k)
        for (int id : index.nearest(query, k, static_cast<std::size_t>(alpha))) {
            out.image_ids.push_back(id);
            out.provenance.push_back(k);
        }
    return out;
}

struct RareRetrieval {
    std::map<ClassIndex, RetrievalSet> per_class;
    std::vector<std::string> warnings;
};

/// For each rare class, retrieval restricted to the training images whose
/// label map contains it; the depth is clamped to the pool size. A class with
/// an empty pool yields an empty set and a warning.
inline RareRetrieval retrieve_rare(const GlobalFeatureSet& query, const RetrievalIndex& index,
                                   const std::function<bool(int image_id, ClassIndex c)>& contains,
                                   std::span<const ClassIndex> rare, int rare_alpha) {
    if (rare.empty()) throw ArgumentError("rare class list is empty");
    RareRetrieval out;
    for (ClassIndex c : rare) {
        const RetrievalIndex pool = index.subset([&](int id) { return contains(id, c); });
        if (pool.size() == 0) {
            out.per_class[c] = {};
            out.warnings.push_back("rare class " + std::to_string(c) + " occurs in no training image");
            continue;
        }
        const int depth = std::min<int>(rare_alpha, static_cast<int>(pool.size()));
        out.per_class[c] = retrieve(query, pool, depth);
    }
    return out;
}

/// Base set followed by every per-class set, as one multiset.
inline RetrievalSet merge_retrieval(const RetrievalSet& base, const RareRetrieval& rare) {
    RetrievalSet out = base;
    for (const auto& [c, set] : rare.per_class) {
        out.image_ids.insert(out.image_ids.end(), set.image_ids.begin(), set.image_ids.end());
        out.provenance.insert(out.provenance.end(), set.provenance.begin(), set.provenance.end());
    }
    return out;
}

} // namespace sclp
