#pragma once

// Spatially constrained class co-occurrence priors extracted from a
// retrieval multiset: a global block-pair tensor and a local superpixel
// adjacency matrix, both conditional distributions over the M classes.

#include "sclp/segmentation.hpp"

namespace sclp {

enum class GlobalCountMode { Presence, PixelPair };

inline GlobalCountMode parse_count_mode(const std::string& s) {
    if (s == "presence") return GlobalCountMode::Presence;
    if (s == "pixel-pair") return GlobalCountMode::PixelPair;
    throw ArgumentError("unknown sclp mode: " + s);
}
inline std::string to_string(GlobalCountMode m) { return m == GlobalCountMode::Presence ? "presence" : "pixel-pair"; }

/// Pixel counts per (block, class) for one labeled image; class 0 column is
/// the unlabeled count. Pixels belong to the block of their superpixel.
struct BlockClassCounts {
    int blocks = 0;
    int num_classes = 0;
    std::vector<std::uint64_t> counts;  // blocks x (num_classes + 1)

    BlockClassCounts() = default;
    BlockClassCounts(int k, int m) : blocks(k), num_classes(m), counts(static_cast<std::size_t>(k) * (m + 1), 0) {}
    std::uint64_t& at(int block, ClassIndex c) { return counts[static_cast<std::size_t>(block) * (num_classes + 1) + c]; }
    std::uint64_t at(int block, ClassIndex c) const {
        return counts[static_cast<std::size_t>(block) * (num_classes + 1) + c];
    }
};

/// From per-superpixel centroids and class histograms (index 0 = unlabeled).
inline BlockClassCounts block_class_counts(std::span<const std::array<double, 2>> centroids,
                                           const std::vector<std::vector<std::uint32_t>>& class_hist,
                                           const BlockGrid& grid, int num_classes) {
    BlockClassCounts out(grid.size(), num_classes);
    for (std::size_t s = 0; s < centroids.size(); ++s) {
        const int b = grid.block_at(centroids[s][0], centroids[s][1]);
        for (ClassIndex c = 0; c <= num_classes; ++c) out.at(b, c) += class_hist[s][static_cast<std::size_t>(c)];
    }
    return out;
}

inline BlockClassCounts block_class_counts(const SuperpixelSegmentation& seg, const LabelMap& labels,
                                           const BlockGrid& grid, int num_classes) {
    const auto hist = superpixel_class_histograms(seg, labels, num_classes);
    std::vector<std::array<double, 2>> c;
    for (const auto& sp : seg.superpixels) c.push_back({sp.cx, sp.cy});
    return block_class_counts(c, hist, grid, num_classes);
}

/// M x M x K x (K-1) conditional tensor; p(c | chat, k1, k2) is the
/// probability of class c in block k2 given class chat occurs in block k1.
class GlobalSCLP {
  public:
    GlobalSCLP() = default;
    GlobalSCLP(int m, int k) : m_(m), k_(k), raw_(size(), 0.0), prob_(size(), 0.0) {}

    int num_classes() const { return m_; }
    int blocks() const { return k_; }

    double p(ClassIndex c, ClassIndex chat, int k1, int k2) const { return prob_[index(chat, k1, k2) + (c - 1)]; }
    double raw(ClassIndex c, ClassIndex chat, int k1, int k2) const { return raw_[index(chat, k1, k2) + (c - 1)]; }
    std::span<const double> row(ClassIndex chat, int k1, int k2) const {
        return {prob_.data() + index(chat, k1, k2), static_cast<std::size_t>(m_)};
    }
    const std::vector<double>& raw_counts() const { return raw_; }
    const std::vector<double>& probabilities() const { return prob_; }

    // Offset of the slice (chat, k1, k2); k1 != k2.
    std::size_t index(ClassIndex chat, int k1, int k2) const {
        const int pair = k1 * (k_ - 1) + (k2 < k1 ? k2 : k2 - 1);
        return (static_cast<std::size_t>(chat - 1) * k_ * (k_ - 1) + static_cast<std::size_t>(pair)) * m_;
    }

    void accumulate(const BlockClassCounts& bc, GlobalCountMode mode) {
        if (bc.blocks != k_ || bc.num_classes != m_) throw ArgumentError("global SCLP: block or class count mismatch");
        for (int k1 = 0; k1 < k_; ++k1)
            for (ClassIndex chat = 1; chat <= m_; ++chat) {
                const std::uint64_t n1 = bc.at(k1, chat);
                if (n1 == 0) continue;
                const double factor = mode == GlobalCountMode::Presence ? 1.0 : static_cast<double>(n1);
                for (int k2 = 0; k2 < k_; ++k2) {
                    if (k2 == k1) continue;
                    double* dst = raw_.data() + index(chat, k1, k2);
                    for (ClassIndex c = 1; c <= m_; ++c) dst[c - 1] += factor * static_cast<double>(bc.at(k2, c));
                }
            }
    }

    void normalize(double eps) {
        for (std::size_t off = 0; off < raw_.size(); off += static_cast<std::size_t>(m_)) {
            double s = 0.0;
            for (int c = 0; c < m_; ++c) s += raw_[off + c] + eps;
            for (int c = 0; c < m_; ++c)
                prob_[off + c] = s > 0.0 ? (raw_[off + c] + eps) / s : 1.0 / m_;
        }
    }

  private:
    std::size_t size() const { return static_cast<std::size_t>(m_) * m_ * k_ * (k_ > 0 ? k_ - 1 : 0); }

    int m_ = 0, k_ = 0;
    std::vector<double> raw_, prob_;
};

/// Multiset duplicates are accumulated once per occurrence.
inline GlobalSCLP extract_global_sclp(std::span<const BlockClassCounts* const> retrieved, int num_classes, int blocks,
                                      double eps, GlobalCountMode mode = GlobalCountMode::Presence) {
    if (num_classes < 1 || blocks < 1) throw ArgumentError("global SCLP needs M >= 1 and K >= 1");
    GlobalSCLP g(num_classes, blocks);
    for (const BlockClassCounts* bc : retrieved) g.accumulate(*bc, mode);
    g.normalize(eps);
    return g;
}

/// Symmetric adjacency label-pair counts for one image, (M+1) x (M+1) with
/// row/column 0 unused.
struct PairCounts {
    int num_classes = 0;
    std::vector<std::uint64_t> counts;

    PairCounts() = default;
    explicit PairCounts(int m) : num_classes(m), counts(static_cast<std::size_t>(m + 1) * (m + 1), 0) {}
    std::uint64_t& at(ClassIndex a, ClassIndex b) { return counts[static_cast<std::size_t>(a) * (num_classes + 1) + b]; }
    std::uint64_t at(ClassIndex a, ClassIndex b) const {
        return counts[static_cast<std::size_t>(a) * (num_classes + 1) + b];
    }
};

/// Each unordered adjacent superpixel pair with labels (a, b), both labeled,
/// adds one to count(a, b) and one to count(b, a).
inline PairCounts adjacency_pair_counts(const SuperpixelSegmentation& seg, std::span<const ClassIndex> sp_labels, int num_classes) {
    PairCounts pc(num_classes);
    for (int s = 0; s < seg.size(); ++s)
        for (int t : seg.superpixels[s].neighbors) {
            if (t <= s) continue;
            const ClassIndex a = sp_labels[s], b = sp_labels[t];
            if (a == kUnlabeled || b == kUnlabeled) continue;
            ++pc.at(a, b);
            ++pc.at(b, a);
        }
    return pc;
}

/// M x M matrix; p(c | chat) is the probability that a neighbor of a class
/// chat superpixel has class c.
class LocalSCLP {
  public:
    LocalSCLP() = default;
    explicit LocalSCLP(int m) : m_(m), raw_(static_cast<std::size_t>(m) * m, 0.0), prob_(raw_.size(), 0.0) {}

    int num_classes() const { return m_; }
    double p(ClassIndex c, ClassIndex chat) const { return prob_[static_cast<std::size_t>(chat - 1) * m_ + (c - 1)]; }
    double raw(ClassIndex a, ClassIndex b) const { return raw_[static_cast<std::size_t>(a - 1) * m_ + (b - 1)]; }
    std::span<const double> row(ClassIndex chat) const {
        return {prob_.data() + static_cast<std::size_t>(chat - 1) * m_, static_cast<std::size_t>(m_)};
    }

    void accumulate(const PairCounts& pc) {
        if (pc.num_classes != m_) throw ArgumentError("local SCLP: class count mismatch");
        for (ClassIndex a = 1; a <= m_; ++a)
            for (ClassIndex b = 1; b <= m_; ++b) raw_[static_cast<std::size_t>(a - 1) * m_ + (b - 1)] += static_cast<double>(pc.at(a, b));
    }

    void normalize(double eps) {
        for (int r = 0; r < m_; ++r) {
            double s = 0.0;
            for (int c = 0; c < m_; ++c) s += raw_[static_cast<std::size_t>(r) * m_ + c] + eps;
            for (int c = 0; c < m_; ++c) {
                const std::size_t i = static_cast<std::size_t>(r) * m_ + c;
                prob_[i] = s > 0.0 ? (raw_[i] + eps) / s : 1.0 / m_;
            }
        }
    }

    const std::vector<double>& raw_counts() const { return raw_; }
    const std::vector<double>& probabilities() const { return prob_; }

  private:
    int m_ = 0;
    std::vector<double> raw_, prob_;
};

inline LocalSCLP extract_local_sclp(std::span<const PairCounts* const> retrieved, int num_classes, double eps) {
    if (num_classes < 1) throw ArgumentError("local SCLP needs M >= 1");
    LocalSCLP l(num_classes);
    for (const PairCounts* pc : retrieved) l.accumulate(*pc);
    l.normalize(eps);
    return l;
}

/// Inspection record: u32 rank, u32 dims..., LE float32 values.
inline void save_tensor_record(const std::string& path, const std::vector<std::uint32_t>& dims, const std::vector<double>& values) {
    BinaryWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.put<std::uint32_t>(d);
    for (double v : values) w.put<float>(static_cast<float>(v));
    w.save(path);
}

inline void save_sclp(const std::string& global_path, const std::string& local_path, const GlobalSCLP& g, const LocalSCLP& l) {
    const auto m = static_cast<std::uint32_t>(g.num_classes());
    const auto k = static_cast<std::uint32_t>(g.blocks());
    save_tensor_record(global_path, {m, k, k > 0 ? k - 1 : 0, m}, g.probabilities());
    save_tensor_record(local_path, {static_cast<std::uint32_t>(l.num_classes()), static_cast<std::uint32_t>(l.num_classes())},
                       l.probabilities());
}

} // namespace sclp
