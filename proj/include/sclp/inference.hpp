#pragma once

// Contextual voting from the global and local priors, decision-level fusion
// with the visual field, and per-superpixel label assignment.

#include <sstream>

#include "sclp/cooccurrence.hpp"
#include "sclp/probability.hpp"
#include "sclp/segmentation.hpp"

namespace sclp {

struct FusionWeights {
    double w_const = 0.0;
    double w_global = 0.25;
    double w_local = 0.25;
    double w_visual = 0.5;

    void validate() const {
        for (double w : {w_const, w_global, w_local, w_visual})
            if (!std::isfinite(w)) throw ArgumentError("fusion weights must be finite");
        if (w_global < 0 || w_local < 0 || w_visual < 0) throw ArgumentError("fusion weights w_g, w_l, w_v must be >= 0");
        if (w_global == 0 && w_local == 0 && w_visual == 0) throw ArgumentError("fusion weights w_g, w_l, w_v are all zero");
    }

    /// "wc,wg,wl,wv"
    static FusionWeights parse(const std::string& s) {
        std::vector<double> v;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::logic_error&) {
                throw ArgumentError("bad fusion weight: '" + tok + "'");
            }
        }
        if (v.size() != 4) throw ArgumentError("fusion weights need 4 values wc,wg,wl,wv");
        FusionWeights w{v[0], v[1], v[2], v[3]};
        w.validate();
        return w;
    }

    std::string str() const {
        std::ostringstream os;
        os.precision(17);
        os << w_const << "," << w_global << "," << w_local << "," << w_visual;
        return os.str();
    }
};

/// Which visual confidence scales a vote: the voter's own (default) or the
/// receiver's.
enum class WeightMode { Voter, Receiver };

inline WeightMode parse_weight_mode(const std::string& s) {
    if (s == "voter") return WeightMode::Voter;
    if (s == "receiver") return WeightMode::Receiver;
    throw ArgumentError("unknown weight mode: " + s);
}
inline std::string to_string(WeightMode m) { return m == WeightMode::Voter ? "voter" : "receiver"; }

namespace detail {

inline double vote_weight(const ProbabilityField& visual, const SuperpixelSegmentation& seg, std::size_t voter,
                          std::size_t receiver, WeightMode mode) {
    const std::size_t who = mode == WeightMode::Voter ? voter : receiver;
    return visual.p(who, visual.argmax(who)) * static_cast<double>(seg.superpixels[voter].pixel_count);
}

inline void require_blocks(const SuperpixelSegmentation& seg, int k) {
    for (const auto& sp : seg.superpixels)
        if (!sp.block_id || *sp.block_id < 0 || *sp.block_id >= k)
            throw ArgumentError("superpixel without a valid block id");
}

} // namespace detail

inline void normalize_rows(ProbabilityField& f) {
    for (std::size_t l = 0; l < f.size(); ++l) normalize_or_uniform(f.row(l));
}

/// Raw global vote tallies V(c | S_l) from a direct double loop over
/// (receiver, voter) pairs; O(L^2 M).
inline ProbabilityField global_votes_naive(const SuperpixelSegmentation& seg, const ProbabilityField& visual,
                                           const GlobalSCLP& g, WeightMode mode = WeightMode::Voter) {
    const int m = g.num_classes();
    if (visual.size() != seg.superpixels.size()) throw ArgumentError("visual field does not match segmentation");
    detail::require_blocks(seg, g.blocks());
    ProbabilityField out(FieldTag::Global, seg.superpixels.size(), m);
    for (std::size_t l = 0; l < seg.superpixels.size(); ++l) {
        const int k2 = *seg.superpixels[l].block_id;
        auto v = out.row(l);
        for (std::size_t q = 0; q < seg.superpixels.size(); ++q) {
            const int k1 = *seg.superpixels[q].block_id;
            if (k1 == k2) continue;
            const double w = detail::vote_weight(visual, seg, q, l, mode);
            const auto r = g.row(visual.argmax(q), k1, k2);
            for (int c = 0; c < m; ++c) v[c] += w * r[c];
        }
    }
    return out;
}

/// Same tallies with voters pre-aggregated per (block, predicted class):
/// O(L M + K^2 M^2).
inline ProbabilityField global_votes(const SuperpixelSegmentation& seg, const ProbabilityField& visual, const GlobalSCLP& g,
                                     WeightMode mode = WeightMode::Voter) {
    const int m = g.num_classes(), k = g.blocks();
    if (visual.size() != seg.superpixels.size()) throw ArgumentError("visual field does not match segmentation");
    detail::require_blocks(seg, k);
    std::vector<double> mass(static_cast<std::size_t>(k) * m, 0.0);  // [k1][chat-1]
    for (std::size_t q = 0; q < seg.superpixels.size(); ++q) {
        const ClassIndex chat = visual.argmax(q);
        const double conf = mode == WeightMode::Voter ? visual.p(q, chat) : 1.0;
        mass[static_cast<std::size_t>(*seg.superpixels[q].block_id) * m + (chat - 1)] +=
            conf * static_cast<double>(seg.superpixels[q].pixel_count);
    }
    std::vector<double> block_votes(static_cast<std::size_t>(k) * m, 0.0);
    for (int k2 = 0; k2 < k; ++k2) {
        double* v = &block_votes[static_cast<std::size_t>(k2) * m];
        for (int k1 = 0; k1 < k; ++k1) {
            if (k1 == k2) continue;
            for (ClassIndex chat = 1; chat <= m; ++chat) {
                const double w = mass[static_cast<std::size_t>(k1) * m + (chat - 1)];
                if (w == 0.0) continue;
                const auto r = g.row(chat, k1, k2);
                for (int c = 0; c < m; ++c) v[c] += w * r[c];
            }
        }
    }
    ProbabilityField out(FieldTag::Global, seg.superpixels.size(), m);
    for (std::size_t l = 0; l < seg.superpixels.size(); ++l) {
        const int k2 = *seg.superpixels[l].block_id;
        const double scale = mode == WeightMode::Receiver ? visual.p(l, visual.argmax(l)) : 1.0;
        auto v = out.row(l);
        for (int c = 0; c < m; ++c) v[c] = scale * block_votes[static_cast<std::size_t>(k2) * m + c];
    }
    return out;
}

inline ProbabilityField vote_global_naive(const SuperpixelSegmentation& seg, const ProbabilityField& visual,
                                          const GlobalSCLP& g, WeightMode mode = WeightMode::Voter) {
    ProbabilityField f = global_votes_naive(seg, visual, g, mode);
    normalize_rows(f);
    return f;
}

/// Normalized global field; a receiver without out-of-block voters is uniform.
inline ProbabilityField vote_global(const SuperpixelSegmentation& seg, const ProbabilityField& visual, const GlobalSCLP& g,
                                    WeightMode mode = WeightMode::Voter) {
    ProbabilityField f = global_votes(seg, visual, g, mode);
    normalize_rows(f);
    return f;
}

/// Raw votes from the 4-connected neighbors through the local prior.
inline ProbabilityField local_votes(const SuperpixelSegmentation& seg, const ProbabilityField& visual, const LocalSCLP& l,
                                    WeightMode mode = WeightMode::Voter) {
    const int m = l.num_classes();
    if (visual.size() != seg.superpixels.size()) throw ArgumentError("visual field does not match segmentation");
    ProbabilityField out(FieldTag::Local, seg.superpixels.size(), m);
    for (std::size_t s = 0; s < seg.superpixels.size(); ++s) {
        auto v = out.row(s);
        for (int p : seg.superpixels[s].neighbors) {
            const auto q = static_cast<std::size_t>(p);
            const double w = detail::vote_weight(visual, seg, q, s, mode);
            const auto r = l.row(visual.argmax(q));
            for (int c = 0; c < m; ++c) v[c] += w * r[c];
        }
    }
    return out;
}

inline ProbabilityField vote_local(const SuperpixelSegmentation& seg, const ProbabilityField& visual, const LocalSCLP& l,
                                   WeightMode mode = WeightMode::Voter) {
    ProbabilityField f = local_votes(seg, visual, l, mode);
    normalize_rows(f);
    return f;
}

/// P = wc + wg Pg + wl Pl + wv Pv per class, renormalized per superpixel.
inline ProbabilityField fuse(const ProbabilityField& visual, const ProbabilityField& global, const ProbabilityField& local,
                             const FusionWeights& w) {
    if (visual.size() != global.size() || visual.size() != local.size() || visual.num_classes != global.num_classes ||
        visual.num_classes != local.num_classes)
        throw ArgumentError("fusion inputs cover different superpixels or classes");
    ProbabilityField out(FieldTag::Fused, visual.size(), visual.num_classes);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = w.w_const + w.w_global * global.values[i] + w.w_local * local.values[i] + w.w_visual * visual.values[i];
    normalize_rows(out);
    return out;
}

/// Every pixel takes its superpixel's most probable class (ties to the
/// smaller index).
inline LabelMap assign_labels(const ProbabilityField& fused, const SuperpixelSegmentation& seg) {
    if (fused.size() != seg.superpixels.size()) throw ArgumentError("fused field does not match segmentation");
    std::vector<std::uint8_t> cls(fused.size());
    for (std::size_t l = 0; l < fused.size(); ++l) cls[l] = static_cast<std::uint8_t>(fused.argmax(l));
    LabelMap out(seg.width, seg.height);
    for (std::size_t i = 0; i < seg.id_map.size(); ++i) out.labels[i] = cls[seg.id_map[i]];
    return out;
}

} // namespace sclp
