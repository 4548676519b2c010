#pragma once

#include "sclp/common.hpp"

namespace sclp {

enum class FieldTag { Visual, Global, Local, Fused };

/// Per-superpixel class distributions, L rows x M columns. Column j holds
/// class j+1 (the unlabeled class never carries probability mass).
struct ProbabilityField {
    FieldTag tag = FieldTag::Visual;
    int num_classes = 0;
    std::vector<double> values;

    ProbabilityField() = default;
    ProbabilityField(FieldTag t, std::size_t superpixels, int m)
        : tag(t), num_classes(m), values(superpixels * static_cast<std::size_t>(m), 0.0) {}

    std::size_t size() const { return num_classes == 0 ? 0 : values.size() / static_cast<std::size_t>(num_classes); }
    std::span<double> row(std::size_t l) { return {values.data() + l * num_classes, static_cast<std::size_t>(num_classes)}; }
    std::span<const double> row(std::size_t l) const {
        return {values.data() + l * num_classes, static_cast<std::size_t>(num_classes)};
    }
    double p(std::size_t l, ClassIndex c) const { return values[l * num_classes + (c - 1)]; }

    /// Most probable class (1-based); ties go to the smaller index.
    ClassIndex argmax(std::size_t l) const {
        const auto r = row(l);
        return static_cast<ClassIndex>(std::max_element(r.begin(), r.end()) - r.begin()) + 1;
    }

    bool on_simplex(double tol = 1e-9) const {
        for (std::size_t l = 0; l < size(); ++l) {
            double s = 0.0;
            for (double v : row(l)) {
                if (!(v >= 0.0)) return false;
                s += v;
            }
            if (std::abs(s - 1.0) > tol) return false;
        }
        return true;
    }
};

/// Normalizes v in place to sum 1; a zero (or non-positive) total becomes
/// the uniform distribution.
inline void normalize_or_uniform(std::span<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (!(s > 0.0)) {
        std::fill(v.begin(), v.end(), 1.0 / static_cast<double>(v.size()));
        return;
    }
    for (double& x : v) x /= s;
}

} // namespace sclp
