#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "sclp/common.hpp"

namespace sclp {

/// Row-major N x D sample matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    void append_row(std::span<const double> r) {
        if (rows == 0 && cols == 0) cols = r.size();
        if (r.size() != cols) throw ArgumentError("row width mismatch");
        data.insert(data.end(), r.begin(), r.end());
        ++rows;
    }
};

// Uniform double in [0,1) from 53 bits; identical on every platform, unlike
// std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t nearest_center(const Matrix& centers, std::span<const double> x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.rows; ++k) {
        const double d = squared_distance(centers.row(k), x);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

struct KMeansOptions {
    std::size_t k = 2;
    std::uint64_t seed = 0;
    int max_iterations = 50;
    double tolerance = 1e-4;  // max centroid shift (L2)
};

/// Lloyd's k-means with k-means++ seeding. Empty clusters keep their
/// previous center.
inline Matrix kmeans(const Matrix& samples, const KMeansOptions& opt) {
    if (opt.k < 1) throw ArgumentError("k-means needs k >= 1");
    if (samples.rows < opt.k)
        throw ArgumentError("k-means: " + std::to_string(samples.rows) + " samples for " + std::to_string(opt.k) + " centers");
    std::mt19937_64 rng(opt.seed);
    const std::size_t n = samples.rows, dim = samples.cols;
    Matrix centers(opt.k, dim);

    std::size_t first = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
    std::copy_n(samples.row(first).begin(), dim, centers.row(0).begin());
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(samples.row(i), centers.row(0));
    for (std::size_t c = 1; c < opt.k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = unit_uniform(rng) * total;
            double acc = 0.0;
            pick = n;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n)  // rounding at the tail
                for (std::size_t i = n; i-- > 0;)
                    if (d2[i] > 0.0) {
                        pick = i;
                        break;
                    }
        } else {
            pick = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n));
        }
        std::copy_n(samples.row(pick).begin(), dim, centers.row(c).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(samples.row(i), centers.row(c)));
    }

    std::vector<std::size_t> assign(n);
    for (int it = 0; it < opt.max_iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) assign[i] = nearest_center(centers, samples.row(i));
        Matrix sums(opt.k, dim);
        std::vector<std::size_t> counts(opt.k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assign[i]];
            auto s = sums.row(assign[i]);
            auto x = samples.row(i);
            for (std::size_t j = 0; j < dim; ++j) s[j] += x[j];
        }
        double max_shift = 0.0;
        for (std::size_t c = 0; c < opt.k; ++c) {
            if (counts[c] == 0) continue;
            auto s = sums.row(c);
            for (double& v : s) v /= static_cast<double>(counts[c]);
            max_shift = std::max(max_shift, std::sqrt(squared_distance(s, centers.row(c))));
            std::copy(s.begin(), s.end(), centers.row(c).begin());
        }
        if (max_shift < opt.tolerance) break;
    }
    return centers;
}

} // namespace sclp
