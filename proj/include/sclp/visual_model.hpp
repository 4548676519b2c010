#pragma once

// Superpixel visual features, per-class MRMR feature selection, and the
// one-vs-rest feedforward classifier producing the visual probability field.

#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "sclp/global_descriptors.hpp"
#include "sclp/kmeans.hpp"
#include "sclp/probability.hpp"
#include "sclp/segmentation.hpp"

namespace sclp {

// ---------------------------------------------------------------------------
// Texton filter bank: 3 Gaussians, 4 Laplacians of Gaussian, 10 oriented
// first-derivative-of-Gaussian filters (2 scales x 5 orientations), all on
// the grayscale image.

constexpr int kTextonFilters = 17;
constexpr int kTextonWords = 64;

namespace detail {

inline std::vector<double> gaussian_derivative_kernel(double sigma, int order) {
    const auto g = gaussian_kernel(sigma);
    const int r = static_cast<int>(g.size() / 2);
    std::vector<double> k(g.size());
    for (int i = -r; i <= r; ++i) {
        const double x = i;
        if (order == 1) k[i + r] = -x / (sigma * sigma) * g[i + r];
        else k[i + r] = (x * x - sigma * sigma) / (sigma * sigma * sigma * sigma) * g[i + r];
    }
    return k;
}

} // namespace detail

/// Per-pixel filter responses, one plane per filter.
inline std::vector<Plane> texton_responses(const Image& image) {
    const Plane g = to_gray(image);
    std::vector<Plane> out;
    out.reserve(kTextonFilters);
    for (double s : {1.0, 2.0, 4.0}) {
        const auto k = gaussian_kernel(s);
        out.push_back(convolve_separable(g, k, k));
    }
    for (double s : {1.0, 2.0, 4.0, 8.0}) {
        const auto k0 = gaussian_kernel(s);
        const auto k2 = detail::gaussian_derivative_kernel(s, 2);
        Plane a = convolve_separable(g, k2, k0);
        const Plane b = convolve_separable(g, k0, k2);
        for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] = (a.data[i] + b.data[i]) * s * s;
        out.push_back(std::move(a));
    }
    for (double s : {2.0, 4.0}) {
        const auto k0 = gaussian_kernel(s);
        const auto k1 = detail::gaussian_derivative_kernel(s, 1);
        const Plane gx = convolve_separable(g, k1, k0);
        const Plane gy = convolve_separable(g, k0, k1);
        for (int o = 0; o < 5; ++o) {
            const double th = o * std::numbers::pi / 5.0;
            Plane r(g.width, g.height);
            for (std::size_t i = 0; i < r.data.size(); ++i)
                r.data[i] = (std::cos(th) * gx.data[i] + std::sin(th) * gy.data[i]) * s;
            out.push_back(std::move(r));
        }
    }
    return out;
}

/// Texton vocabulary from filter responses sampled every `stride` pixels.
inline Codebook build_texton_codebook(std::span<const Image> images, std::uint64_t seed, int words = kTextonWords,
                                      int stride = 4) {
    Matrix samples;
    std::vector<double> v(kTextonFilters);
    for (const auto& img : images) {
        const auto resp = texton_responses(img);
        for (int y = stride / 2; y < img.height; y += stride)
            for (int x = stride / 2; x < img.width; x += stride) {
                for (int f = 0; f < kTextonFilters; ++f) v[f] = resp[f].at(x, y);
                samples.append_row(v);
            }
    }
    if (samples.rows < static_cast<std::size_t>(words))
        throw ArgumentError("not enough pixels for a texton vocabulary of " + std::to_string(words));
    return Codebook{kmeans(samples, {static_cast<std::size_t>(words), seed, 50, 1e-4})};
}

/// Texton word of every pixel.
inline std::vector<int> texton_map(const Image& image, const Codebook& textons) {
    const auto resp = texton_responses(image);
    std::vector<int> words(image.pixel_count());
    std::vector<double> v(kTextonFilters);
    for (std::size_t i = 0; i < words.size(); ++i) {
        for (int f = 0; f < kTextonFilters; ++f) v[f] = resp[f].data[i];
        words[i] = static_cast<int>(nearest_center(textons.centers, v));
    }
    return words;
}

// ---------------------------------------------------------------------------
// Superpixel feature suite (F = 145):
//   [0,3)     mean RGB
//   [3,67)    RGB histogram, 4 bins per channel
//   [67,131)  texton histogram
//   [131,139) gradient orientation histogram (magnitude-weighted)
//   [139,145) area/N, (cx+.5)/W, (cy+.5)/H, bbox w/W, bbox h/H, perimeter^2/area

constexpr int kColorBins = 4;
constexpr int kGradientBins = 8;
constexpr int kFeatureDim = 3 + kColorBins * kColorBins * kColorBins + kTextonWords + kGradientBins + 6;
constexpr int kColorHistOffset = 3;
constexpr int kTextonOffset = kColorHistOffset + kColorBins * kColorBins * kColorBins;
constexpr int kGradientOffset = kTextonOffset + kTextonWords;
constexpr int kGeometryOffset = kGradientOffset + kGradientBins;

inline Matrix superpixel_features(const Image& image, const SuperpixelSegmentation& seg, const Codebook& textons) {
    if (image.width != seg.width || image.height != seg.height)
        throw ArgumentError("segmentation does not belong to this image");
    if (textons.size() != static_cast<std::size_t>(kTextonWords))
        throw ArgumentError("texton codebook must have " + std::to_string(kTextonWords) + " words");
    const std::size_t L = seg.superpixels.size();
    Matrix f(L, kFeatureDim);
    const auto words = texton_map(image, textons);
    const GradientField gf = gradients(to_gray(image));
    std::vector<double> grad_total(L, 0.0);
    std::vector<std::size_t> perimeter(L, 0);
    const int w = image.width, h = image.height;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const int id = seg.id_map[i];
            auto r = f.row(static_cast<std::size_t>(id));
            const double red = image.data[i * 3], green = image.data[i * 3 + 1], blue = image.data[i * 3 + 2];
            r[0] += red;
            r[1] += green;
            r[2] += blue;
            const int bin = (uniform_bin(red, kColorBins) * kColorBins + uniform_bin(green, kColorBins)) * kColorBins +
                            uniform_bin(blue, kColorBins);
            r[kColorHistOffset + bin] += 1.0;
            r[kTextonOffset + words[i]] += 1.0;
            const double mag = gf.magnitude.at(x, y);
            r[kGradientOffset + orientation_bin(gf.angle.at(x, y), kGradientBins)] += mag;
            grad_total[id] += mag;
            // boundary pixel edges (image border counts)
            if (x == 0 || seg.id_map[i - 1] != id) ++perimeter[id];
            if (x == w - 1 || seg.id_map[i + 1] != id) ++perimeter[id];
            if (y == 0 || seg.id_map[i - w] != id) ++perimeter[id];
            if (y == h - 1 || seg.id_map[i + w] != id) ++perimeter[id];
        }
    const double n_pix = static_cast<double>(image.pixel_count());
    for (std::size_t l = 0; l < L; ++l) {
        const Superpixel& sp = seg.superpixels[l];
        const double cnt = static_cast<double>(sp.pixel_count);
        auto r = f.row(l);
        for (int c = 0; c < kTextonOffset; ++c) r[c] /= cnt;  // mean RGB and color histogram
        for (int t = 0; t < kTextonWords; ++t) r[kTextonOffset + t] /= cnt;
        if (grad_total[l] > 0.0)
            for (int b = 0; b < kGradientBins; ++b) r[kGradientOffset + b] /= grad_total[l];
        r[kGeometryOffset + 0] = cnt / n_pix;
        r[kGeometryOffset + 1] = (sp.cx + 0.5) / w;
        r[kGeometryOffset + 2] = (sp.cy + 0.5) / h;
        r[kGeometryOffset + 3] = static_cast<double>(sp.max_x - sp.min_x + 1) / w;
        r[kGeometryOffset + 4] = static_cast<double>(sp.max_y - sp.min_y + 1) / h;
        const double per = static_cast<double>(perimeter[l]);
        r[kGeometryOffset + 5] = per * per / cnt;
    }
    return f;
}

// ---------------------------------------------------------------------------
// MRMR feature selection

/// Three-level discretization: 1 above mean + w*std, -1 below mean - w*std,
/// else 0. Statistics are per feature over the training superpixels.
struct Discretizer {
    std::vector<double> mean;
    std::vector<double> stddev;
    double w = 0.5;

    static Discretizer fit(const Matrix& x, double w = 0.5) {
        Discretizer d;
        d.w = w;
        d.mean.assign(x.cols, 0.0);
        d.stddev.assign(x.cols, 0.0);
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) d.mean[j] += x(i, j);
        for (double& m : d.mean) m /= static_cast<double>(std::max<std::size_t>(x.rows, 1));
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double t = x(i, j) - d.mean[j];
                d.stddev[j] += t * t;
            }
        for (double& s : d.stddev) s = std::sqrt(s / static_cast<double>(std::max<std::size_t>(x.rows, 1)));
        return d;
    }

    std::int8_t level(std::size_t j, double v) const {
        if (v > mean[j] + w * stddev[j]) return 1;
        if (v < mean[j] - w * stddev[j]) return -1;
        return 0;
    }

    /// Column-major discretized copy (one vector per feature).
    std::vector<std::vector<std::int8_t>> apply(const Matrix& x) const {
        std::vector<std::vector<std::int8_t>> cols(x.cols, std::vector<std::int8_t>(x.rows));
        for (std::size_t i = 0; i < x.rows; ++i)
            for (std::size_t j = 0; j < x.cols; ++j) cols[j][i] = level(j, x(i, j));
        return cols;
    }
};

/// Mutual information (nats) between two discrete variables with values in
/// [-1, 1] (a binary target uses 0/1).
inline double mutual_information(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
    if (a.size() != b.size()) throw ArgumentError("mutual information: length mismatch");
    if (a.empty()) return 0.0;
    double joint[3][3] = {};
    double pa[3] = {}, pb[3] = {};
    for (std::size_t i = 0; i < a.size(); ++i) joint[a[i] + 1][b[i] + 1] += 1.0;
    const double n = static_cast<double>(a.size());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            joint[i][j] /= n;
            pa[i] += joint[i][j];
            pb[j] += joint[i][j];
        }
    double mi = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (joint[i][j] > 0.0) mi += joint[i][j] * std::log(joint[i][j] / (pa[i] * pb[j]));
    return std::max(0.0, mi);
}

/// Greedy MID selection: first pick maximizes I(f; target), later picks
/// maximize I(f; target) - mean_{s in S} I(f; s). Ties go to the lower index.
inline std::vector<int> mrmr_select(const std::vector<std::vector<std::int8_t>>& discrete,
                                    std::span<const std::int8_t> target, int count) {
    const int F = static_cast<int>(discrete.size());
    if (count < 1 || count > F) throw ArgumentError("MRMR count " + std::to_string(count) + " outside [1, " + std::to_string(F) + "]");
    std::vector<double> relevance(F);
    for (int f = 0; f < F; ++f) relevance[f] = mutual_information(discrete[f], target);
    std::vector<double> redundancy(F, 0.0);
    std::vector<bool> taken(F, false);
    std::vector<int> selected;
    selected.reserve(count);
    while (static_cast<int>(selected.size()) < count) {
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (int f = 0; f < F; ++f) {
            if (taken[f]) continue;
            const double score =
                selected.empty() ? relevance[f] : relevance[f] - redundancy[f] / static_cast<double>(selected.size());
            if (score > best_score) {
                best_score = score;
                best = f;
            }
        }
        taken[best] = true;
        selected.push_back(best);
        for (int f = 0; f < F; ++f)
            if (!taken[f]) redundancy[f] += mutual_information(discrete[f], discrete[best]);
    }
    return selected;
}

struct MrmrSelection {
    Discretizer discretizer;
    std::vector<std::vector<int>> per_class;  // index c-1 -> selected feature indices
};

/// Binary one-vs-rest targets; features are rows of `x`, labels are 1-based.
inline MrmrSelection mrmr_select_all(const Matrix& x, std::span<const ClassIndex> labels, int num_classes, int count,
                                     double w = 0.5) {
    MrmrSelection sel;
    sel.discretizer = Discretizer::fit(x, w);
    const auto disc = sel.discretizer.apply(x);
    std::vector<std::int8_t> target(labels.size());
    for (ClassIndex c = 1; c <= num_classes; ++c) {
        for (std::size_t i = 0; i < labels.size(); ++i) target[i] = labels[i] == c ? 1 : 0;
        sel.per_class.push_back(mrmr_select(disc, target, count));
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Feedforward network: inputs -> hidden (sigmoid) -> 1 (sigmoid), trained
// with binary cross-entropy.

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct Network {
    int inputs = 0;
    int hidden = 0;
    std::vector<double> w1;  // hidden x inputs
    std::vector<double> b1;
    std::vector<double> w2;  // hidden
    double b2 = 0.0;

    static Network init(int inputs, int hidden, std::mt19937_64& rng) {
        Network n;
        n.inputs = inputs;
        n.hidden = hidden;
        const double r1 = 1.0 / std::sqrt(static_cast<double>(inputs));
        const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        n.w1.resize(static_cast<std::size_t>(hidden) * inputs);
        for (double& v : n.w1) v = (2.0 * unit_uniform(rng) - 1.0) * r1;
        n.b1.resize(hidden);
        for (double& v : n.b1) v = (2.0 * unit_uniform(rng) - 1.0) * r1;
        n.w2.resize(hidden);
        for (double& v : n.w2) v = (2.0 * unit_uniform(rng) - 1.0) * r2;
        n.b2 = (2.0 * unit_uniform(rng) - 1.0) * r2;
        return n;
    }

    double forward(std::span<const double> x, std::span<double> h) const {
        double z = b2;
        for (int j = 0; j < hidden; ++j) {
            double a = b1[j];
            const double* wr = &w1[static_cast<std::size_t>(j) * inputs];
            for (int i = 0; i < inputs; ++i) a += wr[i] * x[i];
            h[j] = sigmoid(a);
            z += w2[j] * h[j];
        }
        return sigmoid(z);
    }

    double predict(std::span<const double> x) const {
        std::vector<double> h(hidden);
        return forward(x, h);
    }

    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
    // Flat views for gradient checking: w1, b1, w2, b2.
    double& parameter(std::size_t i) {
        if (i < w1.size()) return w1[i];
        i -= w1.size();
        if (i < b1.size()) return b1[i];
        i -= b1.size();
        if (i < w2.size()) return w2[i];
        return b2;
    }
};

struct NetworkGradient {
    std::vector<double> w1, b1, w2;
    double b2 = 0.0;

    explicit NetworkGradient(const Network& n)
        : w1(n.w1.size(), 0.0), b1(n.b1.size(), 0.0), w2(n.w2.size(), 0.0) {}
    double at(std::size_t i) const {
        if (i < w1.size()) return w1[i];
        i -= w1.size();
        if (i < b1.size()) return b1[i];
        i -= b1.size();
        if (i < w2.size()) return w2[i];
        return b2;
    }
};

inline double bce(double p, double y) {
    constexpr double eps = 1e-12;
    p = std::clamp(p, eps, 1.0 - eps);
    return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

/// Mean BCE loss over the given rows and its exact gradient.
inline double loss_and_gradient(const Network& net, const Matrix& x, std::span<const double> y,
                                std::span<const std::size_t> rows, NetworkGradient& g) {
    std::fill(g.w1.begin(), g.w1.end(), 0.0);
    std::fill(g.b1.begin(), g.b1.end(), 0.0);
    std::fill(g.w2.begin(), g.w2.end(), 0.0);
    g.b2 = 0.0;
    std::vector<double> h(net.hidden);
    double loss = 0.0;
    for (std::size_t r : rows) {
        const auto xi = x.row(r);
        const double o = net.forward(xi, h);
        loss += bce(o, y[r]);
        const double dz = o - y[r];
        g.b2 += dz;
        for (int j = 0; j < net.hidden; ++j) {
            g.w2[j] += dz * h[j];
            const double da = dz * net.w2[j] * h[j] * (1.0 - h[j]);
            g.b1[j] += da;
            double* gw = &g.w1[static_cast<std::size_t>(j) * net.inputs];
            for (int i = 0; i < net.inputs; ++i) gw[i] += da * xi[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& v : g.w1) v *= inv;
    for (double& v : g.b1) v *= inv;
    for (double& v : g.w2) v *= inv;
    g.b2 *= inv;
    return loss * inv;
}

struct TrainingOptions {
    int hidden = 16;
    int epochs = 200;
    int batch = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 1;
    int workers = 1;
};

struct TrainingTrace {
    std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// Mini-batch gradient descent on one binary problem. Rows are reshuffled
/// every epoch from the seeded generator.
inline Network train_network(const Matrix& x, std::span<const double> y, const TrainingOptions& opt, std::uint64_t seed,
                             TrainingTrace* trace = nullptr) {
    std::mt19937_64 rng(seed);
    Network net = Network::init(static_cast<int>(x.cols), opt.hidden, rng);
    NetworkGradient g(net);
    std::vector<std::size_t> order(x.rows);
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < opt.epochs; ++e) {
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opt.batch)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opt.batch));
            const std::span<const std::size_t> rows(order.data() + start, end - start);
            epoch_loss += loss_and_gradient(net, x, y, rows, g);
            ++batches;
            for (std::size_t i = 0; i < net.w1.size(); ++i) net.w1[i] -= opt.learning_rate * g.w1[i];
            for (std::size_t i = 0; i < net.b1.size(); ++i) net.b1[i] -= opt.learning_rate * g.b1[i];
            for (std::size_t i = 0; i < net.w2.size(); ++i) net.w2[i] -= opt.learning_rate * g.w2[i];
            net.b2 -= opt.learning_rate * g.b2;
        }
        if (trace) trace->epoch_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(batches, 1)));
    }
    return net;
}

struct ClassNetwork {
    std::vector<int> features;      // selected feature indices
    std::vector<double> mean, inv_std;  // z-score over training rows
    Network net;
    TrainingTrace trace;
};

/// One network per class, each consuming that class's selected features.
struct VisualClassifier {
    int num_classes = 0;
    std::uint64_t seed = 0;
    std::vector<ClassNetwork> classes;

    std::vector<double> inputs(std::size_t c, std::span<const double> feature_row) const {
        const ClassNetwork& cn = classes[c];
        std::vector<double> in(cn.features.size());
        for (std::size_t i = 0; i < in.size(); ++i)
            in[i] = (feature_row[static_cast<std::size_t>(cn.features[i])] - cn.mean[i]) * cn.inv_std[i];
        return in;
    }

    /// Raw per-class sigmoid scores for one superpixel.
    std::vector<double> scores(std::span<const double> feature_row) const {
        std::vector<double> s(classes.size());
        for (std::size_t c = 0; c < classes.size(); ++c) s[c] = classes[c].net.predict(inputs(c, feature_row));
        return s;
    }
};

inline VisualClassifier train_classifier(const Matrix& features, std::span<const ClassIndex> labels,
                                         const MrmrSelection& selection, const TrainingOptions& opt) {
    const int m = static_cast<int>(selection.per_class.size());
    if (features.rows != labels.size()) throw ArgumentError("feature/label count mismatch");
    for (ClassIndex c = 1; c <= m; ++c)
        if (std::find(labels.begin(), labels.end(), c) == labels.end())
            throw TrainingError("class " + std::to_string(c) + " has no positive training superpixel");
    VisualClassifier clf;
    clf.num_classes = m;
    clf.seed = opt.seed;
    clf.classes.resize(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), opt.workers, [&](std::size_t ci) {
        ClassNetwork& cn = clf.classes[ci];
        cn.features = selection.per_class[ci];
        const std::size_t d = cn.features.size();
        cn.mean.assign(d, 0.0);
        cn.inv_std.assign(d, 1.0);
        for (std::size_t r = 0; r < features.rows; ++r)
            for (std::size_t i = 0; i < d; ++i) cn.mean[i] += features(r, static_cast<std::size_t>(cn.features[i]));
        for (double& v : cn.mean) v /= static_cast<double>(features.rows);
        std::vector<double> var(d, 0.0);
        for (std::size_t r = 0; r < features.rows; ++r)
            for (std::size_t i = 0; i < d; ++i) {
                const double t = features(r, static_cast<std::size_t>(cn.features[i])) - cn.mean[i];
                var[i] += t * t;
            }
        for (std::size_t i = 0; i < d; ++i) {
            const double sd = std::sqrt(var[i] / static_cast<double>(features.rows));
            cn.inv_std[i] = sd > 1e-12 ? 1.0 / sd : 1.0;
        }
        Matrix x(features.rows, d);
        std::vector<double> y(features.rows);
        for (std::size_t r = 0; r < features.rows; ++r) {
            for (std::size_t i = 0; i < d; ++i)
                x(r, i) = (features(r, static_cast<std::size_t>(cn.features[i])) - cn.mean[i]) * cn.inv_std[i];
            y[r] = labels[r] == static_cast<ClassIndex>(ci + 1) ? 1.0 : 0.0;
        }
        cn.net = train_network(x, y, opt, opt.seed * 1000003ull + ci, &cn.trace);
    });
    return clf;
}

/// Per-class scores L1-normalized to a distribution; an all-zero score
/// vector becomes uniform.
inline ProbabilityField scores_to_field(const Matrix& scores) {
    ProbabilityField f(FieldTag::Visual, scores.rows, static_cast<int>(scores.cols));
    for (std::size_t l = 0; l < scores.rows; ++l) {
        auto r = f.row(l);
        std::copy(scores.row(l).begin(), scores.row(l).end(), r.begin());
        normalize_or_uniform(r);
    }
    return f;
}

inline ProbabilityField predict_visual(const VisualClassifier& clf, const Matrix& features) {
    Matrix s(features.rows, static_cast<std::size_t>(clf.num_classes));
    for (std::size_t l = 0; l < features.rows; ++l) {
        const auto sc = clf.scores(features.row(l));
        std::copy(sc.begin(), sc.end(), s.row(l).begin());
    }
    return scores_to_field(s);
}

inline void write_classifier(BinaryWriter& w, const VisualClassifier& clf) {
    w.put<std::int32_t>(clf.num_classes);
    w.put<std::uint64_t>(clf.seed);
    for (const auto& cn : clf.classes) {
        w.put_vector<std::int32_t>(std::vector<std::int32_t>(cn.features.begin(), cn.features.end()));
        w.put_vector(cn.mean);
        w.put_vector(cn.inv_std);
        w.put<std::int32_t>(cn.net.inputs);
        w.put<std::int32_t>(cn.net.hidden);
        w.put_vector(cn.net.w1);
        w.put_vector(cn.net.b1);
        w.put_vector(cn.net.w2);
        w.put<double>(cn.net.b2);
        w.put_vector(cn.trace.epoch_loss);
    }
}

inline VisualClassifier read_classifier(BinaryReader& r) {
    VisualClassifier clf;
    clf.num_classes = r.get<std::int32_t>();
    clf.seed = r.get<std::uint64_t>();
    if (clf.num_classes < 1 || clf.num_classes > 255) throw LoadError("corrupt classifier record");
    clf.classes.resize(static_cast<std::size_t>(clf.num_classes));
    for (auto& cn : clf.classes) {
        const auto f = r.get_vector<std::int32_t>();
        cn.features.assign(f.begin(), f.end());
        cn.mean = r.get_vector<double>();
        cn.inv_std = r.get_vector<double>();
        cn.net.inputs = r.get<std::int32_t>();
        cn.net.hidden = r.get<std::int32_t>();
        cn.net.w1 = r.get_vector<double>();
        cn.net.b1 = r.get_vector<double>();
        cn.net.w2 = r.get_vector<double>();
        cn.net.b2 = r.get<double>();
        cn.trace.epoch_loss = r.get_vector<double>();
        if (cn.net.w1.size() != static_cast<std::size_t>(cn.net.inputs) * cn.net.hidden ||
            cn.features.size() != static_cast<std::size_t>(cn.net.inputs))
            throw LoadError("corrupt classifier record: shape mismatch");
    }
    return clf;
}

} // namespace sclp
