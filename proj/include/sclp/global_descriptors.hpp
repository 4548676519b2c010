#pragma once

// Whole-image descriptors for similar-image retrieval: tiny image, joint RGB
// histogram, a GIST-style oriented filter-bank descriptor, and a spatial
// pyramid of quantized dense gradient-orientation descriptors.

#include <fftw3.h>

#include <array>
#include <complex>
#include <mutex>
#include <numbers>

#include "sclp/common.hpp"
#include "sclp/kmeans.hpp"

namespace sclp {

/// Bilinear resampling with pixel-center alignment; an output the same size
/// as the input reproduces it.
inline Plane resize_bilinear(const Plane& in, int out_w, int out_h) {
    Plane out(out_w, out_h);
    const double sx = static_cast<double>(in.width) / out_w;
    const double sy = static_cast<double>(in.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(in.height - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, in.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(in.width - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, in.width - 1);
            const double tx = fx - x0;
            const double top = (1 - tx) * in.at(x0, y0) + tx * in.at(x1, y0);
            const double bot = (1 - tx) * in.at(x0, y1) + tx * in.at(x1, y1);
            out.at(x, y) = (1 - ty) * top + ty * bot;
        }
    }
    return out;
}

inline Plane channel_plane(const Image& img, int c) {
    Plane p(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) p.at(x, y) = img.at(x, y, c);
    return p;
}

constexpr int kTinySide = 16;

/// 16x16x3 bilinear thumbnail, flattened (y, x, channel).
inline std::vector<double> tiny_image(const Image& image) {
    std::array<Plane, 3> small;
    for (int c = 0; c < 3; ++c) small[c] = resize_bilinear(channel_plane(image, c), kTinySide, kTinySide);
    std::vector<double> out;
    out.reserve(kTinySide * kTinySide * 3);
    for (int y = 0; y < kTinySide; ++y)
        for (int x = 0; x < kTinySide; ++x)
            for (int c = 0; c < 3; ++c) out.push_back(small[c].at(x, y));
    return out;
}

inline int uniform_bin(double v, int bins) { return std::clamp(static_cast<int>(v * bins), 0, bins - 1); }

/// Joint RGB histogram with `bins` uniform bins per channel, L1-normalized.
/// Bin index = (r * bins + g) * bins + b.
inline std::vector<double> rgb_histogram(const Image& image, int bins = 8) {
    std::vector<double> h(static_cast<std::size_t>(bins) * bins * bins, 0.0);
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const int r = uniform_bin(image.data[i * 3], bins);
        const int g = uniform_bin(image.data[i * 3 + 1], bins);
        const int b = uniform_bin(image.data[i * 3 + 2], bins);
        h[(static_cast<std::size_t>(r) * bins + g) * bins + b] += 1.0;
    }
    l1_normalize(h);
    return h;
}

// ---------------------------------------------------------------------------
// GIST-style descriptor

struct GistParams {
    int side = 128;
    int scales = 4;
    int orientations = 8;
    int grid = 4;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

// Owns an in-place 2D complex FFT buffer and its forward/backward plans.
class Fft2d {
  public:
    Fft2d(int w, int h) : w_(w), h_(h) {
        buf_ = fftw_alloc_complex(static_cast<std::size_t>(w) * h);
        std::lock_guard lock(fftw_planner_mutex());
        fwd_ = fftw_plan_dft_2d(h, w, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(h, w, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Fft2d() {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
    }
    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(buf_); }
    void forward() { fftw_execute(fwd_); }
    void backward() { fftw_execute(bwd_); }

  private:
    int w_, h_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

} // namespace detail

/// Frequency-domain transfer function of one filter: a log-Gabor radial
/// profile times an angular Gaussian (symmetric under f -> -f so the spatial
/// kernel is real). Exactly zero at DC.
inline double gist_transfer(double u, double v, int scale, int orientation, const GistParams& p) {
    const double f = std::hypot(u, v);
    if (f == 0.0) return 0.0;
    const double f0 = 0.3 / std::pow(2.0, scale);
    const double log_ratio = std::log(f / f0);
    const double radial = std::exp(-(log_ratio * log_ratio) / (2.0 * std::pow(std::log(0.55), 2)));
    const double theta0 = orientation * std::numbers::pi / p.orientations;
    double d = std::fmod(std::atan2(v, u) - theta0, std::numbers::pi);
    if (d < -std::numbers::pi / 2) d += std::numbers::pi;
    if (d > std::numbers::pi / 2) d -= std::numbers::pi;
    const double sigma_theta = std::numbers::pi / p.orientations;
    return radial * std::exp(-(d * d) / (2.0 * sigma_theta * sigma_theta));
}

/// Grayscale, resized to side x side, filtered by scales x orientations
/// band-pass filters, |response| averaged over a grid x grid layout.
/// Output order: scale, orientation, cell row, cell column.
inline std::vector<double> gist_descriptor(const Image& image, const GistParams& p = {}) {
    const Plane g = resize_bilinear(to_gray(image), p.side, p.side);
    const int n = p.side;
    detail::Fft2d fft(n, n);
    auto* buf = fft.data();
    for (std::size_t i = 0; i < g.data.size(); ++i) buf[i] = g.data[i];
    fft.forward();
    const std::vector<std::complex<double>> spectrum(buf, buf + static_cast<std::size_t>(n) * n);

    auto freq = [n](int k) { return (k < n / 2 ? k : k - n) / static_cast<double>(n); };
    const int cell = n / p.grid;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(p.scales) * p.orientations * p.grid * p.grid);
    for (int s = 0; s < p.scales; ++s)
        for (int o = 0; o < p.orientations; ++o) {
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * n + x;
                    buf[i] = spectrum[i] * gist_transfer(freq(x), freq(y), s, o, p);
                }
            fft.backward();
            const double norm = 1.0 / (static_cast<double>(n) * n);
            for (int gy = 0; gy < p.grid; ++gy)
                for (int gx = 0; gx < p.grid; ++gx) {
                    double acc = 0.0;
                    for (int y = gy * cell; y < (gy + 1) * cell; ++y)
                        for (int x = gx * cell; x < (gx + 1) * cell; ++x)
                            acc += std::abs(buf[static_cast<std::size_t>(y) * n + x]) * norm;
                    out.push_back(acc / (cell * cell));
                }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Dense gradient-orientation descriptors and the spatial pyramid

struct DenseDescriptorParams {
    int cell = 8;        // cell side in pixels
    int cells = 4;       // cells per patch side
    int bins = 8;        // orientation bins over [0, 2pi)
    int stride = 8;
    int dim() const { return cells * cells * bins; }
    int patch() const { return cell * cells; }
};

struct GradientField {
    Plane magnitude;
    Plane angle;  // [0, 2pi)
};

inline GradientField gradients(const Plane& g) {
    GradientField f{Plane(g.width, g.height), Plane(g.width, g.height)};
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const double dx = 0.5 * (g.clamped(x + 1, y) - g.clamped(x - 1, y));
            const double dy = 0.5 * (g.clamped(x, y + 1) - g.clamped(x, y - 1));
            f.magnitude.at(x, y) = std::hypot(dx, dy);
            double a = std::atan2(dy, dx);
            if (a < 0) a += 2.0 * std::numbers::pi;
            f.angle.at(x, y) = a;
        }
    return f;
}

inline int orientation_bin(double angle, int bins) {
    return std::min(static_cast<int>(angle / (2.0 * std::numbers::pi) * bins), bins - 1);
}

struct DenseDescriptor {
    double cx = 0.0, cy = 0.0;  // patch center
    std::vector<double> values;
};

inline std::vector<int> patch_origins(int extent, int patch, int stride) {
    std::vector<int> o;
    if (extent < patch) return {0};
    for (int v = 0; v + patch <= extent; v += stride) o.push_back(v);
    return o;
}

/// Patches of cells x cells histograms (magnitude-weighted, hard orientation
/// bins), L2-normalized. Reads outside the image are clamped.
inline std::vector<DenseDescriptor> dense_descriptors(const Image& image, const DenseDescriptorParams& p = {}) {
    const GradientField gf = gradients(to_gray(image));
    std::vector<DenseDescriptor> out;
    const int ps = p.patch();
    for (int oy : patch_origins(image.height, ps, p.stride))
        for (int ox : patch_origins(image.width, ps, p.stride)) {
            DenseDescriptor d;
            d.cx = ox + ps / 2.0;
            d.cy = oy + ps / 2.0;
            d.values.assign(static_cast<std::size_t>(p.dim()), 0.0);
            for (int dy = 0; dy < ps; ++dy)
                for (int dx = 0; dx < ps; ++dx) {
                    const int x = std::min(ox + dx, image.width - 1), y = std::min(oy + dy, image.height - 1);
                    const int cell = (dy / p.cell) * p.cells + dx / p.cell;
                    d.values[static_cast<std::size_t>(cell) * p.bins + orientation_bin(gf.angle.at(x, y), p.bins)] +=
                        gf.magnitude.at(x, y);
                }
            double norm = 0.0;
            for (double v : d.values) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 0.0)
                for (double& v : d.values) v /= norm;
            out.push_back(std::move(d));
        }
    return out;
}

struct Codebook {
    Matrix centers;
    std::size_t size() const { return centers.rows; }
};

inline Matrix stack_descriptors(const std::vector<DenseDescriptor>& ds) {
    Matrix m;
    for (const auto& d : ds) m.append_row(d.values);
    return m;
}

/// k-means vocabulary over dense descriptors pooled from all images.
inline Codebook build_codebook(std::span<const Image> images, std::size_t vocabulary_size, std::uint64_t seed,
                               const DenseDescriptorParams& p = {}) {
    Matrix all;
    for (const auto& img : images)
        for (const auto& d : dense_descriptors(img, p)) all.append_row(d.values);
    if (vocabulary_size < 2) throw ArgumentError("codebook size must be >= 2");
    if (all.rows < vocabulary_size)
        throw ArgumentError("only " + std::to_string(all.rows) + " local descriptors for a codebook of " +
                            std::to_string(vocabulary_size));
    return Codebook{kmeans(all, {vocabulary_size, seed, 50, 1e-4})};
}

constexpr int kPyramidLevels = 3;

inline std::size_t pyramid_dim(std::size_t vocab) {
    std::size_t cells = 0;
    for (int l = 0; l < kPyramidLevels; ++l) cells += (1u << l) * (1u << l);
    return vocab * cells;
}

/// Raw word counts per pyramid level (levels 0..2 -> 1x1, 2x2, 4x4 cells),
/// laid out level, cell row, cell column, word.
inline std::vector<double> spatial_pyramid_counts(const Image& image, const Codebook& cb, const DenseDescriptorParams& p = {}) {
    const std::size_t v = cb.size();
    std::vector<double> out(pyramid_dim(v), 0.0);
    for (const auto& d : dense_descriptors(image, p)) {
        const std::size_t word = nearest_center(cb.centers, d.values);
        std::size_t offset = 0;
        for (int l = 0; l < kPyramidLevels; ++l) {
            const int cells = 1 << l;
            const int cx = std::min(static_cast<int>(d.cx * cells / image.width), cells - 1);
            const int cy = std::min(static_cast<int>(d.cy * cells / image.height), cells - 1);
            out[offset + (static_cast<std::size_t>(cy) * cells + cx) * v + word] += 1.0;
            offset += static_cast<std::size_t>(cells) * cells * v;
        }
    }
    return out;
}

/// Pyramid counts with each level L1-normalized independently.
inline std::vector<double> spatial_pyramid_descriptor(const Image& image, const Codebook& cb, const DenseDescriptorParams& p = {}) {
    std::vector<double> out = spatial_pyramid_counts(image, cb, p);
    std::size_t offset = 0;
    for (int l = 0; l < kPyramidLevels; ++l) {
        const std::size_t len = (1u << l) * (1u << l) * cb.size();
        l1_normalize(std::span<double>(out.data() + offset, len));
        offset += len;
    }
    return out;
}

enum class DescriptorKind { SpatialPyramid = 0, Gist = 1, Tiny = 2, RgbHistogram = 3 };
constexpr int kDescriptorKinds = 4;

inline const char* descriptor_name(int kind) {
    static const char* names[] = {"pyramid", "gist", "tiny", "rgb_hist"};
    return names[kind];
}

struct GlobalFeatureSet {
    std::array<std::vector<double>, kDescriptorKinds> features;

    const std::vector<double>& operator[](DescriptorKind k) const { return features[static_cast<int>(k)]; }
};

inline GlobalFeatureSet global_features(const Image& image, const Codebook& cb) {
    GlobalFeatureSet g;
    g.features[static_cast<int>(DescriptorKind::SpatialPyramid)] = spatial_pyramid_descriptor(image, cb);
    g.features[static_cast<int>(DescriptorKind::Gist)] = gist_descriptor(image);
    g.features[static_cast<int>(DescriptorKind::Tiny)] = tiny_image(image);
    g.features[static_cast<int>(DescriptorKind::RgbHistogram)] = rgb_histogram(image);
    return g;
}

/// Descriptor cache record: u32 count, u32 dimension, then LE float32 values.
inline void save_float_record(const std::string& path, const std::vector<std::vector<double>>& rows) {
    BinaryWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(rows.size()));
    for (const auto& r : rows) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(r.size()));
        for (double v : r) w.put<float>(static_cast<float>(v));
    }
    w.save(path);
}

inline std::vector<std::vector<double>> load_float_record(const std::string& path) {
    auto r = BinaryReader::from_file(path);
    std::vector<std::vector<double>> rows(r.get<std::uint32_t>());
    for (auto& row : rows) {
        row.resize(r.get<std::uint32_t>());
        for (double& v : row) v = r.get<float>();
    }
    if (!r.done()) throw LoadError("trailing bytes in record " + path);
    return rows;
}

/// Rounds through float32 so freshly computed values equal cached ones.
inline void round_to_float(std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

} // namespace sclp
