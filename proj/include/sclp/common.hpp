#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace sclp {

// Error kinds. Everything derives from Error so callers can catch one type;
// the CLI reports what() prefixed with the stage that failed.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LoadError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct ArgumentError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};
struct ComputationError : Error {
    using Error::Error;
};

using ClassIndex = int;
constexpr ClassIndex kUnlabeled = 0;

/// RGB image, channel-interleaved, intensities in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    void validate() const {
        if (width < 16 || height < 16)
            throw ArgumentError("image must be at least 16x16, got " + std::to_string(width) + "x" +
                                std::to_string(height));
        if (data.size() != pixel_count() * 3) throw ValidationError("image buffer size mismatch");
        for (float v : data)
            if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
                throw ValidationError("image intensity outside [0,1]");
    }
};

/// Per-pixel class index raster. 0 = unlabeled.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;

    LabelMap() = default;
    LabelMap(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return labels.size(); }

    bool operator==(const LabelMap&) const = default;
};

// Single-channel float raster used for intermediate filter responses.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Plane() = default;
    Plane(int w, int h, double fill = 0.0) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double clamped(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return at(x, y);
    }
};

inline Plane to_gray(const Image& img) {
    Plane g(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            g.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    return g;
}

// Separable convolution with clamp-to-edge borders.
inline Plane convolve_separable(const Plane& in, std::span<const double> kx, std::span<const double> ky) {
    const int rx = static_cast<int>(kx.size() / 2);
    const int ry = static_cast<int>(ky.size() / 2);
    Plane tmp(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0.0;
            for (int i = -rx; i <= rx; ++i) s += kx[i + rx] * in.clamped(x + i, y);
            tmp.at(x, y) = s;
        }
    Plane out(in.width, in.height);
    for (int y = 0; y < in.height; ++y)
        for (int x = 0; x < in.width; ++x) {
            double s = 0.0;
            for (int i = -ry; i <= ry; ++i) s += ky[i + ry] * tmp.clamped(x, y + i);
            out.at(x, y) = s;
        }
    return out;
}

// Normalized Gaussian kernel of radius ceil(4 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

// 64-bit FNV-1a; stable across platforms, used for cache keys.
class Hasher {
  public:
    Hasher& bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 1099511628211ull;
        }
        return *this;
    }
    Hasher& str(std::string_view s) {
        std::uint64_t n = s.size();
        bytes(&n, sizeof n);
        return bytes(s.data(), s.size());
    }
    template <typename T> Hasher& pod(const T& v) { return bytes(&v, sizeof v); }
    template <typename T> Hasher& vec(const std::vector<T>& v) {
        std::uint64_t n = v.size();
        bytes(&n, sizeof n);
        return bytes(v.data(), v.size() * sizeof(T));
    }
    std::uint64_t value() const { return h_; }
    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string s(16, '0');
        std::uint64_t v = h_;
        for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
        return s;
    }

  private:
    std::uint64_t h_ = 1469598103934665603ull;
};

// Little-endian binary writer/reader for cache records and model bundles.
class BinaryWriter {
  public:
    template <typename T> void put(T v) {
        static_assert(std::is_arithmetic_v<T>);
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
        buf_.insert(buf_.end(), b, b + sizeof(T));
    }
    void put_string(std::string_view s) {
        put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    template <typename T> void put_vector(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        for (const T& x : v) put<T>(x);
    }
    const std::vector<unsigned char>& buffer() const { return buf_; }
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot write " + path);
        out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!out) throw LoadError("write failed: " + path);
    }

  private:
    std::vector<unsigned char> buf_;
};

class BinaryReader {
  public:
    explicit BinaryReader(std::vector<unsigned char> buf) : buf_(std::move(buf)) {}
    static BinaryReader from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw LoadError("cannot open " + path);
        std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return BinaryReader(std::move(buf));
    }
    template <typename T> T get() {
        static_assert(std::is_arithmetic_v<T>);
        need(sizeof(T));
        unsigned char b[sizeof(T)];
        std::memcpy(b, buf_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
    std::string get_string() {
        auto n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    template <typename T> std::vector<T> get_vector() {
        auto n = get<std::uint64_t>();
        if (n > (buf_.size() - pos_) / sizeof(T)) throw LoadError("corrupt record: vector length");
        std::vector<T> v(n);
        for (auto& x : v) x = get<T>();
        return v;
    }
    bool done() const { return pos_ == buf_.size(); }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw LoadError("corrupt record: unexpected end");
    }
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must be
/// independent; results are written by index so output order is deterministic.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::exception_ptr> errors(nt);
    std::vector<std::thread> threads;
    threads.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t)
        threads.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nt) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : threads) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline void l1_normalize(std::span<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    if (s > 0.0)
        for (double& x : v) x /= s;
}

} // namespace sclp
