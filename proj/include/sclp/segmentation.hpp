#pragma once

// Graph-based superpixel segmentation (Felzenszwalb-Huttenlocher), the
// superpixel adjacency graph, and centroid-based block assignment.

#include <array>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

#include "sclp/common.hpp"

namespace sclp {

struct SegmentationParams {
    double sigma = 0.8;
    double k_scale = 200.0;
    int min_size = 100;

    void validate() const {
        if (!(sigma > 0.0)) throw ArgumentError("segmentation sigma must be > 0");
        if (!(k_scale > 0.0)) throw ArgumentError("segmentation k_scale must be > 0");
        if (min_size < 1) throw ArgumentError("segmentation min_size must be >= 1");
    }

    /// k = k_scale * max(1, sqrt(D / 640)), D = max(width, height).
    double effective_k(int width, int height) const {
        const double d = std::max(width, height);
        return k_scale * std::max(1.0, std::sqrt(d / 640.0));
    }
};

struct Superpixel {
    std::size_t pixel_count = 0;
    double cx = 0.0;
    double cy = 0.0;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    std::optional<int> block_id;
    std::vector<int> neighbors;  // sorted ascending
};

struct SuperpixelSegmentation {
    int width = 0;
    int height = 0;
    std::vector<int> id_map;
    std::vector<Superpixel> superpixels;

    int id_at(int x, int y) const { return id_map[static_cast<std::size_t>(y) * width + x]; }
    int size() const { return static_cast<int>(superpixels.size()); }
};

namespace detail {

class DisjointSet {
  public:
    explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    // returns the new root
    std::size_t join(std::size_t a, std::size_t b) {
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        size_[a] += size_[b];
        if (rank_[a] == rank_[b]) ++rank_[a];
        return a;
    }
    std::size_t size(std::size_t root) const { return size_[root]; }

  private:
    std::vector<std::size_t> parent_;
    std::vector<int> rank_;
    std::vector<std::size_t> size_;
};

struct GridEdge {
    float w;
    std::uint32_t a, b;
};

} // namespace detail

/// Fills pixel_count, centroid, bounding box and 4-connected neighbors from id_map.
inline void compute_superpixel_stats(SuperpixelSegmentation& seg) {
    int n = 0;
    for (int id : seg.id_map) n = std::max(n, id + 1);
    seg.superpixels.assign(static_cast<std::size_t>(n), Superpixel{});
    std::vector<double> sx(n, 0.0), sy(n, 0.0);
    for (auto& sp : seg.superpixels) {
        sp.min_x = seg.width;
        sp.min_y = seg.height;
        sp.max_x = -1;
        sp.max_y = -1;
    }
    std::vector<std::set<int>> nb(n);
    for (int y = 0; y < seg.height; ++y)
        for (int x = 0; x < seg.width; ++x) {
            const int id = seg.id_at(x, y);
            Superpixel& sp = seg.superpixels[id];
            ++sp.pixel_count;
            sx[id] += x;
            sy[id] += y;
            sp.min_x = std::min(sp.min_x, x);
            sp.min_y = std::min(sp.min_y, y);
            sp.max_x = std::max(sp.max_x, x);
            sp.max_y = std::max(sp.max_y, y);
            if (x + 1 < seg.width) {
                const int r = seg.id_at(x + 1, y);
                if (r != id) nb[id].insert(r), nb[r].insert(id);
            }
            if (y + 1 < seg.height) {
                const int d = seg.id_at(x, y + 1);
                if (d != id) nb[id].insert(d), nb[d].insert(id);
            }
        }
    for (int i = 0; i < n; ++i) {
        auto& sp = seg.superpixels[i];
        if (sp.pixel_count == 0) throw ValidationError("superpixel ids are not contiguous");
        sp.cx = sx[i] / static_cast<double>(sp.pixel_count);
        sp.cy = sy[i] / static_cast<double>(sp.pixel_count);
        sp.neighbors.assign(nb[i].begin(), nb[i].end());
    }
}

/// Neighbor sets of the segmentation (4-connectivity, no self-adjacency).
inline std::vector<std::vector<int>> adjacency(const SuperpixelSegmentation& seg) {
    std::vector<std::vector<int>> out;
    out.reserve(seg.superpixels.size());
    for (const auto& sp : seg.superpixels) out.push_back(sp.neighbors);
    return out;
}

/// Builds a segmentation from an arbitrary id raster: ids are relabeled
/// contiguously in raster order of first appearance.
inline SuperpixelSegmentation segmentation_from_ids(int width, int height, std::span<const int> raw_ids) {
    SuperpixelSegmentation seg;
    seg.width = width;
    seg.height = height;
    seg.id_map.resize(raw_ids.size());
    std::unordered_map<int, int> lookup;
    int next = 0;
    for (std::size_t i = 0; i < raw_ids.size(); ++i) {
        auto [it, inserted] = lookup.try_emplace(raw_ids[i], next);
        if (inserted) ++next;
        seg.id_map[i] = it->second;
    }
    compute_superpixel_stats(seg);
    return seg;
}

/// Gaussian-smoothed channel planes on the 0-255 intensity scale the k
/// constant is calibrated against.
inline std::array<Plane, 3> smoothed_channels(const Image& image, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    std::array<Plane, 3> out;
    for (int c = 0; c < 3; ++c) {
        Plane p(image.width, image.height);
        for (int y = 0; y < image.height; ++y)
            for (int x = 0; x < image.width; ++x) p.at(x, y) = 255.0 * image.at(x, y, c);
        out[c] = convolve_separable(p, kernel, kernel);
    }
    return out;
}

inline SuperpixelSegmentation segment(const Image& image, const SegmentationParams& params) {
    params.validate();
    const int w = image.width, h = image.height;
    const auto ch = smoothed_channels(image, params.sigma);
    auto diff = [&](int x1, int y1, int x2, int y2) {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) {
            const double d = ch[c].at(x1, y1) - ch[c].at(x2, y2);
            s += d * d;
        }
        return static_cast<float>(std::sqrt(s));
    };

    // 8-connected grid graph; each undirected edge once.
    std::vector<detail::GridEdge> edges;
    edges.reserve(static_cast<std::size_t>(w) * h * 4);
    auto idx = [w](int x, int y) { return static_cast<std::uint32_t>(y * w + x); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) edges.push_back({diff(x, y, x + 1, y), idx(x, y), idx(x + 1, y)});
            if (y + 1 < h) edges.push_back({diff(x, y, x, y + 1), idx(x, y), idx(x, y + 1)});
            if (x + 1 < w && y + 1 < h) edges.push_back({diff(x, y, x + 1, y + 1), idx(x, y), idx(x + 1, y + 1)});
            if (x + 1 < w && y > 0) edges.push_back({diff(x, y, x + 1, y - 1), idx(x, y), idx(x + 1, y - 1)});
        }
    // equal weights keep construction order
    std::stable_sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) { return a.w < b.w; });

    const double k = params.effective_k(w, h);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    detail::DisjointSet ds(n);
    std::vector<double> threshold(n, k);
    for (const auto& e : edges) {
        std::size_t a = ds.find(e.a), b = ds.find(e.b);
        if (a == b) continue;
        if (e.w <= threshold[a] && e.w <= threshold[b]) {
            const std::size_t r = ds.join(a, b);
            threshold[r] = e.w + k / static_cast<double>(ds.size(r));
        }
    }
    // Small components take their lowest-weight neighbor.
    for (const auto& e : edges) {
        std::size_t a = ds.find(e.a), b = ds.find(e.b);
        if (a != b && (ds.size(a) < static_cast<std::size_t>(params.min_size) ||
                       ds.size(b) < static_cast<std::size_t>(params.min_size)))
            ds.join(a, b);
    }

    std::vector<int> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<int>(ds.find(i));
    return segmentation_from_ids(w, h, raw);
}

/// K = rows*cols rectangles tiling the image; remainders go to the last
/// column/row. Rectangles are half-open [x0, x1) x [y0, y1).
class BlockGrid {
  public:
    BlockGrid(int rows, int cols, int width, int height) : rows_(rows), cols_(cols), width_(width), height_(height) {
        if (rows < 1 || cols < 1) throw ArgumentError("block grid needs rows, cols >= 1");
        if (cols > width || rows > height) throw ArgumentError("block grid finer than the image");
        bw_ = width / cols;
        bh_ = height / rows;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }

    struct Rect {
        int x0, y0, x1, y1;
    };
    Rect rect(int block) const {
        const int r = block / cols_, c = block % cols_;
        return {c * bw_, r * bh_, c == cols_ - 1 ? width_ : (c + 1) * bw_, r == rows_ - 1 ? height_ : (r + 1) * bh_};
    }

    int block_at(double x, double y) const {
        const int px = std::clamp(static_cast<int>(std::floor(x)), 0, width_ - 1);
        const int py = std::clamp(static_cast<int>(std::floor(y)), 0, height_ - 1);
        const int c = std::min(px / bw_, cols_ - 1);
        const int r = std::min(py / bh_, rows_ - 1);
        return r * cols_ + c;
    }

  private:
    int rows_, cols_, width_, height_;
    int bw_, bh_;
};

/// Sets block_id of every superpixel to the block containing its centroid.
inline void assign_blocks(SuperpixelSegmentation& seg, const BlockGrid& grid) {
    for (auto& sp : seg.superpixels) sp.block_id = grid.block_at(sp.cx, sp.cy);
}

/// Per-superpixel class pixel histograms, index 0 = unlabeled.
inline std::vector<std::vector<std::uint32_t>> superpixel_class_histograms(const SuperpixelSegmentation& seg,
                                                                           const LabelMap& labels, int num_classes) {
    if (labels.width != seg.width || labels.height != seg.height)
        throw ArgumentError("label map and segmentation dimensions differ");
    std::vector<std::vector<std::uint32_t>> hist(seg.superpixels.size(),
                                                 std::vector<std::uint32_t>(static_cast<std::size_t>(num_classes) + 1, 0));
    for (std::size_t i = 0; i < seg.id_map.size(); ++i) {
        const int v = labels.labels[i];
        if (v <= num_classes) ++hist[seg.id_map[i]][v];
    }
    return hist;
}

/// Majority label excluding unlabeled pixels, ties to the smaller index;
/// 0 when the superpixel is entirely unlabeled.
inline ClassIndex majority_label(std::span<const std::uint32_t> hist) {
    ClassIndex best = kUnlabeled;
    std::uint32_t best_count = 0;
    for (std::size_t c = 1; c < hist.size(); ++c)
        if (hist[c] > best_count) {
            best_count = hist[c];
            best = static_cast<ClassIndex>(c);
        }
    return best;
}

inline std::vector<ClassIndex> superpixel_labels(const SuperpixelSegmentation& seg, const LabelMap& labels, int num_classes) {
    const auto hist = superpixel_class_histograms(seg, labels, num_classes);
    std::vector<ClassIndex> out(hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) out[i] = majority_label(hist[i]);
    return out;
}

/// Cache form: id raster record (magic, dims, int32 ids) plus metadata text.
inline void save_segmentation(const SuperpixelSegmentation& seg, const std::string& ids_path, const std::string& meta_path) {
    BinaryWriter w;
    w.put<std::uint32_t>(0x44495053u);  // "SPID"
    w.put<std::int32_t>(seg.width);
    w.put<std::int32_t>(seg.height);
    for (int id : seg.id_map) w.put<std::int32_t>(id);
    w.save(ids_path);

    std::ofstream meta(meta_path, std::ios::trunc);
    if (!meta) throw LoadError("cannot write " + meta_path);
    meta.precision(17);
    meta << "superpixels " << seg.superpixels.size() << "\n";
    for (std::size_t i = 0; i < seg.superpixels.size(); ++i) {
        const auto& sp = seg.superpixels[i];
        meta << i << " " << sp.pixel_count << " " << sp.cx << " " << sp.cy << " " << sp.neighbors.size();
        for (int nbr : sp.neighbors) meta << " " << nbr;
        meta << "\n";
    }
}

inline SuperpixelSegmentation load_segmentation(const std::string& ids_path, const std::string& meta_path) {
    auto r = BinaryReader::from_file(ids_path);
    if (r.get<std::uint32_t>() != 0x44495053u) throw LoadError("bad segmentation record: " + ids_path);
    SuperpixelSegmentation seg;
    seg.width = r.get<std::int32_t>();
    seg.height = r.get<std::int32_t>();
    if (seg.width <= 0 || seg.height <= 0) throw LoadError("bad segmentation dims: " + ids_path);
    seg.id_map.resize(static_cast<std::size_t>(seg.width) * seg.height);
    for (int& id : seg.id_map) id = r.get<std::int32_t>();
    compute_superpixel_stats(seg);

    std::ifstream meta(meta_path);
    std::string tag;
    std::size_t n = 0;
    if (!(meta >> tag >> n) || tag != "superpixels" || n != seg.superpixels.size())
        throw LoadError("segmentation metadata does not match id raster: " + meta_path);
    return seg;
}

} // namespace sclp
