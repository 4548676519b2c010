#pragma once

// Seeded generator of small street/coast scenes with layouts where context
// matters: sky and water share tones, buildings and road share grays, and
// rare cars sit on the road.

#include <filesystem>

#include "sclp/dataset.hpp"
#include "sclp/image_io.hpp"
#include "sclp/kmeans.hpp"

namespace sclp {

struct SyntheticSceneSpec {
    int width = 64;
    int height = 64;
    int train = 60;
    int test = 10;
    std::uint64_t seed = 1;
    double horizon_min = 0.30;  // fraction of height
    double horizon_max = 0.55;
    double coast_fraction = 0.4;
    int max_buildings = 3;
    double harbor_probability = 0.3;     // coast scene gets one building
    double waterfront_probability = 0.3; // city scene gets a water strip at the bottom
    int max_cars = 2;
    double car_probability = 0.5;  // per city scene

    void validate() const {
        if (width < 16 || height < 16) throw ArgumentError("synthetic scenes must be at least 16x16");
        if (train < 1 || test < 0) throw ArgumentError("synthetic split sizes must be train >= 1, test >= 0");
        if (!(horizon_min > 0.0 && horizon_min <= horizon_max && horizon_max < 1.0))
            throw ArgumentError("horizon range must satisfy 0 < min <= max < 1");
        if (!(coast_fraction >= 0.0 && coast_fraction <= 1.0)) throw ArgumentError("coast_fraction must be in [0, 1]");
        if (max_cars < 0 || max_buildings < 0) throw ArgumentError("max_cars and max_buildings must be >= 0");
        for (double p : {car_probability, harbor_probability, waterfront_probability})
            if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("synthetic probabilities must be in [0, 1]");
    }
};

namespace synth {

enum Class : ClassIndex { Sky = 1, Building = 2, Road = 3, Water = 4, Car = 5 };

inline const std::vector<std::string>& class_names() {
    static const std::vector<std::string> names = {"sky", "building", "road", "water", "car"};
    return names;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}
    double uniform() { return unit_uniform(g_); }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    int integer(int lo, int hi) { return lo + std::min(hi - lo, static_cast<int>(uniform() * (hi - lo + 1))); }
    // Box-Muller on the platform-stable uniform source.
    double normal() {
        const double u1 = 1.0 - uniform(), u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::mt19937_64 g_;
};

struct Scene {
    Image image;
    LabelMap labels;
};

inline Scene render_scene(const SyntheticSceneSpec& spec, Rng& rng) {
    const int w = spec.width, h = spec.height;
    Scene s{Image(w, h), LabelMap(w, h)};
    const bool coast = rng.uniform() < spec.coast_fraction;
    const int horizon = static_cast<int>(std::lround(rng.uniform(spec.horizon_min, spec.horizon_max) * h));
    auto set = [&](int x, int y, ClassIndex c) { s.labels.labels[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(c); };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) set(x, y, y < horizon ? Sky : (coast ? Water : Road));

    auto building = [&] {
        const int bw = rng.integer(w / 6, w / 3);
        const int x0 = rng.integer(0, w - bw);
        const int top = rng.integer(std::max(1, h / 10), std::max(h / 10 + 1, horizon - 4));
        for (int y = top; y < horizon; ++y)
            for (int x = x0; x < x0 + bw; ++x) set(x, y, Building);
    };
    if (coast) {
        if (spec.max_buildings > 0 && rng.uniform() < spec.harbor_probability) building();
    } else {
        const int buildings = rng.integer(0, spec.max_buildings);
        for (int b = 0; b < buildings; ++b) building();
        int road_bottom = h;
        if (rng.uniform() < spec.waterfront_probability) {
            road_bottom = h - rng.integer(h / 8, h / 5);
            for (int y = road_bottom; y < h; ++y)
                for (int x = 0; x < w; ++x) set(x, y, Water);
        }
        if (spec.max_cars > 0 && rng.uniform() < spec.car_probability) {
            const int cars = rng.integer(1, spec.max_cars);
            for (int c = 0; c < cars; ++c) {
                const int cw = rng.integer(w * 10 / 64, w * 14 / 64), ch = rng.integer(h * 7 / 64, h * 10 / 64);
                const int x0 = rng.integer(0, w - cw);
                const int lo = std::min(road_bottom - ch, horizon + 2);
                if (lo < horizon) continue;
                const int y0 = rng.integer(lo, road_bottom - ch);
                for (int y = y0; y < y0 + ch; ++y)
                    for (int x = x0; x < x0 + cw; ++x) set(x, y, Car);
            }
        }
    }

    // Per-image palettes: each class draws its base color from a small set
    // of looks, plus an illumination shift common to the whole image.
    using Rgb = std::array<double, 3>;
    static const Rgb skies[] = {{0.50, 0.68, 0.92}, {0.70, 0.72, 0.76}, {0.88, 0.62, 0.45}};
    static const Rgb walls[] = {{0.56, 0.54, 0.53}, {0.62, 0.40, 0.32}, {0.74, 0.68, 0.56}};
    static const Rgb waters[] = {{0.42, 0.60, 0.86}, {0.36, 0.50, 0.52}, {0.55, 0.60, 0.70}};
    static const Rgb roads[] = {{0.47, 0.47, 0.48}, {0.36, 0.36, 0.38}};
    static const Rgb cars[] = {{0.80, 0.18, 0.15}, {0.85, 0.75, 0.15}};
    auto pick = [&](const auto& table) { return table[rng.integer(0, static_cast<int>(std::size(table)) - 1)]; };
    const Rgb sky = pick(skies), wall = pick(walls), water = pick(waters), road = pick(roads), car = pick(cars);
    const double light = rng.uniform(-0.05, 0.05);
    const double ripple_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Rgb rgb{};
            double noise = 0.03;
            switch (s.labels.labels[static_cast<std::size_t>(y) * w + x]) {
                case Sky: {
                    const double t = 0.08 * (1.0 - static_cast<double>(y) / h);
                    rgb = {sky[0] + t, sky[1] + t, sky[2]};
                    break;
                }
                case Water: {
                    const double r = 0.04 * std::sin(0.9 * y + ripple_phase);
                    rgb = {water[0] + r, water[1] + r, water[2] + r};
                    noise = 0.04;
                    break;
                }
                case Building: {
                    const bool window = (x % 6 >= 2 && x % 6 < 4) && (y % 6 >= 2 && y % 6 < 4);
                    const double d = window ? -0.16 : 0.0;
                    rgb = {wall[0] + d, wall[1] + d, wall[2] + d};
                    break;
                }
                case Road:
                    rgb = road;
                    noise = 0.04;
                    break;
                default:
                    rgb = car;
                    break;
            }
            const double common = noise * rng.normal();
            for (int c = 0; c < 3; ++c)
                s.image.at(x, y, c) = static_cast<float>(std::clamp(rgb[c] + light + common + 0.01 * rng.normal(), 0.0, 1.0));
        }
    return s;
}

} // namespace synth

/// Writes classes.txt, images/, labels/ and manifest.txt under `dir`;
/// returns the manifest path. Byte-identical output for a fixed spec.
inline std::string generate_synthetic(const SyntheticSceneSpec& spec, const std::string& dir) {
    spec.validate();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "labels");
    const ClassVocabulary vocab(synth::class_names());
    vocab.save((fs::path(dir) / "classes.txt").string());
    synth::Rng rng(spec.seed);
    DatasetManifest manifest;
    manifest.class_list_path = (fs::path(dir) / "classes.txt").string();
    auto emit = [&](Split split, int i) {
        const synth::Scene s = synth::render_scene(spec, rng);
        char name[32];
        std::snprintf(name, sizeof name, "%s_%03d.png", to_string(split).c_str(), i);
        const std::string img = (fs::path(dir) / "images" / name).string();
        const std::string lab = (fs::path(dir) / "labels" / name).string();
        io::save_image(img, s.image);
        io::save_label_map(lab, s.labels);
        manifest.entries.push_back({split, img, lab});
    };
    for (int i = 0; i < spec.train; ++i) emit(Split::Train, i);
    for (int i = 0; i < spec.test; ++i) emit(Split::Test, i);
    const std::string path = (fs::path(dir) / "manifest.txt").string();
    manifest.save(path);
    return path;
}

} // namespace sclp
