#pragma once

// Flat key=value pipeline configuration. Precedence when assembling a run:
// command-line flag > config file > built-in default.

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "sclp/cooccurrence.hpp"
#include "sclp/inference.hpp"
#include "sclp/retrieval.hpp"
#include "sclp/segmentation.hpp"
#include "sclp/visual_model.hpp"

namespace sclp {

inline constexpr const char* kCacheDirEnv = "SCLP_CACHE_DIR";

struct PipelineConfig {
    std::string manifest;
    SegmentationParams segmentation;
    int block_rows = 4;
    int block_cols = 4;
    RetrievalConfig retrieval{100, 9, 0};
    FusionWeights weights;
    WeightMode weight_mode = WeightMode::Voter;
    GlobalCountMode sclp_mode = GlobalCountMode::Presence;
    double eps = 1.0;
    TrainingOptions training;
    int mrmr_count = 50;
    double mrmr_w = 0.5;
    int codebook_size = 256;
    double feature_noise = 0.0;
    std::string cache_dir;  // empty: $SCLP_CACHE_DIR, else ".sclp_cache"
    int workers = 1;

    /// alpha = 0 selects the whole training pool.
    void set(const std::string& key, const std::string& value) {
        auto as_int = [&](int& dst) { dst = parse_int(key, value); };
        auto as_double = [&](double& dst) { dst = parse_double(key, value); };
        if (key == "manifest") manifest = value;
        else if (key == "sigma") as_double(segmentation.sigma);
        else if (key == "k_scale") as_double(segmentation.k_scale);
        else if (key == "min_size") as_int(segmentation.min_size);
        else if (key == "blocks") parse_blocks(value, block_rows, block_cols);
        else if (key == "block_rows") as_int(block_rows);
        else if (key == "block_cols") as_int(block_cols);
        else if (key == "alpha") retrieval.alpha = value == "full" ? 0 : parse_int(key, value);
        else if (key == "rare_classes") as_int(retrieval.rare_class_count);
        else if (key == "rare_alpha") as_int(retrieval.rare_alpha);
        else if (key == "weights") weights = FusionWeights::parse(value);
        else if (key == "weight_mode") weight_mode = parse_weight_mode(value);
        else if (key == "sclp_mode") sclp_mode = parse_count_mode(value);
        else if (key == "eps") as_double(eps);
        else if (key == "hidden") as_int(training.hidden);
        else if (key == "epochs") as_int(training.epochs);
        else if (key == "batch") as_int(training.batch);
        else if (key == "learning_rate") as_double(training.learning_rate);
        else if (key == "seed") training.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "mrmr_count") as_int(mrmr_count);
        else if (key == "mrmr_w") as_double(mrmr_w);
        else if (key == "codebook_size") as_int(codebook_size);
        else if (key == "feature_noise") as_double(feature_noise);
        else if (key == "cache_dir") cache_dir = value;
        else if (key == "workers") as_int(workers);
        else throw ArgumentError("unknown config key: " + key);
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw LoadError("cannot open config " + path);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ArgumentError("config " + path + " line " + std::to_string(lineno) + ": expected key=value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    /// Defaults, then the file (if any), then flag overrides in order.
    static PipelineConfig assemble(const std::string& file,
                                   const std::vector<std::pair<std::string, std::string>>& overrides) {
        PipelineConfig c;
        if (!file.empty()) c.load_file(file);
        for (const auto& [k, v] : overrides) c.set(k, v);
        c.validate();
        return c;
    }

    void validate() const {
        segmentation.validate();
        if (block_rows < 1 || block_cols < 1) throw ArgumentError("block grid needs rows, cols >= 1");
        if (retrieval.alpha < 0) throw ArgumentError("alpha must be >= 1 (or 0 / full for the whole pool)");
        if (retrieval.rare_class_count < 0) throw ArgumentError("rare_classes must be >= 0");
        if (retrieval.rare_alpha < 0) throw ArgumentError("rare_alpha must be >= 0");
        weights.validate();
        if (!(eps >= 0.0)) throw ArgumentError("eps must be >= 0");
        if (training.hidden < 1) throw ArgumentError("hidden must be >= 1");
        if (training.epochs < 1) throw ArgumentError("epochs must be >= 1");
        if (training.batch < 1) throw ArgumentError("batch must be >= 1");
        if (!(training.learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
        if (mrmr_count < 1) throw ArgumentError("mrmr_count must be >= 1");
        if (!(mrmr_w >= 0.0)) throw ArgumentError("mrmr_w must be >= 0");
        if (codebook_size < 2) throw ArgumentError("codebook_size must be >= 2");
        if (!(feature_noise >= 0.0)) throw ArgumentError("feature_noise must be >= 0");
        if (workers < 1) throw ArgumentError("workers must be >= 1");
    }

    std::string resolved_cache_dir() const {
        if (!cache_dir.empty()) return cache_dir;
        if (const char* env = std::getenv(kCacheDirEnv); env && *env) return env;
        return ".sclp_cache";
    }

    std::string blocks_str() const { return std::to_string(block_rows) + "x" + std::to_string(block_cols); }

    std::vector<std::pair<std::string, std::string>> entries() const {
        auto d = [](double v) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        };
        return {{"manifest", manifest},
                {"sigma", d(segmentation.sigma)},
                {"k_scale", d(segmentation.k_scale)},
                {"min_size", std::to_string(segmentation.min_size)},
                {"blocks", blocks_str()},
                {"alpha", retrieval.alpha == 0 ? "full" : std::to_string(retrieval.alpha)},
                {"rare_classes", std::to_string(retrieval.rare_class_count)},
                {"rare_alpha", std::to_string(retrieval.rare_alpha)},
                {"weights", weights.str()},
                {"weight_mode", to_string(weight_mode)},
                {"sclp_mode", to_string(sclp_mode)},
                {"eps", d(eps)},
                {"hidden", std::to_string(training.hidden)},
                {"epochs", std::to_string(training.epochs)},
                {"batch", std::to_string(training.batch)},
                {"learning_rate", d(training.learning_rate)},
                {"seed", std::to_string(training.seed)},
                {"mrmr_count", std::to_string(mrmr_count)},
                {"mrmr_w", d(mrmr_w)},
                {"codebook_size", std::to_string(codebook_size)},
                {"feature_noise", d(feature_noise)},
                {"workers", std::to_string(workers)}};
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static int parse_int(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const long long x = std::stoll(v, &used);
            if (used != v.size() || x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
                throw std::invalid_argument(v);
            return static_cast<int>(x);
        } catch (const std::logic_error&) {
            throw ArgumentError("bad integer for " + key + ": '" + v + "'");
        }
    }

    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const double x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::logic_error&) {
            throw ArgumentError("bad number for " + key + ": '" + v + "'");
        }
    }

    /// "RxC" or a single "N" meaning NxN.
    static void parse_blocks(const std::string& v, int& rows, int& cols) {
        const auto x = v.find_first_of("xX");
        if (x == std::string::npos) {
            rows = cols = parse_int("blocks", v);
            return;
        }
        rows = parse_int("blocks", v.substr(0, x));
        cols = parse_int("blocks", v.substr(x + 1));
    }
};

} // namespace sclp
