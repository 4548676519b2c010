#pragma once

// On-disk artifact cache. Entries live at <dir>/<kind>/<key><ext> where the
// key is a content hash that already folds in the pipeline version tag and
// every parameter the artifact depends on.

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include "sclp/common.hpp"

namespace sclp {

inline constexpr const char* kPipelineVersion = "sclp-pipeline-1";

inline std::uint64_t image_hash(const Image& img) {
    Hasher h;
    h.pod(img.width).pod(img.height).vec(img.data);
    return h.value();
}

struct CacheCounts {
    std::size_t hits = 0;
    std::size_t misses = 0;
};

class ArtifactCache {
  public:
    /// An empty directory disables caching (every lookup misses, nothing is
    /// written).
    explicit ArtifactCache(std::string dir = {}) : dir_(std::move(dir)) {}

    bool enabled() const { return !dir_.empty(); }
    const std::string& dir() const { return dir_; }

    std::string path(const std::string& kind, const std::string& key, const std::string& ext) const {
        return (std::filesystem::path(dir_) / kind / (key + ext)).string();
    }

    /// True (and counted as a hit) when every listed file exists.
    bool lookup(const std::string& kind, const std::string& key, std::initializer_list<const char*> exts) {
        bool all = enabled();
        for (const char* e : exts)
            if (all && !std::filesystem::exists(path(kind, key, e))) all = false;
        record(kind, all);
        return all;
    }

    /// Directory for `kind`, created on demand.
    void prepare(const std::string& kind) const {
        if (enabled()) std::filesystem::create_directories(std::filesystem::path(dir_) / kind);
    }

    /// Writes via a temporary file and rename so readers never observe a
    /// partial artifact.
    template <typename WriteFn> void store(const std::string& kind, const std::string& key, const std::string& ext, WriteFn write) {
        if (!enabled()) return;
        prepare(kind);
        const std::string final_path = path(kind, key, ext);
        const std::string tmp = final_path + ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        write(tmp);
        std::filesystem::rename(tmp, final_path);
    }

    CacheCounts counts(const std::string& kind) const {
        std::lock_guard lock(mu_);
        auto it = counts_.find(kind);
        return it == counts_.end() ? CacheCounts{} : it->second;
    }

    CacheCounts total() const {
        std::lock_guard lock(mu_);
        CacheCounts t;
        for (const auto& [k, c] : counts_) {
            t.hits += c.hits;
            t.misses += c.misses;
        }
        return t;
    }

    std::map<std::string, CacheCounts> all_counts() const {
        std::lock_guard lock(mu_);
        return counts_;
    }

    void reset_counts() {
        std::lock_guard lock(mu_);
        counts_.clear();
    }

  private:
    void record(const std::string& kind, bool hit) {
        std::lock_guard lock(mu_);
        auto& c = counts_[kind];
        ++(hit ? c.hits : c.misses);
    }

    std::string dir_;
    mutable std::mutex mu_;
    std::map<std::string, CacheCounts> counts_;
};

} // namespace sclp
