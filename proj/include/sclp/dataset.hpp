#pragma once

#include <filesystem>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sclp/common.hpp"
#include "sclp/image_io.hpp"

namespace sclp {

/// Class names; index i (1-based) names class i, index 0 is the reserved
/// unlabeled category and never appears in `names`.
class ClassVocabulary {
  public:
    ClassVocabulary() = default;
    explicit ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
        if (names_.size() < 2) throw ValidationError("class vocabulary needs at least 2 classes");
        if (names_.size() > 255) throw ValidationError("class vocabulary exceeds 255 classes");
        std::unordered_set<std::string> seen;
        for (const auto& n : names_) {
            if (n.empty()) throw ValidationError("empty class name");
            if (!seen.insert(n).second) throw ValidationError("duplicate class name: " + n);
        }
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(ClassIndex c) const { return names_.at(static_cast<std::size_t>(c - 1)); }
    const std::vector<std::string>& names() const { return names_; }
    ClassIndex index_of(const std::string& n) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == n) return static_cast<ClassIndex>(i + 1);
        throw ArgumentError("unknown class: " + n);
    }

    static ClassVocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw LoadError("cannot open class list " + path);
        std::vector<std::string> names;
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
            if (line.empty()) continue;
            names.push_back(line);
        }
        if (names.empty()) throw LoadError("class list is empty: " + path);
        return ClassVocabulary(std::move(names));
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw LoadError("cannot write " + path);
        for (const auto& n : names_) out << n << "\n";
    }

  private:
    std::vector<std::string> names_;
};

enum class Split { Train, Test };

inline std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }
inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw ArgumentError("unknown split tag: " + s);
}

struct DatasetEntry {
    Split split = Split::Train;
    std::string image_path;
    std::string label_path;
};

struct DatasetManifest {
    std::string class_list_path;
    std::vector<DatasetEntry> entries;

    /// Parses `classes=<path>` on line 1, then `split<TAB>image<TAB>label`
    /// lines. Relative paths resolve against the manifest's directory.
    static DatasetManifest load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw LoadError("cannot open manifest " + path);
        const std::filesystem::path base = std::filesystem::path(path).parent_path();
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (base / fp).string();
        };
        DatasetManifest m;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            if (m.class_list_path.empty()) {
                if (line.rfind("classes=", 0) != 0)
                    throw LoadError("manifest " + path + ": first line must be classes=<path>");
                m.class_list_path = resolve(line.substr(8));
                continue;
            }
            std::vector<std::string> fields;
            std::stringstream ss(line);
            std::string f;
            while (std::getline(ss, f, '\t')) fields.push_back(f);
            if (fields.size() != 3)
                throw LoadError("manifest " + path + " line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
            m.entries.push_back({parse_split(fields[0]), resolve(fields[1]), resolve(fields[2])});
        }
        if (m.class_list_path.empty()) throw LoadError("manifest " + path + " has no classes= line");
        return m;
    }

    /// Writes paths relative to the manifest directory when possible.
    void save(const std::string& path) const {
        const std::filesystem::path base = std::filesystem::path(path).parent_path();
        auto rel = [&](const std::string& p) {
            std::error_code ec;
            auto r = std::filesystem::relative(p, base.empty() ? "." : base, ec);
            return ec || r.empty() ? p : r.string();
        };
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw LoadError("cannot write " + path);
        out << "classes=" << rel(class_list_path) << "\n";
        for (const auto& e : entries) out << to_string(e.split) << "\t" << rel(e.image_path) << "\t" << rel(e.label_path) << "\n";
    }
};

struct Sample {
    DatasetEntry entry;
    Image image;
    LabelMap labels;
};

/// Immutable after construction; safe for concurrent reads.
class Dataset {
  public:
    Dataset(ClassVocabulary vocab, std::vector<Sample> samples) : vocab_(std::move(vocab)), samples_(std::move(samples)) {
        for (std::size_t i = 0; i < samples_.size(); ++i) validate_sample(i);
    }

    static Dataset load(const std::string& manifest_path) {
        const DatasetManifest m = DatasetManifest::load(manifest_path);
        ClassVocabulary vocab = ClassVocabulary::load(m.class_list_path);
        std::vector<Sample> samples;
        samples.reserve(m.entries.size());
        for (const auto& e : m.entries) {
            Sample s;
            s.entry = e;
            s.image = io::load_image(e.image_path);
            s.labels = io::load_label_map(e.label_path);
            samples.push_back(std::move(s));
        }
        return Dataset(std::move(vocab), std::move(samples));
    }

    const ClassVocabulary& vocabulary() const { return vocab_; }
    int num_classes() const { return vocab_.size(); }
    const std::vector<Sample>& samples() const { return samples_; }
    const Sample& sample(std::size_t i) const { return samples_.at(i); }

    std::vector<std::size_t> indices(Split split) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < samples_.size(); ++i)
            if (samples_[i].entry.split == split) out.push_back(i);
        return out;
    }

  private:
    void validate_sample(std::size_t i) const {
        const Sample& s = samples_[i];
        const std::string who = "entry " + std::to_string(i) + " (" + s.entry.image_path + ")";
        if (s.image.width != s.labels.width || s.image.height != s.labels.height)
            throw ValidationError(who + ": image and label map dimensions differ");
        try {
            s.image.validate();
        } catch (const Error& e) {
            throw ValidationError(who + ": " + e.what());
        }
        for (std::uint8_t v : s.labels.labels)
            if (v > vocab_.size())
                throw ValidationError(who + ": label index " + std::to_string(v) + " exceeds class count " +
                                      std::to_string(vocab_.size()));
    }

    ClassVocabulary vocab_;
    std::vector<Sample> samples_;
};

/// counts[c-1] = pixels labeled c over the given label maps.
inline std::vector<std::uint64_t> class_pixel_counts(std::span<const LabelMap* const> maps, int num_classes) {
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(num_classes), 0);
    for (const LabelMap* lm : maps)
        for (std::uint8_t v : lm->labels)
            if (v != kUnlabeled && v <= num_classes) ++counts[v - 1];
    return counts;
}

inline std::vector<std::uint64_t> class_pixel_counts(const Dataset& ds, Split split) {
    const auto idx = ds.indices(split);
    if (idx.empty()) throw ArgumentError("split " + to_string(split) + " is empty");
    std::vector<const LabelMap*> maps;
    for (std::size_t i : idx) maps.push_back(&ds.sample(i).labels);
    return class_pixel_counts(maps, ds.num_classes());
}

/// The n smallest-count classes (1-based indices), ascending by count, ties
/// by class index.
inline std::vector<ClassIndex> rare_classes(std::span<const std::uint64_t> counts, int n) {
    const int m = static_cast<int>(counts.size());
    if (n < 1 || n > m) throw ArgumentError("rare class count " + std::to_string(n) + " outside [1, " + std::to_string(m) + "]");
    std::vector<ClassIndex> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 1);
    std::stable_sort(order.begin(), order.end(),
                     [&](ClassIndex a, ClassIndex b) { return counts[a - 1] < counts[b - 1]; });
    order.resize(static_cast<std::size_t>(n));
    return order;
}

/// Classes with at least one pixel in the label map.
inline std::vector<bool> class_presence(const LabelMap& lm, int num_classes) {
    std::vector<bool> present(static_cast<std::size_t>(num_classes) + 1, false);
    for (std::uint8_t v : lm.labels)
        if (v != kUnlabeled && v <= num_classes) present[v] = true;
    return present;
}

} // namespace sclp
