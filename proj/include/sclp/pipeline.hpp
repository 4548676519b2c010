#pragma once

// End-to-end training and parsing: cached per-image stages, the model
// bundle, query parsing, evaluation, parameter sweeps and weight tuning.

#include <ostream>

#include "sclp/cache.hpp"
#include "sclp/config.hpp"
#include "sclp/dataset.hpp"
#include "sclp/image_io.hpp"
#include "sclp/metrics.hpp"

namespace sclp {

enum class Ablation { None, NoGlobal, NoLocal, VisualOnly };

inline Ablation parse_ablation(const std::string& s) {
    if (s.empty() || s == "none") return Ablation::None;
    if (s == "no-global") return Ablation::NoGlobal;
    if (s == "no-local") return Ablation::NoLocal;
    if (s == "visual-only") return Ablation::VisualOnly;
    throw ArgumentError("unknown ablation: " + s);
}

inline std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::NoGlobal: return "no-global";
        case Ablation::NoLocal: return "no-local";
        case Ablation::VisualOnly: return "visual-only";
        default: return "none";
    }
}

inline FusionWeights ablate(FusionWeights w, Ablation a) {
    if (a == Ablation::NoGlobal || a == Ablation::VisualOnly) w.w_global = 0.0;
    if (a == Ablation::NoLocal || a == Ablation::VisualOnly) w.w_local = 0.0;
    w.validate();
    return w;
}

namespace detail {

// Re-throws with the stage name prefixed, keeping the error category.
template <typename F> auto stage(const std::string& name, F&& f) -> decltype(f()) {
    const std::string p = "stage " + name + ": ";
    try {
        return f();
    } catch (const ArgumentError& e) {
        throw ArgumentError(p + e.what());
    } catch (const LoadError& e) {
        throw LoadError(p + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(p + e.what());
    } catch (const TrainingError& e) {
        throw TrainingError(p + e.what());
    } catch (const ComputationError& e) {
        throw ComputationError(p + e.what());
    } catch (const std::exception& e) {
        throw Error(p + e.what());
    }
}

inline std::uint64_t matrix_hash(const Matrix& m) {
    Hasher h;
    h.pod(static_cast<std::uint64_t>(m.rows)).pod(static_cast<std::uint64_t>(m.cols)).vec(m.data);
    return h.value();
}

inline void save_matrix_f32(const std::string& path, const Matrix& m) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < m.rows; ++i) rows.emplace_back(m.row(i).begin(), m.row(i).end());
    save_float_record(path, rows);
}

inline Matrix load_matrix_f32(const std::string& path) {
    Matrix m;
    for (const auto& r : load_float_record(path)) m.append_row(r);
    return m;
}

inline void put_matrix(BinaryWriter& w, const Matrix& m) {
    w.put<std::uint64_t>(m.rows);
    w.put<std::uint64_t>(m.cols);
    w.put_vector(m.data);
}

inline Matrix get_matrix(BinaryReader& r) {
    Matrix m;
    m.rows = r.get<std::uint64_t>();
    m.cols = r.get<std::uint64_t>();
    m.data = r.get_vector<double>();
    if (m.data.size() != m.rows * m.cols) throw LoadError("corrupt matrix record");
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Cached per-image stages

inline std::string segmentation_key(std::uint64_t img, const SegmentationParams& p) {
    Hasher h;
    h.str(kPipelineVersion).str("segmentation").pod(img).pod(p.sigma).pod(p.k_scale).pod(p.min_size);
    return h.hex();
}

inline SuperpixelSegmentation cached_segmentation(const Image& img, std::uint64_t img_hash, const SegmentationParams& p,
                                                  ArtifactCache& cache) {
    const std::string key = segmentation_key(img_hash, p);
    if (cache.lookup("segmentation", key, {".ids", ".meta"}))
        return load_segmentation(cache.path("segmentation", key, ".ids"), cache.path("segmentation", key, ".meta"));
    SuperpixelSegmentation seg = segment(img, p);
    if (cache.enabled()) {
        cache.prepare("segmentation");
        cache.store("segmentation", key, ".meta", [&](const std::string& tmp_meta) {
            const std::string tmp_ids = cache.path("segmentation", key, ".ids") + ".part";
            save_segmentation(seg, tmp_ids, tmp_meta);
            std::filesystem::rename(tmp_ids, cache.path("segmentation", key, ".ids"));
        });
    }
    return seg;
}

inline std::string features_key(std::uint64_t img, const std::string& seg_key, std::uint64_t textons) {
    Hasher h;
    h.str(kPipelineVersion).str("features").pod(img).str(seg_key).pod(textons).pod(kFeatureDim);
    return h.hex();
}

inline Matrix cached_features(const Image& img, std::uint64_t img_hash, const SegmentationParams& p,
                              const SuperpixelSegmentation& seg, const Codebook& textons, std::uint64_t textons_hash,
                              ArtifactCache& cache) {
    const std::string key = features_key(img_hash, segmentation_key(img_hash, p), textons_hash);
    if (cache.lookup("features", key, {".bin"})) {
        auto r = BinaryReader::from_file(cache.path("features", key, ".bin"));
        Matrix m = detail::get_matrix(r);
        if (m.rows != seg.superpixels.size() || m.cols != static_cast<std::size_t>(kFeatureDim))
            throw LoadError("cached features do not match the segmentation: " + key);
        return m;
    }
    Matrix f = superpixel_features(img, seg, textons);
    cache.store("features", key, ".bin", [&](const std::string& tmp) {
        BinaryWriter w;
        detail::put_matrix(w, f);
        w.save(tmp);
    });
    return f;
}

inline std::string descriptors_key(std::uint64_t img, std::uint64_t pyramid) {
    Hasher h;
    h.str(kPipelineVersion).str("descriptors").pod(img).pod(pyramid);
    return h.hex();
}

/// Values are rounded through float32 so a cold run and a warm run see the
/// same numbers.
inline GlobalFeatureSet cached_descriptors(const Image& img, std::uint64_t img_hash, const Codebook& pyramid,
                                           std::uint64_t pyramid_hash, ArtifactCache& cache) {
    const std::string key = descriptors_key(img_hash, pyramid_hash);
    const char* exts[kDescriptorKinds] = {".pyramid.f32", ".gist.f32", ".tiny.f32", ".rgb.f32"};
    GlobalFeatureSet g;
    if (cache.lookup("descriptors", key, {exts[0], exts[1], exts[2], exts[3]})) {
        for (int k = 0; k < kDescriptorKinds; ++k) {
            const auto rows = load_float_record(cache.path("descriptors", key, exts[k]));
            if (rows.size() != 1) throw LoadError("corrupt descriptor record: " + key);
            g.features[k] = rows[0];
        }
        return g;
    }
    g = global_features(img, pyramid);
    for (auto& f : g.features) round_to_float(f);
    for (int k = 0; k < kDescriptorKinds; ++k)
        cache.store("descriptors", key, exts[k], [&](const std::string& tmp) { save_float_record(tmp, {g.features[k]}); });
    return g;
}

/// Codebook centers are rounded through float32 for the same reason.
template <typename Build>
inline Codebook cached_codebook(const std::string& kind, const std::string& key, ArtifactCache& cache, Build build) {
    if (cache.lookup(kind, key, {".f32"})) return Codebook{detail::load_matrix_f32(cache.path(kind, key, ".f32"))};
    Codebook cb = build();
    round_to_float(cb.centers.data);
    cache.store(kind, key, ".f32", [&](const std::string& tmp) { detail::save_matrix_f32(tmp, cb.centers); });
    return cb;
}

/// x_ij += level * scale_j * N(0, 1), seeded per image. Used to degrade the
/// visual classifier in controlled experiments.
inline void inject_feature_noise(Matrix& f, std::span<const double> scale, double level, std::uint64_t seed) {
    if (level <= 0.0) return;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < f.rows; ++i)
        for (std::size_t j = 0; j < f.cols; ++j) {
            const double u1 = 1.0 - unit_uniform(rng), u2 = unit_uniform(rng);
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            f(i, j) += level * scale[j] * z;
        }
}

inline std::uint64_t noise_seed(std::uint64_t seed, std::uint64_t img_hash) {
    Hasher h;
    h.str("feature-noise").pod(seed).pod(img_hash);
    return h.value();
}

// ---------------------------------------------------------------------------
// Model bundle

/// What parsing needs from one training image: enough to rebuild block
/// counts for any grid, the local pair counts, class presence and the
/// retrieval descriptors.
struct TrainingImage {
    int width = 0, height = 0;
    std::vector<std::array<double, 2>> centroids;
    std::vector<std::vector<std::uint32_t>> class_hist;
    PairCounts pairs;
    std::vector<bool> presence;  // index = class, 0 unused
    GlobalFeatureSet descriptors;
};

struct Model {
    static constexpr std::uint32_t kMagic = 0x4C444D53u;  // "SMDL"
    static constexpr std::uint32_t kVersion = 1;

    ClassVocabulary vocabulary;
    SegmentationParams segmentation;
    std::uint64_t seed = 1;
    double feature_noise = 0.0;
    Codebook textons;
    Codebook pyramid;
    std::vector<double> feature_scale;  // per-feature std over training superpixels
    std::vector<std::uint64_t> class_counts;
    std::vector<TrainingImage> images;
    VisualClassifier classifier;

    int num_classes() const { return vocabulary.size(); }
    std::uint64_t textons_hash() const { return detail::matrix_hash(textons.centers); }
    std::uint64_t pyramid_hash() const { return detail::matrix_hash(pyramid.centers); }

    std::vector<unsigned char> serialize() const {
        BinaryWriter w;
        w.put<std::uint32_t>(kMagic);
        w.put<std::uint32_t>(kVersion);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(vocabulary.size()));
        for (const auto& n : vocabulary.names()) w.put_string(n);
        w.put<double>(segmentation.sigma);
        w.put<double>(segmentation.k_scale);
        w.put<std::int32_t>(segmentation.min_size);
        w.put<std::uint64_t>(seed);
        w.put<double>(feature_noise);
        detail::put_matrix(w, textons.centers);
        detail::put_matrix(w, pyramid.centers);
        w.put_vector(feature_scale);
        w.put_vector(class_counts);
        w.put<std::uint64_t>(images.size());
        for (const auto& ti : images) {
            w.put<std::int32_t>(ti.width);
            w.put<std::int32_t>(ti.height);
            w.put<std::uint64_t>(ti.centroids.size());
            for (std::size_t s = 0; s < ti.centroids.size(); ++s) {
                w.put<double>(ti.centroids[s][0]);
                w.put<double>(ti.centroids[s][1]);
                w.put_vector(ti.class_hist[s]);
            }
            w.put_vector(ti.pairs.counts);
            for (std::size_t c = 1; c < ti.presence.size(); ++c) w.put<std::uint8_t>(ti.presence[c] ? 1 : 0);
            for (const auto& f : ti.descriptors.features) w.put_vector(f);
        }
        write_classifier(w, classifier);
        return w.buffer();
    }

    void save(const std::string& path) const {
        const auto bytes = serialize();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw LoadError("cannot write model " + path);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw LoadError("write failed: " + path);
    }

    static Model load(const std::string& path) {
        auto r = BinaryReader::from_file(path);
        if (r.get<std::uint32_t>() != kMagic) throw LoadError("not a model bundle: " + path);
        if (const auto v = r.get<std::uint32_t>(); v != kVersion)
            throw LoadError("model bundle version " + std::to_string(v) + " unsupported: " + path);
        Model m;
        const auto nc = r.get<std::uint32_t>();
        std::vector<std::string> names;
        for (std::uint32_t i = 0; i < nc; ++i) names.push_back(r.get_string());
        m.vocabulary = ClassVocabulary(std::move(names));
        const int M = m.vocabulary.size();
        m.segmentation.sigma = r.get<double>();
        m.segmentation.k_scale = r.get<double>();
        m.segmentation.min_size = r.get<std::int32_t>();
        m.seed = r.get<std::uint64_t>();
        m.feature_noise = r.get<double>();
        m.textons.centers = detail::get_matrix(r);
        m.pyramid.centers = detail::get_matrix(r);
        m.feature_scale = r.get_vector<double>();
        m.class_counts = r.get_vector<std::uint64_t>();
        const auto n = r.get<std::uint64_t>();
        if (n == 0 || n > 10'000'000) throw LoadError("corrupt model bundle: image count");
        m.images.resize(n);
        for (auto& ti : m.images) {
            ti.width = r.get<std::int32_t>();
            ti.height = r.get<std::int32_t>();
            const auto L = r.get<std::uint64_t>();
            if (L > static_cast<std::uint64_t>(ti.width) * static_cast<std::uint64_t>(ti.height))
                throw LoadError("corrupt model bundle: superpixel count");
            ti.centroids.resize(L);
            ti.class_hist.resize(L);
            for (std::size_t s = 0; s < L; ++s) {
                ti.centroids[s][0] = r.get<double>();
                ti.centroids[s][1] = r.get<double>();
                ti.class_hist[s] = r.get_vector<std::uint32_t>();
                if (ti.class_hist[s].size() != static_cast<std::size_t>(M) + 1) throw LoadError("corrupt model bundle: histogram");
            }
            ti.pairs = PairCounts(M);
            ti.pairs.counts = r.get_vector<std::uint64_t>();
            if (ti.pairs.counts.size() != static_cast<std::size_t>(M + 1) * (M + 1)) throw LoadError("corrupt model bundle: pairs");
            ti.presence.assign(static_cast<std::size_t>(M) + 1, false);
            for (int c = 1; c <= M; ++c) ti.presence[c] = r.get<std::uint8_t>() != 0;
            for (auto& f : ti.descriptors.features) f = r.get_vector<double>();
        }
        m.classifier = read_classifier(r);
        if (!r.done()) throw LoadError("trailing bytes in model bundle: " + path);
        if (m.classifier.num_classes != M) throw LoadError("model bundle classifier/vocabulary mismatch");
        return m;
    }
};

// ---------------------------------------------------------------------------
// Training

struct TrainSummary {
    std::size_t images = 0;
    std::size_t superpixels = 0;
    std::size_t labeled_superpixels = 0;
};

inline Model train_model(const Dataset& ds, const PipelineConfig& cfg, ArtifactCache& cache, std::ostream* log = nullptr,
                         TrainSummary* summary = nullptr) {
    cfg.validate();
    const auto idx = ds.indices(Split::Train);
    if (idx.empty()) throw ArgumentError("training split is empty");
    const int M = ds.num_classes();
    const std::size_t n = idx.size();
    auto say = [&](const std::string& s) {
        if (log) *log << s << std::endl;
    };

    Model model;
    model.vocabulary = ds.vocabulary();
    model.segmentation = cfg.segmentation;
    model.seed = cfg.training.seed;
    model.feature_noise = cfg.feature_noise;

    std::vector<std::uint64_t> hashes(n);
    for (std::size_t i = 0; i < n; ++i) hashes[i] = image_hash(ds.sample(idx[i]).image);

    std::vector<SuperpixelSegmentation> segs(n);
    detail::stage("segmentation", [&] {
        say("segmenting " + std::to_string(n) + " training images");
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            segs[i] = cached_segmentation(ds.sample(idx[i]).image, hashes[i], cfg.segmentation, cache);
        });
    });

    std::vector<Image> train_images;
    train_images.reserve(n);
    for (std::size_t i : idx) train_images.push_back(ds.sample(i).image);
    detail::stage("codebooks", [&] {
        Hasher base;
        base.str(kPipelineVersion).vec(hashes).pod(cfg.training.seed);
        Hasher tk = base;
        tk.str("textons").pod(kTextonWords);
        model.textons = cached_codebook("textons", tk.hex(), cache,
                                        [&] { return build_texton_codebook(train_images, cfg.training.seed); });
        Hasher pk = base;
        pk.str("pyramid").pod(cfg.codebook_size);
        model.pyramid = cached_codebook("pyramid", pk.hex(), cache, [&] {
            return build_codebook(train_images, static_cast<std::size_t>(cfg.codebook_size), cfg.training.seed + 1);
        });
    });
    const std::uint64_t th = model.textons_hash(), ph = model.pyramid_hash();

    std::vector<Matrix> feats(n);
    model.images.resize(n);
    detail::stage("features", [&] {
        say("extracting superpixel features and global descriptors");
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            const Image& img = ds.sample(idx[i]).image;
            feats[i] = cached_features(img, hashes[i], cfg.segmentation, segs[i], model.textons, th, cache);
            model.images[i].descriptors = cached_descriptors(img, hashes[i], model.pyramid, ph, cache);
        });
    });

    std::vector<std::vector<ClassIndex>> sp_labels(n);
    detail::stage("labels", [&] {
        for (std::size_t i = 0; i < n; ++i) {
            const LabelMap& lm = ds.sample(idx[i]).labels;
            TrainingImage& ti = model.images[i];
            ti.width = lm.width;
            ti.height = lm.height;
            ti.class_hist = superpixel_class_histograms(segs[i], lm, M);
            sp_labels[i].resize(ti.class_hist.size());
            for (std::size_t s = 0; s < ti.class_hist.size(); ++s) sp_labels[i][s] = majority_label(ti.class_hist[s]);
            for (const auto& sp : segs[i].superpixels) ti.centroids.push_back({sp.cx, sp.cy});
            ti.pairs = adjacency_pair_counts(segs[i], sp_labels[i], M);
            ti.presence = class_presence(lm, M);
        }
        model.class_counts = class_pixel_counts(ds, Split::Train);
    });

    Matrix x;
    std::vector<ClassIndex> y;
    detail::stage("feature-noise", [&] {
        Matrix clean;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = 0; s < feats[i].rows; ++s)
                if (sp_labels[i][s] != kUnlabeled) clean.append_row(feats[i].row(s));
        if (clean.rows == 0) throw TrainingError("no labeled training superpixels");
        model.feature_scale = Discretizer::fit(clean).stddev;
        for (std::size_t i = 0; i < n; ++i) {
            inject_feature_noise(feats[i], model.feature_scale, cfg.feature_noise, noise_seed(cfg.training.seed, hashes[i]));
            for (std::size_t s = 0; s < feats[i].rows; ++s)
                if (sp_labels[i][s] != kUnlabeled) {
                    x.append_row(feats[i].row(s));
                    y.push_back(sp_labels[i][s]);
                }
        }
    });

    MrmrSelection selection;
    detail::stage("mrmr", [&] {
        const int count = std::min(cfg.mrmr_count, kFeatureDim);
        say("selecting " + std::to_string(count) + " features per class from " + std::to_string(x.rows) + " superpixels");
        selection = mrmr_select_all(x, y, M, count, cfg.mrmr_w);
    });
    detail::stage("classifier", [&] {
        say("training " + std::to_string(M) + " class networks");
        for (ClassIndex c = 1; c <= M; ++c)
            if (std::find(y.begin(), y.end(), c) == y.end())
                throw TrainingError("class '" + model.vocabulary.names()[c - 1] + "' (" + std::to_string(c) +
                                    ") has no positive training superpixel");
        TrainingOptions topt = cfg.training;
        topt.workers = cfg.workers;
        model.classifier = train_classifier(x, y, selection, topt);
    });

    if (summary) {
        summary->images = n;
        summary->labeled_superpixels = x.rows;
        summary->superpixels = 0;
        for (const auto& s : segs) summary->superpixels += s.superpixels.size();
    }
    return model;
}

// ---------------------------------------------------------------------------
// Parsing

struct ParseOptions {
    int alpha = 100;  // 0 = whole pool
    int rare_classes = 9;
    int rare_alpha = 0;  // 0 = alpha
    int block_rows = 4, block_cols = 4;
    WeightMode weight_mode = WeightMode::Voter;
    GlobalCountMode sclp_mode = GlobalCountMode::Presence;
    double eps = 1.0;
    bool keep_priors = false;

    static ParseOptions from(const PipelineConfig& c) {
        ParseOptions o;
        o.alpha = c.retrieval.alpha;
        o.rare_classes = c.retrieval.rare_class_count;
        o.rare_alpha = c.retrieval.rare_alpha;
        o.block_rows = c.block_rows;
        o.block_cols = c.block_cols;
        o.weight_mode = c.weight_mode;
        o.sclp_mode = c.sclp_mode;
        o.eps = c.eps;
        return o;
    }
};

/// Everything computed for one query before fusion; fusing with different
/// weights needs no recomputation.
struct ParseFields {
    SuperpixelSegmentation seg;
    ProbabilityField visual, global, local;
    RetrievalSet base;
    RareRetrieval rare;
    RetrievalSet merged;
    std::optional<GlobalSCLP> global_prior;
    std::optional<LocalSCLP> local_prior;

    ProbabilityField fused(const FusionWeights& w) const { return fuse(visual, global, local, w); }
    LabelMap labels(const FusionWeights& w) const { return assign_labels(fused(w), seg); }
};

/// Read-only query engine over a model; safe to share across threads.
class Parser {
  public:
    Parser(const Model& model, const ParseOptions& opt) : model_(model), opt_(opt) {
        const int M = model.num_classes();
        const std::size_t n = model.images.size();
        std::vector<int> ids(n);
        std::iota(ids.begin(), ids.end(), 0);
        std::vector<GlobalFeatureSet> desc;
        for (const auto& ti : model.images) desc.push_back(ti.descriptors);
        index_ = RetrievalIndex(ids, desc);

        if (opt.alpha < 0) throw ArgumentError("alpha must be >= 1");
        alpha_ = opt.alpha == 0 ? static_cast<int>(n) : opt.alpha;
        if (static_cast<std::size_t>(alpha_) > n) {
            warnings_.push_back("alpha " + std::to_string(alpha_) + " exceeds the " + std::to_string(n) +
                                " training images; using " + std::to_string(n));
            alpha_ = static_cast<int>(n);
        }
        int rc = opt.rare_classes;
        if (rc > M) {
            warnings_.push_back("rare class count " + std::to_string(rc) + " exceeds M = " + std::to_string(M) +
                                "; using " + std::to_string(M));
            rc = M;
        }
        if (rc > 0) rare_ = rare_classes(model.class_counts, rc);
        rare_alpha_ = opt.rare_alpha > 0 ? opt.rare_alpha : alpha_;

        blocks_.reserve(n);
        for (const auto& ti : model.images)
            blocks_.push_back(block_class_counts(ti.centroids, ti.class_hist,
                                                 BlockGrid(opt.block_rows, opt.block_cols, ti.width, ti.height), M));
    }

    const std::vector<std::string>& warnings() const { return warnings_; }
    int alpha() const { return alpha_; }
    const std::vector<ClassIndex>& rare() const { return rare_; }
    const RetrievalIndex& index() const { return index_; }
    const Model& model() const { return model_; }
    bool image_has_class(int id, ClassIndex c) const { return model_.images[static_cast<std::size_t>(id)].presence[c]; }

    ParseFields fields(const Image& image, ArtifactCache& cache) const {
        image.validate();
        const int M = model_.num_classes();
        const std::uint64_t h = image_hash(image);
        ParseFields out;
        out.seg = cached_segmentation(image, h, model_.segmentation, cache);
        assign_blocks(out.seg, BlockGrid(opt_.block_rows, opt_.block_cols, image.width, image.height));
        Matrix x = cached_features(image, h, model_.segmentation, out.seg, model_.textons, model_.textons_hash(), cache);
        inject_feature_noise(x, model_.feature_scale, model_.feature_noise, noise_seed(model_.seed, h));
        out.visual = predict_visual(model_.classifier, x);

        const GlobalFeatureSet q = cached_descriptors(image, h, model_.pyramid, model_.pyramid_hash(), cache);
        out.base = retrieve(q, index_, alpha_);
        out.merged = out.base;
        if (!rare_.empty()) {
            out.rare = retrieve_rare(q, index_, [this](int id, ClassIndex c) { return image_has_class(id, c); }, rare_,
                                     rare_alpha_);
            out.merged = merge_retrieval(out.base, out.rare);
        }

        std::vector<const BlockClassCounts*> bc;
        std::vector<const PairCounts*> pc;
        for (int id : out.merged.image_ids) {
            bc.push_back(&blocks_[static_cast<std::size_t>(id)]);
            pc.push_back(&model_.images[static_cast<std::size_t>(id)].pairs);
        }
        const GlobalSCLP g = extract_global_sclp(bc, M, opt_.block_rows * opt_.block_cols, opt_.eps, opt_.sclp_mode);
        const LocalSCLP l = extract_local_sclp(pc, M, opt_.eps);
        out.global = vote_global(out.seg, out.visual, g, opt_.weight_mode);
        out.local = vote_local(out.seg, out.visual, l, opt_.weight_mode);
        if (opt_.keep_priors) {
            out.global_prior = g;
            out.local_prior = l;
        }
        return out;
    }

  private:
    const Model& model_;
    ParseOptions opt_;
    RetrievalIndex index_;
    int alpha_ = 1;
    int rare_alpha_ = 1;
    std::vector<ClassIndex> rare_;
    std::vector<BlockClassCounts> blocks_;
    std::vector<std::string> warnings_;
};

inline void require_same_vocabulary(const Model& model, const Dataset& ds) {
    if (model.vocabulary.names() != ds.vocabulary().names())
        throw ArgumentError("dataset class list does not match the model's vocabulary");
}

inline std::vector<ParseFields> parse_split(const Parser& parser, const Dataset& ds, Split split, ArtifactCache& cache,
                                            int workers) {
    require_same_vocabulary(parser.model(), ds);
    const auto idx = ds.indices(split);
    if (idx.empty()) throw ArgumentError("split " + to_string(split) + " is empty");
    std::vector<ParseFields> out(idx.size());
    parallel_for(idx.size(), workers, [&](std::size_t i) { out[i] = parser.fields(ds.sample(idx[i]).image, cache); });
    return out;
}

struct EvalReport {
    Metrics metrics;
    ConfusionMatrix confusion;
    std::size_t images = 0;
    FusionWeights weights;
};

inline EvalReport score_fields(std::span<const ParseFields> fields, const Dataset& ds, Split split, const FusionWeights& w) {
    const auto idx = ds.indices(split);
    if (idx.size() != fields.size()) throw ArgumentError("parsed fields do not match the split");
    EvalReport r;
    r.confusion = ConfusionMatrix(ds.num_classes());
    r.weights = w;
    for (std::size_t i = 0; i < idx.size(); ++i) r.confusion.accumulate(fields[i].labels(w), ds.sample(idx[i]).labels);
    r.images = idx.size();
    r.metrics = compute_metrics(r.confusion);
    return r;
}

inline EvalReport evaluate(const Model& model, const Dataset& ds, Split split, const PipelineConfig& cfg, Ablation ablation,
                           ArtifactCache& cache, std::vector<std::string>* warnings = nullptr) {
    const Parser parser(model, ParseOptions::from(cfg));
    const auto fields = parse_split(parser, ds, split, cache, cfg.workers);
    if (warnings) {
        auto add = [&](const std::string& w) {
            if (std::find(warnings->begin(), warnings->end(), w) == warnings->end()) warnings->push_back(w);
        };
        for (const auto& w : parser.warnings()) add(w);
        for (const auto& f : fields)
            for (const auto& w : f.rare.warnings) add(w);
    }
    return score_fields(fields, ds, split, ablate(cfg.weights, ablation));
}

// ---------------------------------------------------------------------------
// Sweeps and weight tuning

struct SweepRow {
    std::string axis;
    std::string value;
    Metrics metrics;
};

inline const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes = {"alpha", "blocks", "rare_classes", "min_size"};
    return axes;
}

/// Parse-time axes reuse `model` (trained from `base` when null); min_size
/// retrains per value, reusing whatever the cache holds.
inline std::vector<SweepRow> sweep(const Dataset& ds, const PipelineConfig& base, const std::string& axis,
                                   const std::vector<std::string>& values, Ablation ablation, ArtifactCache& cache,
                                   const Model* model = nullptr, std::ostream* log = nullptr,
                                   std::vector<std::string>* warnings = nullptr) {
    if (std::find(sweep_axes().begin(), sweep_axes().end(), axis) == sweep_axes().end())
        throw ArgumentError("unknown sweep axis: " + axis);
    if (values.empty()) throw ArgumentError("sweep needs at least one value");
    std::vector<SweepRow> rows;
    std::optional<Model> own;
    if (axis != "min_size" && !model) {
        own = train_model(ds, base, cache, log);
        model = &*own;
    }
    for (const auto& v : values) {
        PipelineConfig cfg = base;
        cfg.set(axis, v);
        cfg.validate();
        if (log) *log << "sweep " << axis << "=" << v << std::endl;
        std::optional<Model> retrained;
        const Model* m = model;
        if (axis == "min_size") {
            retrained = train_model(ds, cfg, cache, log);
            m = &*retrained;
        }
        rows.push_back({axis, v, evaluate(*m, ds, Split::Test, cfg, ablation, cache, warnings).metrics});
    }
    return rows;
}

struct TuneResult {
    FusionWeights weights;
    Metrics metrics;
};

/// Exhaustive grid over (w_g, w_l, w_v) with w_c fixed; sorted by global
/// accuracy, then class accuracy, ties kept in grid order.
inline std::vector<TuneResult> tune_weights(std::span<const ParseFields> fields, const Dataset& ds, Split split,
                                            const std::vector<double>& grid, double w_const) {
    if (grid.empty()) throw ArgumentError("weight grid is empty");
    std::vector<TuneResult> out;
    for (double wg : grid)
        for (double wl : grid)
            for (double wv : grid) {
                if (wg == 0 && wl == 0 && wv == 0) continue;
                FusionWeights w{w_const, wg, wl, wv};
                w.validate();
                out.push_back({w, score_fields(fields, ds, split, w).metrics});
            }
    std::stable_sort(out.begin(), out.end(), [](const TuneResult& a, const TuneResult& b) {
        if (a.metrics.global_acc != b.metrics.global_acc) return a.metrics.global_acc > b.metrics.global_acc;
        return a.metrics.class_acc > b.metrics.class_acc;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

inline std::array<std::uint8_t, 3> class_color(ClassIndex c) {
    static const std::uint8_t table[][3] = {{0, 0, 0},       {70, 130, 230}, {140, 90, 60},  {128, 128, 128},
                                            {30, 60, 160},   {220, 30, 30},  {40, 170, 60},  {240, 200, 40},
                                            {170, 60, 200},  {60, 200, 200}, {250, 130, 30}, {120, 200, 120}};
    if (c >= 0 && c < static_cast<int>(std::size(table))) return {table[c][0], table[c][1], table[c][2]};
    Hasher h;
    h.pod(c);
    const auto v = h.value();
    return {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16)};
}

/// Half image, half class color.
inline Image overlay(const Image& img, const LabelMap& labels) {
    if (img.width != labels.width || img.height != labels.height) throw ArgumentError("overlay: dimension mismatch");
    Image out = img;
    for (std::size_t i = 0; i < labels.labels.size(); ++i) {
        const auto col = class_color(labels.labels[i]);
        for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = 0.5f * img.data[i * 3 + c] + 0.5f * (col[c] / 255.0f);
    }
    return out;
}

} // namespace sclp
