#include <gtest/gtest.h>

#include <fstream>

#include "sclp/sclp.hpp"
#include "test_util.hpp"

using namespace sclp;

namespace {

std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

SyntheticSceneSpec small_spec() {
    SyntheticSceneSpec s;
    s.width = 48;
    s.height = 48;
    s.train = 20;
    s.test = 5;
    s.seed = 3;
    return s;
}

PipelineConfig small_config(const std::string& manifest) {
    PipelineConfig c;
    c.manifest = manifest;
    c.set("k_scale", "20");
    c.set("min_size", "15");
    c.set("epochs", "120");
    c.set("codebook_size", "16");
    c.set("rare_classes", "0");
    return c;
}

// One dataset and one trained model shared by the suite.
class PipelineTest : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        dir_ = new sclp::testing::TempDir();
        manifest_ = generate_synthetic(small_spec(), dir_->file("data"));
        ds_ = new Dataset(Dataset::load(manifest_));
        ArtifactCache cache(dir_->file("cache"));
        model_ = new Model(train_model(*ds_, small_config(manifest_), cache));
    }
    static void TearDownTestSuite() {
        delete model_;
        delete ds_;
        delete dir_;
    }

    static sclp::testing::TempDir* dir_;
    static std::string manifest_;
    static Dataset* ds_;
    static Model* model_;
};

sclp::testing::TempDir* PipelineTest::dir_ = nullptr;
std::string PipelineTest::manifest_;
Dataset* PipelineTest::ds_ = nullptr;
Model* PipelineTest::model_ = nullptr;

} // namespace

TEST(Synthetic, ByteIdenticalForFixedSeed) {
    sclp::testing::TempDir a, b;
    generate_synthetic(small_spec(), a.file("d"));
    generate_synthetic(small_spec(), b.file("d"));
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a.path() / "d")) {
        if (!e.is_regular_file()) continue;
        const auto rel = std::filesystem::relative(e.path(), a.path() / "d");
        const auto other = b.path() / "d" / rel;
        if (rel == "manifest.txt" || rel == "classes.txt") {
            ASSERT_TRUE(std::filesystem::exists(other));
            continue;  // manifests embed the output directory
        }
        EXPECT_EQ(file_bytes(e.path()), file_bytes(other)) << rel;
        ++files;
    }
    EXPECT_EQ(files, 50u);
}

TEST(Synthetic, LabelsUseDeclaredClassesAndAreLongTailed) {
    sclp::testing::TempDir d;
    const SyntheticSceneSpec spec;  // 60 train / 10 test, 64x64
    const Dataset ds = Dataset::load(generate_synthetic(spec, d.file("d")));
    EXPECT_EQ(ds.num_classes(), 5);
    for (const auto& s : ds.samples())
        for (auto v : s.labels.labels) ASSERT_TRUE(v >= 1 && v <= 5);
    // Independent recount straight from the rasters on disk.
    std::vector<std::uint64_t> counts(5, 0);
    for (const auto& s : ds.samples())
        if (s.entry.split == Split::Train)
            for (auto v : io::load_label_map(s.entry.label_path).labels) ++counts[v - 1];
    EXPECT_EQ(counts, class_pixel_counts(ds, Split::Train));
    const auto largest = *std::max_element(counts.begin(), counts.end());
    const auto smallest = *std::min_element(counts.begin(), counts.end());
    EXPECT_GT(smallest, 0u);
    EXPECT_LT(static_cast<double>(smallest), 0.05 * static_cast<double>(largest));
    EXPECT_EQ(std::min_element(counts.begin(), counts.end()) - counts.begin(), synth::Car - 1);
}

TEST(Synthetic, SkyIsAlwaysAboveEverythingElse) {
    synth::Rng rng(11);
    SyntheticSceneSpec spec;
    for (int i = 0; i < 40; ++i) {
        const auto s = synth::render_scene(spec, rng);
        for (int x = 0; x < s.labels.width; ++x) {
            bool left_sky = false;
            for (int y = 0; y < s.labels.height; ++y) {
                const int v = s.labels.at(x, y);
                if (v != synth::Sky) left_sky = true;
                else ASSERT_FALSE(left_sky) << "sky below another class at column " << x;
            }
        }
    }
}

TEST(Synthetic, InvalidSpecRejected) {
    SyntheticSceneSpec s;
    s.width = 8;
    EXPECT_THROW(s.validate(), ArgumentError);
    s = {};
    s.horizon_min = 0.7;
    s.horizon_max = 0.3;
    EXPECT_THROW(s.validate(), ArgumentError);
    s = {};
    s.car_probability = 1.5;
    EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(Config, FlagBeatsFileBeatsDefault) {
    sclp::testing::TempDir d;
    {
        std::ofstream f(d.file("c.cfg"));
        f << "# comment\nalpha = 7\nmin_size=30   # trailing\nblocks = 2x3\n\n";
    }
    const auto c = PipelineConfig::assemble(d.file("c.cfg"), {{"alpha", "11"}});
    EXPECT_EQ(c.retrieval.alpha, 11);
    EXPECT_EQ(c.segmentation.min_size, 30);
    EXPECT_EQ(c.block_rows, 2);
    EXPECT_EQ(c.block_cols, 3);
    EXPECT_EQ(c.training.hidden, 16);
    EXPECT_EQ(c.mrmr_count, 50);
    EXPECT_DOUBLE_EQ(c.segmentation.sigma, 0.8);
    EXPECT_DOUBLE_EQ(c.segmentation.k_scale, 200.0);
}

TEST(Config, CacheDirPrecedence) {
    PipelineConfig c;
    ::setenv(kCacheDirEnv, "/tmp/from-env", 1);
    EXPECT_EQ(c.resolved_cache_dir(), "/tmp/from-env");
    c.set("cache_dir", "/tmp/from-flag");
    EXPECT_EQ(c.resolved_cache_dir(), "/tmp/from-flag");
    ::unsetenv(kCacheDirEnv);
    EXPECT_EQ(PipelineConfig{}.resolved_cache_dir(), ".sclp_cache");
}

TEST(Config, RejectsBadInput) {
    PipelineConfig c;
    EXPECT_THROW(c.set("no_such_key", "1"), ArgumentError);
    EXPECT_THROW(c.set("alpha", "ten"), ArgumentError);
    EXPECT_THROW(c.set("weights", "1,2"), ArgumentError);
    EXPECT_THROW(PipelineConfig::assemble("", {{"blocks", "0x4"}}), ArgumentError);
    EXPECT_THROW(PipelineConfig::assemble("", {{"min_size", "0"}}), ArgumentError);
    EXPECT_THROW(PipelineConfig::assemble("/nonexistent/x.cfg", {}), LoadError);
    c.set("alpha", "full");
    EXPECT_EQ(c.retrieval.alpha, 0);
}

TEST(Config, EntriesRoundTrip) {
    PipelineConfig a;
    a.set("alpha", "13");
    a.set("weights", "0.1,0.2,0.3,0.4");
    a.set("sclp_mode", "pixel-pair");
    a.set("weight_mode", "receiver");
    PipelineConfig b;
    for (const auto& [k, v] : a.entries()) b.set(k, v);
    EXPECT_EQ(a.entries(), b.entries());
}

TEST(Ablation, ZeroesTheRightWeights) {
    const FusionWeights w{0.1, 0.2, 0.3, 0.4};
    EXPECT_EQ(ablate(w, Ablation::NoGlobal).w_global, 0.0);
    EXPECT_EQ(ablate(w, Ablation::NoGlobal).w_local, 0.3);
    EXPECT_EQ(ablate(w, Ablation::NoLocal).w_local, 0.0);
    const auto v = ablate(w, Ablation::VisualOnly);
    EXPECT_EQ(v.w_global, 0.0);
    EXPECT_EQ(v.w_local, 0.0);
    EXPECT_EQ(v.w_visual, 0.4);
    EXPECT_EQ(parse_ablation("visual-only"), Ablation::VisualOnly);
    EXPECT_THROW(parse_ablation("no-visual"), ArgumentError);
}

TEST(Cache, DisabledCacheNeverHits) {
    ArtifactCache c;
    EXPECT_FALSE(c.lookup("segmentation", "k", {".ids"}));
    EXPECT_FALSE(c.lookup("segmentation", "k", {".ids"}));
    EXPECT_EQ(c.counts("segmentation").misses, 2u);
    EXPECT_EQ(c.counts("segmentation").hits, 0u);
}

TEST(Cache, KeysSeparateParameters) {
    SegmentationParams a, b;
    b.min_size = a.min_size + 1;
    EXPECT_NE(segmentation_key(1, a), segmentation_key(1, b));
    EXPECT_NE(segmentation_key(1, a), segmentation_key(2, a));
    EXPECT_EQ(segmentation_key(1, a), segmentation_key(1, a));
    EXPECT_NE(descriptors_key(1, 2), descriptors_key(1, 3));
}

TEST_F(PipelineTest, WarmRerunHitsEveryArtifact) {
    sclp::testing::TempDir d;
    const auto cfg = small_config(manifest_);
    ArtifactCache cache(d.file("cache"));
    const Model cold = train_model(*ds_, cfg, cache);
    const auto n = ds_->indices(Split::Train).size();
    EXPECT_EQ(cache.total().hits, 0u);
    cache.reset_counts();
    const Model warm = train_model(*ds_, cfg, cache);
    EXPECT_EQ(cache.total().misses, 0u);
    EXPECT_EQ(cache.total().hits, 3 * n + 2);  // segmentation, features, descriptors per image; two codebooks
    EXPECT_EQ(cold.serialize(), warm.serialize());
}

TEST_F(PipelineTest, DeletingOneSegmentationRecomputesExactlyOne) {
    sclp::testing::TempDir d;
    const auto cfg = small_config(manifest_);
    ArtifactCache cache(d.file("cache"));
    const Model first = train_model(*ds_, cfg, cache);
    std::vector<std::filesystem::path> ids;
    for (const auto& e : std::filesystem::directory_iterator(d.path() / "cache" / "segmentation"))
        if (e.path().extension() == ".ids") ids.push_back(e.path());
    ASSERT_EQ(ids.size(), ds_->indices(Split::Train).size());
    std::sort(ids.begin(), ids.end());
    std::filesystem::remove(ids[3]);
    cache.reset_counts();
    const Model again = train_model(*ds_, cfg, cache);
    EXPECT_EQ(cache.counts("segmentation").misses, 1u);
    EXPECT_EQ(cache.total().misses, 1u);
    EXPECT_TRUE(std::filesystem::exists(ids[3]));
    EXPECT_EQ(first.serialize(), again.serialize());
}

TEST_F(PipelineTest, BundleIsByteIdenticalAcrossIndependentRuns) {
    auto cfg = small_config(manifest_);
    ArtifactCache none;
    const auto a = train_model(*ds_, cfg, none).serialize();
    cfg.workers = 3;
    sclp::testing::TempDir d;
    ArtifactCache fresh(d.file("c"));
    const auto b = train_model(*ds_, cfg, fresh).serialize();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, model_->serialize());
}

TEST_F(PipelineTest, BundleSaveLoadRoundTrip) {
    sclp::testing::TempDir d;
    model_->save(d.file("m.bin"));
    const Model back = Model::load(d.file("m.bin"));
    EXPECT_EQ(back.serialize(), model_->serialize());
    EXPECT_EQ(back.vocabulary.names(), model_->vocabulary.names());
    EXPECT_EQ(back.images.size(), ds_->indices(Split::Train).size());
}

TEST_F(PipelineTest, CorruptBundleIsALoadError) {
    sclp::testing::TempDir d;
    auto bytes = model_->serialize();
    {
        std::ofstream f(d.file("short.bin"), std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() / 2));
    }
    EXPECT_THROW(Model::load(d.file("short.bin")), LoadError);
    bytes[0] ^= 0xFF;
    {
        std::ofstream f(d.file("magic.bin"), std::ios::binary);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    EXPECT_THROW(Model::load(d.file("magic.bin")), LoadError);
    EXPECT_THROW(Model::load(d.file("missing.bin")), LoadError);
}

TEST_F(PipelineTest, TrainingQueryRetrievesItselfAndKeepsDimensions) {
    ParseOptions opt = ParseOptions::from(small_config(manifest_));
    opt.alpha = 1;
    const Parser parser(*model_, opt);
    ArtifactCache none;
    const auto train = ds_->indices(Split::Train);
    for (std::size_t i : {std::size_t{0}, std::size_t{7}}) {
        const Image& img = ds_->sample(train[i]).image;
        const ParseFields f = parser.fields(img, none);
        EXPECT_EQ(f.base.size(), 4u);
        EXPECT_NE(std::find(f.base.image_ids.begin(), f.base.image_ids.end(), static_cast<int>(i)), f.base.image_ids.end());
        const LabelMap lm = f.labels(FusionWeights{});
        EXPECT_EQ(lm.width, img.width);
        EXPECT_EQ(lm.height, img.height);
    }
}

TEST_F(PipelineTest, VisualOnlyWeightsReproduceVisualParse) {
    const Parser parser(*model_, ParseOptions::from(small_config(manifest_)));
    ArtifactCache none;
    for (std::size_t i : ds_->indices(Split::Test)) {
        const ParseFields f = parser.fields(ds_->sample(i).image, none);
        const FusionWeights w{0, 0, 0, 1};
        const ProbabilityField fused = f.fused(w);
        ProbabilityField visual = f.visual;
        normalize_rows(visual);
        EXPECT_EQ(fused.values, visual.values);
        EXPECT_EQ(f.labels(w).labels, assign_labels(f.visual, f.seg).labels);
    }
}

TEST_F(PipelineTest, FieldsAreOnTheSimplex) {
    const Parser parser(*model_, ParseOptions::from(small_config(manifest_)));
    ArtifactCache none;
    const ParseFields f = parser.fields(ds_->sample(ds_->indices(Split::Test)[0]).image, none);
    EXPECT_TRUE(f.visual.on_simplex());
    EXPECT_TRUE(f.global.on_simplex());
    EXPECT_TRUE(f.local.on_simplex());
    EXPECT_TRUE(f.fused(FusionWeights{}).on_simplex());
    EXPECT_EQ(f.merged.size(), 4u * ds_->indices(Split::Train).size());
}

TEST_F(PipelineTest, UnambiguousLayoutsParseAccurately) {
    // Clean features, full training budget: the reference run gave 0.98.
    ArtifactCache cache(dir_->file("cache"));
    auto cfg = small_config(manifest_);
    cfg.set("epochs", "200");
    const Model m = train_model(*ds_, cfg, cache);
    const auto r = evaluate(m, *ds_, Split::Test, cfg, Ablation::None, cache);
    EXPECT_GE(r.metrics.global_acc, 0.90);
    EXPECT_EQ(r.images, 5u);
    EXPECT_EQ(r.confusion.total(), 5u * 48 * 48);
}

TEST_F(PipelineTest, OracleVisualFieldScoresPerfectly) {
    const Parser parser(*model_, ParseOptions::from(small_config(manifest_)));
    ArtifactCache none;
    const auto idx = ds_->indices(Split::Test);
    std::vector<ParseFields> fields;
    for (std::size_t i : idx) {
        const Sample& s = ds_->sample(i);
        ParseFields f = parser.fields(s.image, none);
        // One superpixel per pixel and a one-hot visual field from ground truth.
        std::vector<int> ids(s.labels.labels.size());
        std::iota(ids.begin(), ids.end(), 0);
        f.seg = segmentation_from_ids(s.labels.width, s.labels.height, ids);
        const int M = ds_->num_classes();
        f.visual = ProbabilityField(FieldTag::Visual, ids.size(), M);
        f.global = ProbabilityField(FieldTag::Global, ids.size(), M);
        f.local = ProbabilityField(FieldTag::Local, ids.size(), M);
        for (std::size_t p = 0; p < ids.size(); ++p) {
            const auto sp = static_cast<std::size_t>(f.seg.id_map[p]);
            f.visual.row(sp)[s.labels.labels[p] - 1] = 1.0;
            for (int c = 0; c < M; ++c) f.global.row(sp)[c] = f.local.row(sp)[c] = 1.0 / M;
        }
        fields.push_back(std::move(f));
    }
    const auto r = score_fields(fields, *ds_, Split::Test, FusionWeights{0, 0, 0, 1});
    EXPECT_DOUBLE_EQ(r.metrics.global_acc, 1.0);
    EXPECT_DOUBLE_EQ(r.metrics.class_acc, 1.0);
    EXPECT_DOUBLE_EQ(r.metrics.mean_iu, 1.0);
    EXPECT_DOUBLE_EQ(r.metrics.fw_iu, 1.0);
}

TEST_F(PipelineTest, ReportHasExactlyTheFourMetricKeys) {
    ArtifactCache none;
    const auto r = evaluate(*model_, *ds_, Split::Test, small_config(manifest_), Ablation::None, none);
    const auto j = metrics_json(r.metrics);
    std::set<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.insert(k);
    EXPECT_EQ(keys, (std::set<std::string>{"global_acc", "class_acc", "mean_iu", "fw_iu"}));
    sclp::testing::TempDir d;
    write_metrics_json(d.file("r.json"), r.metrics);
    std::ifstream in(d.file("r.json"));
    const Metrics back = metrics_from_json(nlohmann::json::parse(in));
    EXPECT_EQ(back.global_acc, r.metrics.global_acc);
    EXPECT_EQ(back.fw_iu, r.metrics.fw_iu);
}

TEST_F(PipelineTest, SweepRowMatchesStandaloneEval) {
    const auto cfg = small_config(manifest_);
    ArtifactCache cache(dir_->file("cache"));
    const auto rows = sweep(*ds_, cfg, "alpha", {"3", "100"}, Ablation::None, cache, model_);
    ASSERT_EQ(rows.size(), 2u);
    const auto standalone = evaluate(*model_, *ds_, Split::Test, cfg, Ablation::None, cache).metrics;
    EXPECT_EQ(rows[1].metrics.as_record(), standalone.as_record());
    EXPECT_EQ(rows[1].value, "100");
    const std::string csv = sweep_csv(rows);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "axis,value,global_acc,class_acc,mean_iu,fw_iu");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST_F(PipelineTest, SweepShapeAndErrors) {
    ArtifactCache cache(dir_->file("cache"));
    const auto cfg = small_config(manifest_);
    EXPECT_EQ(sweep(*ds_, cfg, "alpha", {"10", "50", "100"}, Ablation::None, cache, model_).size(), 3u);
    EXPECT_THROW(sweep(*ds_, cfg, "alpha", {}, Ablation::None, cache, model_), ArgumentError);
    EXPECT_THROW(sweep(*ds_, cfg, "sigma", {"1"}, Ablation::None, cache, model_), ArgumentError);
    EXPECT_THROW(sweep(*ds_, cfg, "blocks", {"0"}, Ablation::None, cache, model_), ArgumentError);
}

TEST_F(PipelineTest, BlocksSweepReusesSegmentations) {
    ArtifactCache cache(dir_->file("cache"));
    const auto cfg = small_config(manifest_);
    evaluate(*model_, *ds_, Split::Test, cfg, Ablation::None, cache);  // warm the query artifacts
    cache.reset_counts();
    const auto rows = sweep(*ds_, cfg, "blocks", {"1", "2x2", "8"}, Ablation::None, cache, model_);
    EXPECT_EQ(rows.size(), 3u);
    EXPECT_EQ(cache.total().misses, 0u);
    EXPECT_EQ(cache.counts("segmentation").hits, 3 * ds_->indices(Split::Test).size());
}

TEST_F(PipelineTest, MinSizeSweepRetrains) {
    ArtifactCache cache(dir_->file("cache"));
    auto cfg = small_config(manifest_);
    cfg.set("epochs", "20");
    cache.reset_counts();
    const auto rows = sweep(*ds_, cfg, "min_size", {"15", "40"}, Ablation::None, cache);
    ASSERT_EQ(rows.size(), 2u);
    // The second value needs fresh segmentations for every train and test image.
    EXPECT_GE(cache.counts("segmentation").misses, ds_->samples().size());
}

TEST_F(PipelineTest, ClampsWithWarnings) {
    ParseOptions opt = ParseOptions::from(small_config(manifest_));
    opt.alpha = 500;
    opt.rare_classes = 9;
    const Parser p(*model_, opt);
    EXPECT_EQ(p.alpha(), 20);
    EXPECT_EQ(p.rare().size(), 5u);
    ASSERT_EQ(p.warnings().size(), 2u);
    opt.alpha = 0;
    opt.rare_classes = 0;
    const Parser full(*model_, opt);
    EXPECT_EQ(full.alpha(), 20);
    EXPECT_TRUE(full.warnings().empty());
    EXPECT_TRUE(full.rare().empty());
}

TEST_F(PipelineTest, RareRetrievalSetsOnlyHoldImagesWithTheClass) {
    ParseOptions opt = ParseOptions::from(small_config(manifest_));
    opt.alpha = 2;
    opt.rare_classes = 2;
    opt.rare_alpha = 3;
    const Parser parser(*model_, opt);
    ASSERT_EQ(parser.rare().size(), 2u);
    EXPECT_EQ(parser.rare()[0], synth::Car);
    ArtifactCache none;
    const auto train = ds_->indices(Split::Train);
    for (std::size_t i : ds_->indices(Split::Test)) {
        const ParseFields f = parser.fields(ds_->sample(i).image, none);
        std::size_t total = f.base.size();
        for (const auto& [c, set] : f.rare.per_class) {
            EXPECT_FALSE(set.image_ids.empty());
            for (int id : set.image_ids) {
                const auto& gt = ds_->sample(train[static_cast<std::size_t>(id)]).labels.labels;
                EXPECT_NE(std::find(gt.begin(), gt.end(), static_cast<std::uint8_t>(c)), gt.end());
            }
            total += set.size();
        }
        EXPECT_EQ(f.merged.size(), total);
    }
}

TEST_F(PipelineTest, TuneIsSortedAndMatchesDirectScoring) {
    const Parser parser(*model_, ParseOptions::from(small_config(manifest_)));
    ArtifactCache none;
    const auto fields = parse_split(parser, *ds_, Split::Test, none, 1);
    const auto res = tune_weights(fields, *ds_, Split::Test, {0.0, 0.5, 1.0}, 0.0);
    EXPECT_EQ(res.size(), 26u);
    for (std::size_t i = 1; i < res.size(); ++i) EXPECT_GE(res[i - 1].metrics.global_acc, res[i].metrics.global_acc);
    double best = 0.0;
    for (double wg : {0.0, 0.5, 1.0})
        for (double wl : {0.0, 0.5, 1.0})
            for (double wv : {0.0, 0.5, 1.0})
                if (wg + wl + wv > 0)
                    best = std::max(best, score_fields(fields, *ds_, Split::Test, {0, wg, wl, wv}).metrics.global_acc);
    EXPECT_EQ(res[0].metrics.global_acc, best);
    EXPECT_THROW(tune_weights(fields, *ds_, Split::Test, {}, 0.0), ArgumentError);
}

TEST_F(PipelineTest, QueryErrors) {
    const Parser parser(*model_, ParseOptions::from(small_config(manifest_)));
    ArtifactCache none;
    EXPECT_THROW(parser.fields(Image(12, 40), none), ArgumentError);
    const Dataset only_train(ds_->vocabulary(), [&] {
        std::vector<Sample> s;
        for (std::size_t i : ds_->indices(Split::Train)) s.push_back(ds_->sample(i));
        return s;
    }());
    EXPECT_THROW(parse_split(parser, only_train, Split::Test, none, 1), ArgumentError);
    const Dataset other(ClassVocabulary({"a", "b", "c", "d", "e"}), ds_->samples());
    EXPECT_THROW(parse_split(parser, other, Split::Test, none, 1), ArgumentError);
}

TEST_F(PipelineTest, StageFailureNamesTheStage) {
    // A vocabulary entry with no training pixels cannot get a classifier.
    std::vector<std::string> names = synth::class_names();
    names.push_back("boat");
    const Dataset ds(ClassVocabulary(names), ds_->samples());
    auto cfg = small_config(manifest_);
    cfg.set("epochs", "2");
    ArtifactCache none;
    try {
        train_model(ds, cfg, none);
        FAIL() << "expected a training error";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("stage classifier"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("boat"), std::string::npos) << e.what();
    }
}

TEST_F(PipelineTest, FeatureNoiseIsSeededPerImage) {
    Matrix a(3, 4), b(3, 4);
    const std::vector<double> scale{1, 2, 0, 4};
    inject_feature_noise(a, scale, 0.5, 42);
    inject_feature_noise(b, scale, 0.5, 42);
    EXPECT_EQ(a.data, b.data);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a(i, 2), 0.0);
    Matrix c(3, 4);
    inject_feature_noise(c, scale, 0.5, 43);
    EXPECT_NE(a.data, c.data);
    Matrix z(3, 4);
    inject_feature_noise(z, scale, 0.0, 42);
    EXPECT_EQ(z.data, std::vector<double>(12, 0.0));
}

TEST_F(PipelineTest, OverlayBlendsHalfAndHalf) {
    const Sample& s = ds_->sample(0);
    const Image o = overlay(s.image, s.labels);
    ASSERT_EQ(o.width, s.image.width);
    const auto col = class_color(s.labels.labels[0]);
    EXPECT_FLOAT_EQ(o.data[0], 0.5f * s.image.data[0] + 0.5f * (col[0] / 255.0f));
    EXPECT_THROW(overlay(Image(20, 20), LabelMap(21, 20)), ArgumentError);
}
