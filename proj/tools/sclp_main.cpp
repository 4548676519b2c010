// Command-line front end: synth, train, parse, eval, sweep, tune.

#include <iostream>

#include "CLI11.hpp"
#include "sclp/sclp.hpp"

namespace {

using namespace sclp;

// Flags that map one-to-one onto config keys. Registered on every command
// that builds a PipelineConfig; only flags actually given override the file.
struct ConfigFlags {
    std::string config_file;
    std::vector<std::pair<std::string, CLI::Option*>> options;
    std::map<std::string, std::string> values;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        options.emplace_back(key, app->add_option(flag, values[key], help));
    }

    void add_common(CLI::App* app) {
        app->add_option("--config", config_file, "key=value config file");
        add(app, "--manifest", "manifest", "dataset manifest");
        add(app, "--cache-dir", "cache_dir", std::string("artifact cache directory (else $") + kCacheDirEnv + ")");
        add(app, "--workers", "workers", "parallel per-image workers");
    }

    void add_training(CLI::App* app) {
        add(app, "--sigma", "sigma", "segmentation smoothing sigma");
        add(app, "--k-scale", "k_scale", "segmentation threshold scale");
        add(app, "--min-size", "min_size", "minimum superpixel size");
        add(app, "--hidden", "hidden", "hidden units per class network");
        add(app, "--epochs", "epochs", "training epochs");
        add(app, "--batch", "batch", "mini-batch size");
        add(app, "--learning-rate", "learning_rate", "SGD learning rate");
        add(app, "--seed", "seed", "random seed");
        add(app, "--mrmr-count", "mrmr_count", "features selected per class");
        add(app, "--mrmr-w", "mrmr_w", "discretization width in std units");
        add(app, "--codebook-size", "codebook_size", "spatial pyramid vocabulary size");
        add(app, "--feature-noise", "feature_noise", "Gaussian feature noise level (degrades the classifier)");
    }

    void add_parsing(CLI::App* app) {
        add(app, "--alpha", "alpha", "retrieved images per descriptor, or 'full'");
        add(app, "--rare-classes", "rare_classes", "number of rare classes with extra retrieval (0 = off)");
        add(app, "--rare-alpha", "rare_alpha", "retrieval depth for rare classes (0 = alpha)");
        add(app, "--blocks", "blocks", "block grid, RxC or N");
        add(app, "--weights", "weights", "fusion weights wc,wg,wl,wv");
        add(app, "--weight-mode", "weight_mode", "voter or receiver");
        add(app, "--sclp-mode", "sclp_mode", "presence or pixel-pair");
        add(app, "--eps", "eps", "Laplace smoothing constant");
    }

    PipelineConfig build() const {
        std::vector<std::pair<std::string, std::string>> o;
        for (const auto& [key, opt] : options)
            if (opt->count() > 0) o.emplace_back(key, values.at(key));
        return PipelineConfig::assemble(config_file, o);
    }
};

void print_warnings(const std::vector<std::string>& ws) {
    for (const auto& w : ws) std::cerr << "warning: " << w << "\n";
}

void print_cache(const ArtifactCache& cache) {
    if (!cache.enabled()) return;
    for (const auto& [kind, c] : cache.all_counts())
        std::cerr << "cache " << kind << ": " << c.hits << " hit, " << c.misses << " miss\n";
}

std::string need_manifest(const PipelineConfig& cfg) {
    if (cfg.manifest.empty()) throw ArgumentError("--manifest is required");
    return cfg.manifest;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = PipelineConfig::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Scene parsing with spatially constrained co-occurrence priors"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic street/coast dataset");
    SyntheticSceneSpec spec;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", spec.seed, "generator seed");
    synth->add_option("--train", spec.train, "training images");
    synth->add_option("--test", spec.test, "test images");
    synth->add_option("--width", spec.width, "image width");
    synth->add_option("--height", spec.height, "image height");
    synth->add_option("--coast-fraction", spec.coast_fraction, "fraction of coast scenes");
    synth->add_option("--max-buildings", spec.max_buildings, "buildings per city scene, upper bound");
    synth->add_option("--max-cars", spec.max_cars, "cars per city scene, upper bound");
    synth->add_option("--car-probability", spec.car_probability, "probability a city scene has cars");

    // train
    auto* train = app.add_subcommand("train", "train a model bundle from the manifest's train split");
    ConfigFlags train_flags;
    std::string train_model_path;
    train_flags.add_common(train);
    train_flags.add_training(train);
    train->add_option("--model", train_model_path, "output model bundle")->required();

    // parse
    auto* parse = app.add_subcommand("parse", "label one query image");
    ConfigFlags parse_flags;
    std::string parse_model, parse_image, parse_out, parse_overlay, parse_sclp;
    parse_flags.add_common(parse);
    parse_flags.add_parsing(parse);
    parse->add_option("--model", parse_model, "model bundle")->required();
    parse->add_option("--image", parse_image, "query image")->required();
    parse->add_option("--out", parse_out, "output label map (8-bit indexed PNG)")->required();
    parse->add_option("--overlay", parse_overlay, "optional RGB overlay output");
    parse->add_option("--sclp-dir", parse_sclp, "also write the query's global.sclp and local.sclp here");

    // eval
    auto* eval = app.add_subcommand("eval", "parse a split and report the four metrics");
    ConfigFlags eval_flags;
    std::string eval_model, eval_split = "test", eval_ablate = "none", eval_report;
    bool eval_confusion = false;
    eval_flags.add_common(eval);
    eval_flags.add_parsing(eval);
    eval->add_option("--model", eval_model, "model bundle")->required();
    eval->add_option("--split", eval_split, "train or test");
    eval->add_option("--ablate", eval_ablate, "none, no-global, no-local or visual-only");
    eval->add_option("--report", eval_report, "write the metrics as JSON");
    eval->add_flag("--confusion", eval_confusion, "also print the confusion matrix");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate the test split over one parameter axis");
    ConfigFlags sweep_flags;
    std::string sweep_axis, sweep_values, sweep_out, sweep_model, sweep_ablate = "none";
    sweep_flags.add_common(sweep_cmd);
    sweep_flags.add_training(sweep_cmd);
    sweep_flags.add_parsing(sweep_cmd);
    sweep_cmd->add_option("--axis", sweep_axis, "alpha, blocks, rare_classes or min_size")->required();
    sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
    sweep_cmd->add_option("--out", sweep_out, "CSV output (stdout when omitted)");
    sweep_cmd->add_option("--model", sweep_model, "reuse this bundle for parse-time axes");
    sweep_cmd->add_option("--ablate", sweep_ablate, "none, no-global, no-local or visual-only");

    // tune
    auto* tune = app.add_subcommand("tune", "grid-search fusion weights on a split");
    ConfigFlags tune_flags;
    std::string tune_model, tune_split = "train", tune_grid = "0,0.25,0.5,0.75,1";
    double tune_wc = 0.0;
    int tune_top = 5;
    tune_flags.add_common(tune);
    tune_flags.add_parsing(tune);
    tune->add_option("--model", tune_model, "model bundle")->required();
    tune->add_option("--split", tune_split, "split to tune on");
    tune->add_option("--grid", tune_grid, "candidate values for wg, wl and wv");
    tune->add_option("--wc", tune_wc, "constant weight");
    tune->add_option("--top", tune_top, "rows to print");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (synth->parsed()) {
        const std::string manifest = generate_synthetic(spec, synth_out);
        std::cout << manifest << "\n";
        return 0;
    }

    if (train->parsed()) {
        const PipelineConfig cfg = train_flags.build();
        const Dataset ds = Dataset::load(need_manifest(cfg));
        ArtifactCache cache(cfg.resolved_cache_dir());
        TrainSummary sum;
        const Model model = train_model(ds, cfg, cache, &std::cerr, &sum);
        model.save(train_model_path);
        std::cerr << "trained on " << sum.images << " images, " << sum.labeled_superpixels << " labeled superpixels\n";
        print_cache(cache);
        return 0;
    }

    if (parse->parsed()) {
        PipelineConfig cfg = parse_flags.build();
        const Model model = Model::load(parse_model);
        ArtifactCache cache(cfg.resolved_cache_dir());
        ParseOptions opt = ParseOptions::from(cfg);
        opt.keep_priors = !parse_sclp.empty();
        const Parser parser(model, opt);
        print_warnings(parser.warnings());
        const Image img = io::load_image(parse_image);
        const ParseFields f = parser.fields(img, cache);
        print_warnings(f.rare.warnings);
        const LabelMap labels = f.labels(cfg.weights);
        io::save_label_map(parse_out, labels);
        if (!parse_overlay.empty()) io::save_image(parse_overlay, overlay(img, labels));
        if (!parse_sclp.empty()) {
            std::filesystem::create_directories(parse_sclp);
            save_sclp((std::filesystem::path(parse_sclp) / "global.sclp").string(),
                      (std::filesystem::path(parse_sclp) / "local.sclp").string(), *f.global_prior, *f.local_prior);
        }
        std::cerr << f.seg.size() << " superpixels, " << f.merged.size() << " retrieved images\n";
        return 0;
    }

    if (eval->parsed()) {
        const PipelineConfig cfg = eval_flags.build();
        const Ablation ab = parse_ablation(eval_ablate);
        const Model model = Model::load(eval_model);
        const Dataset ds = Dataset::load(need_manifest(cfg));
        ArtifactCache cache(cfg.resolved_cache_dir());
        std::vector<std::string> warn;
        const EvalReport r = evaluate(model, ds, parse_split(eval_split), cfg, ab, cache, &warn);
        print_warnings(warn);
        std::cout << metrics_table(r.metrics, "split " + eval_split + ", " + std::to_string(r.images) + " images, ablation " +
                                                  to_string(ab) + ", weights " + r.weights.str());
        if (eval_confusion) std::cout << confusion_table(r.confusion, model.vocabulary);
        if (!eval_report.empty()) write_metrics_json(eval_report, r.metrics);
        print_cache(cache);
        return 0;
    }

    if (sweep_cmd->parsed()) {
        const PipelineConfig cfg = sweep_flags.build();
        const Dataset ds = Dataset::load(need_manifest(cfg));
        ArtifactCache cache(cfg.resolved_cache_dir());
        std::optional<Model> model;
        if (!sweep_model.empty()) model = Model::load(sweep_model);
        std::vector<std::string> warn;
        const auto rows = sweep(ds, cfg, sweep_axis, split_list(sweep_values), parse_ablation(sweep_ablate), cache,
                                model ? &*model : nullptr, &std::cerr, &warn);
        print_warnings(warn);
        const std::string csv = sweep_csv(rows);
        if (sweep_out.empty()) {
            std::cout << csv;
        } else {
            std::ofstream out(sweep_out, std::ios::trunc);
            if (!out) throw LoadError("cannot write " + sweep_out);
            out << csv;
        }
        print_cache(cache);
        return 0;
    }

    if (tune->parsed()) {
        const PipelineConfig cfg = tune_flags.build();
        const Model model = Model::load(tune_model);
        const Dataset ds = Dataset::load(need_manifest(cfg));
        ArtifactCache cache(cfg.resolved_cache_dir());
        const Split split = parse_split(tune_split);
        const Parser parser(model, ParseOptions::from(cfg));
        print_warnings(parser.warnings());
        const auto fields = parse_split(parser, ds, split, cache, cfg.workers);
        std::vector<double> grid;
        for (const auto& v : split_list(tune_grid)) grid.push_back(PipelineConfig::parse_double("grid", v));
        const auto results = tune_weights(fields, ds, split, grid, tune_wc);
        std::cout << "weights,global_acc,class_acc,mean_iu,fw_iu\n" << std::setprecision(6);
        for (int i = 0; i < tune_top && i < static_cast<int>(results.size()); ++i) {
            const auto& r = results[static_cast<std::size_t>(i)];
            std::cout << '"' << r.weights.str() << "\"," << r.metrics.global_acc << "," << r.metrics.class_acc << ","
                      << r.metrics.mean_iu << "," << r.metrics.fw_iu << "\n";
        }
        return 0;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const sclp::ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const sclp::LoadError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return 3;
    } catch (const sclp::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 4;
    } catch (const sclp::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 5;
    } catch (const sclp::ComputationError& e) {
        std::cerr << "computation error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
