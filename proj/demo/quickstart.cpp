// Library walkthrough: synthesize a small dataset, train, evaluate with and
// without context, and write an overlay for the first test image.
//
//   sclp_demo [output-dir]

#include <iostream>

#include "sclp/sclp.hpp"

using namespace sclp;

int main(int argc, char** argv) {
    const std::string out = argc > 1 ? argv[1] : "sclp_demo_out";
    try {
        SyntheticSceneSpec spec;
        spec.seed = 2;
        const std::string manifest = generate_synthetic(spec, out + "/data");
        const Dataset ds = Dataset::load(manifest);

        PipelineConfig cfg;
        cfg.manifest = manifest;
        cfg.set("k_scale", "20");
        cfg.set("min_size", "15");
        cfg.set("feature_noise", "1.5");
        cfg.set("rare_classes", "0");
        cfg.set("codebook_size", "64");
        ArtifactCache cache(out + "/cache");

        TrainSummary summary;
        const Model model = train_model(ds, cfg, cache, &std::cout, &summary);
        model.save(out + "/model.smdl");

        for (auto ab : {Ablation::None, Ablation::VisualOnly}) {
            const EvalReport r = evaluate(model, ds, Split::Test, cfg, ab, cache);
            std::cout << metrics_table(r.metrics, "test split, ablation " + to_string(ab));
        }

        const Parser parser(model, ParseOptions::from(cfg));
        const auto& query = ds.sample(ds.indices(Split::Test).front());
        const LabelMap labels = parser.fields(query.image, cache).labels(cfg.weights);
        io::save_label_map(out + "/query_labels.png", labels);
        io::save_image(out + "/query_overlay.png", overlay(query.image, labels));
        std::cout << "wrote " << out << "/query_overlay.png\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
