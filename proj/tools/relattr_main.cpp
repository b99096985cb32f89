#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "relattr/commands.hpp"
#include "relattr/errors.hpp"
#include "relattr/fixtures.hpp"
#include "relattr/model_io.hpp"
#include "relattr/signal.hpp"

namespace {

int parse_lead(const std::string& name) { return relattr::lead_index(name); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relattr: attribution methods and relevance analysis for 12-lead ECG classifiers"};
    app.require_subcommand(1);

    std::string manifest, model, out, target_class = "af", output_mode = "linear", lead = "V1";
    std::string relevance_dir, kind = "trace-heatmap", recording_id, method_single = "IG";
    std::vector<std::string> methods;
    double threshold_af = 0.39, threshold_lbbb = 0.05;
    int ig_steps = 64, bins = 100;
    double epsilon = 1e-7, alpha = 1.0, beta = 0.0;

    auto add_common = [&](CLI::App* cmd, bool needs_model) {
        cmd->add_option("--manifest", manifest, "dataset manifest file")->required();
        if (needs_model) cmd->add_option("--model", model, "model file")->required();
        cmd->add_option("--out", out, "output directory")->required();
    };

    CLI::App* classify = app.add_subcommand("classify", "run the classifier over a dataset");
    add_common(classify, true);
    classify->add_option("--threshold-af", threshold_af, "AF decision threshold");
    classify->add_option("--threshold-lbbb", threshold_lbbb, "LBBB decision threshold");

    CLI::App* attribute = app.add_subcommand("attribute", "compute relevance scores per recording");
    add_common(attribute, true);
    attribute->add_option("--method", methods, "attribution method (repeatable)");
    attribute->add_option("--class", target_class, "target class: af|lbbb");
    attribute->add_option("--ig-steps", ig_steps, "IG interval count m");
    attribute->add_option("--epsilon", epsilon, "LRP stabilizer epsilon");
    attribute->add_option("--alpha", alpha, "LRP alpha");
    attribute->add_option("--beta", beta, "LRP beta");
    attribute->add_option("--output-mode", output_mode, "linear|sigmoid")
        ->check(CLI::IsMember({"linear", "sigmoid"}));

    CLI::App* analyze = app.add_subcommand("analyze", "aggregate relevance scores into the analysis report");
    add_common(analyze, true);
    analyze->add_option("--relevance-dir", relevance_dir, "directory with relevance files")->required();
    analyze->add_option("--method", method_single, "attribution method the files were computed with");
    analyze->add_option("--class", target_class, "target class: af|lbbb");
    analyze->add_option("--threshold-af", threshold_af, "AF decision threshold");
    analyze->add_option("--threshold-lbbb", threshold_lbbb, "LBBB decision threshold");
    analyze->add_option("--bins", bins, "histogram bin count");
    analyze->add_option("--lead", lead, "lead for the beat-average section");

    CLI::App* render = app.add_subcommand("render", "render one figure kind as SVG");
    add_common(render, false);
    render->add_option("--model", model, "model file (recording-boxplots)");
    render->add_option("--relevance-dir", relevance_dir, "directory with relevance files")->required();
    render->add_option("--kind", kind, "figure kind")
        ->check(CLI::IsMember(
            {"trace-heatmap", "class-histogram", "recording-boxplots", "lead-boxplots", "beat-average"}));
    render->add_option("--method", method_single, "attribution method the files were computed with");
    render->add_option("--class", target_class, "target class: af|lbbb");
    render->add_option("--recording-id", recording_id, "recording for trace-heatmap");
    render->add_option("--bins", bins, "histogram bin count");
    render->add_option("--lead", lead, "lead for beat-average");

    std::string gen_kind = "resnet-mini";
    std::uint64_t seed = relattr::kResnetMiniSeed;
    int per_class = 200;
    CLI::App* gen_model = app.add_subcommand("gen-model", "write a deterministic fixture model");
    gen_model->add_option("--kind", gen_kind, "resnet-mini|tiny-linear|pwave-scorer")
        ->check(CLI::IsMember({"resnet-mini", "tiny-linear", "pwave-scorer"}));
    gen_model->add_option("--seed", seed, "generator seed");
    gen_model->add_option("--out", out, "output model file")->required();

    CLI::App* gen_dataset = app.add_subcommand("gen-dataset", "write a synthetic dataset with a manifest");
    gen_dataset->add_option("--per-class", per_class, "recordings per class")->required();
    gen_dataset->add_option("--seed", seed, "generator seed");
    gen_dataset->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : relattr::kExitUsage;
    }

    try {
        if (classify->parsed()) {
            relattr::ClassifyOptions o;
            o.manifest = manifest;
            o.model = model;
            o.out = out;
            o.thresholds = {threshold_af, threshold_lbbb};
            return relattr::cmd_classify(o);
        }
        if (attribute->parsed()) {
            relattr::AttributeOptions o;
            o.manifest = manifest;
            o.model = model;
            o.out = out;
            if (!methods.empty()) o.methods = methods;
            o.target_class = target_class;
            o.attribution.ig_steps = ig_steps;
            o.attribution.epsilon = epsilon;
            o.attribution.alpha = alpha;
            o.attribution.beta = beta;
            o.attribution.output_mode =
                output_mode == "sigmoid" ? relattr::OutputMode::Sigmoid : relattr::OutputMode::Linear;
            return relattr::cmd_attribute(o);
        }
        if (analyze->parsed()) {
            relattr::AnalyzeOptions o;
            o.manifest = manifest;
            o.model = model;
            o.relevance_dir = relevance_dir;
            o.out = out;
            o.method = method_single;
            o.target_class = target_class;
            o.thresholds = {threshold_af, threshold_lbbb};
            o.bins = bins;
            o.lead = parse_lead(lead);
            return relattr::cmd_analyze(o);
        }
        if (render->parsed()) {
            relattr::RenderOptions o;
            o.manifest = manifest;
            o.model = model;
            o.relevance_dir = relevance_dir;
            o.out = out;
            o.kind = kind;
            o.method = method_single;
            o.target_class = target_class;
            o.recording_id = recording_id;
            o.bins = bins;
            o.lead = parse_lead(lead);
            return relattr::cmd_render(o);
        }
        if (gen_model->parsed()) {
            relattr::Model m;
            if (gen_kind == "resnet-mini") {
                m = relattr::make_resnet_mini(seed);
            } else if (gen_kind == "tiny-linear") {
                m = relattr::make_tiny_linear();
            } else {
                m = relattr::make_pwave_scorer();
            }
            relattr::save_model(m, out);
            std::cout << out << "\n";
            return relattr::kExitOk;
        }
        if (gen_dataset->parsed()) {
            const auto manifest_path = relattr::write_synth_dataset(out, per_class, seed);
            std::cout << manifest_path.string() << "\n";
            return relattr::kExitOk;
        }
    } catch (const relattr::ParseError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return relattr::kExitLoad;
    } catch (const relattr::IoError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return relattr::kExitLoad;
    } catch (const relattr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return relattr::kExitCompute;
    }
    return relattr::kExitUsage;
}
