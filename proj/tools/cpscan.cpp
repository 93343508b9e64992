// Command-line front end: dataset generation, detection, scoring and the
// experiment harness.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cpscan/datagen.hpp"
#include "cpscan/experiment.hpp"
#include "cpscan/io.hpp"
#include "cpscan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cpscan;

namespace {

int default_workers() {
    if (const char* env = std::getenv("CPSCAN_WORKERS")) {
        try {
            return std::max(1, std::stoi(env));
        } catch (...) {
        }
    }
    return 1;
}

json load_json(const std::string& path) { return json::parse(read_file(path)); }

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

struct GenerateArgs {
    std::string spec_path;
    std::string out_dir = ".";
    std::string name = "dataset";
};

int cmd_generate(const GenerateArgs& args) {
    const auto start = std::chrono::steady_clock::now();
    const GeneratorSpec spec = load_json(args.spec_path).get<GeneratorSpec>();
    const GeneratedData data = generate(spec);
    fs::create_directories(args.out_dir);

    const std::string csv_path = (fs::path(args.out_dir) / (args.name + ".csv")).string();
    write_dataset_csv(csv_path, data.dataset);
    json manifest = dataset_manifest(spec, data);
    manifest["files"]["dataset"] = json{{"path", args.name + ".csv"}, {"fnv64", file_hash(csv_path)}};
    if (data.raw) {
        const std::string raw_path = (fs::path(args.out_dir) / (args.name + ".raw.csv")).string();
        write_file(raw_path, raw_series_csv(*data.raw));
        manifest["files"]["raw"] =
            json{{"path", args.name + ".raw.csv"}, {"fnv64", file_hash(raw_path)}};
    }
    manifest["timings_ms"] = json{{"generate", elapsed_ms(start)}};
    write_file((fs::path(args.out_dir) / (args.name + ".manifest.json")).string(),
               manifest.dump(2) + "\n");
    std::cout << "wrote " << csv_path << " (" << data.dataset.rows() << " rows, "
              << data.tau.size() << " change points)\n";
    return 0;
}

struct DetectArgs {
    std::string data_path;
    std::string manifest_path;
    std::string out_dir = ".";
    std::string name = "detection";
    int lags = 0;
    int t0 = 0, t1 = 0, t2 = 0, t3 = 0;
    std::string pi = "auto";
    int stride = 1;
    std::string regime = "independent";
    std::vector<int> hidden{256, 256};
    int max_epochs = 1500;
    double tolerance = 1e-5;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    int workers = default_workers();
    bool no_normalize = false;
    int refine_radius = -1;
    bool no_refine = false;
};

int cmd_detect(const DetectArgs& args) {
    const auto start = std::chrono::steady_clock::now();
    SeriesDataset data = read_dataset_csv(args.data_path);
    if (args.lags > 0) {
        if (data.input_dim() != 0)
            throw std::runtime_error("--lags expects a y-only series CSV");
        data = flatten_lagged(data.y, args.lags, {}, std::nullopt);
        data.true_change_points.reset();
    } else if (data.input_dim() == 0) {
        throw std::runtime_error("dataset has no x columns; pass --lags to build VAR inputs");
    }

    // Sidecar manifest (explicit or <data>.manifest.json) supplies ground
    // truth, sigma and measured signals for diagnostics and thresholds.
    std::optional<double> min_signal;
    std::string manifest_path = args.manifest_path;
    if (manifest_path.empty()) {
        std::string candidate = args.data_path;
        const std::string suffix = ".csv";
        if (candidate.size() > suffix.size() &&
            candidate.compare(candidate.size() - suffix.size(), suffix.size(), suffix) == 0)
            candidate = candidate.substr(0, candidate.size() - suffix.size());
        candidate += ".manifest.json";
        if (fs::exists(candidate)) manifest_path = candidate;
    }
    if (!manifest_path.empty()) {
        const json m = load_json(manifest_path);
        if (m.contains("tau")) {
            auto tau = m.at("tau").get<std::vector<std::int64_t>>();
            if (args.lags > 0)
                for (auto& t : tau) t -= args.lags;
            data.true_change_points = std::move(tau);
        }
        if (m.contains("sigma")) data.noise_sigma = m.at("sigma").get<double>();
        if (m.contains("change_signals")) {
            const auto signals = m.at("change_signals").get<std::vector<double>>();
            if (!signals.empty())
                min_signal = *std::min_element(signals.begin(), signals.end());
        }
    }

    DetectionConfig cfg;
    cfg.t1 = args.t0 > 0 ? args.t0 : args.t1;
    cfg.t2 = args.t0 > 0 ? args.t0 : args.t2;
    cfg.t3 = args.t0 > 0 ? 2 * args.t0 : args.t3;
    cfg.pi = pi_spec_from_string(args.pi);
    cfg.stride = args.stride;
    cfg.regime = regime_from_string(args.regime);
    cfg.hidden_widths = args.hidden;
    cfg.train.max_epochs = args.max_epochs;
    cfg.train.tolerance = args.tolerance;
    cfg.train.adam.lr = args.lr;
    cfg.seed = args.seed;

    PipelineOptions opts;
    opts.normalize = !args.no_normalize;
    opts.refine_radius = args.no_refine ? 0 : args.refine_radius;
    opts.workers = args.workers;
    opts.known_min_signal = min_signal;

    const DetectionResult res = detect_series(data, cfg, opts);

    fs::create_directories(args.out_dir);
    const std::string curve_name = args.name + ".curve.csv";
    const std::string curve_path = (fs::path(args.out_dir) / curve_name).string();
    write_file(curve_path, curve_csv(res.curve));
    const std::string det_path =
        (fs::path(args.out_dir) / (args.name + ".json")).string();
    write_file(det_path, detection_json(res, curve_name).dump(2) + "\n");

    json manifest;
    manifest["command"] = "detect";
    manifest["data"] = args.data_path;
    manifest["seed"] = args.seed;
    manifest["workers"] = args.workers;
    manifest["config_digest"] = res.config_digest;
    manifest["outputs"]["curve"] = json{{"path", curve_name}, {"fnv64", file_hash(curve_path)}};
    manifest["outputs"]["detection"] =
        json{{"path", args.name + ".json"}, {"fnv64", file_hash(det_path)}};
    manifest["timings_ms"] = json{{"total", elapsed_ms(start)}};
    write_file((fs::path(args.out_dir) / (args.name + ".run.json")).string(),
               manifest.dump(2) + "\n");

    std::cout << "detected " << res.change_points.size() << " change points:";
    for (auto t : res.change_points) std::cout << " " << t;
    std::cout << "\n";
    return 0;
}

struct EvaluateArgs {
    std::string manifest_path;
    std::string estimates_path;
    std::int64_t margin = 0;
    std::string out_path;
};

int cmd_evaluate(const EvaluateArgs& args) {
    const json manifest = load_json(args.manifest_path);
    if (!manifest.contains("tau"))
        throw std::runtime_error("truth manifest has no tau field: " + args.manifest_path);
    const auto truth = manifest.at("tau").get<std::vector<std::int64_t>>();
    if (truth.empty()) throw std::runtime_error("truth manifest has no change points");
    const auto est = read_estimates(args.estimates_path);

    std::int64_t margin = args.margin;
    if (margin <= 0) {
        // Default to the T3 of the run that produced the estimates.
        const std::string content = read_file(args.estimates_path);
        std::size_t first = content.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && content[first] == '{') {
            const json det = json::parse(content);
            if (det.contains("t3")) margin = det.at("t3").get<std::int64_t>();
        }
        if (margin <= 0)
            throw std::runtime_error("no --margin given and estimates carry no T3");
    }

    const EvalReport report = evaluate_change_points(truth, est, margin);
    const std::string text = eval_report_json(report).dump(2) + "\n";
    if (args.out_path.empty()) {
        std::cout << text;
    } else {
        write_file(args.out_path, text);
        std::cout << "wrote " << args.out_path << "\n";
    }
    return 0;
}

struct ExperimentArgs {
    std::string spec_path;
    std::string out_dir = "experiment";
    int workers = default_workers();
};

int cmd_experiment(const ExperimentArgs& args) {
    ExperimentSpec spec = load_json(args.spec_path).get<ExperimentSpec>();
    if (args.workers > 0) spec.pipeline.workers = args.workers;
    const ExperimentResult result = run_experiment(spec, args.out_dir);
    std::cout << "completed " << (result.runs.size() - result.failures) << "/"
              << result.runs.size() << " runs";
    if (result.summary) {
        std::cout << "; prop(N_hat=N)=" << result.summary->prop_matched
                  << " mean_distance=" << result.summary->mean_distance;
    }
    std::cout << "\nwrote " << (fs::path(args.out_dir) / "summary.csv").string() << "\n";
    return result.failures == static_cast<int>(result.runs.size()) ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline change point detection for multivariate time-evolving data"};
    app.require_subcommand(1);

    GenerateArgs gen_args;
    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset with ground truth");
    gen->add_option("--spec", gen_args.spec_path, "Generator spec JSON")->required();
    gen->add_option("--out", gen_args.out_dir, "Output directory");
    gen->add_option("--name", gen_args.name, "Base name for output files");

    DetectArgs det_args;
    auto* det = app.add_subcommand("detect", "Compute the error curve and detect change points");
    det->add_option("data", det_args.data_path, "Dataset CSV")->required();
    det->add_option("--manifest", det_args.manifest_path, "Sidecar manifest JSON");
    det->add_option("--out", det_args.out_dir, "Output directory");
    det->add_option("--name", det_args.name, "Base name for output files");
    det->add_option("--lags", det_args.lags, "Build X from q lags of the y columns");
    det->add_option("--t0", det_args.t0, "Sets T1=T2=T0 and T3=2*T0");
    det->add_option("--t1", det_args.t1, "Training window size");
    det->add_option("--t2", det_args.t2, "Test window size");
    det->add_option("--t3", det_args.t3, "Detection window size");
    det->add_option("--pi", det_args.pi, "Threshold: auto|<value>|signal:<M1*>|proof:<M1*>");
    det->add_option("--stride", det_args.stride, "Evaluation stride");
    det->add_option("--regime", det_args.regime, "independent|subgaussian|dependent");
    det->add_option("--hidden", det_args.hidden, "Hidden layer widths")->delimiter(',');
    det->add_option("--epochs", det_args.max_epochs, "Max training epochs per window");
    det->add_option("--tolerance", det_args.tolerance, "Convergence tolerance");
    det->add_option("--lr", det_args.lr, "ADAM learning rate");
    det->add_option("--seed", det_args.seed, "Global seed");
    det->add_option("--workers", det_args.workers, "Worker threads (or CPSCAN_WORKERS)");
    det->add_flag("--no-normalize", det_args.no_normalize, "Skip dataset standardization");
    det->add_option("--refine", det_args.refine_radius,
                    "Refinement radius around detections (-1 = T3)");
    det->add_flag("--no-refine", det_args.no_refine, "Report raw Algorithm-2 locations");

    EvaluateArgs eval_args;
    auto* eval = app.add_subcommand("evaluate", "Score estimates against a truth manifest");
    eval->add_option("--manifest", eval_args.manifest_path, "Truth manifest JSON")->required();
    eval->add_option("--estimates", eval_args.estimates_path,
                     "Detection JSON or text file, one integer per line")
        ->required();
    eval->add_option("--margin", eval_args.margin, "Match margin (defaults to the run's T3)");
    eval->add_option("--out", eval_args.out_path, "Write the eval JSON here");

    ExperimentArgs exp_args;
    auto* exp = app.add_subcommand("experiment", "Run generate->detect->evaluate repetitions");
    exp->add_option("--spec", exp_args.spec_path, "Experiment spec JSON")->required();
    exp->add_option("--out", exp_args.out_dir, "Output directory");
    exp->add_option("--workers", exp_args.workers, "Worker threads (or CPSCAN_WORKERS)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(gen_args);
        if (det->parsed()) return cmd_detect(det_args);
        if (eval->parsed()) return cmd_evaluate(eval_args);
        if (exp->parsed()) return cmd_experiment(exp_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
