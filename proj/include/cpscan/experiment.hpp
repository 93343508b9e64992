#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cpscan/datagen.hpp"
#include "cpscan/io.hpp"
#include "cpscan/metrics.hpp"
#include "cpscan/pipeline.hpp"

namespace cpscan {

// Reproduction harness: generate -> detect -> evaluate, repeated with
// derived per-repetition seeds.
struct ExperimentSpec {
    int repetitions = 10;
    std::uint64_t seed = 0;
    GeneratorSpec generator;    // seed field is overridden per repetition
    DetectionConfig detection;  // likewise
    PipelineOptions pipeline;
    std::int64_t margin = 0;  // 0 = use the run's T3
    bool save_curves = true;
    bool save_datasets = false;
};

struct RunResult {
    int rep = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<std::int64_t> truth;
    std::vector<std::int64_t> estimates;
    EvalReport report;
    int t1 = 0, t2 = 0, t3 = 0;
    double pi = 0.0;
};

struct ExperimentResult {
    std::vector<RunResult> runs;
    std::optional<AggregateSummary> summary;  // over completed runs with truth
    int failures = 0;
};

namespace detail {

inline EvalReport evaluate_run(const std::vector<std::int64_t>& truth,
                               const std::vector<std::int64_t>& est, std::int64_t margin) {
    if (!truth.empty()) return evaluate_change_points(truth, est, margin);
    // No true change points: only count-based metrics are meaningful.
    EvalReport r;
    r.margin = margin;
    r.n_true = 0;
    r.n_est = static_cast<std::int64_t>(est.size());
    r.count_diff = r.n_est;
    r.matched = est.empty();
    r.mean_distance = est.empty() ? 0.0 : kInf;
    r.haus_sum = r.mean_distance;
    r.haus_prod = r.mean_distance;
    const PrecisionRecall pr = precision_recall(truth, est, margin);
    r.precision = pr.precision;
    r.recall = pr.recall;
    r.f1 = pr.f1;
    return r;
}

inline std::string csv_number(double v) {
    if (std::isinf(v)) return "inf";
    return format_double(v);
}

}  // namespace detail

inline std::string experiment_summary_csv(const ExperimentResult& result) {
    std::string out =
        "run,seed,status,n_true,n_est,mean_distance,count_diff,matched,d_hau_w,d_hau_prod,"
        "precision,recall,f1\n";
    for (const auto& run : result.runs) {
        out += std::to_string(run.rep) + "," + std::to_string(run.seed) + ",";
        if (!run.ok) {
            out += "error: " + run.error + ",,,,,,,,,,\n";
            continue;
        }
        const EvalReport& r = run.report;
        out += "ok," + std::to_string(r.n_true) + "," + std::to_string(r.n_est) + "," +
               detail::csv_number(r.mean_distance) + "," + std::to_string(r.count_diff) + "," +
               (r.matched ? "1" : "0") + "," + detail::csv_number(r.haus_sum) + "," +
               detail::csv_number(r.haus_prod) + "," + detail::csv_number(r.precision) + "," +
               detail::csv_number(r.recall) + "," + detail::csv_number(r.f1) + "\n";
    }
    if (result.summary) {
        const AggregateSummary& s = *result.summary;
        out += "aggregate,," + std::string(result.failures ? "partial" : "ok") + ",," + "," +
               detail::csv_number(s.mean_distance) + "," + detail::csv_number(s.mean_count_diff) +
               "," + detail::csv_number(s.prop_matched) + "," +
               detail::csv_number(s.mean_haus_sum) + "," + detail::csv_number(s.mean_haus_prod) +
               "," + detail::csv_number(s.mean_precision) + "," +
               detail::csv_number(s.mean_recall) + "," + detail::csv_number(s.mean_f1) + "\n";
    }
    return out;
}

// Runs the experiment; when out_dir is nonempty, per-run artifacts and the
// summary CSV are written there (all writes from this thread).
inline ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir) {
    if (spec.repetitions < 1)
        throw std::invalid_argument("run_experiment: repetitions must be >= 1");
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    ExperimentResult result;
    std::vector<EvalReport> completed;
    for (int rep = 0; rep < spec.repetitions; ++rep) {
        RunResult run;
        run.rep = rep;
        run.seed = derive_seed(spec.seed, 0xE1, static_cast<std::uint64_t>(rep));
        std::string run_dir;
        if (!out_dir.empty()) {
            char name[16];
            std::snprintf(name, sizeof(name), "run_%03d", rep);
            run_dir = (fs::path(out_dir) / name).string();
            fs::create_directories(run_dir);
        }
        try {
            GeneratorSpec gspec = spec.generator;
            gspec.seed = derive_seed(run.seed, 0xA1);
            const GeneratedData gen = generate(gspec);

            DetectionConfig dcfg = spec.detection;
            dcfg.seed = derive_seed(run.seed, 0xA2);
            PipelineOptions opts = spec.pipeline;
            if (!gen.change_signals.empty())
                opts.known_min_signal =
                    *std::min_element(gen.change_signals.begin(), gen.change_signals.end());

            const DetectionResult det = detect_series(gen.dataset, dcfg, opts);
            run.truth = gen.tau;
            run.estimates = det.change_points;
            run.t1 = det.t1;
            run.t2 = det.t2;
            run.t3 = det.t3;
            run.pi = det.pi;
            const std::int64_t margin = spec.margin > 0 ? spec.margin : det.t3;
            run.report = detail::evaluate_run(run.truth, run.estimates, margin);
            run.ok = true;

            if (!run_dir.empty()) {
                if (spec.save_datasets)
                    write_dataset_csv((fs::path(run_dir) / "dataset.csv").string(), gen.dataset);
                write_file((fs::path(run_dir) / "manifest.json").string(),
                           dataset_manifest(gspec, gen).dump(2) + "\n");
                if (spec.save_curves)
                    write_file((fs::path(run_dir) / "curve.csv").string(), curve_csv(det.curve));
                write_file((fs::path(run_dir) / "detection.json").string(),
                           detection_json(det, "curve.csv").dump(2) + "\n");
                write_file((fs::path(run_dir) / "eval.json").string(),
                           eval_report_json(run.report).dump(2) + "\n");
            }
            completed.push_back(run.report);
        } catch (const std::exception& e) {
            run.ok = false;
            run.error = e.what();
            ++result.failures;
        }
        result.runs.push_back(std::move(run));
    }
    if (!completed.empty()) result.summary = aggregate(completed);
    if (!out_dir.empty())
        write_file((fs::path(out_dir) / "summary.csv").string(),
                   experiment_summary_csv(result));
    return result;
}

// ---------------------------------------------------------------------------
// JSON round trip for experiment specs

inline void to_json(json& j, const ExperimentSpec& s) {
    j["repetitions"] = s.repetitions;
    j["seed"] = s.seed;
    j["generator"] = s.generator;
    json d;
    d["t1"] = s.detection.t1;
    d["t2"] = s.detection.t2;
    d["t3"] = s.detection.t3;
    d["stride"] = s.detection.stride;
    d["regime"] = to_string(s.detection.regime);
    d["hidden"] = s.detection.hidden_widths;
    d["max_epochs"] = s.detection.train.max_epochs;
    d["tolerance"] = s.detection.train.tolerance;
    d["lr"] = s.detection.train.adam.lr;
    switch (s.detection.pi.mode) {
        case PiSpec::Mode::auto_mode: d["pi"] = "auto"; break;
        case PiSpec::Mode::fixed: d["pi"] = s.detection.pi.value; break;
        case PiSpec::Mode::signal:
            d["pi"] = s.detection.pi.value > 0 ? "signal:" + detail::csv_number(s.detection.pi.value)
                                               : "signal";
            break;
        case PiSpec::Mode::proof:
            d["pi"] = s.detection.pi.value > 0 ? "proof:" + detail::csv_number(s.detection.pi.value)
                                               : "proof";
            break;
    }
    j["detection"] = d;
    j["normalize"] = s.pipeline.normalize;
    j["refine_radius"] = s.pipeline.refine_radius;
    j["margin"] = s.margin;
    j["save_curves"] = s.save_curves;
    j["save_datasets"] = s.save_datasets;
}

inline PiSpec pi_spec_from_string(const std::string& text) {
    if (text == "auto") return PiSpec::automatic();
    if (text == "signal") return PiSpec::from_signal(0.0);
    if (text == "proof") return PiSpec::from_proof(0.0);
    if (text.rfind("signal:", 0) == 0) return PiSpec::from_signal(std::stod(text.substr(7)));
    if (text.rfind("proof:", 0) == 0) return PiSpec::from_proof(std::stod(text.substr(6)));
    try {
        return PiSpec::fixed_value(std::stod(text));
    } catch (...) {
        throw std::invalid_argument("bad pi value: '" + text +
                                    "' (expected auto|<number>|signal[:M1]|proof[:M1])");
    }
}

inline void from_json(const json& j, ExperimentSpec& s) {
    s = ExperimentSpec{};
    if (j.contains("repetitions")) j.at("repetitions").get_to(s.repetitions);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
    j.at("generator").get_to(s.generator);
    if (j.contains("detection")) {
        const json& d = j.at("detection");
        if (d.contains("t0")) {
            const int t0 = d.at("t0").get<int>();
            s.detection.t1 = t0;
            s.detection.t2 = t0;
            s.detection.t3 = 2 * t0;
        }
        if (d.contains("t1")) d.at("t1").get_to(s.detection.t1);
        if (d.contains("t2")) d.at("t2").get_to(s.detection.t2);
        if (d.contains("t3")) d.at("t3").get_to(s.detection.t3);
        if (d.contains("stride")) d.at("stride").get_to(s.detection.stride);
        if (d.contains("regime"))
            s.detection.regime = regime_from_string(d.at("regime").get<std::string>());
        if (d.contains("hidden")) d.at("hidden").get_to(s.detection.hidden_widths);
        if (d.contains("max_epochs")) d.at("max_epochs").get_to(s.detection.train.max_epochs);
        if (d.contains("tolerance")) d.at("tolerance").get_to(s.detection.train.tolerance);
        if (d.contains("lr")) d.at("lr").get_to(s.detection.train.adam.lr);
        if (d.contains("pi")) {
            if (d.at("pi").is_number()) {
                s.detection.pi = PiSpec::fixed_value(d.at("pi").get<double>());
            } else {
                s.detection.pi = pi_spec_from_string(d.at("pi").get<std::string>());
            }
        }
    }
    if (j.contains("normalize")) j.at("normalize").get_to(s.pipeline.normalize);
    if (j.contains("refine_radius")) j.at("refine_radius").get_to(s.pipeline.refine_radius);
    if (j.contains("workers")) j.at("workers").get_to(s.pipeline.workers);
    if (j.contains("margin")) j.at("margin").get_to(s.margin);
    if (j.contains("save_curves")) j.at("save_curves").get_to(s.save_curves);
    if (j.contains("save_datasets")) j.at("save_datasets").get_to(s.save_datasets);
}

}  // namespace cpscan
