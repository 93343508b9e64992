#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpscan/config.hpp"
#include "cpscan/dataset.hpp"
#include "cpscan/detector.hpp"
#include "cpscan/io.hpp"
#include "cpscan/window_scan.hpp"

namespace cpscan {

// Whole-series standardization applied before training: X columns are
// centered and scaled individually, Y columns are centered and then scaled
// by one common factor so the criterion keeps a single unit across outputs.
// Thresholds stated in raw units divide by y_scale^2.
struct Normalization {
    bool enabled = false;
    Eigen::RowVectorXd x_mean, x_scale;
    Eigen::RowVectorXd y_mean;
    double y_scale = 1.0;
};

inline Normalization fit_normalization(const SeriesDataset& data) {
    Normalization n;
    n.enabled = true;
    n.x_mean = data.x.colwise().mean();
    const Eigen::MatrixXd xc = data.x.rowwise() - n.x_mean;
    n.x_scale = xc.array().square().colwise().mean().sqrt();
    for (Eigen::Index c = 0; c < n.x_scale.size(); ++c)
        if (n.x_scale(c) < 1e-12) n.x_scale(c) = 1.0;
    n.y_mean = data.y.colwise().mean();
    const Eigen::MatrixXd yc = data.y.rowwise() - n.y_mean;
    const double mean_sq =
        yc.squaredNorm() / static_cast<double>(yc.rows() * yc.cols());
    n.y_scale = mean_sq > 1e-24 ? std::sqrt(mean_sq) : 1.0;
    return n;
}

inline SeriesDataset apply_normalization(const SeriesDataset& data, const Normalization& n) {
    SeriesDataset out;
    out.x = (data.x.rowwise() - n.x_mean).array().rowwise() / n.x_scale.array();
    out.y = (data.y.rowwise() - n.y_mean) / n.y_scale;
    out.true_change_points = data.true_change_points;
    out.noise_sigma = data.noise_sigma;
    if (out.noise_sigma) *out.noise_sigma /= n.y_scale;
    return out;
}

struct PipelineOptions {
    bool normalize = true;
    // Stride-1 recomputation around each detection followed by argmax
    // relocalization; -1 = use T3, 0 = off.
    int refine_radius = -1;
    int workers = 1;
    std::optional<double> known_min_signal;  // M1* in raw units, for signal/proof thresholds
    double c0 = 1.0;                         // spacing-assumption constant
};

struct DetectionResult {
    ErrorCurve curve;  // scan plus any refinement points
    ChangePointSet detections;                // literal Algorithm 2 output
    std::vector<std::int64_t> change_points;  // after relocalization
    int t1 = 0, t2 = 0, t3 = 0, stride = 1;
    double pi = 0.0;
    bool pi_degenerate = false;
    Normalization norm;
    AssumptionReport diagnostics;
    std::string config_digest;
    std::uint64_t seed = 0;
};

inline DetectionResult detect_series(const SeriesDataset& raw, DetectionConfig cfg,
                                     const PipelineOptions& opts = {}) {
    raw.validate();
    if (cfg.t1 <= 0 || cfg.t2 <= 0 || cfg.t3 <= 0) {
        const SuggestedWindows sw = suggest_windows(raw.rows(), cfg.regime);
        if (cfg.t1 <= 0) cfg.t1 = sw.t1;
        if (cfg.t2 <= 0) cfg.t2 = sw.t2;
        if (cfg.t3 <= 0) cfg.t3 = sw.t3;
    }

    DetectionResult res;
    res.t1 = cfg.t1;
    res.t2 = cfg.t2;
    res.t3 = cfg.t3;
    res.stride = cfg.stride;
    res.seed = cfg.seed;
    res.diagnostics = validate_assumptions(raw, cfg.t1, cfg.t2, opts.c0);

    SeriesDataset data;
    if (opts.normalize) {
        res.norm = fit_normalization(raw);
        data = apply_normalization(raw, res.norm);
    } else {
        data = raw;
    }

    res.curve = compute_error_curve(data, cfg, opts.workers);
    res.config_digest = res.curve.provenance;

    const double unit = res.norm.enabled ? res.norm.y_scale * res.norm.y_scale : 1.0;
    switch (cfg.pi.mode) {
        case PiSpec::Mode::auto_mode: {
            const ThresholdSuggestion s = suggest_threshold_auto(res.curve, cfg.t3);
            res.pi = s.pi;
            res.pi_degenerate = s.degenerate;
            break;
        }
        case PiSpec::Mode::fixed:
            res.pi = cfg.pi.value;
            break;
        case PiSpec::Mode::signal:
        case PiSpec::Mode::proof: {
            double m1 = cfg.pi.value;
            if (m1 <= 0.0) {
                if (!opts.known_min_signal)
                    throw std::invalid_argument(
                        "signal threshold requested but no minimum signal available");
                m1 = *opts.known_min_signal;
            }
            m1 /= unit;
            if (cfg.pi.mode == PiSpec::Mode::signal) {
                res.pi = suggest_threshold_signal(m1, cfg.t2);
            } else {
                const double sigma = data.noise_sigma.value_or(0.0);
                res.pi = std::max(
                    0.0, suggest_threshold_proof(m1, data.output_dim(), sigma, cfg.t2));
            }
            break;
        }
    }

    res.detections = res.pi_degenerate ? ChangePointSet{{}, cfg.t3, res.pi}
                                       : detect(res.curve, cfg.t3, res.pi);
    res.change_points = res.detections.points;

    const int radius = opts.refine_radius < 0 ? cfg.t3 : opts.refine_radius;
    if (radius > 0 && !res.detections.points.empty()) {
        res.curve =
            refine_curve(data, cfg, res.curve, res.detections.points, radius, opts.workers);
        std::vector<std::int64_t> relocated;
        for (std::int64_t tau : res.detections.points) {
            const auto& ts = res.curve.t_values;
            const auto lo =
                std::lower_bound(ts.begin(), ts.end(), tau - radius) - ts.begin();
            const auto hi = std::upper_bound(ts.begin(), ts.end(), tau + radius) - ts.begin();
            std::size_t best = static_cast<std::size_t>(lo);
            for (std::size_t j = lo; j < static_cast<std::size_t>(hi); ++j)
                if (res.curve.e_values[j] > res.curve.e_values[best]) best = j;
            relocated.push_back(res.curve.t_values[best]);
        }
        std::sort(relocated.begin(), relocated.end());
        relocated.erase(std::unique(relocated.begin(), relocated.end()), relocated.end());
        res.change_points = std::move(relocated);
    }
    return res;
}

// The detection report; excludes timings so reruns are byte-identical.
inline json detection_json(const DetectionResult& res, const std::string& curve_ref) {
    json j;
    j["change_points"] = res.change_points;
    j["raw_change_points"] = res.detections.points;
    if (std::isinf(res.pi)) {
        j["pi"] = "inf";
    } else {
        j["pi"] = res.pi;
    }
    j["pi_degenerate"] = res.pi_degenerate;
    j["t1"] = res.t1;
    j["t2"] = res.t2;
    j["t3"] = res.t3;
    j["stride"] = res.stride;
    j["seed"] = res.seed;
    j["config_digest"] = res.config_digest;
    j["curve_ref"] = curve_ref;
    json norm;
    norm["enabled"] = res.norm.enabled;
    if (res.norm.enabled) norm["y_scale"] = res.norm.y_scale;
    j["normalization"] = norm;
    j["diagnostics"] = json{{"assumption_checks", assumption_report_json(res.diagnostics)}};
    return j;
}

}  // namespace cpscan
