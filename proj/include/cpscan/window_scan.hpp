#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpscan/config.hpp"
#include "cpscan/dataset.hpp"
#include "cpscan/mlp.hpp"
#include "cpscan/parallel.hpp"
#include "cpscan/rng.hpp"

namespace cpscan {

// The criterion curve t -> E(t): summed squared test error over [t, t+T2) of
// a model trained on [t-T1, t).
struct ErrorCurve {
    std::vector<std::int64_t> t_values;
    std::vector<double> e_values;
    int t1 = 0;
    int t2 = 0;
    int stride = 1;
    std::string provenance;

    std::size_t size() const { return t_values.size(); }
    bool empty() const { return t_values.empty(); }
};

// Sum (not mean) over the test rows of squared prediction error.
inline double test_error(const MlpModel& model, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Y) {
    if (X.rows() == 0) throw std::invalid_argument("test_error: empty window");
    if (X.rows() != Y.rows()) throw std::invalid_argument("test_error: X/Y row mismatch");
    return (Y - forward_batch(model, X)).squaredNorm();
}

namespace detail {

constexpr std::uint64_t kWindowSeedStream = 0x57494eULL;

inline std::string config_digest(const DetectionConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto fold = [&h](std::uint64_t v) { h = mix64(h ^ mix64(v)); };
    fold(static_cast<std::uint64_t>(cfg.t1));
    fold(static_cast<std::uint64_t>(cfg.t2));
    fold(static_cast<std::uint64_t>(cfg.stride));
    for (int w : cfg.hidden_widths) fold(static_cast<std::uint64_t>(w));
    fold(static_cast<std::uint64_t>(cfg.train.max_epochs));
    fold(static_cast<std::uint64_t>(cfg.train.patience));
    fold(static_cast<std::uint64_t>(cfg.train.tolerance * 1e12));
    fold(static_cast<std::uint64_t>(cfg.train.adam.lr * 1e12));
    fold(cfg.seed);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Trains at a single evaluation time and returns E(t). The per-t seed makes
// the result independent of evaluation order.
inline double evaluate_point(const SeriesDataset& data, const DetectionConfig& cfg,
                             const MlpSpec& spec, std::int64_t t) {
    TrainConfig train = cfg.train;
    train.seed = derive_seed(cfg.seed, kWindowSeedStream, static_cast<std::uint64_t>(t));
    const Eigen::MatrixXd x_train = data.x.middleRows(t - cfg.t1, cfg.t1);
    const Eigen::MatrixXd y_train = data.y.middleRows(t - cfg.t1, cfg.t1);
    MlpModel model;
    try {
        model = train_window(x_train, y_train, spec, train);
    } catch (const TrainingDivergence& e) {
        throw std::runtime_error("training diverged at t=" + std::to_string(t) + " (epoch " +
                                 std::to_string(e.epoch) + ")");
    }
    return test_error(model, data.x.middleRows(t, cfg.t2), data.y.middleRows(t, cfg.t2));
}

}  // namespace detail

inline ErrorCurve compute_error_curve(const SeriesDataset& data, const DetectionConfig& cfg,
                                      int workers = 1) {
    if (cfg.t1 < 1 || cfg.t2 < 1 || cfg.stride < 1)
        throw std::invalid_argument("compute_error_curve: T1, T2 and stride must be >= 1");
    const std::int64_t total = data.rows();
    if (total < cfg.t1 + cfg.t2)
        throw std::invalid_argument("compute_error_curve: series too short, need at least T1+T2=" +
                                    std::to_string(cfg.t1 + cfg.t2) + " rows, got " +
                                    std::to_string(total));

    ErrorCurve curve;
    curve.t1 = cfg.t1;
    curve.t2 = cfg.t2;
    curve.stride = cfg.stride;
    curve.provenance = detail::config_digest(cfg);
    for (std::int64_t t = cfg.t1; t + cfg.t2 <= total; t += cfg.stride)
        curve.t_values.push_back(t);
    curve.e_values.assign(curve.t_values.size(), 0.0);

    const MlpSpec spec = make_mlp_spec(data.input_dim(), cfg.hidden_widths, data.output_dim());

    if (cfg.warm_start) {
        // Sequential by construction: each window starts from the previous fit.
        MlpModel model = mlp_init(spec, derive_seed(cfg.seed, detail::kWindowSeedStream,
                                                    static_cast<std::uint64_t>(curve.t_values.front())));
        for (std::size_t i = 0; i < curve.t_values.size(); ++i) {
            const std::int64_t t = curve.t_values[i];
            TrainConfig train = cfg.train;
            train.seed = derive_seed(cfg.seed, detail::kWindowSeedStream, static_cast<std::uint64_t>(t));
            try {
                model = detail::train_from(std::move(model), data.x.middleRows(t - cfg.t1, cfg.t1),
                                           data.y.middleRows(t - cfg.t1, cfg.t1), train);
            } catch (const TrainingDivergence& e) {
                throw std::runtime_error("training diverged at t=" + std::to_string(t) +
                                         " (epoch " + std::to_string(e.epoch) + ")");
            }
            curve.e_values[i] =
                test_error(model, data.x.middleRows(t, cfg.t2), data.y.middleRows(t, cfg.t2));
        }
        return curve;
    }

    parallel_for(curve.t_values.size(), workers, [&](std::size_t i) {
        curve.e_values[i] = detail::evaluate_point(data, cfg, spec, curve.t_values[i]);
    });
    return curve;
}

// Union of the coarse curve with stride-1 points within +-radius of each
// center, deduplicated and sorted. Fresh points use the same per-t seeds as
// compute_error_curve, so overlapping points agree bit for bit.
inline ErrorCurve refine_curve(const SeriesDataset& data, const DetectionConfig& cfg,
                               const ErrorCurve& coarse, const std::vector<std::int64_t>& centers,
                               int radius, int workers = 1) {
    if (coarse.empty()) throw std::invalid_argument("refine_curve: empty coarse curve");
    for (std::int64_t c : centers)
        if (c < coarse.t_values.front() || c > coarse.t_values.back())
            throw std::invalid_argument("refine_curve: center " + std::to_string(c) +
                                        " outside coarse domain");
    if (radius == 0 || centers.empty()) return coarse;
    if (radius < 0) throw std::invalid_argument("refine_curve: negative radius");

    const std::int64_t t_lo = cfg.t1;
    const std::int64_t t_hi = data.rows() - cfg.t2;
    std::set<std::int64_t> wanted;
    for (std::int64_t c : centers) {
        const std::int64_t lo = std::max<std::int64_t>(t_lo, c - radius);
        const std::int64_t hi = std::min<std::int64_t>(t_hi, c + radius);
        for (std::int64_t t = lo; t <= hi; ++t) wanted.insert(t);
    }
    for (std::int64_t t : coarse.t_values) wanted.erase(t);

    std::vector<std::int64_t> fresh(wanted.begin(), wanted.end());
    std::vector<double> fresh_e(fresh.size(), 0.0);
    const MlpSpec spec = make_mlp_spec(data.input_dim(), cfg.hidden_widths, data.output_dim());
    parallel_for(fresh.size(), workers, [&](std::size_t i) {
        fresh_e[i] = detail::evaluate_point(data, cfg, spec, fresh[i]);
    });

    ErrorCurve merged = coarse;
    merged.t_values.insert(merged.t_values.end(), fresh.begin(), fresh.end());
    merged.e_values.insert(merged.e_values.end(), fresh_e.begin(), fresh_e.end());
    std::vector<std::size_t> order(merged.t_values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return merged.t_values[a] < merged.t_values[b];
    });
    ErrorCurve out;
    out.t1 = merged.t1;
    out.t2 = merged.t2;
    out.stride = merged.stride;
    out.provenance = merged.provenance;
    out.t_values.reserve(order.size());
    out.e_values.reserve(order.size());
    for (std::size_t idx : order) {
        out.t_values.push_back(merged.t_values[idx]);
        out.e_values.push_back(merged.e_values[idx]);
    }
    return out;
}

}  // namespace cpscan
