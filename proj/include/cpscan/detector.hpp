#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cpscan/config.hpp"
#include "cpscan/dataset.hpp"
#include "cpscan/window_scan.hpp"

namespace cpscan {

struct ChangePointSet {
    std::vector<std::int64_t> points;  // strictly increasing
    int t3 = 0;
    double pi = 0.0;
};

// Thresholded detection-window peak scan. Scans t ascending over curve
// points; c_t = max - min of E over the points within [t-T3, t+T3] (clamped
// to the domain). On c_t >= pi the argmax over that window is recorded
// (ties -> smallest t) and the scan jumps to the first point >= t + 3*T3.
inline ChangePointSet detect(const ErrorCurve& curve, int t3, double pi) {
    if (curve.empty()) throw std::invalid_argument("detect: empty curve");
    if (pi < 0.0) throw std::invalid_argument("detect: negative threshold");
    if (t3 < 1) throw std::invalid_argument("detect: T3 must be >= 1");

    ChangePointSet result;
    result.t3 = t3;
    result.pi = pi;

    const auto& ts = curve.t_values;
    const auto& es = curve.e_values;
    const std::size_t n = ts.size();
    std::size_t i = 0;
    while (i < n) {
        const std::int64_t t = ts[i];
        const auto lo_it = std::lower_bound(ts.begin(), ts.end(), t - t3);
        const auto hi_it = std::upper_bound(ts.begin(), ts.end(), t + t3);
        const std::size_t lo = static_cast<std::size_t>(lo_it - ts.begin());
        const std::size_t hi = static_cast<std::size_t>(hi_it - ts.begin());

        double emin = std::numeric_limits<double>::infinity();
        double emax = -std::numeric_limits<double>::infinity();
        std::size_t argmax = lo;
        for (std::size_t j = lo; j < hi; ++j) {
            emin = std::min(emin, es[j]);
            if (es[j] > emax) {
                emax = es[j];
                argmax = j;
            }
        }
        if (emax - emin >= pi) {
            result.points.push_back(ts[argmax]);
            const std::int64_t resume = t + 3 * static_cast<std::int64_t>(t3);
            i = static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), resume) -
                                         ts.begin());
        } else {
            ++i;
        }
    }
    return result;
}

// Single change point rule: argmax of E (ties -> smallest t).
inline std::int64_t detect_single(const ErrorCurve& curve) {
    if (curve.empty()) throw std::invalid_argument("detect_single: empty curve");
    std::size_t best = 0;
    for (std::size_t i = 1; i < curve.e_values.size(); ++i)
        if (curve.e_values[i] > curve.e_values[best]) best = i;
    return curve.t_values[best];
}

struct SuggestedWindows {
    int t1 = 0;
    int t2 = 0;
    int t3 = 0;
};

// T1 = T2 = T0, T3 = 2*T0.
//   independent: T0 = round(sqrt(T_sum))
//   subgaussian: T0 = max(30, round(kappa * ln T_sum)), the constant is not
//                pinned by the theory and defaults to 8
//   dependent:   sqrt(T_sum) acts as a floor, so T0 = round(sqrt(T_sum))
inline SuggestedWindows suggest_windows(std::int64_t t_sum, Regime regime, double kappa = 8.0) {
    if (t_sum < 16) throw std::invalid_argument("suggest_windows: series too short (need >= 16)");
    int t0 = 0;
    switch (regime) {
        case Regime::independent:
        case Regime::dependent:
            t0 = static_cast<int>(std::llround(std::sqrt(static_cast<double>(t_sum))));
            break;
        case Regime::subgaussian:
            t0 = std::max(30, static_cast<int>(std::llround(
                                  kappa * std::log(static_cast<double>(t_sum)))));
            break;
    }
    return {t0, t0, 2 * t0};
}

struct ThresholdSuggestion {
    double pi = 0.0;
    bool degenerate = false;  // constant curve: no detection possible
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

// Signal-scale thresholds. The curve sums over T2 test rows, so per-row
// signals get multiplied by T2.
inline double suggest_threshold_signal(double m1_star, int t2) {
    return m1_star * static_cast<double>(t2) / 3.0;
}

inline double suggest_threshold_proof(double m1_star, int h, double sigma, int t2) {
    return (m1_star / 2.0 - 2.0 * static_cast<double>(h) * sigma * sigma) *
           static_cast<double>(t2);
}

// Data-driven fallback: pi = median + 3*IQR of the local ranges of E over
// sliding windows of width 2*T3. Reliable when the curve is mostly baseline,
// i.e. change points are sparse relative to the window size.
inline ThresholdSuggestion suggest_threshold_auto(const ErrorCurve& curve, int t3) {
    if (curve.empty()) throw std::invalid_argument("suggest_threshold: empty curve");
    if (t3 < 1) throw std::invalid_argument("suggest_threshold: T3 must be >= 1");
    const auto& ts = curve.t_values;
    const auto& es = curve.e_values;
    const double global_min = *std::min_element(es.begin(), es.end());
    const double global_max = *std::max_element(es.begin(), es.end());
    if (global_max == global_min)
        return {std::numeric_limits<double>::infinity(), true};

    std::vector<double> ranges;
    ranges.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto lo_it = std::lower_bound(ts.begin(), ts.end(), ts[i] - t3);
        const auto hi_it = std::upper_bound(ts.begin(), ts.end(), ts[i] + t3);
        double emin = std::numeric_limits<double>::infinity();
        double emax = -std::numeric_limits<double>::infinity();
        for (auto it = lo_it; it != hi_it; ++it) {
            const std::size_t j = static_cast<std::size_t>(it - ts.begin());
            emin = std::min(emin, es[j]);
            emax = std::max(emax, es[j]);
        }
        ranges.push_back(emax - emin);
    }
    std::sort(ranges.begin(), ranges.end());
    const double median = detail::quantile_sorted(ranges, 0.5);
    const double iqr =
        detail::quantile_sorted(ranges, 0.75) - detail::quantile_sorted(ranges, 0.25);
    return {median + 3.0 * iqr, false};
}

inline double suggest_threshold(const ErrorCurve& curve, const PiSpec& pi, int t3, int h = 1,
                                double sigma = 0.0) {
    switch (pi.mode) {
        case PiSpec::Mode::fixed:
            if (pi.value < 0) throw std::invalid_argument("suggest_threshold: negative pi");
            return pi.value;
        case PiSpec::Mode::signal:
            return suggest_threshold_signal(pi.value, curve.t2);
        case PiSpec::Mode::proof:
            return suggest_threshold_proof(pi.value, h, sigma, curve.t2);
        case PiSpec::Mode::auto_mode:
            return suggest_threshold_auto(curve, t3).pi;
    }
    throw std::invalid_argument("suggest_threshold: bad mode");
}

// Diagnostics against the signal and spacing assumptions. Per-change signals
// are estimated from paired rows across each boundary,
//   mean_k ||Y_{tau+k} - Y_{tau-1-k}||^2 - 2 h sigma^2,
// which is exact in expectation for locally constant model functions and a
// serviceable proxy otherwise.
struct AssumptionReport {
    bool truth_available = false;
    bool sigma_available = false;
    bool partial = false;  // missing truth or sigma
    bool vacuous = false;  // no change points: nothing to check

    std::vector<double> change_signals;
    double min_signal = std::numeric_limits<double>::infinity();
    double signal_floor = 0.0;  // 4 h sigma^2
    bool signal_pass = false;

    std::int64_t min_spacing = 0;
    double spacing_floor = 0.0;  // C0 sqrt(T_sum) / M1*
    std::int64_t window_floor = 0;  // T1 + T2
    bool spacing_pass = false;

    bool pass() const { return vacuous || (signal_pass && spacing_pass); }
};

inline AssumptionReport validate_assumptions(const SeriesDataset& data, int t1, int t2,
                                             double c0 = 1.0) {
    AssumptionReport report;
    report.truth_available = data.true_change_points.has_value();
    report.sigma_available = data.noise_sigma.has_value();
    report.partial = !report.truth_available || !report.sigma_available;
    report.window_floor = static_cast<std::int64_t>(t1) + t2;
    if (!report.truth_available) return report;

    const auto& taus = *data.true_change_points;
    if (taus.empty()) {
        report.vacuous = true;
        report.signal_pass = true;
        report.spacing_pass = true;
        return report;
    }

    const std::int64_t total = data.rows();
    const int h = data.output_dim();
    const double sigma = report.sigma_available ? *data.noise_sigma : 0.0;
    report.signal_floor = 4.0 * static_cast<double>(h) * sigma * sigma;

    for (std::size_t j = 0; j < taus.size(); ++j) {
        const std::int64_t tau = taus[j];
        const std::int64_t left = (j == 0) ? tau : tau - taus[j - 1];
        const std::int64_t right = (j + 1 == taus.size()) ? total - tau : taus[j + 1] - tau;
        const std::int64_t w = std::max<std::int64_t>(1, std::min({left, right, std::int64_t{256}}));
        double acc = 0.0;
        for (std::int64_t k = 0; k < w; ++k)
            acc += (data.y.row(tau + k) - data.y.row(tau - 1 - k)).squaredNorm();
        double signal = acc / static_cast<double>(w);
        if (report.sigma_available) signal -= 2.0 * static_cast<double>(h) * sigma * sigma;
        report.change_signals.push_back(std::max(0.0, signal));
    }
    report.min_signal =
        *std::min_element(report.change_signals.begin(), report.change_signals.end());
    report.signal_pass = report.sigma_available && report.min_signal > report.signal_floor;

    std::int64_t min_spacing = taus.front();  // boundary tau_0 = 0
    for (std::size_t j = 1; j < taus.size(); ++j)
        min_spacing = std::min(min_spacing, taus[j] - taus[j - 1]);
    min_spacing = std::min(min_spacing, total - taus.back());  // boundary tau_{N+1} = T_sum
    report.min_spacing = min_spacing;
    report.spacing_floor =
        c0 * std::sqrt(static_cast<double>(total)) / std::max(report.min_signal, 1e-12);
    report.spacing_pass = static_cast<double>(min_spacing) >= report.spacing_floor &&
                          min_spacing >= report.window_floor;
    return report;
}

}  // namespace cpscan
