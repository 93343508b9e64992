#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace cpscan {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// (1/N) sum_j min_k |tau_j - est_k|; +inf when est is empty.
inline double mean_cp_distance(const std::vector<std::int64_t>& truth,
                               const std::vector<std::int64_t>& est) {
    if (truth.empty()) throw std::invalid_argument("mean_cp_distance: empty truth");
    if (est.empty()) return kInf;
    double acc = 0.0;
    for (std::int64_t tau : truth) {
        std::int64_t best = std::numeric_limits<std::int64_t>::max();
        for (std::int64_t e : est) best = std::min(best, std::abs(tau - e));
        acc += static_cast<double>(best);
    }
    return acc / static_cast<double>(truth.size());
}

namespace detail {

// Index of the true point nearest to e (ties -> earlier true point).
inline std::size_t nearest_truth(const std::vector<std::int64_t>& truth, std::int64_t e) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < truth.size(); ++i)
        if (std::abs(truth[i] - e) < std::abs(truth[best] - e)) best = i;
    return best;
}

}  // namespace detail

// Sum-version Hausdorff distance: assign each estimate to its nearest true
// point, sum |tau_i - est_j| per true point (empty assignment sums to 0) and
// take the max. Empty estimate set -> +inf.
inline double hausdorff_sum(const std::vector<std::int64_t>& truth,
                            const std::vector<std::int64_t>& est) {
    if (truth.empty()) throw std::invalid_argument("hausdorff_sum: empty truth");
    if (est.empty()) return kInf;
    std::vector<double> sums(truth.size(), 0.0);
    for (std::int64_t e : est) {
        const std::size_t i = detail::nearest_truth(truth, e);
        sums[i] += static_cast<double>(std::abs(truth[i] - e));
    }
    return *std::max_element(sums.begin(), sums.end());
}

// Product version: per-true-point products of distances; true points with no
// assigned estimate are skipped. Empty estimate set -> +inf.
inline double hausdorff_prod(const std::vector<std::int64_t>& truth,
                             const std::vector<std::int64_t>& est) {
    if (truth.empty()) throw std::invalid_argument("hausdorff_prod: empty truth");
    if (est.empty()) return kInf;
    std::vector<double> prods(truth.size(), 1.0);
    std::vector<bool> touched(truth.size(), false);
    for (std::int64_t e : est) {
        const std::size_t i = detail::nearest_truth(truth, e);
        prods[i] *= static_cast<double>(std::abs(truth[i] - e));
        touched[i] = true;
    }
    double best = -kInf;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (touched[i]) best = std::max(best, prods[i]);
    return best;  // est nonempty, so at least one true point is touched
}

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Greedy one-to-one matching, nearest pairs first; an estimate is a true
// positive when it lands within `margin` of a still-unmatched true point.
inline PrecisionRecall precision_recall(const std::vector<std::int64_t>& truth,
                                        const std::vector<std::int64_t>& est,
                                        std::int64_t margin) {
    if (margin < 0) throw std::invalid_argument("precision_recall: negative margin");
    PrecisionRecall pr;
    if (est.empty()) {
        pr.precision = truth.empty() ? 1.0 : 0.0;
        pr.recall = truth.empty() ? 1.0 : 0.0;
        pr.f1 = truth.empty() ? 1.0 : 0.0;
        return pr;
    }
    if (truth.empty()) {
        pr.precision = 0.0;
        pr.recall = 1.0;  // no true points to miss
        pr.f1 = 0.0;
        return pr;
    }

    struct Pair {
        std::int64_t dist;
        std::size_t ti, ei;
    };
    std::vector<Pair> pairs;
    for (std::size_t ti = 0; ti < truth.size(); ++ti)
        for (std::size_t ei = 0; ei < est.size(); ++ei) {
            const std::int64_t d = std::abs(truth[ti] - est[ei]);
            if (d <= margin) pairs.push_back({d, ti, ei});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.dist, a.ti, a.ei) < std::tie(b.dist, b.ti, b.ei);
    });
    std::vector<bool> truth_used(truth.size(), false), est_used(est.size(), false);
    int tp = 0;
    for (const Pair& p : pairs) {
        if (truth_used[p.ti] || est_used[p.ei]) continue;
        truth_used[p.ti] = est_used[p.ei] = true;
        ++tp;
    }
    pr.precision = static_cast<double>(tp) / static_cast<double>(est.size());
    pr.recall = static_cast<double>(tp) / static_cast<double>(truth.size());
    pr.f1 = (pr.precision + pr.recall > 0.0)
                ? 2.0 * pr.precision * pr.recall / (pr.precision + pr.recall)
                : 0.0;
    return pr;
}

// The five paper metrics for one (truth, estimate) pair.
struct EvalReport {
    double mean_distance = 0.0;
    std::int64_t count_diff = 0;
    bool matched = false;  // N_hat == N
    double haus_sum = 0.0;
    double haus_prod = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t margin = 0;
    std::int64_t n_true = 0;
    std::int64_t n_est = 0;
};

inline EvalReport evaluate_change_points(const std::vector<std::int64_t>& truth,
                                         const std::vector<std::int64_t>& est,
                                         std::int64_t margin) {
    if (truth.empty()) throw std::invalid_argument("evaluate_change_points: empty truth");
    EvalReport r;
    r.margin = margin;
    r.n_true = static_cast<std::int64_t>(truth.size());
    r.n_est = static_cast<std::int64_t>(est.size());
    r.mean_distance = mean_cp_distance(truth, est);
    r.count_diff = std::abs(r.n_true - r.n_est);
    r.matched = r.count_diff == 0;
    r.haus_sum = hausdorff_sum(truth, est);
    r.haus_prod = hausdorff_prod(truth, est);
    const PrecisionRecall pr = precision_recall(truth, est, margin);
    r.precision = pr.precision;
    r.recall = pr.recall;
    r.f1 = pr.f1;
    return r;
}

// Aggregate over repetitions: means of the finite values, with infinities
// counted separately, plus the proportion of matched runs.
struct AggregateSummary {
    std::size_t runs = 0;
    double mean_distance = 0.0;
    std::size_t distance_inf = 0;
    double mean_count_diff = 0.0;
    double prop_matched = 0.0;
    double mean_haus_sum = 0.0;
    std::size_t haus_sum_inf = 0;
    double mean_haus_prod = 0.0;
    std::size_t haus_prod_inf = 0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f1 = 0.0;
};

inline AggregateSummary aggregate(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: empty report list");
    AggregateSummary s;
    s.runs = reports.size();
    auto finite_mean = [](const std::vector<EvalReport>& rs, auto getter, std::size_t& inf_count) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto& r : rs) {
            const double v = getter(r);
            if (std::isinf(v)) {
                ++inf_count;
            } else {
                acc += v;
                ++n;
            }
        }
        return n > 0 ? acc / static_cast<double>(n) : kInf;
    };
    s.mean_distance = finite_mean(
        reports, [](const EvalReport& r) { return r.mean_distance; }, s.distance_inf);
    s.mean_haus_sum = finite_mean(
        reports, [](const EvalReport& r) { return r.haus_sum; }, s.haus_sum_inf);
    s.mean_haus_prod = finite_mean(
        reports, [](const EvalReport& r) { return r.haus_prod; }, s.haus_prod_inf);
    for (const auto& r : reports) {
        s.mean_count_diff += static_cast<double>(r.count_diff);
        s.prop_matched += r.matched ? 1.0 : 0.0;
        s.mean_precision += r.precision;
        s.mean_recall += r.recall;
        s.mean_f1 += r.f1;
    }
    const double n = static_cast<double>(reports.size());
    s.mean_count_diff /= n;
    s.prop_matched /= n;
    s.mean_precision /= n;
    s.mean_recall /= n;
    s.mean_f1 /= n;
    return s;
}

}  // namespace cpscan
