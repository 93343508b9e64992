#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cpscan/metrics.hpp"
#include "cpscan/rng.hpp"
#include "oracles.hpp"

using namespace cpscan;
using i64v = std::vector<std::int64_t>;

TEST_CASE("mean distance to the nearest estimate", "[metrics]") {
    REQUIRE(mean_cp_distance({100, 200}, {105, 190}) == 7.5);
    REQUIRE(mean_cp_distance({100, 200}, {100, 200}) == 0.0);
    REQUIRE(std::isinf(mean_cp_distance({100}, {})));
    REQUIRE_THROWS_AS(mean_cp_distance({}, {5}), std::invalid_argument);
}

TEST_CASE("hausdorff sum follows the nearest-assignment reading", "[metrics]") {
    REQUIRE(hausdorff_sum({100}, {90, 110}) == 20.0);
    REQUIRE(hausdorff_sum({100, 200}, {100, 200}) == 0.0);
    REQUIRE(hausdorff_sum({50, 150}, {60}) == 10.0);  // empty sum contributes 0
    REQUIRE(std::isinf(hausdorff_sum({100}, {})));
    REQUIRE_THROWS_AS(hausdorff_sum({}, {5}), std::invalid_argument);
}

TEST_CASE("hausdorff product skips unassigned true points", "[metrics]") {
    REQUIRE(hausdorff_prod({100}, {90, 110}) == 100.0);
    REQUIRE(hausdorff_prod({100, 200}, {100, 200}) == 0.0);
    REQUIRE(hausdorff_prod({50, 150}, {60}) == 10.0);
    REQUIRE(std::isinf(hausdorff_prod({100}, {})));
}

TEST_CASE("precision and recall under greedy matching", "[metrics]") {
    const auto perfect = precision_recall({100, 200}, {100, 200}, 0);
    REQUIRE(perfect.precision == 1.0);
    REQUIRE(perfect.recall == 1.0);
    REQUIRE(perfect.f1 == 1.0);

    const auto pr = precision_recall({100}, {90, 200}, 15);
    REQUIRE(pr.precision == 0.5);
    REQUIRE(pr.recall == 1.0);
    REQUIRE(pr.f1 == Catch::Approx(2.0 / 3.0));

    const auto none = precision_recall({100}, {}, 10);
    REQUIRE(none.precision == 0.0);
    REQUIRE(none.recall == 0.0);
    REQUIRE(none.f1 == 0.0);

    REQUIRE_THROWS_AS(precision_recall({1}, {1}, -1), std::invalid_argument);
}

TEST_CASE("metrics agree with brute-force implementations", "[metrics]") {
    Rng rng(515);
    for (int trial = 0; trial < 50; ++trial) {
        const int nt = static_cast<int>(rng.uniform_int(1, 6));
        const int ne = static_cast<int>(rng.uniform_int(0, 6));
        i64v truth, est;
        for (int i = 0; i < nt; ++i) truth.push_back(rng.uniform_int(0, 300));
        for (int i = 0; i < ne; ++i) est.push_back(rng.uniform_int(0, 300));
        std::sort(truth.begin(), truth.end());
        truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
        std::sort(est.begin(), est.end());
        const std::int64_t margin = rng.uniform_int(0, 40);

        REQUIRE(mean_cp_distance(truth, est) == oracle::brute_mean_distance(truth, est));
        REQUIRE(hausdorff_sum(truth, est) == oracle::brute_haus_sum(truth, est));
        REQUIRE(hausdorff_prod(truth, est) == oracle::brute_haus_prod(truth, est));
        const auto pr = precision_recall(truth, est, margin);
        const auto [bp, br, bf] = oracle::brute_precision_recall(truth, est, margin);
        REQUIRE(pr.precision == bp);
        REQUIRE(pr.recall == br);
        REQUIRE(pr.f1 == bf);
    }
}

TEST_CASE("all metrics are translation invariant", "[metrics]") {
    Rng rng(616);
    for (int trial = 0; trial < 25; ++trial) {
        i64v truth, est;
        const int nt = static_cast<int>(rng.uniform_int(1, 5));
        const int ne = static_cast<int>(rng.uniform_int(1, 5));
        for (int i = 0; i < nt; ++i) truth.push_back(rng.uniform_int(0, 200));
        for (int i = 0; i < ne; ++i) est.push_back(rng.uniform_int(0, 200));
        std::sort(truth.begin(), truth.end());
        std::sort(est.begin(), est.end());
        const std::int64_t shift = rng.uniform_int(-500, 500);
        i64v truth2 = truth, est2 = est;
        for (auto& t : truth2) t += shift;
        for (auto& e : est2) e += shift;
        const std::int64_t margin = rng.uniform_int(0, 30);
        REQUIRE(mean_cp_distance(truth, est) == mean_cp_distance(truth2, est2));
        REQUIRE(hausdorff_sum(truth, est) == hausdorff_sum(truth2, est2));
        REQUIRE(hausdorff_prod(truth, est) == hausdorff_prod(truth2, est2));
        const auto a = precision_recall(truth, est, margin);
        const auto b = precision_recall(truth2, est2, margin);
        REQUIRE(a.precision == b.precision);
        REQUIRE(a.recall == b.recall);
    }
}

TEST_CASE("hitting an unmatched true point only helps", "[metrics]") {
    Rng rng(717);
    for (int trial = 0; trial < 25; ++trial) {
        i64v truth, est;
        const int nt = static_cast<int>(rng.uniform_int(2, 5));
        for (int i = 0; i < nt; ++i) truth.push_back(rng.uniform_int(0, 200) * 7);
        std::sort(truth.begin(), truth.end());
        truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
        const int ne = static_cast<int>(rng.uniform_int(1, 3));
        for (int i = 0; i < ne; ++i) est.push_back(rng.uniform_int(0, 1400));
        std::sort(est.begin(), est.end());
        const std::int64_t margin = 10;

        // Pick a true point with no estimate within the margin, if any.
        std::int64_t unmatched = -1;
        for (std::int64_t t : truth) {
            bool hit = false;
            for (std::int64_t e : est) hit = hit || std::llabs(t - e) <= margin;
            if (!hit) {
                unmatched = t;
                break;
            }
        }
        if (unmatched < 0) continue;
        i64v est2 = est;
        est2.push_back(unmatched);
        std::sort(est2.begin(), est2.end());
        REQUIRE(precision_recall(truth, est2, margin).recall >=
                precision_recall(truth, est, margin).recall);
        REQUIRE(mean_cp_distance(truth, est2) <= mean_cp_distance(truth, est));
    }
}

TEST_CASE("aggregate summarizes repetitions", "[metrics]") {
    EvalReport r;
    r.mean_distance = 10.0;
    r.count_diff = 0;
    r.matched = true;
    r.haus_sum = 5.0;
    r.haus_prod = 2.0;
    r.precision = 0.8;
    r.recall = 0.9;
    r.f1 = 0.85;

    // Ten identical reports aggregate to the same numbers.
    const auto same = aggregate(std::vector<EvalReport>(10, r));
    REQUIRE(same.mean_distance == 10.0);
    REQUIRE(same.prop_matched == 1.0);
    REQUIRE(same.mean_precision == Catch::Approx(0.8));

    // 9 matched of 10 -> 0.9, distances {10, 20} -> 15.
    EvalReport r2 = r;
    r2.matched = false;
    r2.mean_distance = 20.0;
    std::vector<EvalReport> mixed(9, r);
    mixed.push_back(r2);
    const auto agg = aggregate(mixed);
    REQUIRE(agg.prop_matched == Catch::Approx(0.9));
    EvalReport ra = r, rb = r;
    ra.mean_distance = 10.0;
    rb.mean_distance = 20.0;
    REQUIRE(aggregate({ra, rb}).mean_distance == 15.0);

    // Infinities count separately.
    EvalReport rinf = r;
    rinf.mean_distance = kInf;
    rinf.haus_sum = kInf;
    const auto withinf = aggregate({r, rinf});
    REQUIRE(withinf.mean_distance == 10.0);
    REQUIRE(withinf.distance_inf == 1);
    REQUIRE(withinf.haus_sum_inf == 1);

    REQUIRE_THROWS_AS(aggregate({}), std::invalid_argument);
}
