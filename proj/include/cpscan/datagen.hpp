#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpscan/dataset.hpp"
#include "cpscan/rng.hpp"

namespace cpscan {

enum class Family { mlp_piecewise, var, nonlinear_var, lotka_volterra };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::mlp_piecewise: return "mlp_piecewise";
        case Family::var: return "var";
        case Family::nonlinear_var: return "nonlinear_var";
        case Family::lotka_volterra: return "lotka_volterra";
    }
    return "mlp_piecewise";
}

inline Family family_from_string(const std::string& s) {
    if (s == "mlp_piecewise") return Family::mlp_piecewise;
    if (s == "var") return Family::var;
    if (s == "nonlinear_var") return Family::nonlinear_var;
    if (s == "lotka_volterra") return Family::lotka_volterra;
    throw std::invalid_argument("unknown generator family: " + s);
}

struct GapRange {
    std::int64_t min = 1;
    std::int64_t max = 1;
};

enum class PerturbDist { normal, uniform };  // subgaussian vs non-subgaussian nonzeros
enum class InputMode { iid, var1 };
enum class BaseScale { unit, he };

struct MlpPieceParams {
    std::vector<int> hidden{100, 100};
    double sparsity = 0.1;
    PerturbDist perturb = PerturbDist::normal;
    BaseScale base_scale = BaseScale::unit;  // he-scaled base pairs with signal_target
    std::optional<double> signal_target;     // fix E||f_{j+1}(X)-f_j(X)||^2 to this
    InputMode input = InputMode::iid;
    double input_ar_coeff = 0.9;  // VAR(1) coefficient for dependent inputs
    int mc_samples = 3000;        // Monte-Carlo size for signal measurement
};

struct VarParams {
    int lags = 4;
    double density = 0.2;
    double spectral_target = 0.9;
    int burn_in = -1;  // -1 -> lags
    bool restart_segments = false;
};

struct NlVarParams {
    int lags = 6;        // q
    int factor_dim = 10;
    int frequency = 3;   // r, skips direct coupling of consecutive factors
    double spectral_target = 0.9;
    double coupling_density = 0.3;
    double factor_sigma = 1.0;
    double lambda_scale = 1.0;   // 0 collapses the model to a plain VAR(1) in x
    double x_init_scale = 0.0;   // scale of the x_{-1} draw
    int flatten_lags = 1;
    int max_redraws = 100;
};

struct LvParams {
    int species = 2;  // prey count == predator count
    double alpha = 1.0;
    double beta = 0.5;
    double delta = 0.5;
    double gamma = 0.5;
    double dt = 1e-2;
    double parent_prob = 0.5;
    double clamp = 1e-6;
    int flatten_lags = 1;
    std::optional<double> init_prey;  // fixed initial value for every prey species
    std::optional<double> init_pred;
    bool redraw_rates = false;
};

struct GeneratorSpec {
    Family family = Family::mlp_piecewise;
    int p = 400;  // input dim (mlp family); derived for the series families
    int h = 200;  // output dim (mlp family) / series dim (var)
    int n_changes = 0;
    GapRange gap{1, 1};
    double sigma = 0.0;
    std::uint64_t seed = 0;
    MlpPieceParams mlp;
    VarParams var;
    NlVarParams nlvar;
    LvParams lv;
};

namespace genstream {
constexpr std::uint64_t placement = 0x01;
constexpr std::uint64_t base = 0x02;
constexpr std::uint64_t perturb = 0x03;
constexpr std::uint64_t calibrate = 0x04;
constexpr std::uint64_t measure = 0x05;
constexpr std::uint64_t input = 0x06;
constexpr std::uint64_t noise = 0x07;
constexpr std::uint64_t simulate = 0x08;
constexpr std::uint64_t coeffs = 0x09;
constexpr std::uint64_t factor = 0x0a;
constexpr std::uint64_t init = 0x0b;
}  // namespace genstream

struct PlacedChangePoints {
    std::vector<std::int64_t> tau;
    std::int64_t t_sum = 0;

    // Segment index (0-based) owning row t.
    int segment_of(std::int64_t t) const {
        int j = 0;
        while (j < static_cast<int>(tau.size()) && t >= tau[j]) ++j;
        return j;
    }
};

// N+1 gaps drawn uniformly from the range; tau are the cumulative sums.
inline PlacedChangePoints place_change_points(GapRange gap, int n_changes, std::uint64_t seed) {
    if (n_changes < 0) throw std::invalid_argument("place_change_points: N must be >= 0");
    if (gap.min < 1 || gap.max < gap.min)
        throw std::invalid_argument("place_change_points: bad gap range");
    Rng rng(derive_seed(seed, genstream::placement));
    PlacedChangePoints out;
    std::int64_t acc = 0;
    for (int j = 0; j <= n_changes; ++j) {
        acc += rng.uniform_int(gap.min, gap.max);
        if (j < n_changes) out.tau.push_back(acc);
    }
    out.t_sum = acc;
    return out;
}

// Shared base weights plus per-segment sparse perturbations; hidden layers
// ReLU, affine output, no biases.
struct PiecewiseModelSet {
    std::vector<Eigen::MatrixXd> base;                  // per layer
    std::vector<std::vector<Eigen::MatrixXd>> perturb;  // [segment][layer]
    std::vector<std::int64_t> tau;
    double perturb_scale = 1.0;

    int segments() const { return static_cast<int>(perturb.size()); }

    Eigen::MatrixXd eval(int segment, const Eigen::MatrixXd& X) const {
        Eigen::MatrixXd a = X;
        for (std::size_t l = 0; l < base.size(); ++l) {
            const Eigen::MatrixXd w = base[l] + perturb_scale * perturb[segment][l];
            a = (a * w.transpose()).eval();
            if (l + 1 < base.size()) a = a.cwiseMax(0.0);
        }
        return a;
    }
};

namespace detail {

inline std::vector<double> signals_on(const PiecewiseModelSet& models, const Eigen::MatrixXd& X) {
    std::vector<Eigen::MatrixXd> outs(models.segments());
    for (int j = 0; j < models.segments(); ++j) outs[j] = models.eval(j, X);
    std::vector<double> signals;
    for (int j = 0; j + 1 < models.segments(); ++j)
        signals.push_back((outs[j + 1] - outs[j]).squaredNorm() /
                          static_cast<double>(X.rows()));
    return signals;
}

inline Eigen::MatrixXd standard_normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
    return m;
}

}  // namespace detail

// Fresh-draw Monte-Carlo estimate of E||f_{j+1}(X)-f_j(X)||^2 per change.
inline std::vector<double> measure_change_signals(const PiecewiseModelSet& models, int input_dim,
                                                  int samples, std::uint64_t seed) {
    Rng rng(seed);
    const Eigen::MatrixXd X = detail::standard_normal_matrix(rng, samples, input_dim);
    return detail::signals_on(models, X);
}

struct MlpPiecewiseData {
    SeriesDataset data;
    PiecewiseModelSet models;
    std::vector<double> change_signals;
    PlacedChangePoints placed;
};

inline MlpPiecewiseData gen_mlp_piecewise(const GeneratorSpec& spec) {
    if (spec.family != Family::mlp_piecewise)
        throw std::invalid_argument("gen_mlp_piecewise: wrong family");
    if (spec.p < 1 || spec.h < 1) throw std::invalid_argument("gen_mlp_piecewise: bad dims");
    if (spec.mlp.sparsity < 0.0 || spec.mlp.sparsity > 1.0)
        throw std::invalid_argument("gen_mlp_piecewise: sparsity must be in [0,1]");
    if (spec.sigma < 0.0) throw std::invalid_argument("gen_mlp_piecewise: negative sigma");
    for (int w : spec.mlp.hidden)
        if (w < 1) throw std::invalid_argument("gen_mlp_piecewise: bad hidden width");

    MlpPiecewiseData out;
    out.placed = place_change_points(spec.gap, spec.n_changes, spec.seed);
    out.models.tau = out.placed.tau;

    std::vector<int> widths;
    widths.push_back(spec.p);
    widths.insert(widths.end(), spec.mlp.hidden.begin(), spec.mlp.hidden.end());
    widths.push_back(spec.h);
    const int layers = static_cast<int>(widths.size()) - 1;

    Rng base_rng(derive_seed(spec.seed, genstream::base));
    for (int l = 0; l < layers; ++l) {
        const double sd = spec.mlp.base_scale == BaseScale::unit
                              ? 1.0
                              : std::sqrt(2.0 / static_cast<double>(widths[l]));
        Eigen::MatrixXd w(widths[l + 1], widths[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = base_rng.normal(0.0, sd);
        out.models.base.push_back(std::move(w));
    }

    const int segments = spec.n_changes + 1;
    out.models.perturb.resize(segments);
    for (int j = 0; j < segments; ++j) {
        Rng rng(derive_seed(spec.seed, genstream::perturb, static_cast<std::uint64_t>(j)));
        for (int l = 0; l < layers; ++l) {
            Eigen::MatrixXd w = Eigen::MatrixXd::Zero(widths[l + 1], widths[l]);
            for (Eigen::Index r = 0; r < w.rows(); ++r)
                for (Eigen::Index c = 0; c < w.cols(); ++c) {
                    const bool on = rng.bernoulli(spec.mlp.sparsity);
                    const double v = spec.mlp.perturb == PerturbDist::normal ? rng.normal()
                                                                             : rng.uniform();
                    if (on) w(r, c) = v;
                }
            out.models.perturb[j].push_back(std::move(w));
        }
    }

    // Signal normalization: one scalar on all perturbations, found by
    // bisection against a fixed Monte-Carlo batch.
    if (spec.mlp.signal_target && spec.n_changes > 0) {
        const double target = *spec.mlp.signal_target;
        if (target <= 0.0) throw std::invalid_argument("gen_mlp_piecewise: bad signal target");
        Rng mc_rng(derive_seed(spec.seed, genstream::calibrate));
        const Eigen::MatrixXd mc =
            detail::standard_normal_matrix(mc_rng, std::max(200, spec.mlp.mc_samples / 4), spec.p);
        auto mean_signal = [&](double c) {
            PiecewiseModelSet& m = out.models;
            m.perturb_scale = c;
            const auto s = detail::signals_on(m, mc);
            double acc = 0.0;
            for (double v : s) acc += v;
            return acc / static_cast<double>(s.size());
        };
        double hi = 1.0;
        int guard = 0;
        while (mean_signal(hi) < target && guard++ < 200) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mean_signal(mid) < target ? lo : hi) = mid;
        }
        out.models.perturb_scale = 0.5 * (lo + hi);
    }

    out.change_signals =
        spec.n_changes > 0
            ? measure_change_signals(out.models, spec.p, spec.mlp.mc_samples,
                                     derive_seed(spec.seed, genstream::measure))
            : std::vector<double>{};

    // Inputs: i.i.d. standard normal, or a componentwise VAR(1) scaled to the
    // same unit marginal variance.
    const std::int64_t total = out.placed.t_sum;
    Rng xrng(derive_seed(spec.seed, genstream::input));
    Eigen::MatrixXd X(total, spec.p);
    if (spec.mlp.input == InputMode::iid) {
        for (Eigen::Index r = 0; r < X.rows(); ++r)
            for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = xrng.normal();
    } else {
        const double phi = spec.mlp.input_ar_coeff;
        if (phi <= -1.0 || phi >= 1.0)
            throw std::invalid_argument("gen_mlp_piecewise: VAR(1) input coefficient in (-1,1)");
        const double innov = std::sqrt(1.0 - phi * phi);
        Eigen::RowVectorXd prev(spec.p);
        for (int c = 0; c < spec.p; ++c) prev(c) = xrng.normal();
        X.row(0) = prev;
        for (std::int64_t t = 1; t < total; ++t) {
            for (int c = 0; c < spec.p; ++c) prev(c) = phi * prev(c) + innov * xrng.normal();
            X.row(t) = prev;
        }
    }

    Eigen::MatrixXd Y(total, spec.h);
    std::int64_t start = 0;
    for (int j = 0; j < segments; ++j) {
        const std::int64_t end = j < spec.n_changes ? out.placed.tau[j] : total;
        Y.middleRows(start, end - start) =
            out.models.eval(j, X.middleRows(start, end - start));
        start = end;
    }
    if (spec.sigma > 0.0) {
        Rng nrng(derive_seed(spec.seed, genstream::noise));
        for (Eigen::Index r = 0; r < Y.rows(); ++r)
            for (Eigen::Index c = 0; c < Y.cols(); ++c) Y(r, c) += spec.sigma * nrng.normal();
    }

    out.data.x = std::move(X);
    out.data.y = std::move(Y);
    out.data.true_change_points = out.placed.tau;
    out.data.noise_sigma = spec.sigma;
    return out;
}

inline Eigen::MatrixXd companion_matrix(const std::vector<Eigen::MatrixXd>& coeffs) {
    const int q = static_cast<int>(coeffs.size());
    const int h = static_cast<int>(coeffs[0].rows());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(q * h, q * h);
    for (int k = 0; k < q; ++k) b.block(0, k * h, h, h) = coeffs[k];
    for (int k = 1; k < q; ++k)
        b.block(k * h, (k - 1) * h, h, h) = Eigen::MatrixXd::Identity(h, h);
    return b;
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().array().abs().maxCoeff();
}

// Rescales A_k by s^k so the companion's eigenvalues scale by s; the result
// has spectral radius exactly `target` (up to rounding).
inline void stabilize_var_coeffs(std::vector<Eigen::MatrixXd>& coeffs, double target) {
    const double rho = spectral_radius(companion_matrix(coeffs));
    if (rho < 1e-12) return;
    const double s = target / rho;
    double sk = 1.0;
    for (auto& a : coeffs) {
        sk *= s;
        a *= sk;
    }
}

// Flatten a raw series into the supervised dataset: X_t stacks the most
// recent `lags` rows, Y_t is row t. The first `lags` rows of `raw` are
// presamples that only provide lag context.
inline SeriesDataset flatten_lagged(const Eigen::MatrixXd& raw, int lags,
                                    std::vector<std::int64_t> tau, std::optional<double> sigma) {
    if (lags < 1) throw std::invalid_argument("flatten_lagged: lags must be >= 1");
    const std::int64_t total = raw.rows() - lags;
    if (total < 1) throw std::invalid_argument("flatten_lagged: series shorter than lag order");
    const int h = static_cast<int>(raw.cols());
    SeriesDataset ds;
    ds.x.resize(total, static_cast<Eigen::Index>(lags) * h);
    ds.y.resize(total, h);
    for (std::int64_t t = 0; t < total; ++t) {
        ds.y.row(t) = raw.row(lags + t);
        for (int k = 1; k <= lags; ++k)
            ds.x.block(t, static_cast<Eigen::Index>(k - 1) * h, 1, h) = raw.row(lags + t - k);
    }
    ds.true_change_points = std::move(tau);
    ds.noise_sigma = sigma;
    return ds;
}

struct VarData {
    Eigen::MatrixXd raw;  // (presamples + T_sum) x h
    int presamples = 0;
    SeriesDataset flattened;
    std::vector<std::vector<Eigen::MatrixXd>> coeffs;  // [segment][lag]
    std::vector<Eigen::MatrixXd> companions;
    PlacedChangePoints placed;
};

// Simulates Y_t = sum_k A_{kj} Y_{t-k} + eps_t over the given segment
// layout. Returns (lags + T_sum) rows; the first `lags` rows are presamples.
// State carries across segment boundaries unless `restart` is set.
inline Eigen::MatrixXd simulate_var(const std::vector<std::vector<Eigen::MatrixXd>>& coeffs,
                                    const PlacedChangePoints& placed, double sigma, int burn_in,
                                    bool restart, std::uint64_t seed) {
    const int q = static_cast<int>(coeffs[0].size());
    const int h = static_cast<int>(coeffs[0][0].rows());
    const std::int64_t total = placed.t_sum;
    Rng sim(derive_seed(seed, genstream::simulate));

    std::vector<Eigen::RowVectorXd> lags(q);  // lags[0] = most recent
    auto fresh_lags = [&]() {
        for (int k = 0; k < q; ++k) {
            lags[k].resize(h);
            for (int c = 0; c < h; ++c) lags[k](c) = sim.normal();
        }
    };
    auto advance = [&](int segment) {
        Eigen::RowVectorXd next = Eigen::RowVectorXd::Zero(h);
        for (int k = 0; k < q; ++k) next += lags[k] * coeffs[segment][k].transpose();
        if (sigma > 0.0)
            for (int c = 0; c < h; ++c) next(c) += sigma * sim.normal();
        for (int k = q - 1; k > 0; --k) lags[k] = lags[k - 1];
        lags[0] = next;
        return lags[0];
    };

    fresh_lags();
    for (int b = 0; b < burn_in; ++b) advance(0);

    Eigen::MatrixXd raw(q + total, h);
    for (int k = 0; k < q; ++k) raw.row(k) = advance(0);  // presample rows
    for (std::int64_t t = 0; t < total; ++t) {
        const int seg = placed.segment_of(t);
        if (restart && t > 0 && seg != placed.segment_of(t - 1)) {
            fresh_lags();
            for (int b = 0; b < burn_in; ++b) advance(seg);
        }
        raw.row(q + t) = advance(seg);
    }
    return raw;
}

inline VarData gen_var(const GeneratorSpec& spec) {
    if (spec.family != Family::var) throw std::invalid_argument("gen_var: wrong family");
    const int q = spec.var.lags;
    const int h = spec.h;
    if (q < 1) throw std::invalid_argument("gen_var: lag order must be >= 1");
    if (h < 1) throw std::invalid_argument("gen_var: bad dimension");

    VarData out;
    out.placed = place_change_points(spec.gap, spec.n_changes, spec.seed);
    if (q >= out.placed.t_sum)
        throw std::invalid_argument("gen_var: lag order >= series length");
    out.presamples = q;

    const int segments = spec.n_changes + 1;
    for (int j = 0; j < segments; ++j) {
        Rng rng(derive_seed(spec.seed, genstream::coeffs, static_cast<std::uint64_t>(j)));
        std::vector<Eigen::MatrixXd> a;
        for (int k = 0; k < q; ++k) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(h, h);
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < h; ++c) {
                    const bool on = rng.bernoulli(spec.var.density);
                    const double v = rng.normal();
                    if (on) m(r, c) = v;
                }
            a.push_back(std::move(m));
        }
        stabilize_var_coeffs(a, spec.var.spectral_target);
        out.companions.push_back(companion_matrix(a));
        out.coeffs.push_back(std::move(a));
    }

    const int burn = spec.var.burn_in >= 0 ? spec.var.burn_in : q;
    out.raw = simulate_var(out.coeffs, out.placed, spec.sigma, burn,
                           spec.var.restart_segments, spec.seed);
    out.flattened = flatten_lagged(out.raw, q, out.placed.tau, spec.sigma);
    return out;
}

struct NlVarData {
    Eigen::MatrixXd raw;
    int presamples = 0;
    SeriesDataset flattened;
    PlacedChangePoints placed;
    std::vector<Eigen::MatrixXd> a_matrices;  // per segment
};

// Observable x_t = A x_{t-1} + sum_i Lambda_i rho_i(f_{r t - i} + eps_t) with
// a latent stable VAR(2) factor f. Per-segment parameters {A, Lambda, rho}.
inline NlVarData gen_nonlinear_var(const GeneratorSpec& spec) {
    if (spec.family != Family::nonlinear_var)
        throw std::invalid_argument("gen_nonlinear_var: wrong family");
    const int q = spec.nlvar.lags;
    const int fdim = spec.nlvar.factor_dim;
    const int h = spec.h;
    const int r = spec.nlvar.frequency;
    if (q < 0 || fdim < 1 || h < 1 || r < 1)
        throw std::invalid_argument("gen_nonlinear_var: bad parameters");

    NlVarData out;
    out.placed = place_change_points(spec.gap, spec.n_changes, spec.seed);
    out.presamples = spec.nlvar.flatten_lags;
    const std::int64_t total = out.placed.t_sum;
    const int segments = spec.n_changes + 1;

    // Latent factor path, shared across segments.
    Rng frng(derive_seed(spec.seed, genstream::factor));
    std::vector<Eigen::MatrixXd> gamma;
    for (int k = 0; k < 2; ++k)
        gamma.push_back(detail::standard_normal_matrix(frng, fdim, fdim) /
                        std::sqrt(2.0 * fdim));
    stabilize_var_coeffs(gamma, spec.nlvar.spectral_target);
    const std::int64_t f_len = static_cast<std::int64_t>(r) * (total + out.presamples) + q + 1;
    Eigen::MatrixXd f(f_len, fdim);
    Eigen::RowVectorXd f1 = Eigen::RowVectorXd::Zero(fdim), f2 = f1;
    for (int b = 0; b < 50; ++b) {  // burn toward stationarity
        Eigen::RowVectorXd next = f1 * gamma[0].transpose() + f2 * gamma[1].transpose();
        for (int c = 0; c < fdim; ++c) next(c) += spec.nlvar.factor_sigma * frng.normal();
        f2 = f1;
        f1 = next;
    }
    for (std::int64_t t = 0; t < f_len; ++t) {
        Eigen::RowVectorXd next = f1 * gamma[0].transpose() + f2 * gamma[1].transpose();
        for (int c = 0; c < fdim; ++c) next(c) += spec.nlvar.factor_sigma * frng.normal();
        f2 = f1;
        f1 = next;
        f.row(t) = next;
    }

    enum class Nonlin { tanh_fn, sin_fn, leaky_relu };
    auto apply = [](Nonlin nl, Eigen::RowVectorXd v) {
        switch (nl) {
            case Nonlin::tanh_fn:
                for (auto& e : v) e = std::tanh(e);
                break;
            case Nonlin::sin_fn:
                for (auto& e : v) e = std::sin(e);
                break;
            case Nonlin::leaky_relu:
                for (auto& e : v) e = e > 0 ? e : 0.1 * e;
                break;
        }
        return v;
    };

    for (int attempt = 0; attempt <= spec.nlvar.max_redraws; ++attempt) {
        // Per-segment parameters.
        std::vector<Eigen::MatrixXd> a(segments);
        std::vector<std::vector<Eigen::MatrixXd>> lambda(segments);
        std::vector<std::vector<Nonlin>> nonlin(segments);
        for (int j = 0; j < segments; ++j) {
            Rng rng(derive_seed(spec.seed, genstream::coeffs,
                                static_cast<std::uint64_t>(j) * 1000 + attempt));
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(h, h);
            for (int rr = 0; rr < h; ++rr)
                for (int cc = 0; cc < h; ++cc) {
                    const bool on = rng.bernoulli(spec.nlvar.coupling_density);
                    const double v = rng.normal();
                    if (on) m(rr, cc) = v;
                }
            const double rho = spectral_radius(m);
            if (rho > 1e-12) m *= spec.nlvar.spectral_target / rho;
            a[j] = std::move(m);
            for (int i = 0; i <= q; ++i) {
                lambda[j].push_back(spec.nlvar.lambda_scale *
                                    detail::standard_normal_matrix(rng, h, fdim) /
                                    std::sqrt(static_cast<double>((q + 1) * fdim)));
                nonlin[j].push_back(static_cast<Nonlin>(rng.uniform_int(0, 2)));
            }
        }

        Rng sim(derive_seed(spec.seed, genstream::simulate, attempt));
        Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(h);
        if (spec.nlvar.x_init_scale > 0.0)
            for (int c = 0; c < h; ++c) x(c) = spec.nlvar.x_init_scale * sim.normal();
        Eigen::MatrixXd raw(out.presamples + total, h);
        bool stable = true;
        for (std::int64_t row = 0; row < raw.rows() && stable; ++row) {
            const std::int64_t t = row - out.presamples;  // series clock; negative = presample
            const int seg = t <= 0 ? 0 : out.placed.segment_of(t);
            Eigen::RowVectorXd eps(fdim);
            for (int c = 0; c < fdim; ++c) eps(c) = spec.sigma > 0 ? spec.sigma * sim.normal() : 0.0;
            Eigen::RowVectorXd next = x * a[seg].transpose();
            for (int i = 0; i <= q; ++i) {
                const std::int64_t fi = std::max<std::int64_t>(0, static_cast<std::int64_t>(r) * t - i);
                next += apply(nonlin[seg][i], f.row(fi) + eps) * lambda[seg][i].transpose();
            }
            x = next;
            raw.row(row) = x;
            if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e9) stable = false;
        }
        if (stable) {
            out.raw = std::move(raw);
            out.a_matrices = std::move(a);
            out.flattened =
                flatten_lagged(out.raw, spec.nlvar.flatten_lags, out.placed.tau, spec.sigma);
            return out;
        }
    }
    throw std::runtime_error("gen_nonlinear_var: no stable draw after " +
                             std::to_string(spec.nlvar.max_redraws) + " redraws");
}

struct LvData {
    Eigen::MatrixXd raw;  // columns: p prey then p predators
    int presamples = 0;
    SeriesDataset flattened;
    PlacedChangePoints placed;
};

// Multi-species predator/prey dynamics
//   dx_i/dt = alpha x_i - beta x_i sum_{j in Pa(x_i)} y_j - alpha x_i^2
//   dy_j/dt = delta y_j sum_{k in Pa(y_j)} x_k - gamma y_j
// integrated by RK4 and sampled every round(1/dt) steps; per-segment changes
// redraw the interaction parent sets (and rates when enabled).
inline LvData gen_lotka_volterra(const GeneratorSpec& spec) {
    if (spec.family != Family::lotka_volterra)
        throw std::invalid_argument("gen_lotka_volterra: wrong family");
    const int p = spec.lv.species;
    if (p < 1) throw std::invalid_argument("gen_lotka_volterra: need at least one species pair");
    if (spec.lv.alpha <= 0 || spec.lv.beta < 0 || spec.lv.delta < 0 || spec.lv.gamma <= 0)
        throw std::invalid_argument("gen_lotka_volterra: rates must be positive");
    if (spec.lv.dt <= 0) throw std::invalid_argument("gen_lotka_volterra: bad step size");

    LvData out;
    out.placed = place_change_points(spec.gap, spec.n_changes, spec.seed);
    out.presamples = spec.lv.flatten_lags;
    const std::int64_t total = out.placed.t_sum;
    const int segments = spec.n_changes + 1;
    const int dims = 2 * p;

    struct SegmentParams {
        std::vector<std::vector<int>> prey_parents;  // predators eating prey i
        std::vector<std::vector<int>> pred_parents;  // prey feeding predator j
        double alpha, beta, delta, gamma;
    };
    std::vector<SegmentParams> params(segments);
    for (int j = 0; j < segments; ++j) {
        Rng rng(derive_seed(spec.seed, genstream::coeffs, static_cast<std::uint64_t>(j)));
        auto& sp = params[j];
        sp.prey_parents.resize(p);
        sp.pred_parents.resize(p);
        for (int i = 0; i < p; ++i)
            for (int k = 0; k < p; ++k)
                if (rng.bernoulli(spec.lv.parent_prob)) sp.prey_parents[i].push_back(k);
        for (int i = 0; i < p; ++i)
            for (int k = 0; k < p; ++k)
                if (rng.bernoulli(spec.lv.parent_prob)) sp.pred_parents[i].push_back(k);
        sp.alpha = spec.lv.alpha;
        sp.beta = spec.lv.beta;
        sp.delta = spec.lv.delta;
        sp.gamma = spec.lv.gamma;
        if (spec.lv.redraw_rates) {
            sp.alpha *= rng.uniform(0.5, 1.5);
            sp.beta *= rng.uniform(0.5, 1.5);
            sp.delta *= rng.uniform(0.5, 1.5);
            sp.gamma *= rng.uniform(0.5, 1.5);
        }
    }

    auto deriv = [&](const SegmentParams& sp, const Eigen::VectorXd& u) {
        Eigen::VectorXd d(dims);
        for (int i = 0; i < p; ++i) {
            double pred_sum = 0.0;
            for (int j : sp.prey_parents[i]) pred_sum += u(p + j);
            d(i) = sp.alpha * u(i) - sp.beta * u(i) * pred_sum - sp.alpha * u(i) * u(i);
        }
        for (int j = 0; j < p; ++j) {
            double prey_sum = 0.0;
            for (int k : sp.pred_parents[j]) prey_sum += u(k);
            d(p + j) = sp.delta * u(p + j) * prey_sum - sp.gamma * u(p + j);
        }
        return d;
    };

    Rng init_rng(derive_seed(spec.seed, genstream::init));
    Eigen::VectorXd state(dims);
    for (int i = 0; i < p; ++i)
        state(i) = spec.lv.init_prey ? *spec.lv.init_prey : init_rng.uniform(0.5, 2.0);
    for (int j = 0; j < p; ++j)
        state(p + j) = spec.lv.init_pred ? *spec.lv.init_pred : init_rng.uniform(0.5, 2.0);

    const std::int64_t steps_per_sample = std::llround(1.0 / spec.lv.dt);
    const double dt = spec.lv.dt;
    std::int64_t step_count = 0;
    auto rk4_step = [&](const SegmentParams& sp) {
        const Eigen::VectorXd k1 = deriv(sp, state);
        const Eigen::VectorXd k2 = deriv(sp, state + 0.5 * dt * k1);
        const Eigen::VectorXd k3 = deriv(sp, state + 0.5 * dt * k2);
        const Eigen::VectorXd k4 = deriv(sp, state + dt * k3);
        state += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ++step_count;
        if (!state.allFinite())
            throw std::runtime_error("gen_lotka_volterra: non-finite state at step " +
                                     std::to_string(step_count));
        state = state.cwiseMax(spec.lv.clamp);
    };

    Rng noise_rng(derive_seed(spec.seed, genstream::noise));
    Eigen::MatrixXd raw(out.presamples + total, dims);
    for (std::int64_t row = 0; row < raw.rows(); ++row) {
        if (row > 0) {
            const std::int64_t t = row - out.presamples;
            const int seg = t <= 0 ? 0 : out.placed.segment_of(t);
            for (std::int64_t s = 0; s < steps_per_sample; ++s) rk4_step(params[seg]);
        }
        raw.row(row) = state.transpose();
        if (spec.sigma > 0.0)
            for (int c = 0; c < dims; ++c) raw(row, c) += spec.sigma * noise_rng.normal();
    }

    out.raw = std::move(raw);
    out.flattened = flatten_lagged(out.raw, spec.lv.flatten_lags, out.placed.tau, spec.sigma);
    return out;
}

// Uniform front end for the CLI and the experiment harness.
struct GeneratedData {
    SeriesDataset dataset;
    std::optional<Eigen::MatrixXd> raw;  // y-only series for the dynamical families
    int presamples = 0;
    std::vector<std::int64_t> tau;
    std::int64_t t_sum = 0;
    std::vector<double> change_signals;  // mlp family only
};

inline GeneratedData generate(const GeneratorSpec& spec) {
    GeneratedData out;
    switch (spec.family) {
        case Family::mlp_piecewise: {
            auto g = gen_mlp_piecewise(spec);
            out.dataset = std::move(g.data);
            out.tau = g.placed.tau;
            out.t_sum = g.placed.t_sum;
            out.change_signals = std::move(g.change_signals);
            break;
        }
        case Family::var: {
            auto g = gen_var(spec);
            out.dataset = std::move(g.flattened);
            out.raw = std::move(g.raw);
            out.presamples = g.presamples;
            out.tau = g.placed.tau;
            out.t_sum = g.placed.t_sum;
            break;
        }
        case Family::nonlinear_var: {
            auto g = gen_nonlinear_var(spec);
            out.dataset = std::move(g.flattened);
            out.raw = std::move(g.raw);
            out.presamples = g.presamples;
            out.tau = g.placed.tau;
            out.t_sum = g.placed.t_sum;
            break;
        }
        case Family::lotka_volterra: {
            auto g = gen_lotka_volterra(spec);
            out.dataset = std::move(g.flattened);
            out.raw = std::move(g.raw);
            out.presamples = g.presamples;
            out.tau = g.placed.tau;
            out.t_sum = g.placed.t_sum;
            break;
        }
    }
    return out;
}

}  // namespace cpscan
