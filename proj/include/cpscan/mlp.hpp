#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cpscan/rng.hpp"

namespace cpscan {

// Fully connected ReLU regressor
//   f(x) = W_L a_L,  a_j = max(0, z_j - v_j),  z_j = W_{j-1} a_{j-1},  a_0 = x.
// Biases live inside the hidden activations; the output layer is a plain
// affine map with no bias. The ReLU subgradient at the kink is 0.

struct MlpSpec {
    std::vector<int> layer_widths;  // p_0 .. p_{L+1}

    int input_dim() const { return layer_widths.front(); }
    int output_dim() const { return layer_widths.back(); }
    int hidden_layers() const { return static_cast<int>(layer_widths.size()) - 2; }

    void validate() const {
        if (layer_widths.size() < 2)
            throw std::invalid_argument("MlpSpec: need input and output widths");
        for (int w : layer_widths)
            if (w < 1) throw std::invalid_argument("MlpSpec: layer widths must be >= 1");
    }
};

inline MlpSpec make_mlp_spec(int input_dim, const std::vector<int>& hidden, int output_dim) {
    MlpSpec spec;
    spec.layer_widths.reserve(hidden.size() + 2);
    spec.layer_widths.push_back(input_dim);
    spec.layer_widths.insert(spec.layer_widths.end(), hidden.begin(), hidden.end());
    spec.layer_widths.push_back(output_dim);
    return spec;
}

struct MlpModel {
    MlpSpec spec;
    std::vector<Eigen::MatrixXd> weights;  // W_j: p_{j+1} x p_j, j = 0..L
    std::vector<Eigen::VectorXd> biases;   // v_j: length p_j, j = 1..L
};

// Weights ~ N(0, 2/fan_in), biases zero. The draw order (layer, row, column)
// is fixed so a seed pins the model bit for bit.
inline MlpModel mlp_init(const MlpSpec& spec, std::uint64_t seed) {
    spec.validate();
    MlpModel model;
    model.spec = spec;
    Rng rng(derive_seed(seed, 0x6d6c70ULL));
    const auto& w = spec.layer_widths;
    const int layers = spec.hidden_layers();
    model.weights.reserve(layers + 1);
    for (int j = 0; j <= layers; ++j) {
        Eigen::MatrixXd weight(w[j + 1], w[j]);
        const double sd = std::sqrt(2.0 / static_cast<double>(w[j]));
        for (Eigen::Index r = 0; r < weight.rows(); ++r)
            for (Eigen::Index c = 0; c < weight.cols(); ++c) weight(r, c) = rng.normal(0.0, sd);
        model.weights.push_back(std::move(weight));
    }
    model.biases.reserve(layers);
    for (int j = 1; j <= layers; ++j) model.biases.push_back(Eigen::VectorXd::Zero(w[j]));
    return model;
}

// Rows of X are samples.
inline Eigen::MatrixXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.spec.input_dim())
        throw std::invalid_argument("forward: input has " + std::to_string(X.cols()) +
                                    " columns, model expects " +
                                    std::to_string(model.spec.input_dim()));
    Eigen::MatrixXd a = X * model.weights[0].transpose();
    const int layers = model.spec.hidden_layers();
    for (int j = 1; j <= layers; ++j) {
        a = ((a.rowwise() - model.biases[j - 1].transpose()).cwiseMax(0.0)).eval() *
            model.weights[j].transpose();
    }
    return a;
}

inline Eigen::VectorXd forward(const MlpModel& model, const Eigen::VectorXd& x) {
    return forward_batch(model, x.transpose()).row(0).transpose();
}

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Mean (per-sample) squared-error loss and its exact gradients via
// reverse-mode accumulation. The detection criterion E(t) uses the sum
// instead; see test_error in window_scan.hpp.
inline std::pair<double, Gradients> loss_and_gradients(const MlpModel& model,
                                                       const Eigen::MatrixXd& X,
                                                       const Eigen::MatrixXd& Y) {
    const Eigen::Index n = X.rows();
    if (n == 0) throw std::invalid_argument("loss_and_gradients: empty window");
    if (Y.rows() != n) throw std::invalid_argument("loss_and_gradients: X/Y row mismatch");
    if (X.cols() != model.spec.input_dim() || Y.cols() != model.spec.output_dim())
        throw std::invalid_argument("loss_and_gradients: dimension mismatch");

    const int layers = model.spec.hidden_layers();
    std::vector<Eigen::MatrixXd> acts;  // acts[j] = input to W_j
    acts.reserve(layers + 1);
    acts.push_back(X);
    std::vector<Eigen::ArrayXXd> masks(layers);

    Eigen::MatrixXd z = X * model.weights[0].transpose();
    for (int j = 1; j <= layers; ++j) {
        Eigen::MatrixXd s = z.rowwise() - model.biases[j - 1].transpose();
        masks[j - 1] = (s.array() > 0.0).cast<double>();
        acts.push_back(s.cwiseMax(0.0));
        z = acts.back() * model.weights[j].transpose();
    }

    const Eigen::MatrixXd residual = z - Y;
    const double loss = residual.squaredNorm() / static_cast<double>(n);

    Gradients grads;
    grads.weights.resize(layers + 1);
    grads.biases.resize(layers);

    Eigen::MatrixXd g = (2.0 / static_cast<double>(n)) * residual;  // d loss / d z_{L+1}
    for (int j = layers; j >= 1; --j) {
        grads.weights[j] = g.transpose() * acts[j];
        Eigen::MatrixXd ga = g * model.weights[j];
        g = (ga.array() * masks[j - 1]).matrix();
        grads.biases[j - 1] = -g.colwise().sum().transpose();
    }
    grads.weights[0] = g.transpose() * acts[0];
    return {loss, std::move(grads)};
}

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Eigen::MatrixXd> m_weights, v_weights;
    std::vector<Eigen::VectorXd> m_biases, v_biases;
    std::int64_t step = 0;
    AdamParams params;

    static AdamState init(const MlpModel& model, AdamParams params = {}) {
        AdamState st;
        st.params = params;
        for (const auto& w : model.weights) {
            st.m_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
            st.v_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
        }
        for (const auto& b : model.biases) {
            st.m_biases.push_back(Eigen::VectorXd::Zero(b.size()));
            st.v_biases.push_back(Eigen::VectorXd::Zero(b.size()));
        }
        return st;
    }
};

// Standard ADAM update with bias correction; eps is added outside the sqrt.
inline void adam_step(MlpModel& model, const Gradients& grads, AdamState& st) {
    if (grads.weights.size() != model.weights.size() || grads.biases.size() != model.biases.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    ++st.step;
    const double c1 = 1.0 - std::pow(st.params.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.params.beta2, static_cast<double>(st.step));
    const double lr = st.params.lr;
    const double b1 = st.params.beta1;
    const double b2 = st.params.beta2;
    const double eps = st.params.eps;

    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        auto& m = st.m_weights[i];
        auto& v = st.v_weights[i];
        m = b1 * m + (1.0 - b1) * grads.weights[i];
        v = (b2 * v.array() + (1.0 - b2) * grads.weights[i].array().square()).matrix();
        model.weights[i].array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
    for (std::size_t i = 0; i < model.biases.size(); ++i) {
        auto& m = st.m_biases[i];
        auto& v = st.v_biases[i];
        m = b1 * m + (1.0 - b1) * grads.biases[i];
        v = (b2 * v.array() + (1.0 - b2) * grads.biases[i].array().square()).matrix();
        model.biases[i].array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
}

struct TrainConfig {
    int max_epochs = 1500;
    double tolerance = 1e-5;  // relative improvement of the best loss over `patience` epochs
    int patience = 10;
    std::uint64_t seed = 0;
    AdamParams adam;
};

class TrainingDivergence : public std::runtime_error {
public:
    explicit TrainingDivergence(int epoch_index)
        : std::runtime_error("training diverged (non-finite loss) at epoch " +
                             std::to_string(epoch_index)),
          epoch(epoch_index) {}
    int epoch;
};

namespace detail {

// Full-batch ADAM from the given starting point. Stops when the best loss
// seen has not improved by a relative `tolerance` over `patience` epochs.
inline MlpModel train_from(MlpModel model, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                           const TrainConfig& cfg) {
    if (cfg.max_epochs <= 0) return model;
    AdamState st = AdamState::init(model, cfg.adam);
    std::vector<double> best_history;
    best_history.reserve(cfg.max_epochs);
    double best = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto [loss, grads] = loss_and_gradients(model, X, Y);
        if (!std::isfinite(loss)) throw TrainingDivergence(epoch);
        best = std::min(best, loss);
        best_history.push_back(best);
        if (loss == 0.0) break;
        if (epoch > cfg.patience) {
            const double before = best_history[epoch - 1 - cfg.patience];
            if (before - best < cfg.tolerance * std::max(before, 1e-300)) break;
        }
        adam_step(model, grads, st);
    }
    return model;
}

}  // namespace detail

// Fresh-initialized model, trained to convergence (or the epoch cap) by
// full-batch ADAM. Deterministic given cfg.seed.
inline MlpModel train_window(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                             const MlpSpec& spec, const TrainConfig& cfg) {
    if (X.rows() < 1) throw std::invalid_argument("train_window: empty window");
    MlpModel model = mlp_init(spec, cfg.seed);
    if (cfg.max_epochs == 0) return model;
    return detail::train_from(std::move(model), X, Y, cfg);
}

}  // namespace cpscan
