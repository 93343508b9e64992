#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpscan/mlp.hpp"

namespace cpscan {

// Distributional assumption class; governs the suggested window sizes.
enum class Regime { independent, subgaussian, dependent };

inline std::string to_string(Regime r) {
    switch (r) {
        case Regime::independent: return "independent";
        case Regime::subgaussian: return "subgaussian";
        case Regime::dependent: return "dependent";
    }
    return "independent";
}

inline Regime regime_from_string(const std::string& s) {
    if (s == "independent") return Regime::independent;
    if (s == "subgaussian") return Regime::subgaussian;
    if (s == "dependent") return Regime::dependent;
    throw std::invalid_argument("unknown regime: " + s);
}

// Detection threshold selection.
//   auto_mode : data-driven from the curve's local ranges
//   fixed     : explicit value, in curve units
//   signal    : pi = M1* . T2 / 3, M1* being the per-row minimum change signal
//   proof     : pi = (M1*/2 - 2 h sigma^2) . T2
struct PiSpec {
    enum class Mode { auto_mode, fixed, signal, proof };
    Mode mode = Mode::auto_mode;
    double value = 0.0;  // fixed pi, or M1* for signal/proof

    static PiSpec automatic() { return {Mode::auto_mode, 0.0}; }
    static PiSpec fixed_value(double pi) { return {Mode::fixed, pi}; }
    static PiSpec from_signal(double m1_star) { return {Mode::signal, m1_star}; }
    static PiSpec from_proof(double m1_star) { return {Mode::proof, m1_star}; }
};

struct DetectionConfig {
    int t1 = 0;  // training window; 0 = fill from suggest_windows
    int t2 = 0;  // test window
    int t3 = 0;  // detection window
    PiSpec pi;
    int stride = 1;
    Regime regime = Regime::independent;
    std::vector<int> hidden_widths{256, 256};
    TrainConfig train;
    std::uint64_t seed = 0;
    bool warm_start = false;  // reuse the previous window's model as the starting point
};

}  // namespace cpscan
