#pragma once

#include <json.hpp>

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpscan/dataset.hpp"
#include "cpscan/datagen.hpp"
#include "cpscan/detector.hpp"
#include "cpscan/metrics.hpp"
#include "cpscan/window_scan.hpp"

namespace cpscan {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// hashing

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string file_hash(const std::string& path) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file(path))));
    return std::string(buf);
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
    try {
        std::size_t consumed = 0;
        const double v = std::stod(cell, &consumed);
        while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed])))
            ++consumed;
        if (consumed != cell.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (...) {
        throw std::runtime_error("non-numeric cell at row " + std::to_string(row) + ", column " +
                                 std::to_string(col) + ": '" + cell + "'");
    }
}

}  // namespace detail

// Header x0..x{p-1},y0..y{h-1}; one row per time point.
inline std::string dataset_csv(const SeriesDataset& data) {
    std::string out;
    for (int c = 0; c < data.input_dim(); ++c) {
        if (c) out += ',';
        out += "x" + std::to_string(c);
    }
    for (int c = 0; c < data.output_dim(); ++c) {
        out += ",y" + std::to_string(c);
    }
    out += '\n';
    for (std::int64_t r = 0; r < data.rows(); ++r) {
        for (int c = 0; c < data.input_dim(); ++c) {
            if (c) out += ',';
            out += detail::format_double(data.x(r, c));
        }
        for (int c = 0; c < data.output_dim(); ++c) {
            out += ',';
            out += detail::format_double(data.y(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_dataset_csv(const std::string& path, const SeriesDataset& data) {
    write_file(path, dataset_csv(data));
}

// Accepts either x*,y* columns or y-only columns (raw series).
inline SeriesDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset: " + path);
    const auto header = detail::split_csv_line(line);
    int p = 0, h = 0;
    for (const auto& name : header) {
        if (!name.empty() && name[0] == 'x') {
            ++p;
        } else if (!name.empty() && name[0] == 'y') {
            ++h;
        } else {
            throw std::runtime_error("bad dataset header column: '" + name + "'");
        }
    }
    if (h == 0) throw std::runtime_error("dataset has no y columns: " + path);
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (static_cast<int>(cells.size()) != p + h)
            throw std::runtime_error("row " + std::to_string(lineno) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(p + h));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c)
            row[c] = detail::parse_cell(cells[c], lineno, c + 1);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("dataset has no rows: " + path);
    SeriesDataset ds;
    ds.x.resize(rows.size(), std::max(p, 0));
    ds.y.resize(rows.size(), h);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int c = 0; c < p; ++c) ds.x(r, c) = rows[r][c];
        for (int c = 0; c < h; ++c) ds.y(r, c) = rows[r][p + c];
    }
    return ds;
}

inline std::string raw_series_csv(const Eigen::MatrixXd& raw) {
    std::string out;
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        if (c) out += ',';
        out += "y" + std::to_string(c);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            if (c) out += ',';
            out += detail::format_double(raw(r, c));
        }
        out += '\n';
    }
    return out;
}

inline std::string curve_csv(const ErrorCurve& curve) {
    std::string out = "t,e\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
        out += std::to_string(curve.t_values[i]);
        out += ',';
        out += detail::format_double(curve.e_values[i]);
        out += '\n';
    }
    return out;
}

inline ErrorCurve read_curve_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open curve: " + path);
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line).size() != 2)
        throw std::runtime_error("bad curve header: " + path);
    ErrorCurve curve;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 2)
            throw std::runtime_error("bad curve row " + std::to_string(lineno));
        curve.t_values.push_back(
            static_cast<std::int64_t>(detail::parse_cell(cells[0], lineno, 1)));
        curve.e_values.push_back(detail::parse_cell(cells[1], lineno, 2));
    }
    return curve;
}

// ---------------------------------------------------------------------------
// JSON: generator spec and manifests

inline void to_json(json& j, const GapRange& g) { j = json{{"min", g.min}, {"max", g.max}}; }
inline void from_json(const json& j, GapRange& g) {
    j.at("min").get_to(g.min);
    j.at("max").get_to(g.max);
}

inline void to_json(json& j, const MlpPieceParams& p) {
    j = json{{"hidden", p.hidden},
             {"sparsity", p.sparsity},
             {"perturb", p.perturb == PerturbDist::normal ? "normal" : "uniform"},
             {"base_scale", p.base_scale == BaseScale::unit ? "unit" : "he"},
             {"input", p.input == InputMode::iid ? "iid" : "var1"},
             {"input_ar_coeff", p.input_ar_coeff},
             {"mc_samples", p.mc_samples}};
    if (p.signal_target) j["signal_target"] = *p.signal_target;
}

inline void from_json(const json& j, MlpPieceParams& p) {
    p = MlpPieceParams{};
    if (j.contains("hidden")) j.at("hidden").get_to(p.hidden);
    if (j.contains("sparsity")) j.at("sparsity").get_to(p.sparsity);
    if (j.contains("perturb"))
        p.perturb = j.at("perturb") == "uniform" ? PerturbDist::uniform : PerturbDist::normal;
    if (j.contains("base_scale"))
        p.base_scale = j.at("base_scale") == "he" ? BaseScale::he : BaseScale::unit;
    if (j.contains("input")) p.input = j.at("input") == "var1" ? InputMode::var1 : InputMode::iid;
    if (j.contains("input_ar_coeff")) j.at("input_ar_coeff").get_to(p.input_ar_coeff);
    if (j.contains("mc_samples")) j.at("mc_samples").get_to(p.mc_samples);
    if (j.contains("signal_target")) p.signal_target = j.at("signal_target").get<double>();
}

inline void to_json(json& j, const VarParams& p) {
    j = json{{"lags", p.lags},
             {"density", p.density},
             {"spectral_target", p.spectral_target},
             {"burn_in", p.burn_in},
             {"restart_segments", p.restart_segments}};
}

inline void from_json(const json& j, VarParams& p) {
    p = VarParams{};
    if (j.contains("lags")) j.at("lags").get_to(p.lags);
    if (j.contains("density")) j.at("density").get_to(p.density);
    if (j.contains("spectral_target")) j.at("spectral_target").get_to(p.spectral_target);
    if (j.contains("burn_in")) j.at("burn_in").get_to(p.burn_in);
    if (j.contains("restart_segments")) j.at("restart_segments").get_to(p.restart_segments);
}

inline void to_json(json& j, const NlVarParams& p) {
    j = json{{"lags", p.lags},
             {"factor_dim", p.factor_dim},
             {"frequency", p.frequency},
             {"spectral_target", p.spectral_target},
             {"coupling_density", p.coupling_density},
             {"factor_sigma", p.factor_sigma},
             {"lambda_scale", p.lambda_scale},
             {"x_init_scale", p.x_init_scale},
             {"flatten_lags", p.flatten_lags},
             {"max_redraws", p.max_redraws}};
}

inline void from_json(const json& j, NlVarParams& p) {
    p = NlVarParams{};
    if (j.contains("lags")) j.at("lags").get_to(p.lags);
    if (j.contains("factor_dim")) j.at("factor_dim").get_to(p.factor_dim);
    if (j.contains("frequency")) j.at("frequency").get_to(p.frequency);
    if (j.contains("spectral_target")) j.at("spectral_target").get_to(p.spectral_target);
    if (j.contains("coupling_density")) j.at("coupling_density").get_to(p.coupling_density);
    if (j.contains("factor_sigma")) j.at("factor_sigma").get_to(p.factor_sigma);
    if (j.contains("lambda_scale")) j.at("lambda_scale").get_to(p.lambda_scale);
    if (j.contains("x_init_scale")) j.at("x_init_scale").get_to(p.x_init_scale);
    if (j.contains("flatten_lags")) j.at("flatten_lags").get_to(p.flatten_lags);
    if (j.contains("max_redraws")) j.at("max_redraws").get_to(p.max_redraws);
}

inline void to_json(json& j, const LvParams& p) {
    j = json{{"species", p.species}, {"alpha", p.alpha},
             {"beta", p.beta},       {"delta", p.delta},
             {"gamma", p.gamma},     {"dt", p.dt},
             {"parent_prob", p.parent_prob}, {"clamp", p.clamp},
             {"flatten_lags", p.flatten_lags}, {"redraw_rates", p.redraw_rates}};
    if (p.init_prey) j["init_prey"] = *p.init_prey;
    if (p.init_pred) j["init_pred"] = *p.init_pred;
}

inline void from_json(const json& j, LvParams& p) {
    p = LvParams{};
    if (j.contains("species")) j.at("species").get_to(p.species);
    if (j.contains("alpha")) j.at("alpha").get_to(p.alpha);
    if (j.contains("beta")) j.at("beta").get_to(p.beta);
    if (j.contains("delta")) j.at("delta").get_to(p.delta);
    if (j.contains("gamma")) j.at("gamma").get_to(p.gamma);
    if (j.contains("dt")) j.at("dt").get_to(p.dt);
    if (j.contains("parent_prob")) j.at("parent_prob").get_to(p.parent_prob);
    if (j.contains("clamp")) j.at("clamp").get_to(p.clamp);
    if (j.contains("flatten_lags")) j.at("flatten_lags").get_to(p.flatten_lags);
    if (j.contains("redraw_rates")) j.at("redraw_rates").get_to(p.redraw_rates);
    if (j.contains("init_prey")) p.init_prey = j.at("init_prey").get<double>();
    if (j.contains("init_pred")) p.init_pred = j.at("init_pred").get<double>();
}

inline void to_json(json& j, const GeneratorSpec& s) {
    j = json{{"family", to_string(s.family)},
             {"p", s.p},
             {"h", s.h},
             {"n_changes", s.n_changes},
             {"gap", s.gap},
             {"sigma", s.sigma},
             {"seed", s.seed}};
    switch (s.family) {
        case Family::mlp_piecewise: j["mlp"] = s.mlp; break;
        case Family::var: j["var"] = s.var; break;
        case Family::nonlinear_var: j["nlvar"] = s.nlvar; break;
        case Family::lotka_volterra: j["lv"] = s.lv; break;
    }
}

inline void from_json(const json& j, GeneratorSpec& s) {
    s = GeneratorSpec{};
    s.family = family_from_string(j.at("family").get<std::string>());
    if (j.contains("p")) j.at("p").get_to(s.p);
    if (j.contains("h")) j.at("h").get_to(s.h);
    if (j.contains("n_changes")) j.at("n_changes").get_to(s.n_changes);
    if (j.contains("gap")) j.at("gap").get_to(s.gap);
    if (j.contains("sigma")) j.at("sigma").get_to(s.sigma);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
    if (j.contains("mlp")) j.at("mlp").get_to(s.mlp);
    if (j.contains("var")) j.at("var").get_to(s.var);
    if (j.contains("nlvar")) j.at("nlvar").get_to(s.nlvar);
    if (j.contains("lv")) j.at("lv").get_to(s.lv);
}

inline json dataset_manifest(const GeneratorSpec& spec, const GeneratedData& data) {
    json m;
    m["family"] = to_string(spec.family);
    m["seed"] = spec.seed;
    m["sigma"] = spec.sigma;
    m["tau"] = data.tau;
    m["t_sum"] = data.t_sum;
    m["presamples"] = data.presamples;
    m["params"] = spec;
    if (!data.change_signals.empty()) m["change_signals"] = data.change_signals;
    return m;
}

// ---------------------------------------------------------------------------
// reports

inline json assumption_report_json(const AssumptionReport& r) {
    json j;
    j["truth_available"] = r.truth_available;
    j["sigma_available"] = r.sigma_available;
    j["partial"] = r.partial;
    j["vacuous"] = r.vacuous;
    j["pass"] = r.pass();
    if (r.truth_available && !r.vacuous) {
        j["change_signals"] = r.change_signals;
        j["min_signal"] = r.min_signal;
        j["signal_floor"] = r.signal_floor;
        j["signal_pass"] = r.signal_pass;
        j["min_spacing"] = r.min_spacing;
        j["spacing_floor"] = r.spacing_floor;
        j["window_floor"] = r.window_floor;
        j["spacing_pass"] = r.spacing_pass;
    }
    return j;
}

inline json eval_report_json(const EvalReport& r) {
    json j;
    auto put = [&j](const char* key, double v) {
        if (std::isinf(v)) {
            j[key] = "inf";
        } else {
            j[key] = v;
        }
    };
    put("mean_distance", r.mean_distance);
    j["count_diff"] = r.count_diff;
    j["matched"] = r.matched;
    put("d_hau_w", r.haus_sum);
    put("d_hau_prod", r.haus_prod);
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["margin"] = r.margin;
    j["n_true"] = r.n_true;
    j["n_est"] = r.n_est;
    return j;
}

// Estimate files: detection report JSON or plain text, one integer per line.
inline std::vector<std::int64_t> read_estimates(const std::string& path) {
    const std::string content = read_file(path);
    std::size_t first = 0;
    while (first < content.size() && std::isspace(static_cast<unsigned char>(content[first])))
        ++first;
    if (first < content.size() && content[first] == '{') {
        const json j = json::parse(content);
        if (!j.contains("change_points"))
            throw std::runtime_error("estimate JSON has no change_points field: " + path);
        return j.at("change_points").get<std::vector<std::int64_t>>();
    }
    std::vector<std::int64_t> est;
    std::istringstream in(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t b = 0, e = line.size();
        while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
        if (b == e) continue;
        try {
            est.push_back(std::stoll(line.substr(b, e - b)));
        } catch (...) {
            throw std::runtime_error("bad estimate at line " + std::to_string(lineno) + ": '" +
                                     line + "'");
        }
    }
    std::sort(est.begin(), est.end());
    return est;
}

}  // namespace cpscan
