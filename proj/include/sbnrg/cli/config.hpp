#pragma once

// JSON run configuration: parsing with key-path diagnostics, defaults and
// per-mode validation, plus the resolved echo written into manifests.

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbnrg/circuit.hpp"
#include "sbnrg/criticality.hpp"
#include "sbnrg/errors.hpp"
#include "sbnrg/model.hpp"
#include "sbnrg/nrg.hpp"
#include "sbnrg/oracle.hpp"

namespace sbnrg::cli {

using nlohmann::json;

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

enum class Mode { map_circuit, chain, run, sweep, critical, oracle };

inline const char* to_string(Mode m) {
    switch (m) {
    case Mode::map_circuit: return "map-circuit";
    case Mode::chain: return "chain";
    case Mode::run: return "run";
    case Mode::sweep: return "sweep";
    case Mode::critical: return "critical";
    default: return "oracle";
    }
}

inline Mode parse_mode(const std::string& s) {
    for (Mode m : {Mode::map_circuit, Mode::chain, Mode::run, Mode::sweep, Mode::critical, Mode::oracle})
        if (s == to_string(m)) return m;
    throw ConfigError("mode: unknown value '" + s + "'");
}

struct CircuitBlock {
    circuit::CircuitParams params;
    double omega_c = 1e14;
    circuit::DeltaConvention convention = circuit::DeltaConvention::omega10;
    double ej_ec_min_ratio = circuit::kDefaultEjEcRatio;
    std::optional<double> line_length;
    int n_modes = 0;
    std::optional<double> i_uw;
};

struct ModelBlock {
    std::optional<double> delta;
    double epsilon = 0.0;
    std::optional<double> alpha;
    double s = 1.0;
    double omega_c = 1e14;

    SpinBosonParams resolve() const {
        SpinBosonParams p;
        p.delta = delta.value_or(0.0);
        p.epsilon = epsilon;
        p.alpha = alpha.value_or(0.0);
        p.s = s;
        p.omega_c = omega_c;
        return p;
    }
};

struct SweepBlock {
    std::string parameter = "alpha"; // alpha | delta | epsilon
    std::vector<double> values;
};

struct CriticalBlock {
    double threshold = criticality::kDefaultThreshold;
    double phase_lo = criticality::kDelocalizedBelow;
    double phase_hi = criticality::kLocalizedAbove;
    double fit_window = numerics::kTolerances.fit_window;
};

struct OracleBlock {
    double delta = 0.0;
    double epsilon = 0.0;
    std::vector<oracle::Mode> modes;
    int n_max = 10;
    bool check_convergence = true;
    bool from_circuit = false;
};

struct RunConfig {
    Mode mode = Mode::run;
    std::optional<CircuitBlock> circuit;
    std::optional<ModelBlock> model;
    nrg::NrgConfig nrg;
    std::optional<SweepBlock> sweep;
    CriticalBlock critical;
    std::optional<OracleBlock> oracle;
    int chain_sites = 0; // chain mode; 0 selects nrg.star_modes()
    std::string output_dir = "./out";
    int workers = 1;
};

namespace detail {

// Reads an object, remembers which keys were consumed, and reports the
// leftovers as unknown keys.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path, bool strict) : j_(j), path_(std::move(path)), strict_(strict) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object, got " + j_.type_name());
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    std::optional<double> number(const std::string& key) {
        if (!has(key)) return std::nullopt;
        const json& v = raw(key);
        if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number, got " + v.type_name());
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(key_path(key) + ": must be finite");
        return x;
    }

    double number(const std::string& key, double def) { return number(key).value_or(def); }

    double required_number(const std::string& key) {
        auto v = number(key);
        if (!v) throw ConfigError(key_path(key) + ": required key missing");
        return *v;
    }

    std::optional<int> integer(const std::string& key) {
        if (!has(key)) return std::nullopt;
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer, got " + v.type_name());
        return v.get<int>();
    }

    int integer(const std::string& key, int def) { return integer(key).value_or(def); }

    std::optional<std::string> string(const std::string& key) {
        if (!has(key)) return std::nullopt;
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string, got " + v.type_name());
        return v.get<std::string>();
    }

    bool boolean(const std::string& key, bool def) {
        if (!has(key)) return def;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected a boolean, got " + v.type_name());
        return v.get<bool>();
    }

    void finish() const {
        if (!strict_) return;
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ConfigError(key_path(k) + ": unknown key");
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const json& j_;
    std::string path_;
    bool strict_;
    std::set<std::string> seen_;
};

inline CircuitBlock read_circuit(const json& j, bool strict) {
    ObjectReader r(j, "circuit", strict);
    CircuitBlock b;
    b.params.c_j = r.required_number("c_j");
    b.params.c_0 = r.required_number("c_0");
    b.params.i_0 = r.required_number("i_0");
    b.params.i_b = r.required_number("i_b");
    b.params.l = r.required_number("l");
    b.params.c = r.required_number("c");
    b.omega_c = r.number("omega_c", b.omega_c);
    if (auto s = r.string("delta_convention")) {
        try {
            b.convention = circuit::parse_delta_convention(*s);
        } catch (const InvalidArgument& e) {
            throw ConfigError(r.key_path("delta_convention") + ": " + e.what());
        }
    }
    b.ej_ec_min_ratio = r.number("ej_ec_min_ratio", b.ej_ec_min_ratio);
    b.line_length = r.number("line_length");
    b.n_modes = r.integer("n_modes", 0);
    b.i_uw = r.number("i_uw");
    r.finish();
    if ((b.line_length.has_value()) != (b.n_modes > 0))
        throw ConfigError("circuit: line_length and n_modes must be given together");
    return b;
}

inline ModelBlock read_model(const json& j, bool strict) {
    ObjectReader r(j, "model", strict);
    ModelBlock m;
    m.delta = r.number("delta");
    m.epsilon = r.number("epsilon", 0.0);
    m.alpha = r.number("alpha");
    m.s = r.number("s", 1.0);
    m.omega_c = r.number("omega_c", m.omega_c);
    r.finish();
    return m;
}

inline nrg::NrgConfig read_nrg(const json& j, bool strict) {
    ObjectReader r(j, "nrg", strict);
    nrg::NrgConfig c;
    c.lambda = r.number("lambda", c.lambda);
    c.n_s = r.integer("n_s", c.n_s);
    c.n_b = r.integer("n_b", c.n_b);
    if (auto s = r.string("n_b_meaning")) {
        try {
            c.n_b_meaning = nrg::parse_boson_basis(*s);
        } catch (const InvalidArgument& e) {
            throw ConfigError(r.key_path("n_b_meaning") + ": " + e.what());
        }
    }
    c.n_iter = r.integer("n_iter", c.n_iter);
    c.degeneracy_tol = r.number("degeneracy_tol", c.degeneracy_tol);
    c.epsilon_break = r.number("epsilon_break", c.epsilon_break);
    c.flow_levels = r.integer("flow_levels", c.flow_levels);
    c.n_star = r.integer("n_star", c.n_star);
    r.finish();
    return c;
}

// Grid {from, to, step} -> from + i * step for i = 0 .. floor((to - from) / step).
inline std::vector<double> expand_grid(double from, double to, double step, const std::string& path) {
    if (step == 0.0) throw ConfigError(path + ".step: must be non-zero");
    const double span = (to - from) / step;
    if (span < -1e-9) throw ConfigError(path + ": step points away from 'to'");
    const auto n = static_cast<long>(std::floor(span + 1e-9)) + 1;
    if (n > 100000) throw ConfigError(path + ": grid too large");
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) v.push_back(from + static_cast<double>(i) * step);
    return v;
}

inline SweepBlock read_sweep(const json& j, bool strict) {
    ObjectReader r(j, "sweep", strict);
    SweepBlock s;
    if (auto p = r.string("parameter")) s.parameter = *p;
    if (s.parameter != "alpha" && s.parameter != "delta" && s.parameter != "epsilon")
        throw ConfigError("sweep.parameter: expected alpha, delta or epsilon, got '" + s.parameter + "'");
    const bool has_grid = r.has("from") || r.has("to") || r.has("step");
    if (r.has("values")) {
        if (has_grid) throw ConfigError("sweep: give either values or from/to/step, not both");
        const json& v = r.raw("values");
        if (!v.is_array()) throw ConfigError("sweep.values: expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw ConfigError("sweep.values[" + std::to_string(i) + "]: expected a number");
            s.values.push_back(v[i].get<double>());
        }
    } else {
        const double from = r.required_number("from");
        const double to = r.required_number("to");
        const double step = r.required_number("step");
        s.values = expand_grid(from, to, step, "sweep");
    }
    r.finish();
    if (s.values.empty()) throw ConfigError("sweep: grid is empty");
    for (std::size_t i = 1; i < s.values.size(); ++i) {
        const bool up = s.values[1] > s.values[0];
        if (up ? !(s.values[i] > s.values[i - 1]) : !(s.values[i] < s.values[i - 1]))
            throw ConfigError("sweep: grid must be strictly monotone");
    }
    return s;
}

inline CriticalBlock read_critical(const json& j, bool strict) {
    ObjectReader r(j, "critical", strict);
    CriticalBlock c;
    c.threshold = r.number("threshold", c.threshold);
    c.phase_lo = r.number("phase_lo", c.phase_lo);
    c.phase_hi = r.number("phase_hi", c.phase_hi);
    c.fit_window = r.number("fit_window", c.fit_window);
    r.finish();
    if (!(c.threshold > 0.0)) throw ConfigError("critical.threshold: must be > 0");
    if (!(c.phase_lo <= c.phase_hi)) throw ConfigError("critical: phase_lo must not exceed phase_hi");
    if (!(c.fit_window > 0.0)) throw ConfigError("critical.fit_window: must be > 0");
    return c;
}

inline OracleBlock read_oracle(const json& j, bool strict) {
    ObjectReader r(j, "oracle", strict);
    OracleBlock o;
    o.delta = r.number("delta", 0.0);
    o.epsilon = r.number("epsilon", 0.0);
    o.n_max = r.integer("n_max", o.n_max);
    o.check_convergence = r.boolean("check_convergence", o.check_convergence);
    o.from_circuit = r.boolean("from_circuit", false);
    if (r.has("modes")) {
        const json& ms = r.raw("modes");
        if (!ms.is_array()) throw ConfigError("oracle.modes: expected an array");
        for (std::size_t i = 0; i < ms.size(); ++i) {
            ObjectReader mr(ms[i], "oracle.modes[" + std::to_string(i) + "]", strict);
            o.modes.push_back({mr.required_number("frequency"), mr.required_number("coupling")});
            mr.finish();
        }
    }
    r.finish();
    if (o.from_circuit && !o.modes.empty())
        throw ConfigError("oracle: give either modes or from_circuit, not both");
    return o;
}

} // namespace detail

// `expected` is the subcommand; a "mode" key in the file must agree with it.
inline RunConfig parse_config(const std::string& text, bool strict = true,
                              std::optional<Mode> expected = std::nullopt) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    detail::ObjectReader r(j, "", strict);
    RunConfig cfg;

    auto mode_text = r.string("mode");
    if (mode_text) cfg.mode = parse_mode(*mode_text);
    if (expected) {
        if (mode_text && cfg.mode != *expected)
            throw ConfigError("mode: config says '" + *mode_text + "' but subcommand is '" + to_string(*expected) + "'");
        cfg.mode = *expected;
    } else if (!mode_text) {
        throw ConfigError("mode: required key missing");
    }

    if (r.has("circuit")) cfg.circuit = detail::read_circuit(r.raw("circuit"), strict);
    if (r.has("model")) cfg.model = detail::read_model(r.raw("model"), strict);
    if (r.has("nrg")) cfg.nrg = detail::read_nrg(r.raw("nrg"), strict);
    if (r.has("sweep")) cfg.sweep = detail::read_sweep(r.raw("sweep"), strict);
    if (r.has("critical")) cfg.critical = detail::read_critical(r.raw("critical"), strict);
    if (r.has("oracle")) cfg.oracle = detail::read_oracle(r.raw("oracle"), strict);
    if (r.has("chain")) {
        detail::ObjectReader cr(r.raw("chain"), "chain", strict);
        cfg.chain_sites = cr.integer("n_star", 0);
        cr.finish();
        if (cfg.chain_sites < 0) throw ConfigError("chain.n_star: must be >= 0");
    }
    if (auto out = r.string("output_dir")) cfg.output_dir = *out;
    cfg.workers = r.integer("workers", cfg.workers);
    r.finish();

    if (cfg.workers < 1) throw ConfigError("workers: must be >= 1");
    try {
        cfg.nrg.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }

    auto need = [&](bool present, const char* block) {
        if (!present)
            throw ConfigError(std::string(block) + ": block required for mode '" + to_string(cfg.mode) + "'");
    };
    auto need_model_key = [&](const std::optional<double>& v, const char* key) {
        const bool swept = cfg.sweep && cfg.sweep->parameter == key;
        if (!v && !swept) throw ConfigError(std::string("model.") + key + ": required key missing");
    };

    switch (cfg.mode) {
    case Mode::map_circuit:
        need(cfg.circuit.has_value(), "circuit");
        break;
    case Mode::chain:
        need(cfg.model.has_value(), "model");
        break;
    case Mode::run:
        need(cfg.model.has_value(), "model");
        need_model_key(cfg.model->delta, "delta");
        need_model_key(cfg.model->alpha, "alpha");
        break;
    case Mode::sweep:
    case Mode::critical:
        need(cfg.model.has_value(), "model");
        need(cfg.sweep.has_value(), "sweep");
        need_model_key(cfg.model->delta, "delta");
        need_model_key(cfg.model->alpha, "alpha");
        if (cfg.mode == Mode::critical && cfg.sweep->parameter != "alpha")
            throw ConfigError("sweep.parameter: critical mode sweeps alpha");
        if (cfg.mode == Mode::critical && cfg.sweep->values.size() < 4)
            throw ConfigError("sweep: critical mode needs at least 4 alpha points");
        break;
    case Mode::oracle:
        need(cfg.oracle.has_value(), "oracle");
        if (cfg.oracle->from_circuit) {
            need(cfg.circuit.has_value(), "circuit");
            if (!cfg.circuit->line_length) throw ConfigError("circuit: line_length/n_modes required for oracle.from_circuit");
        }
        break;
    }
    if (cfg.model) {
        try {
            auto p = cfg.model->resolve();
            p.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    return cfg;
}

// Fully resolved configuration (defaults filled) as written to manifests.
inline json to_json(const RunConfig& c) {
    json j;
    j["mode"] = to_string(c.mode);
    if (c.circuit) {
        const auto& b = *c.circuit;
        json cj = {{"c_j", b.params.c_j}, {"c_0", b.params.c_0}, {"i_0", b.params.i_0},
                   {"i_b", b.params.i_b}, {"l", b.params.l},     {"c", b.params.c},
                   {"omega_c", b.omega_c}, {"delta_convention", circuit::to_string(b.convention)},
                   {"ej_ec_min_ratio", b.ej_ec_min_ratio}};
        if (b.line_length) {
            cj["line_length"] = *b.line_length;
            cj["n_modes"] = b.n_modes;
        }
        if (b.i_uw) cj["i_uw"] = *b.i_uw;
        j["circuit"] = cj;
    }
    if (c.model) {
        const auto& m = *c.model;
        json mj = {{"epsilon", m.epsilon}, {"s", m.s}, {"omega_c", m.omega_c}};
        if (m.delta) mj["delta"] = *m.delta;
        if (m.alpha) mj["alpha"] = *m.alpha;
        j["model"] = mj;
    }
    j["nrg"] = {{"lambda", c.nrg.lambda},
                {"n_s", c.nrg.n_s},
                {"n_b", c.nrg.n_b},
                {"n_b_meaning", nrg::to_string(c.nrg.n_b_meaning)},
                {"n_iter", c.nrg.n_iter},
                {"degeneracy_tol", c.nrg.degeneracy_tol},
                {"epsilon_break", c.nrg.epsilon_break},
                {"flow_levels", c.nrg.flow_levels},
                {"n_star", c.nrg.star_modes()}};
    if (c.sweep) j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
    j["critical"] = {{"threshold", c.critical.threshold},
                     {"phase_lo", c.critical.phase_lo},
                     {"phase_hi", c.critical.phase_hi},
                     {"fit_window", c.critical.fit_window}};
    if (c.oracle) {
        json modes = json::array();
        for (const auto& m : c.oracle->modes) modes.push_back({{"frequency", m.frequency}, {"coupling", m.coupling}});
        j["oracle"] = {{"delta", c.oracle->delta},       {"epsilon", c.oracle->epsilon},
                       {"n_max", c.oracle->n_max},       {"check_convergence", c.oracle->check_convergence},
                       {"from_circuit", c.oracle->from_circuit}, {"modes", modes}};
    }
    if (c.mode == Mode::chain) j["chain"] = {{"n_star", c.chain_sites > 0 ? c.chain_sites : c.nrg.star_modes()}};
    j["output_dir"] = c.output_dir;
    j["workers"] = c.workers;
    return j;
}

} // namespace sbnrg::cli
