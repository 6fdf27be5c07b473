#pragma once

// Pipeline dispatch for the CLI: every mode writes its data files into one
// output directory and finishes with manifest.json listing each of them with
// a SHA-256 digest. Failures are recorded in the manifest, never thrown.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <openssl/evp.h>

#include "sbnrg/bath.hpp"
#include "sbnrg/circuit.hpp"
#include "sbnrg/cli/config.hpp"
#include "sbnrg/criticality.hpp"
#include "sbnrg/nrg.hpp"
#include "sbnrg/oracle.hpp"

namespace sbnrg::cli {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kManifestName = "manifest.json";
inline constexpr std::size_t kOracleSpectrumLevels = 100;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FileEntry {
    std::string path; // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    json config;
    std::string version = kToolVersion;
    std::string started;
    std::string finished;
    std::string status = "ok";
    int exit_code = kExitOk;
    std::string failure_stage;
    std::string failure_message;
    std::vector<FileEntry> files;
    std::vector<std::string> warnings;

    json to_json() const {
        json files_j = json::array();
        for (const auto& f : files) files_j.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
        // the manifest cannot carry its own digest
        files_j.push_back({{"path", kManifestName}, {"sha256", nullptr}, {"bytes", nullptr}});
        json j = {{"tool", "sbnrg"},
                  {"version", version},
                  {"started", started},
                  {"finished", finished},
                  {"status", status},
                  {"exit_code", exit_code},
                  {"config", config},
                  {"files", files_j},
                  {"warnings", warnings}};
        if (status != "ok") j["failure"] = {{"stage", failure_stage}, {"message", failure_message}};
        return j;
    }
};

namespace detail {

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

inline std::string num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

// Output directory with cleanup of the previous run's files and bookkeeping
// of everything written since.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {}

    void prepare() {
        namespace fs = std::filesystem;
        std::error_code ec;
        fs::create_directories(root_, ec);
        if (ec || !fs::is_directory(root_))
            throw IoError("output directory '" + root_.string() + "' cannot be created");

        std::set<std::string> owned;
        const fs::path manifest = root_ / kManifestName;
        if (fs::exists(manifest)) {
            owned.insert(kManifestName);
            try {
                std::ifstream in(manifest);
                const json old = json::parse(in);
                for (const auto& f : old.at("files")) owned.insert(f.at("path").get<std::string>());
            } catch (const std::exception&) {
                throw IoError("output directory '" + root_.string() + "' holds an unreadable manifest.json");
            }
        }
        for (const auto& entry : fs::directory_iterator(root_)) {
            const std::string name = entry.path().filename().string();
            if (!owned.count(name))
                throw IoError("output directory '" + root_.string() + "' contains '" + name +
                              "', which no previous manifest lists; refusing to mix runs");
        }
        for (const auto& name : owned) {
            fs::remove(root_ / name, ec);
            if (ec) throw IoError("cannot remove stale output '" + name + "'");
        }
    }

    void write(const std::string& name, const std::string& content) {
        const auto path = root_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
        out << content;
        out.close();
        if (!out) throw IoError("write to '" + path.string() + "' failed");
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    const std::vector<FileEntry>& files() const { return files_; }

private:
    std::filesystem::path root_;
    std::vector<FileEntry> files_;
};

inline std::string flow_csv(const nrg::NrgFlow& flow) {
    std::string s = "iteration,level_index,scaled_energy\n";
    for (const auto& r : flow)
        for (std::size_t k = 0; k < r.levels.size(); ++k)
            s += std::to_string(r.iteration) + "," + std::to_string(k) + "," + num(r.levels[k]) + "\n";
    return s;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string indexed(const char* stem, std::size_t i) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s_%03zu.csv", stem, i);
    return buf;
}

// Runs task(i) for i in [0, n) on `workers` threads. Results are stored by
// index; the first failure in grid order is rethrown after all threads join.
template <class T, class F>
std::vector<std::optional<T>> parallel_map(std::size_t n, int workers, F task,
                                           std::vector<std::exception_ptr>& errors) {
    std::vector<std::optional<T>> out(n);
    errors.assign(n, nullptr);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                out[i] = task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto nt = static_cast<std::size_t>(std::max(1, workers));
    if (nt == 1 || n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(nt, n); ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

struct Stage {
    std::string name;
};

inline void run_map_circuit(const RunConfig& cfg, OutputDir& out, RunManifest& man, Stage& stage) {
    const auto& cb = *cfg.circuit;
    stage.name = "map-circuit";
    const auto m = circuit::map_to_spin_boson(cb.params, cb.omega_c, cb.convention, cb.ej_ec_min_ratio);
    const auto& q = m.spectrum;
    json j = {{"spectrum",
               {{"omega_p", q.omega_p},
                {"omega_10", q.omega_10},
                {"barrier", q.barrier},
                {"barrier_ratio", q.barrier_ratio},
                {"tunneling_energy", q.tunneling_energy(cb.convention)},
                {"e_j", q.e_j},
                {"e_c", q.e_c},
                {"phase_regime_ok", q.phase_regime_ok}}},
              {"spin_boson",
               {{"alpha", m.params.alpha},
                {"delta", m.params.delta},
                {"epsilon", m.params.epsilon},
                {"s", m.params.s},
                {"omega_c", m.params.omega_c},
                {"delta_convention", circuit::to_string(cb.convention)}}}};
    if (cb.i_uw) {
        const double bias = circuit::microwave_bias(cb.params, *cb.i_uw);
        j["microwave_bias"] = {{"i_uw", *cb.i_uw},
                               {"epsilon_joule", bias},
                               {"epsilon", bias / (circuit::PhysicalConstants::h_bar * cb.omega_c)}};
    }
    for (const auto& w : m.warnings) man.warnings.push_back(w);
    out.write("circuit.json", dump(j));

    if (cb.line_length) {
        stage.name = "map-circuit/modes";
        const auto lm = circuit::finite_line_modes(cb.params, *cb.line_length, cb.n_modes, cb.convention);
        std::string s = "n,omega,lambda\n";
        for (std::size_t i = 0; i < lm.modes.size(); ++i)
            s += std::to_string(i + 1) + "," + num(lm.modes[i].omega) + "," + num(lm.modes[i].lambda) + "\n";
        out.write("modes.csv", s);
    }
}

inline void run_chain(const RunConfig& cfg, OutputDir& out, Stage& stage) {
    const auto p = cfg.model->resolve();
    const int n_star = cfg.chain_sites > 0 ? cfg.chain_sites : cfg.nrg.star_modes();
    stage.name = "chain/discretize";
    const auto star = bath::discretize(p, cfg.nrg.lambda, n_star);
    stage.name = "chain/lanczos";
    const auto chain = bath::chain_map(star);
    std::string s = "n,xi,gamma,eps,t\n";
    for (std::size_t n = 0; n < star.modes.size(); ++n) {
        s += std::to_string(n) + "," + num(star.modes[n].xi) + "," + num(star.modes[n].gamma) + ",";
        if (n < chain.eps.size()) s += num(chain.eps[n]);
        s += ",";
        if (n < chain.t.size()) s += num(chain.t[n]);
        s += "\n";
    }
    out.write("chain.csv", s);
    out.write("chain.json", dump({{"c0", chain.c0},
                                  {"coupling_sum", star.coupling_sum()},
                                  {"sites", chain.size()},
                                  {"precision_digits", bath::chain_precision_digits(star)},
                                  {"digest", nrg::detail::digest(chain)}}));
}

inline void run_single(const RunConfig& cfg, OutputDir& out, RunManifest& man, Stage& stage) {
    const auto p = cfg.model->resolve();
    stage.name = "run/chain";
    const auto chain = nrg::make_chain(p, cfg.nrg);
    stage.name = "run/nrg";
    const auto r = nrg::run(p, cfg.nrg, chain);
    for (const auto& w : r.warnings) man.warnings.push_back(w);
    if (r.stopped_early) man.warnings.push_back("NRG stopped early after " + std::to_string(r.iterations) + " iterations");
    out.write("flow.csv", flow_csv(r.flow));
    out.write("observables.json",
              dump({{"sigma_z", r.sigma_z_gs}, {"sigma_x", r.sigma_x_gs}, {"delta_p", r.delta_p}}));
}

struct PointResult {
    SpinBosonParams params;
    nrg::NrgResult nrg;
    std::optional<double> n_star;
    std::string n_star_note;
};

inline SpinBosonParams point_params(const RunConfig& cfg, double value) {
    auto p = cfg.model->resolve();
    const auto& par = cfg.sweep->parameter;
    if (par == "alpha") p.alpha = value;
    else if (par == "delta") p.delta = value;
    else p.epsilon = value;
    return p;
}

// Shared by sweep and critical: all points on one alpha-independent chain
// geometry, executed in parallel, flows written in grid order.
inline std::vector<PointResult> run_points(const RunConfig& cfg, OutputDir& out, RunManifest& man, Stage& stage) {
    const auto& values = cfg.sweep->values;
    stage.name = "sweep/chain";
    for (double v : values) point_params(cfg, v).validate();
    const auto base = cfg.model->resolve();
    const int n_star = std::max(cfg.nrg.star_modes(), cfg.nrg.n_iter + 5);
    const auto geometry = bath::chain_geometry(base.s, cfg.nrg.lambda, n_star);

    std::vector<std::exception_ptr> errors;
    auto results = parallel_map<PointResult>(
        values.size(), cfg.workers,
        [&](std::size_t i) {
            PointResult pr;
            pr.params = point_params(cfg, values[i]);
            pr.nrg = nrg::run(pr.params, cfg.nrg, bath::with_alpha(geometry, pr.params.alpha));
            try {
                pr.n_star = criticality::extract_nstar(pr.nrg.flow, cfg.critical.threshold);
            } catch (const criticality::NoCrossing& e) {
                pr.n_star_note = e.what();
            }
            return pr;
        },
        errors);

    std::vector<PointResult> done;
    for (std::size_t i = 0; i < values.size(); ++i) {
        stage.name = "sweep/point " + std::to_string(i) + " (" + cfg.sweep->parameter + " = " + num(values[i]) + ")";
        if (errors[i]) std::rethrow_exception(errors[i]);
        auto& pr = *results[i];
        out.write(indexed("flow", i), flow_csv(pr.nrg.flow));
        for (const auto& w : pr.nrg.warnings) man.warnings.push_back("point " + std::to_string(i) + ": " + w);
        if (!pr.n_star)
            man.warnings.push_back("point " + std::to_string(i) + ": no N* crossing; " + pr.n_star_note);
        done.push_back(std::move(pr));
    }
    return done;
}

inline void run_sweep(const RunConfig& cfg, OutputDir& out, RunManifest& man, Stage& stage) {
    const auto pts = run_points(cfg, out, man, stage);
    stage.name = "sweep/merge";
    std::string s = "alpha,delta,epsilon,n_star,delta_p,phase\n";
    for (const auto& pr : pts) {
        const auto ph = criticality::classify_phase(pr.nrg.delta_p, cfg.critical.phase_lo, cfg.critical.phase_hi);
        s += num(pr.params.alpha) + "," + num(pr.params.delta) + "," + num(pr.params.epsilon) + "," +
             num(pr.n_star.value_or(std::nan(""))) + "," + num(pr.nrg.delta_p) + "," + criticality::to_string(ph.label) +
             "\n";
    }
    out.write("sweep.csv", s);
}

inline void run_critical(const RunConfig& cfg, OutputDir& out, RunManifest& man, Stage& stage) {
    const auto pts = run_points(cfg, out, man, stage);
    stage.name = "critical/points";
    std::vector<criticality::CrossoverPoint> cps;
    std::string s = "alpha,n_star\n";
    for (const auto& pr : pts) {
        if (!pr.n_star) continue;
        cps.push_back({pr.params.alpha, *pr.n_star, cfg.critical.threshold});
        s += num(pr.params.alpha) + "," + num(*pr.n_star) + "\n";
    }
    out.write("points.csv", s);
    stage.name = "critical/fit";
    if (cps.size() < 4)
        throw NumericalError("only " + std::to_string(cps.size()) + " points crossed the threshold; the fit needs 4");
    numerics::Tolerances tol;
    tol.fit_window = cfg.critical.fit_window;
    const auto fit = criticality::fit_alpha_c(cps, tol);
    out.write("fit.json", dump({{"a", fit.a}, {"b", fit.b}, {"alpha_c", fit.alpha_c}, {"rss", fit.rss}}));
}

inline void run_oracle(const RunConfig& cfg, OutputDir& out, Stage& stage) {
    const auto& ob = *cfg.oracle;
    oracle::EdProblem prob;
    prob.delta = ob.delta;
    prob.epsilon = ob.epsilon;
    prob.n_max = ob.n_max;
    prob.check_convergence = ob.check_convergence;
    prob.modes = ob.modes;
    if (ob.from_circuit) {
        stage.name = "oracle/circuit";
        const auto& cb = *cfg.circuit;
        const auto q = circuit::qubit_spectrum(cb.params, cb.ej_ec_min_ratio);
        const auto lm = circuit::finite_line_modes(cb.params, *cb.line_length, cb.n_modes, cb.convention);
        prob.modes.clear();
        for (const auto& m : circuit::to_reduced(lm, cb.omega_c)) prob.modes.push_back({m.frequency, m.coupling});
        prob.delta = q.tunneling_energy(cb.convention) / (circuit::PhysicalConstants::h_bar * cb.omega_c);
    }
    stage.name = "oracle/exact_diag";
    const auto r = oracle::exact_diag(prob);
    const std::size_t nlev = std::min(r.spectrum.size(), kOracleSpectrumLevels);
    json j = {{"ground_energy", r.ground_energy},
              {"gap", r.gap},
              {"sigma_z", r.sigma_z},
              {"sigma_x", r.sigma_x},
              {"converged", r.converged},
              {"dimension", r.spectrum.size()},
              {"spectrum", std::vector<double>(r.spectrum.begin(), r.spectrum.begin() + static_cast<std::ptrdiff_t>(nlev))}};
    out.write("oracle.json", dump(j));
}

} // namespace detail

// Runs cfg.mode into cfg.output_dir. Never throws for pipeline failures: the
// returned manifest carries status, exit code and failure point, and is
// written to disk whenever the directory is usable.
inline RunManifest execute(const RunConfig& cfg) {
    RunManifest man;
    man.config = to_json(cfg);
    man.started = detail::utc_now();
    detail::OutputDir out(cfg.output_dir);
    detail::Stage stage{"prepare"};

    auto fail = [&](int code, const std::string& msg) {
        man.status = "failed";
        man.exit_code = code;
        man.failure_stage = stage.name;
        man.failure_message = msg;
    };

    bool dir_ready = false;
    try {
        out.prepare();
        dir_ready = true;
        switch (cfg.mode) {
        case Mode::map_circuit: detail::run_map_circuit(cfg, out, man, stage); break;
        case Mode::chain: detail::run_chain(cfg, out, stage); break;
        case Mode::run: detail::run_single(cfg, out, man, stage); break;
        case Mode::sweep: detail::run_sweep(cfg, out, man, stage); break;
        case Mode::critical: detail::run_critical(cfg, out, man, stage); break;
        case Mode::oracle: detail::run_oracle(cfg, out, stage); break;
        }
    } catch (const IoError& e) {
        fail(kExitIo, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        fail(kExitIo, e.what());
    } catch (const InvalidArgument& e) {
        fail(kExitConfig, e.what());
    } catch (const NumericalError& e) {
        fail(kExitNumerical, e.what());
    } catch (const std::exception& e) {
        fail(kExitNumerical, e.what());
    }
    man.files = out.files();
    man.finished = detail::utc_now();
    if (dir_ready) {
        try {
            const std::string text = detail::dump(man.to_json());
            std::ofstream f(std::filesystem::path(cfg.output_dir) / kManifestName, std::ios::binary | std::ios::trunc);
            f << text;
            f.close();
            if (!f) throw IoError("manifest write failed");
        } catch (const std::exception& e) {
            if (man.exit_code == kExitOk) fail(kExitIo, e.what());
        }
    }
    return man;
}

} // namespace sbnrg::cli
