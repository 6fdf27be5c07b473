// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance <scratch dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sbnrg/bath.hpp"
#include "sbnrg/circuit.hpp"
#include "sbnrg/cli/config.hpp"
#include "sbnrg/cli/execute.hpp"
#include "sbnrg/criticality.hpp"
#include "sbnrg/nrg.hpp"
#include "sbnrg/oracle.hpp"

using namespace sbnrg;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path g_root;
int g_failed = 0;
// filled by criterion 5, consumed by 6
double g_alpha_c = std::nan("");
// (config, output dir) of every pipeline run, replayed by criterion 8
std::vector<std::pair<json, fs::path>> g_runs;

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
    void note(const std::string& s) {
        if (!detail.empty()) detail += "; ";
        detail += s;
    }
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.note(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) o.check(false, "runtime " + fmt("%.1f", secs) + " s over budget " + fmt("%.0f", budget_s) + " s");
    if (!o.pass) ++g_failed;
    std::printf("criterion %d %s: %s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL", title, secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs a pipeline through the CLI executor; returns the output dir.
fs::path run_pipeline(const json& config, const std::string& name, int workers) {
    auto cfg = cli::parse_config(config.dump());
    cfg.output_dir = (g_root / name).string();
    cfg.workers = workers;
    fs::remove_all(cfg.output_dir);
    const auto man = cli::execute(cfg);
    if (man.exit_code != cli::kExitOk)
        throw std::runtime_error(name + ": exit " + std::to_string(man.exit_code) + " at " + man.failure_stage + ": " +
                                 man.failure_message);
    g_runs.emplace_back(config, cfg.output_dir);
    return cfg.output_dir;
}

// sweep.csv rows: alpha -> (n_star, delta_p)
struct SweepRow {
    double alpha, n_star, delta_p;
};

std::vector<SweepRow> read_sweep(const fs::path& dir) {
    std::ifstream in(dir / "sweep.csv");
    std::string line;
    std::getline(in, line);
    std::vector<SweepRow> rows;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        rows.push_back({std::stod(f[0]), std::stod(f[3]), std::stod(f[4])});
    }
    return rows;
}

// flow CSV is long format: iteration,level_index,scaled_energy
nrg::NrgFlow read_flow(const fs::path& file) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    nrg::NrgFlow flow;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string it, idx, e;
        std::getline(ss, it, ',');
        std::getline(ss, idx, ',');
        std::getline(ss, e, ',');
        if (flow.empty() || flow.back().iteration != std::stoi(it)) flow.push_back({std::stoi(it), 0, {}});
        flow.back().levels.push_back(std::stod(e));
        ++flow.back().kept_count;
    }
    return flow;
}

Outcome decoupled_limit() {
    Outcome o;
    double worst_gap = 0.0, worst_dp = 0.0;
    for (double delta : {1e-5, 1e-4, 1e-3, 1e-2}) {
        SpinBosonParams p;
        p.delta = delta;
        nrg::NrgConfig cfg;
        cfg.flow_levels = 0;
        // down to the scale Delta; below it the excited spin level is truncated away
        cfg.n_iter = static_cast<int>(std::ceil(std::log(1.0 / delta) / std::log(cfg.lambda))) + 1;
        const auto r = nrg::run(p, cfg);
        for (const auto& rec : r.flow) {
            const double scale = std::pow(cfg.lambda, -rec.iteration);
            double best = INFINITY;
            for (double e : rec.levels) best = std::min(best, std::abs(scale * e - delta) / delta);
            worst_gap = std::max(worst_gap, best);
        }
        worst_dp = std::max(worst_dp, r.delta_p);
    }
    o.check(worst_gap <= 1e-8, "Delta missing from a spectrum");
    o.check(worst_dp <= 1e-10, "delta P nonzero");
    o.note("max rel gap error " + fmt("%.2e", worst_gap) + ", max delta P " + fmt("%.2e", worst_dp));
    return o;
}

Outcome oracle_equivalence() {
    Outcome o;
    struct Case {
        std::vector<bath::StarMode> modes;
        int n_b;
    };
    const std::vector<Case> cases{{{{1.0, 0.15}, {0.4, 0.1}}, 14}, {{{1.0, 0.15}, {0.5, 0.1}, {0.25, 0.06}}, 10}};
    double worst_e = 0.0, worst_z = 0.0;
    for (const auto& c : cases)
        for (double eps : {0.0, 0.05}) {
            bath::StarBath star;
            star.modes = c.modes;
            const auto chain = bath::chain_map(star);
            SpinBosonParams p;
            p.delta = 0.3;
            p.epsilon = eps;
            nrg::NrgConfig cfg;
            cfg.n_b = c.n_b;
            cfg.n_s = 2 * static_cast<int>(std::pow(c.n_b, c.modes.size())); // full dimension
            cfg.n_iter = static_cast<int>(c.modes.size());
            cfg.flow_levels = 0;
            const auto r = nrg::run(p, cfg, chain);

            oracle::EdProblem ed;
            ed.delta = p.delta;
            ed.epsilon = eps;
            for (const auto& m : c.modes) ed.modes.push_back({m.xi, m.gamma});
            ed.n_max = c.n_b - 1; // matched cutoff
            ed.check_convergence = false;
            const auto x = oracle::exact_diag(ed);

            // the two Fock truncations differ (chain vs star modes), so only
            // the low-lying levels, converged in both cutoffs, are comparable
            const auto& last = r.flow.back();
            const double scale = std::pow(cfg.lambda, -last.iteration);
            for (std::size_t i = 0; i < 8; ++i)
                worst_e = std::max(worst_e, std::abs(scale * last.levels[i] + r.ground_energy - x.spectrum[i]));
            worst_z = std::max(worst_z, std::abs(r.sigma_z_gs - x.sigma_z));
        }
    o.check(worst_e <= 1e-9, "spectrum mismatch");
    o.check(worst_z <= 1e-6, "sigma_z mismatch");
    o.note("max level error " + fmt("%.2e", worst_e) + ", max sigma_z error " + fmt("%.2e", worst_z));
    return o;
}

Outcome chain_fidelity() {
    Outcome o;
    SpinBosonParams p;
    p.alpha = 1.0;
    const auto star = bath::discretize(p, 2.0, 40);
    const auto chain = bath::chain_map(star);
    const auto n = static_cast<Eigen::Index>(chain.size());
    Eigen::VectorXd d(n), e(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = chain.eps[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 0; i + 1 < n; ++i) e(i) = chain.t[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    std::vector<double> xi;
    for (const auto& m : star.modes) xi.push_back(m.xi);
    std::sort(xi.begin(), xi.end());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(es.eigenvalues()(i) - xi[static_cast<std::size_t>(i)]));
    const double c0_err = std::abs(chain.c0 * chain.c0 - star.coupling_sum());

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int lo = 10, hi = 35;
    for (int k = lo; k <= hi; ++k) {
        const double y = -std::log(chain.t[static_cast<std::size_t>(k)]);
        sx += k;
        sy += y;
        sxx += double(k) * k;
        sxy += k * y;
    }
    const int m = hi - lo + 1;
    const double rate = (m * sxy - sx * sy) / (m * sxx - sx * sx) / std::log(2.0);

    o.check(worst <= 1e-9, "eigenvalues off");
    o.check(c0_err <= 1e-10, "c0^2 off");
    o.check(std::abs(rate - 1.0) <= 0.02, "decay rate off");
    o.note("eig error " + fmt("%.2e", worst) + ", c0^2 error " + fmt("%.2e", c0_err) + ", rate/ln2 " + fmt("%.4f", rate));
    return o;
}

json critical_config() {
    return {{"mode", "critical"},
            {"model", {{"delta", 3e-5}, {"epsilon", 0.0}}},
            {"nrg", {{"lambda", 2.0}, {"n_s", 100}, {"n_b", 6}, {"n_iter", 100}}},
            {"sweep", {{"parameter", "alpha"}, {"values", {0.50, 0.55, 0.60, 0.65, 0.70, 0.75}}}},
            {"critical", {{"threshold", 0.3}}}};
}

fs::path g_critical_dir;

Outcome nstar_sequence() {
    Outcome o;
    g_critical_dir = run_pipeline(critical_config(), "critical", 1);
    std::ifstream in(g_critical_dir / "points.csv");
    std::string line;
    std::getline(in, line);
    std::vector<double> nstar;
    while (std::getline(in, line)) nstar.push_back(std::stod(line.substr(line.find(',') + 1)));
    o.check(nstar.size() == 6, "only " + std::to_string(nstar.size()) + " of 6 flows crossed");
    for (std::size_t i = 1; i < nstar.size(); ++i) o.check(nstar[i] > nstar[i - 1], "N* not increasing at " + std::to_string(i));
    std::string crossings;
    for (std::size_t i = 0; i < 6; ++i) {
        const int c = criticality::count_crossings(read_flow(g_critical_dir / cli::detail::indexed("flow", i)));
        o.check(c == 1, "flow " + std::to_string(i) + " crosses " + std::to_string(c) + " times");
        crossings += (i ? "," : "") + std::to_string(c);
    }
    std::string seq;
    for (double v : nstar) seq += (seq.empty() ? "" : ",") + fmt("%.2f", v);
    o.note("N* = [" + seq + "], crossings = [" + crossings + "]");
    return o;
}

Outcome alpha_c_fit() {
    Outcome o;
    if (g_critical_dir.empty() || !fs::exists(g_critical_dir / "fit.json")) {
        o.check(false, "no fit from the criterion 4 sweep");
        return o;
    }
    const auto fit = json::parse(slurp(g_critical_dir / "fit.json"));
    g_alpha_c = fit.at("alpha_c").get<double>();
    o.check(g_alpha_c >= 0.95 && g_alpha_c <= 1.25, "alpha_c outside [0.95, 1.25]");
    o.note("alpha_c = " + fmt("%.4f", g_alpha_c) + " (b = " + fmt("%.3f", fit.at("b").get<double>()) + ")");
    return o;
}

const std::vector<double> kStepFractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 0.9, 1.5, 2.0};
const std::vector<double> kStepBias{1e-7, 1e-6, 1e-5};

Outcome delta_p_step() {
    Outcome o;
    if (!std::isfinite(g_alpha_c)) {
        o.check(false, "needs alpha_c from criterion 5");
        return o;
    }
    std::vector<double> alphas;
    for (double f : kStepFractions) alphas.push_back(f * g_alpha_c);
    std::vector<std::vector<SweepRow>> by_eps;
    for (std::size_t k = 0; k < kStepBias.size(); ++k) {
        const json cfg = {{"mode", "sweep"},
                          {"model", {{"delta", 1e-4}, {"epsilon", kStepBias[k]}}},
                          {"nrg", {{"lambda", 2.0}, {"n_s", 100}, {"n_b", 6}, {"n_iter", 100}}},
                          {"sweep", {{"parameter", "alpha"}, {"values", alphas}}}};
        by_eps.push_back(read_sweep(run_pipeline(cfg, "step_eps" + std::to_string(k), 1)));
    }
    for (std::size_t k = 0; k < kStepBias.size(); ++k) {
        std::string row;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            const double dp = by_eps[k][i].delta_p;
            row += (i ? "," : "") + fmt("%.3f", dp);
            if (kStepFractions[i] <= 0.5 && !(dp < 0.05))
                o.check(false, "eps " + fmt("%.0e", kStepBias[k]) + " alpha " + fmt("%.3f", alphas[i]) + ": dP " +
                                   fmt("%.3f", dp) + " >= 0.05");
            if (kStepFractions[i] >= 1.5 && !(dp > 0.45))
                o.check(false, "eps " + fmt("%.0e", kStepBias[k]) + " alpha " + fmt("%.3f", alphas[i]) + ": dP " +
                                   fmt("%.3f", dp) + " <= 0.45");
        }
        o.note("eps " + fmt("%.0e", kStepBias[k]) + " dP = [" + row + "]");
    }
    // roundoff-level slack only
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (kStepFractions[i] >= 1.0) continue;
        for (std::size_t k = 1; k < kStepBias.size(); ++k)
            if (by_eps[k][i].delta_p < by_eps[k - 1][i].delta_p - 1e-9)
                o.check(false, "dP decreases with eps at alpha " + fmt("%.3f", alphas[i]));
    }
    o.note("alpha fractions of alpha_c: 0.1,0.2,0.3,0.4,0.5,0.75,0.9,1.5,2.0");
    return o;
}

Outcome circuit_mapping() {
    Outcome o;
    constexpr double i0 = 2e-6, cj = 0.85e-12;
    const auto alpha_at = [&](double ratio) {
        circuit::CircuitParams c;
        c.c_j = cj;
        c.c_0 = 5.0 * cj;
        c.i_0 = i0;
        c.i_b = ratio * i0;
        c.c = 1.6e-10;
        c.l = 50.0 * 50.0 * c.c; // z = 50 ohm
        return circuit::map_to_spin_boson(c, 1e14, circuit::DeltaConvention::half_omega_p).params.alpha;
    };
    // strictly decreasing and continuous: on nested grids the largest step
    // between neighbours shrinks with the spacing
    const auto max_jump = [&](int n, bool& decreasing) {
        double prev = alpha_at(0.5), jump = 0.0;
        for (int i = 1; i <= n; ++i) {
            const double a = alpha_at(0.5 + (0.999 - 0.5) * i / n);
            if (!(a < prev)) decreasing = false;
            jump = std::max(jump, prev - a);
            prev = a;
        }
        return jump;
    };
    bool decreasing = true;
    const double j1 = max_jump(500, decreasing);
    const double j2 = max_jump(4000, decreasing);
    o.check(decreasing, "alpha not strictly decreasing");
    o.check(j2 < 0.25 * j1, "jumps do not shrink under refinement");
    double edge = alpha_at(0.999);
    for (double r : {1.0 - 1e-6, 1.0 - 1e-10, 1.0 - 1e-14}) {
        const double a = alpha_at(r);
        o.check(a < edge, "alpha not decreasing toward I_0");
        edge = a;
    }
    o.check(edge < 0.01, "alpha does not vanish at I_0");
    const double a09 = alpha_at(0.9);
    o.check(a09 > 0.2, "alpha(0.9 I_0) <= 0.2");
    o.note("alpha(0.9 I0) = " + fmt("%.4f", a09) + ", alpha(I0 - 1e-14) = " + fmt("%.2e", edge) + ", jumps " +
           fmt("%.2e", j1) + " -> " + fmt("%.2e", j2));
    return o;
}

std::map<std::string, std::string> data_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().filename() != cli::kManifestName) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

Outcome determinism() {
    Outcome o;
    // the small pipelines join the replay list here
    run_pipeline({{"mode", "map-circuit"},
                  {"circuit", {{"c_j", 0.85e-12}, {"c_0", 4.25e-12}, {"i_0", 2e-6}, {"i_b", 1.96e-6}, {"l", 4e-7}, {"c", 1.6e-10},
                               {"line_length", 0.03}, {"n_modes", 4}}}},
                 "map", 1);
    run_pipeline({{"mode", "chain"}, {"model", {{"alpha", 0.6}}}, {"chain", {{"n_star", 60}}}}, "chain", 1);
    run_pipeline({{"mode", "oracle"},
                  {"oracle", {{"delta", 0.3}, {"epsilon", 0.05}, {"n_max", 12},
                              {"modes", {{{"frequency", 1.0}, {"coupling", 0.15}}, {{"frequency", 0.4}, {"coupling", 0.1}}}}}}},
                 "oracle", 1);
    run_pipeline({{"mode", "run"}, {"model", {{"delta", 1e-4}, {"alpha", 0.4}, {"epsilon", 1e-6}}}}, "single", 1);

    const auto runs = g_runs;
    std::size_t files = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& [config, dir] = runs[i];
        const auto first = data_files(dir);
        const auto again = run_pipeline(config, "replay_" + std::to_string(i), 3);
        const auto second = data_files(again);
        files += first.size();
        if (first != second) o.check(false, dir.filename().string() + " differs on replay with 3 workers");
    }
    o.note(std::to_string(runs.size()) + " pipelines, " + std::to_string(files) + " data files compared");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    g_root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "sbnrg_acceptance";
    fs::create_directories(g_root);

    criterion(1, "decoupled-limit exactness", 10, decoupled_limit);
    criterion(2, "oracle equivalence", 30, oracle_equivalence);
    criterion(3, "chain-mapping fidelity", 5, chain_fidelity);
    criterion(4, "N* crossover sequence", 15 * 60, nstar_sequence);
    criterion(5, "alpha_c extrapolation", 30 * 60, alpha_c_fit);
    criterion(6, "delta P step", 20 * 60, delta_p_step);
    criterion(7, "circuit-mapping properties", 1, circuit_mapping);
    // replays everything above; its budget is theirs
    criterion(8, "determinism", 1e9, determinism);

    std::printf("%d of 8 criteria failed\n", g_failed);
    return g_failed == 0 ? 0 : 1;
}
