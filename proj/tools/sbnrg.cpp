// sbnrg: circuit mapping, Wilson chains, NRG runs, sweeps, alpha_c fits and
// exact-diagonalization checks driven by a JSON config.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "sbnrg/cli/config.hpp"
#include "sbnrg/cli/execute.hpp"

namespace {

using namespace sbnrg::cli;

struct Flags {
    std::string config;
    std::string out = "./out";
    int workers = 1;
    bool strict = true;
};

int dispatch(Mode mode, const Flags& flags, bool out_given, bool workers_given) {
    std::ifstream in(flags.config, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read config '" << flags.config << "'\n";
        return kExitIo;
    }
    std::stringstream ss;
    ss << in.rdbuf();

    RunConfig cfg;
    try {
        cfg = parse_config(ss.str(), flags.strict, mode);
    } catch (const sbnrg::InvalidArgument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    // explicit flags win over the file; the file wins over flag defaults
    if (out_given) cfg.output_dir = flags.out;
    if (workers_given) cfg.workers = flags.workers;
    if (cfg.workers < 1) {
        std::cerr << "config error: --workers must be >= 1\n";
        return kExitConfig;
    }

    const auto man = execute(cfg);
    for (const auto& w : man.warnings) std::cerr << "warning: " << w << "\n";
    if (man.exit_code != kExitOk) {
        std::cerr << "error [" << man.failure_stage << "]: " << man.failure_message << "\n";
        return man.exit_code;
    }
    std::cout << to_string(cfg.mode) << ": wrote " << man.files.size() + 1 << " files to " << cfg.output_dir << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin-boson NRG for phase qubits coupled to a transmission line"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Flags flags;
    const Mode modes[] = {Mode::map_circuit, Mode::chain, Mode::run, Mode::sweep, Mode::critical, Mode::oracle};
    const char* help[] = {"map circuit parameters to spin-boson parameters",
                          "dump the star discretization and Wilson chain",
                          "single NRG run: level flow and ground-state observables",
                          "NRG over a parameter grid",
                          "alpha sweep, N* extraction and alpha_c fit",
                          "exact diagonalization of a spin coupled to a few modes"};
    struct Sub {
        CLI::App* app;
        CLI::Option* out;
        CLI::Option* workers;
    };
    std::vector<Sub> subs;
    for (int i = 0; i < 6; ++i) {
        auto* sub = app.add_subcommand(to_string(modes[i]), help[i]);
        sub->add_option("--config", flags.config, "JSON config file")->required();
        auto* out = sub->add_option("--out", flags.out, "output directory")->capture_default_str();
        auto* workers = sub->add_option("--workers", flags.workers, "sweep worker threads")->capture_default_str();
        sub->add_flag("--strict,!--no-strict", flags.strict, "reject unknown config keys")->capture_default_str();
        subs.push_back({sub, out, workers});
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    for (int i = 0; i < 6; ++i)
        if (subs[i].app->parsed())
            return dispatch(modes[i], flags, subs[i].out->count() > 0, subs[i].workers->count() > 0);
    return kExitConfig;
}
