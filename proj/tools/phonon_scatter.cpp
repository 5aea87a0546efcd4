#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "phonon/errors.hpp"
#include "phonon/harness.hpp"

namespace h = phonon::harness;

int main(int argc, char** argv) {
    CLI::App app{"Harmonic chain with a thermostatted site: scattering coefficients, kinetic limit and simulations"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    bool quiet = false;
    const std::map<std::string, std::string> about{
        {"coefficients", "tabulate nu, p+, p-, g over k and check their identities"},
        {"scattering", "zero-temperature packet run: transmitted, reflected and absorbed energy"},
        {"production", "thermal production plateau inside the wedge against g(k) T"},
        {"transport_check", "closed-form kinetic limit: interface relations, transport, transform pair"},
        {"equilibrium", "Gibbs start at the thermostat temperature stays in equilibrium"},
        {"convergence", "mild vs direct solver agreement and ensemble energy balance"},
    };
    for (const auto& name : h::commands()) {
        auto* sub = app.add_subcommand(name, about.count(name) ? about.at(name) : std::string{});
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "output directory (default: config key 'out', then ./out)");
        sub->add_option("--seed", seed, "base seed (overrides the config)");
        sub->add_option("--threads", threads, "worker threads (overrides PHONON_SCATTER_THREADS and the config)");
        sub->add_flag("--quiet", quiet, "print only the status line");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : h::exit_config;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    h::json cfg;
    try {
        cfg = h::load_config(config_path);
    } catch (const phonon::Error& e) {
        std::cerr << "phonon-scatter: " << e.what() << "\n";
        return h::exit_config;
    }
    h::RunOptions opts;
    opts.seed = seed;
    opts.threads = threads;
    if (out_dir.empty()) out_dir = cfg.is_object() && cfg.contains("out") && cfg["out"].is_string()
                                       ? cfg["out"].get<std::string>()
                                       : std::string("out");
    opts.out_dir = out_dir;

    h::RunReport rep;
    try {
        rep = h::run(command, cfg, opts);
    } catch (const phonon::ConfigError& e) {
        std::cerr << "phonon-scatter: " << e.what() << "\n";
        return h::exit_config;
    } catch (const phonon::Error& e) {
        std::cerr << "phonon-scatter: " << e.what() << "\n";
        return h::exit_failed;
    }
    if (!quiet) {
        for (const auto& c : rep.checks)
            std::cout << (c.pass ? "PASS " : (c.informational ? "INFO " : "FAIL ")) << c.name << ": " << c.measured
                      << (c.note.empty() ? "" : " (" + c.note + ")") << "\n";
    }
    std::cout << command << ": " << rep.status;
    if (!rep.message.empty()) std::cout << ": " << rep.message;
    std::cout << " [" << rep.wall_seconds << " s, outputs in " << out_dir << "]\n";
    return rep.exit_code();
}
