// aoimec: command-line front end for the simulator, learners and oracles.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "aoimec/async_marl.hpp"
#include "aoimec/errors.hpp"
#include "aoimec/fql.hpp"
#include "aoimec/harness.hpp"
#include "aoimec/nashq.hpp"
#include "aoimec/oracles.hpp"

namespace fs = std::filesystem;
using namespace aoimec;

namespace {

harness::Config load_or_empty(const std::string& path) {
    return path.empty() ? harness::Config{} : harness::Config::load(path);
}

// Writes to `path`, or stdout for "" / "-".
template <class F>
void emit(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    write(out);
}

std::ofstream open_in(const fs::path& dir, const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (double v : harness::parse_double_list(text)) {
        if (!(v >= 0.0) || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
            throw ConfigError("seeds must be non-negative integers");
        }
        out.push_back(static_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<std::string> split_names(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw ConfigError("empty entry in '" + text + "'");
        out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AoI-aware MEC offloading: simulator, fractional learners and oracles"};
    app.require_subcommand(1);
    app.fallthrough();  // --seed may follow the subcommand
    std::uint64_t seed = 1;
    app.add_option("--seed", seed, "Seed for every random stream")->capture_default_str();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Run one episode with a fixed policy and dump logs");
    std::string sim_config, sim_out = ".", sim_policy = "zero-wait";
    double sim_horizon = 0.0, sim_step = 0.0;
    sim_cmd->add_option("--config", sim_config, "Scenario config");
    sim_cmd->add_option("--horizon", sim_horizon, "Episode horizon in seconds (overrides config)");
    sim_cmd->add_option("--policy", sim_policy, "random | zero-wait | local-only | greedy-queue")->capture_default_str();
    sim_cmd->add_option("--out-dir", sim_out, "Directory for events.csv, aoi.csv, costs.csv")->capture_default_str();
    sim_cmd->add_option("--aoi-step", sim_step, "Sampling step of aoi.csv (default horizon/2000)");

    // train-fql
    auto* fql_cmd = app.add_subcommand("train-fql", "Fractional Q-learning on a tabular MDP");
    std::string fql_mdp, fql_out;
    int fql_episodes = 0;
    fql_cmd->add_option("--mdp", fql_mdp, "Config with [mdp] and optional [fql]")->required();
    fql_cmd->add_option("--episodes", fql_episodes, "Outer iterations (overrides config)");
    fql_cmd->add_option("--out", fql_out, "γ-trace CSV (default stdout)");

    // train-fnql
    auto* fnql_cmd = app.add_subcommand("train-fnql", "Fractional Nash Q-learning on a Markov game");
    std::string fnql_game, fnql_out;
    fnql_cmd->add_option("--game", fnql_game, "Config with [game] (and [mdp] for kind = from_mdp)")->required();
    fnql_cmd->add_option("--out", fnql_out, "γ-trace CSV (default stdout)");

    // train-marl
    auto* marl_cmd = app.add_subcommand("train-marl", "Multi-agent learner on the MEC simulator");
    std::string marl_config, marl_out, marl_mode;
    int marl_episodes = 0;
    marl_cmd->add_option("--config", marl_config, "Config with [scenario] and [marl]");
    marl_cmd->add_option("--mode", marl_mode, "frac-async | frac-sync | nonfrac-async | nonfrac-sync | baseline name");
    marl_cmd->add_option("--episodes", marl_episodes, "Training episodes (overrides config)");
    marl_cmd->add_option("--out", marl_out, "Metrics CSV (default stdout)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "Parameter sweep across modes and seeds");
    std::string sweep_config, sweep_axis, sweep_values, sweep_modes = "frac-async,nonfrac-async,random",
                                                        sweep_seeds, sweep_out;
    int sweep_episodes = 0;
    unsigned sweep_workers = 0;
    sweep_cmd->add_option("--config", sweep_config, "Config with [scenario] and [marl]");
    sweep_cmd->add_option("--axis", sweep_axis,
                          "edge_capacity | drop_coefficient | task_density | mobile_capacity | "
                          "processing_variance | num_agents | bandwidth")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "Comma-separated axis values")->required();
    sweep_cmd->add_option("--modes", sweep_modes, "Comma-separated modes")->capture_default_str();
    sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated seeds (default: --seed)");
    sweep_cmd->add_option("--episodes", sweep_episodes, "Training episodes per run (overrides config)");
    sweep_cmd->add_option("--workers", sweep_workers, "Worker threads (default AOIMEC_WORKERS or 1)");
    sweep_cmd->add_option("--out", sweep_out, "Sweep CSV (default stdout)");

    // oracle
    auto* oracle_cmd = app.add_subcommand("oracle", "Exact reference solutions");
    oracle_cmd->require_subcommand(1);
    auto* gamma_cmd = oracle_cmd->add_subcommand("gamma", "Optimal ratio of a tabular MDP by enumeration");
    std::string oracle_mdp;
    gamma_cmd->add_option("--mdp", oracle_mdp, "Config with [mdp]")->required();
    auto* nash_cmd = oracle_cmd->add_subcommand("nash", "Pure stationary equilibria of a Markov game");
    std::string oracle_game;
    double nash_tol = 1e-9;
    nash_cmd->add_option("--game", oracle_game, "Config with [game]")->required();
    nash_cmd->add_option("--tol", nash_tol, "Largest tolerated unilateral improvement")->capture_default_str();
    auto* scan_cmd = oracle_cmd->add_subcommand("wait-scan", "Best constant wait on the evaluation seeds");
    std::string scan_config, scan_waits = "0,0.5,1,1.5,2,2.5,3,4,5,6";
    int scan_episodes = 3;
    scan_cmd->add_option("--config", scan_config, "Config with [scenario]");
    scan_cmd->add_option("--waits", scan_waits, "Comma-separated waits in seconds")->capture_default_str();
    scan_cmd->add_option("--episodes", scan_episodes, "Evaluation episodes per wait")->capture_default_str();

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "Render a CSV from this tool as SVG");
    std::string plot_in, plot_kind = "convergence", plot_out;
    plot_cmd->add_option("--input", plot_in, "CSV file")->required();
    plot_cmd->add_option("--kind", plot_kind, "convergence | bars")->capture_default_str();
    plot_cmd->add_option("--out", plot_out, "SVG file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim_cmd) {
            auto sc = harness::scenario_from_config(load_or_empty(sim_config));
            if (sim_horizon > 0.0) sc.episode_horizon = sim_horizon;
            const auto baseline = marl::parse_baseline(sim_policy);
            if (baseline == marl::Baseline::None) throw ConfigError("--policy needs a fixed policy name");
            RngStream rng(seed, "simulate-policy");
            const auto policy = marl::baseline_policy(sc, baseline, rng);
            MecSimulator sim(sc);
            const auto outcome = marl::run_episode(sim, seed, policy);
            const fs::path dir(sim_out);
            fs::create_directories(dir);
            auto events = open_in(dir, "events.csv");
            write_event_log_csv(events, sim.event_log());
            auto aoi_csv = open_in(dir, "aoi.csv");
            const double step = sim_step > 0.0 ? sim_step : sc.episode_horizon / 2000.0;
            aoi::write_sawtooth_csv(aoi_csv, sim.completion_logs(), sc.episode_horizon, step);
            auto costs = open_in(dir, "costs.csv");
            aoi::write_task_costs_csv(costs, sim.completion_logs());
            for (int m = 0; m < sc.num_devices(); ++m) {
                std::printf("device %d: avg_aoi %.6f drops %llu\n", m, outcome.avg_aoi[static_cast<std::size_t>(m)],
                            static_cast<unsigned long long>(outcome.drops[static_cast<std::size_t>(m)]));
            }
        } else if (*fql_cmd) {
            const auto cfg = harness::Config::load(fql_mdp);
            const auto mdp = harness::mdp_from_config(cfg);
            auto fc = harness::fql_from_config(cfg);
            if (fql_episodes > 0) fc.episodes = fql_episodes;
            RngStream stream(seed, "fql");
            const auto result = fql::run_fql(mdp, fc, stream);
            emit(fql_out, [&](std::ostream& o) { fql::write_fql_csv(o, result); });
            std::fprintf(stderr, "final gamma %.10f after %zu iterates%s\n", result.gamma_trace.back(),
                         result.gamma_trace.size(), result.converged ? " (converged)" : "");
        } else if (*fnql_cmd) {
            const auto cfg = harness::Config::load(fnql_game);
            const auto game = harness::game_from_config(cfg);
            const auto fc = harness::fnql_from_config(cfg);
            RngStream stream(seed, "fnql");
            const auto result = fnql::run_fnql(game, fc, stream);
            emit(fnql_out, [&](std::ostream& o) { fnql::write_fnql_csv(o, result); });
            for (std::size_t m = 0; m < result.gamma_traces.size(); ++m) {
                std::fprintf(stderr, "agent %zu: final gamma %.10f\n", m, result.gamma_traces[m].back());
            }
        } else if (*marl_cmd) {
            const auto cfg = load_or_empty(marl_config);
            const auto sc = harness::scenario_from_config(cfg);
            auto mc = harness::marl_from_config(cfg);
            if (!marl_mode.empty()) mc = harness::apply_mode(mc, marl_mode);
            if (marl_episodes > 0) mc.episodes = marl_episodes;
            mc.seed = seed;
            mc.validate();
            const auto result = marl::run_training(sc, mc);
            emit(marl_out, [&](std::ostream& o) { marl::write_metrics_csv(o, result, seed); });
            std::fprintf(stderr, "mean eval AoI %.6f%s\n", result.mean_eval_aoi,
                         result.converged ? " (gamma converged)" : "");
        } else if (*sweep_cmd) {
            const auto cfg = load_or_empty(sweep_config);
            const auto sc = harness::scenario_from_config(cfg);
            auto mc = harness::marl_from_config(cfg);
            if (sweep_episodes > 0) mc.episodes = sweep_episodes;
            harness::SweepSpec spec;
            spec.axis = harness::parse_axis(sweep_axis);
            spec.values = harness::parse_double_list(sweep_values);
            spec.modes = split_names(sweep_modes);
            spec.seeds = sweep_seeds.empty() ? std::vector<std::uint64_t>{seed} : parse_seeds(sweep_seeds);
            const auto rows = harness::run_sweep(sc, mc, spec, sweep_workers);
            emit(sweep_out, [&](std::ostream& o) { harness::write_sweep_csv(o, spec.axis, rows); });
        } else if (*gamma_cmd) {
            const auto mdp = harness::mdp_from_config(harness::Config::load(oracle_mdp));
            const auto g = oracles::exact_gamma_star(mdp);
            std::printf("gamma_star %.12f\npolicy", g.gamma);
            for (int a : g.policy) std::printf(" %d", a);
            std::printf("\ndinkelbach_gamma %.12f\npolicies_enumerated %zu\n", g.dinkelbach_gamma,
                        g.policies_enumerated);
        } else if (*nash_cmd) {
            const auto game = harness::game_from_config(harness::Config::load(oracle_game));
            const auto eq = oracles::pure_equilibria(game, nash_tol);
            std::printf("pure_equilibria %zu\n", eq.size());
            for (const auto& joint : eq) {
                for (std::size_t m = 0; m < joint.size(); ++m) {
                    std::printf("%sagent%zu:", m ? " " : "", m);
                    for (int a : joint[m]) std::printf(" %d", a);
                }
                std::printf("\n");
            }
        } else if (*scan_cmd) {
            const auto sc = harness::scenario_from_config(load_or_empty(scan_config));
            const auto waits = harness::parse_double_list(scan_waits);
            const auto scan = marl::constant_wait_scan(sc, waits, scan_episodes, seed);
            std::printf("wait,mean_aoi\n");
            for (std::size_t i = 0; i < scan.waits.size(); ++i) {
                std::printf("%.6g,%.10f\n", scan.waits[i], scan.mean_aoi[i]);
            }
            std::fprintf(stderr, "best wait %.6g, mean AoI %.6f\n", scan.best_wait, scan.best_aoi);
        } else if (*plot_cmd) {
            std::ifstream in(plot_in);
            if (!in) throw ConfigError("cannot open " + plot_in);
            const auto svg = harness::plot_svg(in, harness::parse_plot_kind(plot_kind));
            emit(plot_out, [&](std::ostream& o) { o << svg; });
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "invalid argument: %s\n", e.what());
        return 1;
    } catch (const RuntimeFailure& e) {
        std::fprintf(stderr, "runtime failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
