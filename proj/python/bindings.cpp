#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "aoimec/aoi.hpp"
#include "aoimec/async_marl.hpp"
#include "aoimec/errors.hpp"
#include "aoimec/fql.hpp"
#include "aoimec/harness.hpp"
#include "aoimec/nashq.hpp"
#include "aoimec/oracles.hpp"

namespace py = pybind11;
using namespace aoimec;

namespace {

std::string metrics_csv(const marl::TrainingResult& r, std::uint64_t seed) {
    std::ostringstream out;
    marl::write_metrics_csv(out, r, seed);
    return out.str();
}

ScenarioConfig preset(const std::string& name) {
    if (name == "desk") return ScenarioConfig::desk();
    if (name == "congested") return ScenarioConfig::congested();
    if (name == "standard") return ScenarioConfig::standard();
    throw ConfigError("unknown preset: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Fractional AoI learning on a simulated MEC system.";

    auto base = py::register_exception<RuntimeFailure>(m, "RuntimeFailure", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<IllegalActionError>(m, "IllegalActionError", base.ptr());
    py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
    py::register_exception<EnumerationCapError>(m, "EnumerationCapError", base.ptr());

    m.def("trapezoid_area", &aoi::trapezoid_area, py::arg("latency"), py::arg("wait_next"),
          py::arg("latency_next"));

    // ---- fractional MDPs ----
    py::class_<FractionalMdp>(m, "FractionalMdp")
        .def(py::init<>())
        .def_readwrite("num_states", &FractionalMdp::num_states)
        .def_readwrite("num_actions", &FractionalMdp::num_actions)
        .def_readwrite("transition", &FractionalMdp::transition)
        .def_readwrite("cost_n", &FractionalMdp::cost_n)
        .def_readwrite("cost_d", &FractionalMdp::cost_d)
        .def_readwrite("delta", &FractionalMdp::delta)
        .def_readwrite("initial", &FractionalMdp::initial)
        .def("validate", &FractionalMdp::validate)
        .def_static("random", &FractionalMdp::random, py::arg("num_states"), py::arg("num_actions"),
                    py::arg("delta"), py::arg("seed"));

    py::class_<MarkovGame>(m, "MarkovGame")
        .def_readonly("num_agents", &MarkovGame::num_agents)
        .def_readonly("num_states", &MarkovGame::num_states)
        .def_static("from_mdp", &MarkovGame::from_mdp)
        .def_static("decoupled", &MarkovGame::decoupled)
        .def_static("random_coupled", &MarkovGame::random_coupled, py::arg("num_states"),
                    py::arg("actions_per_agent"), py::arg("delta"), py::arg("coupling"), py::arg("seed"));

    py::class_<oracles::GammaStar>(m, "GammaStar")
        .def_readonly("gamma", &oracles::GammaStar::gamma)
        .def_readonly("policy", &oracles::GammaStar::policy)
        .def_readonly("dinkelbach_trace", &oracles::GammaStar::dinkelbach_trace);
    m.def("exact_gamma_star", [](const FractionalMdp& mdp) { return oracles::exact_gamma_star(mdp); });
    m.def("nash_deviation_scan",
          [](const MarkovGame& g, const JointPolicy& p) { return oracles::nash_deviation_scan(g, p); });

    m.def(
        "sample_budget",
        [](double pairs, double episodes, double zeta, double alpha) {
            return fql::sample_budget(pairs, episodes, zeta, alpha).steps;
        },
        py::arg("state_action_count"), py::arg("episodes"), py::arg("zeta"), py::arg("alpha"));

    m.def(
        "run_fql",
        [](const FractionalMdp& mdp, int episodes, std::uint64_t inner_steps, std::uint64_t seed) {
            fql::FqlConfig c;
            c.episodes = episodes;
            c.inner_steps = inner_steps;
            RngStream r(seed, "fql");
            const auto res = fql::run_fql(mdp, c, r);
            py::dict d;
            d["gamma_trace"] = res.gamma_trace;
            d["policy"] = res.policy;
            d["converged"] = res.converged;
            return d;
        },
        py::arg("mdp"), py::arg("episodes") = 50, py::arg("inner_steps") = 20'000, py::arg("seed") = 1);

    m.def(
        "run_fnql",
        [](const MarkovGame& game, int max_outer, std::uint64_t inner_steps, double epsilon, std::uint64_t seed) {
            fnql::FnqlConfig c;
            c.max_outer = max_outer;
            c.inner_steps = inner_steps;
            c.epsilon = epsilon;
            RngStream r(seed, "fnql");
            const auto res = fnql::run_fnql(game, c, r);
            py::dict d;
            d["gamma_traces"] = res.gamma_traces;
            d["policy"] = res.policy;
            d["converged"] = res.converged;
            d["eta"] = res.diagnostics.eta;
            return d;
        },
        py::arg("game"), py::arg("max_outer") = 200, py::arg("inner_steps") = 2000, py::arg("epsilon") = 1e-3,
        py::arg("seed") = 1);

    // ---- MEC scenarios and learning ----
    py::class_<ScenarioConfig>(m, "Scenario")
        .def_static("preset", &preset, py::arg("name"))
        .def_static("ring", &ScenarioConfig::ring, py::arg("num_devices"), py::arg("num_edges"))
        .def_static(
            "from_config",
            [](const std::string& path) { return harness::scenario_from_config(harness::Config::load(path)); },
            py::arg("path"))
        .def_property_readonly("num_devices", &ScenarioConfig::num_devices)
        .def_property_readonly("num_edges", &ScenarioConfig::num_edges)
        .def_readwrite("drop_coefficient", &ScenarioConfig::drop_coefficient)
        .def_readwrite("episode_horizon", &ScenarioConfig::episode_horizon)
        .def("deadline", &ScenarioConfig::deadline)
        .def(
            "apply_axis",
            [](ScenarioConfig& s, const std::string& axis, double v) { harness::apply_axis(s, harness::parse_axis(axis), v); },
            py::arg("axis"), py::arg("value"));

    py::class_<marl::MarlConfig>(m, "LearnerConfig")
        .def(py::init<>())
        .def_static(
            "from_config",
            [](const std::string& path) { return harness::marl_from_config(harness::Config::load(path)); },
            py::arg("path"))
        .def("with_mode", [](const marl::MarlConfig& c, const std::string& mode) { return harness::apply_mode(c, mode); })
        .def_readwrite("fractional", &marl::MarlConfig::fractional)
        .def_readwrite("async_collection", &marl::MarlConfig::async)
        .def_readwrite("episodes", &marl::MarlConfig::episodes)
        .def_readwrite("eval_every", &marl::MarlConfig::eval_every)
        .def_readwrite("eval_episodes", &marl::MarlConfig::eval_episodes)
        .def_readwrite("gamma_period", &marl::MarlConfig::gamma_period)
        .def_readwrite("delta", &marl::MarlConfig::delta)
        .def_readwrite("lr", &marl::MarlConfig::lr)
        .def_readwrite("batch", &marl::MarlConfig::batch)
        .def_readwrite("eps_end", &marl::MarlConfig::eps_end)
        .def_readwrite("seed", &marl::MarlConfig::seed);

    m.def(
        "run_training",
        [](const ScenarioConfig& s, const marl::MarlConfig& c) {
            marl::TrainingResult res;
            {
                py::gil_scoped_release release;
                res = marl::run_training(s, c);
            }
            py::dict d;
            d["mean_eval_aoi"] = res.mean_eval_aoi;
            d["final_eval_aoi"] = res.final_eval_aoi;
            d["final_gamma"] = res.final_gamma;
            d["final_eval_objective"] = res.final_eval_objective;
            d["gamma_updates"] = res.gamma_updates;
            d["converged"] = res.converged;
            d["metrics_csv"] = metrics_csv(res, c.seed);
            return d;
        },
        py::arg("scenario"), py::arg("config"));

    m.def(
        "simulate_baseline",
        [](const ScenarioConfig& s, const std::string& baseline, std::uint64_t seed) {
            MecSimulator sim(s);
            RngStream rng(seed, "simulate-policy");
            const auto out = marl::run_episode(sim, seed, marl::baseline_policy(s, marl::parse_baseline(baseline), rng));
            py::dict d;
            d["avg_aoi"] = out.avg_aoi;
            d["drops"] = out.drops;
            d["decisions"] = out.decisions;
            return d;
        },
        py::arg("scenario"), py::arg("baseline") = "zero-wait", py::arg("seed") = 1);

    m.def(
        "constant_wait_scan",
        [](const ScenarioConfig& s, const std::vector<double>& waits, int episodes, std::uint64_t seed) {
            const auto scan = marl::constant_wait_scan(s, waits, episodes, seed);
            py::dict d;
            d["waits"] = scan.waits;
            d["mean_aoi"] = scan.mean_aoi;
            d["best_wait"] = scan.best_wait;
            d["best_aoi"] = scan.best_aoi;
            return d;
        },
        py::arg("scenario"), py::arg("waits"), py::arg("episodes") = 5, py::arg("seed") = 1);

    m.def(
        "run_sweep",
        [](const ScenarioConfig& s, const marl::MarlConfig& c, const std::string& axis, std::vector<double> values,
           std::vector<std::string> modes, std::vector<std::uint64_t> seeds, unsigned workers) {
            const harness::SweepSpec spec{harness::parse_axis(axis), std::move(values), std::move(modes), std::move(seeds)};
            std::vector<harness::SweepRow> rows;
            {
                py::gil_scoped_release release;
                rows = harness::run_sweep(s, c, spec, workers);
            }
            std::ostringstream out;
            harness::write_sweep_csv(out, spec.axis, rows);
            return out.str();
        },
        py::arg("scenario"), py::arg("config"), py::arg("axis"), py::arg("values"), py::arg("modes"),
        py::arg("seeds"), py::arg("workers") = 1);

    m.def(
        "plot_svg",
        [](const std::string& csv, const std::string& kind) {
            std::istringstream in(csv);
            return harness::plot_svg(in, harness::parse_plot_kind(kind));
        },
        py::arg("csv"), py::arg("kind"));
}
