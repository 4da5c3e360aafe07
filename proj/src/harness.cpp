#include "aoimec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "aoimec/errors.hpp"

namespace aoimec::harness {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& text, const std::string& what) {
    double v = 0.0;
    const auto t = trim(text);
    const auto* end = t.data() + t.size();
    const auto [p, ec] = std::from_chars(t.data(), end, v);
    if (ec != std::errc() || p != end || t.empty()) throw ConfigError(what + ": not a number: '" + text + "'");
    return v;
}

std::string key_name(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

}  // namespace

// ---- config ----

Config Config::parse(std::istream& in, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const auto where = origin + ":" + std::to_string(lineno);
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) throw ConfigError(where + ": malformed section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            cfg.sections_[section];
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const auto key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ConfigError(where + ": empty key");
        auto value = trim(std::string_view(t).substr(eq + 1));
        if (const auto hash = value.find(" #"); hash != std::string::npos) value = trim(value.substr(0, hash));
        auto& sec = cfg.sections_[section];
        if (!sec.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return parse(in, path);
}

bool Config::has(const std::string& section, const std::string& key) const { return raw(section, key).has_value(); }

bool Config::has_section(const std::string& section) const { return sections_.count(section) > 0; }

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    return raw(section, key).value_or(fallback);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
    const auto v = raw(section, key);
    return v ? to_double(*v, key_name(section, key)) : fallback;
}

std::int64_t Config::get_int(const std::string& section, const std::string& key, std::int64_t fallback) const {
    const auto v = raw(section, key);
    if (!v) return fallback;
    std::int64_t out = 0;
    const auto t = trim(*v);
    const auto* end = t.data() + t.size();
    const auto [p, ec] = std::from_chars(t.data(), end, out);
    if (ec != std::errc() || p != end || t.empty()) {
        throw ConfigError(key_name(section, key) + ": not an integer: '" + *v + "'");
    }
    return out;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    const auto v = raw(section, key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError(key_name(section, key) + ": not a boolean: '" + *v + "'");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const {
    const auto v = raw(section, key);
    if (!v) return {};
    try {
        return parse_double_list(*v);
    } catch (const ConfigError& e) {
        throw ConfigError(key_name(section, key) + ": " + e.what());
    }
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}

void Config::check_keys(const std::string& section, const std::vector<std::string>& known) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return;
    for (const auto& [k, v] : s->second) {
        if (std::find(known.begin(), known.end(), k) == known.end()) {
            throw ConfigError(origin_ + ": unknown key '" + key_name(section, k) + "'");
        }
    }
}

std::vector<double> parse_double_list(std::string_view text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto piece = trim(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
        if (piece.empty()) throw ConfigError("empty entry in list '" + std::string(text) + "'");
        out.push_back(to_double(piece, "list"));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

// ---- scenario and learner configs ----

ScenarioConfig scenario_from_config(const Config& cfg) {
    const std::string s = "scenario";
    cfg.check_keys(s, {"preset", "devices", "edges", "edge_capacity_ghz", "local_capacity_ghz",
                       "drop_coefficient", "task_size_mbit", "task_density", "bandwidth_mhz", "noise_dbm",
                       "pathloss_exponent", "tx_power_dbm", "rayleigh_fading", "service", "lognormal_sigma",
                       "horizon", "tx_counts_cycles", "seed"});
    const auto preset = cfg.get_string(s, "preset", "desk");
    ScenarioConfig sc;
    if (preset == "desk") {
        sc = ScenarioConfig::desk();
    } else if (preset == "standard") {
        sc = ScenarioConfig::standard();
    } else if (preset == "congested") {
        sc = ScenarioConfig::congested();
    } else if (preset == "ring") {
        sc = ScenarioConfig::ring(static_cast<int>(cfg.get_int(s, "devices", 5)),
                                  static_cast<int>(cfg.get_int(s, "edges", 2)));
    } else {
        throw ConfigError("scenario.preset: unknown preset '" + preset + "'");
    }
    if (preset != "ring" && (cfg.has(s, "devices") || cfg.has(s, "edges"))) {
        apply_axis(sc, Axis::NumAgents, static_cast<double>(cfg.get_int(s, "devices", sc.num_devices())));
        if (cfg.has(s, "edges")) throw ConfigError("scenario.edges: only the ring preset takes an edge count");
    }
    if (cfg.has(s, "edge_capacity_ghz")) {
        for (auto& e : sc.edges) e.capacity_ghz = cfg.get_double(s, "edge_capacity_ghz", 0.0);
    }
    if (cfg.has(s, "local_capacity_ghz")) {
        for (auto& d : sc.devices) d.local_capacity_ghz = cfg.get_double(s, "local_capacity_ghz", 0.0);
    }
    if (cfg.has(s, "tx_power_dbm")) {
        for (auto& d : sc.devices) d.tx_power_dbm = cfg.get_double(s, "tx_power_dbm", 0.0);
    }
    sc.drop_coefficient = cfg.get_double(s, "drop_coefficient", sc.drop_coefficient);
    sc.task.size_mbit = cfg.get_double(s, "task_size_mbit", sc.task.size_mbit);
    sc.task.density_gcycles = cfg.get_double(s, "task_density", sc.task.density_gcycles);
    sc.channel.bandwidth_hz = cfg.get_double(s, "bandwidth_mhz", sc.channel.bandwidth_hz / 1e6) * 1e6;
    sc.channel.noise_dbm = cfg.get_double(s, "noise_dbm", sc.channel.noise_dbm);
    sc.channel.pathloss_exponent = cfg.get_double(s, "pathloss_exponent", sc.channel.pathloss_exponent);
    sc.channel.rayleigh_fading = cfg.get_bool(s, "rayleigh_fading", sc.channel.rayleigh_fading);
    if (const auto svc = cfg.raw(s, "service")) {
        if (*svc == "exponential") {
            sc.service = ServiceDistribution::Exponential;
        } else if (*svc == "lognormal") {
            sc.service = ServiceDistribution::Lognormal;
        } else {
            throw ConfigError("scenario.service: expected exponential or lognormal");
        }
    }
    sc.lognormal_sigma = cfg.get_double(s, "lognormal_sigma", sc.lognormal_sigma);
    sc.episode_horizon = cfg.get_double(s, "horizon", sc.episode_horizon);
    sc.tx_counts_cycles = cfg.get_bool(s, "tx_counts_cycles", sc.tx_counts_cycles);
    sc.seed = static_cast<std::uint64_t>(cfg.get_int(s, "seed", static_cast<std::int64_t>(sc.seed)));
    try {
        sc.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return sc;
}

marl::MarlConfig marl_from_config(const Config& cfg) {
    const std::string s = "marl";
    cfg.check_keys(s, {"mode", "fractional", "async", "baseline", "episodes", "eval_every", "eval_episodes",
                       "delta", "gamma_period", "gamma_ema", "wait_grid", "hidden", "history_dim", "lr",
                       "lr_final", "grad_clip", "batch", "buffer", "target_period", "eps_start", "eps_end",
                       "eps_fraction"});
    marl::MarlConfig c;
    if (cfg.has(s, "mode")) c = apply_mode(c, cfg.get_string(s, "mode", ""));
    c.fractional = cfg.get_bool(s, "fractional", c.fractional);
    c.async = cfg.get_bool(s, "async", c.async);
    if (cfg.has(s, "baseline")) c.baseline = marl::parse_baseline(cfg.get_string(s, "baseline", "none"));
    c.episodes = static_cast<int>(cfg.get_int(s, "episodes", c.episodes));
    c.eval_every = static_cast<int>(cfg.get_int(s, "eval_every", c.eval_every));
    c.eval_episodes = static_cast<int>(cfg.get_int(s, "eval_episodes", c.eval_episodes));
    c.delta = cfg.get_double(s, "delta", c.delta);
    c.gamma_period = static_cast<int>(cfg.get_int(s, "gamma_period", c.gamma_period));
    c.gamma_ema = cfg.get_double(s, "gamma_ema", c.gamma_ema);
    c.wait_grid = static_cast<int>(cfg.get_int(s, "wait_grid", c.wait_grid));
    c.hidden = static_cast<std::size_t>(cfg.get_int(s, "hidden", static_cast<std::int64_t>(c.hidden)));
    c.history_dim = static_cast<std::size_t>(cfg.get_int(s, "history_dim", static_cast<std::int64_t>(c.history_dim)));
    c.lr = cfg.get_double(s, "lr", c.lr);
    c.lr_final = cfg.get_double(s, "lr_final", c.lr_final);
    c.grad_clip = cfg.get_double(s, "grad_clip", c.grad_clip);
    c.batch = static_cast<std::size_t>(cfg.get_int(s, "batch", static_cast<std::int64_t>(c.batch)));
    c.buffer = static_cast<std::size_t>(cfg.get_int(s, "buffer", static_cast<std::int64_t>(c.buffer)));
    c.target_period = static_cast<int>(cfg.get_int(s, "target_period", c.target_period));
    c.eps_start = cfg.get_double(s, "eps_start", c.eps_start);
    c.eps_end = cfg.get_double(s, "eps_end", c.eps_end);
    c.eps_fraction = cfg.get_double(s, "eps_fraction", c.eps_fraction);
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("marl: ") + e.what());
    }
    return c;
}

FractionalMdp mdp_from_config(const Config& cfg) {
    const std::string s = "mdp";
    cfg.check_keys(s, {"kind", "states", "actions", "delta", "seed", "transition", "cost_n", "cost_d", "initial"});
    if (!cfg.has_section(s)) throw ConfigError("missing [mdp] section");
    const auto kind = cfg.get_string(s, "kind", "explicit");
    const int ns = static_cast<int>(cfg.get_int(s, "states", 0));
    const int na = static_cast<int>(cfg.get_int(s, "actions", 0));
    const double delta = cfg.get_double(s, "delta", 0.9);
    if (ns < 1 || na < 1) throw ConfigError("mdp: states and actions must be >= 1");
    FractionalMdp mdp;
    if (kind == "random") {
        mdp = FractionalMdp::random(ns, na, delta, static_cast<std::uint64_t>(cfg.get_int(s, "seed", 1)));
    } else if (kind == "explicit") {
        mdp.num_states = ns;
        mdp.num_actions = na;
        mdp.delta = delta;
        mdp.transition = cfg.get_doubles(s, "transition");
        mdp.cost_n = cfg.get_doubles(s, "cost_n");
        mdp.cost_d = cfg.get_doubles(s, "cost_d");
        mdp.initial = cfg.get_doubles(s, "initial");
        if (mdp.initial.empty()) {
            mdp.initial.assign(static_cast<std::size_t>(ns), 0.0);
            mdp.initial[0] = 1.0;
        }
        const auto pairs = static_cast<std::size_t>(ns * na);
        if (mdp.transition.size() != pairs * static_cast<std::size_t>(ns) || mdp.cost_n.size() != pairs ||
            mdp.cost_d.size() != pairs || mdp.initial.size() != static_cast<std::size_t>(ns)) {
            throw ConfigError("mdp: table sizes do not match states x actions");
        }
    } else {
        throw ConfigError("mdp.kind: expected random or explicit");
    }
    try {
        mdp.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("mdp: ") + e.what());
    }
    return mdp;
}

namespace {

fql::StepSchedule schedule_from(const Config& cfg, const std::string& s, fql::StepSchedule sched) {
    if (const auto name = cfg.raw(s, "schedule")) {
        if (*name == "harmonic") {
            sched.kind = fql::StepSchedule::Kind::Harmonic;
        } else if (*name == "rescaled") {
            sched.kind = fql::StepSchedule::Kind::Rescaled;
        } else if (*name == "polynomial") {
            sched.kind = fql::StepSchedule::Kind::Polynomial;
        } else if (*name == "constant") {
            sched.kind = fql::StepSchedule::Kind::Constant;
        } else {
            throw ConfigError(s + ".schedule: unknown schedule '" + *name + "'");
        }
    }
    sched.exponent = cfg.get_double(s, "exponent", sched.exponent);
    sched.value = cfg.get_double(s, "step", sched.value);
    return sched;
}

fql::Backup backup_from(const Config& cfg, const std::string& s, fql::Backup fallback) {
    const auto name = cfg.raw(s, "backup");
    if (!name) return fallback;
    if (*name == "sampled") return fql::Backup::Sampled;
    if (*name == "expected") return fql::Backup::Expected;
    throw ConfigError(s + ".backup: expected sampled or expected");
}

fql::InnerInit init_from(const Config& cfg, const std::string& s, fql::InnerInit fallback) {
    const auto name = cfg.raw(s, "init");
    if (!name) return fallback;
    if (*name == "cold") return fql::InnerInit::Cold;
    if (*name == "warm") return fql::InnerInit::Warm;
    if (*name == "reset") return fql::InnerInit::ResetQ;
    throw ConfigError(s + ".init: expected cold, warm or reset");
}

}  // namespace

fql::FqlConfig fql_from_config(const Config& cfg) {
    const std::string s = "fql";
    cfg.check_keys(s, {"alpha", "zeta", "episodes", "budget", "inner_steps", "check_every", "max_inner_steps",
                       "schedule", "exponent", "step", "backup", "init", "tolerance", "initial_gamma"});
    fql::FqlConfig c;
    c.alpha = cfg.get_double(s, "alpha", c.alpha);
    c.zeta = cfg.get_double(s, "zeta", c.zeta);
    c.episodes = static_cast<int>(cfg.get_int(s, "episodes", c.episodes));
    if (const auto b = cfg.raw(s, "budget")) {
        if (*b == "fixed") {
            c.budget_mode = fql::BudgetMode::FixedSteps;
        } else if (*b == "bound") {
            c.budget_mode = fql::BudgetMode::SampleBound;
        } else if (*b == "stopping") {
            c.budget_mode = fql::BudgetMode::StoppingCondition;
        } else {
            throw ConfigError("fql.budget: expected fixed, bound or stopping");
        }
    }
    c.inner_steps = static_cast<std::uint64_t>(cfg.get_int(s, "inner_steps", static_cast<std::int64_t>(c.inner_steps)));
    c.check_every = static_cast<std::uint64_t>(cfg.get_int(s, "check_every", static_cast<std::int64_t>(c.check_every)));
    c.max_inner_steps =
        static_cast<std::uint64_t>(cfg.get_int(s, "max_inner_steps", static_cast<std::int64_t>(c.max_inner_steps)));
    c.schedule = schedule_from(cfg, s, c.schedule);
    c.backup = backup_from(cfg, s, c.backup);
    c.init = init_from(cfg, s, c.init);
    c.tolerance = cfg.get_double(s, "tolerance", c.tolerance);
    if (cfg.has(s, "initial_gamma")) c.initial_gamma = cfg.get_double(s, "initial_gamma", 0.0);
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("fql: ") + e.what());
    }
    return c;
}

MarkovGame game_from_config(const Config& cfg) {
    const std::string s = "game";
    cfg.check_keys(s, {"kind", "states", "actions", "delta", "coupling", "seed", "states_b", "seed_b"});
    const auto kind = cfg.get_string(s, "kind", "random_coupled");
    const int ns = static_cast<int>(cfg.get_int(s, "states", 2));
    const int na = static_cast<int>(cfg.get_int(s, "actions", 2));
    const double delta = cfg.get_double(s, "delta", 0.8);
    const auto seed = static_cast<std::uint64_t>(cfg.get_int(s, "seed", 1));
    if (ns < 1 || na < 1) throw ConfigError("game: states and actions must be >= 1");
    try {
        if (kind == "random_coupled") {
            return MarkovGame::random_coupled(ns, na, delta, cfg.get_double(s, "coupling", 0.5), seed);
        }
        if (kind == "decoupled") {
            const auto a = FractionalMdp::random(ns, na, delta, seed);
            const auto b = FractionalMdp::random(static_cast<int>(cfg.get_int(s, "states_b", ns)), na, delta,
                                                 static_cast<std::uint64_t>(cfg.get_int(s, "seed_b", 1000 + seed)));
            return MarkovGame::decoupled(a, b);
        }
        if (kind == "from_mdp") return MarkovGame::from_mdp(mdp_from_config(cfg));
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("game: ") + e.what());
    }
    throw ConfigError("game.kind: expected random_coupled, decoupled or from_mdp");
}

fnql::FnqlConfig fnql_from_config(const Config& cfg) {
    const std::string s = "fnql";
    cfg.check_keys(s, {"epsilon", "max_outer", "inner_steps", "rounds", "schedule", "exponent", "step", "backup",
                       "init"});
    fnql::FnqlConfig c;
    c.epsilon = cfg.get_double(s, "epsilon", c.epsilon);
    c.max_outer = static_cast<int>(cfg.get_int(s, "max_outer", c.max_outer));
    c.inner_steps = static_cast<std::uint64_t>(cfg.get_int(s, "inner_steps", static_cast<std::int64_t>(c.inner_steps)));
    c.rounds = static_cast<int>(cfg.get_int(s, "rounds", c.rounds));
    c.schedule = schedule_from(cfg, s, c.schedule);
    c.backup = backup_from(cfg, s, c.backup);
    c.init = init_from(cfg, s, c.init);
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("fnql: ") + e.what());
    }
    return c;
}

// ---- sweeps ----

std::string_view to_string(Axis a) {
    switch (a) {
        case Axis::EdgeCapacity: return "edge_capacity";
        case Axis::DropCoefficient: return "drop_coefficient";
        case Axis::TaskDensity: return "task_density";
        case Axis::MobileCapacity: return "mobile_capacity";
        case Axis::ProcessingVariance: return "processing_variance";
        case Axis::NumAgents: return "num_agents";
        case Axis::Bandwidth: return "bandwidth";
    }
    return "edge_capacity";
}

Axis parse_axis(std::string_view name) {
    for (auto a : {Axis::EdgeCapacity, Axis::DropCoefficient, Axis::TaskDensity, Axis::MobileCapacity,
                   Axis::ProcessingVariance, Axis::NumAgents, Axis::Bandwidth}) {
        if (name == to_string(a)) return a;
    }
    throw ConfigError("unknown sweep axis: " + std::string(name));
}

marl::MarlConfig apply_mode(marl::MarlConfig c, std::string_view mode) {
    c.baseline = marl::Baseline::None;
    if (mode == "frac-async") {
        c.fractional = true;
        c.async = true;
    } else if (mode == "frac-sync") {
        c.fractional = true;
        c.async = false;
    } else if (mode == "nonfrac-async") {
        c.fractional = false;
        c.async = true;
    } else if (mode == "nonfrac-sync") {
        c.fractional = false;
        c.async = false;
    } else {
        c.baseline = marl::parse_baseline(mode);
        if (c.baseline == marl::Baseline::None) throw ConfigError("mode 'none' is not a runnable mode");
    }
    return c;
}

void apply_axis(ScenarioConfig& sc, Axis axis, double v) {
    if (!std::isfinite(v)) throw ConfigError("sweep value must be finite");
    const double m = sc.num_devices();
    switch (axis) {
        case Axis::EdgeCapacity:
            if (!(v > 0.0)) throw ConfigError("edge_capacity must be positive");
            for (auto& e : sc.edges) e.capacity_ghz = v * m / 20.0;
            break;
        case Axis::DropCoefficient:
            if (!(v > 0.0)) throw ConfigError("drop_coefficient must be positive");
            sc.drop_coefficient = v;
            break;
        case Axis::TaskDensity:
            if (!(v > 0.0)) throw ConfigError("task_density must be positive");
            sc.task.density_gcycles = v;
            break;
        case Axis::MobileCapacity:
            if (!(v > 0.0)) throw ConfigError("mobile_capacity must be positive");
            for (auto& d : sc.devices) d.local_capacity_ghz = v;
            break;
        case Axis::ProcessingVariance:
            if (!(v >= 0.0)) throw ConfigError("processing_variance must be >= 0");
            sc.service = v > 0.0 ? ServiceDistribution::Lognormal : ServiceDistribution::Exponential;
            sc.lognormal_sigma = v;
            break;
        case Axis::NumAgents: {
            if (!(v >= 1.0 && v == std::floor(v))) throw ConfigError("num_agents must be a positive integer");
            const int n = static_cast<int>(v);
            auto fresh = ScenarioConfig::ring(n, sc.num_edges());
            // Keep per-device edge load and every non-geometric setting.
            for (std::size_t e = 0; e < fresh.edges.size(); ++e) {
                fresh.edges[e].capacity_ghz = sc.edges[e].capacity_ghz / m * n;
            }
            for (auto& d : fresh.devices) {
                d.local_capacity_ghz = sc.devices.front().local_capacity_ghz;
                d.tx_power_dbm = sc.devices.front().tx_power_dbm;
            }
            fresh.task = sc.task;
            fresh.channel = sc.channel;
            fresh.drop_coefficient = sc.drop_coefficient;
            fresh.service = sc.service;
            fresh.lognormal_sigma = sc.lognormal_sigma;
            fresh.tx_counts_cycles = sc.tx_counts_cycles;
            fresh.episode_horizon = sc.episode_horizon;
            fresh.livelock_horizon = sc.livelock_horizon;
            fresh.seed = sc.seed;
            sc = fresh;
            break;
        }
        case Axis::Bandwidth:
            if (!(v > 0.0)) throw ConfigError("bandwidth must be positive");
            sc.channel.bandwidth_hz = v * 1e6;
            break;
    }
}

std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const marl::MarlConfig& learner, const SweepSpec& spec,
                                unsigned workers) {
    if (spec.values.empty() || spec.modes.empty() || spec.seeds.empty()) {
        throw ConfigError("sweep needs at least one value, mode and seed");
    }
    struct Job {
        double value;
        std::uint64_t seed;
        std::string mode;
        ScenarioConfig scenario;
        marl::MarlConfig config;
    };
    std::vector<Job> jobs;
    for (double v : spec.values) {
        ScenarioConfig sc = base;
        apply_axis(sc, spec.axis, v);
        sc.validate();
        for (auto seed : spec.seeds) {
            for (const auto& mode : spec.modes) {
                auto c = apply_mode(learner, mode);
                c.seed = seed;  // paired: every mode of a seed sees the same environment streams
                jobs.push_back({v, seed, mode, sc, c});
            }
        }
    }
    std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
        if (a.value != b.value) return a.value < b.value;
        if (a.seed != b.seed) return a.seed < b.seed;
        return a.mode < b.mode;
    });

    if (workers == 0) {
        workers = 1;
        if (const char* env = std::getenv("AOIMEC_WORKERS")) {
            const long w = std::strtol(env, nullptr, 10);
            if (w < 1 || w > 256) throw ConfigError("AOIMEC_WORKERS must be an integer in [1, 256]");
            workers = static_cast<unsigned>(w);
        }
    }
    workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));

    std::vector<SweepRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                const auto& j = jobs[i];
                const auto r = marl::run_training(j.scenario, j.config);
                double g = 0.0, drops = 0.0;
                for (double x : r.final_gamma) g += x;
                if (!r.metrics.empty()) {
                    for (double x : r.metrics.back().drops) drops += x;
                }
                rows[i] = {j.value, j.seed, j.mode, r.mean_eval_aoi, g / static_cast<double>(r.final_gamma.size()),
                           drops};
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = jobs.size();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

void write_sweep_csv(std::ostream& out, Axis axis, const std::vector<SweepRow>& rows) {
    out << "# aoimec sweep v1\n";
    out << "axis,value,seed,mode,mean_aoi,mean_gamma,drops\n";
    const auto old = out.precision(17);
    for (const auto& r : rows) {
        out << to_string(axis) << ',' << r.value << ',' << r.seed << ',' << r.mode << ',' << r.mean_aoi << ','
            << r.mean_gamma << ',' << r.drops << '\n';
    }
    out.precision(old);
}

// ---- plots ----

PlotKind parse_plot_kind(std::string_view name) {
    if (name == "convergence") return PlotKind::Convergence;
    if (name == "bars") return PlotKind::Bars;
    throw ConfigError("unknown plot kind: " + std::string(name));
}

namespace {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? -1 : static_cast<int>(it - header.begin());
    }
    double num(std::size_t r, int c) const { return to_double(rows[r].at(static_cast<std::size_t>(c)), header[static_cast<std::size_t>(c)]); }
    bool present(std::size_t r, int c) const {
        return c >= 0 && static_cast<std::size_t>(c) < rows[r].size() && !trim(rows[r][static_cast<std::size_t>(c)]).empty();
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        const auto s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (t.header.empty()) {
            t.header = split(s);
        } else {
            t.rows.push_back(split(s));
        }
    }
    if (t.header.empty() || t.rows.empty()) throw ConfigError("plot: empty table");
    return t;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

struct Canvas {
    double width = 720, height = 420, left = 70, right = 170, top = 30, bottom = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    std::ostringstream svg;

    double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }

    void open(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
        if (!(x1 > x0)) x1 = x0 + 1.0;
        if (!(y1 > y0)) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
            << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
        svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        svg << "<text x=\"" << width / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title
            << "</text>\n";
        const double bx = left, by = height - bottom, ex = width - right, ey = top;
        svg << "<path d=\"M" << bx << ' ' << ey << " L" << bx << ' ' << by << " L" << ex << ' ' << by
            << "\" stroke=\"black\" fill=\"none\"/>\n";
        for (int i = 0; i <= 5; ++i) {
            const double yv = y0 + (y1 - y0) * i / 5.0;
            svg << "<text x=\"" << bx - 6 << "\" y=\"" << fmt(py(yv) + 4) << "\" text-anchor=\"end\">" << fmt(yv)
                << "</text>\n";
            svg << "<path d=\"M" << bx << ' ' << fmt(py(yv)) << " L" << ex << ' ' << fmt(py(yv))
                << "\" stroke=\"#e0e0e0\"/>\n";
        }
        svg << "<text x=\"" << (bx + ex) / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\">" << xlabel
            << "</text>\n";
        svg << "<text x=\"16\" y=\"" << (by + ey) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
            << (by + ey) / 2 << ")\">" << ylabel << "</text>\n";
    }

    void x_ticks() {
        for (int i = 0; i <= 5; ++i) {
            const double xv = x0 + (x1 - x0) * i / 5.0;
            svg << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << height - bottom + 16 << "\" text-anchor=\"middle\">"
                << fmt(xv) << "</text>\n";
        }
    }

    void legend(std::size_t i, const std::string& label, const char* color, bool dashed = false) {
        const double y = top + 14.0 * static_cast<double>(i);
        const double x = width - right + 12;
        svg << "<path d=\"M" << x << ' ' << y << " L" << x + 18 << ' ' << y << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
        svg << "<text x=\"" << x + 24 << "\" y=\"" << y + 4 << "\">" << label << "</text>\n";
    }

    std::string close() {
        svg << "</svg>\n";
        return svg.str();
    }
};

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool dashed = false;
};

std::string line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series) {
    Canvas c;
    bool first = true;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                c.x0 = c.x1 = x;
                c.y0 = c.y1 = y;
                first = false;
            }
            c.x0 = std::min(c.x0, x);
            c.x1 = std::max(c.x1, x);
            c.y0 = std::min(c.y0, y);
            c.y1 = std::max(c.y1, y);
        }
    }
    const double pad = (c.y1 - c.y0) * 0.05;
    c.y0 -= pad;
    c.y1 += pad;
    c.open(title, xlabel, ylabel);
    c.x_ticks();
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[(series[i].dashed ? i / 2 : i) % 10];
        c.svg << "<path d=\"";
        for (std::size_t k = 0; k < series[i].points.size(); ++k) {
            c.svg << (k ? " L" : "M") << fmt(c.px(series[i].points[k].first)) << ' '
                  << fmt(c.py(series[i].points[k].second));
        }
        c.svg << "\" stroke=\"" << color << "\" stroke-width=\"1.5\" fill=\"none\""
              << (series[i].dashed ? " stroke-dasharray=\"4 3\"" : "") << "/>\n";
        if (i < 24) c.legend(i, series[i].label, color, series[i].dashed);
    }
    return c.close();
}

std::string convergence(const Table& t) {
    const int it = t.col("iteration");
    const int ep = t.col("episode");
    const int gamma = t.col("gamma");
    std::vector<Series> series;
    if (it >= 0 && gamma >= 0) {
        const int agent = t.col("agent");
        std::map<std::string, Series> by_agent;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            if (!t.present(r, it) || !t.present(r, gamma)) continue;
            const auto key = agent >= 0 ? t.rows[r][static_cast<std::size_t>(agent)] : std::string("gamma");
            auto& s = by_agent[key];
            s.label = agent >= 0 ? "agent " + key : key;
            s.points.emplace_back(t.num(r, it), t.num(r, gamma));
        }
        for (auto& [k, s] : by_agent) series.push_back(std::move(s));
        return line_plot("outer iterations", "iteration", "gamma", series);
    }
    const int dev = t.col("device");
    const int aoi = t.col("eval_avg_aoi");
    if (ep >= 0 && dev >= 0 && aoi >= 0 && gamma >= 0) {
        std::map<long, std::pair<Series, Series>> by_dev;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const long d = static_cast<long>(t.num(r, dev));
            auto& [a, g] = by_dev[d];
            a.label = "AoI dev " + std::to_string(d);
            g.label = "gamma dev " + std::to_string(d);
            g.dashed = true;
            a.points.emplace_back(t.num(r, ep), t.num(r, aoi));
            g.points.emplace_back(t.num(r, ep), t.num(r, gamma));
        }
        for (auto& [d, pair] : by_dev) {
            series.push_back(std::move(pair.first));
            series.push_back(std::move(pair.second));
        }
        return line_plot("evaluated AoI and gamma", "episode", "seconds", series);
    }
    throw ConfigError("plot: table has no convergence columns (iteration,gamma or episode,device,eval_avg_aoi,gamma)");
}

std::string bars(const Table& t) {
    const int value = t.col("value");
    const int mode = t.col("mode");
    const int aoi = t.col("mean_aoi");
    const int axis = t.col("axis");
    if (value < 0 || mode < 0 || aoi < 0) throw ConfigError("plot: bars need value,mode,mean_aoi columns");
    std::vector<double> values;
    std::vector<std::string> modes;
    std::map<std::pair<double, std::string>, std::vector<double>> cells;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const double v = t.num(r, value);
        const auto& m = t.rows[r].at(static_cast<std::size_t>(mode));
        if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
        if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
        cells[{v, m}].push_back(t.num(r, aoi));
    }
    std::sort(values.begin(), values.end());
    Canvas c;
    c.x0 = 0.0;
    c.x1 = static_cast<double>(values.size());
    c.y0 = 0.0;
    c.y1 = 0.0;
    for (const auto& [k, xs] : cells) c.y1 = std::max(c.y1, *std::max_element(xs.begin(), xs.end()));
    c.y1 *= 1.1;
    const std::string axis_name = axis >= 0 ? t.rows[0].at(static_cast<std::size_t>(axis)) : "value";
    c.open("average AoI by " + axis_name, axis_name, "average AoI (s)");
    const double group = c.px(1.0) - c.px(0.0);
    const double bar = group * 0.8 / static_cast<double>(modes.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double gx = c.px(static_cast<double>(i)) + group * 0.1;
        c.svg << "<text x=\"" << fmt(gx + group * 0.4) << "\" y=\"" << c.height - c.bottom + 16
              << "\" text-anchor=\"middle\">" << fmt(values[i]) << "</text>\n";
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const auto it = cells.find({values[i], modes[k]});
            if (it == cells.end()) continue;
            const auto& xs = it->second;
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
            const double x = gx + bar * static_cast<double>(k);
            c.svg << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(c.py(mean)) << "\" width=\"" << fmt(bar * 0.9)
                  << "\" height=\"" << fmt(c.py(0.0) - c.py(mean)) << "\" fill=\"" << kPalette[k % 10] << "\"/>\n";
            const double cx = x + bar * 0.45;
            c.svg << "<path d=\"M" << fmt(cx) << ' ' << fmt(c.py(*lo)) << " L" << fmt(cx) << ' ' << fmt(c.py(*hi))
                  << " M" << fmt(cx - 3) << ' ' << fmt(c.py(*lo)) << " L" << fmt(cx + 3) << ' ' << fmt(c.py(*lo))
                  << " M" << fmt(cx - 3) << ' ' << fmt(c.py(*hi)) << " L" << fmt(cx + 3) << ' ' << fmt(c.py(*hi))
                  << "\" stroke=\"black\"/>\n";
        }
    }
    for (std::size_t k = 0; k < modes.size(); ++k) c.legend(k, modes[k], kPalette[k % 10]);
    return c.close();
}

}  // namespace

std::string plot_svg(std::istream& csv, PlotKind kind) {
    const auto t = read_table(csv);
    return kind == PlotKind::Convergence ? convergence(t) : bars(t);
}

}  // namespace aoimec::harness
