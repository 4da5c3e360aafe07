// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any
// fails. Settings for each check are printed alongside the measurement.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "aoimec/approximators.hpp"
#include "aoimec/async_marl.hpp"
#include "aoimec/fql.hpp"
#include "aoimec/harness.hpp"
#include "aoimec/nashq.hpp"
#include "aoimec/oracles.hpp"

using namespace aoimec;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// The ten FQL instances shared by the first two checks.
FractionalMdp fql_instance(int seed) {
    return FractionalMdp::random(2 + seed % 3, 2 + seed % 2, 0.8, static_cast<std::uint64_t>(seed));
}

Outcome fql_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int seed = 1; seed <= 10; ++seed) {
        const auto mdp = fql_instance(seed);
        fql::FqlConfig c;
        c.inner_steps = 50'000;
        c.episodes = 30;
        RngStream r(static_cast<std::uint64_t>(seed), "fql");
        const auto res = fql::run_fql(mdp, c, r);
        worst = std::max(worst, std::abs(res.gamma_trace.back() - oracles::exact_gamma_star(mdp).gamma));
    }
    const double t = seconds_since(t0);
    return {worst < 1e-3 && t < 60.0,
            fmt("10 MDPs, delta 0.8, 50000 sampled steps x 30 iterations: worst |gamma - gamma*| = %.2e, %.1f s",
                worst, t)};
}

Outcome linear_rate() {
    constexpr double alpha = 0.3;
    bool ok = true;
    std::string tails;
    for (int seed = 1; seed <= 10; ++seed) {
        const auto mdp = fql_instance(seed);
        const double star = oracles::exact_gamma_star(mdp).gamma;
        fql::FqlConfig c;
        c.alpha = alpha;
        c.backup = fql::Backup::Expected;
        c.init = fql::InnerInit::ResetQ;
        c.budget_mode = fql::BudgetMode::StoppingCondition;
        c.schedule.kind = fql::StepSchedule::Kind::Constant;
        c.schedule.value = 0.1;
        c.episodes = 40;
        c.tolerance = 1e-9;
        c.max_inner_steps = 20'000;
        c.gamma_star = star;
        c.error_oracle = [&mdp](const DecomposedQ& q) {
            return oracles::sup_norm_error(oracles::exact_optimal_q(mdp, q.gamma), q.n_table, q.d_table);
        };
        RngStream r(static_cast<std::uint64_t>(seed), "fql");
        const auto res = fql::run_fql(mdp, c, r);

        // First iterate after which γ_i − γ* keeps its sign.
        const auto& g = res.gamma_trace;
        std::size_t stable = g.size() - 1;
        while (stable > 0 && (g[stable - 1] - star) * (g.back() - star) > 0.0) --stable;
        std::vector<double> ratios;
        for (const auto& rec : res.records) {
            if (rec.contraction && static_cast<std::size_t>(rec.iteration) >= stable) ratios.push_back(*rec.contraction);
        }
        bool seed_ok = ratios.size() >= 3;
        for (double x : ratios) seed_ok = seed_ok && x > 0.0 && x < 1.0;
        if (seed_ok) {
            for (std::size_t k = ratios.size() - 3; k < ratios.size(); ++k) {
                seed_ok = seed_ok && std::abs(ratios[k] - alpha) <= 0.15;
            }
        }
        ok = ok && seed_ok;
        tails += fmt(" %.3f", ratios.empty() ? NAN : ratios.back());
        if (!seed_ok) tails += "(!)";
    }
    return {ok, fmt("alpha %.1f, exact-error stopping rule; last ratio per instance:", alpha) + tails};
}

Outcome newton_single_agent() {
    double eta_max = 0.0;
    bool ok = true;
    std::size_t steps = 0;
    for (int seed = 1; seed <= 10; ++seed) {
        fnql::FnqlConfig c;
        c.inner_steps = 2000;
        c.max_outer = 20;
        c.epsilon = 1e-12;
        RngStream r(static_cast<std::uint64_t>(seed), "fnql");
        const auto res = fnql::run_fnql(MarkovGame::from_mdp(fql_instance(seed)), c, r);
        const auto& d = res.diagnostics;
        for (std::size_t i = 0; i < d.eta.size(); ++i) ok = ok && d.eta[i] <= d.eta_roundoff[i];
        steps += d.eta.size();
        eta_max = std::max(eta_max, d.eta_max);
    }
    return {ok, fmt("10 one-agent runs, %zu outer steps: max eta = %.1e, every step within its rounding bound",
                    steps, eta_max)};
}

Outcome fnql_equilibrium() {
    fql::FqlConfig fc;
    fc.inner_steps = 15;
    fc.episodes = 30;
    fc.backup = fql::Backup::Expected;
    fc.schedule.kind = fql::StepSchedule::Kind::Constant;
    fc.schedule.value = 1.0;
    fc.tolerance = 1e-10;
    fnql::FnqlConfig nc;
    nc.inner_steps = fc.inner_steps;
    nc.max_outer = fc.episodes;
    nc.backup = fc.backup;
    nc.schedule = fc.schedule;
    nc.epsilon = 1e-9;

    double trace_gap = 0.0;
    for (int seed = 1; seed <= 5; ++seed) {
        const auto a = FractionalMdp::random(2, 2, 0.8, 100 + static_cast<std::uint64_t>(seed));
        const auto b = FractionalMdp::random(3, 2, 0.8, 200 + static_cast<std::uint64_t>(seed));
        RngStream sa(1, "a"), sb(1, "b"), sg(1, "game");
        const auto fa = fql::run_fql(a, fc, sa);
        const auto fb = fql::run_fql(b, fc, sb);
        const auto ng = fnql::run_fnql(MarkovGame::decoupled(a, b), nc, sg);
        const std::vector<const std::vector<double>*> solo{&fa.gamma_trace, &fb.gamma_trace};
        for (std::size_t m = 0; m < 2; ++m) {
            const auto& x = *solo[m];
            const auto& y = ng.gamma_traces[m];
            for (std::size_t i = 0; i < std::max(x.size(), y.size()); ++i) {
                // A trace that stopped early holds its last value.
                const double u = x[std::min(i, x.size() - 1)];
                const double v = y[std::min(i, y.size() - 1)];
                trace_gap = std::max(trace_gap, std::abs(u - v));
            }
        }
    }

    nc.inner_steps = 200;
    nc.max_outer = 100;
    nc.epsilon = 1e-6;
    int games = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 40 && games < 10; ++seed) {
        const auto g = MarkovGame::random_coupled(2, 2, 0.8, 0.5, seed);
        if (oracles::pure_equilibria(g, 1e-9).empty()) continue;
        ++games;
        RngStream r(seed, "fnql");
        const auto res = fnql::run_fnql(g, nc, r);
        for (double x : oracles::nash_deviation_scan(g, res.policy)) worst = std::max(worst, x);
    }
    return {trace_gap <= 1e-3 && games >= 5 && worst <= 1e-2,
            fmt("5 decoupled games: max trace gap %.1e; %d coupled games with pure equilibria: worst "
                "unilateral improvement %.1e",
                trace_gap, games, worst)};
}

Outcome aoi_identity() {
    double worst = 0.0;
    int drop_free = 0;
    std::uint64_t drop_free_drops = 0;
    auto sc = ScenarioConfig::desk();
    sc.drop_coefficient = 1e3;
    MecSimulator sim(sc);
    sim.set_event_logging(false);
    for (int ep = 0; ep < 100; ++ep) {
        RngStream pick(static_cast<std::uint64_t>(ep), "acceptance-policy");
        const marl::Policy policy = [&](const Decision& d) {
            if (d.need == Indicator::NeedsUpdate) return HybridAction::Wait(2.0 * pick.uniform());
            const auto k = static_cast<int>(pick.uniform_index(3));
            return k == 0 ? HybridAction::Local() : HybridAction::Edge(k - 1);
        };
        const auto out = marl::run_episode(sim, static_cast<std::uint64_t>(1000 + ep), policy);
        for (int m = 0; m < sc.num_devices(); ++m) {
            drop_free_drops += out.drops[static_cast<std::size_t>(m)];
            const auto& log = sim.completion_logs()[static_cast<std::size_t>(m)];
            if (log.entries.empty()) continue;
            double area = 0.0;
            for (const auto& c : out.costs[static_cast<std::size_t>(m)]) area += c.numerator;
            // The emitted areas stop at the last completion minus the last
            // task's own triangle.
            const double y = log.entries.back().duration;
            const double ref = oracles::sawtooth_integral(log, log.origin, log.entries.back().end_time);
            worst = std::max(worst, std::abs(area + 0.5 * y * y - ref) / ref);
        }
        ++drop_free;
    }

    // With drops: zero-wait on the congested scenario.
    const auto cong = ScenarioConfig::congested();
    MecSimulator csim(cong);
    csim.set_event_logging(false);
    RngStream unused(1, "unused");
    const auto zw = marl::baseline_policy(cong, marl::Baseline::ZeroWait, unused);
    double tile = 0.0;
    bool bounded = true;
    std::uint64_t drops = 0;
    for (int ep = 0; ep < 20; ++ep) {
        const auto out = marl::run_episode(csim, static_cast<std::uint64_t>(ep), zw);
        for (int m = 0; m < cong.num_devices(); ++m) {
            drops += out.drops[static_cast<std::size_t>(m)];
            const auto& log = csim.completion_logs()[static_cast<std::size_t>(m)];
            double d = 0.0;
            for (const auto& c : out.costs[static_cast<std::size_t>(m)]) d += c.denominator;
            const auto& last = log.entries.back();
            tile = std::max(tile, std::abs(d + last.duration - (last.end_time - log.origin)));
            // The task in flight at the horizon is the only uncovered time.
            const double rest = cong.episode_horizon - d;
            bounded = bounded && rest >= 0.0 && rest <= 2.0 * cong.deadline(m) + 1e-9;
        }
    }
    return {worst <= 1e-9 && drop_free_drops == 0 && tile <= 1e-9 && bounded && drops > 0,
            fmt("%d drop-free episodes: worst relative gap %.1e; 20 congested episodes with %llu drops: "
                "time tiling error %.1e, uncovered tail within two deadlines: %s",
                drop_free, worst, static_cast<unsigned long long>(drops), tile, bounded ? "yes" : "no")};
}

Outcome budget() {
    const auto b = fql::sample_budget(8, 10, 0.1, 0.5);
    const double per_doubling = 11.66 * std::log(2.0) / 0.25;
    bool additive = true;
    std::string steps = fmt("%llu", static_cast<unsigned long long>(b.steps));
    std::uint64_t prev = b.steps;
    for (double z : {16.0, 32.0, 64.0, 128.0}) {
        const auto next = fql::sample_budget(z, 10, 0.1, 0.5).steps;
        const double diff = static_cast<double>(next) - static_cast<double>(prev);
        // Ceilings of values that differ by per_doubling.
        additive = additive && std::abs(diff - per_doubling) < 1.0;
        steps += fmt(", %llu", static_cast<unsigned long long>(next));
        prev = next;
    }
    return {b.steps == 130 && !b.floored && additive,
            fmt("|Z| = 8..128: %s steps, increment per doubling %.3f", steps.c_str(), per_doubling)};
}

nn::ParamVector as_params(std::span<const double> v) {
    nn::ParamVector p;
    p.add("v", v.size(), 1, 1);
    std::copy(v.begin(), v.end(), p.values.begin());
    return p;
}

std::vector<double> random_vector(RngStream& r, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (2.0 * r.uniform() - 1.0);
    return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Worst relative error across the MLP, the recurrent cell and both TD heads
// for one random configuration.
double gradient_config(std::uint64_t seed) {
    RngStream r(seed, "gradients");
    double worst = 0.0;
    auto track = [&](std::span<const double> a, std::span<const double> b) {
        worst = std::max(worst, nn::max_relative_error(a, b));
    };

    const nn::MlpShape ms{1 + r.uniform_index(6), 1 + r.uniform_index(8), 1 + r.uniform_index(5)};
    auto mp = nn::make_mlp_params(ms);
    mp.init_uniform(r);
    const auto x = random_vector(r, ms.input);
    const auto w = random_vector(r, ms.output);
    {
        nn::MlpCache cache;
        nn::mlp_forward(ms, mp, x, &cache);
        auto grad = mp.zeros_like();
        const auto dx = nn::mlp_backward(ms, mp, cache, w, grad);
        track(grad.values, nn::finite_difference_gradient(
                               [&](const nn::ParamVector& p) { return dot(nn::mlp_forward(ms, p, x), w); }, mp));
        track(dx, nn::finite_difference_gradient(
                      [&](const nn::ParamVector& p) { return dot(nn::mlp_forward(ms, mp, p.values), w); },
                      as_params(x)));
    }

    const nn::GruShape gs{1 + r.uniform_index(6), 1 + r.uniform_index(6)};
    auto gp = nn::make_gru_params(gs);
    gp.init_uniform(r);
    const auto gx = random_vector(r, gs.input);
    const auto gh = random_vector(r, gs.hidden, 0.8);
    const auto gw = random_vector(r, gs.hidden);
    {
        nn::GruCache cache;
        nn::gru_step(gs, gp, gx, gh, &cache);
        auto grad = gp.zeros_like();
        const auto in = nn::gru_backward(gs, gp, cache, gw, grad);
        track(grad.values, nn::finite_difference_gradient(
                               [&](const nn::ParamVector& p) { return dot(nn::gru_step(gs, p, gx, gh), gw); }, gp));
        track(in.dx, nn::finite_difference_gradient(
                         [&](const nn::ParamVector& p) { return dot(nn::gru_step(gs, gp, p.values, gh), gw); },
                         as_params(gx)));
        track(in.dh, nn::finite_difference_gradient(
                         [&](const nn::ParamVector& p) { return dot(nn::gru_step(gs, gp, gx, p.values), gw); },
                         as_params(gh)));
    }

    // TD loss through both the Q head and the recurrent cell.
    auto sc = ScenarioConfig::ring(2 + static_cast<int>(r.uniform_index(3)), 1 + static_cast<int>(r.uniform_index(2)));
    marl::MarlConfig mc;
    mc.hidden = 2 + r.uniform_index(6);
    mc.history_dim = 1 + r.uniform_index(4);
    mc.fractional = r.uniform() < 0.5;
    mc.seed = seed;
    marl::MarlLearner l(sc, mc);
    l.agents[0].gamma = 2.0 * r.uniform();
    l.agents[0].wait_target.init_uniform(r);
    l.agents[0].offload_target.init_uniform(r);
    const auto head = r.uniform() < 0.5 ? marl::Head::Wait : marl::Head::Offload;
    const auto& shape = l.agents[0].shape(head);
    const std::size_t obs = shape.input - l.gru_shape.hidden;
    std::vector<marl::Transition> batch;
    for (int i = 0; i < 3; ++i) {
        marl::Transition t;
        t.from.observation = random_vector(r, obs);
        t.from.prev_input = random_vector(r, l.gru_shape.input);
        t.from.prev_history = random_vector(r, l.gru_shape.hidden, 0.5);
        t.from.history = nn::gru_step(l.gru_shape, l.gru, t.from.prev_input, t.from.prev_history);
        t.from.action = static_cast<int>(r.uniform_index(shape.output));
        t.cost = {3.0 * r.uniform(), 0.2 + r.uniform()};
        t.next_observation = random_vector(r, obs);
        t.next_history = random_vector(r, l.gru_shape.hidden, 0.5);
        batch.push_back(std::move(t));
    }
    const auto g = marl::td_loss_and_grad(l, 0, head, batch);
    track(g.q_grad.values, nn::finite_difference_gradient(
                               [&](const nn::ParamVector& p) {
                                   auto c = l;
                                   c.agents[0].params(head) = p;
                                   return 0.5 * marl::td_loss_and_grad(c, 0, head, batch).loss;
                               },
                               l.agents[0].params(head)));
    track(g.gru_grad.values, nn::finite_difference_gradient(
                                 [&](const nn::ParamVector& p) {
                                     auto c = l;
                                     c.gru = p;
                                     return 0.5 * marl::td_loss_and_grad(c, 0, head, batch).loss;
                                 },
                                 l.gru));
    return worst;
}

Outcome gradients() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) worst = std::max(worst, gradient_config(seed));
    return {worst < 1e-4, fmt("100 random configurations (MLP, recurrent cell, TD heads): max relative error %.1e",
                             worst)};
}

// Learner runs on the desk scenario, shared by the direction and γ checks.
struct DeskRuns {
    std::vector<double> frac, nonfrac, random;
    std::vector<marl::TrainingResult> frac_results;
    double seconds = 0.0;
};

marl::MarlConfig desk_learner(const harness::Config& cfg) {
    auto c = harness::marl_from_config(cfg);
    c.eps_end = 0.01;
    c.eval_every = c.episodes;
    c.eval_episodes = 20;
    return c;
}

DeskRuns desk_runs() {
    const auto cfg = harness::Config::load(AOIMEC_CONFIG_DIR "/desk.cfg");
    const auto sc = harness::scenario_from_config(cfg);
    const auto base = desk_learner(cfg);
    DeskRuns runs;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto c = base;
        c.seed = seed;
        auto f = marl::run_training(sc, harness::apply_mode(c, "frac-async"));
        runs.frac.push_back(f.mean_eval_aoi);
        runs.frac_results.push_back(std::move(f));
        runs.nonfrac.push_back(marl::run_training(sc, harness::apply_mode(c, "nonfrac-async")).mean_eval_aoi);
        runs.random.push_back(marl::run_training(sc, harness::apply_mode(c, "random")).mean_eval_aoi);
    }
    runs.seconds = seconds_since(t0);
    return runs;
}

std::string joined(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += fmt(s.empty() ? "%.3f" : " %.3f", x);
    return s;
}

Outcome fractional_direction(const DeskRuns& r) {
    int wins = 0;
    for (std::size_t i = 0; i < r.frac.size(); ++i) wins += r.frac[i] < r.random[i];
    // One-sided sign test: P(at least `wins` of n | p = ½).
    const int n = static_cast<int>(r.frac.size());
    double p = 0.0;
    for (int k = wins; k <= n; ++k) p += std::tgamma(n + 1) / (std::tgamma(k + 1) * std::tgamma(n - k + 1));
    p /= std::pow(2.0, n);
    const double mf = median(r.frac), mn = median(r.nonfrac), mr = median(r.random);
    return {mf <= mn && mf <= mr && mn <= mr && p < 0.1,
            fmt("desk, %d seeds, eps_end 0.01 (%.0f s): median AoI frac %.3f, nonfrac %.3f, random %.3f; "
                "frac beats random on %d/%d seeds, sign test p = %.3f [frac %s | nonfrac %s | random %s]",
                n, r.seconds, mf, mn, mr, wins, n, p, joined(r.frac).c_str(), joined(r.nonfrac).c_str(),
                joined(r.random).c_str())};
}

Outcome gamma_consistency(const DeskRuns& r) {
    int converged = 0;
    double worst = 0.0;
    for (const auto& res : r.frac_results) {
        if (!res.converged) continue;
        ++converged;
        for (std::size_t k = 0; k < res.final_gamma.size(); ++k) {
            const double obj = res.final_eval_objective[k];
            worst = std::max(worst, std::abs(res.final_gamma[k] - obj) / obj);
        }
    }
    return {converged > 0 && worst <= 0.10,
            fmt("desk frac-async, eps_end 0.01: %d/%zu runs converged; worst per-agent |gamma - objective| / "
                "objective = %.1f%%",
                converged, r.frac_results.size(), 100.0 * worst)};
}

Outcome waiting_beats_zero_wait() {
    const auto cfg = harness::Config::load(AOIMEC_CONFIG_DIR "/congested.cfg");
    const auto sc = harness::scenario_from_config(cfg);
    const auto base = harness::marl_from_config(cfg);
    const auto waits = marl::wait_grid(sc.deadline(0), base.wait_grid);
    std::vector<double> gaps;
    bool positive = true;
    std::string per_seed;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto scan = marl::constant_wait_scan(sc, waits, base.eval_episodes, seed);
        positive = positive && scan.best_wait > 0.0 && scan.best_aoi < scan.mean_aoi.front();
        auto c = base;
        c.seed = seed;
        const auto res = marl::run_training(sc, c);
        const double gap = (res.mean_eval_aoi - scan.best_aoi) / scan.best_aoi;
        gaps.push_back(gap);
        per_seed += fmt(" [seed %llu: z* %.2f, oracle %.3f, zero-wait %.3f, learner %.3f, gap %+.1f%%]",
                        static_cast<unsigned long long>(seed), scan.best_wait, scan.best_aoi,
                        scan.mean_aoi.front(), res.mean_eval_aoi, 100.0 * gap);
    }
    const double med = median(gaps);
    return {positive && med <= 0.10,
            fmt("congested, 5 seeds (%.0f s): positive optimal wait on every seed: %s; median gap to the "
                "oracle %.1f%%",
                seconds_since(t0), positive ? "yes" : "no", 100.0 * med) +
                per_seed};
}

Outcome determinism() {
    std::vector<std::string> mismatched;
    auto twice = [&](const std::string& name, const std::function<std::string()>& f) {
        if (f() != f()) mismatched.push_back(name);
    };
    auto sc = ScenarioConfig::desk();
    sc.episode_horizon = 100.0;
    for (const char* mode : {"frac-async", "nonfrac-sync", "random"}) {
        twice(mode, [&] {
            marl::MarlConfig c;
            c.episodes = 8;
            c.eval_every = 4;
            c.eval_episodes = 2;
            c.gamma_period = 2;
            c.seed = 11;
            std::ostringstream out;
            marl::write_metrics_csv(out, marl::run_training(sc, harness::apply_mode(c, mode)), c.seed);
            return out.str();
        });
    }
    twice("fql", [] {
        RngStream r(3, "fql");
        fql::FqlConfig c;
        c.inner_steps = 2000;
        c.episodes = 10;
        std::ostringstream out;
        fql::write_fql_csv(out, fql::run_fql(fql_instance(3), c, r));
        return out.str();
    });
    twice("fnql", [] {
        RngStream r(3, "fnql");
        fnql::FnqlConfig c;
        c.inner_steps = 500;
        c.max_outer = 10;
        std::ostringstream out;
        fnql::write_fnql_csv(out, fnql::run_fnql(MarkovGame::random_coupled(2, 2, 0.8, 0.5, 3), c, r));
        return out.str();
    });
    // Worker count must not leak into sweep output.
    auto sweep = [&](unsigned workers) {
        marl::MarlConfig c;
        c.episodes = 2;
        c.eval_every = 1;
        c.eval_episodes = 1;
        const harness::SweepSpec spec{harness::Axis::EdgeCapacity, {20.0, 40.0}, {"frac-async", "zero-wait"}, {1, 2}};
        std::ostringstream out;
        harness::write_sweep_csv(out, spec.axis, harness::run_sweep(sc, c, spec, workers));
        return out.str();
    };
    if (sweep(1) != sweep(3)) mismatched.push_back("sweep");
    std::string names;
    for (const auto& m : mismatched) names += " " + m;
    return {mismatched.empty(), mismatched.empty()
                                    ? "metric CSVs byte-identical on repeat: frac-async, nonfrac-sync, random, "
                                      "fql, fnql, sweep (1 vs 3 workers)"
                                    : "differing outputs:" + names};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
    };
    report(1, "FQL correctness", fql_correctness);
    report(2, "linear rate", linear_rate);
    report(3, "Dinkelbach equals Newton for one agent", newton_single_agent);
    report(4, "FNQL equilibrium", fnql_equilibrium);
    report(5, "AoI accounting identity", aoi_identity);
    report(6, "sample-complexity budget", budget);
    report(7, "gradient correctness", gradients);
    DeskRuns desk;
    bool desk_ok = true;
    std::string desk_error;
    try {
        desk = desk_runs();
    } catch (const std::exception& e) {
        desk_ok = false;
        desk_error = e.what();
    }
    auto with_desk = [&](auto f) {
        return [&, f]() -> Outcome {
            if (!desk_ok) return {false, "desk runs failed: " + desk_error};
            return f(desk);
        };
    };
    report(8, "fractional vs non-fractional direction", with_desk(fractional_direction));
    report(9, "waiting beats zero-wait", waiting_beats_zero_wait);
    report(10, "determinism", determinism);
    report(11, "gamma / objective consistency", with_desk(gamma_consistency));
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
