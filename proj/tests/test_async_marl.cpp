#include <algorithm>
#include <cmath>
#include <sstream>

#include "aoimec/async_marl.hpp"
#include "aoimec/errors.hpp"
#include "doctest.h"

using namespace aoimec;
using namespace aoimec::marl;

namespace {

SystemState toy_state(int devices, int edges) {
    SystemState s;
    s.indicators.assign(static_cast<std::size_t>(devices), Indicator::NeedsUpdate);
    s.queue_lengths.assign(static_cast<std::size_t>(edges), 0);
    s.last_latency.assign(static_cast<std::size_t>(devices), 0.5);
    s.aoi_now.assign(static_cast<std::size_t>(devices), 1.0);
    return s;
}

std::vector<double> random_vector(RngStream& r, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = scale * (2.0 * r.uniform() - 1.0);
    return v;
}

// A synthetic transition with a recurrent history, so both parameter sets
// receive gradient.
Transition random_transition(const MarlLearner& l, Head head, RngStream& r) {
    const auto& shape = l.agents[0].shape(head);
    const std::size_t obs = shape.input - l.gru_shape.hidden;
    Transition t;
    t.from.observation = random_vector(r, obs);
    t.from.prev_input = random_vector(r, l.gru_shape.input);
    t.from.prev_history = random_vector(r, l.gru_shape.hidden, 0.5);
    t.from.history = nn::gru_step(l.gru_shape, l.gru, t.from.prev_input, t.from.prev_history);
    t.from.action = static_cast<int>(r.uniform_index(shape.output));
    t.cost = {2.0 * r.uniform(), 0.5 + r.uniform()};
    t.next_observation = random_vector(r, obs);
    t.next_history = random_vector(r, l.gru_shape.hidden, 0.5);
    return t;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

TEST_CASE("fractional cost values") {
    CHECK(fractional_cost(1, 0, 1, 1.5) == doctest::Approx(0.0));
    CHECK(fractional_cost(1, 0, 1, 1.5, false) == doctest::Approx(1.5));
    CHECK(fractional_cost(2, 1, 1, 1.0) == doctest::Approx(4.5));
    CHECK(fractional_cost(0, 0, 0, 2.0, false) == 0.0);
    CHECK(step_cost({7.5, 3.0}, 1.0, true) == doctest::Approx(4.5));
    CHECK(step_cost({7.5, 3.0}, 1.0, false) == doctest::Approx(2.5));
}

TEST_CASE("gamma update over a window") {
    CostModuleState s(1, 0.5);
    s.add(0, {1.5, 1.0});
    s.add(0, {1.5, 1.0});
    s.end_episode();
    CHECK(gamma_episode_update(s, 0) == doctest::Approx(1.5));
    // The window is consumed.
    CHECK_THROWS_AS(gamma_episode_update(s, 0), InvalidArgument);
    CHECK_THROWS_AS(gamma_episode_update(s, 3), InvalidArgument);
}

TEST_CASE("discounted fractional cost vanishes at the realized ratio") {
    RngStream r(4, "costs");
    const double delta = 0.9;
    std::vector<aoi::FractionalCost> costs;
    for (int k = 0; k < 40; ++k) costs.push_back({3.0 * r.uniform(), 0.2 + r.uniform()});
    CostModuleState s(1, delta);
    for (const auto& c : costs) s.add(0, c);
    s.end_episode();
    const double gamma = gamma_episode_update(s, 0);
    double total = 0.0, w = 1.0;
    for (const auto& c : costs) {
        total += w * step_cost(c, gamma, true);
        w *= delta;
    }
    CHECK(std::abs(total) < 1e-9);
}

TEST_CASE("wait grid spans zero to the deadline") {
    const auto g = wait_grid(2.0, 11);
    REQUIRE(g.size() == 11);
    CHECK(g.front() == 0.0);
    CHECK(g.back() == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(0.2));
    CHECK_THROWS_AS(wait_grid(1.0, 1), InvalidArgument);
}

TEST_CASE("zero Q picks the lowest index greedily") {
    const auto sc = ScenarioConfig::desk();
    MarlLearner l(sc, MarlConfig{});
    for (auto& a : l.agents) {
        a.wait_q.fill(0.0);
        a.offload_q.fill(0.0);
    }
    RngStream r(1, "act");
    Decision d{0, Indicator::NeedsUpdate, toy_state(5, 2), 0.0};
    const std::vector<double> h(l.gru_shape.hidden, 0.0);
    int k = -1;
    auto a = act(l, d, h, 0.0, r, &k);
    CHECK(k == 0);
    CHECK(a.kind == HybridAction::Kind::Wait);
    CHECK(a.wait == 0.0);
    d.need = Indicator::NeedsOffload;
    a = act(l, d, h, 0.0, r, &k);
    CHECK(k == 0);
    CHECK(a.kind == HybridAction::Kind::Offload);
    CHECK(a.target == kLocalTarget);
    d.need = Indicator::Busy;
    CHECK_THROWS_AS(act(l, d, h, 0.0, r), IllegalActionError);
}

TEST_CASE("full exploration is uniform") {
    const auto sc = ScenarioConfig::desk();
    MarlLearner l(sc, MarlConfig{});
    RngStream r(9, "chi2");
    const auto obs = observation_features(toy_state(5, 2), 0, 5, l.agents[0].deadline);
    const std::vector<double> h(l.gru_shape.hidden, 0.0);
    const int draws = 10'000;
    const int bins = l.config.wait_grid;
    std::vector<int> count(static_cast<std::size_t>(bins), 0);
    for (int i = 0; i < draws; ++i) {
        bool explored = false;
        ++count[static_cast<std::size_t>(act_index(l, 0, Head::Wait, obs, h, 1.0, r, &explored))];
        REQUIRE(explored);
    }
    const double expected = static_cast<double>(draws) / bins;
    double chi2 = 0.0;
    for (int c : count) chi2 += (c - expected) * (c - expected) / expected;
    // 99th percentile of chi-square with 10 degrees of freedom.
    CHECK(chi2 < 23.209);
}

TEST_CASE("collector orders decisions and replays histories exactly") {
    nn::GruShape shape{embedding_size(2, 2), 4};
    Collector c(shape, 2, true);
    auto params = nn::make_gru_params(shape);
    RngStream init(3, "gru");
    params.init_uniform(init);
    c.set_params(params);
    const auto s = toy_state(2, 2);
    for (int i = 0; i < 6; ++i) {
        const int dev = i % 2;
        c.collect(dev, Indicator::NeedsUpdate, 0.5 * i, {1.0}, i % 3,
                  embed_decision(s, dev, 2, Indicator::NeedsUpdate, i % 3, 11));
    }
    const auto& tr = c.trajectory();
    REQUIRE(tr.size() == 6);
    std::vector<double> h(4, 0.0);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        CHECK(tr[i].index == i);
        CHECK(tr[i].device == static_cast<int>(i % 2));
        CHECK(tr[i].history == h);
        if (i > 0) CHECK(nn::gru_step(shape, params, tr[i].prev_input, tr[i].prev_history) == tr[i].history);
        h = nn::gru_step(shape, params, embed_decision(s, tr[i].device, 2, Indicator::NeedsUpdate,
                                                       tr[i].action, 11),
                         h);
    }
    CHECK(c.history_for(0) == h);
    CHECK(c.history_for(1) == h);
    CHECK_THROWS_AS(c.collect(0, Indicator::NeedsUpdate, 1.0, {}, 0, std::vector<double>(shape.input)),
                    InvalidArgument);
    CHECK_THROWS_AS(c.collect(0, Indicator::NeedsUpdate, 9.0, {}, 0, std::vector<double>(3)),
                    InvalidArgument);
    CHECK_THROWS_AS(c.collect(2, Indicator::NeedsUpdate, 9.0, {}, 0, std::vector<double>(shape.input)),
                    InvalidArgument);
}

TEST_CASE("zero recurrent parameters keep the history at zero") {
    nn::GruShape shape{embedding_size(3, 2), 5};
    Collector c(shape, 3, true);  // fresh parameters are all zero
    const auto s = toy_state(3, 2);
    for (int i = 0; i < 9; ++i) {
        c.collect(i % 3, Indicator::NeedsOffload, i, {}, 1, embed_decision(s, i % 3, 3, Indicator::NeedsOffload, 1, 11));
    }
    for (const auto& rec : c.trajectory()) {
        for (double v : rec.history) CHECK(v == 0.0);
    }
    for (double v : c.history_for(0)) CHECK(v == 0.0);
}

TEST_CASE("single agent gets a running history") {
    nn::GruShape shape{embedding_size(1, 1), 3};
    auto params = nn::make_gru_params(shape);
    RngStream init(8, "gru");
    params.init_uniform(init);
    Collector c(shape, 1, true);
    c.set_params(params);
    const auto s = toy_state(1, 1);
    for (int i = 0; i < 4; ++i) c.collect(0, Indicator::NeedsUpdate, i, {}, i, embed_decision(s, 0, 1, Indicator::NeedsUpdate, i, 11));
    const auto& tr = c.trajectory();
    CHECK(tr[0].prev_history.empty());
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i].prev_history == tr[i - 1].history);
}

TEST_CASE("synchronous collection keeps per-agent rows padded with the others") {
    nn::GruShape shape{embedding_size(2, 1), 3};
    auto params = nn::make_gru_params(shape);
    RngStream init(5, "gru");
    params.init_uniform(init);
    Collector sync(shape, 2, false);
    sync.set_params(params);
    const auto s = toy_state(2, 1);
    const auto e0 = embed_decision(s, 0, 2, Indicator::NeedsUpdate, 4, 11);
    const auto e1 = embed_decision(s, 1, 2, Indicator::NeedsOffload, 1, 11);
    sync.collect(0, Indicator::NeedsUpdate, 0.0, {}, 4, e0);
    sync.collect(1, Indicator::NeedsOffload, 1.0, {}, 1, e1);

    const std::vector<double> zero(3, 0.0);
    std::vector<double> pad0(shape.input), pad1(shape.input);
    for (std::size_t i = 0; i < shape.input; ++i) {
        pad0[i] = e0[i] / 2.0;
        pad1[i] = (e0[i] + e1[i]) / 2.0;
    }
    CHECK(sync.history_for(0) == nn::gru_step(shape, params, pad0, zero));
    CHECK(sync.history_for(1) == nn::gru_step(shape, params, pad1, zero));
    // The second record saw agent 1's own (initial) row, not agent 0's.
    CHECK(sync.trajectory()[1].history == zero);
}

TEST_CASE("TD gradients match finite differences") {
    const auto sc = ScenarioConfig::desk();
    MarlConfig cfg;
    cfg.hidden = 6;
    cfg.history_dim = 3;
    for (Head head : {Head::Wait, Head::Offload}) {
        for (bool fractional : {true, false}) {
            cfg.fractional = fractional;
            MarlLearner l(sc, cfg);
            l.agents[0].gamma = 0.7;
            RngStream r(fractional ? 11 : 12, "td");
            // Distinct targets so the bootstrap term is not the online net.
            l.agents[0].wait_target.init_uniform(r);
            l.agents[0].offload_target.init_uniform(r);
            std::vector<Transition> batch;
            for (int i = 0; i < 4; ++i) batch.push_back(random_transition(l, head, r));
            // History for non-recurrent samples comes straight from the record.
            batch[3].from.prev_history.clear();
            const auto g = td_loss_and_grad(l, 0, head, batch);

            auto q_loss = [&](const nn::ParamVector& p) {
                MarlLearner c = l;
                c.agents[0].params(head) = p;
                return 0.5 * td_loss_and_grad(c, 0, head, batch).loss;
            };
            auto gru_loss = [&](const nn::ParamVector& p) {
                MarlLearner c = l;
                c.gru = p;
                return 0.5 * td_loss_and_grad(c, 0, head, batch).loss;
            };
            const auto fq = nn::finite_difference_gradient(q_loss, l.agents[0].params(head));
            const auto fg = nn::finite_difference_gradient(gru_loss, l.gru);
            CHECK(nn::max_relative_error(g.q_grad.values, fq) < 1e-4);
            CHECK(nn::max_relative_error(g.gru_grad.values, fg) < 1e-4);
        }
    }
}

TEST_CASE("TD loss is non-increasing on a fixed batch with a small step") {
    const auto sc = ScenarioConfig::desk();
    MarlConfig cfg;
    cfg.lr = 1e-3;
    cfg.grad_clip = 0.0;
    cfg.target_period = 1'000'000;
    MarlLearner l(sc, cfg);
    RngStream r(2, "batch");
    std::vector<Transition> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(random_transition(l, Head::Offload, r));
    double prev = td_loss_and_grad(l, 0, Head::Offload, batch).loss;
    for (int i = 0; i < 50; ++i) {
        train_step(l, 0, Head::Offload, batch);
        const double now = td_loss_and_grad(l, 0, Head::Offload, batch).loss;
        CHECK(now <= prev + 1e-12);
        prev = now;
    }
    CHECK_THROWS_AS(td_loss_and_grad(l, 0, Head::Offload, {}), InvalidArgument);
}

TEST_CASE("training is deterministic per seed") {
    auto sc = ScenarioConfig::desk();
    sc.episode_horizon = 60.0;
    MarlConfig cfg;
    cfg.episodes = 6;
    cfg.eval_every = 3;
    cfg.eval_episodes = 2;
    cfg.gamma_period = 2;
    cfg.seed = 7;
    std::ostringstream a, b;
    write_metrics_csv(a, run_training(sc, cfg), cfg.seed);
    write_metrics_csv(b, run_training(sc, cfg), cfg.seed);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("# aoimec marl-metrics v1\nepisode,seed,device,eval_avg_aoi,gamma", 0) == 0);
    cfg.seed = 8;
    std::ostringstream c;
    write_metrics_csv(c, run_training(sc, cfg), cfg.seed);
    CHECK(a.str() != c.str());
}

TEST_CASE("environment streams do not depend on the learner mode") {
    // Zero-wait runs on the training seeds of two differently configured
    // learners see identical environments.
    const auto sc = ScenarioConfig::desk();
    MecSimulator sim(sc);
    RngStream unused(1, "x");
    const auto policy = baseline_policy(sc, Baseline::ZeroWait, unused);
    const auto a = run_episode(sim, train_env_seed(3, 4), policy);
    const auto b = run_episode(sim, train_env_seed(3, 4), policy);
    CHECK(a.avg_aoi == b.avg_aoi);
    CHECK(a.decisions == b.decisions);
    CHECK(train_env_seed(3, 4) != train_env_seed(3, 5));
    CHECK(eval_env_seed(3, 0) != train_env_seed(3, 0));
}

TEST_CASE("random baseline has no trend") {
    auto sc = ScenarioConfig::desk();
    sc.episode_horizon = 100.0;
    std::vector<double> slopes;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        MarlConfig cfg;
        cfg.baseline = Baseline::Random;
        cfg.episodes = 15;
        cfg.eval_every = 1;
        cfg.eval_episodes = 1;
        cfg.seed = seed;
        const auto res = run_training(sc, cfg);
        std::vector<double> x, y;
        for (const auto& m : res.metrics) {
            x.push_back(m.episode);
            double s = 0.0;
            for (double v : m.eval_aoi) s += v;
            y.push_back(s / static_cast<double>(m.eval_aoi.size()));
        }
        slopes.push_back(slope(x, y));
    }
    double mean = 0.0;
    for (double s : slopes) mean += s;
    mean /= static_cast<double>(slopes.size());
    double var = 0.0;
    for (double s : slopes) var += (s - mean) * (s - mean);
    var /= static_cast<double>(slopes.size() - 1);
    const double t = mean / std::sqrt(var / static_cast<double>(slopes.size()));
    // Two-sided 5% critical value, 5 degrees of freedom.
    CHECK(std::abs(t) < 2.571);
}

TEST_CASE("zero-wait baseline reports the same evaluation every time") {
    auto sc = ScenarioConfig::desk();
    sc.episode_horizon = 80.0;
    MarlConfig cfg;
    cfg.baseline = Baseline::ZeroWait;
    cfg.episodes = 4;
    cfg.eval_every = 1;
    cfg.eval_episodes = 2;
    const auto res = run_training(sc, cfg);
    REQUIRE(res.metrics.size() == 4);
    for (const auto& m : res.metrics) CHECK(m.eval_aoi == res.metrics[0].eval_aoi);
    for (const auto& m : res.metrics) {
        for (const auto& f : m.offload_fraction) CHECK(f[0] == 0.0);  // never local
    }
}

TEST_CASE("learner avoids a congested edge") {
    auto sc = ScenarioConfig::ring(3, 2);
    sc.edges[1].capacity_ghz = sc.edges[0].capacity_ghz / 10.0;
    sc.episode_horizon = 150.0;
    MarlConfig cfg;
    cfg.episodes = 40;
    cfg.eval_every = 40;
    cfg.eval_episodes = 3;
    cfg.seed = 2;
    const auto res = run_training(sc, cfg);
    const auto& last = res.metrics.back();
    for (const auto& f : last.offload_fraction) CHECK(f[2] <= 0.1);
}
