#include "aoimec/async_marl.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>

#include "aoimec/errors.hpp"

namespace aoimec::marl {

namespace {

constexpr double kMax = std::numeric_limits<double>::max();

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

// Costs enter the networks in units of the deadline so that Q stays O(10).
double learner_cost(const MarlLearner& learner, int agent, const aoi::FractionalCost& c) {
    const auto& a = learner.agents[idx(agent)];
    const double raw = step_cost(c, a.gamma, learner.config.fractional);
    return learner.config.fractional ? raw / (a.deadline * a.deadline) : raw / a.deadline;
}

int argmin(std::span<const double> v) {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] < v[idx(best)]) best = static_cast<int>(i);
    }
    return best;
}

int shortest_queue(const SystemState& state) {
    int best = 0;
    for (std::size_t n = 1; n < state.queue_lengths.size(); ++n) {
        if (state.queue_lengths[n] < state.queue_lengths[idx(best)]) best = static_cast<int>(n);
    }
    return best;
}

}  // namespace

std::string_view to_string(Baseline b) {
    switch (b) {
        case Baseline::None: return "none";
        case Baseline::Random: return "random";
        case Baseline::ZeroWait: return "zero-wait";
        case Baseline::LocalOnly: return "local-only";
        case Baseline::GreedyQueue: return "greedy-queue";
    }
    return "none";
}

Baseline parse_baseline(std::string_view name) {
    for (auto b : {Baseline::None, Baseline::Random, Baseline::ZeroWait, Baseline::LocalOnly,
                   Baseline::GreedyQueue}) {
        if (name == to_string(b)) return b;
    }
    throw ConfigError("unknown baseline: " + std::string(name));
}

void MarlConfig::validate() const {
    if (episodes < 1) throw InvalidArgument("episodes must be >= 1");
    if (eval_every < 1 || eval_episodes < 1) throw InvalidArgument("evaluation cadence must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    if (gamma_period < 1) throw InvalidArgument("gamma_period must be >= 1");
    if (!(gamma_ema > 0.0 && gamma_ema <= 1.0)) throw InvalidArgument("gamma_ema must lie in (0,1]");
    if (wait_grid < 2) throw InvalidArgument("wait grid needs at least two points");
    if (hidden < 1 || history_dim < 1) throw InvalidArgument("network sizes must be >= 1");
    if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
    if (!(lr_final > 0.0 && lr_final <= 1.0)) throw InvalidArgument("lr_final must lie in (0,1]");
    if (!(grad_clip >= 0.0)) throw InvalidArgument("grad_clip must be >= 0");
    if (batch < 1 || buffer < batch) throw InvalidArgument("need 1 <= batch <= buffer");
    if (target_period < 1) throw InvalidArgument("target_period must be >= 1");
    if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= 1.0)) {
        throw InvalidArgument("exploration rates must lie in [0,1]");
    }
    if (!(eps_fraction > 0.0 && eps_fraction <= 1.0)) throw InvalidArgument("eps_fraction must lie in (0,1]");
}

// ---- cost module ----

double fractional_cost(double latency, double wait_next, double latency_next, double gamma,
                       bool fractional) {
    const double area = aoi::trapezoid_area(latency, wait_next, latency_next);
    const double interval = latency + wait_next;
    if (fractional) return area - gamma * interval;
    return interval > 0.0 ? area / interval : 0.0;
}

double step_cost(const aoi::FractionalCost& c, double gamma, bool fractional) {
    if (fractional) return c.numerator - gamma * c.denominator;
    return c.denominator > 0.0 ? c.numerator / c.denominator : 0.0;
}

CostModuleState::CostModuleState(int agents, double delta_)
    : delta(delta_),
      episode_n(idx(agents), 0.0),
      episode_d(idx(agents), 0.0),
      discount(idx(agents), 1.0),
      window_n(idx(agents), 0.0),
      window_d(idx(agents), 0.0) {}

void CostModuleState::add(int agent, const aoi::FractionalCost& c) {
    const auto m = idx(agent);
    episode_n.at(m) += discount[m] * c.numerator;
    episode_d[m] += discount[m] * c.denominator;
    discount[m] *= delta;
}

void CostModuleState::end_episode() {
    for (std::size_t m = 0; m < episode_n.size(); ++m) {
        window_n[m] += episode_n[m];
        window_d[m] += episode_d[m];
        episode_n[m] = 0.0;
        episode_d[m] = 0.0;
        discount[m] = 1.0;
    }
    ++episode;
}

double gamma_episode_update(CostModuleState& state, int agent) {
    const auto m = idx(agent);
    if (m >= state.window_d.size()) throw InvalidArgument("gamma_episode_update: bad agent");
    if (!(state.window_d[m] > 0.0)) throw InvalidArgument("gamma_episode_update: zero denominator");
    const double g = state.window_n[m] / state.window_d[m];
    state.window_n[m] = 0.0;
    state.window_d[m] = 0.0;
    return g;
}

// ---- features ----

std::vector<double> observation_features(const SystemState& state, int device, int num_devices,
                                         double deadline) {
    std::vector<double> f;
    f.reserve(state.queue_lengths.size() + 3);
    for (int q : state.queue_lengths) f.push_back(static_cast<double>(q) / num_devices);
    f.push_back(state.last_latency.at(idx(device)) / deadline);
    f.push_back(state.aoi_now.at(idx(device)) / deadline);
    f.push_back(1.0);
    return f;
}

std::size_t embedding_size(int num_devices, int num_edges) {
    return idx(num_edges) + idx(num_devices) + 2 + idx(num_edges) + 1;
}

std::vector<double> embed_decision(const SystemState& state, int device, int num_devices,
                                   Indicator need, int action, int wait_grid) {
    const int edges = static_cast<int>(state.queue_lengths.size());
    std::vector<double> e(embedding_size(num_devices, edges), 0.0);
    std::size_t k = 0;
    for (int q : state.queue_lengths) e[k++] = static_cast<double>(q) / num_devices;
    e[k + idx(device)] = 1.0;
    k += idx(num_devices);
    if (need == Indicator::NeedsUpdate) {
        e[k + 1] = static_cast<double>(action) / (wait_grid - 1);
    } else {
        e[k] = 1.0;
        e[k + 2 + idx(action)] = 1.0;
    }
    return e;
}

// ---- collector ----

Collector::Collector(nn::GruShape shape, int agents, bool async)
    : shape_(shape), agents_(agents), async_(async), params_(nn::make_gru_params(shape)) {
    reset();
}

void Collector::reset() {
    const std::size_t rows = async_ ? 1 : idx(agents_);
    h_.assign(rows, std::vector<double>(shape_.hidden, 0.0));
    h_input_.assign(rows, {});
    h_prev_.assign(rows, {});
    latest_.assign(idx(agents_), std::vector<double>(shape_.input, 0.0));
    trajectory_.clear();
    last_time_ = 0.0;
}

const std::vector<double>& Collector::history_for(int device) const {
    return h_.at(async_ ? 0 : idx(device));
}

const TrajectoryRecord& Collector::collect(int device, Indicator need, double time,
                                           std::vector<double> observation, int action,
                                           std::vector<double> embedding) {
    if (device < 0 || device >= agents_) throw InvalidArgument("collect: bad device");
    if (time < last_time_) throw InvalidArgument("collect: event out of order");
    if (embedding.size() != shape_.input) throw InvalidArgument("collect: embedding size");
    const std::size_t row = async_ ? 0 : idx(device);

    TrajectoryRecord rec;
    rec.index = trajectory_.size();
    rec.device = device;
    rec.need = need;
    rec.time = time;
    rec.observation = std::move(observation);
    rec.action = action;
    rec.history = h_[row];
    rec.prev_input = h_input_[row];
    rec.prev_history = h_prev_[row];

    std::vector<double> input;
    if (async_) {
        input = std::move(embedding);
    } else {
        // Pad with every agent's latest decision, own one replaced by this one.
        latest_[idx(device)] = std::move(embedding);
        input.assign(shape_.input, 0.0);
        for (const auto& l : latest_) {
            for (std::size_t i = 0; i < input.size(); ++i) input[i] += l[i];
        }
        for (double& v : input) v /= agents_;
    }
    auto next = nn::gru_step(shape_, params_, input, h_[row]);
    h_prev_[row] = std::move(h_[row]);
    h_input_[row] = std::move(input);
    h_[row] = std::move(next);
    last_time_ = time;
    trajectory_.push_back(std::move(rec));
    return trajectory_.back();
}

// ---- learner ----

MarlLearner::MarlLearner(const ScenarioConfig& scenario, const MarlConfig& cfg) : config(cfg) {
    config.validate();
    const int m = scenario.num_devices();
    const int n = scenario.num_edges();
    gru_shape = {embedding_size(m, n), config.history_dim};
    gru = nn::make_gru_params(gru_shape);
    RngStream init(config.seed, "marl-init");
    gru.init_uniform(init);
    const std::size_t in = idx(n) + 3 + config.history_dim;
    agents.resize(idx(m));
    for (int k = 0; k < m; ++k) {
        auto& a = agents[idx(k)];
        a.deadline = scenario.deadline(k);
        a.wait_shape = {in, config.hidden, idx(config.wait_grid)};
        a.offload_shape = {in, config.hidden, idx(n) + 1};
        a.wait_q = nn::make_mlp_params(a.wait_shape);
        a.offload_q = nn::make_mlp_params(a.offload_shape);
        a.wait_q.init_uniform(init);
        a.offload_q.init_uniform(init);
        a.wait_target = a.wait_q;
        a.offload_target = a.offload_q;
    }
}

std::vector<double> q_input(std::span<const double> observation, std::span<const double> history) {
    std::vector<double> x(observation.begin(), observation.end());
    x.insert(x.end(), history.begin(), history.end());
    return x;
}

std::vector<double> wait_grid(double deadline, int points) {
    if (points < 2) throw InvalidArgument("wait_grid: need at least two points");
    std::vector<double> g(idx(points));
    for (int i = 0; i < points; ++i) g[idx(i)] = deadline * i / (points - 1);
    return g;
}

int act_index(const MarlLearner& learner, int agent, Head head, std::span<const double> observation,
              std::span<const double> history, double epsilon, RngStream& rng, bool* explored) {
    const auto& a = learner.agents.at(idx(agent));
    const auto& shape = a.shape(head);
    const bool random = epsilon > 0.0 && rng.uniform() < epsilon;
    if (explored) *explored = random;
    if (random) return static_cast<int>(rng.uniform_index(shape.output));
    const auto q = nn::mlp_forward(shape, a.params(head), q_input(observation, history));
    return argmin(q);
}

HybridAction act(const MarlLearner& learner, const Decision& decision, std::span<const double> history,
                 double epsilon, RngStream& rng, int* action_index, bool* explored) {
    if (decision.need == Indicator::Busy) throw IllegalActionError("act: device is busy");
    const int m = decision.device;
    const auto& a = learner.agents.at(idx(m));
    const auto obs = observation_features(decision.state, m, static_cast<int>(learner.agents.size()),
                                          a.deadline);
    const Head head = decision.need == Indicator::NeedsUpdate ? Head::Wait : Head::Offload;
    const int k = act_index(learner, m, head, obs, history, epsilon, rng, explored);
    if (action_index) *action_index = k;
    if (head == Head::Wait) return HybridAction::Wait(a.deadline * k / (learner.config.wait_grid - 1));
    return k == 0 ? HybridAction::Local() : HybridAction::Edge(k - 1);
}

TdGrads td_loss_and_grad(const MarlLearner& learner, int agent, Head head,
                         std::span<const Transition> batch) {
    if (batch.empty()) throw InvalidArgument("td_loss_and_grad: empty batch");
    const auto& a = learner.agents.at(idx(agent));
    const auto& shape = a.shape(head);
    const auto& params = a.params(head);
    TdGrads out;
    out.q_grad = params.zeros_like();
    out.gru_grad = learner.gru.zeros_like();
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<double> d_out(shape.output, 0.0);
    for (const auto& t : batch) {
        const bool recurrent = !t.from.prev_history.empty();
        nn::GruCache gc;
        std::vector<double> h = recurrent ? nn::gru_step(learner.gru_shape, learner.gru, t.from.prev_input,
                                                         t.from.prev_history, &gc)
                                          : t.from.history;
        nn::MlpCache mc;
        const auto q = nn::mlp_forward(shape, params, q_input(t.from.observation, h), &mc);
        const auto qn = nn::mlp_forward(shape, a.target(head), q_input(t.next_observation, t.next_history));
        const double y = learner_cost(learner, agent, t.cost) +
                         learner.config.delta * *std::min_element(qn.begin(), qn.end());
        const double diff = q.at(idx(t.from.action)) - y;
        out.loss += diff * diff * scale;
        std::fill(d_out.begin(), d_out.end(), 0.0);
        d_out[idx(t.from.action)] = diff * scale;
        const auto dx = nn::mlp_backward(shape, params, mc, d_out, out.q_grad);
        if (recurrent) {
            const auto off = t.from.observation.size();
            std::vector<double> dh(dx.begin() + static_cast<std::ptrdiff_t>(off), dx.end());
            nn::gru_backward(learner.gru_shape, learner.gru, gc, dh, out.gru_grad);
        }
    }
    if (!std::isfinite(out.loss)) {
        throw DivergenceError("train_step: non-finite TD loss for agent " + std::to_string(agent) +
                              " (gamma " + std::to_string(a.gamma) + ")");
    }
    return out;
}

double train_step(MarlLearner& learner, int agent, Head head, std::span<const Transition> batch) {
    auto g = td_loss_and_grad(learner, agent, head, batch);
    auto& a = learner.agents[idx(agent)];
    double lr = learner.config.lr * a.lr_scale;
    if (learner.config.grad_clip > 0.0) {
        double sq = 0.0;
        for (double v : g.q_grad.values) sq += v * v;
        for (double v : g.gru_grad.values) sq += v * v;
        const double norm = std::sqrt(sq);
        if (norm > learner.config.grad_clip) lr *= learner.config.grad_clip / norm;
    }
    nn::sgd_update(a.params(head), g.q_grad, lr);
    nn::sgd_update(learner.gru, g.gru_grad, lr);
    if (++a.train_steps % static_cast<std::uint64_t>(learner.config.target_period) == 0) {
        a.wait_target = a.wait_q;
        a.offload_target = a.offload_q;
    }
    return g.loss;
}

// ---- episodes ----

EpisodeOutcome run_episode(MecSimulator& sim, std::uint64_t env_seed, const Policy& policy,
                           const CostSink& sink) {
    sim.reset(env_seed);
    const int m = sim.config().num_devices();
    const double horizon = sim.config().episode_horizon;
    EpisodeOutcome out;
    out.costs.resize(idx(m));
    std::vector<std::size_t> seen(idx(m), 0);
    std::vector<aoi::CostTracker> trackers;
    for (const auto& log : sim.completion_logs()) trackers.emplace_back(log.origin);

    auto flush = [&] {
        const auto& logs = sim.completion_logs();
        for (int k = 0; k < m; ++k) {
            const auto& entries = logs[idx(k)].entries;
            for (auto& i = seen[idx(k)]; i < entries.size(); ++i) {
                const auto c = trackers[idx(k)].on_task_end(entries[i]);
                out.costs[idx(k)].push_back(c);
                if (sink) sink(k, c);
            }
        }
    };

    while (auto d = sim.advance_until_decision_before(horizon)) {
        flush();
        sim.apply_action(d->device, policy(*d));
        ++out.decisions;
    }
    flush();

    for (int k = 0; k < m; ++k) {
        out.avg_aoi.push_back(aoi::time_average_aoi(sim.completion_logs()[idx(k)], horizon));
        const auto& c = sim.device_counters()[idx(k)];
        out.drops.push_back(c.dropped);
        out.offloads.push_back(c.offloads);
        const auto& entries = sim.completion_logs()[idx(k)].entries;
        double z = 0.0;
        std::size_t known = 0;
        for (std::size_t i = 0; i + 1 < entries.size(); ++i, ++known) z += entries[i].wait_after;
        out.mean_wait.push_back(known ? z / static_cast<double>(known) : 0.0);
    }
    return out;
}

std::uint64_t eval_env_seed(std::uint64_t run_seed, int index) {
    return derive_seed(run_seed, "eval-env-" + std::to_string(index));
}

std::uint64_t train_env_seed(std::uint64_t run_seed, int episode) {
    return derive_seed(run_seed, "train-env-" + std::to_string(episode));
}

Policy baseline_policy(const ScenarioConfig& scenario, Baseline baseline, RngStream& rng) {
    const int edges = scenario.num_edges();
    switch (baseline) {
        case Baseline::None: throw InvalidArgument("baseline_policy: no baseline selected");
        case Baseline::Random:
            return [&scenario, &rng, edges](const Decision& d) {
                if (d.need == Indicator::NeedsUpdate) {
                    const auto k = rng.uniform_index(11);
                    return HybridAction::Wait(scenario.deadline(d.device) * static_cast<double>(k) / 10.0);
                }
                const auto k = static_cast<int>(rng.uniform_index(idx(edges) + 1));
                return k == 0 ? HybridAction::Local() : HybridAction::Edge(k - 1);
            };
        case Baseline::ZeroWait:
            return [](const Decision& d) {
                if (d.need == Indicator::NeedsUpdate) return HybridAction::Wait(0.0);
                return HybridAction::Edge(shortest_queue(d.state));
            };
        case Baseline::LocalOnly:
            return [](const Decision& d) {
                if (d.need == Indicator::NeedsUpdate) return HybridAction::Wait(0.0);
                return HybridAction::Local();
            };
        case Baseline::GreedyQueue:
            // Smallest expected completion: local service against a full FCFS queue.
            return [&scenario, edges](const Decision& d) {
                if (d.need == Indicator::NeedsUpdate) return HybridAction::Wait(0.0);
                double best = scenario.expected_local_time(d.device);
                int target = kLocalTarget;
                for (int n = 0; n < edges; ++n) {
                    const double t = (d.state.queue_lengths[idx(n)] + 1) * scenario.expected_edge_time(n);
                    if (t < best) {
                        best = t;
                        target = n;
                    }
                }
                return target == kLocalTarget ? HybridAction::Local() : HybridAction::Edge(target);
            };
    }
    throw InvalidArgument("baseline_policy: unknown baseline");
}

namespace {

struct EvalSummary {
    std::vector<double> aoi, drops, objective, wait;
    std::vector<std::vector<double>> offload_fraction;
};

EvalSummary evaluate(MecSimulator& sim, const MarlConfig& config,
                     const std::function<Policy()>& make_policy,
                     const std::function<void()>& on_episode_start = {}) {
    const int m = sim.config().num_devices();
    const int n = sim.config().num_edges();
    EvalSummary s;
    s.aoi.assign(idx(m), 0.0);
    s.drops.assign(idx(m), 0.0);
    s.wait.assign(idx(m), 0.0);
    s.offload_fraction.assign(idx(m), std::vector<double>(idx(n) + 1, 0.0));
    std::vector<std::vector<double>> counts = s.offload_fraction;
    CostModuleState costs(m, config.delta);
    for (int j = 0; j < config.eval_episodes; ++j) {
        if (on_episode_start) on_episode_start();
        const auto out = run_episode(sim, eval_env_seed(config.seed, j), make_policy(),
                                     [&](int k, const aoi::FractionalCost& c) { costs.add(k, c); });
        costs.end_episode();
        for (int k = 0; k < m; ++k) {
            s.aoi[idx(k)] += out.avg_aoi[idx(k)] / config.eval_episodes;
            s.drops[idx(k)] += static_cast<double>(out.drops[idx(k)]) / config.eval_episodes;
            s.wait[idx(k)] += out.mean_wait[idx(k)] / config.eval_episodes;
            for (std::size_t t = 0; t < counts[idx(k)].size(); ++t) {
                counts[idx(k)][t] += static_cast<double>(out.offloads[idx(k)][t]);
            }
        }
    }
    for (int k = 0; k < m; ++k) {
        double total = 0.0;
        for (double c : counts[idx(k)]) total += c;
        for (std::size_t t = 0; t < counts[idx(k)].size(); ++t) {
            s.offload_fraction[idx(k)][t] = total > 0.0 ? counts[idx(k)][t] / total : 0.0;
        }
        s.objective.push_back(costs.window_d[idx(k)] > 0.0 ? gamma_episode_update(costs, k) : 0.0);
    }
    return s;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

TrainingResult run_training(const ScenarioConfig& scenario, const MarlConfig& config) {
    scenario.validate();
    config.validate();
    const int m = scenario.num_devices();
    MecSimulator sim(scenario);
    sim.set_event_logging(false);
    TrainingResult result;
    result.gamma_updates.assign(idx(m), {});

    if (config.baseline != Baseline::None) {
        RngStream rng(config.seed, "baseline");
        const auto policy = baseline_policy(scenario, config.baseline, rng);
        for (int e = 0; e < config.episodes; ++e) {
            if ((e + 1) % config.eval_every != 0 && e + 1 != config.episodes) continue;
            const auto s = evaluate(sim, config, [&] { return policy; });
            result.metrics.push_back({e, s.aoi, s.objective, std::vector<double>(idx(m), 0.0), s.drops,
                                      s.wait, s.offload_fraction});
            result.final_eval_aoi = s.aoi;
            result.final_eval_objective = s.objective;
            result.final_gamma = s.objective;
        }
        result.mean_eval_aoi = mean(result.final_eval_aoi);
        result.converged = true;
        return result;
    }

    MarlLearner learner(scenario, config);
    RngStream explore(config.seed, "explore");
    RngStream replay(config.seed, "replay");
    RngStream eval_rng(config.seed, "eval");
    Collector collector(learner.gru_shape, m, config.async);
    CostModuleState cost_state(m, config.delta);
    bool have_gamma = false;

    struct Pending {
        bool valid = false;
        TrajectoryRecord record;
        std::size_t ordinal = 0;
    };

    for (int e = 0; e < config.episodes; ++e) {
        const double decay = std::min(1.0, e / (config.eps_fraction * config.episodes));
        const double epsilon = config.eps_start + (config.eps_end - config.eps_start) * decay;
        collector.reset();
        collector.set_params(learner.gru);
        const double progress = config.episodes > 1 ? static_cast<double>(e) / (config.episodes - 1) : 0.0;
        for (auto& a : learner.agents) a.lr_scale = 1.0 + (config.lr_final - 1.0) * progress;

        std::vector<std::array<Pending, 2>> pending(idx(m));
        std::vector<std::size_t> emitted(idx(m), 0);
        std::vector<aoi::FractionalCost> last_cost(idx(m));
        std::vector<double> loss_sum(idx(m), 0.0);
        std::vector<int> loss_count(idx(m), 0);

        auto sink = [&](int k, const aoi::FractionalCost& c) {
            ++emitted[idx(k)];
            cost_state.add(k, c);
            last_cost[idx(k)] = c;
        };
        auto policy = [&](const Decision& d) {
            const int k = d.device;
            auto& agent = learner.agents[idx(k)];
            auto obs = observation_features(d.state, k, m, agent.deadline);
            const auto& hist = collector.history_for(k);
            int a = 0;
            const auto action = act(learner, d, hist, epsilon, explore, &a);
            const Head head = d.need == Indicator::NeedsUpdate ? Head::Wait : Head::Offload;
            auto& slot = pending[idx(k)][head == Head::Wait ? 0 : 1];
            if (slot.valid && slot.ordinal == emitted[idx(k)]) {
                auto& buf = agent.buffer(head);
                Transition t{std::move(slot.record), last_cost[idx(k)], obs, hist};
                auto& next = head == Head::Wait ? agent.wait_next : agent.offload_next;
                if (buf.size() < config.buffer) {
                    buf.push_back(std::move(t));
                } else {
                    buf[next] = std::move(t);
                }
                next = (next + 1) % config.buffer;
                if (buf.size() >= config.batch) {
                    std::vector<Transition> batch;
                    batch.reserve(config.batch);
                    for (std::size_t b = 0; b < config.batch; ++b) {
                        batch.push_back(buf[replay.uniform_index(buf.size())]);
                    }
                    loss_sum[idx(k)] += train_step(learner, k, head, batch);
                    ++loss_count[idx(k)];
                }
            }
            auto emb = embed_decision(d.state, k, m, d.need, a, config.wait_grid);
            const auto& rec = collector.collect(k, d.need, d.state.time, std::move(obs), a, std::move(emb));
            slot.valid = true;
            slot.record = rec;
            slot.ordinal = emitted[idx(k)] + 1;
            return action;
        };
        run_episode(sim, train_env_seed(config.seed, e), policy, sink);
        cost_state.end_episode();

        if ((e + 1) % config.gamma_period == 0) {
            for (int k = 0; k < m; ++k) {
                if (!(cost_state.window_d[idx(k)] > 0.0)) continue;
                auto& agent = learner.agents[idx(k)];
                agent.gamma = gamma_episode_update(cost_state, k);
                agent.gamma_ema = have_gamma ? (1.0 - config.gamma_ema) * agent.gamma_ema +
                                                   config.gamma_ema * agent.gamma
                                             : agent.gamma;
                result.gamma_updates[idx(k)].push_back(agent.gamma);
            }
            have_gamma = true;
        }

        if ((e + 1) % config.eval_every == 0 || e + 1 == config.episodes) {
            Collector eval_collector(learner.gru_shape, m, config.async);
            eval_collector.set_params(learner.gru);
            auto make_policy = [&]() -> Policy {
                return [&](const Decision& d) {
                    const int k = d.device;
                    int a = 0;
                    const auto action = act(learner, d, eval_collector.history_for(k), 0.0, eval_rng, &a);
                    auto obs = observation_features(d.state, k, m, learner.agents[idx(k)].deadline);
                    eval_collector.collect(k, d.need, d.state.time, std::move(obs), a,
                                           embed_decision(d.state, k, m, d.need, a, config.wait_grid));
                    return action;
                };
            };
            const auto s = evaluate(sim, config, make_policy, [&] { eval_collector.reset(); });
            EpisodeMetrics row;
            row.episode = e;
            row.eval_aoi = s.aoi;
            for (const auto& a : learner.agents) row.gamma.push_back(a.gamma_ema);
            for (int k = 0; k < m; ++k) {
                row.loss.push_back(loss_count[idx(k)] ? loss_sum[idx(k)] / loss_count[idx(k)] : 0.0);
            }
            row.drops = s.drops;
            row.mean_wait = s.wait;
            row.offload_fraction = s.offload_fraction;
            result.metrics.push_back(std::move(row));
            result.final_eval_aoi = s.aoi;
            result.final_eval_objective = s.objective;
        }
    }

    result.final_gamma.clear();
    for (const auto& a : learner.agents) result.final_gamma.push_back(a.gamma);
    result.mean_eval_aoi = mean(result.final_eval_aoi);
    // Converged: each agent's last three γ updates sit in a band narrower than
    // 15 % of their mean.
    result.converged = true;
    for (const auto& trace : result.gamma_updates) {
        if (trace.size() < 3) {
            result.converged = false;
            continue;
        }
        const auto tail = std::span(trace).last(3);
        const auto [lo, hi] = std::minmax_element(tail.begin(), tail.end());
        const double avg = (tail[0] + tail[1] + tail[2]) / 3.0;
        if (!(*hi - *lo < 0.15 * avg)) result.converged = false;
    }
    return result;
}

void write_metrics_csv(std::ostream& out, const TrainingResult& result, std::uint64_t seed) {
    out << "# aoimec marl-metrics v1\n";
    out << "episode,seed,device,eval_avg_aoi,gamma,loss,drops,mean_wait,offload_fraction\n";
    const auto old = out.precision(17);
    for (const auto& r : result.metrics) {
        for (std::size_t k = 0; k < r.eval_aoi.size(); ++k) {
            out << r.episode << ',' << seed << ',' << k << ',' << r.eval_aoi[k] << ',' << r.gamma[k] << ','
                << r.loss[k] << ',' << r.drops[k] << ',' << r.mean_wait[k] << ',';
            for (std::size_t t = 0; t < r.offload_fraction[k].size(); ++t) {
                if (t) out << ';';
                out << r.offload_fraction[k][t];
            }
            out << '\n';
        }
    }
    out.precision(old);
}

WaitScan constant_wait_scan(const ScenarioConfig& scenario, std::span<const double> waits, int episodes,
                            std::uint64_t seed) {
    if (waits.empty() || episodes < 1) throw InvalidArgument("constant_wait_scan: empty scan");
    MecSimulator sim(scenario);
    sim.set_event_logging(false);
    WaitScan scan;
    scan.best_aoi = kMax;
    for (double z : waits) {
        if (!(z >= 0.0)) throw InvalidArgument("constant_wait_scan: negative wait");
        const Policy policy = [z](const Decision& d) {
            if (d.need == Indicator::NeedsUpdate) return HybridAction::Wait(z);
            return HybridAction::Edge(shortest_queue(d.state));
        };
        double total = 0.0;
        for (int j = 0; j < episodes; ++j) {
            const auto out = run_episode(sim, eval_env_seed(seed, j), policy);
            total += mean(out.avg_aoi);
        }
        const double avg = total / episodes;
        scan.waits.push_back(z);
        scan.mean_aoi.push_back(avg);
        if (avg < scan.best_aoi) {
            scan.best_aoi = avg;
            scan.best_wait = z;
        }
    }
    return scan;
}

}  // namespace aoimec::marl
