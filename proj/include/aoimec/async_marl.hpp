#pragma once

// Asynchronous fractional multi-agent learning on the MEC simulator. Each
// device owns two small Q-networks (waiting grid, offload target); one
// collector orders every decision by a global event index and folds it into a
// recurrent history H_T that all agents read.

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aoimec/aoi.hpp"
#include "aoimec/approximators.hpp"
#include "aoimec/mec_model.hpp"

namespace aoimec::marl {

enum class Baseline { None, Random, ZeroWait, LocalOnly, GreedyQueue };
std::string_view to_string(Baseline b);
Baseline parse_baseline(std::string_view name);

struct MarlConfig {
    bool fractional = true;
    bool async = true;
    Baseline baseline = Baseline::None;
    int episodes = 60;
    int eval_every = 5;     // evaluate after every k-th training episode (and the last)
    int eval_episodes = 3;
    double delta = 0.95;
    int gamma_period = 5;   // episodes per γ update
    double gamma_ema = 0.3; // smoothing of the reported γ trace
    int wait_grid = 11;
    std::size_t hidden = 16;
    std::size_t history_dim = 4;
    double lr = 0.01;
    double lr_final = 0.1;   // learning rate decays linearly to lr·lr_final over the run
    double grad_clip = 10.0; // global-norm clip per train step, 0 disables
    std::size_t batch = 16;
    std::size_t buffer = 10'000;
    int target_period = 200;  // train steps between target snapshots
    double eps_start = 1.0;
    double eps_end = 0.05;
    double eps_fraction = 0.3;  // share of episodes over which ε decays
    std::uint64_t seed = 1;

    void validate() const;
};

// ---- fractional cost module ----

/// A(Y, Z, Y') − γ(Y + Z); A / (Y + Z) when `fractional` is false.
double fractional_cost(double latency, double wait_next, double latency_next, double gamma,
                       bool fractional = true);
/// Same from an emitted (c_N, c_D) pair. A zero interval has zero ratio cost.
double step_cost(const aoi::FractionalCost& c, double gamma, bool fractional);

struct CostModuleState {
    double delta = 0.95;
    // Running discounted sums for the episode in progress.
    std::vector<double> episode_n, episode_d, discount;
    // Sums over the completed episodes of the current window.
    std::vector<double> window_n, window_d;
    int episode = 0;

    CostModuleState() = default;
    CostModuleState(int agents, double delta);
    void add(int agent, const aoi::FractionalCost& c);
    void end_episode();
};

/// γ = window Σδ^k A_k / window Σδ^k (Y_k + Z_{k+1}); clears the agent's window.
double gamma_episode_update(CostModuleState& state, int agent);

// ---- features and collection ----

/// [queue lengths / M, own Y / Ȳ, own AoI / Ȳ, 1].
std::vector<double> observation_features(const SystemState& state, int device, int num_devices,
                                         double deadline);

/// GRU input for a decision: [queue lengths / M, one-hot device, decision
/// type, wait index / (grid − 1) or one-hot target].
std::vector<double> embed_decision(const SystemState& state, int device, int num_devices,
                                   Indicator need, int action, int wait_grid);
std::size_t embedding_size(int num_devices, int num_edges);

struct TrajectoryRecord {
    std::uint64_t index = 0;
    int device = 0;
    Indicator need = Indicator::NeedsUpdate;
    double time = 0.0;
    std::vector<double> observation;
    int action = 0;
    std::vector<double> history;       // H_T seen by the acting agent
    std::vector<double> prev_input;    // the GRU input that produced `history`
    std::vector<double> prev_history;  // empty when `history` is the initial state
};

class Collector {
public:
    Collector(nn::GruShape shape, int agents, bool async);

    /// Parameters used for H until the next call; training never touches them
    /// mid-episode.
    void set_params(const nn::ParamVector& params) { params_ = params; }
    void reset();

    const std::vector<double>& history_for(int device) const;
    /// Appends the record and advances H. Throws InvalidArgument if `time`
    /// precedes the last collected event.
    const TrajectoryRecord& collect(int device, Indicator need, double time,
                                    std::vector<double> observation, int action,
                                    std::vector<double> embedding);

    const std::vector<TrajectoryRecord>& trajectory() const { return trajectory_; }
    const nn::GruShape& shape() const { return shape_; }
    const nn::ParamVector& params() const { return params_; }

private:
    nn::GruShape shape_;
    int agents_;
    bool async_;
    nn::ParamVector params_;
    std::vector<std::vector<double>> h_;         // one shared row, or one per agent
    std::vector<std::vector<double>> h_input_;   // input that produced h_[k]
    std::vector<std::vector<double>> h_prev_;    // state it was produced from
    std::vector<std::vector<double>> latest_;    // latest embedding per agent (sync padding)
    std::vector<TrajectoryRecord> trajectory_;
    double last_time_ = 0.0;
};

// ---- learner ----

enum class Head { Wait, Offload };

struct Transition {
    TrajectoryRecord from;
    aoi::FractionalCost cost;
    std::vector<double> next_observation;
    std::vector<double> next_history;
};

struct AgentLearner {
    nn::MlpShape wait_shape, offload_shape;
    nn::ParamVector wait_q, offload_q;
    nn::ParamVector wait_target, offload_target;
    double gamma = 0.0;
    double gamma_ema = 0.0;
    double deadline = 1.0;
    std::vector<Transition> wait_buffer, offload_buffer;
    std::size_t wait_next = 0, offload_next = 0;  // ring positions
    std::uint64_t train_steps = 0;
    double lr_scale = 1.0;

    const nn::MlpShape& shape(Head h) const { return h == Head::Wait ? wait_shape : offload_shape; }
    nn::ParamVector& params(Head h) { return h == Head::Wait ? wait_q : offload_q; }
    const nn::ParamVector& params(Head h) const { return h == Head::Wait ? wait_q : offload_q; }
    const nn::ParamVector& target(Head h) const { return h == Head::Wait ? wait_target : offload_target; }
    std::vector<Transition>& buffer(Head h) { return h == Head::Wait ? wait_buffer : offload_buffer; }
};

struct MarlLearner {
    MarlConfig config;
    nn::GruShape gru_shape;
    nn::ParamVector gru;
    std::vector<AgentLearner> agents;

    MarlLearner(const ScenarioConfig& scenario, const MarlConfig& config);
};

std::vector<double> q_input(std::span<const double> observation, std::span<const double> history);

/// Per-agent wait grid {0, Ȳ/(k−1), …, Ȳ}.
std::vector<double> wait_grid(double deadline, int points);

/// ε-greedy argmin over the head's Q; greedy (lowest index on ties) when
/// `epsilon` is 0. Returns the action index.
int act_index(const MarlLearner& learner, int agent, Head head, std::span<const double> observation,
              std::span<const double> history, double epsilon, RngStream& rng,
              bool* explored = nullptr);

/// Hybrid action for a decision; throws IllegalActionError for a Busy device.
HybridAction act(const MarlLearner& learner, const Decision& decision, std::span<const double> history,
                 double epsilon, RngStream& rng, int* action_index = nullptr,
                 bool* explored = nullptr);

struct TdGrads {
    double loss = 0.0;  // mean squared TD error
    nn::ParamVector q_grad;
    nn::ParamVector gru_grad;
};

/// Loss ½·mean (Q(x,a) − c − δ·min Q_target(x'))² and its gradient. The
/// gradient reaches the recurrent cell through the H_T of each sampled state,
/// truncated after one step.
TdGrads td_loss_and_grad(const MarlLearner& learner, int agent, Head head,
                         std::span<const Transition> batch);

/// One SGD step on the head and on the shared recurrent cell; returns the
/// mean squared TD error before the step.
double train_step(MarlLearner& learner, int agent, Head head, std::span<const Transition> batch);

// ---- episodes, training and evaluation ----

using Policy = std::function<HybridAction(const Decision&)>;
using CostSink = std::function<void(int device, const aoi::FractionalCost&)>;

struct EpisodeOutcome {
    std::vector<double> avg_aoi;  // per device
    std::vector<std::uint64_t> drops;
    std::vector<std::vector<std::uint64_t>> offloads;  // [device][0 = local, 1 + n = edge n]
    std::vector<std::vector<aoi::FractionalCost>> costs;  // per device, emission order
    std::vector<double> mean_wait;  // per device, over waits chosen after a completion
    std::uint64_t decisions = 0;
};

/// Runs one episode to the scenario horizon. Costs are emitted to `sink` as
/// tasks end, before the decision that follows them is taken.
EpisodeOutcome run_episode(MecSimulator& sim, std::uint64_t env_seed, const Policy& policy,
                           const CostSink& sink = {});

/// Evaluation episodes depend only on the run seed, so paired runs share them.
std::uint64_t eval_env_seed(std::uint64_t run_seed, int index);
std::uint64_t train_env_seed(std::uint64_t run_seed, int episode);

Policy baseline_policy(const ScenarioConfig& scenario, Baseline baseline, RngStream& rng);

struct EpisodeMetrics {
    int episode = 0;
    std::vector<double> eval_aoi;  // per device, mean over eval episodes
    std::vector<double> gamma;     // reported (smoothed) γ per device
    std::vector<double> loss;      // mean training TD error per device this episode
    std::vector<double> drops;     // mean per eval episode
    std::vector<double> mean_wait;
    std::vector<std::vector<double>> offload_fraction;  // [device][target]
};

struct TrainingResult {
    std::vector<EpisodeMetrics> metrics;
    std::vector<double> final_gamma;         // raw γ per device
    std::vector<double> final_eval_aoi;      // per device
    std::vector<double> final_eval_objective;  // discounted fractional objective per device
    double mean_eval_aoi = 0.0;
    std::vector<std::vector<double>> gamma_updates;  // [device][update]
    bool converged = false;  // every agent's last three γ updates within a 15 % band
};

TrainingResult run_training(const ScenarioConfig& scenario, const MarlConfig& config);

void write_metrics_csv(std::ostream& out, const TrainingResult& result, std::uint64_t seed);

// ---- constant-wait oracle ----

struct WaitScan {
    std::vector<double> waits;
    std::vector<double> mean_aoi;
    double best_wait = 0.0;
    double best_aoi = 0.0;
};

/// Evaluates "wait z, then offload to the shortest edge queue" for each z on
/// the evaluation seeds and returns the best constant wait.
WaitScan constant_wait_scan(const ScenarioConfig& scenario, std::span<const double> waits, int episodes,
                           std::uint64_t seed);

}  // namespace aoimec::marl
