#pragma once

// Fractional Q-Learning: an inner tabular Q-learner on the parametric cost
// c_N − γ·c_D that tracks N and D separately, wrapped in an outer Dinkelbach
// update of γ.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "aoimec/event_engine.hpp"
#include "aoimec/fractional_mdp.hpp"

namespace aoimec::fql {

// Step size λ_n as a function of the visit count n of a state-action pair.
struct StepSchedule {
    enum class Kind {
        Harmonic,    // 1 / (1 + n)
        Rescaled,    // 1 / (1 + (1 − δ) n)
        Polynomial,  // 1 / (1 + n)^exponent
        Constant,    // value
    };
    Kind kind = Kind::Polynomial;
    double exponent = 0.8;
    double value = 0.5;

    double at(std::uint64_t visits, double delta) const;
};

// Sampled: one next state drawn per state-action pair and step (a generative
// model, the setting of synchronous/speedy Q-learning). Expected: the same
// update with the next-state expectation taken exactly, which removes sampling
// noise; used where a test must control the approximation error precisely.
enum class Backup { Sampled, Expected };

enum class BudgetMode {
    FixedSteps,
    SampleBound,
    StoppingCondition,  // run until ε_i < −α·Q_i(s0, a_i), checked every `check_every` steps
};

// How the tables are seeded at the start of each outer iteration.
enum class InnerInit {
    Cold,    // N = D = 0
    Warm,    // keep N and D from the previous iteration
    ResetQ,  // keep D, set N = γ·D so that Q starts at 0
};

struct FqlConfig {
    double alpha = 0.5;   // error scale in the stopping condition
    double zeta = 0.1;    // failure probability for the sample-complexity budget
    int episodes = 50;    // outer iterations E
    BudgetMode budget_mode = BudgetMode::FixedSteps;
    std::uint64_t inner_steps = 20'000;
    std::uint64_t check_every = 1;
    std::uint64_t max_inner_steps = 10'000'000;
    StepSchedule schedule;
    Backup backup = Backup::Sampled;
    InnerInit init = InnerInit::Warm;
    double tolerance = 1e-6;  // on |γ_{i+1} − γ_i|
    std::optional<double> initial_gamma;  // default: max c_N/c_D
    // Optional true approximation error ‖Q*_γ − Q‖ (supplied by tests from the
    // oracle). Without it the stopping condition uses the Bellman-residual proxy.
    std::function<double(const DecomposedQ&)> error_oracle;
    std::optional<double> gamma_star;  // enables contraction-ratio diagnostics

    void validate() const;
};

// Running learner state that survives across outer iterations.
struct InnerLearner {
    DecomposedQ q;
    std::vector<std::uint64_t> visits;        // per pair
    std::vector<std::uint64_t> transitions;   // empirical counts [s][a][s']
    std::uint64_t steps = 0;

    InnerLearner(const FractionalMdp& mdp, double gamma);
};

/// Runs `budget` synchronous steps of Q-learning on c_N − γc_D. N and D are
/// updated with the same sample, step size and greedy next action, so
/// N − γD equals the jointly-learned Q at every step.
void inner_q_learning(const FractionalMdp& mdp, InnerLearner& learner, std::uint64_t budget,
                      const StepSchedule& schedule, Backup backup, RngStream& stream);

/// Convenience form starting from zero tables.
DecomposedQ inner_q_learning(const FractionalMdp& mdp, double gamma, std::uint64_t budget,
                             RngStream& stream, const StepSchedule& schedule = {},
                             Backup backup = Backup::Sampled);

/// ε_i < −α·Q_i(s0, a_i), with a_i greedy at s0.
bool stopping_check(const DecomposedQ& q, int s0, double epsilon, double alpha);

/// E_{s0∼μ0}[min_a Q(s0, a)].
double initial_value(const DecomposedQ& q, const std::vector<double>& mu0);

struct BudgetResult {
    std::uint64_t steps = 1;
    bool floored = false;  // log argument ≤ 1: budget clamped to one step
};

/// ⌈11.66·ln(2|Z|/(E·ζ)) / α²⌉.
BudgetResult sample_budget(double state_action_count, double episodes, double zeta,
                                   double alpha);

/// γ_{i+1} = E_{s0∼μ0}[N(s0, a_i) / D(s0, a_i)].
double dinkelbach_update(const DecomposedQ& q, const std::vector<double>& mu0);

/// max |Q − T̂Q| / (1 − δ) over visited pairs, using the empirical transition
/// counts; bounds ‖Q*_γ − Q‖ for the empirical model.
double bellman_residual_proxy(const FractionalMdp& mdp, const InnerLearner& learner);

struct OuterRecord {
    int iteration = 0;
    double gamma = 0.0;
    double q_s0 = 0.0;  // E_μ0[Q_i(s0, a_i)]
    double epsilon_proxy = 0.0;
    std::optional<double> epsilon_true;
    std::uint64_t inner_steps = 0;
    bool stopping_condition_held = false;
    std::optional<double> contraction;  // (γ_{i+1} − γ*) / (γ_i − γ*)
};

struct FqlResult {
    std::vector<double> gamma_trace;  // γ_0, γ_1, ...
    std::vector<int> policy;          // final greedy action per state
    std::vector<OuterRecord> records;
    DecomposedQ q;
    bool converged = false;
};

FqlResult run_fql(const FractionalMdp& mdp, const FqlConfig& config, RngStream& stream);

void write_fql_csv(std::ostream& out, const FqlResult& result);

}  // namespace aoimec::fql
