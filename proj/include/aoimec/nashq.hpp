#pragma once

// Fractional Nash Q-learning: per-agent decomposed Q tables over joint
// actions, a pure-strategy Nash operator by iterative best response, and an
// outer per-agent Dinkelbach update that behaves like an inexact Newton step.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aoimec/event_engine.hpp"
#include "aoimec/fql.hpp"
#include "aoimec/fractional_mdp.hpp"

namespace aoimec::fnql {

using GammaVector = std::vector<double>;

struct NashQTables {
    int num_agents = 0;
    int num_states = 0;
    int num_joint = 0;
    std::vector<std::vector<double>> n_table;  // [agent][s * joint + j]
    std::vector<std::vector<double>> d_table;
    std::vector<std::uint64_t> visits;         // [s * joint + j]

    NashQTables() = default;
    explicit NashQTables(const MarkovGame& game);

    std::size_t pair(int s, int joint) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_joint) +
               static_cast<std::size_t>(joint);
    }
    double n(int m, int s, int j) const { return n_table[static_cast<std::size_t>(m)][pair(s, j)]; }
    double d(int m, int s, int j) const { return d_table[static_cast<std::size_t>(m)][pair(s, j)]; }
    double q(int m, int s, int j, const GammaVector& gamma) const {
        return n(m, s, j) - gamma[static_cast<std::size_t>(m)] * d(m, s, j);
    }
};

struct NashChoice {
    int joint = 0;
    int sweeps = 0;
    bool converged = false;  // a sweep changed nothing: pure NE of the stage game
    bool cycle = false;      // rounds exhausted without a fixed point
};

/// Iterative best response at state s, starting from all-lowest-index and
/// sweeping agents in ascending order.
NashChoice nash_operator_approx(const MarkovGame& game, const NashQTables& tables,
                                const GammaVector& gamma, int s, int rounds);

struct Transition {
    int state = 0;
    int joint = 0;
    std::vector<double> cost_n;  // per agent
    std::vector<double> cost_d;
    int next = 0;
};

/// One asynchronous Nash-Q update from a single sample.
void nashq_update(const MarkovGame& game, NashQTables& tables, const Transition& sample,
                  const GammaVector& gamma, double lambda, int rounds = 10);

struct ValueEstimates {
    std::vector<double> n;  // per agent
    std::vector<double> d;
};

ValueEstimates nash_value_estimates(const MarkovGame& game, const NashQTables& tables,
                                    const GammaVector& gamma, const std::vector<double>& mu0,
                                    int rounds = 10);

/// γ_m = N_m / D_m.
GammaVector outer_gamma_update(const ValueEstimates& values);

struct NewtonDiagnostics {
    std::vector<std::vector<double>> f;         // F per iteration, per agent
    std::vector<double> eta;                    // ‖r_i‖∞ / ‖F_i‖∞ per step
    // Size of η_i that rounding alone can produce: F is a difference of
    // terms far larger than itself near the fixed point.
    std::vector<double> eta_roundoff;
    std::vector<std::vector<double>> residual;  // r_i per step
    std::vector<std::vector<double>> coupling;  // estimated off-diagonal ∂F_m/∂γ_n
    double d_min = 0.0;
    double eta_max = 0.0;
    bool forcing_violated = false;  // some η_i ≥ 1
    std::string unestimated = "mu,C_D,C_int,H_int,K,kappa";
};

struct HistoryEntry {
    GammaVector gamma;
    std::vector<double> f;
    std::vector<double> d;
};

/// r_i = F_i + J'·s_i with J' = −diag(D_i) plus off-diagonal couplings fitted
/// by least squares to the observed F changes. Pairs marked as independent in
/// `influence` keep a zero coupling.
NewtonDiagnostics newton_residual_diagnostics(const std::vector<HistoryEntry>& history,
                                              const std::vector<std::vector<bool>>& influence);

struct FnqlConfig {
    double epsilon = 1e-3;
    int max_outer = 200;
    std::uint64_t inner_steps = 2'000;
    int rounds = 10;
    fql::StepSchedule schedule{fql::StepSchedule::Kind::Harmonic};
    fql::Backup backup = fql::Backup::Sampled;
    fql::InnerInit init = fql::InnerInit::Warm;
    std::optional<GammaVector> initial_gamma;  // default: per-agent max ratio
    std::optional<GammaVector> gamma_star;

    void validate() const;
};

struct FnqlRecord {
    int iteration = 0;
    GammaVector gamma;
    std::vector<double> n;
    std::vector<double> d;
    std::vector<double> f;
    std::optional<double> contraction;  // ‖γ_{i+1} − γ*‖ / ‖γ_i − γ*‖
    int cycling_states = 0;
};

struct FnqlResult {
    std::vector<std::vector<double>> gamma_traces;  // [agent][iteration]
    JointPolicy policy;
    std::vector<FnqlRecord> records;
    NewtonDiagnostics diagnostics;
    NashQTables tables;
    bool converged = false;
};

/// Synchronous inner sweeps consume the stream in the same order as the FQL
/// inner learner, so a one-agent game reproduces run_fql exactly.
FnqlResult run_fnql(const MarkovGame& game, const FnqlConfig& config, RngStream& stream);

void write_fnql_csv(std::ostream& out, const FnqlResult& result);

}  // namespace aoimec::fnql
