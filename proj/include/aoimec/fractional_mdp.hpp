#pragma once

// Finite fractional MDPs and Markov games: costs come in (numerator,
// denominator) pairs and the objective is the ratio of their discounted sums.

#include <cstdint>
#include <span>
#include <vector>

namespace aoimec {

class RngStream;

/// Inverse-CDF draw of an index from a discrete distribution.
int sample_index(std::span<const double> dist, RngStream& rng);

struct FractionalMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> transition;  // [s][a][s'], row-major
    std::vector<double> cost_n;      // [s][a]
    std::vector<double> cost_d;      // [s][a], strictly positive
    double delta = 0.9;
    std::vector<double> initial;     // μ0 over states

    std::size_t pair(int s, int a) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) +
               static_cast<std::size_t>(a);
    }
    double p(int s, int a, int next) const {
        return transition[pair(s, a) * static_cast<std::size_t>(num_states) +
                          static_cast<std::size_t>(next)];
    }
    std::span<const double> row(int s, int a) const {
        return {transition.data() + pair(s, a) * static_cast<std::size_t>(num_states),
                static_cast<std::size_t>(num_states)};
    }
    double cn(int s, int a) const { return cost_n[pair(s, a)]; }
    double cd(int s, int a) const { return cost_d[pair(s, a)]; }

    double min_ratio() const;
    double max_ratio() const;
    int num_pairs() const { return num_states * num_actions; }

    /// Throws InvalidArgument unless rows sum to 1 ± 1e-12, c_D > 0, c_N ≥ 0,
    /// δ ∈ (0,1) and μ0 is a distribution.
    void validate() const;

    /// Seeded random instance: Dirichlet-like rows, c_D ∈ [0.5, 2],
    /// c_N ∈ [0.5, 4]·c_D-ish, μ0 a point mass on state 0.
    static FractionalMdp random(int num_states, int num_actions, double delta, std::uint64_t seed);
};

// Q stored as N − γ·D. q() is the only read path for action values.
struct DecomposedQ {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> n_table;
    std::vector<double> d_table;
    double gamma = 0.0;

    DecomposedQ() = default;
    DecomposedQ(int states, int actions, double g);

    std::size_t pair(int s, int a) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions) +
               static_cast<std::size_t>(a);
    }
    double n(int s, int a) const { return n_table[pair(s, a)]; }
    double d(int s, int a) const { return d_table[pair(s, a)]; }
    double q(int s, int a) const { return n_table[pair(s, a)] - gamma * d_table[pair(s, a)]; }
    /// Minimum-cost action, lowest index on ties.
    int greedy(int s) const;
    double min_q(int s) const { return q(s, greedy(s)); }
};

struct MarkovGame {
    int num_agents = 0;
    int num_states = 0;
    std::vector<int> num_actions;               // per agent
    std::vector<double> transition;             // [s][joint][s']
    std::vector<std::vector<double>> cost_n;    // [agent][s][joint]
    std::vector<std::vector<double>> cost_d;    // [agent][s][joint]
    double delta = 0.9;
    std::vector<double> initial;
    // influence[m][n]: agent n's choices can move agent m's value. Defaults to
    // all-true; structured constructors mark what is known to be independent.
    std::vector<std::vector<bool>> influence;

    int num_joint() const;
    /// Joint index with agent 0 as the least significant digit.
    int encode(std::span<const int> actions) const;
    std::vector<int> decode(int joint) const;

    std::size_t pair(int s, int joint) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_joint()) +
               static_cast<std::size_t>(joint);
    }
    double p(int s, int joint, int next) const {
        return transition[pair(s, joint) * static_cast<std::size_t>(num_states) +
                          static_cast<std::size_t>(next)];
    }
    std::span<const double> row(int s, int joint) const {
        return {transition.data() + pair(s, joint) * static_cast<std::size_t>(num_states),
                static_cast<std::size_t>(num_states)};
    }
    double cn(int agent, int s, int joint) const {
        return cost_n[static_cast<std::size_t>(agent)][pair(s, joint)];
    }
    double cd(int agent, int s, int joint) const {
        return cost_d[static_cast<std::size_t>(agent)][pair(s, joint)];
    }
    double max_ratio(int agent) const;

    void validate() const;

    /// The single-agent game with the same tables.
    static MarkovGame from_mdp(const FractionalMdp& mdp);
    /// Product game: state (s_a, s_b), each agent sees only its own MDP.
    static MarkovGame decoupled(const FractionalMdp& a, const FractionalMdp& b);
    /// Two agents, random joint transitions and costs that depend on both
    /// actions, scaled by `coupling` ∈ [0,1].
    static MarkovGame random_coupled(int num_states, int actions_per_agent, double delta,
                                     double coupling, std::uint64_t seed);
};

// A deterministic stationary policy per agent: policy[m][s].
using JointPolicy = std::vector<std::vector<int>>;

/// Single-agent MDP faced by `agent` when the others follow `policy`.
FractionalMdp induced_mdp(const MarkovGame& game, int agent, const JointPolicy& policy);

}  // namespace aoimec
