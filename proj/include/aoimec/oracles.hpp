#pragma once

// Brute-force ground truth for the learners. Nothing here calls into the
// learning or accounting code: values come from direct linear solves, full
// policy enumeration and an independently written sawtooth integrator.

#include <cstddef>
#include <span>
#include <vector>

#include "aoimec/aoi.hpp"
#include "aoimec/fractional_mdp.hpp"

namespace aoimec::oracles {

inline constexpr std::size_t kEnumerationCap = 1'000'000;

struct DiscountedValues {
    std::vector<double> n;  // per state
    std::vector<double> d;
};

/// Solves (I − δP_π)N = c_N^π and (I − δP_π)D = c_D^π.
DiscountedValues exact_discounted_values(const FractionalMdp& mdp, std::span<const int> policy);

/// E_μ0[N_π] / E_μ0[D_π].
double policy_objective(const FractionalMdp& mdp, std::span<const int> policy);

// Q*_γ for the parametric cost c_N − γc_D, with its N/D decomposition.
struct OptimalQ {
    double gamma = 0.0;
    std::vector<double> q;  // [s][a]
    std::vector<double> n;
    std::vector<double> d;
    std::vector<int> policy;
};

/// Exact policy iteration; ties go to the lowest action index.
OptimalQ exact_optimal_q(const FractionalMdp& mdp, double gamma);

/// max_{s,a} |Q*_γ(s,a) − (N − γD)(s,a)|.
double sup_norm_error(const OptimalQ& exact, std::span<const double> n_table,
                      std::span<const double> d_table);

struct GammaStar {
    double gamma = 0.0;
    std::vector<int> policy;
    double dinkelbach_gamma = 0.0;  // same optimum reached by exact Dinkelbach
    std::vector<double> dinkelbach_trace;
    std::size_t policies_enumerated = 0;
};

/// Enumerates every deterministic stationary policy and cross-checks the
/// minimum ratio with exact Dinkelbach iterations. Throws EnumerationCapError
/// when |A|^|S| exceeds `cap`.
GammaStar exact_gamma_star(const FractionalMdp& mdp, std::size_t cap = kEnumerationCap);

/// For each agent: objective under `policy` minus the best objective reachable
/// by a unilateral deviation to any deterministic stationary policy.
std::vector<double> nash_deviation_scan(const MarkovGame& game, const JointPolicy& policy,
                                        std::size_t cap = kEnumerationCap);

/// Enumerates all joint deterministic stationary policies and returns those
/// with worst unilateral improvement ≤ tol.
std::vector<JointPolicy> pure_equilibria(const MarkovGame& game, double tol,
                                         std::size_t cap = kEnumerationCap);

/// ∫ Δ(t) dt over [t0, t1] computed as ½(t1² − t0²) − ∫ T(t) dt with the
/// freshest-generation-time step function T.
double sawtooth_integral(const aoi::CompletionLog& log, double t0, double t1);

}  // namespace aoimec::oracles
