#include "aoimec/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "aoimec/errors.hpp"

namespace aoimec::oracles {

namespace {

std::size_t checked_policy_count(int states, int actions, std::size_t cap) {
    double count = std::pow(static_cast<double>(actions), static_cast<double>(states));
    if (count > static_cast<double>(cap)) {
        throw EnumerationCapError("policy enumeration over " + std::to_string(count) +
                                  " policies exceeds the cap");
    }
    return static_cast<std::size_t>(count);
}

// Mixed-radix counter over policies.
bool next_policy(std::vector<int>& policy, int actions) {
    for (auto& a : policy) {
        if (++a < actions) return true;
        a = 0;
    }
    return false;
}

double expect(std::span<const double> dist, const std::vector<double>& values) {
    double v = 0.0;
    for (std::size_t s = 0; s < values.size(); ++s) v += dist[s] * values[s];
    return v;
}

}  // namespace

DiscountedValues exact_discounted_values(const FractionalMdp& mdp, std::span<const int> policy) {
    const int ns = mdp.num_states;
    if (policy.size() != static_cast<std::size_t>(ns)) throw InvalidArgument("policy size != |S|");
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(ns, ns);
    Eigen::VectorXd cn(ns), cd(ns);
    for (int s = 0; s < ns; ++s) {
        const int act = policy[static_cast<std::size_t>(s)];
        if (act < 0 || act >= mdp.num_actions) throw InvalidArgument("policy action out of range");
        for (int t = 0; t < ns; ++t) a(s, t) -= mdp.delta * mdp.p(s, act, t);
        cn(s) = mdp.cn(s, act);
        cd(s) = mdp.cd(s, act);
    }
    const auto lu = a.partialPivLu();
    const Eigen::VectorXd n = lu.solve(cn);
    const Eigen::VectorXd d = lu.solve(cd);
    return {std::vector<double>(n.data(), n.data() + ns), std::vector<double>(d.data(), d.data() + ns)};
}

double policy_objective(const FractionalMdp& mdp, std::span<const int> policy) {
    const auto v = exact_discounted_values(mdp, policy);
    return expect(mdp.initial, v.n) / expect(mdp.initial, v.d);
}

OptimalQ exact_optimal_q(const FractionalMdp& mdp, double gamma) {
    const int ns = mdp.num_states;
    const int na = mdp.num_actions;
    std::vector<int> policy(static_cast<std::size_t>(ns), 0);
    OptimalQ out;
    out.gamma = gamma;
    for (int iter = 0; iter < 10'000; ++iter) {
        const auto v = exact_discounted_values(mdp, policy);
        out.q.assign(static_cast<std::size_t>(ns * na), 0.0);
        out.n.assign(out.q.size(), 0.0);
        out.d.assign(out.q.size(), 0.0);
        for (int s = 0; s < ns; ++s) {
            for (int a = 0; a < na; ++a) {
                double en = 0.0, ed = 0.0;
                for (int t = 0; t < ns; ++t) {
                    en += mdp.p(s, a, t) * v.n[static_cast<std::size_t>(t)];
                    ed += mdp.p(s, a, t) * v.d[static_cast<std::size_t>(t)];
                }
                const auto i = mdp.pair(s, a);
                out.n[i] = mdp.cn(s, a) + mdp.delta * en;
                out.d[i] = mdp.cd(s, a) + mdp.delta * ed;
                out.q[i] = out.n[i] - gamma * out.d[i];
            }
        }
        bool changed = false;
        for (int s = 0; s < ns; ++s) {
            const int cur = policy[static_cast<std::size_t>(s)];
            const double cur_q = out.q[mdp.pair(s, cur)];
            double best_q = cur_q;
            for (int a = 0; a < na; ++a) best_q = std::min(best_q, out.q[mdp.pair(s, a)]);
            const double margin = 1e-12 * std::max(1.0, std::abs(cur_q));
            // Switch only on a strict improvement so ties cannot cycle.
            if (best_q < cur_q - margin) {
                for (int a = 0; a < na; ++a) {
                    if (out.q[mdp.pair(s, a)] <= best_q + margin) {
                        policy[static_cast<std::size_t>(s)] = a;
                        break;
                    }
                }
                changed = true;
            }
        }
        if (!changed) break;
    }
    // Report the lowest-index minimiser in each state.
    for (int s = 0; s < ns; ++s) {
        double best_q = std::numeric_limits<double>::infinity();
        for (int a = 0; a < na; ++a) best_q = std::min(best_q, out.q[mdp.pair(s, a)]);
        for (int a = 0; a < na; ++a) {
            if (out.q[mdp.pair(s, a)] <= best_q + 1e-12 * std::max(1.0, std::abs(best_q))) {
                policy[static_cast<std::size_t>(s)] = a;
                break;
            }
        }
    }
    out.policy = policy;
    return out;
}

double sup_norm_error(const OptimalQ& exact, std::span<const double> n_table,
                      std::span<const double> d_table) {
    double err = 0.0;
    for (std::size_t i = 0; i < exact.q.size(); ++i) {
        err = std::max(err, std::abs(exact.q[i] - (n_table[i] - exact.gamma * d_table[i])));
    }
    return err;
}

GammaStar exact_gamma_star(const FractionalMdp& mdp, std::size_t cap) {
    const std::size_t count = checked_policy_count(mdp.num_states, mdp.num_actions, cap);
    GammaStar out;
    out.gamma = std::numeric_limits<double>::infinity();
    std::vector<int> policy(static_cast<std::size_t>(mdp.num_states), 0);
    do {
        const double obj = policy_objective(mdp, policy);
        ++out.policies_enumerated;
        if (obj < out.gamma - 1e-13) {
            out.gamma = obj;
            out.policy = policy;
        }
    } while (next_policy(policy, mdp.num_actions));
    (void)count;

    // Exact Dinkelbach from above: γ ← E[N_π]/E[D_π] with π optimal for c_N − γc_D.
    double gamma = mdp.max_ratio();
    out.dinkelbach_trace.push_back(gamma);
    for (int iter = 0; iter < 200; ++iter) {
        const auto opt = exact_optimal_q(mdp, gamma);
        const double next = policy_objective(mdp, opt.policy);
        out.dinkelbach_trace.push_back(next);
        if (std::abs(next - gamma) <= 1e-15 * std::max(1.0, std::abs(gamma))) break;
        gamma = next;
    }
    out.dinkelbach_gamma = out.dinkelbach_trace.back();
    return out;
}

std::vector<double> nash_deviation_scan(const MarkovGame& game, const JointPolicy& policy,
                                        std::size_t cap) {
    std::vector<double> improvement(static_cast<std::size_t>(game.num_agents), 0.0);
    for (int m = 0; m < game.num_agents; ++m) {
        const FractionalMdp mdp = induced_mdp(game, m, policy);
        checked_policy_count(mdp.num_states, mdp.num_actions, cap);
        const double current = policy_objective(mdp, policy[static_cast<std::size_t>(m)]);
        double best = current;
        std::vector<int> dev(static_cast<std::size_t>(mdp.num_states), 0);
        do {
            best = std::min(best, policy_objective(mdp, dev));
        } while (next_policy(dev, mdp.num_actions));
        improvement[static_cast<std::size_t>(m)] = current - best;
    }
    return improvement;
}

std::vector<JointPolicy> pure_equilibria(const MarkovGame& game, double tol, std::size_t cap) {
    std::vector<JointPolicy> found;
    JointPolicy policy(static_cast<std::size_t>(game.num_agents),
                       std::vector<int>(static_cast<std::size_t>(game.num_states), 0));
    double total = 1.0;
    for (int m = 0; m < game.num_agents; ++m) {
        total *= std::pow(game.num_actions[static_cast<std::size_t>(m)], game.num_states);
    }
    if (total > static_cast<double>(cap)) throw EnumerationCapError("joint policy space too large");
    while (true) {
        const auto imp = nash_deviation_scan(game, policy, cap);
        if (*std::max_element(imp.begin(), imp.end()) <= tol) found.push_back(policy);
        int m = 0;
        for (; m < game.num_agents; ++m) {
            if (next_policy(policy[static_cast<std::size_t>(m)], game.num_actions[static_cast<std::size_t>(m)])) break;
        }
        if (m == game.num_agents) break;
    }
    return found;
}

double sawtooth_integral(const aoi::CompletionLog& log, double t0, double t1) {
    if (t1 < t0) throw InvalidArgument("sawtooth_integral: empty window");
    // Breakpoints of the step function T(t) within the window.
    struct Step {
        double at;
        double value;
    };
    std::vector<Step> steps;
    double before = log.origin;
    for (const auto& e : log.entries) {
        if (e.dropped) continue;
        if (e.end_time <= t0) {
            before = e.generation_time;
        } else if (e.end_time < t1) {
            steps.push_back({e.end_time, e.generation_time});
        }
    }
    double integral_t = 0.0;
    double cursor = t0;
    double value = before;
    for (const auto& st : steps) {
        integral_t += value * (st.at - cursor);
        cursor = st.at;
        value = st.value;
    }
    integral_t += value * (t1 - cursor);
    return 0.5 * (t1 * t1 - t0 * t0) - integral_t;
}

}  // namespace aoimec::oracles
