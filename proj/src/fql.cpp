#include "aoimec/fql.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "aoimec/errors.hpp"

namespace aoimec::fql {

double StepSchedule::at(std::uint64_t visits, double delta) const {
    const auto n = static_cast<double>(visits);
    switch (kind) {
        case Kind::Harmonic: return 1.0 / (1.0 + n);
        case Kind::Rescaled: return 1.0 / (1.0 + (1.0 - delta) * n);
        case Kind::Polynomial: return 1.0 / std::pow(1.0 + n, exponent);
        case Kind::Constant: return value;
    }
    return 1.0;
}

void FqlConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
    if (!(zeta > 0.0 && zeta < 1.0)) throw InvalidArgument("zeta must lie in (0,1)");
    if (episodes < 1) throw InvalidArgument("at least one outer iteration required");
    if (budget_mode == BudgetMode::FixedSteps && inner_steps < 1) {
        throw InvalidArgument("inner budget must be >= 1");
    }
    if (check_every < 1) throw InvalidArgument("check_every must be >= 1");
    if (schedule.kind == StepSchedule::Kind::Constant && !(schedule.value > 0.0 && schedule.value <= 1.0)) {
        throw InvalidArgument("constant step size must lie in (0,1]");
    }
}

InnerLearner::InnerLearner(const FractionalMdp& mdp, double gamma)
    : q(mdp.num_states, mdp.num_actions, gamma),
      visits(static_cast<std::size_t>(mdp.num_pairs()), 0),
      transitions(static_cast<std::size_t>(mdp.num_pairs() * mdp.num_states), 0) {}

void inner_q_learning(const FractionalMdp& mdp, InnerLearner& learner, std::uint64_t budget,
                      const StepSchedule& schedule, Backup backup, RngStream& stream) {
    const int ns = mdp.num_states;
    const int na = mdp.num_actions;
    auto& q = learner.q;
    std::vector<double> next_n(static_cast<std::size_t>(ns));
    std::vector<double> next_d(static_cast<std::size_t>(ns));
    for (std::uint64_t step = 0; step < budget; ++step) {
        // Synchronous step: bootstrap values come from the tables as they were
        // at the start of the step.
        for (int s = 0; s < ns; ++s) {
            const int a = q.greedy(s);
            next_n[static_cast<std::size_t>(s)] = q.n(s, a);
            next_d[static_cast<std::size_t>(s)] = q.d(s, a);
        }
        for (int s = 0; s < ns; ++s) {
            for (int a = 0; a < na; ++a) {
                double tn = 0.0;
                double td = 0.0;
                if (backup == Backup::Sampled) {
                    const int next = sample_index(mdp.row(s, a), stream);
                    learner.transitions[mdp.pair(s, a) * static_cast<std::size_t>(ns) +
                                        static_cast<std::size_t>(next)]++;
                    tn = next_n[static_cast<std::size_t>(next)];
                    td = next_d[static_cast<std::size_t>(next)];
                } else {
                    const auto row = mdp.row(s, a);
                    for (int t = 0; t < ns; ++t) {
                        tn += row[static_cast<std::size_t>(t)] * next_n[static_cast<std::size_t>(t)];
                        td += row[static_cast<std::size_t>(t)] * next_d[static_cast<std::size_t>(t)];
                    }
                }
                const auto i = mdp.pair(s, a);
                const double lr = schedule.at(learner.visits[i]++, mdp.delta);
                q.n_table[i] += lr * (mdp.cn(s, a) + mdp.delta * tn - q.n_table[i]);
                q.d_table[i] += lr * (mdp.cd(s, a) + mdp.delta * td - q.d_table[i]);
            }
        }
        ++learner.steps;
    }
}

DecomposedQ inner_q_learning(const FractionalMdp& mdp, double gamma, std::uint64_t budget,
                             RngStream& stream, const StepSchedule& schedule, Backup backup) {
    if (budget < 1) throw InvalidArgument("inner budget must be >= 1");
    InnerLearner learner(mdp, gamma);
    inner_q_learning(mdp, learner, budget, schedule, backup, stream);
    return learner.q;
}

bool stopping_check(const DecomposedQ& q, int s0, double epsilon, double alpha) {
    return epsilon < -alpha * q.min_q(s0);
}

double initial_value(const DecomposedQ& q, const std::vector<double>& mu0) {
    double v = 0.0;
    for (int s = 0; s < q.num_states; ++s) {
        const double w = mu0[static_cast<std::size_t>(s)];
        if (w > 0.0) v += w * q.min_q(s);
    }
    return v;
}

BudgetResult sample_budget(double state_action_count, double episodes, double zeta,
                                   double alpha) {
    if (!(state_action_count > 0.0 && episodes > 0.0 && zeta > 0.0)) {
        throw InvalidArgument("sample_budget: inputs must be positive");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("sample_budget: alpha must lie in (0,1]");
    const double arg = 2.0 * state_action_count / (episodes * zeta);
    if (arg <= 1.0) return {1, true};
    const double steps = std::ceil(11.66 * std::log(arg) / (alpha * alpha));
    return {static_cast<std::uint64_t>(std::max(1.0, steps)), false};
}

double dinkelbach_update(const DecomposedQ& q, const std::vector<double>& mu0) {
    double gamma = 0.0;
    for (int s = 0; s < q.num_states; ++s) {
        const double w = mu0[static_cast<std::size_t>(s)];
        if (w <= 0.0) continue;
        const int a = q.greedy(s);
        const double d = q.d(s, a);
        if (!(d > 0.0)) throw InvalidArgument("dinkelbach_update: non-positive denominator");
        gamma += w * q.n(s, a) / d;
    }
    return gamma;
}

double bellman_residual_proxy(const FractionalMdp& mdp, const InnerLearner& learner) {
    const int ns = mdp.num_states;
    const auto& q = learner.q;
    std::vector<double> v(static_cast<std::size_t>(ns));
    for (int s = 0; s < ns; ++s) v[static_cast<std::size_t>(s)] = q.min_q(s);
    double worst = 0.0;
    for (int s = 0; s < ns; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            const auto i = mdp.pair(s, a);
            std::uint64_t total = 0;
            double ev = 0.0;
            for (int t = 0; t < ns; ++t) {
                const auto c = learner.transitions[i * static_cast<std::size_t>(ns) + static_cast<std::size_t>(t)];
                total += c;
                ev += static_cast<double>(c) * v[static_cast<std::size_t>(t)];
            }
            if (total == 0) {
                // Expected backups keep no counts; fall back to the model.
                if (learner.visits[i] == 0) continue;
                ev = 0.0;
                for (int t = 0; t < ns; ++t) ev += mdp.p(s, a, t) * v[static_cast<std::size_t>(t)];
            } else {
                ev /= static_cast<double>(total);
            }
            const double target = mdp.cn(s, a) - q.gamma * mdp.cd(s, a) + mdp.delta * ev;
            worst = std::max(worst, std::abs(q.q(s, a) - target));
        }
    }
    return worst / (1.0 - mdp.delta);
}

FqlResult run_fql(const FractionalMdp& mdp, const FqlConfig& config, RngStream& stream) {
    mdp.validate();
    config.validate();
    const double upper = [&] {
        double max_n = 0.0, min_d = mdp.cost_d.front();
        for (double v : mdp.cost_n) max_n = std::max(max_n, v);
        for (double v : mdp.cost_d) min_d = std::min(min_d, v);
        return max_n / min_d;
    }();

    FqlResult result;
    double gamma = config.initial_gamma.value_or(mdp.max_ratio());
    result.gamma_trace.push_back(gamma);
    InnerLearner learner(mdp, gamma);

    for (int i = 0; i < config.episodes; ++i) {
        switch (config.init) {
            case InnerInit::Cold: learner = InnerLearner(mdp, gamma); break;
            case InnerInit::Warm: break;
            case InnerInit::ResetQ:
                for (std::size_t k = 0; k < learner.q.n_table.size(); ++k) {
                    learner.q.n_table[k] = gamma * learner.q.d_table[k];
                }
                break;
        }
        learner.q.gamma = gamma;

        OuterRecord rec;
        rec.iteration = i;
        rec.gamma = gamma;
        const std::uint64_t start_steps = learner.steps;
        auto current_error = [&] {
            return config.error_oracle ? config.error_oracle(learner.q) : bellman_residual_proxy(mdp, learner);
        };
        switch (config.budget_mode) {
            case BudgetMode::FixedSteps:
                inner_q_learning(mdp, learner, config.inner_steps, config.schedule, config.backup, stream);
                break;
            case BudgetMode::SampleBound: {
                const auto b = sample_budget(mdp.num_pairs(), config.episodes, config.zeta,
                                                     config.alpha);
                inner_q_learning(mdp, learner, b.steps, config.schedule, config.backup, stream);
                break;
            }
            case BudgetMode::StoppingCondition: {
                // Below γ* the optimal Q is positive and ε < −αQ can never
                // hold; comparing against α|Q| keeps the budget finite there.
                do {
                    inner_q_learning(mdp, learner, config.check_every, config.schedule, config.backup, stream);
                } while (!(current_error() < config.alpha * std::abs(initial_value(learner.q, mdp.initial))) &&
                         learner.steps - start_steps < config.max_inner_steps);
                break;
            }
        }
        rec.inner_steps = learner.steps - start_steps;
        rec.q_s0 = initial_value(learner.q, mdp.initial);
        rec.epsilon_proxy = bellman_residual_proxy(mdp, learner);
        if (config.error_oracle) rec.epsilon_true = config.error_oracle(learner.q);
        const double eps = rec.epsilon_true.value_or(rec.epsilon_proxy);
        rec.stopping_condition_held = eps < -config.alpha * rec.q_s0;

        const double next = dinkelbach_update(learner.q, mdp.initial);
        if (!(next >= 0.0 && next <= upper * (1.0 + 1e-12))) {
            throw DivergenceError("FQL: gamma left [0, max c_N / min c_D]: " + std::to_string(next));
        }
        if (config.gamma_star) {
            const double gap = gamma - *config.gamma_star;
            if (gap != 0.0) rec.contraction = (next - *config.gamma_star) / gap;
        }
        result.records.push_back(rec);
        result.gamma_trace.push_back(next);
        const bool done = std::abs(next - gamma) < config.tolerance;
        gamma = next;
        if (done) {
            result.converged = true;
            break;
        }
    }
    learner.q.gamma = gamma;
    result.q = learner.q;
    for (int s = 0; s < mdp.num_states; ++s) result.policy.push_back(learner.q.greedy(s));
    return result;
}

void write_fql_csv(std::ostream& out, const FqlResult& result) {
    out << "# aoimec fql-trace v1\n";
    out << "iteration,gamma,q_s0,epsilon_proxy,epsilon_true,inner_steps,stopping_held,contraction\n";
    const auto old = out.precision(17);
    for (const auto& r : result.records) {
        out << r.iteration << ',' << r.gamma << ',' << r.q_s0 << ',' << r.epsilon_proxy << ',';
        if (r.epsilon_true) out << *r.epsilon_true;
        out << ',' << r.inner_steps << ',' << (r.stopping_condition_held ? 1 : 0) << ',';
        if (r.contraction) out << *r.contraction;
        out << '\n';
    }
    out << result.records.size() << ',' << result.gamma_trace.back() << ",,,,0,,\n";
    out.precision(old);
}

}  // namespace aoimec::fql
