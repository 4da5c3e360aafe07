#include "aoimec/nashq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "aoimec/errors.hpp"

namespace aoimec::fnql {

namespace {

double sup_norm(const std::vector<double>& v) {
    double out = 0.0;
    for (double x : v) out = std::max(out, std::abs(x));
    return out;
}

// Lowest-index best response of agent m with the others held at `actions`.
int best_response(const MarkovGame& game, const NashQTables& tables, const GammaVector& gamma,
                  int m, int s, std::vector<int>& actions) {
    const int k = game.num_actions[static_cast<std::size_t>(m)];
    const int keep = actions[static_cast<std::size_t>(m)];
    int best = 0;
    double best_q = 0.0;
    for (int a = 0; a < k; ++a) {
        actions[static_cast<std::size_t>(m)] = a;
        const double v = tables.q(m, s, game.encode(actions), gamma);
        if (a == 0 || v < best_q) {
            best_q = v;
            best = a;
        }
    }
    actions[static_cast<std::size_t>(m)] = keep;
    return best;
}

}  // namespace

NashQTables::NashQTables(const MarkovGame& game)
    : num_agents(game.num_agents), num_states(game.num_states), num_joint(game.num_joint()) {
    const auto size = static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_joint);
    n_table.assign(static_cast<std::size_t>(num_agents), std::vector<double>(size, 0.0));
    d_table = n_table;
    visits.assign(size, 0);
}

NashChoice nash_operator_approx(const MarkovGame& game, const NashQTables& tables,
                                const GammaVector& gamma, int s, int rounds) {
    if (rounds < 1) throw InvalidArgument("nash_operator_approx: rounds must be >= 1");
    std::vector<int> actions(static_cast<std::size_t>(game.num_agents), 0);
    NashChoice out;
    for (int r = 0; r < rounds; ++r) {
        bool changed = false;
        for (int m = 0; m < game.num_agents; ++m) {
            const int br = best_response(game, tables, gamma, m, s, actions);
            if (br != actions[static_cast<std::size_t>(m)]) {
                actions[static_cast<std::size_t>(m)] = br;
                changed = true;
            }
        }
        out.sweeps = r + 1;
        if (!changed) {
            out.converged = true;
            break;
        }
    }
    out.cycle = !out.converged;
    out.joint = game.encode(actions);
    return out;
}

void nashq_update(const MarkovGame& game, NashQTables& tables, const Transition& sample,
                  const GammaVector& gamma, double lambda, int rounds) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("nashq_update: lambda must lie in [0,1]");
    const int next_joint = nash_operator_approx(game, tables, gamma, sample.next, rounds).joint;
    const auto i = tables.pair(sample.state, sample.joint);
    for (int m = 0; m < game.num_agents; ++m) {
        const auto mm = static_cast<std::size_t>(m);
        const double tn = sample.cost_n[mm] + game.delta * tables.n(m, sample.next, next_joint);
        const double td = sample.cost_d[mm] + game.delta * tables.d(m, sample.next, next_joint);
        tables.n_table[mm][i] += lambda * (tn - tables.n_table[mm][i]);
        tables.d_table[mm][i] += lambda * (td - tables.d_table[mm][i]);
    }
}

ValueEstimates nash_value_estimates(const MarkovGame& game, const NashQTables& tables,
                                    const GammaVector& gamma, const std::vector<double>& mu0,
                                    int rounds) {
    ValueEstimates out;
    out.n.assign(static_cast<std::size_t>(game.num_agents), 0.0);
    out.d.assign(static_cast<std::size_t>(game.num_agents), 0.0);
    for (int s = 0; s < game.num_states; ++s) {
        const double w = mu0[static_cast<std::size_t>(s)];
        if (w <= 0.0) continue;
        const int j = nash_operator_approx(game, tables, gamma, s, rounds).joint;
        for (int m = 0; m < game.num_agents; ++m) {
            out.n[static_cast<std::size_t>(m)] += w * tables.n(m, s, j);
            out.d[static_cast<std::size_t>(m)] += w * tables.d(m, s, j);
        }
    }
    return out;
}

GammaVector outer_gamma_update(const ValueEstimates& values) {
    GammaVector gamma(values.n.size());
    for (std::size_t m = 0; m < values.n.size(); ++m) {
        if (!(values.d[m] > 0.0)) throw InvalidArgument("outer_gamma_update: non-positive denominator");
        gamma[m] = values.n[m] / values.d[m];
    }
    return gamma;
}

NewtonDiagnostics newton_residual_diagnostics(const std::vector<HistoryEntry>& history,
                                              const std::vector<std::vector<bool>>& influence) {
    if (history.size() < 2) throw InvalidArgument("newton_residual_diagnostics: need two iterations");
    const std::size_t agents = history.front().gamma.size();
    NewtonDiagnostics out;
    out.d_min = history.front().d.front();
    for (const auto& h : history) {
        out.f.push_back(h.f);
        for (double d : h.d) out.d_min = std::min(out.d_min, d);
    }

    // Fit F_{m,i+1} − F_{m,i} + D_{m,i}·s_{m,i} ≈ Σ_{n≠m} C_mn·s_{n,i}, one
    // regressor at a time.
    out.coupling.assign(agents, std::vector<double>(agents, 0.0));
    for (std::size_t m = 0; m < agents; ++m) {
        for (std::size_t n = 0; n < agents; ++n) {
            if (n == m || (!influence.empty() && !influence[m][n])) continue;
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i + 1 < history.size(); ++i) {
                const double sm = history[i + 1].gamma[m] - history[i].gamma[m];
                const double sn = history[i + 1].gamma[n] - history[i].gamma[n];
                const double e = history[i + 1].f[m] - history[i].f[m] + history[i].d[m] * sm;
                num += e * sn;
                den += sn * sn;
            }
            if (den > 0.0) out.coupling[m][n] = num / den;
        }
    }

    for (std::size_t i = 0; i + 1 < history.size(); ++i) {
        std::vector<double> r(agents);
        for (std::size_t m = 0; m < agents; ++m) {
            const double sm = history[i + 1].gamma[m] - history[i].gamma[m];
            double v = history[i].f[m] - history[i].d[m] * sm;
            for (std::size_t n = 0; n < agents; ++n) {
                if (out.coupling[m][n] == 0.0) continue;
                v += out.coupling[m][n] * (history[i + 1].gamma[n] - history[i].gamma[n]);
            }
            r[m] = v;
        }
        // F at round-off level carries no information about the step.
        const double fn = sup_norm(history[i].f);
        const double floor = 1e-12 * std::max(1.0, sup_norm(history[i].d) * sup_norm(history[i].gamma));
        const double eta = fn > floor ? sup_norm(r) / fn : 0.0;
        double scale = 0.0;
        for (std::size_t m = 0; m < agents; ++m) {
            const double gd = std::abs(history[i].gamma[m] * history[i].d[m]);
            const double step = std::abs(history[i].d[m] * (history[i + 1].gamma[m] - history[i].gamma[m]));
            scale = std::max(scale, std::abs(history[i].f[m]) + 2.0 * gd + step);
        }
        out.eta_roundoff.push_back(fn > floor ? 8.0 * std::numeric_limits<double>::epsilon() * scale / fn : 0.0);
        out.residual.push_back(std::move(r));
        out.eta.push_back(eta);
        out.eta_max = std::max(out.eta_max, eta);
        if (eta >= 1.0) out.forcing_violated = true;
    }
    return out;
}

void FnqlConfig::validate() const {
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (max_outer < 1) throw InvalidArgument("max_outer must be >= 1");
    if (inner_steps < 1) throw InvalidArgument("inner budget must be >= 1");
    if (rounds < 1) throw InvalidArgument("rounds must be >= 1");
}

FnqlResult run_fnql(const MarkovGame& game, const FnqlConfig& config, RngStream& stream) {
    game.validate();
    config.validate();
    const int agents = game.num_agents;
    const int ns = game.num_states;
    const int nj = game.num_joint();
    const auto am = static_cast<std::size_t>(agents);

    GammaVector gamma(am);
    GammaVector upper(am);
    for (int m = 0; m < agents; ++m) upper[static_cast<std::size_t>(m)] = game.max_ratio(m);
    gamma = config.initial_gamma.value_or(upper);
    if (gamma.size() != am) throw InvalidArgument("initial gamma needs one entry per agent");

    FnqlResult result;
    result.gamma_traces.assign(am, {});
    for (std::size_t m = 0; m < am; ++m) result.gamma_traces[m].push_back(gamma[m]);
    NashQTables tables(game);
    std::vector<HistoryEntry> history;

    std::vector<std::vector<double>> next_n(am, std::vector<double>(static_cast<std::size_t>(ns)));
    std::vector<std::vector<double>> next_d = next_n;

    for (int it = 0; it < config.max_outer; ++it) {
        switch (config.init) {
            case fql::InnerInit::Cold: tables = NashQTables(game); break;
            case fql::InnerInit::Warm: break;
            case fql::InnerInit::ResetQ:
                for (std::size_t m = 0; m < am; ++m) {
                    for (std::size_t k = 0; k < tables.n_table[m].size(); ++k) {
                        tables.n_table[m][k] = gamma[m] * tables.d_table[m][k];
                    }
                }
                break;
        }

        for (std::uint64_t step = 0; step < config.inner_steps; ++step) {
            for (int s = 0; s < ns; ++s) {
                const int j = nash_operator_approx(game, tables, gamma, s, config.rounds).joint;
                for (int m = 0; m < agents; ++m) {
                    next_n[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)] = tables.n(m, s, j);
                    next_d[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)] = tables.d(m, s, j);
                }
            }
            for (int s = 0; s < ns; ++s) {
                for (int j = 0; j < nj; ++j) {
                    const auto row = game.row(s, j);
                    int next = -1;
                    if (config.backup == fql::Backup::Sampled) next = sample_index(row, stream);
                    const auto i = tables.pair(s, j);
                    const double lr = config.schedule.at(tables.visits[i]++, game.delta);
                    for (int m = 0; m < agents; ++m) {
                        const auto mm = static_cast<std::size_t>(m);
                        double tn = 0.0, td = 0.0;
                        if (next >= 0) {
                            tn = next_n[mm][static_cast<std::size_t>(next)];
                            td = next_d[mm][static_cast<std::size_t>(next)];
                        } else {
                            for (int t = 0; t < ns; ++t) {
                                tn += row[static_cast<std::size_t>(t)] * next_n[mm][static_cast<std::size_t>(t)];
                                td += row[static_cast<std::size_t>(t)] * next_d[mm][static_cast<std::size_t>(t)];
                            }
                        }
                        auto& n = tables.n_table[mm][i];
                        auto& d = tables.d_table[mm][i];
                        n += lr * (game.cn(m, s, j) + game.delta * tn - n);
                        d += lr * (game.cd(m, s, j) + game.delta * td - d);
                    }
                }
            }
        }

        FnqlRecord rec;
        rec.iteration = it;
        rec.gamma = gamma;
        const auto values = nash_value_estimates(game, tables, gamma, game.initial, config.rounds);
        rec.n = values.n;
        rec.d = values.d;
        rec.f.resize(am);
        for (std::size_t m = 0; m < am; ++m) rec.f[m] = values.n[m] - gamma[m] * values.d[m];
        for (int s = 0; s < ns; ++s) {
            if (nash_operator_approx(game, tables, gamma, s, config.rounds).cycle) ++rec.cycling_states;
        }
        history.push_back({gamma, rec.f, rec.d});

        const GammaVector next = outer_gamma_update(values);
        for (std::size_t m = 0; m < am; ++m) {
            if (!(next[m] >= 0.0 && next[m] <= upper[m] * (1.0 + 1e-9) + 1e-12)) {
                throw DivergenceError("FNQL: gamma left [0, max ratio] for agent " + std::to_string(m));
            }
        }
        if (config.gamma_star) {
            std::vector<double> before(am), after(am);
            for (std::size_t m = 0; m < am; ++m) {
                before[m] = gamma[m] - (*config.gamma_star)[m];
                after[m] = next[m] - (*config.gamma_star)[m];
            }
            const double b = sup_norm(before);
            if (b > 0.0) rec.contraction = sup_norm(after) / b;
        }
        result.records.push_back(rec);
        for (std::size_t m = 0; m < am; ++m) result.gamma_traces[m].push_back(next[m]);
        const bool done = sup_norm(rec.f) <= config.epsilon;
        gamma = next;
        if (done) {
            result.converged = true;
            break;
        }
    }
    // The final γ enters the history with its step left open; F is recomputed
    // from the current tables so the last Newton step has a right endpoint.
    {
        const auto values = nash_value_estimates(game, tables, gamma, game.initial, config.rounds);
        std::vector<double> f(am);
        for (std::size_t m = 0; m < am; ++m) f[m] = values.n[m] - gamma[m] * values.d[m];
        history.push_back({gamma, f, values.d});
    }
    result.diagnostics = newton_residual_diagnostics(history, game.influence);

    result.policy.assign(am, std::vector<int>(static_cast<std::size_t>(ns), 0));
    for (int s = 0; s < ns; ++s) {
        const auto joint = game.decode(nash_operator_approx(game, tables, gamma, s, config.rounds).joint);
        for (std::size_t m = 0; m < am; ++m) result.policy[m][static_cast<std::size_t>(s)] = joint[m];
    }
    result.tables = std::move(tables);
    return result;
}

void write_fnql_csv(std::ostream& out, const FnqlResult& result) {
    out << "# aoimec fnql-trace v1\n";
    out << "iteration,agent,gamma,n,d,f,eta\n";
    const auto old = out.precision(17);
    for (const auto& r : result.records) {
        for (std::size_t m = 0; m < r.gamma.size(); ++m) {
            out << r.iteration << ',' << m << ',' << r.gamma[m] << ',' << r.n[m] << ',' << r.d[m] << ','
                << r.f[m] << ',';
            const auto i = static_cast<std::size_t>(r.iteration);
            if (i < result.diagnostics.eta.size()) out << result.diagnostics.eta[i];
            out << '\n';
        }
    }
    out.precision(old);
}

}  // namespace aoimec::fnql
