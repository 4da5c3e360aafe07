#include "aoimec/fractional_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aoimec/errors.hpp"
#include "aoimec/event_engine.hpp"

namespace aoimec {

namespace {

void check_distribution(std::span<const double> row, const char* what) {
    double sum = 0.0;
    for (double v : row) {
        if (v < 0.0) throw InvalidArgument(std::string(what) + ": negative probability");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument(std::string(what) + ": row does not sum to 1");
}

std::vector<double> random_row(int n, RngStream& rng) {
    std::vector<double> row(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& v : row) {
        v = -std::log(rng.uniform());
        sum += v;
    }
    for (auto& v : row) v /= sum;
    // Renormalise the last entry so the row sums to 1 within rounding.
    double head = 0.0;
    for (std::size_t i = 0; i + 1 < row.size(); ++i) head += row[i];
    row.back() = 1.0 - head;
    return row;
}

}  // namespace

int sample_index(std::span<const double> dist, RngStream& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) return static_cast<int>(i);
    }
    // Rounding can leave the cumulative sum a hair below 1.
    for (std::size_t i = dist.size(); i-- > 0;) {
        if (dist[i] > 0.0) return static_cast<int>(i);
    }
    return 0;
}

double FractionalMdp::min_ratio() const {
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cost_n.size(); ++i) r = std::min(r, cost_n[i] / cost_d[i]);
    return r;
}

double FractionalMdp::max_ratio() const {
    double r = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cost_n.size(); ++i) r = std::max(r, cost_n[i] / cost_d[i]);
    return r;
}

void FractionalMdp::validate() const {
    if (num_states <= 0 || num_actions <= 0) throw InvalidArgument("MDP needs states and actions");
    const auto pairs = static_cast<std::size_t>(num_pairs());
    if (transition.size() != pairs * static_cast<std::size_t>(num_states) ||
        cost_n.size() != pairs || cost_d.size() != pairs ||
        initial.size() != static_cast<std::size_t>(num_states)) {
        throw InvalidArgument("MDP table sizes do not match its dimensions");
    }
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            check_distribution(row(s, a), "transition");
            if (!(cd(s, a) > 0.0)) throw InvalidArgument("c_D must be positive");
            if (!(cn(s, a) >= 0.0)) throw InvalidArgument("c_N must be non-negative");
        }
    }
    check_distribution(initial, "initial distribution");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("discount must lie in (0,1)");
}

FractionalMdp FractionalMdp::random(int num_states, int num_actions, double delta, std::uint64_t seed) {
    RngStream rng(seed, "random-mdp");
    FractionalMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.delta = delta;
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            auto row = random_row(num_states, rng);
            mdp.transition.insert(mdp.transition.end(), row.begin(), row.end());
            const double d = 0.5 + 1.5 * rng.uniform();
            const double ratio = 0.5 + 3.5 * rng.uniform();
            mdp.cost_d.push_back(d);
            mdp.cost_n.push_back(ratio * d);
        }
    }
    mdp.initial.assign(static_cast<std::size_t>(num_states), 0.0);
    mdp.initial[0] = 1.0;
    mdp.validate();
    return mdp;
}

DecomposedQ::DecomposedQ(int states, int actions, double g)
    : num_states(states),
      num_actions(actions),
      n_table(static_cast<std::size_t>(states * actions), 0.0),
      d_table(static_cast<std::size_t>(states * actions), 0.0),
      gamma(g) {}

int DecomposedQ::greedy(int s) const {
    int best = 0;
    double best_q = q(s, 0);
    for (int a = 1; a < num_actions; ++a) {
        const double v = q(s, a);
        if (v < best_q) {
            best_q = v;
            best = a;
        }
    }
    return best;
}

int MarkovGame::num_joint() const {
    int j = 1;
    for (int a : num_actions) j *= a;
    return j;
}

int MarkovGame::encode(std::span<const int> actions) const {
    int joint = 0;
    int stride = 1;
    for (int m = 0; m < num_agents; ++m) {
        joint += actions[static_cast<std::size_t>(m)] * stride;
        stride *= num_actions[static_cast<std::size_t>(m)];
    }
    return joint;
}

std::vector<int> MarkovGame::decode(int joint) const {
    std::vector<int> out(static_cast<std::size_t>(num_agents));
    for (int m = 0; m < num_agents; ++m) {
        const int k = num_actions[static_cast<std::size_t>(m)];
        out[static_cast<std::size_t>(m)] = joint % k;
        joint /= k;
    }
    return out;
}

double MarkovGame::max_ratio(int agent) const {
    const auto& n = cost_n[static_cast<std::size_t>(agent)];
    const auto& d = cost_d[static_cast<std::size_t>(agent)];
    double r = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.size(); ++i) r = std::max(r, n[i] / d[i]);
    return r;
}

void MarkovGame::validate() const {
    if (num_agents <= 0 || num_states <= 0) throw InvalidArgument("game needs agents and states");
    if (num_actions.size() != static_cast<std::size_t>(num_agents)) {
        throw InvalidArgument("one action count per agent required");
    }
    const auto pairs = static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_joint());
    if (transition.size() != pairs * static_cast<std::size_t>(num_states) ||
        cost_n.size() != static_cast<std::size_t>(num_agents) ||
        cost_d.size() != static_cast<std::size_t>(num_agents) ||
        initial.size() != static_cast<std::size_t>(num_states)) {
        throw InvalidArgument("game table sizes do not match its dimensions");
    }
    for (int m = 0; m < num_agents; ++m) {
        if (cost_n[static_cast<std::size_t>(m)].size() != pairs ||
            cost_d[static_cast<std::size_t>(m)].size() != pairs) {
            throw InvalidArgument("per-agent cost tables have the wrong size");
        }
        for (std::size_t i = 0; i < pairs; ++i) {
            if (!(cost_d[static_cast<std::size_t>(m)][i] > 0.0)) throw InvalidArgument("c_D must be positive");
            if (!(cost_n[static_cast<std::size_t>(m)][i] >= 0.0)) throw InvalidArgument("c_N must be >= 0");
        }
    }
    for (int s = 0; s < num_states; ++s) {
        for (int j = 0; j < num_joint(); ++j) check_distribution(row(s, j), "transition");
    }
    check_distribution(initial, "initial distribution");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("discount must lie in (0,1)");
}

MarkovGame MarkovGame::from_mdp(const FractionalMdp& mdp) {
    MarkovGame g;
    g.num_agents = 1;
    g.num_states = mdp.num_states;
    g.num_actions = {mdp.num_actions};
    g.transition = mdp.transition;
    g.cost_n = {mdp.cost_n};
    g.cost_d = {mdp.cost_d};
    g.delta = mdp.delta;
    g.initial = mdp.initial;
    g.influence = {{true}};
    return g;
}

MarkovGame MarkovGame::decoupled(const FractionalMdp& a, const FractionalMdp& b) {
    if (a.delta != b.delta) throw InvalidArgument("decoupled game needs a common discount");
    MarkovGame g;
    g.num_agents = 2;
    g.num_states = a.num_states * b.num_states;
    g.num_actions = {a.num_actions, b.num_actions};
    g.delta = a.delta;
    const int joint = a.num_actions * b.num_actions;
    const auto pairs = static_cast<std::size_t>(g.num_states * joint);
    g.transition.assign(pairs * static_cast<std::size_t>(g.num_states), 0.0);
    g.cost_n.assign(2, std::vector<double>(pairs));
    g.cost_d.assign(2, std::vector<double>(pairs));
    // Joint state index: s_a + |S_a| * s_b.
    for (int sb = 0; sb < b.num_states; ++sb) {
        for (int sa = 0; sa < a.num_states; ++sa) {
            const int s = sa + a.num_states * sb;
            for (int ab = 0; ab < b.num_actions; ++ab) {
                for (int aa = 0; aa < a.num_actions; ++aa) {
                    const int j = aa + a.num_actions * ab;
                    const auto idx = g.pair(s, j);
                    g.cost_n[0][idx] = a.cn(sa, aa);
                    g.cost_d[0][idx] = a.cd(sa, aa);
                    g.cost_n[1][idx] = b.cn(sb, ab);
                    g.cost_d[1][idx] = b.cd(sb, ab);
                    for (int nb = 0; nb < b.num_states; ++nb) {
                        for (int na = 0; na < a.num_states; ++na) {
                            g.transition[idx * static_cast<std::size_t>(g.num_states) +
                                         static_cast<std::size_t>(na + a.num_states * nb)] =
                                a.p(sa, aa, na) * b.p(sb, ab, nb);
                        }
                    }
                }
            }
        }
    }
    g.initial.assign(static_cast<std::size_t>(g.num_states), 0.0);
    for (int sb = 0; sb < b.num_states; ++sb) {
        for (int sa = 0; sa < a.num_states; ++sa) {
            g.initial[static_cast<std::size_t>(sa + a.num_states * sb)] =
                a.initial[static_cast<std::size_t>(sa)] * b.initial[static_cast<std::size_t>(sb)];
        }
    }
    g.influence = {{true, false}, {false, true}};
    return g;
}

MarkovGame MarkovGame::random_coupled(int num_states, int actions_per_agent, double delta,
                                      double coupling, std::uint64_t seed) {
    RngStream rng(seed, "random-game");
    MarkovGame g;
    g.num_agents = 2;
    g.num_states = num_states;
    g.num_actions = {actions_per_agent, actions_per_agent};
    g.delta = delta;
    const int joint = g.num_joint();
    const auto pairs = static_cast<std::size_t>(num_states * joint);
    g.cost_n.assign(2, std::vector<double>(pairs));
    g.cost_d.assign(2, std::vector<double>(pairs));
    for (int s = 0; s < num_states; ++s) {
        for (int j = 0; j < joint; ++j) {
            auto row = random_row(num_states, rng);
            g.transition.insert(g.transition.end(), row.begin(), row.end());
        }
    }
    // Each agent's cost: own-action base plus a coupling term on the joint action.
    for (int m = 0; m < 2; ++m) {
        std::vector<double> base_ratio(static_cast<std::size_t>(num_states * actions_per_agent));
        std::vector<double> base_d(base_ratio.size());
        for (std::size_t i = 0; i < base_ratio.size(); ++i) {
            base_ratio[i] = 0.5 + 3.0 * rng.uniform();
            base_d[i] = 0.5 + 1.5 * rng.uniform();
        }
        for (int s = 0; s < num_states; ++s) {
            for (int j = 0; j < joint; ++j) {
                const auto acts = g.decode(j);
                const auto own = static_cast<std::size_t>(s * actions_per_agent + acts[static_cast<std::size_t>(m)]);
                const double ratio = base_ratio[own] + coupling * 2.0 * rng.uniform();
                const double d = base_d[own] * (1.0 + coupling * rng.uniform());
                g.cost_d[static_cast<std::size_t>(m)][g.pair(s, j)] = d;
                g.cost_n[static_cast<std::size_t>(m)][g.pair(s, j)] = ratio * d;
            }
        }
    }
    g.initial.assign(static_cast<std::size_t>(num_states), 0.0);
    g.initial[0] = 1.0;
    g.influence = {{true, true}, {true, true}};
    return g;
}

FractionalMdp induced_mdp(const MarkovGame& game, int agent, const JointPolicy& policy) {
    FractionalMdp mdp;
    mdp.num_states = game.num_states;
    mdp.num_actions = game.num_actions[static_cast<std::size_t>(agent)];
    mdp.delta = game.delta;
    mdp.initial = game.initial;
    for (int s = 0; s < game.num_states; ++s) {
        std::vector<int> acts(static_cast<std::size_t>(game.num_agents));
        for (int m = 0; m < game.num_agents; ++m) {
            acts[static_cast<std::size_t>(m)] = policy[static_cast<std::size_t>(m)][static_cast<std::size_t>(s)];
        }
        for (int a = 0; a < mdp.num_actions; ++a) {
            acts[static_cast<std::size_t>(agent)] = a;
            const int j = game.encode(acts);
            const auto r = game.row(s, j);
            mdp.transition.insert(mdp.transition.end(), r.begin(), r.end());
            mdp.cost_n.push_back(game.cn(agent, s, j));
            mdp.cost_d.push_back(game.cd(agent, s, j));
        }
    }
    return mdp;
}

}  // namespace aoimec
