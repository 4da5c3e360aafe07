#include <cmath>

#include "aoimec/aoi.hpp"
#include "aoimec/errors.hpp"
#include "aoimec/oracles.hpp"
#include "doctest.h"

using namespace aoimec;
using namespace aoimec::oracles;

namespace {

FractionalMdp one_state() {
    FractionalMdp m;
    m.num_states = 1;
    m.num_actions = 2;
    m.transition = {1.0, 1.0};
    m.cost_n = {2.0, 3.0};
    m.cost_d = {1.0, 2.0};
    m.delta = 0.5;
    m.initial = {1.0};
    return m;
}

}  // namespace

TEST_CASE("discounted values: geometric series") {
    const auto m = one_state();
    const std::vector<int> a{0};
    const auto v = exact_discounted_values(m, a);
    CHECK(v.n[0] == doctest::Approx(4.0));
    CHECK(v.d[0] == doctest::Approx(2.0));
    CHECK(policy_objective(m, a) == doctest::Approx(2.0));
}

TEST_CASE("discounted values: alternating two-state cycle") {
    FractionalMdp m;
    m.num_states = 2;
    m.num_actions = 1;
    m.transition = {0.0, 1.0, 1.0, 0.0};
    m.cost_n = {1.0, 3.0};
    m.cost_d = {1.0, 1.0};
    m.delta = 0.5;
    m.initial = {1.0, 0.0};
    const std::vector<int> pol{0, 0};
    const auto v = exact_discounted_values(m, pol);
    CHECK(v.n[0] == doctest::Approx(10.0 / 3.0));
    CHECK(v.d[0] == doctest::Approx(2.0));
}

TEST_CASE("discounted values satisfy their Bellman equations") {
    const auto m = FractionalMdp::random(4, 3, 0.9, 17);
    const std::vector<int> pol{2, 0, 1, 1};
    const auto v = exact_discounted_values(m, pol);
    for (int s = 0; s < 4; ++s) {
        const int a = pol[static_cast<std::size_t>(s)];
        double en = 0.0, ed = 0.0;
        for (int t = 0; t < 4; ++t) {
            en += m.p(s, a, t) * v.n[static_cast<std::size_t>(t)];
            ed += m.p(s, a, t) * v.d[static_cast<std::size_t>(t)];
        }
        CHECK(std::abs(v.n[static_cast<std::size_t>(s)] - m.cn(s, a) - m.delta * en) < 1e-10);
        CHECK(std::abs(v.d[static_cast<std::size_t>(s)] - m.cd(s, a) - m.delta * ed) < 1e-10);
    }
}

TEST_CASE("optimal ratio by enumeration") {
    const auto g = exact_gamma_star(one_state());
    CHECK(g.gamma == doctest::Approx(1.5));
    CHECK(g.policy == std::vector<int>{1});
    CHECK(g.policies_enumerated == 2);
}

TEST_CASE("constant-ratio MDP: every policy is optimal") {
    auto m = FractionalMdp::random(3, 2, 0.9, 4);
    for (std::size_t k = 0; k < m.cost_n.size(); ++k) m.cost_n[k] = 1.75 * m.cost_d[k];
    CHECK(exact_gamma_star(m).gamma == doctest::Approx(1.75).epsilon(1e-12));
    const std::vector<int> pol{1, 0, 1};
    CHECK(policy_objective(m, pol) == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("enumeration and exact Dinkelbach agree") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto g = exact_gamma_star(FractionalMdp::random(3, 2, 0.8, seed));
        CHECK(std::abs(g.gamma - g.dinkelbach_gamma) < 1e-10);
    }
}

TEST_CASE("optimal Q at γ* has a zero minimum at the start state") {
    const auto m = FractionalMdp::random(3, 3, 0.85, 21);
    const auto g = exact_gamma_star(m);
    const auto q = exact_optimal_q(m, g.gamma);
    double v = q.q[0];
    for (int a = 1; a < 3; ++a) v = std::min(v, q.q[static_cast<std::size_t>(a)]);
    CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("enumeration cap") {
    const auto m = FractionalMdp::random(4, 3, 0.8, 1);
    CHECK_THROWS_AS(exact_gamma_star(m, 10), EnumerationCapError);
}

TEST_CASE("deviation scan on a decoupled game") {
    const auto a = FractionalMdp::random(2, 2, 0.8, 3);
    const auto b = FractionalMdp::random(2, 2, 0.8, 4);
    const auto g = MarkovGame::decoupled(a, b);
    const auto ga = exact_gamma_star(a), gb = exact_gamma_star(b);
    // Product state (s_a, s_b) with s_a least significant.
    JointPolicy joint(2, std::vector<int>(4));
    for (int s = 0; s < 4; ++s) {
        joint[0][static_cast<std::size_t>(s)] = ga.policy[static_cast<std::size_t>(s % 2)];
        joint[1][static_cast<std::size_t>(s)] = gb.policy[static_cast<std::size_t>(s / 2)];
    }
    for (double gap : nash_deviation_scan(g, joint)) CHECK(std::abs(gap) < 1e-10);
    // Flip agent 0 to a worse policy: it now has a profitable deviation.
    auto worse = joint;
    bool found = false;
    for (int pol = 0; pol < 4 && !found; ++pol) {
        const std::vector<int> pa{pol % 2, pol / 2};
        if (policy_objective(a, pa) > ga.gamma + 1e-6) {
            for (int s = 0; s < 4; ++s) worse[0][static_cast<std::size_t>(s)] = pa[static_cast<std::size_t>(s % 2)];
            found = true;
        }
    }
    REQUIRE(found);
    const auto gaps = nash_deviation_scan(g, worse);
    CHECK(gaps[0] > 1e-6);
    CHECK(std::abs(gaps[1]) < 1e-10);
}

TEST_CASE("one-agent deviation scan equals the gap to γ*") {
    const auto m = FractionalMdp::random(3, 2, 0.8, 9);
    const auto g = MarkovGame::from_mdp(m);
    const auto star = exact_gamma_star(m);
    const std::vector<int> pol{0, 0, 0};
    const auto gaps = nash_deviation_scan(g, {pol});
    CHECK(gaps[0] == doctest::Approx(policy_objective(m, pol) - star.gamma).epsilon(1e-12));
}

TEST_CASE("pure equilibria of a coupled game pass the scan") {
    const auto g = MarkovGame::random_coupled(2, 2, 0.8, 0.5, 12);
    const auto eq = pure_equilibria(g, 1e-9);
    for (const auto& joint : eq) {
        for (double gap : nash_deviation_scan(g, joint)) CHECK(gap <= 1e-9);
    }
}

TEST_CASE("sawtooth integral geometry") {
    aoi::CompletionLog log;
    log.entries.push_back({2.0, 5.0, 3.0, 0.0, false});
    CHECK(sawtooth_integral(log, 5.0, 7.0) == doctest::Approx(8.0));
    aoi::CompletionLog empty;
    CHECK(sawtooth_integral(empty, 0.0, 6.0) == doctest::Approx(18.0));
}
