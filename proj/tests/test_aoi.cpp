#include <cmath>
#include <sstream>
#include <vector>

#include "aoimec/aoi.hpp"
#include "aoimec/errors.hpp"
#include "aoimec/event_engine.hpp"
#include "aoimec/oracles.hpp"
#include "doctest.h"

using namespace aoimec;
using namespace aoimec::aoi;

namespace {

CompletionEntry done(double gen, double end) { return {gen, end, end - gen, 0.0, false}; }

// Back-to-back tasks with random latencies and waits, starting at the origin.
CompletionLog random_log(std::uint64_t seed, int tasks, double origin = 0.0) {
    RngStream r(seed, "log");
    CompletionLog log;
    log.origin = origin;
    double t = origin;
    for (int k = 0; k < tasks; ++k) {
        const double z = k == 0 ? 0.0 : 2.0 * r.uniform();
        const double y = 0.1 + 3.0 * r.uniform();
        if (!log.entries.empty()) log.entries.back().wait_after = z;
        log.entries.push_back(done(t + z, t + z + y));
        t += z + y;
    }
    return log;
}

}  // namespace

TEST_CASE("trapezoid area") {
    CHECK(trapezoid_area(1, 0, 1) == 1.5);
    CHECK(trapezoid_area(2, 1, 1) == 7.5);
    CHECK(trapezoid_area(0, 0, 0) == 0.0);
    CHECK_THROWS_AS(trapezoid_area(-1, 0, 1), InvalidArgument);
}

TEST_CASE("fractional step cost") {
    CHECK(fractional_step_cost(1, 0, 1, 1.5) == 0.0);
    CHECK(fractional_step_cost(2, 1, 1, 0.0) == 7.5);
    CHECK(fractional_step_cost(1, 0, 1, 2.0) == -0.5);
}

TEST_CASE("instantaneous AoI follows the freshest completed generation") {
    CompletionLog log;
    log.entries.push_back(done(2.0, 5.0));
    CHECK(instantaneous_aoi(log, 7.0) == 5.0);
    CHECK(instantaneous_aoi(log, 5.0) == 3.0);
    CHECK(instantaneous_aoi(log, 4.0) == 4.0);  // still measured from the origin
    CompletionEntry drop{5.0, 6.0, 1.0, 0.0, true};
    log.entries.push_back(drop);
    CHECK(instantaneous_aoi(log, 7.0) == 5.0);
}

TEST_CASE("time average over whole cycles") {
    CompletionLog log;
    log.entries = {done(0, 1), done(1, 2), done(2, 3)};
    CHECK(time_average_aoi(log, 1.0, 2.0) == doctest::Approx(1.5));
    CHECK(time_average_aoi(log, 1.0, 3.0) == doctest::Approx(1.5));
    CompletionLog empty;
    CHECK(time_average_aoi(empty, 10.0) == doctest::Approx(5.0));
}

TEST_CASE("time average is invariant under translation") {
    const auto log = random_log(3, 20);
    const double t1 = log.entries.back().end_time;
    const auto moved = log.shifted(17.25);
    CHECK(time_average_aoi(moved, 17.25, t1 + 17.25) == doctest::Approx(time_average_aoi(log, 0.0, t1)).epsilon(1e-12));
}

TEST_CASE("integral over a random episode equals the sum of trapezoids") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto log = random_log(seed, 5);
        double sum = 0.0;
        for (std::size_t k = 0; k + 1 < log.entries.size(); ++k) {
            sum += trapezoid_area(log.entries[k].duration, log.entries[k].wait_after, log.entries[k + 1].duration);
        }
        // Trapezoids are anchored at generation epochs; over the window between
        // the first and last completion they differ from the integral by the
        // telescoping boundary ½Y_first² − ½Y_last².
        const double y0 = log.entries.front().duration;
        const double y1 = log.entries.back().duration;
        const double t0 = log.entries.front().end_time;
        const double t1 = log.entries.back().end_time;
        const double expected = sum - 0.5 * y0 * y0 + 0.5 * y1 * y1;
        CHECK(aoi_integral(log, t0, t1) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(oracles::sawtooth_integral(log, t0, t1) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("per-task costs: trapezoids between completions, lag of one task") {
    const auto log = random_log(5, 6);
    const auto costs = per_task_costs(log);
    REQUIRE(costs.size() == log.entries.size());
    for (std::size_t k = 1; k < costs.size(); ++k) {
        const auto& prev = log.entries[k - 1];
        const auto& cur = log.entries[k];
        CHECK(costs[k].numerator == doctest::Approx(trapezoid_area(prev.duration, prev.wait_after, cur.duration)));
        CHECK(costs[k].denominator == doctest::Approx(prev.duration + prev.wait_after));
    }
}

TEST_CASE("dropped tasks conserve time and area") {
    CompletionLog log;
    log.entries = {done(0.0, 1.0), {1.5, 3.5, 2.0, 0.0, true}, done(3.5, 4.0), done(4.2, 5.0)};
    log.entries[0].wait_after = 0.5;
    log.entries[2].wait_after = 0.2;
    const auto costs = per_task_costs(log);
    double n = 0.0, d = 0.0;
    for (const auto& c : costs) {
        n += c.numerator;
        d += c.denominator;
    }
    // Denominators tile generation epochs up to the last one.
    CHECK(d == doctest::Approx(log.entries.back().generation_time));
    const double last_age = log.entries.back().duration;
    CHECK(n == doctest::Approx(aoi_integral(log, 0.0, 5.0) - 0.5 * last_age * last_age));
}

TEST_CASE("discounted fractional objective") {
    const std::vector<FractionalCost> two{{1.5, 1.0}, {1.5, 1.0}};
    CHECK(discounted_fractional_objective(two, 0.5) == doctest::Approx(1.5));
    const std::vector<FractionalCost> one{{7.5, 3.0}};
    CHECK(discounted_fractional_objective(one, 0.9) == doctest::Approx(2.5));
}

TEST_CASE("discounted objective tends to the time average for a stationary policy") {
    // Constant Y = 2, Z = 1: each cycle has area 10.5 over 3 seconds.
    CompletionLog log;
    double t = 0.0;
    for (int k = 0; k < 400; ++k) {
        log.entries.push_back(done(t, t + 2.0));
        log.entries.back().wait_after = 1.0;
        t += 3.0;
    }
    auto costs = per_task_costs(log);
    costs.erase(costs.begin());  // the origin interval is not a full cycle
    const double obj = discounted_fractional_objective(costs, 0.999);
    const double avg = time_average_aoi(log, log.entries.front().end_time, log.entries.back().end_time);
    CHECK(obj == doctest::Approx(3.5).epsilon(1e-9));
    CHECK(avg == doctest::Approx(3.5).epsilon(1e-9));
}

TEST_CASE("discounted step costs vanish exactly at the ratio") {
    const auto log = random_log(11, 30);
    auto costs = per_task_costs(log);
    costs.erase(costs.begin());
    const double delta = 0.9;
    const double g = discounted_fractional_objective(costs, delta);
    double sum = 0.0, w = 1.0, scale = 0.0;
    for (const auto& c : costs) {
        sum += w * (c.numerator - g * c.denominator);
        scale += w * c.numerator;
        w *= delta;
    }
    CHECK(std::abs(sum) < 1e-12 * scale);
    double off = 0.0;
    w = 1.0;
    for (const auto& c : costs) {
        off += w * (c.numerator - (g + 0.1) * c.denominator);
        w *= delta;
    }
    CHECK(off < 0.0);
}

TEST_CASE("csv exports carry a versioned header") {
    const auto log = random_log(2, 3);
    std::vector<CompletionLog> logs{log};
    std::ostringstream a, b;
    write_sawtooth_csv(a, logs, 5.0, 1.0);
    write_task_costs_csv(b, logs);
    CHECK(a.str().rfind("# aoimec sawtooth v1\n", 0) == 0);
    CHECK(b.str().rfind("# aoimec task-costs v1\n", 0) == 0);
    CHECK_THROWS_AS(write_sawtooth_csv(a, logs, 5.0, 0.0), InvalidArgument);
}
