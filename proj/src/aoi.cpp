#include "aoimec/aoi.hpp"

#include <cmath>
#include <ostream>

#include "aoimec/errors.hpp"

namespace aoimec::aoi {

void CompletionLog::validate() const {
    double prev_end = origin;
    for (const auto& e : entries) {
        if (e.generation_time < prev_end) {
            throw InvalidArgument("completion log: task generated before previous task ended");
        }
        if (e.end_time < e.generation_time || e.duration < 0.0) {
            throw InvalidArgument("completion log: negative task duration");
        }
        if (!e.dropped && std::abs(e.end_time - (e.generation_time + e.duration)) >
                              1e-9 * std::max(1.0, e.end_time)) {
            throw InvalidArgument("completion log: end_time != generation_time + Y");
        }
        prev_end = e.end_time;
    }
}

CompletionLog CompletionLog::shifted(double dt) const {
    CompletionLog out = *this;
    out.origin += dt;
    for (auto& e : out.entries) {
        e.generation_time += dt;
        e.end_time += dt;
    }
    return out;
}

double trapezoid_area(double latency, double wait_next, double latency_next) {
    if (latency < 0.0 || wait_next < 0.0 || latency_next < 0.0) {
        throw InvalidArgument("trapezoid_area: inputs must be non-negative");
    }
    const double span = latency + wait_next + latency_next;
    return 0.5 * span * span - 0.5 * latency_next * latency_next;
}

double fractional_step_cost(double latency, double wait_next, double latency_next, double gamma) {
    if (gamma < 0.0) throw InvalidArgument("fractional_step_cost: gamma must be >= 0");
    return trapezoid_area(latency, wait_next, latency_next) - gamma * (latency + wait_next);
}

double instantaneous_aoi(const CompletionLog& log, double t) {
    double reference = log.origin;
    for (const auto& e : log.entries) {
        if (e.end_time > t) break;
        if (!e.dropped) reference = e.generation_time;
    }
    return t - reference;
}

double aoi_integral(const CompletionLog& log, double t0, double t1) {
    if (t1 < t0) throw InvalidArgument("aoi_integral: empty window");
    double total = 0.0;
    double reference = log.origin;
    double seg_start = t0;
    auto add_segment = [&](double a, double b) {
        if (b <= a) return;
        const double lo = a - reference;
        const double hi = b - reference;
        total += 0.5 * (hi * hi - lo * lo);
    };
    for (const auto& e : log.entries) {
        if (e.dropped) continue;
        if (e.end_time >= t1) break;
        if (e.end_time > seg_start) {
            add_segment(seg_start, e.end_time);
            seg_start = e.end_time;
        }
        reference = e.generation_time;
    }
    add_segment(seg_start, t1);
    return total;
}

double time_average_aoi(const CompletionLog& log, double horizon) {
    if (!(horizon > 0.0)) throw InvalidArgument("time_average_aoi: horizon must be positive");
    return aoi_integral(log, log.origin, log.origin + horizon) / horizon;
}

double time_average_aoi(const CompletionLog& log, double t0, double t1) {
    if (!(t1 > t0)) throw InvalidArgument("time_average_aoi: window must be non-empty");
    return aoi_integral(log, t0, t1) / (t1 - t0);
}

double discounted_fractional_objective(std::span<const FractionalCost> costs, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw InvalidArgument("discounted_fractional_objective: delta must lie in (0,1)");
    }
    double num = 0.0;
    double den = 0.0;
    double w = 1.0;
    for (const auto& c : costs) {
        num += w * c.numerator;
        den += w * c.denominator;
        w *= delta;
    }
    if (!(den > 0.0)) throw InvalidArgument("discounted_fractional_objective: zero denominator");
    return num / den;
}

CostTracker::CostTracker(double origin) : last_end_(origin) {}

FractionalCost CostTracker::on_task_end(const CompletionEntry& entry) {
    const double wait = entry.generation_time - last_end_;
    const double length = entry.end_time - entry.generation_time;
    if (wait < -1e-12 || length < 0.0) {
        throw InvalidArgument("CostTracker: task ends out of order");
    }
    const double peak = age_after_end_ + std::max(wait, 0.0) + length;
    const double age_after = entry.dropped ? peak : length;

    FractionalCost cost;
    cost.numerator = 0.5 * peak * peak - 0.5 * age_after * age_after;
    cost.denominator = last_duration_ + std::max(wait, 0.0);

    last_end_ = entry.end_time;
    age_after_end_ = age_after;
    last_duration_ = entry.duration;
    return cost;
}

std::vector<FractionalCost> per_task_costs(const CompletionLog& log) {
    CostTracker tracker(log.origin);
    std::vector<FractionalCost> out;
    out.reserve(log.entries.size());
    for (const auto& e : log.entries) out.push_back(tracker.on_task_end(e));
    return out;
}

void write_sawtooth_csv(std::ostream& out, std::span<const CompletionLog> logs, double horizon,
                        double step) {
    if (!(step > 0.0)) throw InvalidArgument("sawtooth sampling step must be positive");
    out << "# aoimec sawtooth v1\n";
    out << "device,time,aoi\n";
    for (std::size_t d = 0; d < logs.size(); ++d) {
        const auto n = static_cast<long>(std::floor(horizon / step));
        for (long i = 0; i <= n; ++i) {
            const double t = logs[d].origin + static_cast<double>(i) * step;
            out << d << ',' << t << ',' << instantaneous_aoi(logs[d], t) << '\n';
        }
    }
}

void write_task_costs_csv(std::ostream& out, std::span<const CompletionLog> logs) {
    out << "# aoimec task-costs v1\n";
    out << "device,task,generation_time,end_time,latency,wait_after,dropped,area,interval\n";
    for (std::size_t d = 0; d < logs.size(); ++d) {
        const auto costs = per_task_costs(logs[d]);
        for (std::size_t k = 0; k < logs[d].entries.size(); ++k) {
            const auto& e = logs[d].entries[k];
            out << d << ',' << k << ',' << e.generation_time << ',' << e.end_time << ','
                << e.duration << ',' << e.wait_after << ',' << (e.dropped ? 1 : 0) << ','
                << costs[k].numerator << ',' << costs[k].denominator << '\n';
        }
    }
}

}  // namespace aoimec::aoi
