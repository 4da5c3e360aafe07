#pragma once

// Age-of-Information bookkeeping: the sawtooth Δ(t) = t − T(t), per-task
// fractional costs (trapezoid area, elapsed interval) and the objectives built
// from them.

#include <iosfwd>
#include <span>
#include <vector>

namespace aoimec::aoi {

struct CompletionEntry {
    double generation_time = 0.0;
    double end_time = 0.0;    // completion time, or drop time when dropped
    double duration = 0.0;    // Y; for a drop, the deadline Ȳ
    double wait_after = 0.0;  // Z before the next generation (0 until known)
    bool dropped = false;
};

// Per-device history. `origin` is the virtual completion at which the age is
// zero (the start of the episode).
struct CompletionLog {
    double origin = 0.0;
    std::vector<CompletionEntry> entries;

    void validate() const;
    CompletionLog shifted(double dt) const;
};

struct FractionalCost {
    double numerator = 0.0;    // c_N, seconds²
    double denominator = 0.0;  // c_D, seconds
};

/// ½(Y + Z + Y')² − ½Y'². Throws InvalidArgument for negative inputs.
double trapezoid_area(double latency, double wait_next, double latency_next);

/// A(Y, Z, Y') − γ·(Y + Z). Requires γ ≥ 0.
double fractional_step_cost(double latency, double wait_next, double latency_next, double gamma);

double instantaneous_aoi(const CompletionLog& log, double t);

/// ∫ Δ(t) dt over [t0, t1], summed segment by segment between completions.
double aoi_integral(const CompletionLog& log, double t0, double t1);

/// Exact time-average over [origin, origin + horizon]. An empty log gives
/// horizon / 2 (the age of a device that never updates).
double time_average_aoi(const CompletionLog& log, double horizon);
double time_average_aoi(const CompletionLog& log, double t0, double t1);

/// (Σ δ^k c_N,k) / (Σ δ^k c_D,k).
double discounted_fractional_objective(std::span<const FractionalCost> costs, double delta);

// Incremental per-task cost emission. Interval k runs from the end of task k
// (or the origin) to the end of task k+1. Between two completions the
// numerator is exactly A(Y_k, Z_{k+1}, Y_{k+1}); across drops it is the exact
// sawtooth area corrected by the telescoping boundary ½Δ(end_k)² − ½Δ(end_{k+1})²,
// so the numerators of an episode always sum to the true integral minus the
// final boundary term. The denominator is Y_k + Z_{k+1} (Ȳ for drops), so the
// denominators tile the generation epochs.
class CostTracker {
public:
    explicit CostTracker(double origin = 0.0);

    /// Registers the end of the next task and returns the cost of the interval
    /// it closes.
    FractionalCost on_task_end(const CompletionEntry& entry);

    double last_end_time() const { return last_end_; }
    double age_after_last_end() const { return age_after_end_; }

private:
    double last_end_;
    double age_after_end_ = 0.0;
    double last_duration_ = 0.0;
};

std::vector<FractionalCost> per_task_costs(const CompletionLog& log);

// CSV exports for plotting.
void write_sawtooth_csv(std::ostream& out, std::span<const CompletionLog> logs, double horizon,
                        double step);
void write_task_costs_csv(std::ostream& out, std::span<const CompletionLog> logs);

}  // namespace aoimec::aoi
