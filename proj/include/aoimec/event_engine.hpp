#pragma once

// Continuous-time discrete-event core: a (time, seq)-ordered event queue with
// a monotone clock, and named reproducible random streams.

#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace aoimec {

enum class EventKind {
    TaskGenerated,
    TransmissionDone,
    EdgeServiceStart,
    EdgeServiceDone,
    LocalDone,
    WaitDone,
    Deadline,
};

std::string_view to_string(EventKind kind);

struct Event {
    double time = 0.0;
    EventKind kind = EventKind::TaskGenerated;
    int device_id = 0;
    std::optional<int> edge_id;
    std::uint64_t task_id = 0;
    std::uint64_t seq = 0;  // assigned by EventQueue::schedule
};

class EventQueue {
public:
    /// Enqueues `event`, stamping it with the next sequence number.
    /// Throws CausalityError if event.time < clock().
    std::uint64_t schedule(Event event);

    /// Removes and returns the minimum (time, seq) event; the clock advances to
    /// its time. Throws EmptyQueueError when nothing is pending.
    Event pop_next();

    const Event& peek() const;
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    double clock() const { return clock_; }

    /// Moves the clock forward without an event (end of an episode window).
    void advance_clock(double t);

    void reset();

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.seq > b.seq;
        }
    };
    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    double clock_ = 0.0;
    std::uint64_t next_seq_ = 0;
};

// One independent stream per stochastic source. The generator is mt19937_64,
// whose output sequence is fixed by the standard; all transforms to real
// numbers are done here so draws are bit-identical across standard libraries.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view stream_id);

    std::uint64_t seed() const { return seed_; }
    const std::string& stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in the open interval (0, 1).
    double uniform();
    // Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n);
    double standard_normal();

private:
    std::uint64_t seed_;
    std::string stream_id_;
    std::mt19937_64 engine_;
    std::optional<double> spare_normal_;
};

// Derives a child seed from (seed, label); used to give each run, episode or
// source its own stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Inverse-CDF exponential: -ln(u) / rate.
double exponential_from_uniform(double u, double rate);
double sample_exponential(double rate, RngStream& stream);

/// Lognormal with arithmetic mean `mean`; `sigma` is the standard deviation of
/// the underlying normal (mu = ln(mean) - sigma^2 / 2). sigma == 0 returns mean.
double sample_lognormal(double mean, double sigma, RngStream& stream);

}  // namespace aoimec
