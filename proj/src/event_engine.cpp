#include "aoimec/event_engine.hpp"

#include <cmath>
#include <numbers>

#include "aoimec/errors.hpp"

namespace aoimec {

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::TaskGenerated: return "TaskGenerated";
        case EventKind::TransmissionDone: return "TransmissionDone";
        case EventKind::EdgeServiceStart: return "EdgeServiceStart";
        case EventKind::EdgeServiceDone: return "EdgeServiceDone";
        case EventKind::LocalDone: return "LocalDone";
        case EventKind::WaitDone: return "WaitDone";
        case EventKind::Deadline: return "Deadline";
    }
    return "Unknown";
}

std::uint64_t EventQueue::schedule(Event event) {
    if (!(event.time >= clock_)) {
        throw CausalityError("event scheduled at t=" + std::to_string(event.time) +
                             " before clock " + std::to_string(clock_));
    }
    event.seq = next_seq_++;
    heap_.push(event);
    return event.seq;
}

Event EventQueue::pop_next() {
    if (heap_.empty()) throw EmptyQueueError("pop_next on an empty event queue");
    Event e = heap_.top();
    heap_.pop();
    clock_ = e.time;
    return e;
}

const Event& EventQueue::peek() const {
    if (heap_.empty()) throw EmptyQueueError("peek on an empty event queue");
    return heap_.top();
}

void EventQueue::advance_clock(double t) {
    if (t < clock_) throw CausalityError("clock cannot move backwards");
    if (!heap_.empty() && heap_.top().time < t) {
        throw CausalityError("advance_clock would skip a pending event");
    }
    clock_ = t;
}

void EventQueue::reset() {
    heap_ = {};
    clock_ = 0.0;
    next_seq_ = 0;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    std::uint64_t state = seed ^ fnv1a(label);
    splitmix64(state);
    return splitmix64(state);
}

RngStream::RngStream(std::uint64_t seed, std::string_view stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(derive_seed(seed, stream_id)) {}

double RngStream::uniform() {
    // 53 random bits, shifted by half an ulp so 0 and 1 are never produced.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t RngStream::uniform_index(std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform_index over an empty range");
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % n);
}

double RngStream::standard_normal() {
    if (spare_normal_) {
        double v = *spare_normal_;
        spare_normal_.reset();
        return v;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    return r * std::cos(theta);
}

double exponential_from_uniform(double u, double rate) {
    if (!(rate > 0.0)) throw InvalidArgument("exponential rate must be positive");
    if (!(u > 0.0 && u <= 1.0)) throw InvalidArgument("uniform draw must lie in (0, 1]");
    return -std::log(u) / rate;
}

double sample_exponential(double rate, RngStream& stream) {
    if (!(rate > 0.0)) throw InvalidArgument("exponential rate must be positive");
    return exponential_from_uniform(stream.uniform(), rate);
}

double sample_lognormal(double mean, double sigma, RngStream& stream) {
    if (!(mean > 0.0)) throw InvalidArgument("lognormal mean must be positive");
    if (!(sigma >= 0.0)) throw InvalidArgument("lognormal sigma must be non-negative");
    if (sigma == 0.0) return mean;
    const double mu = std::log(mean) - 0.5 * sigma * sigma;
    return std::exp(mu + sigma * stream.standard_normal());
}

}  // namespace aoimec
