#pragma once

// The MEC world: M devices (generator, scheduler, local processor, monitor),
// N edge servers with FCFS queues, wireless uplinks, task deadlines. Exposes the
// semi-Markov game interface: advance to the next decision, observe, act.

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aoimec/aoi.hpp"
#include "aoimec/event_engine.hpp"

namespace aoimec {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

struct TaskSpec {
    double size_mbit = 30.0;          // l
    double density_gcycles = 0.297;   // d, gigacycles per megabit
    void validate() const;
};

struct DeviceConfig {
    double local_capacity_ghz = 2.5;
    double tx_power_dbm = 20.0;
    Vec2 position;
    int subchannel = 0;
};

struct EdgeConfig {
    double capacity_ghz = 41.8;
    Vec2 position;
};

struct ChannelParams {
    double bandwidth_hz = 10e6;
    double noise_dbm = -114.0;
    double pathloss_exponent = 3.0;
    bool rayleigh_fading = true;  // unit-mean exponential power gain per transmission
    void validate() const;
};

enum class ServiceDistribution { Exponential, Lognormal };

struct ScenarioConfig {
    std::vector<DeviceConfig> devices;
    std::vector<EdgeConfig> edges;
    TaskSpec task;
    ChannelParams channel;
    double drop_coefficient = 1.5;
    ServiceDistribution service = ServiceDistribution::Exponential;
    double lognormal_sigma = 0.0;
    bool tx_counts_cycles = false;
    double episode_horizon = 200.0;
    double livelock_horizon = 1e6;
    std::uint64_t seed = 1;

    int num_devices() const { return static_cast<int>(devices.size()); }
    int num_edges() const { return static_cast<int>(edges.size()); }
    /// Ȳ_m: drop coefficient times the expected local processing duration.
    double deadline(int device) const;
    double expected_local_time(int device) const;
    double expected_edge_time(int edge) const;
    void validate() const;

    /// Environment and channel tables: 20 devices, 2 edges.
    static ScenarioConfig standard();
    /// M devices placed on a 60 m ring around the origin, edges at (±100, 0).
    static ScenarioConfig ring(int num_devices, int num_edges);
    /// M=5, N=2 with edge capacity scaled by M/20 so edge load matches the
    /// 20-device setting.
    static ScenarioConfig desk();
    /// Three devices sharing one slow edge, fast uplinks, slow local processors
    /// and heavy-tailed (lognormal) service: queueing dominates and a positive
    /// wait pays off.
    static ScenarioConfig congested();
};

double dbm_to_watts(double dbm);

/// Shannon rate in Mbit/s for one uplink. `fading` is the power gain of the
/// link, interferers are (power dBm, distance m, fading) triples.
struct Interferer {
    double tx_power_dbm = 0.0;
    double distance_m = 1.0;
    double fading = 1.0;
};
double shannon_rate_mbps(const ChannelParams& channel, double tx_power_dbm, double distance_m,
                         double fading, const std::vector<Interferer>& interferers);

/// τ = l / R by default, l·d / R when `tx_counts_cycles`.
double transmission_time(const TaskSpec& task, double rate_mbps, bool tx_counts_cycles = false);

/// Random service time with mean l·d / capacity.
double service_time(const TaskSpec& task, double capacity_ghz, ServiceDistribution dist,
                    double lognormal_sigma, RngStream& stream);

enum class Indicator { NeedsOffload, NeedsUpdate, Busy };

std::string_view to_string(Indicator ind);

struct SystemState {
    double time = 0.0;
    std::vector<Indicator> indicators;
    std::vector<int> queue_lengths;    // per edge, waiting + in service
    std::vector<double> last_latency;  // Y_m of the last finished task
    std::vector<double> aoi_now;
};

inline constexpr int kLocalTarget = -1;

struct HybridAction {
    enum class Kind { Wait, Offload };
    Kind kind = Kind::Wait;
    double wait = 0.0;          // Z, for Wait
    int target = kLocalTarget;  // kLocalTarget or an edge index, for Offload

    static HybridAction Wait(double z) { return {Kind::Wait, z, kLocalTarget}; }
    static HybridAction Local() { return {Kind::Offload, 0.0, kLocalTarget}; }
    static HybridAction Edge(int n) { return {Kind::Offload, 0.0, n}; }
};

struct Decision {
    int device = 0;
    Indicator need = Indicator::NeedsUpdate;
    SystemState state;
    double elapsed = 0.0;  // simulated time since the previous decision point
};

struct EventLogRow {
    double time = 0.0;
    EventKind kind = EventKind::TaskGenerated;
    int device = 0;
    int edge = -1;
    std::uint64_t task = 0;
};

struct DeviceCounters {
    std::uint64_t generated = 0;
    std::uint64_t completed = 0;
    std::uint64_t dropped = 0;
    std::vector<std::uint64_t> offloads;  // index 0 = local, 1 + n = edge n
};

struct EdgeCounters {
    std::uint64_t enqueued = 0;
    std::uint64_t dequeued = 0;  // finished service or removed by a deadline
};

class MecSimulator {
public:
    explicit MecSimulator(ScenarioConfig config);

    /// Fresh episode: clock 0, every device NeedsUpdate at its virtual
    /// completion. `env_seed` seeds the channel and service streams.
    void reset(std::uint64_t env_seed);

    void apply_action(int device, const HybridAction& action);

    /// Processes events until a device needs a decision. Throws LivelockError
    /// when nothing can happen or the livelock horizon passes first.
    Decision advance_until_decision();

    /// Like advance_until_decision but stops at `t_end`; returns nullopt (clock
    /// parked at t_end) if no decision point occurs before it.
    std::optional<Decision> advance_until_decision_before(double t_end);

    SystemState observe() const;
    double clock() const { return queue_.clock(); }
    const ScenarioConfig& config() const { return config_; }
    double deadline(int device) const { return deadlines_[static_cast<std::size_t>(device)]; }

    const std::vector<aoi::CompletionLog>& completion_logs() const { return logs_; }
    const std::vector<EventLogRow>& event_log() const { return event_log_; }
    const std::vector<DeviceCounters>& device_counters() const { return device_counters_; }
    const std::vector<EdgeCounters>& edge_counters() const { return edge_counters_; }
    std::size_t edge_waiting(int edge) const;  // tasks queued, excluding the one in service

    void set_event_logging(bool on) { log_events_ = on; }

    /// Replaces the per-transmission Rayleigh draw with a fixed gain (tests).
    void set_fixed_fading(std::optional<double> gain) { fixed_fading_ = gain; }

private:
    enum class Stage { None, Waiting, Generated, Local, Transmitting, Queued, InService };

    struct DeviceRuntime {
        Indicator indicator = Indicator::NeedsUpdate;
        Stage stage = Stage::None;
        std::uint64_t task_id = 0;
        double generation_time = 0.0;
        double wait_started = 0.0;
        int target = kLocalTarget;
        double last_latency = 0.0;
        double aoi_reference = 0.0;
    };

    struct EdgeRuntime {
        std::deque<std::pair<int, std::uint64_t>> waiting;  // (device, task) FCFS
        std::optional<std::pair<int, std::uint64_t>> in_service;
        bool start_pending = false;
    };

    bool alive(int device, std::uint64_t task) const;
    void handle(const Event& e);
    void finish_task(int device, double now, bool dropped);
    void request_decision(int device, Indicator need);
    void try_start_service(int edge, double now);
    void record(const Event& e);
    double sample_fading();
    double uplink_rate(int device, int edge);
    Decision make_decision(int device);

    ScenarioConfig config_;
    std::vector<double> deadlines_;
    EventQueue queue_;
    std::optional<RngStream> channel_rng_;
    std::optional<RngStream> local_rng_;
    std::optional<RngStream> edge_rng_;
    std::vector<DeviceRuntime> devices_;
    std::vector<EdgeRuntime> edges_;
    std::deque<int> pending_;
    std::vector<aoi::CompletionLog> logs_;
    std::vector<EventLogRow> event_log_;
    std::vector<DeviceCounters> device_counters_;
    std::vector<EdgeCounters> edge_counters_;
    double last_decision_time_ = 0.0;
    bool log_events_ = true;
    std::optional<double> fixed_fading_;
};

void write_event_log_csv(std::ostream& out, const std::vector<EventLogRow>& rows);

}  // namespace aoimec
