#include "aoimec/mec_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "aoimec/errors.hpp"

namespace aoimec {

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

void TaskSpec::validate() const {
    if (!(size_mbit > 0.0)) throw InvalidArgument("task size must be positive");
    if (!(density_gcycles > 0.0)) throw InvalidArgument("task density must be positive");
}

void ChannelParams::validate() const {
    if (!(bandwidth_hz > 0.0)) throw InvalidArgument("bandwidth must be positive");
    if (!(pathloss_exponent >= 0.0)) throw InvalidArgument("path-loss exponent must be >= 0");
}

double ScenarioConfig::expected_local_time(int device) const {
    return task.size_mbit * task.density_gcycles /
           devices.at(static_cast<std::size_t>(device)).local_capacity_ghz;
}

double ScenarioConfig::expected_edge_time(int edge) const {
    return task.size_mbit * task.density_gcycles /
           edges.at(static_cast<std::size_t>(edge)).capacity_ghz;
}

double ScenarioConfig::deadline(int device) const {
    return drop_coefficient * expected_local_time(device);
}

void ScenarioConfig::validate() const {
    if (devices.empty()) throw ConfigError("scenario needs at least one device");
    task.validate();
    channel.validate();
    for (const auto& d : devices) {
        if (!(d.local_capacity_ghz > 0.0)) throw ConfigError("local capacity must be positive");
    }
    for (const auto& e : edges) {
        if (!(e.capacity_ghz > 0.0)) throw ConfigError("edge capacity must be positive");
    }
    if (!(drop_coefficient > 0.0)) throw ConfigError("drop coefficient must be positive");
    if (!(lognormal_sigma >= 0.0)) throw ConfigError("lognormal sigma must be >= 0");
    if (!(episode_horizon > 0.0)) throw ConfigError("episode horizon must be positive");
    if (!(livelock_horizon > 0.0)) throw ConfigError("livelock horizon must be positive");
}

ScenarioConfig ScenarioConfig::ring(int num_devices, int num_edges) {
    ScenarioConfig cfg;
    const double radius = 60.0;
    for (int m = 0; m < num_devices; ++m) {
        DeviceConfig d;
        const double angle = 2.0 * std::numbers::pi * (m + 0.5) / num_devices;
        d.position = {radius * std::cos(angle), radius * std::sin(angle)};
        d.subchannel = m;
        cfg.devices.push_back(d);
    }
    for (int n = 0; n < num_edges; ++n) {
        EdgeConfig e;
        if (num_edges == 1) {
            e.position = {0.0, 0.0};
        } else {
            const double angle = 2.0 * std::numbers::pi * n / num_edges;
            e.position = {100.0 * std::cos(angle), 100.0 * std::sin(angle)};
        }
        cfg.edges.push_back(e);
    }
    return cfg;
}

ScenarioConfig ScenarioConfig::standard() { return ring(20, 2); }

ScenarioConfig ScenarioConfig::desk() {
    ScenarioConfig cfg = ring(5, 2);
    for (auto& e : cfg.edges) e.capacity_ghz = 41.8 * 5.0 / 20.0;
    return cfg;
}

ScenarioConfig ScenarioConfig::congested() {
    ScenarioConfig cfg = ring(3, 1);
    cfg.channel.bandwidth_hz = 100e6;
    for (auto& d : cfg.devices) d.local_capacity_ghz = 1.336;
    cfg.edges[0].capacity_ghz = 8.91;
    cfg.service = ServiceDistribution::Lognormal;
    cfg.lognormal_sigma = 1.5;
    return cfg;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double shannon_rate_mbps(const ChannelParams& channel, double tx_power_dbm, double distance_m,
                         double fading, const std::vector<Interferer>& interferers) {
    if (!(distance_m > 0.0)) throw InvalidArgument("channel distance must be positive");
    const double gain = fading * std::pow(distance_m, -channel.pathloss_exponent);
    double interference = dbm_to_watts(channel.noise_dbm);
    for (const auto& i : interferers) {
        if (!(i.distance_m > 0.0)) throw InvalidArgument("interferer distance must be positive");
        interference +=
            dbm_to_watts(i.tx_power_dbm) * i.fading * std::pow(i.distance_m, -channel.pathloss_exponent);
    }
    const double sinr = dbm_to_watts(tx_power_dbm) * gain / interference;
    return channel.bandwidth_hz * std::log2(1.0 + sinr) / 1e6;
}

double transmission_time(const TaskSpec& task, double rate_mbps, bool tx_counts_cycles) {
    if (!(rate_mbps > 0.0)) throw InvalidArgument("transmission rate must be positive");
    const double bits = tx_counts_cycles ? task.size_mbit * task.density_gcycles : task.size_mbit;
    return bits / rate_mbps;
}

double service_time(const TaskSpec& task, double capacity_ghz, ServiceDistribution dist,
                    double lognormal_sigma, RngStream& stream) {
    if (!(capacity_ghz > 0.0)) throw InvalidArgument("processing capacity must be positive");
    const double mean = task.size_mbit * task.density_gcycles / capacity_ghz;
    switch (dist) {
        case ServiceDistribution::Exponential: return sample_exponential(1.0 / mean, stream);
        case ServiceDistribution::Lognormal: return sample_lognormal(mean, lognormal_sigma, stream);
    }
    throw InvalidArgument("unknown service distribution");
}

std::string_view to_string(Indicator ind) {
    switch (ind) {
        case Indicator::NeedsOffload: return "NeedsOffload";
        case Indicator::NeedsUpdate: return "NeedsUpdate";
        case Indicator::Busy: return "Busy";
    }
    return "Unknown";
}

MecSimulator::MecSimulator(ScenarioConfig config) : config_(std::move(config)) {
    config_.validate();
    for (int m = 0; m < config_.num_devices(); ++m) deadlines_.push_back(config_.deadline(m));
    reset(config_.seed);
}

void MecSimulator::reset(std::uint64_t env_seed) {
    const auto m = static_cast<std::size_t>(config_.num_devices());
    const auto n = static_cast<std::size_t>(config_.num_edges());
    queue_.reset();
    channel_rng_.emplace(env_seed, "channel");
    local_rng_.emplace(env_seed, "local-service");
    edge_rng_.emplace(env_seed, "edge-service");
    devices_.assign(m, DeviceRuntime{});
    edges_.assign(n, EdgeRuntime{});
    pending_.clear();
    logs_.assign(m, aoi::CompletionLog{});
    event_log_.clear();
    device_counters_.assign(m, DeviceCounters{0, 0, 0, std::vector<std::uint64_t>(n + 1, 0)});
    edge_counters_.assign(n, EdgeCounters{});
    last_decision_time_ = 0.0;
    for (std::size_t d = 0; d < m; ++d) request_decision(static_cast<int>(d), Indicator::NeedsUpdate);
}

bool MecSimulator::alive(int device, std::uint64_t task) const {
    const auto& d = devices_[static_cast<std::size_t>(device)];
    return d.task_id == task && d.stage != Stage::None && d.stage != Stage::Waiting;
}

void MecSimulator::request_decision(int device, Indicator need) {
    devices_[static_cast<std::size_t>(device)].indicator = need;
    pending_.push_back(device);
}

double MecSimulator::sample_fading() {
    if (fixed_fading_) return *fixed_fading_;
    if (!config_.channel.rayleigh_fading) return 1.0;
    return sample_exponential(1.0, *channel_rng_);
}

double MecSimulator::uplink_rate(int device, int edge) {
    const auto& dcfg = config_.devices[static_cast<std::size_t>(device)];
    const Vec2 edge_pos = config_.edges[static_cast<std::size_t>(edge)].position;
    const double fading = sample_fading();
    std::vector<Interferer> interferers;
    for (int other = 0; other < config_.num_devices(); ++other) {
        if (other == device) continue;
        const auto& ocfg = config_.devices[static_cast<std::size_t>(other)];
        if (ocfg.subchannel != dcfg.subchannel) continue;
        if (devices_[static_cast<std::size_t>(other)].stage != Stage::Transmitting) continue;
        interferers.push_back({ocfg.tx_power_dbm, distance(ocfg.position, edge_pos), sample_fading()});
    }
    return shannon_rate_mbps(config_.channel, dcfg.tx_power_dbm, distance(dcfg.position, edge_pos),
                             fading, interferers);
}

void MecSimulator::apply_action(int device, const HybridAction& action) {
    if (device < 0 || device >= config_.num_devices()) throw InvalidArgument("device out of range");
    auto& d = devices_[static_cast<std::size_t>(device)];
    const double now = queue_.clock();
    if (action.kind == HybridAction::Kind::Wait) {
        if (d.indicator != Indicator::NeedsUpdate) {
            throw IllegalActionError("Wait issued to a device that does not need an update");
        }
        if (!(action.wait >= 0.0)) throw InvalidArgument("wait duration must be >= 0");
        d.indicator = Indicator::Busy;
        d.stage = Stage::Waiting;
        d.wait_started = now;
        ++d.task_id;
        queue_.schedule({now + action.wait, EventKind::TaskGenerated, device, std::nullopt, d.task_id, 0});
        return;
    }
    if (d.indicator != Indicator::NeedsOffload) {
        throw IllegalActionError("Offload issued to a device without a fresh task");
    }
    if (action.target != kLocalTarget &&
        (action.target < 0 || action.target >= config_.num_edges())) {
        throw InvalidArgument("offload target out of range");
    }
    d.indicator = Indicator::Busy;
    d.target = action.target;
    auto& counters = device_counters_[static_cast<std::size_t>(device)];
    counters.offloads[static_cast<std::size_t>(action.target + 1)]++;
    if (action.target == kLocalTarget) {
        d.stage = Stage::Local;
        const double t = service_time(config_.task,
                                      config_.devices[static_cast<std::size_t>(device)].local_capacity_ghz,
                                      config_.service, config_.lognormal_sigma, *local_rng_);
        queue_.schedule({now + t, EventKind::LocalDone, device, std::nullopt, d.task_id, 0});
    } else {
        const double rate = uplink_rate(device, action.target);
        d.stage = Stage::Transmitting;
        const double t = transmission_time(config_.task, rate, config_.tx_counts_cycles);
        queue_.schedule({now + t, EventKind::TransmissionDone, device, action.target, d.task_id, 0});
    }
}

void MecSimulator::record(const Event& e) {
    if (!log_events_) return;
    event_log_.push_back({e.time, e.kind, e.device_id, e.edge_id.value_or(-1), e.task_id});
}

void MecSimulator::try_start_service(int edge, double now) {
    auto& er = edges_[static_cast<std::size_t>(edge)];
    if (er.in_service || er.start_pending || er.waiting.empty()) return;
    const auto [device, task] = er.waiting.front();
    er.start_pending = true;
    queue_.schedule({now, EventKind::EdgeServiceStart, device, edge, task, 0});
}

void MecSimulator::finish_task(int device, double now, bool dropped) {
    auto& d = devices_[static_cast<std::size_t>(device)];
    auto& counters = device_counters_[static_cast<std::size_t>(device)];
    auto& log = logs_[static_cast<std::size_t>(device)];
    const double deadline = deadlines_[static_cast<std::size_t>(device)];

    aoi::CompletionEntry entry;
    entry.generation_time = d.generation_time;
    entry.end_time = now;
    entry.dropped = dropped;
    entry.duration = dropped ? deadline : now - d.generation_time;
    log.entries.push_back(entry);

    if (dropped) {
        ++counters.dropped;
    } else {
        ++counters.completed;
        d.aoi_reference = d.generation_time;
    }
    d.last_latency = entry.duration;
    d.stage = Stage::None;
    request_decision(device, Indicator::NeedsUpdate);
}

void MecSimulator::handle(const Event& e) {
    const int dev = e.device_id;
    auto& d = devices_[static_cast<std::size_t>(dev)];
    const double now = e.time;
    switch (e.kind) {
        case EventKind::TaskGenerated: {
            if (d.task_id != e.task_id || d.stage != Stage::Waiting) return;
            record(e);
            auto& log = logs_[static_cast<std::size_t>(dev)];
            if (!log.entries.empty()) log.entries.back().wait_after = now - d.wait_started;
            d.stage = Stage::Generated;
            d.generation_time = now;
            ++device_counters_[static_cast<std::size_t>(dev)].generated;
            queue_.schedule({now + deadlines_[static_cast<std::size_t>(dev)], EventKind::Deadline, dev,
                             std::nullopt, d.task_id, 0});
            request_decision(dev, Indicator::NeedsOffload);
            return;
        }
        case EventKind::TransmissionDone: {
            if (!alive(dev, e.task_id) || d.stage != Stage::Transmitting) return;
            record(e);
            const int n = *e.edge_id;
            d.stage = Stage::Queued;
            edges_[static_cast<std::size_t>(n)].waiting.emplace_back(dev, e.task_id);
            ++edge_counters_[static_cast<std::size_t>(n)].enqueued;
            try_start_service(n, now);
            return;
        }
        case EventKind::EdgeServiceStart: {
            const int n = *e.edge_id;
            auto& er = edges_[static_cast<std::size_t>(n)];
            er.start_pending = false;
            if (er.waiting.empty() || er.waiting.front() != std::make_pair(dev, e.task_id) ||
                !alive(dev, e.task_id)) {
                try_start_service(n, now);
                return;
            }
            record(e);
            er.waiting.pop_front();
            er.in_service = std::make_pair(dev, e.task_id);
            d.stage = Stage::InService;
            const double t = service_time(config_.task, config_.edges[static_cast<std::size_t>(n)].capacity_ghz,
                                          config_.service, config_.lognormal_sigma, *edge_rng_);
            queue_.schedule({now + t, EventKind::EdgeServiceDone, dev, n, e.task_id, 0});
            return;
        }
        case EventKind::EdgeServiceDone: {
            if (!alive(dev, e.task_id) || d.stage != Stage::InService) return;
            record(e);
            const int n = *e.edge_id;
            auto& er = edges_[static_cast<std::size_t>(n)];
            er.in_service.reset();
            ++edge_counters_[static_cast<std::size_t>(n)].dequeued;
            finish_task(dev, now, false);
            try_start_service(n, now);
            return;
        }
        case EventKind::LocalDone: {
            if (!alive(dev, e.task_id) || d.stage != Stage::Local) return;
            record(e);
            finish_task(dev, now, false);
            return;
        }
        case EventKind::Deadline: {
            if (!alive(dev, e.task_id)) return;
            record(e);
            if (d.stage == Stage::Queued) {
                const int n = d.target;
                auto& er = edges_[static_cast<std::size_t>(n)];
                auto it = std::find(er.waiting.begin(), er.waiting.end(), std::make_pair(dev, e.task_id));
                if (it != er.waiting.end()) {
                    er.waiting.erase(it);
                    ++edge_counters_[static_cast<std::size_t>(n)].dequeued;
                }
                finish_task(dev, now, true);
                try_start_service(n, now);
            } else if (d.stage == Stage::InService) {
                const int n = d.target;
                edges_[static_cast<std::size_t>(n)].in_service.reset();
                ++edge_counters_[static_cast<std::size_t>(n)].dequeued;
                finish_task(dev, now, true);
                try_start_service(n, now);
            } else {
                // Generated (no offload yet), transmitting or local.
                finish_task(dev, now, true);
            }
            return;
        }
        case EventKind::WaitDone:
            record(e);
            return;
    }
}

SystemState MecSimulator::observe() const {
    SystemState s;
    s.time = queue_.clock();
    for (std::size_t m = 0; m < devices_.size(); ++m) {
        s.indicators.push_back(devices_[m].indicator);
        s.last_latency.push_back(devices_[m].last_latency);
        s.aoi_now.push_back(s.time - devices_[m].aoi_reference);
    }
    for (const auto& er : edges_) {
        s.queue_lengths.push_back(static_cast<int>(er.waiting.size() + (er.in_service ? 1 : 0)));
    }
    return s;
}

std::size_t MecSimulator::edge_waiting(int edge) const {
    return edges_.at(static_cast<std::size_t>(edge)).waiting.size();
}

Decision MecSimulator::make_decision(int device) {
    Decision dec;
    dec.device = device;
    dec.need = devices_[static_cast<std::size_t>(device)].indicator;
    dec.state = observe();
    dec.elapsed = queue_.clock() - last_decision_time_;
    last_decision_time_ = queue_.clock();
    return dec;
}

Decision MecSimulator::advance_until_decision() {
    const double limit = queue_.clock() + config_.livelock_horizon;
    while (pending_.empty()) {
        if (queue_.empty()) throw LivelockError("no pending events and no device needs a decision");
        if (queue_.peek().time > limit) {
            throw LivelockError("no decision point within the livelock horizon");
        }
        handle(queue_.pop_next());
    }
    const int device = pending_.front();
    pending_.pop_front();
    return make_decision(device);
}

std::optional<Decision> MecSimulator::advance_until_decision_before(double t_end) {
    while (pending_.empty()) {
        if (queue_.empty() || queue_.peek().time > t_end) {
            if (t_end > queue_.clock()) queue_.advance_clock(t_end);
            return std::nullopt;
        }
        handle(queue_.pop_next());
    }
    const int device = pending_.front();
    pending_.pop_front();
    return make_decision(device);
}

void write_event_log_csv(std::ostream& out, const std::vector<EventLogRow>& rows) {
    out << "# aoimec event-log v1\n";
    out << "time,kind,device,edge,task\n";
    for (const auto& r : rows) {
        out << r.time << ',' << to_string(r.kind) << ',' << r.device << ',' << r.edge << ',' << r.task
            << '\n';
    }
}

}  // namespace aoimec
