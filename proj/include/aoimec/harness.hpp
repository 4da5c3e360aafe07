#pragma once

// Experiment plumbing shared by the command-line tool and the Python module:
// key=value configs with [section] headers, parameter sweeps and SVG plots.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aoimec/async_marl.hpp"
#include "aoimec/fql.hpp"
#include "aoimec/fractional_mdp.hpp"
#include "aoimec/mec_model.hpp"
#include "aoimec/nashq.hpp"

namespace aoimec::harness {

class Config {
public:
    /// Keys before any header live in section "". Blank lines and lines
    /// starting with '#' or ';' are ignored. Throws ConfigError with the line
    /// number on malformed input or a repeated key.
    static Config parse(std::istream& in, const std::string& origin = "<config>");
    static Config load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const;
    std::optional<std::string> raw(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    /// Throws ConfigError naming the first key of `section` not in `known`.
    void check_keys(const std::string& section, const std::vector<std::string>& known) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const { return sections_; }

private:
    std::string origin_;
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

std::vector<double> parse_double_list(std::string_view text);

/// [scenario]: preset plus overrides (see configs/standard.cfg).
ScenarioConfig scenario_from_config(const Config& cfg);
/// [marl]
marl::MarlConfig marl_from_config(const Config& cfg);
/// [mdp]: kind = random | explicit.
FractionalMdp mdp_from_config(const Config& cfg);
/// [fql]
fql::FqlConfig fql_from_config(const Config& cfg);
/// [game]: kind = random_coupled | decoupled | from_mdp.
MarkovGame game_from_config(const Config& cfg);
/// [fnql]
fnql::FnqlConfig fnql_from_config(const Config& cfg);

// ---- sweeps ----

enum class Axis {
    EdgeCapacity,       // GHz per edge at 20-device load; scaled by M/20 like the desk preset
    DropCoefficient,
    TaskDensity,        // gigacycles per Mbit
    MobileCapacity,     // GHz
    ProcessingVariance, // lognormal sigma, 0 = exponential
    NumAgents,
    Bandwidth,          // MHz
};
std::string_view to_string(Axis a);
Axis parse_axis(std::string_view name);

/// Learner modes and baselines by name: frac-async, frac-sync, nonfrac-async,
/// nonfrac-sync, random, zero-wait, local-only, greedy-queue.
marl::MarlConfig apply_mode(marl::MarlConfig base, std::string_view mode);
void apply_axis(ScenarioConfig& scenario, Axis axis, double value);

struct SweepRow {
    double value = 0.0;
    std::uint64_t seed = 0;
    std::string mode;
    double mean_aoi = 0.0;
    double mean_gamma = 0.0;
    double drops = 0.0;
};

struct SweepSpec {
    Axis axis = Axis::EdgeCapacity;
    std::vector<double> values;
    std::vector<std::string> modes;
    std::vector<std::uint64_t> seeds;
};

/// Runs every (value, seed, mode) with paired environment streams per seed.
/// `workers` threads share the runs; rows come back sorted by (value, seed,
/// mode) regardless of completion order. workers = 0 reads AOIMEC_WORKERS
/// (default 1).
std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const marl::MarlConfig& learner,
                                const SweepSpec& spec, unsigned workers = 0);

void write_sweep_csv(std::ostream& out, Axis axis, const std::vector<SweepRow>& rows);

// ---- plots ----

enum class PlotKind { Convergence, Bars };
PlotKind parse_plot_kind(std::string_view name);

/// Renders an SVG from a CSV written by this package: fql/fnql γ traces and
/// learner metrics as lines, sweep tables as grouped bars with min/max whiskers
/// across seeds. Throws ConfigError on an empty or unrecognized table.
std::string plot_svg(std::istream& csv, PlotKind kind);

}  // namespace aoimec::harness
