#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netcomb/channel.hpp"
#include "netcomb/large_scale.hpp"
#include "netcomb/phy.hpp"
#include "netcomb/scenario.hpp"
#include "netcomb/user_emulator.hpp"

namespace netcomb {

inline constexpr const char* kVersion = "0.1.0";

enum class SimMode { protocol_stack, coverage, link_channel };

std::string to_string(SimMode m);
SimMode sim_mode_from_string(const std::string& s);

/// C1: a call into one of the combined emulators.
struct SimRequest {
  SimMode mode = SimMode::protocol_stack;
  Scenario scenario;
  std::map<int, AntennaConfig> antenna_overrides;  // keyed by cell_id
  std::size_t n_users = 10;
  MobilityParams mobility;
  double duration = 10.0;  // s
  std::uint64_t seed = 1;
  // Optional link filters for link_channel exports; empty means all.
  std::vector<int> link_users;
  std::vector<int> link_cells;
};

struct ResourceLimits {
  std::size_t max_users = kDefaultMaxUsers;
  double max_link_ticks = 5e7;               // users * cells * ticks
  double max_export_bytes = 512.0 * 1024 * 1024;
};

struct CoverageTick {
  double time = 0.0;
  std::int64_t tick_index = 0;
  std::vector<LinkMeasurement> users;
  std::vector<double> cell_coverage;  // per cell: covered / attached users
  double coverage_ratio = 0.0;
  bool operator==(const CoverageTick&) const = default;
};

struct LinkSampleInfo {
  std::int64_t tick_index = 0;
  int user_id = 0;
  int cell_id = 0;
  double coupling_loss = 0.0;
  bool usable = true;
  double small_scale_energy = 0.0;  // port-averaged sum of |tap gain|^2
  bool operator==(const LinkSampleInfo&) const = default;
};

struct LinkChannelData {
  ExportShape shape;
  std::string payload;  // binary export
  std::vector<LinkSampleInfo> samples;
  bool operator==(const LinkChannelData&) const = default;
};

struct RunMetadata {
  SimMode mode = SimMode::protocol_stack;
  std::uint64_t seed = 0;
  double duration = 0.0;
  double tick = 1.0;
  std::size_t n_users = 0;
  std::size_t num_cells = 0;
  std::size_t num_ticks = 0;
  std::string version = kVersion;
  bool operator==(const RunMetadata&) const = default;
};

/// C2: the combined-emulator output. Only the series of the requested mode
/// is populated.
struct SimResult {
  SimMode mode = SimMode::protocol_stack;
  std::vector<PerfIndicators> protocol;
  std::vector<CoverageTick> coverage;
  std::optional<LinkChannelData> link;
  RunMetadata metadata;
  bool operator==(const SimResult&) const = default;
};

/// Validates the request and returns the scenario with overrides applied.
Scenario effective_scenario(const SimRequest& req);
std::size_t tick_count(const SimRequest& req);
/// Throws ResourceGuardError when the request exceeds `limits`.
void check_limits(const SimRequest& req, const ResourceLimits& limits);

/// The pipeline shared by all three services. Each `advance` runs one tick:
/// user step -> large-scale model (F1) -> small-scale evolution and RE
/// response (F4) -> measurement, plus service arrivals and scheduling when
/// `schedule` is set.
class Pipeline {
public:
  struct TickOutput {
    UserSnapshot snapshot;
    LargeScaleModel large_scale;
    ChannelGrid grid;
    std::vector<LinkMeasurement> measurements;
    std::optional<PerfIndicators> indicators;
  };

  Pipeline(Scenario scenario, std::size_t n_users, const MobilityParams& mobility, std::uint64_t seed,
           std::size_t max_users = kDefaultMaxUsers);

  TickOutput advance(bool schedule, const SignalPowerFn& signal_power = {});

  const Scenario& scenario() const { return scenario_; }
  /// Replaces one cell's antenna; takes effect from the next tick.
  void set_antenna(int cell_id, const AntennaConfig& cfg);
  const Population& population() const { return population_; }
  const SmallScaleRealization& small_scale() const { return small_; }
  std::int64_t tick_index() const { return population_.tick_index(); }

private:
  Scenario scenario_;
  Population population_;
  ShadowingField shadowing_;
  SmallScaleRealization small_;
};

/// Progress callback invoked after each tick with (done, total). Returning
/// false cancels the run (throws StateError("cancelled")).
using ProgressFn = std::function<bool(std::size_t, std::size_t)>;

SimResult run_simulation(const SimRequest& req, const ResourceLimits& limits = {}, const ProgressFn& progress = {});
SimResult run_protocol_stack(const SimRequest& req, const ResourceLimits& limits = {});
SimResult run_coverage(const SimRequest& req, const ResourceLimits& limits = {});
SimResult run_link_channel(const SimRequest& req, const ResourceLimits& limits = {});

CoverageTick coverage_tick(const std::vector<LinkMeasurement>& m, const Scenario& scenario, double time,
                           std::int64_t tick_index);

}  // namespace netcomb
