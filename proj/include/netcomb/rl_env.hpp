#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcomb/combined.hpp"

namespace netcomb {

inline constexpr std::size_t kHistogramSide = 8;

/// Absolute beam settings keyed by cell_id. Must name exactly the
/// environment's optimized cells.
using Action = std::map<int, AntennaConfig>;

struct SiteSummary {
  int site_id = 0;
  Point3 position;
  std::vector<int> cell_ids;
  bool operator==(const SiteSummary&) const = default;
};

struct EnvState {
  std::size_t step_index = 0;
  std::vector<SiteSummary> sites;
  Action beams;                      // every cell, not only optimized ones
  std::vector<int> cell_user_counts;  // users served per cell, cell-index order
  std::array<int, kHistogramSide * kHistogramSide> user_histogram{};  // row-major, y rows
  std::string business_model;
  PerfIndicators indicators;
  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState state;
  PerfIndicators indicators;
  bool done = false;
  nlohmann::json info;
  bool operator==(const StepResult&) const = default;
};

/// Protocol-stack pipeline driven one 1 s tick per step. Not thread-safe;
/// callers serialize reset/step.
class AntennaEnv {
public:
  explicit AntennaEnv(ResourceLimits limits = {}) : limits_(limits) {}

  /// `optimized_cells` empty means every cell. The request's mode and
  /// duration are ignored; its scenario must use a 1 s tick.
  EnvState reset(const SimRequest& req, std::size_t episode_len, std::uint64_t seed,
                 std::vector<int> optimized_cells = {});
  /// Applies `action` and advances one tick. Rejected actions leave the
  /// state untouched.
  StepResult step(const Action& action);

  bool ready() const { return pipeline_ != nullptr; }
  bool done() const { return ready() && state_.step_index >= episode_len_; }
  const EnvState& state() const;
  const ParamGrid& grid() const { return grid_; }
  const std::vector<int>& optimized_cells() const { return optimized_; }
  std::size_t episode_len() const { return episode_len_; }

  /// Throws ValidationError / OffGridError without touching the env.
  void validate_action(const Action& action) const;

private:
  EnvState observe(const Pipeline::TickOutput& out) const;

  ResourceLimits limits_;
  std::unique_ptr<Pipeline> pipeline_;
  ParamGrid grid_;
  std::vector<int> optimized_;
  std::size_t episode_len_ = 0;
  std::string business_model_;
  EnvState state_;
};

/// w_cov * coverage_ratio + w_rate * mean_user_rate / rate_norm.
double default_reward(const PerfIndicators& ind, double w_cov, double w_rate, double rate_norm);

/// Business-model id: a digest of the scenario's service profiles.
std::string business_model_id(const Scenario& s);

void to_json(nlohmann::json& j, const SiteSummary& s);
void to_json(nlohmann::json& j, const EnvState& s);
void to_json(nlohmann::json& j, const StepResult& r);
nlohmann::json action_to_json(const Action& a);
/// Object keyed by cell_id; omitted antenna fields default to `current`.
Action action_from_json(const nlohmann::json& j, const std::string& path, const Action& current = {});

}  // namespace netcomb
