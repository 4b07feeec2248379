#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcomb/scenario.hpp"
#include "netcomb/user_emulator.hpp"

namespace netcomb {

inline constexpr double kBinSeconds = 300.0;
inline constexpr double kEventPadding = 7200.0;  // observed before start and after end

enum class EventType { concert, championship, esports };

std::string to_string(EventType t);
EventType event_type_from_string(const std::string& s, const std::string& path);

/// Trapezoidal crowd pull toward the venue: `base_attraction` far from the
/// event, linear ramps of `ramp` seconds into and out of the event, and
/// `peak_attraction` while it runs.
struct IntensityProfile {
  double base_attraction = 0.0;
  double peak_attraction = 0.8;
  double ramp = 7200.0;
  double venue_radius = 150.0;  // m, disk users gather in
  bool operator==(const IntensityProfile&) const = default;
};

struct EventSpec {
  Point2 venue_center;
  double radius = 2000.0;  // m
  double event_start = 0.0;  // s
  double event_end = 7200.0;
  EventType event_type = EventType::concert;
  IntensityProfile intensity;

  void validate() const;
  double duration() const { return event_end - event_start; }
  double window_start() const { return event_start - kEventPadding; }
  double window_end() const { return event_end + kEventPadding; }
  /// Attraction in force at absolute time `t`.
  double attraction_at(double t) const;
  bool operator==(const EventSpec&) const = default;
};

void to_json(nlohmann::json& j, const EventSpec& e);
EventSpec event_from_json(const nlohmann::json& j, const std::string& path = "event");

/// Bin start times covering [start - 2 h, end + 2 h) every 300 s. A window
/// that is not a whole number of bins ends with a truncated bin, so the
/// count is ceil((D + 4 h) / 300 s).
std::vector<double> event_bins(const EventSpec& spec);

/// Per-cell user counts on the event's bin grid.
struct CellCountSeries {
  EventSpec spec;
  std::vector<int> cells;
  std::vector<double> bins;
  std::vector<std::int64_t> counts;  // [cell][bin]

  std::size_t num_cells() const { return cells.size(); }
  std::size_t num_bins() const { return bins.size(); }
  std::int64_t at(std::size_t c, std::size_t b) const { return counts[c * bins.size() + b]; }
  std::int64_t& at(std::size_t c, std::size_t b) { return counts[c * bins.size() + b]; }
  std::int64_t bin_total(std::size_t b) const;
  bool operator==(const CellCountSeries&) const = default;
};

std::string write_series(const CellCountSeries& s);
CellCountSeries read_series(const std::string& text);
void to_json(nlohmann::json& j, const CellCountSeries& s);
CellCountSeries series_from_json(const nlohmann::json& j, const std::string& path);

struct SynthesisOptions {
  double step = 10.0;  // s of user movement per update; must divide the bin
  double speed_min = 1.0;
  double speed_max = 4.0;
  double home_radius = 50.0;
};

/// Cells whose site lies within the event radius of the venue.
std::vector<int> cells_in_radius(const Scenario& scenario, const EventSpec& spec);

/// Drives attractor mobility through the event window and counts, at every
/// bin start, the users attached (argmax large-scale RSRP over active
/// cells) to each cell within the radius.
CellCountSeries synthesize_event(const EventSpec& spec, const Scenario& scenario, std::size_t n_users,
                                 std::uint64_t seed, const SynthesisOptions& options = {});

struct CellMetrics {
  int cell_id = 0;
  double rmse = 0.0;
  double mae = 0.0;
};

struct ForecastMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double rel_err = 0.0;  // sum |err| / sum truth
  bool rel_err_defined = true;  // false when the truth total is zero
  std::vector<CellMetrics> per_cell;
};

/// Pooled over every (cell, bin). Cell lists and bin counts must match.
ForecastMetrics forecast_metrics(const CellCountSeries& pred, const CellCountSeries& truth);

enum class TopKCriterion { peak, total };
TopKCriterion topk_criterion_from_string(const std::string& s, const std::string& path);
std::string to_string(TopKCriterion c);

struct RankedCell {
  int cell_id = 0;
  std::int64_t score = 0;
  bool operator==(const RankedCell&) const = default;
};

struct TopKResult {
  std::vector<RankedCell> cells;
  bool truncated = false;  // k exceeded the cell count; all cells returned
};

/// Descending by criterion, ties by ascending cell_id.
TopKResult topk_cells(const CellCountSeries& s, std::size_t k, TopKCriterion criterion);

struct TopKReport {
  std::size_t k = 0;
  TopKCriterion criterion = TopKCriterion::peak;
  std::vector<RankedCell> predicted;
  std::vector<RankedCell> truth;
  std::size_t overlap = 0;
  double rank_correlation = 0.0;  // Spearman over all cells' full rankings
  bool truncated = false;
};

TopKReport topk_report(const CellCountSeries& pred, const CellCountSeries& truth, std::size_t k,
                       TopKCriterion criterion);

/// Rounded mean of the historical counts at each (cell, bin offset from the
/// window start). Cells absent from every history predict 0.
CellCountSeries baseline_forecast(const std::vector<CellCountSeries>& history, const EventSpec& target,
                                  const std::vector<int>& cells);

/// Truncates both series to their common leading bins (the bins are aligned
/// relative to the window start). Cell lists must match.
std::pair<CellCountSeries, CellCountSeries> align_relative(const CellCountSeries& a, const CellCountSeries& b);

struct TransferResult {
  ForecastMetrics metrics;
  TopKReport topk;
  CellCountSeries prediction;
};

/// Predicts `target` on its own bin grid from `history` with the baseline
/// and scores it.
TransferResult transfer_evaluate(const std::vector<CellCountSeries>& history, const CellCountSeries& target,
                                 std::size_t k, TopKCriterion criterion);

void to_json(nlohmann::json& j, const ForecastMetrics& m);
void to_json(nlohmann::json& j, const TopKReport& r);

}  // namespace netcomb
