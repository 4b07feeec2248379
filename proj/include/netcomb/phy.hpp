#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "netcomb/channel.hpp"
#include "netcomb/scenario.hpp"
#include "netcomb/user_emulator.hpp"

namespace netcomb {

inline constexpr double kSinrFloorDb = -300.0;

struct LinkMeasurement {
  int user_id = 0;
  int serving_cell = -1;            // cell_id, -1 when out of coverage
  std::ptrdiff_t serving_index = -1;  // flat cell index
  double rsrp = 0.0;                // dBm, serving cell; -inf without one
  double sinr = kSinrFloorDb;       // dB
  double interference = 0.0;        // mW, other active cells
  bool operator==(const LinkMeasurement&) const = default;
  bool has_serving() const { return serving_cell >= 0; }
};

struct CellKpi {
  int cell_id = 0;
  double total_dl_traffic = 0.0;  // bytes
  double avg_dl_rate = 0.0;       // bit/s over scheduled users
  double avg_bler = 0.0;
  int attached_users = 0;
  int scheduled_users = 0;
  bool operator==(const CellKpi&) const = default;
};

struct UserPerf {
  LinkMeasurement link;
  bool covered = false;
  int allocated_rbs = 0;
  double served_bits = 0.0;
  double rate = 0.0;  // achieved bit/s
  double bler = 0.0;
  bool operator==(const UserPerf&) const = default;
};

struct PerfIndicators {
  double time = 0.0;
  std::int64_t tick_index = 0;
  std::vector<UserPerf> users;
  std::vector<CellKpi> cells;
  double coverage_ratio = 0.0;
  double mean_user_rate = 0.0;
  bool operator==(const PerfIndicators&) const = default;
};

/// Thermal noise per RE in dBm: -174 dBm/Hz + 10 log10(spacing) + NF.
double noise_per_re_dbm(const Scenario& scenario);

/// Replaces the serving-signal power used for SINR. Receives (user index,
/// cell index, link response) and returns the linear mean power that the
/// unprecoded link would report as `mean_link_power(link)`.
using SignalPowerFn = std::function<double(std::size_t, std::size_t, std::span<const cplx>)>;

/// Per-user RSRP, argmax serving cell (ties to the lowest cell_id) and SINR.
std::vector<LinkMeasurement> measure(const ChannelGrid& grid, const Scenario& scenario,
                                     const SignalPowerFn& signal_power = {});

double sinr_to_rate(double sinr_db, double alloc_bw, double se_cap = 7.4);
double sinr_to_bler(double sinr_db, double midpoint = 0.0, double width = 1.0);

bool is_covered(const LinkMeasurement& m, const PhyParams& phy);

/// Splits each cell's RBs equally among attached users with pending demand
/// (the remainder rotates with `tick_index`), serves
/// rate * (1 - BLER) * tick bits capped by demand, drains demand from
/// `users`, and aggregates KPIs. `measurements[i]` belongs to `users[i]`.
PerfIndicators schedule_and_aggregate(const std::vector<LinkMeasurement>& measurements, std::vector<UserState>& users,
                                      const Scenario& scenario, double tick, std::int64_t tick_index, double time);

}  // namespace netcomb
