#include "netcomb/phy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace netcomb {

double noise_per_re_dbm(const Scenario& scenario) {
  return -174.0 + 10.0 * std::log10(scenario.channel.subcarrier_spacing) + scenario.noise_figure;
}

std::vector<LinkMeasurement> measure(const ChannelGrid& grid, const Scenario& scenario,
                                     const SignalPowerFn& signal_power) {
  const auto refs = scenario.cell_refs();
  if (refs.size() != grid.num_cells) throw IndexMismatchError("grid cell count differs from scenario");
  const double noise_mw = std::pow(10.0, noise_per_re_dbm(scenario) / 10.0);

  std::vector<double> rsrp_mw(grid.num_cells);
  std::vector<double> rsrp_dbm(grid.num_cells);
  std::vector<LinkMeasurement> out;
  out.reserve(grid.num_users);
  for (std::size_t u = 0; u < grid.num_users; ++u) {
    LinkMeasurement m;
    m.user_id = grid.user_ids[u];
    m.rsrp = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < grid.num_cells; ++c) {
      const auto& cell = scenario.cell(refs[c]);
      if (!cell.antenna.active) {
        rsrp_mw[c] = 0.0;
        continue;
      }
      const double p = mean_link_power(grid.link(u, c));
      rsrp_dbm[c] = cell.tx_power_per_re + 10.0 * std::log10(p);
      rsrp_mw[c] = std::pow(10.0, cell.tx_power_per_re / 10.0) * p;
      const bool better = !m.has_serving() || rsrp_dbm[c] > m.rsrp ||
                          (rsrp_dbm[c] == m.rsrp && cell.cell_id < m.serving_cell);
      if (better) {
        m.serving_cell = cell.cell_id;
        m.serving_index = static_cast<std::ptrdiff_t>(c);
        m.rsrp = rsrp_dbm[c];
      }
    }
    if (m.has_serving()) {
      const auto s_idx = static_cast<std::size_t>(m.serving_index);
      double interference = 0.0;
      for (std::size_t c = 0; c < grid.num_cells; ++c) {
        if (c != s_idx) interference += rsrp_mw[c];
      }
      double signal = rsrp_mw[s_idx];
      if (signal_power) {
        const double tx_mw = std::pow(10.0, scenario.cell(refs[s_idx]).tx_power_per_re / 10.0);
        signal = tx_mw * signal_power(u, s_idx, grid.link(u, s_idx));
      }
      m.interference = interference;
      const double sinr_lin = signal / (interference + noise_mw);
      m.sinr = sinr_lin > 0.0 ? std::max(10.0 * std::log10(sinr_lin), kSinrFloorDb) : kSinrFloorDb;
    }
    out.push_back(m);
  }
  return out;
}

double sinr_to_rate(double sinr_db, double alloc_bw, double se_cap) {
  if (alloc_bw <= 0.0) return 0.0;
  const double lin = std::pow(10.0, sinr_db / 10.0);
  return alloc_bw * std::min(std::log2(1.0 + lin), se_cap);
}

double sinr_to_bler(double sinr_db, double midpoint, double width) {
  return 1.0 / (1.0 + std::exp((sinr_db - midpoint) / width));
}

bool is_covered(const LinkMeasurement& m, const PhyParams& phy) {
  return m.has_serving() && m.rsrp >= phy.rsrp_threshold && m.sinr >= phy.sinr_threshold;
}

PerfIndicators schedule_and_aggregate(const std::vector<LinkMeasurement>& measurements, std::vector<UserState>& users,
                                      const Scenario& scenario, double tick, std::int64_t tick_index, double time) {
  if (measurements.size() != users.size()) throw IndexMismatchError("one measurement per user required");
  const auto cell_ids = scenario.cell_ids();
  const double rb_bw = scenario.subcarriers_per_rb * scenario.channel.subcarrier_spacing;

  PerfIndicators ind;
  ind.time = time;
  ind.tick_index = tick_index;
  ind.users.resize(users.size());
  ind.cells.resize(cell_ids.size());

  std::vector<std::vector<std::size_t>> queued(cell_ids.size());
  std::size_t covered = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    auto& up = ind.users[i];
    up.link = measurements[i];
    up.covered = is_covered(up.link, scenario.phy);
    if (up.covered) ++covered;
    if (!up.link.has_serving()) continue;
    const auto c = static_cast<std::size_t>(up.link.serving_index);
    ++ind.cells[c].attached_users;
    if (users[i].has_demand()) queued[c].push_back(i);
  }

  for (std::size_t c = 0; c < cell_ids.size(); ++c) {
    auto& kpi = ind.cells[c];
    kpi.cell_id = cell_ids[c];
    const auto& q = queued[c];
    if (q.empty()) continue;
    const std::size_t n = q.size();
    const auto rbs = static_cast<std::size_t>(scenario.num_rbs);
    const std::size_t base = rbs / n;
    const std::size_t extra = rbs % n;
    const std::size_t start = static_cast<std::size_t>(tick_index % static_cast<std::int64_t>(n));
    double cell_bits = 0.0;
    double rate_sum = 0.0;
    double bler_sum = 0.0;
    for (std::size_t pos = 0; pos < n; ++pos) {
      const std::size_t i = q[pos];
      auto& up = ind.users[i];
      up.allocated_rbs = static_cast<int>(base + (((pos + n - start) % n) < extra ? 1 : 0));
      const double bw = up.allocated_rbs * rb_bw;
      const double rate = sinr_to_rate(up.link.sinr, bw, scenario.phy.se_cap);
      up.bler = sinr_to_bler(up.link.sinr, scenario.phy.bler_midpoint, scenario.phy.bler_width);
      const double capacity = rate * (1.0 - up.bler) * tick;
      up.served_bits = std::min(capacity, users[i].pending_bytes() * 8.0);
      up.rate = up.served_bits / tick;
      users[i].consume(up.served_bits / 8.0);
      cell_bits += up.served_bits;
      rate_sum += up.rate;
      bler_sum += up.bler;
    }
    kpi.scheduled_users = static_cast<int>(n);
    kpi.total_dl_traffic = cell_bits / 8.0;
    kpi.avg_dl_rate = rate_sum / static_cast<double>(n);
    kpi.avg_bler = bler_sum / static_cast<double>(n);
  }

  if (!users.empty()) {
    double rate_total = 0.0;
    for (const auto& up : ind.users) rate_total += up.rate;
    ind.coverage_ratio = static_cast<double>(covered) / static_cast<double>(users.size());
    ind.mean_user_rate = rate_total / static_cast<double>(users.size());
  }
  return ind;
}

}  // namespace netcomb
