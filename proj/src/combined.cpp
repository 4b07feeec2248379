#include "netcomb/combined.hpp"

#include <algorithm>
#include <cmath>

namespace netcomb {

std::string to_string(SimMode m) {
  switch (m) {
    case SimMode::protocol_stack: return "protocol_stack";
    case SimMode::coverage: return "coverage";
    case SimMode::link_channel: return "link_channel";
  }
  return "protocol_stack";
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "protocol_stack" || s == "protocol-stack") return SimMode::protocol_stack;
  if (s == "coverage") return SimMode::coverage;
  if (s == "link_channel" || s == "link-channel") return SimMode::link_channel;
  throw ValidationError("mode", "unknown mode '" + s + "'");
}

Scenario effective_scenario(const SimRequest& req) {
  Scenario s = req.scenario;
  validate_scenario(s);
  for (const auto& [cell_id, cfg] : req.antenna_overrides) {
    const auto idx = s.cell_index(cell_id);
    if (!idx) throw ValidationError("antenna_overrides", "unknown cell_id " + std::to_string(cell_id));
    s.cell(s.cell_refs()[*idx]).antenna = cfg;
  }
  validate_scenario(s);
  const double ticks = req.duration / s.tick;
  if (!(req.duration > 0.0) || std::abs(ticks - std::round(ticks)) > 1e-9) {
    throw ValidationError("duration", "must be a positive multiple of tick");
  }
  req.mobility.validate(s.map_bounds);
  return s;
}

std::size_t tick_count(const SimRequest& req) {
  return static_cast<std::size_t>(std::llround(req.duration / req.scenario.tick));
}

void check_limits(const SimRequest& req, const ResourceLimits& limits) {
  if (req.n_users > limits.max_users) {
    throw ResourceGuardError("n_users above cap", static_cast<double>(req.n_users),
                             static_cast<double>(limits.max_users));
  }
  const double cells = static_cast<double>(req.scenario.num_cells());
  const double ticks = static_cast<double>(tick_count(req));
  const double work = static_cast<double>(req.n_users) * cells * ticks;
  if (work > limits.max_link_ticks) {
    throw ResourceGuardError("users*cells*ticks above cap", work, limits.max_link_ticks);
  }
  if (req.mode == SimMode::link_channel) {
    const double users = req.link_users.empty() ? static_cast<double>(req.n_users) : static_cast<double>(req.link_users.size());
    const double export_cells = req.link_cells.empty() ? cells : static_cast<double>(req.link_cells.size());
    const auto& ch = req.scenario.channel;
    const double bytes = static_cast<double>(kExportHeaderSize) +
                         users * export_cells * ticks * req.scenario.num_re() * ch.tx_ports * ch.rx_ports * 8.0;
    if (bytes > limits.max_export_bytes) {
      throw ResourceGuardError("link_channel export size above cap", bytes, limits.max_export_bytes);
    }
  }
}

namespace {
std::vector<int> sequential_ids(std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  return ids;
}
}  // namespace

Pipeline::Pipeline(Scenario scenario, std::size_t n_users, const MobilityParams& mobility, std::uint64_t seed,
                   std::size_t max_users)
    : scenario_(std::move(scenario)),
      population_(scenario_, n_users, mobility, seed, max_users),
      shadowing_(scenario_, seed),
      small_(draw_small_scale(scenario_, sequential_ids(n_users), seed)) {}

void Pipeline::set_antenna(int cell_id, const AntennaConfig& cfg) {
  const auto idx = scenario_.cell_index(cell_id);
  if (!idx) throw ValidationError("action", "unknown cell_id " + std::to_string(cell_id));
  scenario_.cell(scenario_.cell_refs()[*idx]).antenna = cfg;
}

Pipeline::TickOutput Pipeline::advance(bool schedule, const SignalPowerFn& signal_power) {
  TickOutput out;
  out.snapshot = population_.step(scenario_.tick, schedule);
  out.large_scale = build_large_scale(scenario_, out.snapshot, shadowing_);
  small_.advance(out.snapshot.tick_index, scenario_.tick);
  out.grid = freq_response(small_, scenario_);
  apply_large_scale_in_place(out.large_scale, out.grid);
  out.measurements = measure(out.grid, scenario_, signal_power);
  if (schedule) {
    out.indicators = schedule_and_aggregate(out.measurements, population_.users(), scenario_, scenario_.tick,
                                            out.snapshot.tick_index, out.snapshot.time);
  }
  return out;
}

CoverageTick coverage_tick(const std::vector<LinkMeasurement>& m, const Scenario& scenario, double time,
                           std::int64_t tick_index) {
  CoverageTick t;
  t.time = time;
  t.tick_index = tick_index;
  t.users = m;
  const std::size_t cells = scenario.num_cells();
  std::vector<std::size_t> attached(cells, 0);
  std::vector<std::size_t> covered(cells, 0);
  std::size_t total_covered = 0;
  for (const auto& lm : m) {
    const bool cov = is_covered(lm, scenario.phy);
    if (cov) ++total_covered;
    if (!lm.has_serving()) continue;
    const auto c = static_cast<std::size_t>(lm.serving_index);
    ++attached[c];
    if (cov) ++covered[c];
  }
  t.cell_coverage.resize(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    if (attached[c] > 0) t.cell_coverage[c] = static_cast<double>(covered[c]) / static_cast<double>(attached[c]);
  }
  t.coverage_ratio = m.empty() ? 0.0 : static_cast<double>(total_covered) / static_cast<double>(m.size());
  return t;
}

SimResult run_simulation(const SimRequest& req, const ResourceLimits& limits, const ProgressFn& progress) {
  const Scenario scenario = effective_scenario(req);
  check_limits(req, limits);
  const std::size_t ticks = tick_count(req);

  SimResult result;
  result.mode = req.mode;
  result.metadata = {req.mode, req.seed, req.duration, scenario.tick, req.n_users, scenario.num_cells(), ticks, kVersion};

  Pipeline pipeline(scenario, req.n_users, req.mobility, req.seed, limits.max_users);
  std::optional<GridExportWriter> writer;
  if (req.mode == SimMode::link_channel) {
    writer.emplace(static_cast<std::uint32_t>(scenario.num_re()), static_cast<std::uint32_t>(scenario.channel.tx_ports),
                   static_cast<std::uint32_t>(scenario.channel.rx_ports));
    result.link.emplace();
  }
  auto wanted = [](const std::vector<int>& filter, int id) {
    return filter.empty() || std::find(filter.begin(), filter.end(), id) != filter.end();
  };

  for (std::size_t t = 0; t < ticks; ++t) {
    auto out = pipeline.advance(req.mode == SimMode::protocol_stack);
    switch (req.mode) {
      case SimMode::protocol_stack:
        result.protocol.push_back(std::move(*out.indicators));
        break;
      case SimMode::coverage:
        result.coverage.push_back(coverage_tick(out.measurements, scenario, out.snapshot.time, out.snapshot.tick_index));
        break;
      case SimMode::link_channel:
        for (std::size_t u = 0; u < out.grid.num_users; ++u) {
          if (!wanted(req.link_users, out.grid.user_ids[u])) continue;
          for (std::size_t c = 0; c < out.grid.num_cells; ++c) {
            if (!wanted(req.link_cells, out.grid.cell_ids[c])) continue;
            writer->append(out.grid.link(u, c));
            result.link->samples.push_back({out.snapshot.tick_index, out.grid.user_ids[u], out.grid.cell_ids[c],
                                            out.large_scale.loss(u, c), out.large_scale.is_usable(u, c),
                                            pipeline.small_scale().link_energy(u, c)});
          }
        }
        break;
    }
    if (progress && !progress(t + 1, ticks)) throw StateError("cancelled");
  }
  if (writer) {
    result.link->payload = writer->finish();
    result.link->shape = {writer->num_samples(), static_cast<std::uint32_t>(scenario.num_re()),
                          static_cast<std::uint32_t>(scenario.channel.tx_ports),
                          static_cast<std::uint32_t>(scenario.channel.rx_ports)};
  }
  return result;
}

namespace {
SimResult run_mode(const SimRequest& req, SimMode mode, const ResourceLimits& limits) {
  if (req.mode != mode) throw ValidationError("mode", "request mode is " + to_string(req.mode) + ", expected " + to_string(mode));
  return run_simulation(req, limits);
}
}  // namespace

SimResult run_protocol_stack(const SimRequest& req, const ResourceLimits& limits) {
  return run_mode(req, SimMode::protocol_stack, limits);
}
SimResult run_coverage(const SimRequest& req, const ResourceLimits& limits) {
  return run_mode(req, SimMode::coverage, limits);
}
SimResult run_link_channel(const SimRequest& req, const ResourceLimits& limits) {
  return run_mode(req, SimMode::link_channel, limits);
}

}  // namespace netcomb
