#include "netcomb/wire.hpp"

#include <cmath>
#include <limits>

#include "json_fields.hpp"

namespace netcomb {

std::string to_string(MobilityModel m) {
  switch (m) {
    case MobilityModel::stationary: return "stationary";
    case MobilityModel::random_waypoint: return "random_waypoint";
    case MobilityModel::attractor: return "attractor";
  }
  return "random_waypoint";
}

MobilityModel mobility_model_from_string(const std::string& s, const std::string& path) {
  if (s == "stationary") return MobilityModel::stationary;
  if (s == "random_waypoint") return MobilityModel::random_waypoint;
  if (s == "attractor") return MobilityModel::attractor;
  throw ValidationError(path, "unknown mobility model '" + s + "'");
}

void to_json(json& j, const MobilityParams& m) {
  j = json{{"model", to_string(m.model)},
           {"speed_min", m.speed_min},
           {"speed_max", m.speed_max},
           {"attractor_center", {{"x", m.attractor_center.x}, {"y", m.attractor_center.y}}},
           {"attractor_radius", m.attractor_radius},
           {"attraction", m.attraction},
           {"home_radius", m.home_radius}};
}

MobilityParams mobility_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string at = path + ".";
  MobilityParams m;
  if (j.contains("model")) m.model = mobility_model_from_string(string_at(j, "model", at, ""), at + "model");
  m.speed_min = number_at(j, "speed_min", at, m.speed_min);
  m.speed_max = number_at(j, "speed_max", at, m.speed_max);
  if (j.contains("attractor_center")) {
    const auto& c = object_at(j, "attractor_center", at);
    m.attractor_center = {required_number(c, "x", at + "attractor_center."),
                          required_number(c, "y", at + "attractor_center.")};
  }
  m.attractor_radius = number_at(j, "attractor_radius", at, m.attractor_radius);
  m.attraction = number_at(j, "attraction", at, m.attraction);
  m.home_radius = number_at(j, "home_radius", at, m.home_radius);
  return m;
}

void to_json(json& j, const SimRequest& r) {
  json overrides = json::object();
  for (const auto& [cell_id, cfg] : r.antenna_overrides) overrides[std::to_string(cell_id)] = cfg;
  j = json{{"mode", to_string(r.mode)},
           {"scenario", r.scenario},
           {"antenna_overrides", overrides},
           {"n_users", r.n_users},
           {"mobility", r.mobility},
           {"duration", r.duration},
           {"seed", r.seed}};
  if (!r.link_users.empty()) j["link_users"] = r.link_users;
  if (!r.link_cells.empty()) j["link_cells"] = r.link_cells;
}

SimRequest request_from_json(const json& j) {
  require_object(j, "request");
  SimRequest r;
  if (j.contains("mode")) {
    try {
      r.mode = sim_mode_from_string(string_at(j, "mode", "", ""));
    } catch (const ValidationError&) {
      throw ValidationError("mode", "expected protocol_stack, coverage or link_channel");
    }
  }
  if (!j.contains("scenario")) throw ValidationError("scenario", "missing required field");
  try {
    r.scenario = j.at("scenario").get<Scenario>();
  } catch (const ValidationError& e) {
    throw e.field() == "scenario" ? e : e.nested("scenario");
  } catch (const json::exception& e) {
    throw ValidationError("scenario", e.what());
  }
  if (j.contains("antenna_overrides")) {
    const auto& o = j.at("antenna_overrides");
    if (!o.is_object()) throw ValidationError("antenna_overrides", "expected an object keyed by cell_id");
    for (const auto& [key, value] : o.items()) {
      int cell_id = 0;
      try {
        std::size_t used = 0;
        cell_id = std::stoi(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ValidationError("antenna_overrides." + key, "key must be an integer cell_id");
      }
      const auto idx = r.scenario.cell_index(cell_id);
      const AntennaConfig base = idx ? r.scenario.cell(r.scenario.cell_refs()[*idx]).antenna : AntennaConfig{};
      r.antenna_overrides[cell_id] = antenna_from_json(value, "antenna_overrides." + key + ".", base);
    }
  }
  r.n_users = count_at(j, "n_users", "", r.n_users);
  if (j.contains("mobility")) r.mobility = mobility_from_json(j.at("mobility"));
  r.duration = number_at(j, "duration", "", r.duration);
  r.seed = uint64_at(j, "seed", "", r.seed);
  if (j.contains("link_users")) r.link_users = int_list(j.at("link_users"), "link_users");
  if (j.contains("link_cells")) r.link_cells = int_list(j.at("link_cells"), "link_cells");
  effective_scenario(r);
  return r;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or_neg_inf(const json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? -std::numeric_limits<double>::infinity() : v.get<double>();
}

}  // namespace

void to_json(json& j, const LinkMeasurement& m) {
  j = json{{"user_id", m.user_id},
           {"serving_cell", m.serving_cell},
           {"rsrp", finite_or_null(m.rsrp)},
           {"sinr", m.sinr},
           {"interference", m.interference}};
}

void from_json(const json& j, LinkMeasurement& m) {
  m.user_id = j.at("user_id").get<int>();
  m.serving_cell = j.at("serving_cell").get<int>();
  m.rsrp = number_or_neg_inf(j, "rsrp");
  m.sinr = j.at("sinr").get<double>();
  m.interference = j.value("interference", 0.0);
  m.serving_index = -1;  // resolved against a scenario by the caller if needed
}

void to_json(json& j, const CellKpi& k) {
  j = json{{"cell_id", k.cell_id},
           {"total_dl_traffic", k.total_dl_traffic},
           {"avg_dl_rate", k.avg_dl_rate},
           {"avg_bler", k.avg_bler},
           {"attached_users", k.attached_users},
           {"scheduled_users", k.scheduled_users}};
}

void from_json(const json& j, CellKpi& k) {
  k.cell_id = j.at("cell_id").get<int>();
  k.total_dl_traffic = j.at("total_dl_traffic").get<double>();
  k.avg_dl_rate = j.at("avg_dl_rate").get<double>();
  k.avg_bler = j.at("avg_bler").get<double>();
  k.attached_users = j.at("attached_users").get<int>();
  k.scheduled_users = j.at("scheduled_users").get<int>();
}

void to_json(json& j, const UserPerf& u) {
  j = json(u.link);
  j["covered"] = u.covered;
  j["allocated_rbs"] = u.allocated_rbs;
  j["served_bits"] = u.served_bits;
  j["rate"] = u.rate;
  j["bler"] = u.bler;
}

void from_json(const json& j, UserPerf& u) {
  u.link = j.get<LinkMeasurement>();
  u.covered = j.at("covered").get<bool>();
  u.allocated_rbs = j.at("allocated_rbs").get<int>();
  u.served_bits = j.at("served_bits").get<double>();
  u.rate = j.at("rate").get<double>();
  u.bler = j.at("bler").get<double>();
}

void to_json(json& j, const PerfIndicators& p) {
  j = json{{"time", p.time},
           {"tick_index", p.tick_index},
           {"coverage_ratio", p.coverage_ratio},
           {"mean_user_rate", p.mean_user_rate},
           {"cells", p.cells},
           {"users", p.users}};
}

void from_json(const json& j, PerfIndicators& p) {
  p.time = j.at("time").get<double>();
  p.tick_index = j.at("tick_index").get<std::int64_t>();
  p.coverage_ratio = j.at("coverage_ratio").get<double>();
  p.mean_user_rate = j.at("mean_user_rate").get<double>();
  p.cells = j.at("cells").get<std::vector<CellKpi>>();
  p.users = j.at("users").get<std::vector<UserPerf>>();
}

void to_json(json& j, const CoverageTick& t) {
  j = json{{"time", t.time},
           {"tick_index", t.tick_index},
           {"coverage_ratio", t.coverage_ratio},
           {"cell_coverage", t.cell_coverage},
           {"users", t.users}};
}

void from_json(const json& j, CoverageTick& t) {
  t.time = j.at("time").get<double>();
  t.tick_index = j.at("tick_index").get<std::int64_t>();
  t.coverage_ratio = j.at("coverage_ratio").get<double>();
  t.cell_coverage = j.at("cell_coverage").get<std::vector<double>>();
  t.users = j.at("users").get<std::vector<LinkMeasurement>>();
}

void to_json(json& j, const ExportShape& s) {
  j = json{{"num_samples", s.num_samples}, {"num_re", s.num_re}, {"tx_ports", s.tx_ports}, {"rx_ports", s.rx_ports}};
}

void to_json(json& j, const LinkSampleInfo& s) {
  j = json{{"tick_index", s.tick_index},
           {"user_id", s.user_id},
           {"cell_id", s.cell_id},
           {"coupling_loss", finite_or_null(s.coupling_loss)},
           {"usable", s.usable},
           {"small_scale_energy", s.small_scale_energy}};
}

void to_json(json& j, const RunMetadata& m) {
  j = json{{"mode", to_string(m.mode)},   {"seed", m.seed},           {"duration", m.duration},
           {"tick", m.tick},              {"n_users", m.n_users},     {"num_cells", m.num_cells},
           {"num_ticks", m.num_ticks},    {"version", m.version}};
}

void from_json(const json& j, RunMetadata& m) {
  m.mode = sim_mode_from_string(j.at("mode").get<std::string>());
  m.seed = j.at("seed").get<std::uint64_t>();
  m.duration = j.at("duration").get<double>();
  m.tick = j.at("tick").get<double>();
  m.n_users = j.at("n_users").get<std::size_t>();
  m.num_cells = j.at("num_cells").get<std::size_t>();
  m.num_ticks = j.at("num_ticks").get<std::size_t>();
  m.version = j.at("version").get<std::string>();
}

void to_json(json& j, const SimResult& r) {
  j = json{{"mode", to_string(r.mode)}, {"metadata", r.metadata}};
  switch (r.mode) {
    case SimMode::protocol_stack:
      j["protocol"] = r.protocol;
      break;
    case SimMode::coverage:
      j["coverage"] = r.coverage;
      break;
    case SimMode::link_channel:
      if (r.link) j["link"] = json{{"shape", r.link->shape}, {"samples", r.link->samples}};
      break;
  }
}

}  // namespace netcomb
