#include "netcomb/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json_fields.hpp"

namespace netcomb {

using nlohmann::json;

namespace {

void check_list(const std::vector<double>& values, const std::string& field, double lo, double hi,
                bool lo_open) {
  if (values.empty()) throw ValidationError(field, "grid list must be non-empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v > hi || v < lo || (lo_open && v == lo)) {
      throw ValidationError(field, "grid value " + std::to_string(v) + " outside permitted range");
    }
    if (i > 0 && !(values[i - 1] < v)) throw ValidationError(field, "grid list must be strictly increasing");
  }
}

bool on_grid(double v, const std::vector<double>& grid) {
  return std::any_of(grid.begin(), grid.end(), [v](double g) { return std::abs(g - v) <= 1e-9; });
}

double nearest_value(double v, const std::vector<double>& grid) {
  double best = grid.front();
  for (double g : grid) {
    if (std::abs(g - v) < std::abs(best - v)) best = g;
  }
  return best;
}

void check_antenna(const AntennaConfig& a, const std::string& path) {
  if (!(a.h_beamwidth > 0.0 && a.h_beamwidth <= 180.0)) throw ValidationError(path + "h_beamwidth", "must be in (0, 180]");
  if (!(a.v_beamwidth > 0.0 && a.v_beamwidth <= 180.0)) throw ValidationError(path + "v_beamwidth", "must be in (0, 180]");
  if (!(a.azimuth >= 0.0 && a.azimuth < 360.0)) throw ValidationError(path + "azimuth", "must be in [0, 360)");
  if (!(a.downtilt >= -90.0 && a.downtilt <= 90.0)) throw ValidationError(path + "downtilt", "must be in [-90, 90]");
}

}  // namespace

void TapProfile::validate(const std::string& field) const {
  if (taps.empty()) throw ValidationError(field, "at least one tap required");
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const std::string at = field + "[" + std::to_string(i) + "]";
    if (!(taps[i].delay >= 0.0) || !std::isfinite(taps[i].delay)) throw ValidationError(at + ".delay", "must be non-negative");
    if (!(taps[i].power > 0.0) || !std::isfinite(taps[i].power)) throw ValidationError(at + ".power", "must be positive");
    if (i > 0 && !(taps[i - 1].delay < taps[i].delay)) throw ValidationError(at + ".delay", "delays must be strictly increasing");
  }
  if (!(doppler >= 0.0) || !std::isfinite(doppler)) throw ValidationError("channel.doppler", "must be non-negative");
}

TapProfile TapProfile::normalized() const {
  TapProfile out = *this;
  double total = 0.0;
  for (const auto& t : taps) total += t.power;
  for (auto& t : out.taps) t.power /= total;
  return out;
}

ParamGrid ParamGrid::make(std::vector<double> h_beamwidth, std::vector<double> v_beamwidth,
                          std::vector<double> azimuth, std::vector<double> downtilt) {
  check_list(h_beamwidth, "param_grid.h_beamwidth", 0.0, 180.0, true);
  check_list(v_beamwidth, "param_grid.v_beamwidth", 0.0, 180.0, true);
  check_list(azimuth, "param_grid.azimuth", 0.0, 360.0 - 1e-12, false);
  check_list(downtilt, "param_grid.downtilt", -90.0, 90.0, false);
  ParamGrid g;
  g.h_beamwidth_ = std::move(h_beamwidth);
  g.v_beamwidth_ = std::move(v_beamwidth);
  g.azimuth_ = std::move(azimuth);
  g.downtilt_ = std::move(downtilt);
  return g;
}

namespace {
std::string describe(const std::vector<OffGridParam>& params) {
  std::ostringstream os;
  os << "action off grid:";
  for (const auto& p : params) os << " " << p.name << "=" << p.value << " (nearest " << p.nearest << ")";
  return os.str();
}
}  // namespace

OffGridError::OffGridError(std::vector<OffGridParam> params)
    : Error("off_grid", describe(params)), params_(std::move(params)) {}

const AntennaConfig& validate_antenna(const AntennaConfig& cfg, const ParamGrid& grid) {
  std::vector<OffGridParam> bad;
  auto check = [&](const char* name, double v, const std::vector<double>& values) {
    if (values.empty()) throw ValidationError(std::string("param_grid.") + name, "grid list must be non-empty");
    if (!on_grid(v, values)) bad.push_back({name, v, nearest_value(v, values)});
  };
  check("h_beamwidth", cfg.h_beamwidth, grid.h_beamwidth());
  check("v_beamwidth", cfg.v_beamwidth, grid.v_beamwidth());
  check("azimuth", cfg.azimuth, grid.azimuth());
  check("downtilt", cfg.downtilt, grid.downtilt());
  if (!bad.empty()) throw OffGridError(std::move(bad));
  return cfg;
}

ParamGrid default_param_grid(const Scenario& s) {
  std::set<double> h{30.0, 45.0, 65.0, 90.0};
  std::set<double> v{5.0, 10.0, 15.0, 20.0};
  std::set<double> az;
  for (int a = 0; a < 360; a += 30) az.insert(a);
  std::set<double> tilt;
  for (int t = 0; t <= 16; t += 2) tilt.insert(t);
  for (const auto& site : s.sites) {
    for (const auto& c : site.cells) {
      h.insert(c.antenna.h_beamwidth);
      v.insert(c.antenna.v_beamwidth);
      az.insert(c.antenna.azimuth);
      tilt.insert(c.antenna.downtilt);
    }
  }
  return ParamGrid::make({h.begin(), h.end()}, {v.begin(), v.end()}, {az.begin(), az.end()},
                         {tilt.begin(), tilt.end()});
}

std::vector<CellRef> Scenario::cell_refs() const {
  std::vector<CellRef> out;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    for (std::size_t c = 0; c < sites[s].cells.size(); ++c) out.push_back({s, c});
  }
  return out;
}

std::size_t Scenario::num_cells() const {
  std::size_t n = 0;
  for (const auto& s : sites) n += s.cells.size();
  return n;
}

std::optional<std::size_t> Scenario::cell_index(int cell_id) const {
  std::size_t i = 0;
  for (const auto& s : sites) {
    for (const auto& c : s.cells) {
      if (c.cell_id == cell_id) return i;
      ++i;
    }
  }
  return std::nullopt;
}

std::vector<int> Scenario::cell_ids() const {
  std::vector<int> out;
  for (const auto& s : sites) {
    for (const auto& c : s.cells) out.push_back(c.cell_id);
  }
  return out;
}

double normalize_azimuth(double degrees) {
  double a = std::fmod(degrees, 360.0);
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a = 0.0;
  return a;
}

void validate_scenario(const Scenario& s) {
  const auto& b = s.map_bounds;
  if (!(b.width() > 0.0 && b.height() > 0.0)) throw ValidationError("map_bounds", "must have positive area");
  if (!(s.carrier_freq > 0.0)) throw ValidationError("carrier_freq", "must be positive");
  if (!(s.bandwidth > 0.0)) throw ValidationError("bandwidth", "must be positive");
  if (s.num_rbs < 1) throw ValidationError("num_rbs", "must be at least 1");
  if (s.subcarriers_per_rb < 1) throw ValidationError("subcarriers_per_rb", "must be at least 1");
  if (!std::isfinite(s.noise_figure)) throw ValidationError("noise_figure", "must be finite");
  if (!(s.tick > 0.0)) throw ValidationError("tick", "must be positive");
  const double ratio = s.report_interval / s.tick;
  if (!(ratio >= 1.0) || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ValidationError("report_interval", "must be a positive integer multiple of tick");
  }
  if (s.sites.empty()) throw ValidationError("sites", "at least one site required");

  const auto& p = s.propagation;
  if (!std::isfinite(p.pl_ref)) throw ValidationError("propagation.pl_ref", "must be finite");
  if (!(p.pl_exponent > 0.0)) throw ValidationError("propagation.pl_exponent", "must be positive");
  if (!(p.shadow_sigma >= 0.0)) throw ValidationError("propagation.shadow_sigma", "must be non-negative");
  if (!(p.shadow_corr_dist > 0.0)) throw ValidationError("propagation.shadow_corr_dist", "must be positive");
  if (!(p.front_back_ratio >= 0.0)) throw ValidationError("propagation.front_back_ratio", "must be non-negative");
  if (!(p.ue_height > 0.0)) throw ValidationError("propagation.ue_height", "must be positive");

  if (s.channel.tx_ports < 1) throw ValidationError("channel.tx_ports", "must be at least 1");
  if (s.channel.rx_ports < 1) throw ValidationError("channel.rx_ports", "must be at least 1");
  if (!(s.channel.subcarrier_spacing > 0.0)) throw ValidationError("channel.subcarrier_spacing", "must be positive");
  s.channel.profile.validate();

  if (!(s.phy.bler_width > 0.0)) throw ValidationError("phy.bler_width", "must be positive");
  if (!(s.phy.se_cap > 0.0)) throw ValidationError("phy.se_cap", "must be positive");

  std::set<int> site_ids;
  std::set<int> cell_ids;
  for (std::size_t i = 0; i < s.sites.size(); ++i) {
    const auto& site = s.sites[i];
    const std::string at = "sites[" + std::to_string(i) + "].";
    if (!site_ids.insert(site.site_id).second) throw ValidationError(at + "site_id", "duplicate site_id");
    if (!b.contains(site.position.x, site.position.y)) throw ValidationError(at + "position", "outside map_bounds");
    if (!(site.position.z > 0.0)) throw ValidationError(at + "position.height", "must be positive");
    for (std::size_t c = 0; c < site.cells.size(); ++c) {
      const auto& cell = site.cells[c];
      const std::string cat = at + "cells[" + std::to_string(c) + "].";
      if (!cell_ids.insert(cell.cell_id).second) throw ValidationError(cat + "cell_id", "cell_id must be unique");
      if (!std::isfinite(cell.tx_power_per_re)) throw ValidationError(cat + "tx_power_per_re", "must be finite");
      check_antenna(cell.antenna, cat + "antenna.");
    }
  }
  if (cell_ids.empty()) throw ValidationError("sites", "at least one cell required");

  for (std::size_t i = 0; i < s.service_profiles.size(); ++i) {
    const auto& sp = s.service_profiles[i];
    const std::string at = "service_profiles[" + std::to_string(i) + "].";
    if (!(sp.arrival_rate >= 0.0) || !std::isfinite(sp.arrival_rate)) throw ValidationError(at + "arrival_rate", "must be non-negative");
    if (sp.arrival_rate * s.tick > 500.0) throw ValidationError(at + "arrival_rate", "arrival_rate*tick above 500");
    if (sp.service_type != ServiceType::full_buffer && !(sp.demand > 0.0)) throw ValidationError(at + "demand", "must be positive");
    if (sp.service_type == ServiceType::streaming && !(sp.session_duration > 0.0)) {
      throw ValidationError(at + "session_duration", "must be positive");
    }
  }
}

std::string to_string(ServiceType t) {
  switch (t) {
    case ServiceType::full_buffer: return "full_buffer";
    case ServiceType::file_download: return "file_download";
    case ServiceType::streaming: return "streaming";
  }
  return "full_buffer";
}

ServiceType service_type_from_string(const std::string& s, const std::string& path) {
  if (s == "full_buffer") return ServiceType::full_buffer;
  if (s == "file_download") return ServiceType::file_download;
  if (s == "streaming") return ServiceType::streaming;
  throw ValidationError(path, "unknown service_type '" + s + "'");
}

void to_json(json& j, const AntennaConfig& a) {
  j = json{{"h_beamwidth", a.h_beamwidth}, {"v_beamwidth", a.v_beamwidth}, {"azimuth", a.azimuth},
           {"downtilt", a.downtilt}, {"active", a.active}};
}

AntennaConfig antenna_from_json(const json& j, const std::string& path, const AntennaConfig& defaults) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "antenna" : path.substr(0, path.size() - 1), "expected an object");
  AntennaConfig a;
  a.h_beamwidth = number_at(j, "h_beamwidth", path, defaults.h_beamwidth);
  a.v_beamwidth = number_at(j, "v_beamwidth", path, defaults.v_beamwidth);
  a.azimuth = normalize_azimuth(number_at(j, "azimuth", path, defaults.azimuth));
  a.downtilt = number_at(j, "downtilt", path, defaults.downtilt);
  a.active = bool_at(j, "active", path, defaults.active);
  return a;
}

void to_json(json& j, const ParamGrid& g) {
  j = json{{"h_beamwidth", g.h_beamwidth()}, {"v_beamwidth", g.v_beamwidth()}, {"azimuth", g.azimuth()},
           {"downtilt", g.downtilt()}};
}

ParamGrid param_grid_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path, "expected an object");
  auto list = [&](const char* key) {
    if (!j.contains(key)) throw ValidationError(path + "." + key, "missing required field");
    return number_list(j.at(key), path + "." + key);
  };
  std::vector<double> az = list("azimuth");
  for (auto& a : az) a = normalize_azimuth(a);
  std::sort(az.begin(), az.end());
  return ParamGrid::make(list("h_beamwidth"), list("v_beamwidth"), std::move(az), list("downtilt"));
}

void to_json(json& j, const Scenario& s) {
  json sites = json::array();
  for (const auto& site : s.sites) {
    json cells = json::array();
    for (const auto& c : site.cells) {
      cells.push_back({{"cell_id", c.cell_id}, {"tx_power_per_re", c.tx_power_per_re}, {"antenna", c.antenna}});
    }
    sites.push_back({{"site_id", site.site_id},
                     {"position", {{"x", site.position.x}, {"y", site.position.y}, {"height", site.position.z}}},
                     {"cells", cells}});
  }
  json taps = json::array();
  for (const auto& t : s.channel.profile.taps) taps.push_back({{"delay", t.delay}, {"power", t.power}});
  json profiles = json::array();
  for (const auto& sp : s.service_profiles) {
    profiles.push_back({{"service_type", to_string(sp.service_type)},
                        {"arrival_rate", sp.arrival_rate},
                        {"demand", sp.demand},
                        {"session_duration", sp.session_duration}});
  }
  const auto& p = s.propagation;
  j = json{{"map_bounds",
            {{"x_min", s.map_bounds.x_min}, {"y_min", s.map_bounds.y_min}, {"x_max", s.map_bounds.x_max},
             {"y_max", s.map_bounds.y_max}}},
           {"sites", sites},
           {"carrier_freq", s.carrier_freq},
           {"bandwidth", s.bandwidth},
           {"num_rbs", s.num_rbs},
           {"subcarriers_per_rb", s.subcarriers_per_rb},
           {"noise_figure", s.noise_figure},
           {"propagation",
            {{"pl_ref", p.pl_ref}, {"pl_exponent", p.pl_exponent}, {"shadow_sigma", p.shadow_sigma},
             {"shadow_corr_dist", p.shadow_corr_dist}, {"max_antenna_gain", p.max_antenna_gain},
             {"front_back_ratio", p.front_back_ratio}, {"ue_height", p.ue_height}}},
           {"channel",
            {{"tx_ports", s.channel.tx_ports}, {"rx_ports", s.channel.rx_ports},
             {"subcarrier_spacing", s.channel.subcarrier_spacing}, {"taps", taps},
             {"doppler", s.channel.profile.doppler}}},
           {"phy",
            {{"bler_midpoint", s.phy.bler_midpoint}, {"bler_width", s.phy.bler_width}, {"se_cap", s.phy.se_cap},
             {"rsrp_threshold", s.phy.rsrp_threshold}, {"sinr_threshold", s.phy.sinr_threshold}}},
           {"service_profiles", profiles},
           {"tick", s.tick},
           {"report_interval", s.report_interval}};
  if (s.param_grid) j["param_grid"] = *s.param_grid;
}

void from_json(const json& j, Scenario& out) {
  if (!j.is_object()) throw ValidationError("scenario", "expected an object");
  Scenario s;
  if (j.contains("map_bounds")) {
    const auto& b = object_at(j, "map_bounds", "");
    s.map_bounds.x_min = required_number(b, "x_min", "map_bounds.");
    s.map_bounds.y_min = required_number(b, "y_min", "map_bounds.");
    s.map_bounds.x_max = required_number(b, "x_max", "map_bounds.");
    s.map_bounds.y_max = required_number(b, "y_max", "map_bounds.");
  }
  s.carrier_freq = number_at(j, "carrier_freq", "", s.carrier_freq);
  s.bandwidth = number_at(j, "bandwidth", "", s.bandwidth);
  s.num_rbs = integer_at(j, "num_rbs", "", s.num_rbs);
  s.subcarriers_per_rb = integer_at(j, "subcarriers_per_rb", "", s.subcarriers_per_rb);
  s.noise_figure = number_at(j, "noise_figure", "", s.noise_figure);
  s.tick = number_at(j, "tick", "", s.tick);
  s.report_interval = number_at(j, "report_interval", "", s.report_interval);

  const bool has_pl_ref = j.contains("propagation") && j.at("propagation").contains("pl_ref");
  if (j.contains("propagation")) {
    const auto& p = object_at(j, "propagation", "");
    auto& q = s.propagation;
    q.pl_ref = number_at(p, "pl_ref", "propagation.", q.pl_ref);
    q.pl_exponent = number_at(p, "pl_exponent", "propagation.", q.pl_exponent);
    q.shadow_sigma = number_at(p, "shadow_sigma", "propagation.", q.shadow_sigma);
    q.shadow_corr_dist = number_at(p, "shadow_corr_dist", "propagation.", q.shadow_corr_dist);
    q.max_antenna_gain = number_at(p, "max_antenna_gain", "propagation.", q.max_antenna_gain);
    q.front_back_ratio = number_at(p, "front_back_ratio", "propagation.", q.front_back_ratio);
    q.ue_height = number_at(p, "ue_height", "propagation.", q.ue_height);
  }
  if (!has_pl_ref && s.carrier_freq > 0.0) s.propagation.pl_ref = 32.4 + 20.0 * std::log10(s.carrier_freq);

  if (j.contains("channel")) {
    const auto& c = object_at(j, "channel", "");
    s.channel.tx_ports = integer_at(c, "tx_ports", "channel.", s.channel.tx_ports);
    s.channel.rx_ports = integer_at(c, "rx_ports", "channel.", s.channel.rx_ports);
    s.channel.subcarrier_spacing = number_at(c, "subcarrier_spacing", "channel.", s.channel.subcarrier_spacing);
    s.channel.profile.doppler = number_at(c, "doppler", "channel.", s.channel.profile.doppler);
    if (c.contains("taps")) {
      const auto& taps = array_at(c, "taps", "channel.");
      s.channel.profile.taps.clear();
      for (std::size_t i = 0; i < taps.size(); ++i) {
        const std::string at = "channel.taps[" + std::to_string(i) + "].";
        s.channel.profile.taps.push_back({required_number(taps[i], "delay", at), required_number(taps[i], "power", at)});
      }
    }
  }
  if (j.contains("phy")) {
    const auto& p = object_at(j, "phy", "");
    s.phy.bler_midpoint = number_at(p, "bler_midpoint", "phy.", s.phy.bler_midpoint);
    s.phy.bler_width = number_at(p, "bler_width", "phy.", s.phy.bler_width);
    s.phy.se_cap = number_at(p, "se_cap", "phy.", s.phy.se_cap);
    s.phy.rsrp_threshold = number_at(p, "rsrp_threshold", "phy.", s.phy.rsrp_threshold);
    s.phy.sinr_threshold = number_at(p, "sinr_threshold", "phy.", s.phy.sinr_threshold);
  }
  if (j.contains("service_profiles")) {
    const auto& profiles = array_at(j, "service_profiles", "");
    s.service_profiles.clear();
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      const std::string at = "service_profiles[" + std::to_string(i) + "].";
      const auto& p = profiles[i];
      ServiceProfile sp;
      if (!p.contains("service_type") || !p.at("service_type").is_string()) {
        throw ValidationError(at + "service_type", "expected a string");
      }
      sp.service_type = service_type_from_string(p.at("service_type").get<std::string>(), at + "service_type");
      sp.arrival_rate = number_at(p, "arrival_rate", at, sp.arrival_rate);
      sp.demand = number_at(p, "demand", at, sp.demand);
      sp.session_duration = number_at(p, "session_duration", at, sp.session_duration);
      s.service_profiles.push_back(sp);
    }
  }
  if (!j.contains("sites")) throw ValidationError("sites", "missing required field");
  const auto& sites = array_at(j, "sites", "");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const std::string at = "sites[" + std::to_string(i) + "].";
    const auto& sj = sites[i];
    if (!sj.is_object()) throw ValidationError(at.substr(0, at.size() - 1), "expected an object");
    SiteConfig site;
    site.site_id = integer_at(sj, "site_id", at, static_cast<int>(i));
    if (!sj.contains("position")) throw ValidationError(at + "position", "missing required field");
    const auto& pos = object_at(sj, "position", at);
    site.position = {required_number(pos, "x", at + "position."), required_number(pos, "y", at + "position."),
                     number_at(pos, "height", at + "position.", 25.0)};
    if (!sj.contains("cells")) throw ValidationError(at + "cells", "missing required field");
    const auto& cells = array_at(sj, "cells", at);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cat = at + "cells[" + std::to_string(c) + "].";
      const auto& cj = cells[c];
      if (!cj.is_object()) throw ValidationError(cat.substr(0, cat.size() - 1), "expected an object");
      CellConfig cell;
      if (!cj.contains("cell_id")) throw ValidationError(cat + "cell_id", "missing required field");
      cell.cell_id = integer_at(cj, "cell_id", cat, 0);
      cell.tx_power_per_re = number_at(cj, "tx_power_per_re", cat, cell.tx_power_per_re);
      if (cj.contains("antenna")) cell.antenna = antenna_from_json(cj.at("antenna"), cat + "antenna.");
      site.cells.push_back(cell);
    }
    s.sites.push_back(std::move(site));
  }
  if (j.contains("param_grid")) s.param_grid = param_grid_from_json(j.at("param_grid"), "param_grid");

  validate_scenario(s);
  if (s.param_grid) {
    for (const auto& site : s.sites) {
      for (const auto& c : site.cells) {
        try {
          validate_antenna(c.antenna, *s.param_grid);
        } catch (const OffGridError& e) {
          throw ValidationError("param_grid", std::string("default antenna of cell ") + std::to_string(c.cell_id) +
                                                  " not on grid (" + e.what() + ")");
        }
      }
    }
  }
  out = std::move(s);
}

Scenario load_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
  try {
    return j.get<Scenario>();
  } catch (const json::exception& e) {
    throw ValidationError("scenario", e.what());
  }
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) { return json(s).dump(2); }

}  // namespace netcomb
