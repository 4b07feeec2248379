#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcomb/error.hpp"

namespace netcomb {

struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1000.0;
  double y_max = 1000.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  bool operator==(const Rect&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  bool operator==(const Point3&) const = default;
};

/// Beam parameters of one cell. Azimuth is a compass bearing (degrees
/// clockwise from +y); downtilt is positive below the horizon.
struct AntennaConfig {
  double h_beamwidth = 65.0;
  double v_beamwidth = 10.0;
  double azimuth = 0.0;
  double downtilt = 6.0;
  bool active = true;
  bool operator==(const AntennaConfig&) const = default;
};

struct CellConfig {
  int cell_id = 0;
  double tx_power_per_re = 18.0;  // dBm
  AntennaConfig antenna;
  bool operator==(const CellConfig&) const = default;
};

struct SiteConfig {
  int site_id = 0;
  Point3 position;
  std::vector<CellConfig> cells;
  bool operator==(const SiteConfig&) const = default;
};

struct PropagationParams {
  double pl_ref = 0.0;  // dB at 1 m; filled from carrier_freq when absent
  double pl_exponent = 3.7;
  double shadow_sigma = 6.0;
  double shadow_corr_dist = 50.0;
  double max_antenna_gain = 8.0;
  double front_back_ratio = 30.0;
  double ue_height = 1.5;
  bool operator==(const PropagationParams&) const = default;
};

struct Tap {
  double delay = 0.0;  // seconds
  double power = 1.0;  // linear
  bool operator==(const Tap&) const = default;
};

/// Tapped-delay-line power profile.
struct TapProfile {
  std::vector<Tap> taps{{0.0, 0.7}, {100e-9, 0.2}, {300e-9, 0.1}};
  double doppler = 0.2;  // Hz
  bool operator==(const TapProfile&) const = default;

  /// Throws ValidationError under `field` when delays are not strictly
  /// increasing and non-negative, or a power is not positive.
  void validate(const std::string& field = "channel.taps") const;
  /// Same taps with powers scaled to sum to one.
  TapProfile normalized() const;
};

struct ChannelParams {
  int tx_ports = 4;
  int rx_ports = 2;
  double subcarrier_spacing = 15e3;  // Hz
  TapProfile profile;
  bool operator==(const ChannelParams&) const = default;
};

struct PhyParams {
  double bler_midpoint = 0.0;   // dB
  double bler_width = 1.0;      // dB
  double se_cap = 7.4;          // bits/s/Hz
  double rsrp_threshold = -110.0;
  double sinr_threshold = -6.0;
  bool operator==(const PhyParams&) const = default;
};

enum class ServiceType { full_buffer, file_download, streaming };

struct ServiceProfile {
  ServiceType service_type = ServiceType::full_buffer;
  double arrival_rate = 0.0;       // initiations / s / user
  double demand = 0.0;             // bytes (file) or bit/s (streaming)
  double session_duration = 60.0;  // s, streaming only
  bool operator==(const ServiceProfile&) const = default;
};

/// Finite sets of permitted antenna values. Construct through `make` so the
/// invariants (non-empty, strictly increasing, legal values) always hold.
class ParamGrid {
public:
  ParamGrid() = default;
  static ParamGrid make(std::vector<double> h_beamwidth, std::vector<double> v_beamwidth,
                        std::vector<double> azimuth, std::vector<double> downtilt);

  const std::vector<double>& h_beamwidth() const { return h_beamwidth_; }
  const std::vector<double>& v_beamwidth() const { return v_beamwidth_; }
  const std::vector<double>& azimuth() const { return azimuth_; }
  const std::vector<double>& downtilt() const { return downtilt_; }
  bool operator==(const ParamGrid&) const = default;

private:
  std::vector<double> h_beamwidth_;
  std::vector<double> v_beamwidth_;
  std::vector<double> azimuth_;
  std::vector<double> downtilt_;
};

struct OffGridParam {
  std::string name;
  double value = 0.0;
  double nearest = 0.0;
};

class OffGridError : public Error {
public:
  explicit OffGridError(std::vector<OffGridParam> params);
  const std::vector<OffGridParam>& params() const noexcept { return params_; }

private:
  std::vector<OffGridParam> params_;
};

/// Position of a cell inside the scenario's site list.
struct CellRef {
  std::size_t site = 0;
  std::size_t cell = 0;
};

struct Scenario {
  Rect map_bounds;
  std::vector<SiteConfig> sites;
  double carrier_freq = 3.5;  // GHz
  double bandwidth = 10.0;    // MHz
  int num_rbs = 52;
  int subcarriers_per_rb = 12;
  double noise_figure = 7.0;  // dB
  PropagationParams propagation;
  ChannelParams channel;
  PhyParams phy;
  std::vector<ServiceProfile> service_profiles{ServiceProfile{}};
  double tick = 1.0;
  double report_interval = 300.0;
  std::optional<ParamGrid> param_grid;

  bool operator==(const Scenario&) const = default;

  int num_re() const { return num_rbs * subcarriers_per_rb; }
  /// Cells flattened in site order; this order is the cell index used by
  /// every per-cell matrix in the platform.
  std::vector<CellRef> cell_refs() const;
  std::size_t num_cells() const;
  const CellConfig& cell(const CellRef& ref) const { return sites[ref.site].cells[ref.cell]; }
  CellConfig& cell(const CellRef& ref) { return sites[ref.site].cells[ref.cell]; }
  /// Flat index of `cell_id`, or nullopt.
  std::optional<std::size_t> cell_index(int cell_id) const;
  std::vector<int> cell_ids() const;
};

double normalize_azimuth(double degrees);

/// Throws ValidationError naming the first offending field.
void validate_scenario(const Scenario& s);

Scenario load_scenario(const std::string& text);
Scenario load_scenario_file(const std::string& path);
std::string serialize_scenario(const Scenario& s);

/// Accept/reject check against the grid; never alters values.
const AntennaConfig& validate_antenna(const AntennaConfig& cfg, const ParamGrid& grid);

/// Grid used when a scenario carries none: the scenario's own antenna
/// values merged with a coarse default lattice.
ParamGrid default_param_grid(const Scenario& s);

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);
void to_json(nlohmann::json& j, const AntennaConfig& a);
/// Parses an antenna object; `path` prefixes field names in errors.
AntennaConfig antenna_from_json(const nlohmann::json& j, const std::string& path,
                                const AntennaConfig& defaults = {});
void to_json(nlohmann::json& j, const ParamGrid& g);
ParamGrid param_grid_from_json(const nlohmann::json& j, const std::string& path);
std::string to_string(ServiceType t);
ServiceType service_type_from_string(const std::string& s, const std::string& path);

}  // namespace netcomb
