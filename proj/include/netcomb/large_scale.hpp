#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <vector>

#include "netcomb/scenario.hpp"
#include "netcomb/user_emulator.hpp"

namespace netcomb {

/// Attenuation (dB, ≥ 0) of the two-plane parabolic pattern for offsets
/// from boresight. Saturates at `front_back_ratio`.
double antenna_attenuation(double azimuth_offset, double elevation_offset, double h_beamwidth, double v_beamwidth,
                           double front_back_ratio);

/// Gain (dBi) toward a user seen at compass bearing `azimuth` and elevation
/// `elevation` (degrees, negative below the horizon). Inactive beams return
/// -infinity.
double antenna_gain(const AntennaConfig& cfg, const PropagationParams& p, double azimuth, double elevation);

/// Log-distance path loss in dB; distances under 1 m are clamped to 1 m.
double path_loss(double distance_3d, const PropagationParams& p);

struct LinkGeometry {
  double distance_2d = 0.0;
  double distance_3d = 0.0;
  double bearing = 0.0;    // compass degrees, site -> user
  double elevation = 0.0;  // degrees, negative below horizon
};

LinkGeometry link_geometry(const Point3& site, Point2 user, double ue_height);

/// Spatially correlated log-normal shadowing, one independent field per
/// cell. Each field is a sum of random plane waves whose wave vectors follow
/// the spectrum of the 2-D exponential covariance, so
/// E[s(x) s(x+d)] = sigma^2 * exp(-|d| / corr_dist) holds exactly in
/// expectation over seeds and the sampler is a pure function of position.
class ShadowingField {
public:
  static constexpr int kDefaultComponents = 64;

  ShadowingField(const Scenario& scenario, std::uint64_t seed, int components = kDefaultComponents);
  ShadowingField(const std::vector<int>& cell_ids, double sigma, double corr_dist, std::uint64_t seed,
                 int components = kDefaultComponents);

  /// Shadowing in dB at `pos` for `cell_id`. Unknown cells sample 0.
  double sample(Point2 pos, int cell_id) const;
  double operator()(Point2 pos, int cell_id) const { return sample(pos, cell_id); }

private:
  struct Wave {
    double kx;
    double ky;
    double phase;
  };
  void build(const std::vector<int>& cell_ids, std::uint64_t seed, int components);

  double sigma_;
  double corr_dist_;
  double amplitude_ = 0.0;
  std::map<int, std::vector<Wave>> waves_;
};

/// Coupling loss per (user, cell) for one snapshot (interface F1). Rows are
/// users in snapshot order, columns cells in `Scenario::cell_refs()` order.
/// Entries for inactive cells stay finite (path loss + shadowing) and are
/// marked unusable.
struct LargeScaleModel {
  double time = 0.0;
  std::size_t num_users = 0;
  std::size_t num_cells = 0;
  std::vector<int> user_ids;
  std::vector<int> cell_ids;
  std::vector<double> coupling_loss;
  std::vector<std::uint8_t> usable;

  double loss(std::size_t u, std::size_t c) const { return coupling_loss[u * num_cells + c]; }
  bool is_usable(std::size_t u, std::size_t c) const { return usable[u * num_cells + c] != 0; }
};

LargeScaleModel build_large_scale(const Scenario& scenario, const UserSnapshot& snapshot,
                                  const ShadowingField& shadowing);

}  // namespace netcomb
