#include "netcomb/large_scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "netcomb/rng.hpp"

namespace netcomb {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;

double wrap_degrees(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  return a - 180.0;
}
}  // namespace

double antenna_attenuation(double azimuth_offset, double elevation_offset, double h_beamwidth, double v_beamwidth,
                           double front_back_ratio) {
  const double h = std::min(12.0 * std::pow(azimuth_offset / h_beamwidth, 2.0), front_back_ratio);
  const double v = std::min(12.0 * std::pow(elevation_offset / v_beamwidth, 2.0), front_back_ratio);
  return std::min(h + v, front_back_ratio);
}

double antenna_gain(const AntennaConfig& cfg, const PropagationParams& p, double azimuth, double elevation) {
  if (!cfg.active) return -std::numeric_limits<double>::infinity();
  const double d_az = wrap_degrees(azimuth - cfg.azimuth);
  const double d_el = elevation + cfg.downtilt;
  return p.max_antenna_gain - antenna_attenuation(d_az, d_el, cfg.h_beamwidth, cfg.v_beamwidth, p.front_back_ratio);
}

double path_loss(double distance_3d, const PropagationParams& p) {
  const double d = std::max(distance_3d, 1.0);
  return p.pl_ref + 10.0 * p.pl_exponent * std::log10(d);
}

LinkGeometry link_geometry(const Point3& site, Point2 user, double ue_height) {
  LinkGeometry g;
  const double dx = user.x - site.x;
  const double dy = user.y - site.y;
  const double dz = ue_height - site.z;
  g.distance_2d = std::hypot(dx, dy);
  g.distance_3d = std::sqrt(g.distance_2d * g.distance_2d + dz * dz);
  g.bearing = normalize_azimuth(std::atan2(dx, dy) / kDeg);
  g.elevation = std::atan2(dz, g.distance_2d) / kDeg;
  return g;
}

ShadowingField::ShadowingField(const Scenario& scenario, std::uint64_t seed, int components)
    : sigma_(scenario.propagation.shadow_sigma), corr_dist_(scenario.propagation.shadow_corr_dist) {
  build(scenario.cell_ids(), seed, components);
}

ShadowingField::ShadowingField(const std::vector<int>& cell_ids, double sigma, double corr_dist, std::uint64_t seed,
                               int components)
    : sigma_(sigma), corr_dist_(corr_dist) {
  build(cell_ids, seed, components);
}

void ShadowingField::build(const std::vector<int>& cell_ids, std::uint64_t seed, int components) {
  if (sigma_ <= 0.0) return;
  amplitude_ = sigma_ * std::sqrt(2.0 / components);
  for (int id : cell_ids) {
    Rng rng(seed, Stage::shadowing, {static_cast<std::uint64_t>(static_cast<std::int64_t>(id))});
    std::vector<Wave> waves;
    waves.reserve(static_cast<std::size_t>(components));
    for (int m = 0; m < components; ++m) {
      // Radial CDF of the exponential-covariance spectrum:
      // F(k) = 1 - (1 + L^2 k^2)^(-1/2).
      const double u = rng.uniform();
      const double k = std::sqrt(1.0 / ((1.0 - u) * (1.0 - u)) - 1.0) / corr_dist_;
      const double dir = 2.0 * std::numbers::pi * rng.uniform();
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      waves.push_back({k * std::cos(dir), k * std::sin(dir), phase});
    }
    waves_.emplace(id, std::move(waves));
  }
}

double ShadowingField::sample(Point2 pos, int cell_id) const {
  if (sigma_ <= 0.0) return 0.0;
  const auto it = waves_.find(cell_id);
  if (it == waves_.end()) return 0.0;
  double acc = 0.0;
  for (const auto& w : it->second) acc += std::cos(w.kx * pos.x + w.ky * pos.y + w.phase);
  return amplitude_ * acc;
}

LargeScaleModel build_large_scale(const Scenario& scenario, const UserSnapshot& snapshot,
                                  const ShadowingField& shadowing) {
  LargeScaleModel m;
  m.time = snapshot.time;
  m.num_users = snapshot.users.size();
  m.num_cells = scenario.num_cells();
  m.cell_ids = scenario.cell_ids();
  m.coupling_loss.resize(m.num_users * m.num_cells);
  m.usable.resize(m.num_users * m.num_cells);
  const auto refs = scenario.cell_refs();
  const auto& prop = scenario.propagation;
  for (std::size_t u = 0; u < m.num_users; ++u) {
    const auto& user = snapshot.users[u];
    m.user_ids.push_back(user.user_id);
    for (std::size_t c = 0; c < m.num_cells; ++c) {
      const auto& site = scenario.sites[refs[c].site];
      const auto& cell = scenario.cell(refs[c]);
      const auto geo = link_geometry(site.position, user.position, prop.ue_height);
      const double base = path_loss(geo.distance_3d, prop) + shadowing.sample(user.position, cell.cell_id);
      const std::size_t idx = u * m.num_cells + c;
      if (cell.antenna.active) {
        m.coupling_loss[idx] = base - antenna_gain(cell.antenna, prop, geo.bearing, geo.elevation);
        m.usable[idx] = 1;
      } else {
        m.coupling_loss[idx] = base;
        m.usable[idx] = 0;
      }
    }
  }
  return m;
}

}  // namespace netcomb
