#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "netcomb/rng.hpp"
#include "netcomb/scenario.hpp"

namespace netcomb {

enum class MobilityModel { stationary, random_waypoint, attractor };

struct MobilityParams {
  MobilityModel model = MobilityModel::random_waypoint;
  double speed_min = 0.5;  // m/s
  double speed_max = 1.5;
  Point2 attractor_center;
  double attractor_radius = 100.0;
  // Probability that a fresh waypoint (and the initial position) lies in the
  // attractor disk; otherwise the user wanders around its home point.
  double attraction = 1.0;
  double home_radius = 50.0;

  void validate(const Rect& bounds) const;
  bool operator==(const MobilityParams&) const = default;
};

struct ActiveService {
  ServiceType type = ServiceType::full_buffer;
  double remaining_demand = std::numeric_limits<double>::infinity();  // bytes
};

struct UserState {
  int user_id = 0;
  Point2 position;
  Point2 waypoint;
  Point2 home;
  double speed = 0.0;
  std::vector<ActiveService> active_services;

  bool has_demand() const;
  double pending_bytes() const;
  /// Drains `bytes` from services in arrival order; finished finite
  /// services are removed.
  void consume(double bytes);
};

struct ServiceInitiation {
  int user_id = 0;
  ServiceType type = ServiceType::full_buffer;
};

/// Per-tick output of the user emulator: positions (F3) and the service
/// initiations drawn during the tick (F2).
struct UserSnapshot {
  double time = 0.0;
  std::int64_t tick_index = 0;
  std::vector<UserState> users;
  std::vector<ServiceInitiation> initiations;
};

inline constexpr std::size_t kDefaultMaxUsers = 100000;

/// Single-owner user population. Every random draw comes from a stream keyed
/// by (seed, stage, tick, user_id), so adding users never perturbs the
/// trajectories of existing ones.
class Population {
public:
  Population(const Scenario& scenario, std::size_t n, const MobilityParams& mobility, std::uint64_t seed,
             std::size_t max_users = kDefaultMaxUsers);

  /// Advances one tick of `tick` seconds and returns the new snapshot.
  /// With `services` false only positions move; the service streams are
  /// separate, so trajectories are unaffected.
  UserSnapshot step(double tick, bool services = true);
  UserSnapshot snapshot() const;

  const std::vector<UserState>& users() const { return users_; }
  std::vector<UserState>& users() { return users_; }
  std::int64_t tick_index() const { return tick_index_; }
  double time() const { return time_; }
  const MobilityParams& mobility() const { return mobility_; }
  void set_attraction(double attraction);

private:
  Point2 draw_waypoint(const UserState& u, Rng& rng) const;

  Rect bounds_;
  std::vector<ServiceProfile> profiles_;
  MobilityParams mobility_;
  std::uint64_t seed_;
  std::vector<UserState> users_;
  std::vector<ServiceInitiation> last_initiations_;
  std::int64_t tick_index_ = 0;
  double time_ = 0.0;
};

Population init_users(const Scenario& scenario, std::size_t n, const MobilityParams& mobility, std::uint64_t seed);
UserSnapshot step_users(Population& population, double tick);

Point2 clamp_to(const Rect& bounds, Point2 p);

}  // namespace netcomb
