#include "netcomb/user_emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "netcomb/rng.hpp"

namespace netcomb {

namespace {

Point2 uniform_in_rect(const Rect& b, Rng& rng) {
  const double x = rng.uniform(b.x_min, b.x_max);
  const double y = rng.uniform(b.y_min, b.y_max);
  return {x, y};
}

// Uniform over disk ∩ bounds by rejection; clamps after repeated misses.
Point2 uniform_in_disk(const Rect& b, Point2 center, double radius, Rng& rng) {
  Point2 p = center;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double r = radius * std::sqrt(rng.uniform());
    const double theta = 2.0 * std::numbers::pi * rng.uniform();
    p = {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
    if (b.contains(p.x, p.y)) return p;
  }
  return clamp_to(b, p);
}

double distance(Point2 a, Point2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

}  // namespace

void MobilityParams::validate(const Rect& bounds) const {
  if (!(speed_min >= 0.0)) throw ValidationError("mobility.speed_range", "speeds must be non-negative");
  if (!(speed_min <= speed_max)) throw ValidationError("mobility.speed_range", "min must not exceed max");
  if (model == MobilityModel::attractor) {
    if (!(attractor_radius > 0.0)) throw ValidationError("mobility.attractor_radius", "must be positive");
    if (!bounds.contains(attractor_center.x, attractor_center.y)) {
      throw ValidationError("mobility.attractor_center", "outside map_bounds");
    }
    if (!(attraction >= 0.0 && attraction <= 1.0)) throw ValidationError("mobility.attraction", "must be in [0, 1]");
    if (!(home_radius >= 0.0)) throw ValidationError("mobility.home_radius", "must be non-negative");
  }
}

bool UserState::has_demand() const {
  return std::any_of(active_services.begin(), active_services.end(),
                     [](const ActiveService& s) { return s.remaining_demand > 0.0; });
}

double UserState::pending_bytes() const {
  double total = 0.0;
  for (const auto& s : active_services) total += s.remaining_demand;
  return total;
}

void UserState::consume(double bytes) {
  for (auto& s : active_services) {
    if (bytes <= 0.0) break;
    if (std::isinf(s.remaining_demand)) return;
    const double take = std::min(bytes, s.remaining_demand);
    s.remaining_demand -= take;
    bytes -= take;
  }
  std::erase_if(active_services, [](const ActiveService& s) { return s.remaining_demand <= 0.0; });
}

Point2 clamp_to(const Rect& b, Point2 p) {
  return {std::clamp(p.x, b.x_min, b.x_max), std::clamp(p.y, b.y_min, b.y_max)};
}

Population::Population(const Scenario& scenario, std::size_t n, const MobilityParams& mobility, std::uint64_t seed,
                       std::size_t max_users)
    : bounds_(scenario.map_bounds), profiles_(scenario.service_profiles), mobility_(mobility), seed_(seed) {
  if (n > max_users) {
    throw ResourceGuardError("user count " + std::to_string(n) + " exceeds cap " + std::to_string(max_users),
                             static_cast<double>(n), static_cast<double>(max_users));
  }
  mobility_.validate(bounds_);
  const bool full_buffer = std::any_of(profiles_.begin(), profiles_.end(), [](const ServiceProfile& p) {
    return p.service_type == ServiceType::full_buffer;
  });
  users_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    UserState u;
    u.user_id = static_cast<int>(i);
    Rng rng(seed_, Stage::population, {i});
    u.home = uniform_in_rect(bounds_, rng);
    if (mobility_.model == MobilityModel::attractor) {
      u.position = rng.uniform() < mobility_.attraction
                       ? uniform_in_disk(bounds_, mobility_.attractor_center, mobility_.attractor_radius, rng)
                       : u.home;
    } else {
      u.position = u.home;
    }
    u.speed = rng.uniform(mobility_.speed_min, mobility_.speed_max);
    u.waypoint = mobility_.model == MobilityModel::stationary ? u.position : draw_waypoint(u, rng);
    if (full_buffer) u.active_services.push_back({ServiceType::full_buffer, std::numeric_limits<double>::infinity()});
    users_.push_back(std::move(u));
  }
}

Point2 Population::draw_waypoint(const UserState& u, Rng& rng) const {
  switch (mobility_.model) {
    case MobilityModel::stationary:
      return u.position;
    case MobilityModel::random_waypoint:
      return uniform_in_rect(bounds_, rng);
    case MobilityModel::attractor:
      if (rng.uniform() < mobility_.attraction) {
        return uniform_in_disk(bounds_, mobility_.attractor_center, mobility_.attractor_radius, rng);
      }
      return uniform_in_disk(bounds_, u.home, std::max(mobility_.home_radius, 1e-9), rng);
  }
  return u.position;
}

void Population::set_attraction(double attraction) {
  if (!(attraction >= 0.0 && attraction <= 1.0)) throw ValidationError("mobility.attraction", "must be in [0, 1]");
  mobility_.attraction = attraction;
}

UserSnapshot Population::step(double tick, bool services_on) {
  ++tick_index_;
  time_ = static_cast<double>(tick_index_) * tick;
  last_initiations_.clear();
  const auto t = static_cast<std::uint64_t>(tick_index_);
  for (auto& u : users_) {
    const auto id = static_cast<std::uint64_t>(u.user_id);
    if (mobility_.model != MobilityModel::stationary) {
      Rng rng(seed_, Stage::mobility, {t, id});
      const double reach = u.speed * tick;
      const double remaining = distance(u.position, u.waypoint);
      if (remaining <= reach) {
        u.position = u.waypoint;
        u.waypoint = draw_waypoint(u, rng);
        u.speed = rng.uniform(mobility_.speed_min, mobility_.speed_max);
      } else {
        const double f = reach / remaining;
        u.position = {u.position.x + f * (u.waypoint.x - u.position.x),
                      u.position.y + f * (u.waypoint.y - u.position.y)};
      }
      u.position = clamp_to(bounds_, u.position);
    }
    if (!services_on) continue;
    Rng services(seed_, Stage::services, {t, id});
    for (const auto& p : profiles_) {
      const std::uint32_t count = services.poisson(p.arrival_rate * tick);
      for (std::uint32_t k = 0; k < count; ++k) {
        last_initiations_.push_back({u.user_id, p.service_type});
        switch (p.service_type) {
          case ServiceType::full_buffer:
            break;
          case ServiceType::file_download:
            u.active_services.push_back({p.service_type, p.demand});
            break;
          case ServiceType::streaming:
            u.active_services.push_back({p.service_type, p.demand * p.session_duration / 8.0});
            break;
        }
      }
    }
  }
  return snapshot();
}

UserSnapshot Population::snapshot() const {
  return UserSnapshot{time_, tick_index_, users_, last_initiations_};
}

Population init_users(const Scenario& scenario, std::size_t n, const MobilityParams& mobility, std::uint64_t seed) {
  return Population(scenario, n, mobility, seed);
}

UserSnapshot step_users(Population& population, double tick) { return population.step(tick); }

}  // namespace netcomb
