#include "netcomb/rl_env.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json_fields.hpp"
#include "netcomb/dataset_store.hpp"
#include "netcomb/wire.hpp"

namespace netcomb {

std::string business_model_id(const Scenario& s) {
  json profiles = json::array();
  for (const auto& p : s.service_profiles) {
    profiles.push_back({{"service_type", to_string(p.service_type)},
                        {"arrival_rate", p.arrival_rate},
                        {"demand", p.demand},
                        {"session_duration", p.session_duration}});
  }
  return "fixed-" + sha256_hex(canonical_json(profiles)).substr(0, 12);
}

EnvState AntennaEnv::reset(const SimRequest& req, std::size_t episode_len, std::uint64_t seed,
                           std::vector<int> optimized_cells) {
  if (episode_len == 0) throw ValidationError("episode_len", "must be at least 1");
  SimRequest r = req;
  r.mode = SimMode::protocol_stack;
  r.seed = seed;
  r.duration = static_cast<double>(episode_len + 1) * req.scenario.tick;
  if (req.scenario.tick != 1.0) throw ValidationError("scenario.tick", "environment steps are 1 s ticks");
  Scenario s = effective_scenario(r);
  check_limits(r, limits_);

  std::sort(optimized_cells.begin(), optimized_cells.end());
  if (std::adjacent_find(optimized_cells.begin(), optimized_cells.end()) != optimized_cells.end()) {
    throw ValidationError("optimized_cells", "duplicate cell_id");
  }
  for (int id : optimized_cells) {
    if (!s.cell_index(id)) throw ValidationError("optimized_cells", "unknown cell_id " + std::to_string(id));
  }
  if (optimized_cells.empty()) optimized_cells = s.cell_ids();

  grid_ = s.param_grid ? *s.param_grid : default_param_grid(s);
  optimized_ = std::move(optimized_cells);
  episode_len_ = episode_len;
  business_model_ = business_model_id(s);
  pipeline_ = std::make_unique<Pipeline>(std::move(s), r.n_users, r.mobility, seed, limits_.max_users);

  state_ = observe(pipeline_->advance(true));
  state_.step_index = 0;
  return state_;
}

const EnvState& AntennaEnv::state() const {
  if (!ready()) throw StateError("environment not reset");
  return state_;
}

void AntennaEnv::validate_action(const Action& action) const {
  if (!ready()) throw StateError("environment not reset");
  for (const auto& [id, cfg] : action) {
    if (!std::binary_search(optimized_.begin(), optimized_.end(), id)) {
      throw ValidationError("action." + std::to_string(id), "cell is not optimized in this environment");
    }
  }
  for (int id : optimized_) {
    if (!action.count(id)) throw ValidationError("action." + std::to_string(id), "missing optimized cell");
  }
  std::vector<OffGridParam> bad;
  for (const auto& [id, cfg] : action) {
    try {
      validate_antenna(cfg, grid_);
    } catch (const OffGridError& e) {
      for (auto p : e.params()) {
        p.name = std::to_string(id) + "." + p.name;
        bad.push_back(std::move(p));
      }
    }
  }
  if (!bad.empty()) throw OffGridError(std::move(bad));
}

StepResult AntennaEnv::step(const Action& action) {
  if (!ready()) throw StateError("environment not reset");
  if (done()) throw StateError("episode finished; reset first");
  validate_action(action);

  for (const auto& [id, cfg] : action) pipeline_->set_antenna(id, cfg);
  auto out = pipeline_->advance(true);
  const std::size_t next = state_.step_index + 1;
  state_ = observe(out);
  state_.step_index = next;

  StepResult r;
  r.state = state_;
  r.indicators = state_.indicators;
  r.done = next == episode_len_;
  json positions = json::array();
  for (const auto& u : out.snapshot.users) positions.push_back({u.user_id, u.position.x, u.position.y});
  r.info = {{"tick_index", out.snapshot.tick_index},
            {"time", out.snapshot.time},
            {"initiations", out.snapshot.initiations.size()},
            {"positions", std::move(positions)}};
  return r;
}

EnvState AntennaEnv::observe(const Pipeline::TickOutput& out) const {
  const Scenario& s = pipeline_->scenario();
  EnvState st;
  for (const auto& site : s.sites) {
    SiteSummary sum{site.site_id, site.position, {}};
    for (const auto& c : site.cells) {
      sum.cell_ids.push_back(c.cell_id);
      st.beams[c.cell_id] = c.antenna;
    }
    st.sites.push_back(std::move(sum));
  }
  st.cell_user_counts.assign(s.num_cells(), 0);
  for (const auto& m : out.measurements) {
    if (m.has_serving()) ++st.cell_user_counts[static_cast<std::size_t>(m.serving_index)];
  }
  const Rect& b = s.map_bounds;
  auto bucket = [](double v, double lo, double span) {
    const auto i = static_cast<std::ptrdiff_t>(std::floor((v - lo) / span * kHistogramSide));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, kHistogramSide - 1));
  };
  for (const auto& u : out.snapshot.users) {
    const auto ix = bucket(u.position.x, b.x_min, b.width());
    const auto iy = bucket(u.position.y, b.y_min, b.height());
    ++st.user_histogram[iy * kHistogramSide + ix];
  }
  st.business_model = business_model_;
  st.indicators = *out.indicators;
  return st;
}

double default_reward(const PerfIndicators& ind, double w_cov, double w_rate, double rate_norm) {
  if (w_cov < 0.0) throw ValidationError("w_cov", "must be non-negative");
  if (w_rate < 0.0) throw ValidationError("w_rate", "must be non-negative");
  if (!(rate_norm > 0.0)) throw ValidationError("rate_norm", "must be positive");
  return w_cov * ind.coverage_ratio + w_rate * (ind.mean_user_rate / rate_norm);
}

void to_json(json& j, const SiteSummary& s) {
  j = {{"site_id", s.site_id}, {"position", {s.position.x, s.position.y, s.position.z}}, {"cell_ids", s.cell_ids}};
}

json action_to_json(const Action& a) {
  json j = json::object();
  for (const auto& [id, cfg] : a) j[std::to_string(id)] = cfg;
  return j;
}

void to_json(json& j, const EnvState& s) {
  j = {{"step_index", s.step_index},
       {"sites", s.sites},
       {"beams", action_to_json(s.beams)},
       {"cell_user_counts", s.cell_user_counts},
       {"user_histogram", s.user_histogram},
       {"histogram_side", kHistogramSide},
       {"business_model", s.business_model},
       {"indicators", s.indicators}};
}

void to_json(json& j, const StepResult& r) {
  j = {{"state", r.state}, {"indicators", r.indicators}, {"done", r.done}, {"info", r.info}};
}

Action action_from_json(const json& j, const std::string& path, const Action& current) {
  require_object(j, path);
  Action a;
  for (const auto& [key, value] : j.items()) {
    std::size_t used = 0;
    int id = 0;
    try {
      id = std::stoi(key, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != key.size() || key.empty()) throw ValidationError(path + "." + key, "cell key must be an integer");
    const auto it = current.find(id);
    a[id] = antenna_from_json(value, path + "." + key, it == current.end() ? AntennaConfig{} : it->second);
  }
  return a;
}

}  // namespace netcomb
