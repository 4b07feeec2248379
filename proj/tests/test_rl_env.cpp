#include <doctest.h>

#include <numeric>

#include "netcomb/rl_env.hpp"
#include "netcomb/rng.hpp"
#include "netcomb/wire.hpp"
#include "test_support.hpp"

using namespace netcomb;

namespace {

SimRequest env_request(std::size_t users = 8) {
  SimRequest r;
  r.scenario = testing::multi_cell_scenario(1, 3);
  r.scenario.num_rbs = 6;
  r.n_users = users;
  return r;
}

Action identity(const AntennaEnv& env) {
  Action a;
  for (int id : env.optimized_cells()) a[id] = env.state().beams.at(id);
  return a;
}

Action random_action(const AntennaEnv& env, Rng& rng) {
  const auto& g = env.grid();
  auto pick = [&](const std::vector<double>& v) { return v[rng.next_u64() % v.size()]; };
  Action a;
  for (int id : env.optimized_cells()) {
    a[id] = {pick(g.h_beamwidth()), pick(g.v_beamwidth()), pick(g.azimuth()), pick(g.downtilt()),
             rng.next_u64() % 4 != 0};
  }
  return a;
}

}  // namespace

TEST_CASE("reset is deterministic and starts from scenario defaults") {
  const auto req = env_request();
  AntennaEnv a;
  AntennaEnv b;
  const auto sa = a.reset(req, 5, 3);
  CHECK(sa == b.reset(req, 5, 3));
  CHECK(sa == a.reset(req, 5, 3));
  CHECK(sa.step_index == 0);
  CHECK(sa.indicators.tick_index == 1);
  for (const auto& site : req.scenario.sites)
    for (const auto& c : site.cells) CHECK(sa.beams.at(c.cell_id) == c.antenna);
  AntennaEnv c;
  CHECK(c.reset(req, 5, 4).indicators != sa.indicators);
}

TEST_CASE("reset preconditions") {
  AntennaEnv env;
  CHECK_THROWS_AS(env.reset(env_request(), 0, 1), ValidationError);
  auto req = env_request();
  req.scenario.tick = 0.5;
  try {
    env.reset(req, 3, 1);
    FAIL("expected throw");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "scenario.tick");
  }
  CHECK_THROWS_AS(env.reset(env_request(), 3, 1, {99}), ValidationError);
  CHECK_FALSE(env.ready());
  CHECK_THROWS_AS(env.step({}), StateError);
}

TEST_CASE("episode ends after episode_len steps") {
  AntennaEnv env;
  env.reset(env_request(), 3, 1);
  for (int i = 1; i <= 3; ++i) {
    const auto r = env.step(identity(env));
    CHECK(r.state.step_index == static_cast<std::size_t>(i));
    CHECK(r.done == (i == 3));
  }
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(identity(env)), StateError);
  env.reset(env_request(), 3, 1);
  CHECK_FALSE(env.done());
}

TEST_CASE("each step is one 1 s tick") {
  AntennaEnv env;
  auto prev = env.reset(env_request(), 6, 2).indicators;
  for (int i = 0; i < 6; ++i) {
    const auto r = env.step(identity(env));
    CHECK(r.indicators.tick_index == prev.tick_index + 1);
    CHECK(r.indicators.time == doctest::Approx(prev.time + 1.0));
    CHECK(r.indicators == r.state.indicators);
    prev = r.indicators;
  }
}

TEST_CASE("identity actions reproduce the protocol-stack series exactly") {
  auto req = env_request();
  req.seed = 11;
  req.duration = 5.0;
  const auto series = run_protocol_stack(req).protocol;
  AntennaEnv env;
  CHECK(env.reset(req, 4, 11).indicators == series[0]);
  for (std::size_t k = 1; k < series.size(); ++k) CHECK(env.step(identity(env)).indicators == series[k]);
}

TEST_CASE("off-grid action is rejected without mutation") {
  AntennaEnv env;
  AntennaEnv twin;
  env.reset(env_request(), 4, 5);
  twin.reset(env_request(), 4, 5);
  env.step(identity(env));
  twin.step(identity(twin));

  auto bad = identity(env);
  bad.begin()->second.downtilt = 7.3;
  bad.rbegin()->second.h_beamwidth = 61.0;
  const auto before = env.state();
  try {
    env.step(bad);
    FAIL("expected throw");
  } catch (const OffGridError& e) {
    REQUIRE(e.params().size() == 2);
    CHECK(e.params()[0].name == std::to_string(bad.begin()->first) + ".downtilt");
    CHECK(e.params()[0].nearest == 8.0);
    CHECK(e.params()[1].name == std::to_string(bad.rbegin()->first) + ".h_beamwidth");
  }
  CHECK(env.state() == before);

  auto missing = identity(env);
  missing.erase(missing.begin());
  CHECK_THROWS_AS(env.step(missing), ValidationError);
  auto extra = identity(env);
  extra[77] = AntennaConfig{};
  CHECK_THROWS_AS(env.step(extra), ValidationError);
  CHECK(env.state() == before);

  // The rejected calls must not perturb the rest of the trajectory.
  for (int i = 0; i < 3; ++i) CHECK(env.step(identity(env)) == twin.step(identity(twin)));
}

TEST_CASE("all-inactive action silences the network") {
  AntennaEnv env;
  env.reset(env_request(12), 3, 7);
  Action off = identity(env);
  for (auto& [id, cfg] : off) cfg.active = false;
  for (int i = 0; i < 3; ++i) {
    const auto r = env.step(off);
    CHECK(r.indicators.coverage_ratio == 0.0);
    for (const auto& c : r.indicators.cells) CHECK(c.total_dl_traffic == 0.0);
    for (const auto& u : r.indicators.users) CHECK(u.served_bits == 0.0);
    for (const auto& [id, cfg] : r.state.beams) CHECK_FALSE(cfg.active);
  }
}

TEST_CASE("50-step episodes reproduce under the same seed and actions") {
  auto run = [](std::uint64_t seed) {
    AntennaEnv env;
    env.reset(env_request(10), 50, seed);
    Rng rng(seed, Stage::event, {42});
    std::vector<StepResult> out;
    while (!env.done()) {
      const auto a = random_action(env, rng);
      out.push_back(env.step(a));
      CHECK(out.back().state.beams == a);  // beam config equals the applied action
    }
    return out;
  };
  const auto a = run(9);
  CHECK(a.size() == 50);
  CHECK(a == run(9));
  CHECK(a != run(10));
}

TEST_CASE("optimized subset") {
  auto req = env_request();
  const auto ids = req.scenario.cell_ids();
  AntennaEnv env;
  env.reset(req, 2, 1, {ids[1]});
  CHECK(env.optimized_cells() == std::vector<int>{ids[1]});
  Action a{{ids[1], env.state().beams.at(ids[1])}};
  a[ids[1]].downtilt = 10.0;
  const auto r = env.step(a);
  CHECK(r.state.beams.at(ids[1]).downtilt == 10.0);
  CHECK(r.state.beams.at(ids[0]) == req.scenario.sites[0].cells[0].antenna);
  a[ids[0]] = r.state.beams.at(ids[0]);
  CHECK_THROWS_AS(env.step(a), ValidationError);
}

TEST_CASE("state summaries") {
  AntennaEnv env;
  const auto s = env.reset(env_request(20), 2, 3);
  CHECK(std::accumulate(s.user_histogram.begin(), s.user_histogram.end(), 0) == 20);
  CHECK(std::accumulate(s.cell_user_counts.begin(), s.cell_user_counts.end(), 0) <= 20);
  CHECK(s.sites.size() == 1);
  CHECK(s.sites[0].cell_ids.size() == 3);
  CHECK(s.business_model.rfind("fixed-", 0) == 0);
  auto other = env_request(20);
  other.scenario.service_profiles[0].arrival_rate = 0.5;
  CHECK(business_model_id(other.scenario) != s.business_model);
  const nlohmann::json j = s;
  CHECK(j.at("user_histogram").size() == 64);
  CHECK(j.at("beams").size() == 3);
  CHECK(j.at("indicators").at("tick_index") == 1);
}

TEST_CASE("default reward") {
  PerfIndicators ind;
  ind.coverage_ratio = 1.0;
  ind.mean_user_rate = 2e6;
  CHECK(default_reward(ind, 0.0, 0.0, 1e6) == 0.0);
  ind.mean_user_rate = 1e6;
  CHECK(default_reward(ind, 1.0, 1.0, 1e6) == 2.0);
  double last = -1.0;
  for (double cov = 0.0; cov <= 1.0; cov += 0.1) {
    ind.coverage_ratio = cov;
    const double r = default_reward(ind, 0.7, 0.3, 1e6);
    CHECK(r >= last);
    last = r;
  }
  CHECK_THROWS_AS(default_reward(ind, -1.0, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(default_reward(ind, 1.0, 1.0, 0.0), ValidationError);
}

TEST_CASE("action json") {
  Action current{{1, AntennaConfig{}}};
  const auto a = action_from_json({{"1", {{"downtilt", 10.0}}}}, "action", current);
  CHECK(a.at(1).downtilt == 10.0);
  CHECK(a.at(1).h_beamwidth == 65.0);
  CHECK(action_from_json(action_to_json(a), "action") == a);
  try {
    action_from_json({{"x1", nlohmann::json::object()}}, "action");
    FAIL("expected throw");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "action.x1");
  }
}
