#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "netcomb/combined.hpp"
#include "test_support.hpp"

using namespace netcomb;

namespace {

SimRequest small_request(SimMode mode, std::size_t users, double duration) {
  SimRequest r;
  r.mode = mode;
  r.scenario = testing::multi_cell_scenario(1, 3);
  r.scenario.num_rbs = 6;
  r.n_users = users;
  r.duration = duration;
  r.seed = 17;
  return r;
}

}  // namespace

TEST_CASE("series length follows duration") {
  auto r = small_request(SimMode::protocol_stack, 4, 3.0);
  const auto res = run_protocol_stack(r);
  CHECK(res.protocol.size() == 3);
  CHECK(res.coverage.empty());
  CHECK_FALSE(res.link.has_value());
  CHECK(res.protocol.back().tick_index == 3);
}

TEST_CASE("identical requests give identical results") {
  for (auto mode : {SimMode::protocol_stack, SimMode::coverage, SimMode::link_channel}) {
    auto r = small_request(mode, 3, 2.0);
    CHECK(run_simulation(r) == run_simulation(r));
  }
}

TEST_CASE("protocol stack matches a hand-stepped pipeline") {
  Scenario s = testing::multi_cell_scenario(1, 2);
  s.num_rbs = 5;
  SimRequest r;
  r.mode = SimMode::protocol_stack;
  r.scenario = s;
  r.n_users = 2;
  r.duration = 1.0;
  r.seed = 99;
  const auto res = run_protocol_stack(r);
  REQUIRE(res.protocol.size() == 1);

  Population pop(s, 2, r.mobility, r.seed);
  ShadowingField shadow(s, r.seed);
  auto small = draw_small_scale(s, {0, 1}, r.seed);
  const auto snap = pop.step(s.tick);
  const auto ls = build_large_scale(s, snap, shadow);
  small.advance(snap.tick_index, s.tick);
  auto grid = apply_large_scale(ls, freq_response(small, s));
  const auto m = measure(grid, s);
  const auto ind = schedule_and_aggregate(m, pop.users(), s, s.tick, snap.tick_index, snap.time);

  CHECK(res.protocol[0] == ind);
}

TEST_CASE("coverage is a projection of the protocol stack") {
  auto p = small_request(SimMode::protocol_stack, 12, 4.0);
  auto c = p;
  c.mode = SimMode::coverage;
  const auto rp = run_simulation(p);
  const auto rc = run_simulation(c);
  REQUIRE(rp.protocol.size() == rc.coverage.size());
  for (std::size_t t = 0; t < rp.protocol.size(); ++t) {
    REQUIRE(rp.protocol[t].users.size() == rc.coverage[t].users.size());
    for (std::size_t u = 0; u < rc.coverage[t].users.size(); ++u) {
      CHECK(rp.protocol[t].users[u].link.rsrp == rc.coverage[t].users[u].rsrp);
      CHECK(rp.protocol[t].users[u].link.sinr == rc.coverage[t].users[u].sinr);
      CHECK(rp.protocol[t].users[u].link.serving_cell == rc.coverage[t].users[u].serving_cell);
    }
    CHECK(rp.protocol[t].coverage_ratio == rc.coverage[t].coverage_ratio);
  }
}

TEST_CASE("all beams inactive gives zero coverage") {
  auto r = small_request(SimMode::coverage, 6, 3.0);
  for (int id : r.scenario.cell_ids()) {
    AntennaConfig a;
    a.active = false;
    r.antenna_overrides[id] = a;
  }
  for (const auto& t : run_coverage(r).coverage) CHECK(t.coverage_ratio == 0.0);
}

TEST_CASE("link export shape for one link") {
  SimRequest r;
  r.mode = SimMode::link_channel;
  r.scenario = testing::single_cell_scenario();
  r.n_users = 1;
  r.duration = 1.0;
  const auto res = run_link_channel(r);
  REQUIRE(res.link);
  CHECK(res.link->shape.num_samples == 1);
  CHECK(res.link->shape.num_re == 624);
  CHECK(res.link->shape.tx_ports == 4);
  CHECK(res.link->shape.rx_ports == 2);
  CHECK(res.link->payload.size() == kExportHeaderSize + 624 * 4 * 2 * 8);
  CHECK(run_link_channel(r).link->payload == res.link->payload);
}

TEST_CASE("exported energy follows coupling loss") {
  auto r = small_request(SimMode::link_channel, 3, 2.0);
  r.scenario.sites[0].cells[1].antenna.active = false;
  const auto res = run_link_channel(r);
  const auto dec = decode_export(res.link->payload);
  REQUIRE(dec.shape.num_samples == res.link->samples.size());
  for (std::size_t i = 0; i < res.link->samples.size(); ++i) {
    const auto& info = res.link->samples[i];
    double e = 0.0;
    for (const auto& h : dec.sample(i)) e += std::norm(std::complex<double>(h));
    const double per = e / (static_cast<double>(dec.shape.num_re) * dec.shape.tx_ports * dec.shape.rx_ports);
    if (!info.usable) {
      CHECK(per == 0.0);
      continue;
    }
    const double expected = info.small_scale_energy * std::pow(10.0, -info.coupling_loss / 10.0);
    CHECK(per == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("link filters select a subset") {
  auto r = small_request(SimMode::link_channel, 3, 1.0);
  r.link_users = {1};
  r.link_cells = {2, 3};
  const auto res = run_link_channel(r);
  REQUIRE(res.link->samples.size() == 2);
  CHECK(res.link->samples[0].user_id == 1);
  CHECK(res.link->samples[1].cell_id == 3);
}

TEST_CASE("metadata echoes the request and input is untouched") {
  auto r = small_request(SimMode::coverage, 2, 2.0);
  r.antenna_overrides[1] = AntennaConfig{60.0, 10.0, 90.0, 4.0, true};
  const auto before = r.scenario;
  const auto res = run_simulation(r);
  CHECK(res.metadata.seed == r.seed);
  CHECK(res.metadata.mode == r.mode);
  CHECK(res.metadata.duration == r.duration);
  CHECK(res.metadata.num_ticks == 2);
  CHECK(res.metadata.version == std::string(kVersion));
  CHECK(r.scenario == before);
}

TEST_CASE("request validation") {
  auto r = small_request(SimMode::protocol_stack, 2, 2.5);
  CHECK_THROWS_AS(run_simulation(r), ValidationError);
  r.duration = 0.0;
  CHECK_THROWS_AS(run_simulation(r), ValidationError);
  r.duration = 1.0;
  r.antenna_overrides[404] = AntennaConfig{};
  try {
    run_simulation(r);
    FAIL("expected throw");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "antenna_overrides");
  }
  r.antenna_overrides.clear();
  CHECK_THROWS_AS(run_coverage(r), ValidationError);
}

TEST_CASE("resource guard") {
  auto r = small_request(SimMode::protocol_stack, 50, 10.0);
  ResourceLimits lim;
  lim.max_link_ticks = 100;
  CHECK_THROWS_AS(run_simulation(r, lim), ResourceGuardError);
  lim = {};
  lim.max_users = 10;
  CHECK_THROWS_AS(run_simulation(r, lim), ResourceGuardError);
  r.mode = SimMode::link_channel;
  lim = {};
  lim.max_export_bytes = 1e6;
  CHECK_THROWS_AS(run_simulation(r, lim), ResourceGuardError);
}

TEST_CASE("progress callback can cancel") {
  auto r = small_request(SimMode::coverage, 2, 5.0);
  std::size_t seen = 0;
  CHECK_THROWS_AS(run_simulation(r, {}, [&](std::size_t done, std::size_t) { seen = done; return done < 2; }),
                  StateError);
  CHECK(seen == 2);
}

TEST_CASE("coverage skips services and scheduling without moving users") {
  Scenario s = testing::multi_cell_scenario(1, 3);
  s.num_rbs = 2;
  s.service_profiles.push_back({ServiceType::file_download, 3.0, 2e4, 60.0});
  Pipeline full(s, 20, {}, 8);
  Pipeline cov(s, 20, {}, 8);
  for (int t = 0; t < 4; ++t) {
    const auto a = full.advance(true);
    const auto b = cov.advance(false);
    CHECK(a.indicators.has_value());
    CHECK_FALSE(b.indicators.has_value());
    CHECK_FALSE(a.snapshot.initiations.empty());
    CHECK(b.snapshot.initiations.empty());
    CHECK(a.measurements == b.measurements);
    for (std::size_t u = 0; u < 20; ++u) CHECK(a.snapshot.users[u].position == b.snapshot.users[u].position);
  }
}

TEST_CASE("coverage and protocol runtimes") {
  auto p = small_request(SimMode::protocol_stack, 100, 3.0);
  p.scenario = testing::multi_cell_scenario(3, 3);
  p.scenario.num_rbs = 6;
  auto c = p;
  c.mode = SimMode::coverage;
  auto once = [](const SimRequest& r) {
    const auto t0 = std::chrono::steady_clock::now();
    run_simulation(r);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  double tp = 1e9;
  double tc = 1e9;
  for (int i = 0; i < 5; ++i) {
    tp = std::min(tp, once(p));
    tc = std::min(tc, once(c));
  }
  // Both are dominated by RE-grid synthesis; the saving is a percent or two
  // and within timing noise, so this is reported rather than asserted.
  MESSAGE("protocol " << tp << " s, coverage " << tc << " s");
}
