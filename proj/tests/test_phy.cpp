#include <doctest.h>

#include <cmath>

#include "netcomb/phy.hpp"
#include "netcomb/rng.hpp"
#include "test_support.hpp"

using namespace netcomb;

namespace {

Scenario phy_scenario(int cells) {
  Scenario s = testing::single_cell_scenario();
  s.num_rbs = 4;
  s.channel.tx_ports = 2;
  s.channel.rx_ports = 1;
  s.sites[0].cells.clear();
  for (int c = 0; c < cells; ++c) {
    CellConfig cell;
    cell.cell_id = 10 + c;
    cell.antenna.azimuth = 120.0 * c;
    s.sites[0].cells.push_back(cell);
  }
  return s;
}

ChannelGrid blank_grid(const Scenario& s, std::size_t users) {
  ChannelGrid g;
  g.num_users = users;
  g.num_cells = s.num_cells();
  g.num_re = s.num_re();
  g.tx_ports = s.channel.tx_ports;
  g.rx_ports = s.channel.rx_ports;
  for (std::size_t u = 0; u < users; ++u) g.user_ids.push_back(static_cast<int>(u));
  g.cell_ids = s.cell_ids();
  g.data.assign(users * g.num_cells * g.link_size(), cplx{});
  return g;
}

void fill_link(ChannelGrid& g, std::size_t u, std::size_t c, double power) {
  for (auto& h : g.link(u, c)) h = cplx(std::sqrt(power), 0.0);
}

std::vector<UserState> full_buffer_users(std::size_t n) {
  std::vector<UserState> users(n);
  for (std::size_t i = 0; i < n; ++i) {
    users[i].user_id = static_cast<int>(i);
    users[i].active_services.push_back({ServiceType::full_buffer, std::numeric_limits<double>::infinity()});
  }
  return users;
}

}  // namespace

TEST_CASE("signal equal to noise gives 0 dB") {
  Scenario s = phy_scenario(1);
  s.sites[0].cells[0].tx_power_per_re = noise_per_re_dbm(s);
  auto g = blank_grid(s, 1);
  fill_link(g, 0, 0, 1.0);
  const auto m = measure(g, s);
  REQUIRE(m.size() == 1);
  CHECK(m[0].serving_cell == 10);
  CHECK(m[0].sinr == 0.0);
  CHECK(m[0].rsrp == doctest::Approx(noise_per_re_dbm(s)));
}

TEST_CASE("equal RSRP ties break to the lowest cell id") {
  Scenario s = phy_scenario(2);
  std::swap(s.sites[0].cells[0], s.sites[0].cells[1]);  // cell 11 listed first
  for (auto& c : s.sites[0].cells) c.tx_power_per_re = 40.0;
  auto g = blank_grid(s, 1);
  fill_link(g, 0, 0, 1e-6);
  fill_link(g, 0, 1, 1e-6);
  const auto m = measure(g, s);
  CHECK(m[0].serving_cell == 10);
  CHECK(m[0].serving_index == 1);
  CHECK(m[0].sinr == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("measurements match a straight-line recomputation on 3 cells") {
  Scenario s = phy_scenario(3);
  s.sites[0].cells[0].tx_power_per_re = 15.0;
  s.sites[0].cells[1].tx_power_per_re = 18.0;
  s.sites[0].cells[2].tx_power_per_re = 21.0;
  auto g = blank_grid(s, 4);
  Rng rng(5);
  for (auto& h : g.data) h = cplx(rng.normal(), rng.normal()) * 1e-5;
  const auto m = measure(g, s);

  const double noise = std::pow(10.0, (-174.0 + 10.0 * std::log10(15e3) + s.noise_figure) / 10.0);
  for (std::size_t u = 0; u < 4; ++u) {
    double mw[3];
    double dbm[3];
    for (std::size_t c = 0; c < 3; ++c) {
      double acc = 0.0;
      const auto link = g.link(u, c);
      for (const auto& h : link) acc += h.real() * h.real() + h.imag() * h.imag();
      const double p = acc / static_cast<double>(link.size());
      dbm[c] = s.sites[0].cells[c].tx_power_per_re + 10.0 * std::log10(p);
      mw[c] = std::pow(10.0, dbm[c] / 10.0);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (dbm[c] > dbm[best]) best = c;
    const double interf = mw[0] + mw[1] + mw[2] - mw[best];
    const double sinr = 10.0 * std::log10(mw[best] / (interf + noise));
    CHECK(m[u].serving_index == static_cast<std::ptrdiff_t>(best));
    CHECK(m[u].rsrp == doctest::Approx(dbm[best]).epsilon(1e-12));
    CHECK(std::abs(m[u].sinr - sinr) < 1e-9);
  }
}

TEST_CASE("no active cell leaves the user out of coverage") {
  Scenario s = phy_scenario(2);
  for (auto& c : s.sites[0].cells) c.antenna.active = false;
  auto g = blank_grid(s, 3);
  const auto m = measure(g, s);
  for (const auto& lm : m) {
    CHECK_FALSE(lm.has_serving());
    CHECK_FALSE(is_covered(lm, s.phy));
  }
  auto users = full_buffer_users(3);
  const auto ind = schedule_and_aggregate(m, users, s, 1.0, 1, 1.0);
  CHECK(ind.coverage_ratio == 0.0);
  CHECK(ind.mean_user_rate == 0.0);
  for (const auto& k : ind.cells) {
    CHECK(k.total_dl_traffic == 0.0);
    CHECK(k.avg_dl_rate == 0.0);
    CHECK(k.avg_bler == 0.0);
  }
}

TEST_CASE("rate mapping") {
  CHECK(sinr_to_rate(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(sinr_to_rate(12.0, 0.0) == 0.0);
  CHECK(sinr_to_rate(50.0, 180e3) == doctest::Approx(7.4 * 180e3));
  CHECK(sinr_to_rate(kSinrFloorDb, 1e6) == 0.0);
}

TEST_CASE("BLER curve") {
  CHECK(sinr_to_bler(0.0) == doctest::Approx(0.5));
  CHECK(sinr_to_bler(1e6) == 0.0);
  CHECK(sinr_to_bler(1.0) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
  CHECK(sinr_to_bler(3.0, 2.0, 1.0) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
}

TEST_CASE("empty schedule reports zero KPIs") {
  Scenario s = phy_scenario(1);
  auto g = blank_grid(s, 2);
  fill_link(g, 0, 0, 1e-9);
  fill_link(g, 1, 0, 1e-9);
  std::vector<UserState> users(2);
  const auto ind = schedule_and_aggregate(measure(g, s), users, s, 1.0, 1, 1.0);
  REQUIRE(ind.cells.size() == 1);
  CHECK(ind.cells[0].attached_users == 2);
  CHECK(ind.cells[0].scheduled_users == 0);
  CHECK(ind.cells[0].total_dl_traffic == 0.0);
  CHECK(ind.cells[0].avg_dl_rate == 0.0);
  CHECK(ind.cells[0].avg_bler == 0.0);
}

TEST_CASE("single full-buffer user gets the whole band") {
  Scenario s = phy_scenario(1);
  auto g = blank_grid(s, 1);
  fill_link(g, 0, 0, 1e-13);
  const auto m = measure(g, s);
  auto users = full_buffer_users(1);
  const double tick = 1.0;
  const auto ind = schedule_and_aggregate(m, users, s, tick, 1, 1.0);
  const double bw = 4 * 12 * 15e3;
  const double rate = bw * std::min(std::log2(1.0 + std::pow(10.0, m[0].sinr / 10.0)), 7.4);
  const double bler = 1.0 / (1.0 + std::exp(m[0].sinr));
  CHECK(ind.users[0].allocated_rbs == 4);
  CHECK(ind.cells[0].total_dl_traffic == doctest::Approx(rate * (1.0 - bler) * tick / 8.0).epsilon(1e-12));
  CHECK(ind.cells[0].avg_bler == doctest::Approx(bler).epsilon(1e-12));
}

TEST_CASE("two identical users split the RBs") {
  Scenario s = phy_scenario(1);
  s.num_rbs = 5;
  auto g = blank_grid(s, 2);
  fill_link(g, 0, 0, 1e-12);
  fill_link(g, 1, 0, 1e-12);
  auto users = full_buffer_users(2);
  for (std::int64_t t = 1; t <= 4; ++t) {
    const auto ind = schedule_and_aggregate(measure(g, s), users, s, 1.0, t, 1.0);
    CHECK(ind.users[0].allocated_rbs + ind.users[1].allocated_rbs == 5);
    CHECK(std::abs(ind.users[0].allocated_rbs - ind.users[1].allocated_rbs) <= 1);
  }
}

TEST_CASE("finite demand caps served bits and drains") {
  Scenario s = phy_scenario(1);
  auto g = blank_grid(s, 1);
  fill_link(g, 0, 0, 1e-9);
  std::vector<UserState> users(1);
  users[0].active_services.push_back({ServiceType::file_download, 1000.0});
  const auto ind = schedule_and_aggregate(measure(g, s), users, s, 1.0, 1, 1.0);
  CHECK(ind.users[0].served_bits == 8000.0);
  CHECK(ind.cells[0].total_dl_traffic == 1000.0);
  CHECK_FALSE(users[0].has_demand());
}

TEST_CASE("per-cell traffic equals the sum of user bits exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Scenario s = phy_scenario(3);
    const std::size_t n = 1 + rng.next_u64() % 12;
    auto g = blank_grid(s, n);
    for (auto& h : g.data) h = cplx(rng.normal(), rng.normal()) * 1e-6;
    std::vector<UserState> users(n);
    for (auto& u : users) {
      if (rng.uniform() < 0.5) u.active_services.push_back({ServiceType::full_buffer, std::numeric_limits<double>::infinity()});
      if (rng.uniform() < 0.5) u.active_services.push_back({ServiceType::file_download, rng.uniform(1.0, 1e5)});
    }
    const auto ind = schedule_and_aggregate(measure(g, s), users, s, 1.0, trial, 1.0);
    for (std::size_t c = 0; c < 3; ++c) {
      double bits = 0.0;
      for (const auto& up : ind.users)
        if (up.link.serving_index == static_cast<std::ptrdiff_t>(c)) bits += up.served_bits;
      CHECK(bits == ind.cells[c].total_dl_traffic * 8.0);
    }
    CHECK(ind.coverage_ratio >= 0.0);
    CHECK(ind.coverage_ratio <= 1.0);
  }
}

TEST_CASE("serving cell is invariant to a common dB offset") {
  Scenario s = phy_scenario(3);
  auto g = blank_grid(s, 6);
  Rng rng(2);
  for (auto& h : g.data) h = cplx(rng.normal(), rng.normal()) * 1e-6;
  const auto a = measure(g, s);
  for (auto& c : s.sites[0].cells) c.tx_power_per_re += 13.7;
  const auto b = measure(g, s);
  for (std::size_t u = 0; u < a.size(); ++u) CHECK(a[u].serving_cell == b[u].serving_cell);
}

TEST_CASE("deactivating a cell never raises interference on the others") {
  Scenario s = phy_scenario(3);
  auto g = blank_grid(s, 8);
  Rng rng(4);
  for (auto& h : g.data) h = cplx(rng.normal(), rng.normal()) * 1e-6;
  const auto before = measure(g, s);
  for (std::size_t off = 0; off < 3; ++off) {
    Scenario t = s;
    t.sites[0].cells[off].antenna.active = false;
    auto h = g;
    for (std::size_t u = 0; u < h.num_users; ++u)
      for (auto& v : h.link(u, off)) v = cplx{};
    const auto after = measure(h, t);
    for (std::size_t u = 0; u < after.size(); ++u) {
      if (after[u].serving_cell == before[u].serving_cell) CHECK(after[u].interference <= before[u].interference);
    }
  }
}
