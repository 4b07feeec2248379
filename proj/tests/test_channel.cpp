#include <doctest.h>

#include <cmath>

#include "netcomb/channel.hpp"
#include "netcomb/rng.hpp"
#include "test_support.hpp"

using namespace netcomb;

namespace {
std::vector<int> ids(int n, int first = 0) {
  std::vector<int> v;
  for (int i = 0; i < n; ++i) v.push_back(first + i);
  return v;
}

LargeScaleModel flat_model(const ChannelGrid& g, double loss, bool usable = true) {
  LargeScaleModel m;
  m.num_users = g.num_users;
  m.num_cells = g.num_cells;
  m.user_ids = g.user_ids;
  m.cell_ids = g.cell_ids;
  m.coupling_loss.assign(g.num_users * g.num_cells, loss);
  m.usable.assign(g.num_users * g.num_cells, usable ? 1 : 0);
  return m;
}
}  // namespace

TEST_CASE("single-tap Rayleigh gains have unit mean power") {
  TapProfile p;
  p.taps = {{0.0, 1.0}};
  const SmallScaleRealization r(p, ids(100000), {1}, 1, 1, 21);
  double acc = 0.0;
  for (std::size_t u = 0; u < r.num_users(); ++u) acc += r.tap_energy(u, 0, 0, 0);
  CHECK(std::abs(acc / 100000.0 - 1.0) < 0.03);
}

TEST_CASE("zero doppler freezes the realization") {
  TapProfile p;
  p.doppler = 0.0;
  CHECK(ar1_coefficient(0.0, 1.0) == 1.0);
  SmallScaleRealization r(p, ids(3), {1, 2}, 2, 2, 8);
  const auto before = std::vector<cplx>(r.gains(2, 1, 1, 0).begin(), r.gains(2, 1, 1, 0).end());
  for (int t = 1; t <= 20; ++t) r.advance(t, 1.0);
  const auto after = r.gains(2, 1, 1, 0);
  for (std::size_t l = 0; l < before.size(); ++l) CHECK(after[l] == before[l]);
}

TEST_CASE("realization is deterministic in the seed") {
  TapProfile p;
  SmallScaleRealization a(p, ids(4), {1, 2, 3}, 4, 2, 55);
  SmallScaleRealization b(p, ids(4), {1, 2, 3}, 4, 2, 55);
  a.advance(1, 1.0);
  b.advance(1, 1.0);
  for (std::size_t u = 0; u < 4; ++u)
    for (std::size_t c = 0; c < 3; ++c)
      for (int tx = 0; tx < 4; ++tx)
        for (int rx = 0; rx < 2; ++rx) {
          const auto x = a.gains(u, c, tx, rx);
          const auto y = b.gains(u, c, tx, rx);
          for (std::size_t l = 0; l < x.size(); ++l) CHECK(x[l] == y[l]);
        }
}

TEST_CASE("AR(1) evolution keeps unit mean power") {
  TapProfile p;
  p.doppler = 0.3;
  SmallScaleRealization r(p, ids(20000), {1}, 1, 1, 3);
  for (int t = 1; t <= 5; ++t) r.advance(t, 1.0);
  double acc = 0.0;
  for (std::size_t u = 0; u < r.num_users(); ++u) acc += r.tap_energy(u, 0, 0, 0);
  CHECK(std::abs(acc / 20000.0 - 1.0) < 0.03);
}

TEST_CASE("flat channel for a unit tap at zero delay") {
  const Scenario s = testing::single_cell_scenario();
  TapProfile p;
  p.taps = {{0.0, 1.0}};
  const auto r = SmallScaleRealization::with_gains(p, {0}, {1}, 1, 1, {cplx(1.0, 0.0)});
  const auto g = freq_response(r, s);
  CHECK(g.link_size() == 624u);
  for (const auto& h : g.link(0, 0)) CHECK(h == cplx(1.0, 0.0));
}

TEST_CASE("single delayed tap has constant magnitude") {
  const Scenario s = testing::single_cell_scenario();
  TapProfile p;
  p.taps = {{1.0 / (2.0 * 15e3 * 624), 1.0}};
  const auto resolved = resolve_to_grid(p, 624, 15e3);
  const auto r = SmallScaleRealization::with_gains(resolved, {0}, {1}, 1, 1, {std::polar(1.0, 0.3)});
  for (const auto& h : freq_response(r, s).link(0, 0)) CHECK(std::abs(h) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("band-average power equals tap energy (Parseval)") {
  const Scenario s = testing::multi_cell_scenario(2, 3);
  auto r = draw_small_scale(s, ids(6), 404);
  r.advance(1, 1.0);
  const auto g = freq_response(r, s);
  for (std::size_t u = 0; u < g.num_users; ++u)
    for (std::size_t c = 0; c < g.num_cells; ++c)
      for (int tx = 0; tx < g.tx_ports; ++tx)
        for (int rx = 0; rx < g.rx_ports; ++rx) {
          const double e = r.tap_energy(u, c, tx, rx);
          const double m = mean_port_power(g.link(u, c), g.tx_ports, g.rx_ports, tx, rx);
          CHECK(std::abs(m / e - 1.0) < 1e-9);
        }
}

TEST_CASE("delay quantization merges taps sharing a bin") {
  TapProfile p;
  p.taps = {{0.0, 0.5}, {10e-9, 0.3}, {300e-9, 0.2}};
  const auto q = resolve_to_grid(p, 624, 15e3);
  REQUIRE(q.taps.size() == 2);
  CHECK(q.taps[0].power == doctest::Approx(0.8));
  CHECK(q.taps[1].delay == doctest::Approx(3.0 / (624 * 15e3)));
}

TEST_CASE("large-scale scaling") {
  const Scenario s = testing::single_cell_scenario();
  auto r = draw_small_scale(s, {0, 1}, 6);
  const auto g = freq_response(r, s);

  const auto same = apply_large_scale(flat_model(g, 0.0), g);
  CHECK(same.data == g.data);

  const auto scaled = apply_large_scale(flat_model(g, 20.0), g);
  for (std::size_t i = 0; i < g.data.size(); i += 97) {
    CHECK(std::norm(scaled.data[i]) == doctest::Approx(std::norm(g.data[i]) / 100.0).epsilon(1e-12));
  }

  const auto dead = apply_large_scale(flat_model(g, 10.0, false), g);
  for (const auto& h : dead.data) CHECK(h == cplx{});

  auto wrong = flat_model(g, 0.0);
  wrong.user_ids = {5, 6};
  CHECK_THROWS_AS(apply_large_scale(wrong, g), IndexMismatchError);
}

TEST_CASE("energy invariant holds for random coupling losses") {
  const Scenario s = testing::multi_cell_scenario(1, 3);
  auto r = draw_small_scale(s, ids(40), 12);
  r.advance(1, 1.0);
  const auto g = freq_response(r, s);
  Rng rng(77);
  auto ls = flat_model(g, 0.0);
  for (auto& v : ls.coupling_loss) v = rng.uniform(40.0, 160.0);
  const auto h = apply_large_scale(ls, g);
  for (std::size_t u = 0; u < h.num_users; ++u)
    for (std::size_t c = 0; c < h.num_cells; ++c) {
      const double ratio = mean_link_power(h.link(u, c)) / r.link_energy(u, c);
      const double expected = std::pow(10.0, -ls.loss(u, c) / 10.0);
      CHECK(std::abs(ratio / expected - 1.0) < 1e-9);
    }
}

TEST_CASE("binary export round-trips and rejects damaged payloads") {
  const Scenario s = testing::single_cell_scenario();
  auto r = draw_small_scale(s, {0, 1}, 1);
  const auto g = freq_response(r, s);
  GridExportWriter w(624, 4, 2);
  w.append(g.link(0, 0));
  w.append(g.link(1, 0));
  const std::string bytes = w.finish();
  CHECK(bytes.size() == kExportHeaderSize + 2 * 624 * 8 * 8);
  CHECK(bytes.substr(0, 4) == "NCRE");

  const auto d = decode_export(bytes);
  CHECK(d.shape == ExportShape{2, 624, 4, 2});
  for (std::size_t i = 0; i < g.link_size(); ++i) {
    CHECK(d.sample(1)[i] == std::complex<float>(static_cast<float>(g.link(1, 0)[i].real()),
                                                static_cast<float>(g.link(1, 0)[i].imag())));
  }
  CHECK_THROWS_AS(decode_export(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(decode_export(bytes.substr(0, 10)), ParseError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_export(bad), ParseError);
  CHECK_THROWS_AS(w.append(g.link(0, 0).subspan(1)), IndexMismatchError);
}
