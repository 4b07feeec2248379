#include <doctest.h>

#include <string>

#include "netcomb/scenario.hpp"
#include "test_support.hpp"

using namespace netcomb;

namespace {
const char* kMinimal = R"({
  "sites": [{"site_id": 1, "position": {"x": 100, "y": 100, "height": 30},
             "cells": [{"cell_id": 7}]}]
})";

std::string with_field(const std::string& field) {
  return std::string(R"({)") + field + R"(, "sites": [{"site_id": 1, "position": {"x": 100, "y": 100},
             "cells": [{"cell_id": 7, "antenna": {"azimuth": 370}}]}]})";
}
}  // namespace

TEST_CASE("minimal document fills defaults") {
  const Scenario s = load_scenario(kMinimal);
  CHECK(s.tick == 1.0);
  CHECK(s.report_interval == 300.0);
  CHECK(s.num_rbs == 52);
  CHECK(s.subcarriers_per_rb == 12);
  CHECK(s.num_re() == 624);
  CHECK(s.channel.tx_ports == 4);
  CHECK(s.channel.rx_ports == 2);
  CHECK(s.propagation.pl_ref == doctest::Approx(32.4 + 20.0 * std::log10(3.5)));
  REQUIRE(s.num_cells() == 1);
  CHECK(s.cell_ids() == std::vector<int>{7});
}

TEST_CASE("azimuth is normalized modulo 360") {
  const Scenario s = load_scenario(with_field(R"("carrier_freq": 3.5)"));
  CHECK(s.sites[0].cells[0].antenna.azimuth == doctest::Approx(10.0));
  CHECK(normalize_azimuth(-30.0) == doctest::Approx(330.0));
  CHECK(normalize_azimuth(720.0) == 0.0);
}

TEST_CASE("invalid fields are named in validation errors") {
  try {
    load_scenario(with_field(R"("bandwidth": -5)"));
    FAIL("expected validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "bandwidth");
  }
  CHECK_THROWS_AS(load_scenario("{ not json"), ParseError);
  CHECK_THROWS_AS(load_scenario(with_field(R"("tick": 0)")), ValidationError);
  CHECK_THROWS_AS(load_scenario(with_field(R"("tick": 0.7, "report_interval": 300)")), ValidationError);
  CHECK_THROWS_AS(load_scenario(with_field(R"("num_rbs": 0)")), ValidationError);
  CHECK_THROWS_AS(load_scenario(with_field(R"("map_bounds": {"x_min":0,"y_min":0,"x_max":0,"y_max":10})")),
                  ValidationError);
  try {
    load_scenario(R"({"sites":[{"position":{"x":1,"y":1},"cells":[{"cell_id":1,"antenna":{"h_beamwidth":200}}]}]})");
    FAIL("expected validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "sites[0].cells[0].antenna.h_beamwidth");
  }
  try {
    load_scenario(R"({"sites":[{"position":{"x":1,"y":1},"cells":[{"cell_id":1},{"cell_id":1}]}]})");
    FAIL("expected validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "sites[0].cells[1].cell_id");
  }
}

TEST_CASE("load is deterministic and inverts serialize") {
  const Scenario a = load_scenario(kMinimal);
  const Scenario b = load_scenario(kMinimal);
  CHECK(a == b);

  Scenario rich = testing::multi_cell_scenario(3, 3);
  rich.service_profiles.push_back({ServiceType::file_download, 0.1, 1e6, 60.0});
  rich.service_profiles.push_back({ServiceType::streaming, 0.05, 2e6, 30.0});
  rich.param_grid = default_param_grid(rich);
  rich.channel.profile.taps = {{0.0, 0.5}, {2.5e-7, 0.3}, {7.1e-7, 0.2}};
  rich.propagation.shadow_sigma = 7.3;
  validate_scenario(rich);
  CHECK(load_scenario(serialize_scenario(rich)) == rich);
  CHECK(serialize_scenario(load_scenario(serialize_scenario(rich))) == serialize_scenario(rich));
}

TEST_CASE("validate_antenna accepts on-grid configs unchanged") {
  const auto grid = ParamGrid::make({30, 65}, {5, 10}, {0, 120, 240}, {0, 6, 12});
  AntennaConfig cfg{65, 10, 120, 6, true};
  const AntennaConfig& out = validate_antenna(cfg, grid);
  CHECK(&out == &cfg);
  CHECK(out == AntennaConfig{65, 10, 120, 6, true});
}

TEST_CASE("off-grid parameters are listed with nearest values") {
  const auto grid = ParamGrid::make({30, 65}, {5, 10}, {0, 120, 240}, {0, 6, 12});
  const AntennaConfig cfg{33, 10, 125, 6, true};
  try {
    validate_antenna(cfg, grid);
    FAIL("expected off-grid error");
  } catch (const OffGridError& e) {
    REQUIRE(e.params().size() == 2);
    CHECK(e.params()[0].name == "h_beamwidth");
    CHECK(e.params()[0].nearest == 30);
    CHECK(e.params()[1].name == "azimuth");
    CHECK(e.params()[1].nearest == 120);
  }
  CHECK(cfg == AntennaConfig{33, 10, 125, 6, true});
}

TEST_CASE("grid construction rejects empty or unsorted lists") {
  CHECK_THROWS_AS(ParamGrid::make({}, {5}, {0}, {0}), ValidationError);
  CHECK_THROWS_AS(ParamGrid::make({65, 30}, {5}, {0}, {0}), ValidationError);
  CHECK_THROWS_AS(ParamGrid::make({30}, {5}, {360}, {0}), ValidationError);
  CHECK_THROWS_AS(ParamGrid::make({30}, {5}, {0}, {95}), ValidationError);
}

TEST_CASE("scenario default antenna must sit on its grid") {
  const std::string doc = R"({"param_grid":{"h_beamwidth":[30],"v_beamwidth":[10],"azimuth":[0],"downtilt":[6]},
    "sites":[{"position":{"x":1,"y":1},"cells":[{"cell_id":1,"antenna":{"h_beamwidth":65}}]}]})";
  CHECK_THROWS_AS(load_scenario(doc), ValidationError);
}
