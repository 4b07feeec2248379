#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "netcomb/channel.hpp"
#include "netcomb/csi.hpp"
#include "netcomb/dataset_store.hpp"
#include "netcomb/service.hpp"
#include "netcomb/wire.hpp"
#include "test_support.hpp"

using namespace netcomb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("netcomb-svc-" + std::to_string(::getpid()) + "-" +
                                        std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

/// A service on a free local port plus a client bound to it.
struct Harness {
  TempDir dir;
  std::unique_ptr<Service> service;
  int port = 0;

  explicit Harness(ServiceOptions opts = {}) {
    opts.data_root = dir.path;
    service = std::make_unique<Service>(opts);
    port = service->start();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }

  std::pair<int, json> post(const std::string& path, const json& body) const {
    auto res = client().Post(path, body.dump(), "application/json");
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> get(const std::string& path) const {
    auto res = client().Get(path);
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> del(const std::string& path) const {
    auto res = client().Delete(path);
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }
};

json small_scenario() {
  auto s = testing::multi_cell_scenario(1, 3);
  s.num_rbs = 6;
  return s;
}

json sim_body(const std::string& mode, double duration = 3.0) {
  return {{"mode", mode}, {"scenario", small_scenario()}, {"n_users", 4}, {"duration", duration}, {"seed", 5}};
}

json identity_action(const json& state) { return state.at("beams"); }

}  // namespace

TEST_CASE("simulate happy path echoes the request id") {
  Harness h;
  auto [status, env] = h.post("/v1/simulate", {{"id", "abc-1"}, {"body", sim_body("coverage")}});
  CHECK(status == 200);
  CHECK(env.at("id") == "abc-1");
  CHECK(env.at("version") == kVersion);
  CHECK(env.at("body").at("coverage").size() == 3);
  CHECK_FALSE(env.at("body").contains("protocol"));

  auto res = h.client().Post("/v1/simulate", {{"X-Request-Id", "hdr-7"}}, sim_body("protocol_stack").dump(),
                             "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("id") == "hdr-7");
  CHECK(res->get_header_value("X-Request-Id") == "hdr-7");

  // Seeded requests are deterministic over the wire.
  const auto a = h.post("/v1/simulate", sim_body("protocol_stack")).second.at("body");
  const auto b = h.post("/v1/simulate", sim_body("protocol_stack")).second.at("body");
  CHECK(a.at("protocol") == b.at("protocol"));
}

TEST_CASE("simulate validation and guard errors") {
  ServiceOptions opts;
  opts.limits.max_export_bytes = 4096;
  Harness h(opts);
  auto [s400, e400] = h.post("/v1/simulate", sim_body("coverage", 0.0));
  CHECK(s400 == 400);
  CHECK(e400.at("error").at("code") == "validation_error");
  CHECK(e400.at("error").at("field") == "duration");
  CHECK_FALSE(e400.contains("body"));

  auto [s429, e429] = h.post("/v1/simulate", sim_body("link_channel"));
  CHECK(s429 == 429);
  CHECK(e429.at("error").at("code") == "resource_guard");
  CHECK(e429.at("error").at("cap") == 4096.0);
  CHECK(e429.at("error").at("requested").get<double>() > 4096.0);

  auto bad = h.client().Post("/v1/simulate", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).at("error").at("code") == "parse_error");

  CHECK(h.get("/v1/nowhere").first == 404);
  CHECK(h.get("/v1/simulate").first == 405);
}

TEST_CASE("link channel payload is stored and downloadable") {
  Harness h;
  auto [status, env] = h.post("/v1/simulate", sim_body("link_channel", 1.0));
  REQUIRE(status == 200);
  const auto ds = env.at("body").at("dataset");
  const std::string key = ds.at("key");
  CHECK(ds.at("download") == "/v1/datasets/" + key);
  auto res = h.client().Get("/v1/datasets/" + key);
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "application/octet-stream");
  CHECK(sha256_hex(res->body) == ds.at("checksum"));
  CHECK(res->get_header_value("X-Netcomb-Checksum") == ds.at("checksum"));
  const auto decoded = decode_export(res->body);
  CHECK(decoded.shape.num_samples == 4 * 3);
  CHECK(json(decoded.shape) == env.at("body").at("link").at("shape"));
  const auto meta = h.get("/v1/datasets/" + key + "/meta");
  CHECK(meta.first == 200);
  CHECK(meta.second.at("body").at("checksum") == ds.at("checksum"));

  // Re-running stores nothing new.
  CHECK(h.post("/v1/simulate", sim_body("link_channel", 1.0)).second.at("body").at("dataset").at("created") == false);
  CHECK(h.get("/v1/datasets/" + std::string(64, 'a')).first == 404);
  CHECK(h.get("/v1/datasets/nothex").first == 400);
}

TEST_CASE("run status and cancellation") {
  Harness h;
  h.post("/v1/simulate", {{"id", "run-a"}, {"body", sim_body("coverage", 2.0)}});
  auto [status, st] = h.get("/v1/status/run-a");
  CHECK(status == 200);
  CHECK(st.at("body").at("state") == "done");
  CHECK(st.at("body").at("done") == 2);
  CHECK(st.at("body").at("total") == 2);
  CHECK(h.get("/v1/status/missing").first == 404);

  // A long run is cancelled through the status resource.
  json body = sim_body("protocol_stack", 5000.0);
  body["n_users"] = 40;
  auto fut = std::async(std::launch::async, [&] { return h.post("/v1/simulate", {{"id", "run-b"}, {"body", body}}); });
  for (int i = 0; i < 2000; ++i) {
    const auto [s, j] = h.get("/v1/status/run-b");
    if (s == 200 && j.at("body").at("done").get<int>() > 0) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  CHECK(h.del("/v1/status/run-b").first == 200);
  const auto [s, j] = fut.get();
  CHECK(s == 409);
  CHECK(j.at("error").at("code") == "invalid_state");
  CHECK_FALSE(j.contains("body"));
  CHECK(h.get("/v1/status/run-b").second.at("body").at("state") == "cancelled");
}

TEST_CASE("environment lifecycle") {
  ServiceOptions opts;
  opts.max_envs = 2;
  Harness h(opts);
  json create{{"request", {{"scenario", small_scenario()}, {"n_users", 6}}}, {"episode_len", 2}, {"seed", 3}};
  auto [status, env] = h.post("/v1/env", create);
  REQUIRE(status == 200);
  const std::string id = env.at("body").at("env_id");
  auto state = env.at("body").at("state");
  CHECK(state.at("step_index") == 0);

  auto [s1, step1] = h.post("/v1/env/" + id + "/step", {{"action", identity_action(state)}});
  CHECK(s1 == 200);
  CHECK(step1.at("body").at("indicators").at("tick_index") == 2);
  CHECK(step1.at("body").at("done") == false);

  json off = identity_action(state);
  off.begin().value()["downtilt"] = 7.5;
  auto [s422, e422] = h.post("/v1/env/" + id + "/step", {{"action", off}});
  CHECK(s422 == 422);
  CHECK(e422.at("error").at("code") == "off_grid");
  REQUIRE(e422.at("error").at("params").size() == 1);
  CHECK(e422.at("error").at("params")[0].at("name") == off.begin().key() + ".downtilt");

  auto [s2, step2] = h.post("/v1/env/" + id + "/step", {{"action", identity_action(state)}});
  CHECK(s2 == 200);
  CHECK(step2.at("body").at("state").at("step_index") == 2);  // the rejected step left no trace
  CHECK(step2.at("body").at("done") == true);
  CHECK(h.post("/v1/env/" + id + "/step", {{"action", identity_action(state)}}).first == 409);

  auto [sr, reset] = h.post("/v1/env/" + id + "/reset", json::object());
  CHECK(sr == 200);
  CHECK(reset.at("body").at("state") == state);

  CHECK(h.post("/v1/env", create).first == 200);
  CHECK(h.post("/v1/env", create).first == 429);

  CHECK(h.del("/v1/env/" + id).first == 200);
  CHECK(h.del("/v1/env/" + id).first == 404);
  CHECK(h.post("/v1/env/" + id + "/step", {{"action", identity_action(state)}}).first == 404);
  CHECK(h.post("/v1/env", json{{"episode_len", 2}}).second.at("error").at("field") == "request");
}

TEST_CASE("concurrent steps on one environment") {
  Harness h;
  json create{{"request", {{"scenario", small_scenario()}, {"n_users", 4}}}, {"episode_len", 5}};
  const auto env = h.post("/v1/env", create).second.at("body");
  const std::string id = env.at("env_id");
  const json action{{"action", identity_action(env.at("state"))}};

  std::mutex m;
  std::condition_variable cv;
  bool entered = false;
  bool release = false;
  h.service->set_step_hook([&](const std::string&) {
    std::unique_lock lock(m);
    entered = true;
    cv.notify_all();
    cv.wait(lock, [&] { return release; });
  });
  auto first = std::async(std::launch::async, [&] { return h.post("/v1/env/" + id + "/step", action); });
  {
    std::unique_lock lock(m);
    cv.wait(lock, [&] { return entered; });
  }
  const auto second = h.post("/v1/env/" + id + "/step", action);
  {
    std::lock_guard lock(m);
    release = true;
  }
  cv.notify_all();
  const auto done = first.get();
  CHECK(done.first == 200);
  CHECK(second.first == 409);
  CHECK(second.second.at("error").at("code") == "conflict");
  h.service->set_step_hook({});
}

TEST_CASE("csi dataset and verification over the wire") {
  Harness h;
  json params{{"scenario", small_scenario()}, {"n_users", 2}, {"seed", 4}, {"subband_size", 12}};
  auto [s1, d1] = h.post("/v1/csi/dataset", params);
  REQUIRE(s1 == 200);
  CHECK(d1.at("body").at("cache_hit") == false);
  auto [s2, d2] = h.post("/v1/csi/dataset", params);
  CHECK(d2.at("body").at("cache_hit") == true);
  CHECK(d2.at("body").at("samples") == d1.at("body").at("samples"));
  const std::string key = d1.at("body").at("key");

  auto [sv, v] = h.post("/v1/csi/verify", {{"key", key}, {"restored", d1.at("body").at("samples")}});
  REQUIRE(sv == 200);
  CHECK(v.at("body").at("nmse").at("linear") == 0.0);
  CHECK(v.at("body").at("nmse").at("db") == kSinrFloorDb);
  for (const auto& d : v.at("body").at("delta")) {
    CHECK(d.at("total_dl_traffic") == 0.0);
    CHECK(d.at("avg_dl_rate") == 0.0);
    CHECK(d.at("avg_bler") == 0.0);
  }
  auto [sn, nul] = h.post("/v1/csi/verify", {{"key", key}, {"codec", "null"}});
  CHECK(sn == 200);
  CHECK(nul.at("body").at("nmse").at("linear") == 1.0);
  CHECK(h.post("/v1/csi/verify", {{"key", key}, {"codec", "quantize:6"}}).first == 200);

  json shrunk = d1.at("body").at("samples");
  shrunk[1]["vectors"].erase(0);
  auto [sb, eb] = h.post("/v1/csi/verify", {{"key", key}, {"restored", shrunk}});
  CHECK(sb == 400);
  CHECK(eb.at("error").at("field").get<std::string>().rfind("restored[1]", 0) == 0);
  CHECK(h.post("/v1/csi/verify", {{"key", key}, {"codec", "zip"}}).second.at("error").at("field") == "codec");
  CHECK(h.post("/v1/csi/verify", {{"key", std::string(64, 'b')}, {"codec", "null"}}).first == 404);
}

TEST_CASE("corrupted datasets surface as internal errors") {
  Harness h;
  json params{{"scenario", small_scenario()}, {"n_users", 1}, {"seed", 9}};
  const std::string key = h.post("/v1/csi/dataset", params).second.at("body").at("key");
  DatasetStore store(h.dir.path);
  {
    std::ofstream out(store.entry_dir(key) / "payload", std::ios::binary | std::ios::app);
    out << "junk";
  }
  auto [s, e] = h.post("/v1/csi/verify", {{"key", key}, {"codec", "identity"}});
  CHECK(s == 500);
  CHECK(e.at("error").at("code") == "checksum_mismatch");
}

TEST_CASE("traffic evaluation") {
  Harness h;
  json body{{"truth", {{"cells", {1}}, {"counts", {{1, 2}}}}},
            {"prediction", {{"cells", {1}}, {"counts", {{3, 5}}}}},
            {"k", 1}};
  auto [s, r] = h.post("/v1/traffic/evaluate", body);
  REQUIRE(s == 200);
  CHECK(r.at("body").at("metrics").at("mae") == 2.5);
  CHECK(r.at("body").at("metrics").at("rel_err").get<double>() == doctest::Approx(5.0 / 3.0));
  CHECK(r.at("body").at("topk").at("overlap") == 1);

  body["prediction"]["cells"] = {2};
  auto [sm, em] = h.post("/v1/traffic/evaluate", body);
  CHECK(sm == 400);
  CHECK(em.at("error").at("code") == "index_mismatch");

  json transfer{{"history", {{{"cells", {1, 2}}, {"counts", {{2, 2}, {0, 5}}}}}},
                {"truth", {{"cells", {1, 2}}, {"counts", {{2, 3}, {1, 4}}}}},
                {"k", 1},
                {"criterion", "total"}};
  auto [st, t] = h.post("/v1/traffic/evaluate", transfer);
  CHECK(st == 200);
  CHECK(t.at("body").at("prediction").at("counts") == json{{2, 2}, {0, 5}});
  CHECK(t.at("body").at("topk").at("predicted")[0].at("cell_id") == 2);
}

TEST_CASE("data root comes from the environment") {
  ::setenv("NETCOMB_DATA_ROOT", "/tmp/netcomb-env-root", 1);
  CHECK(data_root_from_env() == fs::path("/tmp/netcomb-env-root"));
  ::unsetenv("NETCOMB_DATA_ROOT");
  CHECK(data_root_from_env("fallback") == fs::path("fallback"));
}
