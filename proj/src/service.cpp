#include "netcomb/service.hpp"

#include <atomic>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <httplib.h>

#include "json_fields.hpp"
#include "netcomb/csi.hpp"
#include "netcomb/dataset_store.hpp"
#include "netcomb/rl_env.hpp"
#include "netcomb/traffic.hpp"
#include "netcomb/wire.hpp"

namespace netcomb {

std::filesystem::path data_root_from_env(const std::filesystem::path& fallback) {
  const char* v = std::getenv("NETCOMB_DATA_ROOT");
  return v && *v ? std::filesystem::path(v) : fallback;
}

int http_status(const std::exception& e) {
  if (dynamic_cast<const OffGridError*>(&e)) return 422;
  if (dynamic_cast<const ResourceGuardError*>(&e)) return 429;
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const ConflictError*>(&e) || dynamic_cast<const StateError*>(&e)) return 409;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const IndexMismatchError*>(&e) || dynamic_cast<const CodecError*>(&e)) {
    return 400;
  }
  return 500;
}

json error_body(const std::exception& e) {
  json err;
  const auto* ne = dynamic_cast<const Error*>(&e);
  err["code"] = ne ? ne->code() : "internal";
  err["message"] = e.what();
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) err["field"] = v->field();
  if (const auto* g = dynamic_cast<const ResourceGuardError*>(&e)) {
    err["requested"] = g->requested();
    err["cap"] = g->cap();
  }
  if (const auto* o = dynamic_cast<const OffGridError*>(&e)) {
    err["params"] = json::array();
    for (const auto& p : o->params()) err["params"].push_back({{"name", p.name}, {"value", p.value}, {"nearest", p.nearest}});
  }
  if (const auto* c = dynamic_cast<const CodecError*>(&e)) err["field"] = "restored[" + std::to_string(c->sample()) + "]";
  return err;
}

namespace {

struct EnvEntry {
  std::mutex mutex;
  AntennaEnv env;
  SimRequest request;
  std::size_t episode_len = 1;
  std::uint64_t seed = 1;
  std::vector<int> optimized;
};

struct RunStatus {
  std::atomic<std::size_t> done{0};
  std::atomic<std::size_t> total{0};
  std::atomic<bool> cancel{false};
  std::mutex mutex;
  std::string state = "running";
  json error;
};

constexpr std::size_t kMaxRunRecords = 1024;

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(path.substr(0, path.find('?')));
  while (std::getline(in, part, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

class HttpError : public Error {
public:
  HttpError(int status, std::string code, const std::string& what) : Error(std::move(code), what), status_(status) {}
  int status() const { return status_; }

private:
  int status_;
};

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceOptions o) : opts(std::move(o)), store(opts.data_root), harness(store, opts.limits) {}

  ServiceOptions opts;
  DatasetStore store;
  CsiHarness harness;
  std::atomic<std::size_t> simulations{0};
  std::atomic<std::uint64_t> next_id{1};

  std::mutex envs_mutex;
  std::map<std::string, std::shared_ptr<EnvEntry>> envs;

  std::mutex runs_mutex;
  std::map<std::string, std::shared_ptr<RunStatus>> runs;
  std::deque<std::string> run_order;

  std::mutex hook_mutex;
  std::function<void(const std::string&)> step_hook;

  httplib::Server server;
  std::thread thread;

  std::string fresh_id(const char* prefix) { return prefix + std::to_string(next_id.fetch_add(1)); }

  std::shared_ptr<EnvEntry> find_env(const std::string& id) {
    std::lock_guard lock(envs_mutex);
    const auto it = envs.find(id);
    if (it == envs.end()) throw NotFoundError("unknown environment '" + id + "'");
    return it->second;
  }

  std::shared_ptr<RunStatus> register_run(const std::string& id) {
    std::lock_guard lock(runs_mutex);
    if (const auto it = runs.find(id); it != runs.end() && it->second->state == "running") {
      throw ConflictError("run '" + id + "' is still running");
    }
    auto st = std::make_shared<RunStatus>();
    if (!runs.count(id)) run_order.push_back(id);
    runs[id] = st;
    while (run_order.size() > kMaxRunRecords) {
      const auto& oldest = run_order.front();
      if (runs.at(oldest)->state == "running") break;
      runs.erase(oldest);
      run_order.pop_front();
    }
    return st;
  }

  json simulate(const json& body, const std::string& run_id) {
    const SimRequest req = request_from_json(body);
    check_limits(req, opts.limits);
    auto st = register_run(run_id);
    SimResult result;
    try {
      result = run_simulation(req, opts.limits, [&](std::size_t done, std::size_t total) {
        st->done = done;
        st->total = total;
        return !st->cancel.load();
      });
    } catch (const std::exception& e) {
      std::lock_guard lock(st->mutex);
      st->state = st->cancel ? "cancelled" : "failed";
      st->error = error_body(e);
      throw;
    }
    ++simulations;
    json out = result;
    if (result.link) {
      json params{{"kind", "link_channel"}, {"request", req}, {"version", kVersion}};
      const std::string key = canonical_key(params);
      json meta{{"params", params}, {"kind", "link_channel"}, {"shape", result.link->shape}};
      const auto receipt = store.put(key, meta, result.link->payload);
      out["dataset"] = {{"key", key},
                        {"checksum", receipt.checksum},
                        {"created", receipt.created},
                        {"download", "/v1/datasets/" + key}};
    }
    out["run"] = run_id;
    std::lock_guard lock(st->mutex);
    st->state = "done";
    return out;
  }

  json status(const std::string& run) {
    std::shared_ptr<RunStatus> st;
    {
      std::lock_guard lock(runs_mutex);
      const auto it = runs.find(run);
      if (it == runs.end()) throw NotFoundError("unknown run '" + run + "'");
      st = it->second;
    }
    std::lock_guard lock(st->mutex);
    json out{{"run", run}, {"state", st->state}, {"done", st->done.load()}, {"total", st->total.load()}};
    if (!st->error.is_null()) out["error"] = st->error;
    return out;
  }

  json cancel(const std::string& run) {
    std::shared_ptr<RunStatus> st;
    {
      std::lock_guard lock(runs_mutex);
      const auto it = runs.find(run);
      if (it == runs.end()) throw NotFoundError("unknown run '" + run + "'");
      st = it->second;
    }
    st->cancel = true;
    return status(run);
  }

  static void read_env_config(const json& body, EnvEntry& e, bool require_request) {
    require_object(body, "body");
    if (body.contains("request")) {
      e.request = request_from_json(body.at("request"));
      e.seed = e.request.seed;
    } else if (require_request) {
      throw ValidationError("request", "missing required field");
    }
    e.episode_len = count_at(body, "episode_len", "", e.episode_len);
    e.seed = uint64_at(body, "seed", "", e.seed);
    if (body.contains("optimized_cells")) e.optimized = int_list(body.at("optimized_cells"), "optimized_cells");
  }

  json env_create(const json& body) {
    auto entry = std::make_shared<EnvEntry>();
    entry->env = AntennaEnv(opts.limits);
    read_env_config(body, *entry, true);
    const auto state = entry->env.reset(entry->request, entry->episode_len, entry->seed, entry->optimized);
    const std::string id = fresh_id("env-");
    {
      std::lock_guard lock(envs_mutex);
      if (envs.size() >= opts.max_envs) {
        throw ResourceGuardError("too many environments", static_cast<double>(envs.size() + 1),
                                 static_cast<double>(opts.max_envs));
      }
      envs[id] = entry;
    }
    return {{"env_id", id},
            {"state", state},
            {"episode_len", entry->episode_len},
            {"optimized_cells", entry->env.optimized_cells()},
            {"grid", entry->env.grid()}};
  }

  json env_reset(const std::string& id, const json& body) {
    auto entry = find_env(id);
    std::unique_lock lock(entry->mutex, std::try_to_lock);
    if (!lock) throw ConflictError("environment '" + id + "' is busy");
    EnvEntry next;
    next.request = entry->request;
    next.episode_len = entry->episode_len;
    next.seed = entry->seed;
    next.optimized = entry->optimized;
    if (!body.is_null()) read_env_config(body, next, false);
    AntennaEnv env(opts.limits);
    const auto state = env.reset(next.request, next.episode_len, next.seed, next.optimized);
    entry->env = std::move(env);
    entry->request = std::move(next.request);
    entry->episode_len = next.episode_len;
    entry->seed = next.seed;
    entry->optimized = std::move(next.optimized);
    return {{"env_id", id}, {"state", state}};
  }

  json env_step(const std::string& id, const json& body) {
    auto entry = find_env(id);
    std::unique_lock lock(entry->mutex, std::try_to_lock);
    if (!lock) throw ConflictError("environment '" + id + "' is busy with another step");
    require_object(body, "body");
    if (!body.contains("action")) throw ValidationError("action", "missing required field");
    if (!entry->env.ready()) throw StateError("environment not reset");
    const Action action = action_from_json(body.at("action"), "action", entry->env.state().beams);
    std::function<void(const std::string&)> hook;
    {
      std::lock_guard hl(hook_mutex);
      hook = step_hook;
    }
    if (hook) hook(id);
    json out = entry->env.step(action);
    out["env_id"] = id;
    return out;
  }

  json env_delete(const std::string& id) {
    std::lock_guard lock(envs_mutex);
    if (!envs.erase(id)) throw NotFoundError("unknown environment '" + id + "'");
    return {{"env_id", id}, {"deleted", true}};
  }

  json csi_dataset(const json& body) {
    const auto params = csi_params_from_json(body);
    const auto d = harness.generate_or_fetch(params);
    json samples = json::array();
    for (const auto& s : d.samples) samples.push_back(s);
    return {{"key", d.key},
            {"cache_hit", d.cache_hit},
            {"shape", d.shape},
            {"num_samples", d.samples.size()},
            {"samples", std::move(samples)},
            {"download", "/v1/datasets/" + d.key}};
  }

  json csi_verify(const json& body) {
    require_object(body, "body");
    if (!body.contains("key")) throw ValidationError("key", "missing required field");
    const std::string key = string_at(body, "key", "", "");
    const auto d = harness.load(key);
    if (body.contains("restored") == body.contains("codec")) {
      throw ValidationError("restored", "give exactly one of 'restored' or 'codec'");
    }
    if (body.contains("codec")) {
      return system_verify(d, codec_by_name(string_at(body, "codec", "", "")), opts.limits);
    }
    const auto& arr = array_at(body, "restored", "");
    std::vector<CsiSample> restored;
    restored.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
      restored.push_back(csi_sample_from_json(arr[i], "restored[" + std::to_string(i) + "]"));
    }
    return system_verify(d, restored, opts.limits);
  }

  json traffic_evaluate(const json& body) {
    require_object(body, "body");
    const std::size_t k = count_at(body, "k", "", 5);
    const auto criterion = body.contains("criterion")
                               ? topk_criterion_from_string(string_at(body, "criterion", "", ""), "criterion")
                               : TopKCriterion::peak;
    if (body.contains("history")) {
      const auto& arr = array_at(body, "history", "");
      std::vector<CellCountSeries> history;
      for (std::size_t i = 0; i < arr.size(); ++i) {
        history.push_back(series_from_json(arr[i], "history[" + std::to_string(i) + "]"));
      }
      if (!body.contains("truth")) throw ValidationError("truth", "missing required field");
      const auto truth = series_from_json(body.at("truth"), "truth");
      const auto r = transfer_evaluate(history, truth, k, criterion);
      return {{"metrics", r.metrics}, {"topk", r.topk}, {"prediction", r.prediction}};
    }
    if (!body.contains("prediction")) throw ValidationError("prediction", "missing required field");
    if (!body.contains("truth")) throw ValidationError("truth", "missing required field");
    const auto pred = series_from_json(body.at("prediction"), "prediction");
    const auto truth = series_from_json(body.at("truth"), "truth");
    return {{"metrics", forecast_metrics(pred, truth)}, {"topk", topk_report(pred, truth, k, criterion)}};
  }

  HttpReply dataset(const std::string& key, bool meta_only, const std::string& id) {
    if (meta_only) return ok(id, store.metadata(key));
    const auto d = store.get(key);
    HttpReply r;
    r.content_type = "application/octet-stream";
    r.body = d.payload;
    r.headers["X-Netcomb-Key"] = key;
    r.headers["X-Netcomb-Checksum"] = d.metadata.value("checksum", std::string());
    r.headers["X-Request-Id"] = id;
    return r;
  }

  static HttpReply ok(const std::string& id, json body) {
    HttpReply r;
    r.body = json{{"id", id}, {"version", kVersion}, {"body", std::move(body)}}.dump();
    r.headers["X-Request-Id"] = id;
    return r;
  }

  static HttpReply fail(const std::string& id, int status, json error) {
    HttpReply r;
    r.status = status;
    r.body = json{{"id", id}, {"version", kVersion}, {"error", std::move(error)}}.dump();
    r.headers["X-Request-Id"] = id;
    return r;
  }

  HttpReply route(const std::string& method, const std::vector<std::string>& seg, const json& body,
                  const std::string& id) {
    const std::size_t n = seg.size();
    auto is = [&](std::initializer_list<const char*> want) {
      if (want.size() != n) return false;
      std::size_t i = 0;
      for (const char* w : want) {
        if (*w != '*' && seg[i] != w) return false;
        ++i;
      }
      return true;
    };
    auto expect = [&](const char* m) {
      if (method != m) throw HttpError(405, "method_not_allowed", method + " not allowed here");
    };
    if (n < 2 || seg[0] != "v1") throw HttpError(404, "not_found", "no such endpoint");
    if (is({"v1", "simulate"})) return expect("POST"), ok(id, simulate(body, id));
    if (is({"v1", "env"})) return expect("POST"), ok(id, env_create(body));
    if (is({"v1", "env", "*"})) return expect("DELETE"), ok(id, env_delete(seg[2]));
    if (is({"v1", "env", "*", "reset"})) return expect("POST"), ok(id, env_reset(seg[2], body));
    if (is({"v1", "env", "*", "step"})) return expect("POST"), ok(id, env_step(seg[2], body));
    if (is({"v1", "csi", "dataset"})) return expect("POST"), ok(id, csi_dataset(body));
    if (is({"v1", "csi", "verify"})) return expect("POST"), ok(id, csi_verify(body));
    if (is({"v1", "traffic", "evaluate"})) return expect("POST"), ok(id, traffic_evaluate(body));
    if (is({"v1", "datasets", "*"})) return expect("GET"), dataset(seg[2], false, id);
    if (is({"v1", "datasets", "*", "meta"})) return expect("GET"), dataset(seg[2], true, id);
    if (is({"v1", "status", "*"})) {
      if (method == "DELETE") return ok(id, cancel(seg[2]));
      return expect("GET"), ok(id, status(seg[2]));
    }
    throw HttpError(404, "not_found", "no such endpoint");
  }
};

Service::Service(ServiceOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = handle(req.method, req.path, req.body, req.get_header_value("X-Request-Id"));
    res.status = reply.status;
    for (const auto& [k, v] : reply.headers) res.set_header(k, v);
    res.set_content(reply.body, reply.content_type);
  };
  auto& svr = impl_->server;
  svr.set_payload_max_length(impl_->opts.max_body_bytes);
  svr.Get(".*", handler);
  svr.Post(".*", handler);
  svr.Delete(".*", handler);
}

Service::~Service() { stop(); }

HttpReply Service::handle(const std::string& method, const std::string& path, const std::string& body,
                          const std::string& request_id) {
  auto& im = *impl_;
  std::string id = request_id;
  try {
    json payload;
    if (!body.empty()) {
      try {
        payload = json::parse(body);
      } catch (const json::parse_error& e) {
        throw ParseError(std::string("request body is not JSON: ") + e.what());
      }
    }
    if (payload.is_object() && payload.contains("body")) {
      if (payload.contains("id")) {
        if (!payload.at("id").is_string()) throw ValidationError("id", "expected a string");
        id = payload.at("id").get<std::string>();
      }
      json inner = std::move(payload.at("body"));
      payload = std::move(inner);
    }
    if (id.empty()) id = im.fresh_id("req-");
    return im.route(method, split_path(path), payload, id);
  } catch (const HttpError& e) {
    if (id.empty()) id = im.fresh_id("req-");
    return Impl::fail(id, e.status(), {{"code", e.code()}, {"message", e.what()}});
  } catch (const std::exception& e) {
    if (id.empty()) id = im.fresh_id("req-");
    return Impl::fail(id, http_status(e), error_body(e));
  }
}

int Service::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return bound;
}

bool Service::serve(const std::string& host, int port) { return impl_->server.listen(host, port); }

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Service::set_step_hook(std::function<void(const std::string&)> hook) {
  std::lock_guard lock(impl_->hook_mutex);
  impl_->step_hook = std::move(hook);
}

std::size_t Service::simulation_calls() const { return impl_->simulations.load(); }

}  // namespace netcomb
