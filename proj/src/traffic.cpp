#include "netcomb/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "json_fields.hpp"
#include "netcomb/large_scale.hpp"

namespace netcomb {

std::string to_string(EventType t) {
  switch (t) {
    case EventType::concert: return "concert";
    case EventType::championship: return "championship";
    case EventType::esports: return "esports";
  }
  return "concert";
}

EventType event_type_from_string(const std::string& s, const std::string& path) {
  if (s == "concert") return EventType::concert;
  if (s == "championship") return EventType::championship;
  if (s == "esports") return EventType::esports;
  throw ValidationError(path, "unknown event type '" + s + "'");
}

void EventSpec::validate() const {
  if (!std::isfinite(event_start) || !std::isfinite(event_end)) throw ValidationError("event.event_start", "must be finite");
  if (!(event_end > event_start)) throw ValidationError("event.event_end", "must be after event_start");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("event.radius", "must be positive");
  const auto& i = intensity;
  if (!(i.base_attraction >= 0.0 && i.base_attraction <= 1.0)) {
    throw ValidationError("event.intensity.base_attraction", "must be in [0, 1]");
  }
  if (!(i.peak_attraction >= 0.0 && i.peak_attraction <= 1.0)) {
    throw ValidationError("event.intensity.peak_attraction", "must be in [0, 1]");
  }
  if (!(i.ramp >= 0.0) || !std::isfinite(i.ramp)) throw ValidationError("event.intensity.ramp", "must be non-negative");
  if (!(i.venue_radius > 0.0)) throw ValidationError("event.intensity.venue_radius", "must be positive");
}

double EventSpec::attraction_at(double t) const {
  const double base = intensity.base_attraction;
  const double peak = intensity.peak_attraction;
  const double ramp = intensity.ramp;
  if (t >= event_start && t <= event_end) return peak;
  if (t < event_start) {
    if (ramp <= 0.0 || t <= event_start - ramp) return base;
    return base + (peak - base) * (t - (event_start - ramp)) / ramp;
  }
  if (ramp <= 0.0 || t >= event_end + ramp) return base;
  return peak - (peak - base) * (t - event_end) / ramp;
}

void to_json(json& j, const EventSpec& e) {
  j = json{{"venue_center", {{"x", e.venue_center.x}, {"y", e.venue_center.y}}},
           {"radius", e.radius},
           {"event_start", e.event_start},
           {"event_end", e.event_end},
           {"event_type", to_string(e.event_type)},
           {"intensity",
            {{"base_attraction", e.intensity.base_attraction},
             {"peak_attraction", e.intensity.peak_attraction},
             {"ramp", e.intensity.ramp},
             {"venue_radius", e.intensity.venue_radius}}}};
}

EventSpec event_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string at = path + ".";
  EventSpec e;
  if (j.contains("venue_center")) {
    const auto& c = object_at(j, "venue_center", at);
    e.venue_center = {required_number(c, "x", at + "venue_center."), required_number(c, "y", at + "venue_center.")};
  }
  e.radius = number_at(j, "radius", at, e.radius);
  e.event_start = required_number(j, "event_start", at);
  e.event_end = required_number(j, "event_end", at);
  if (j.contains("event_type")) {
    e.event_type = event_type_from_string(string_at(j, "event_type", at, ""), at + "event_type");
  }
  if (j.contains("intensity")) {
    const auto& i = object_at(j, "intensity", at);
    const std::string iat = at + "intensity.";
    e.intensity.base_attraction = number_at(i, "base_attraction", iat, e.intensity.base_attraction);
    e.intensity.peak_attraction = number_at(i, "peak_attraction", iat, e.intensity.peak_attraction);
    e.intensity.ramp = number_at(i, "ramp", iat, e.intensity.ramp);
    e.intensity.venue_radius = number_at(i, "venue_radius", iat, e.intensity.venue_radius);
  }
  try {
    e.validate();
  } catch (const ValidationError& err) {
    // validate() names fields from "event."; re-root them at `path`.
    const std::string f = err.field();
    throw ValidationError(path + f.substr(f.find('.')), err.detail());
  }
  return e;
}

std::vector<double> event_bins(const EventSpec& spec) {
  spec.validate();
  const double span = spec.window_end() - spec.window_start();
  if (span < kBinSeconds) throw ValidationError("event", "window shorter than one bin");
  // Guard the ceil against representation noise on exact multiples.
  const double exact = span / kBinSeconds;
  const auto n = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  std::vector<double> bins(n);
  for (std::size_t b = 0; b < n; ++b) bins[b] = spec.window_start() + kBinSeconds * static_cast<double>(b);
  return bins;
}

std::int64_t CellCountSeries::bin_total(std::size_t b) const {
  std::int64_t t = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) t += at(c, b);
  return t;
}

// Series text format:
//   netcomb-series 1
//   event <json spec on one line>
//   bins <n> <t0> <t1> ...
//   cells <m>
//   <cell_id> <count_0> ... <count_n-1>      (m lines)
std::string write_series(const CellCountSeries& s) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "netcomb-series 1\n";
  os << "event " << json(s.spec).dump() << "\n";
  os << "bins " << s.bins.size();
  for (double b : s.bins) os << " " << b;
  os << "\ncells " << s.cells.size() << "\n";
  for (std::size_t c = 0; c < s.cells.size(); ++c) {
    os << s.cells[c];
    for (std::size_t b = 0; b < s.bins.size(); ++b) os << " " << s.at(c, b);
    os << "\n";
  }
  return os.str();
}

CellCountSeries read_series(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(std::string("series truncated before ") + what);
  };
  next_line("header");
  if (line != "netcomb-series 1") throw ParseError("not a netcomb-series v1 document");
  CellCountSeries s;
  next_line("event");
  if (line.rfind("event ", 0) != 0) throw ParseError("expected 'event' line");
  try {
    s.spec = event_from_json(json::parse(line.substr(6)));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad event line: ") + e.what());
  }
  next_line("bins");
  {
    std::istringstream ls(line);
    std::string tag;
    std::size_t n = 0;
    if (!(ls >> tag >> n) || tag != "bins") throw ParseError("expected 'bins <n> ...' line");
    s.bins.resize(n);
    for (auto& b : s.bins) {
      if (!(ls >> b)) throw ParseError("bin list shorter than declared");
    }
  }
  next_line("cells");
  std::size_t m = 0;
  {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag >> m) || tag != "cells") throw ParseError("expected 'cells <m>' line");
  }
  s.cells.resize(m);
  s.counts.resize(m * s.bins.size());
  for (std::size_t c = 0; c < m; ++c) {
    next_line("count rows");
    std::istringstream ls(line);
    if (!(ls >> s.cells[c])) throw ParseError("bad cell id in row " + std::to_string(c));
    for (std::size_t b = 0; b < s.bins.size(); ++b) {
      if (!(ls >> s.at(c, b))) throw ParseError("row " + std::to_string(c) + " shorter than the bin count");
      if (s.at(c, b) < 0) throw ParseError("negative count in row " + std::to_string(c));
    }
    std::string extra;
    if (ls >> extra) throw ParseError("row " + std::to_string(c) + " longer than the bin count");
  }
  return s;
}

void to_json(json& j, const CellCountSeries& s) {
  json rows = json::array();
  for (std::size_t c = 0; c < s.cells.size(); ++c) {
    rows.push_back(std::vector<std::int64_t>(s.counts.begin() + static_cast<std::ptrdiff_t>(c * s.bins.size()),
                                             s.counts.begin() + static_cast<std::ptrdiff_t>((c + 1) * s.bins.size())));
  }
  j = json{{"event", s.spec}, {"cells", s.cells}, {"bins", s.bins}, {"counts", rows}};
}

CellCountSeries series_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string at = path + ".";
  CellCountSeries s;
  if (j.contains("event")) s.spec = event_from_json(j.at("event"), at + "event");
  if (!j.contains("cells")) throw ValidationError(at + "cells", "missing required field");
  s.cells = int_list(j.at("cells"), at + "cells");
  if (!j.contains("counts")) throw ValidationError(at + "counts", "missing required field");
  const auto& rows = array_at(j, "counts", at);
  if (rows.size() != s.cells.size()) throw ValidationError(at + "counts", "one row per cell expected");
  if (j.contains("bins")) {
    s.bins = number_list(j.at("bins"), at + "bins");
  } else if (j.contains("event")) {
    s.bins = event_bins(s.spec);
  } else if (!rows.empty()) {
    // Bare matrices (no event) get relative bin starts.
    s.bins.resize(rows[0].size());
    for (std::size_t b = 0; b < s.bins.size(); ++b) s.bins[b] = kBinSeconds * static_cast<double>(b);
  }
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const std::string rat = at + "counts[" + std::to_string(c) + "]";
    if (!rows[c].is_array() || rows[c].size() != s.bins.size()) {
      throw ValidationError(rat, "expected " + std::to_string(s.bins.size()) + " counts");
    }
    for (std::size_t b = 0; b < rows[c].size(); ++b) {
      const auto& v = rows[c][b];
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ValidationError(rat + "[" + std::to_string(b) + "]", "expected a non-negative integer");
      }
      s.counts.push_back(v.get<std::int64_t>());
    }
  }
  return s;
}

std::vector<int> cells_in_radius(const Scenario& scenario, const EventSpec& spec) {
  std::vector<int> out;
  for (const auto& site : scenario.sites) {
    const double d = std::hypot(site.position.x - spec.venue_center.x, site.position.y - spec.venue_center.y);
    if (d > spec.radius) continue;
    for (const auto& c : site.cells) out.push_back(c.cell_id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

CellCountSeries synthesize_event(const EventSpec& spec, const Scenario& scenario, std::size_t n_users,
                                 std::uint64_t seed, const SynthesisOptions& options) {
  spec.validate();
  validate_scenario(scenario);
  if (!scenario.map_bounds.contains(spec.venue_center.x, spec.venue_center.y)) {
    throw ValidationError("event.venue_center", "venue lies outside the map");
  }
  const double per_bin = kBinSeconds / options.step;
  if (!(options.step > 0.0) || std::abs(per_bin - std::round(per_bin)) > 1e-9) {
    throw ValidationError("options.step", "must divide the 300 s bin");
  }
  CellCountSeries s;
  s.spec = spec;
  s.cells = cells_in_radius(scenario, spec);
  if (s.cells.empty()) throw ValidationError("event.radius", "no cell within the radius of the venue");
  s.bins = event_bins(spec);
  s.counts.assign(s.cells.size() * s.bins.size(), 0);

  MobilityParams mob;
  mob.model = MobilityModel::attractor;
  mob.speed_min = options.speed_min;
  mob.speed_max = options.speed_max;
  mob.attractor_center = spec.venue_center;
  mob.attractor_radius = spec.intensity.venue_radius;
  mob.home_radius = options.home_radius;
  mob.attraction = spec.attraction_at(spec.window_start());
  Population pop(scenario, n_users, mob, seed);
  ShadowingField shadowing(scenario, seed);

  // Flat scenario cell index -> row in the series, or -1 outside the radius.
  const auto ids = scenario.cell_ids();
  std::vector<std::ptrdiff_t> row(ids.size(), -1);
  for (std::size_t c = 0; c < ids.size(); ++c) {
    const auto it = std::lower_bound(s.cells.begin(), s.cells.end(), ids[c]);
    if (it != s.cells.end() && *it == ids[c]) row[c] = it - s.cells.begin();
  }
  const auto refs = scenario.cell_refs();
  const auto steps_per_bin = static_cast<std::size_t>(std::llround(per_bin));

  for (std::size_t b = 0; b < s.bins.size(); ++b) {
    if (b > 0) {
      for (std::size_t k = 0; k < steps_per_bin; ++k) {
        const double t = s.bins[b - 1] + options.step * static_cast<double>(k);
        pop.set_attraction(spec.attraction_at(t));
        pop.step(options.step, false);
      }
    }
    const auto ls = build_large_scale(scenario, pop.snapshot(), shadowing);
    for (std::size_t u = 0; u < ls.num_users; ++u) {
      std::ptrdiff_t best = -1;
      double best_rsrp = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < ls.num_cells; ++c) {
        if (!ls.is_usable(u, c)) continue;
        const double rsrp = scenario.cell(refs[c]).tx_power_per_re - ls.loss(u, c);
        if (rsrp > best_rsrp || (rsrp == best_rsrp && best >= 0 && ids[c] < ids[static_cast<std::size_t>(best)])) {
          best_rsrp = rsrp;
          best = static_cast<std::ptrdiff_t>(c);
        }
      }
      if (best >= 0 && row[static_cast<std::size_t>(best)] >= 0) {
        ++s.at(static_cast<std::size_t>(row[static_cast<std::size_t>(best)]), b);
      }
    }
  }
  return s;
}

namespace {

void check_same_index(const CellCountSeries& pred, const CellCountSeries& truth) {
  if (pred.cells != truth.cells) throw IndexMismatchError("prediction and truth cover different cells");
  if (pred.bins.size() != truth.bins.size()) throw IndexMismatchError("prediction and truth have different bin counts");
  if (pred.counts.size() != pred.cells.size() * pred.bins.size() ||
      truth.counts.size() != truth.cells.size() * truth.bins.size()) {
    throw IndexMismatchError("count matrix does not match its index");
  }
}

}  // namespace

ForecastMetrics forecast_metrics(const CellCountSeries& pred, const CellCountSeries& truth) {
  check_same_index(pred, truth);
  const std::size_t nc = truth.num_cells();
  const std::size_t nb = truth.num_bins();
  if (nc == 0 || nb == 0) throw IndexMismatchError("empty series");
  ForecastMetrics m;
  double sq = 0.0;
  double ab = 0.0;
  double total = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    double csq = 0.0;
    double cab = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      const double e = static_cast<double>(pred.at(c, b) - truth.at(c, b));
      csq += e * e;
      cab += std::abs(e);
      total += static_cast<double>(truth.at(c, b));
    }
    sq += csq;
    ab += cab;
    m.per_cell.push_back({truth.cells[c], std::sqrt(csq / static_cast<double>(nb)), cab / static_cast<double>(nb)});
  }
  const double n = static_cast<double>(nc * nb);
  m.rmse = std::sqrt(sq / n);
  m.mae = ab / n;
  if (total > 0.0) {
    m.rel_err = ab / total;
  } else {
    m.rel_err = std::numeric_limits<double>::quiet_NaN();
    m.rel_err_defined = false;
  }
  return m;
}

std::string to_string(TopKCriterion c) { return c == TopKCriterion::peak ? "peak" : "total"; }

TopKCriterion topk_criterion_from_string(const std::string& s, const std::string& path) {
  if (s == "peak") return TopKCriterion::peak;
  if (s == "total") return TopKCriterion::total;
  throw ValidationError(path, "expected 'peak' or 'total'");
}

namespace {

std::vector<RankedCell> full_ranking(const CellCountSeries& s, TopKCriterion criterion) {
  std::vector<RankedCell> r;
  r.reserve(s.num_cells());
  for (std::size_t c = 0; c < s.num_cells(); ++c) {
    std::int64_t score = 0;
    for (std::size_t b = 0; b < s.num_bins(); ++b) {
      score = criterion == TopKCriterion::peak ? std::max(score, s.at(c, b)) : score + s.at(c, b);
    }
    r.push_back({s.cells[c], score});
  }
  std::sort(r.begin(), r.end(), [](const RankedCell& a, const RankedCell& b) {
    return a.score != b.score ? a.score > b.score : a.cell_id < b.cell_id;
  });
  return r;
}

}  // namespace

TopKResult topk_cells(const CellCountSeries& s, std::size_t k, TopKCriterion criterion) {
  if (k == 0) throw ValidationError("k", "must be at least 1");
  TopKResult out;
  out.cells = full_ranking(s, criterion);
  if (k > out.cells.size()) {
    out.truncated = true;
  } else {
    out.cells.resize(k);
  }
  return out;
}

TopKReport topk_report(const CellCountSeries& pred, const CellCountSeries& truth, std::size_t k,
                       TopKCriterion criterion) {
  check_same_index(pred, truth);
  TopKReport r;
  r.k = k;
  r.criterion = criterion;
  const auto p = topk_cells(pred, k, criterion);
  const auto t = topk_cells(truth, k, criterion);
  r.predicted = p.cells;
  r.truth = t.cells;
  r.truncated = p.truncated;
  for (const auto& a : r.predicted) {
    r.overlap += static_cast<std::size_t>(std::count_if(r.truth.begin(), r.truth.end(),
                                                        [&](const RankedCell& b) { return b.cell_id == a.cell_id; }));
  }
  const auto fp = full_ranking(pred, criterion);
  const auto ft = full_ranking(truth, criterion);
  const std::size_t n = fp.size();
  if (n < 2) {
    r.rank_correlation = 1.0;
  } else {
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(
          std::find_if(ft.begin(), ft.end(), [&](const RankedCell& c) { return c.cell_id == fp[i].cell_id; }) - ft.begin());
      const double d = static_cast<double>(i) - static_cast<double>(j);
      d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    r.rank_correlation = 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
  }
  return r;
}

namespace {
CellCountSeries baseline_on(const std::vector<CellCountSeries>& history, const EventSpec& target,
                            const std::vector<int>& cells, std::vector<double> bins) {
  if (history.empty()) throw ValidationError("history", "at least one historical series required");
  CellCountSeries s;
  s.spec = target;
  s.cells = cells;
  s.bins = std::move(bins);
  s.counts.assign(cells.size() * s.bins.size(), 0);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t b = 0; b < s.bins.size(); ++b) {
      std::int64_t sum = 0;
      std::int64_t n = 0;
      for (const auto& h : history) {
        const auto it = std::find(h.cells.begin(), h.cells.end(), cells[c]);
        if (it == h.cells.end() || b >= h.num_bins()) continue;
        sum += h.at(static_cast<std::size_t>(it - h.cells.begin()), b);
        ++n;
      }
      if (n > 0) s.at(c, b) = std::llround(static_cast<double>(sum) / static_cast<double>(n));
    }
  }
  return s;
}
}  // namespace

CellCountSeries baseline_forecast(const std::vector<CellCountSeries>& history, const EventSpec& target,
                                  const std::vector<int>& cells) {
  return baseline_on(history, target, cells, event_bins(target));
}

std::pair<CellCountSeries, CellCountSeries> align_relative(const CellCountSeries& a, const CellCountSeries& b) {
  if (a.cells != b.cells) throw IndexMismatchError("series cover different cells");
  const std::size_t n = std::min(a.num_bins(), b.num_bins());
  auto cut = [n](const CellCountSeries& s) {
    CellCountSeries out;
    out.spec = s.spec;
    out.cells = s.cells;
    out.bins.assign(s.bins.begin(), s.bins.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t c = 0; c < s.num_cells(); ++c)
      for (std::size_t b = 0; b < n; ++b) out.counts.push_back(s.at(c, b));
    return out;
  };
  return {cut(a), cut(b)};
}

TransferResult transfer_evaluate(const std::vector<CellCountSeries>& history, const CellCountSeries& target,
                                 std::size_t k, TopKCriterion criterion) {
  TransferResult r;
  r.prediction = baseline_on(history, target.spec, target.cells, target.bins);
  const auto [pred, truth] = align_relative(r.prediction, target);
  r.metrics = forecast_metrics(pred, truth);
  r.topk = topk_report(pred, truth, k, criterion);
  return r;
}

void to_json(json& j, const ForecastMetrics& m) {
  json cells = json::array();
  for (const auto& c : m.per_cell) cells.push_back({{"cell_id", c.cell_id}, {"rmse", c.rmse}, {"mae", c.mae}});
  j = json{{"rmse", m.rmse},
           {"mae", m.mae},
           {"rel_err", m.rel_err_defined ? json(m.rel_err) : json(nullptr)},
           {"rel_err_defined", m.rel_err_defined},
           {"per_cell", cells}};
}

void to_json(json& j, const TopKReport& r) {
  auto ranked = [](const std::vector<RankedCell>& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back({{"cell_id", c.cell_id}, {"score", c.score}});
    return a;
  };
  j = json{{"k", r.k},
           {"criterion", to_string(r.criterion)},
           {"predicted", ranked(r.predicted)},
           {"truth", ranked(r.truth)},
           {"overlap", r.overlap},
           {"rank_correlation", r.rank_correlation},
           {"truncated", r.truncated}};
}

}  // namespace netcomb
