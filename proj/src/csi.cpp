#include "netcomb/csi.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "json_fields.hpp"
#include "netcomb/wire.hpp"

namespace netcomb {

using cd = std::complex<double>;

void CsiDatasetParams::validate() const {
  validate_scenario(scenario);
  if (n_users == 0) throw ValidationError("n_users", "must be at least 1");
  if (samples_per_user == 0) throw ValidationError("samples_per_user", "must be at least 1");
  if (subband_size < 1) throw ValidationError("subband_size", "must be at least 1 RE");
  if (subband_size > scenario.num_re()) throw ValidationError("subband_size", "larger than the RE grid");
  mobility.validate(scenario.map_bounds);
}

SimRequest CsiDatasetParams::link_request() const {
  SimRequest r;
  r.mode = SimMode::link_channel;
  r.scenario = scenario;
  r.n_users = n_users;
  r.mobility = mobility;
  r.duration = static_cast<double>(samples_per_user) * scenario.tick;
  r.seed = seed;
  return r;
}

void to_json(json& j, const CsiDatasetParams& p) {
  j = json{{"scenario", p.scenario},
           {"n_users", p.n_users},
           {"mobility", p.mobility},
           {"samples_per_user", p.samples_per_user},
           {"subband_size", p.subband_size},
           {"seed", p.seed}};
}

CsiDatasetParams csi_params_from_json(const json& j) {
  require_object(j, "params");
  CsiDatasetParams p;
  if (!j.contains("scenario")) throw ValidationError("scenario", "missing required field");
  try {
    p.scenario = j.at("scenario").get<Scenario>();
  } catch (const ValidationError& e) {
    throw e.field() == "scenario" ? e : e.nested("scenario");
  } catch (const json::exception& e) {
    throw ValidationError("scenario", e.what());
  }
  p.n_users = count_at(j, "n_users", "", p.n_users);
  if (j.contains("mobility")) p.mobility = mobility_from_json(j.at("mobility"));
  p.samples_per_user = count_at(j, "samples_per_user", "", p.samples_per_user);
  p.subband_size = integer_at(j, "subband_size", "", p.subband_size);
  p.seed = uint64_at(j, "seed", "", p.seed);
  p.validate();
  return p;
}

bool CsiSample::all_zero() const {
  return std::all_of(vectors.begin(), vectors.end(), [](const cd& v) { return v == cd{}; });
}

void to_json(json& j, const CsiSample& s) {
  json vecs = json::array();
  for (std::size_t b = 0; b < s.num_subbands; ++b) {
    json row = json::array();
    for (const auto& v : s.subband(b)) row.push_back({v.real(), v.imag()});
    vecs.push_back(std::move(row));
  }
  j = json{{"tick_index", s.tick_index},
           {"user_id", s.user_id},
           {"cell_id", s.cell_id},
           {"vectors", vecs},
           {"zero", std::vector<bool>(s.zero.begin(), s.zero.end())}};
}

CsiSample csi_sample_from_json(const json& j, const std::string& path) {
  require_object(j, path);
  const std::string at = path + ".";
  CsiSample s;
  s.tick_index = j.contains("tick_index") ? static_cast<std::int64_t>(uint64_at(j, "tick_index", at, 0)) : 0;
  s.user_id = integer_at(j, "user_id", at, 0);
  s.cell_id = integer_at(j, "cell_id", at, 0);
  if (!j.contains("vectors")) throw ValidationError(at + "vectors", "missing required field");
  const auto& vecs = array_at(j, "vectors", at);
  s.num_subbands = vecs.size();
  for (std::size_t b = 0; b < vecs.size(); ++b) {
    const std::string row_at = at + "vectors[" + std::to_string(b) + "]";
    if (!vecs[b].is_array()) throw ValidationError(row_at, "expected an array of [re, im] pairs");
    if (b == 0) s.tx_ports = vecs[b].size();
    if (vecs[b].size() != s.tx_ports) throw ValidationError(row_at, "rows must have equal length");
    for (std::size_t t = 0; t < vecs[b].size(); ++t) {
      const auto& c = vecs[b][t];
      if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
        throw ValidationError(row_at + "[" + std::to_string(t) + "]", "expected [re, im]");
      }
      s.vectors.emplace_back(c[0].get<double>(), c[1].get<double>());
      if (!std::isfinite(s.vectors.back().real()) || !std::isfinite(s.vectors.back().imag())) {
        throw ValidationError(row_at + "[" + std::to_string(t) + "]", "must be finite");
      }
    }
  }
  if (j.contains("zero")) {
    const auto& z = array_at(j, "zero", at);
    if (z.size() != s.num_subbands) throw ValidationError(at + "zero", "one flag per subband expected");
    for (const auto& f : z) {
      if (!f.is_boolean()) throw ValidationError(at + "zero", "expected booleans");
      s.zero.push_back(f.get<bool>());
    }
  } else {
    for (std::size_t b = 0; b < s.num_subbands; ++b) {
      const auto v = s.subband(b);
      s.zero.push_back(std::all_of(v.begin(), v.end(), [](const cd& x) { return x == cd{}; }));
    }
  }
  return s;
}

std::vector<cd> dominant_eigenvector(std::span<const cd> r, std::size_t n) {
  // Hermitian R = A + iB embeds as the real symmetric [[A, -B], [B, A]];
  // each eigenpair of R appears twice, as (x, y) and (-y, x) for v = x + iy.
  const std::size_t m = 2 * n;
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const cd z = r[i * n + k];
      a[i * m + k] = z.real();
      a[(i + n) * m + k + n] = z.real();
      a[i * m + k + n] = -z.imag();
      a[(i + n) * m + k] = z.imag();
    }
  }
  std::vector<double> v(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) v[i * m + i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        total += a[i * m + k] * a[i * m + k];
        if (i != k) off += a[i * m + k] * a[i * m + k];
      }
    }
    if (off <= 1e-30 * total || total == 0.0) break;
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = a[p * m + q];
        if (apq == 0.0) continue;
        const double theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < m; ++k) {
          const double akp = a[k * m + p];
          const double akq = a[k * m + q];
          a[k * m + p] = c * akp - s * akq;
          a[k * m + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double apk = a[p * m + k];
          const double aqk = a[q * m + k];
          a[p * m + k] = c * apk - s * aqk;
          a[q * m + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < m; ++k) {
          const double vkp = v[k * m + p];
          const double vkq = v[k * m + q];
          v[k * m + p] = c * vkp - s * vkq;
          v[k * m + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i) {
    if (a[i * m + i] > a[best * m + best]) best = i;
  }
  std::vector<cd> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = cd(v[i * m + best], v[(i + n) * m + best]);
  return out;
}

namespace {

void normalize_phase(std::span<cd> v) {
  double norm = 0.0;
  for (const auto& x : v) norm += std::norm(x);
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (auto& x : v) x /= norm;
  for (auto& x : v) {
    const double mag = std::abs(x);
    if (mag > 1e-12) {
      const cd rot = std::conj(x) / mag;
      for (auto& y : v) y *= rot;
      x = cd(mag, 0.0);
      break;
    }
  }
}

}  // namespace

template <typename T>
CsiSample extract_characteristic(std::span<const std::complex<T>> link, std::size_t num_re, std::size_t tx,
                                 std::size_t rx, std::size_t subband_size) {
  if (subband_size == 0) throw ValidationError("subband_size", "must be at least 1 RE");
  if (link.size() != num_re * tx * rx) throw IndexMismatchError("link size does not match (num_re, tx, rx)");
  CsiSample s;
  s.tx_ports = tx;
  s.num_subbands = (num_re + subband_size - 1) / subband_size;
  s.vectors.assign(s.num_subbands * tx, cd{});
  s.zero.assign(s.num_subbands, false);
  std::vector<cd> cov(tx * tx);
  for (std::size_t b = 0; b < s.num_subbands; ++b) {
    const std::size_t k0 = b * subband_size;
    const std::size_t k1 = std::min(num_re, k0 + subband_size);
    std::fill(cov.begin(), cov.end(), cd{});
    for (std::size_t k = k0; k < k1; ++k) {
      const auto* h = link.data() + k * tx * rx;
      // (G^H G)[i][j] = sum_r conj(G[r][i]) G[r][j], G[r][i] = H[i][r].
      for (std::size_t i = 0; i < tx; ++i) {
        for (std::size_t j = 0; j < tx; ++j) {
          cd acc{};
          for (std::size_t r = 0; r < rx; ++r) {
            acc += std::conj(cd(h[i * rx + r])) * cd(h[j * rx + r]);
          }
          cov[i * tx + j] += acc;
        }
      }
    }
    double trace = 0.0;
    for (std::size_t i = 0; i < tx; ++i) trace += cov[i * tx + i].real();
    if (!(trace > 0.0)) {
      s.zero[b] = true;
      continue;
    }
    const double inv = 1.0 / static_cast<double>(k1 - k0);
    for (auto& c : cov) c *= inv;
    auto v = dominant_eigenvector(cov, tx);
    normalize_phase(v);
    std::copy(v.begin(), v.end(), s.vectors.begin() + static_cast<std::ptrdiff_t>(b * tx));
  }
  return s;
}

template CsiSample extract_characteristic<float>(std::span<const std::complex<float>>, std::size_t, std::size_t,
                                                 std::size_t, std::size_t);
template CsiSample extract_characteristic<double>(std::span<const std::complex<double>>, std::size_t, std::size_t,
                                                  std::size_t, std::size_t);

NmseResult nmse(const std::vector<CsiSample>& orig, const std::vector<CsiSample>& restored) {
  if (orig.size() != restored.size()) {
    throw ValidationError("restored", "expected " + std::to_string(orig.size()) + " samples, got " +
                                          std::to_string(restored.size()));
  }
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < orig.size(); ++i) {
    const auto& x = orig[i];
    const auto& y = restored[i];
    if (x.num_subbands != y.num_subbands || x.tx_ports != y.tx_ports || y.vectors.size() != x.vectors.size()) {
      throw ValidationError("restored[" + std::to_string(i) + "]", "shape differs from the original sample");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < x.vectors.size(); ++k) {
      num += std::norm(x.vectors[k] - y.vectors[k]);
      den += std::norm(x.vectors[k]);
    }
    if (den == 0.0) continue;
    acc += num / den;
    ++n;
  }
  if (n == 0) throw ValidationError("samples", "no sample with a non-zero reference");
  NmseResult r;
  r.samples = n;
  r.linear = acc / static_cast<double>(n);
  r.db = r.linear > 0.0 ? std::max(10.0 * std::log10(r.linear), kSinrFloorDb) : kSinrFloorDb;
  return r;
}

std::vector<CsiSample> extract_dataset(const DecodedExport& decoded, const std::vector<LinkSampleInfo>& links,
                                       std::size_t subband_size) {
  if (links.size() != decoded.shape.num_samples) {
    throw IndexMismatchError("link list does not match the export sample count");
  }
  std::vector<CsiSample> out;
  out.reserve(links.size());
  for (std::size_t i = 0; i < links.size(); ++i) {
    auto s = extract_characteristic<float>(decoded.sample(i), decoded.shape.num_re, decoded.shape.tx_ports,
                                           decoded.shape.rx_ports, subband_size);
    s.tick_index = links[i].tick_index;
    s.user_id = links[i].user_id;
    s.cell_id = links[i].cell_id;
    out.push_back(std::move(s));
  }
  return out;
}

// Codecs. Every bit string starts with the sample header so decompress can
// rebuild the shape without side information.
namespace {

struct Header {
  std::int64_t tick_index;
  std::int32_t user_id;
  std::int32_t cell_id;
  std::uint32_t num_subbands;
  std::uint32_t tx_ports;
};

std::string write_header(const CsiSample& s) {
  Header h{s.tick_index, s.user_id, s.cell_id, static_cast<std::uint32_t>(s.num_subbands),
           static_cast<std::uint32_t>(s.tx_ports)};
  std::string out(sizeof(Header), '\0');
  std::memcpy(out.data(), &h, sizeof(Header));
  return out;
}

CsiSample read_header(const std::string& bits) {
  if (bits.size() < sizeof(Header)) throw ParseError("bit string shorter than its header");
  Header h;
  std::memcpy(&h, bits.data(), sizeof(Header));
  CsiSample s;
  s.tick_index = h.tick_index;
  s.user_id = h.user_id;
  s.cell_id = h.cell_id;
  s.num_subbands = h.num_subbands;
  s.tx_ports = h.tx_ports;
  s.vectors.assign(s.num_subbands * s.tx_ports, cd{});
  s.zero.assign(s.num_subbands, false);
  return s;
}

}  // namespace

Codec identity_codec() {
  Codec c;
  c.name = "identity";
  c.compress = [](const CsiSample& s) {
    std::string out = write_header(s);
    const std::size_t bytes = s.vectors.size() * sizeof(cd);
    out.resize(out.size() + bytes + s.num_subbands);
    std::memcpy(out.data() + sizeof(Header), s.vectors.data(), bytes);
    for (std::size_t b = 0; b < s.num_subbands; ++b) out[sizeof(Header) + bytes + b] = s.zero[b] ? 1 : 0;
    return out;
  };
  c.decompress = [](const std::string& bits) {
    CsiSample s = read_header(bits);
    const std::size_t bytes = s.vectors.size() * sizeof(cd);
    if (bits.size() != sizeof(Header) + bytes + s.num_subbands) throw ParseError("identity payload size mismatch");
    std::memcpy(s.vectors.data(), bits.data() + sizeof(Header), bytes);
    for (std::size_t b = 0; b < s.num_subbands; ++b) s.zero[b] = bits[sizeof(Header) + bytes + b] != 0;
    return s;
  };
  return c;
}

Codec null_codec() {
  Codec c;
  c.name = "null";
  c.compress = [](const CsiSample& s) { return write_header(s); };
  c.decompress = [](const std::string& bits) {
    CsiSample s = read_header(bits);
    s.zero.assign(s.num_subbands, true);
    return s;
  };
  return c;
}

Codec quantizing_codec(int bits) {
  if (bits < 1 || bits > 16) throw ValidationError("bits", "must be in [1, 16]");
  Codec c;
  c.name = "quantize" + std::to_string(bits);
  const std::uint32_t levels = (1u << bits) - 1u;
  c.compress = [bits, levels](const CsiSample& s) {
    std::string out = write_header(s);
    std::uint64_t acc = 0;
    int filled = 0;
    auto push = [&](std::uint32_t q) {
      acc |= static_cast<std::uint64_t>(q) << filled;
      filled += bits;
      while (filled >= 8) {
        out.push_back(static_cast<char>(acc & 0xff));
        acc >>= 8;
        filled -= 8;
      }
    };
    for (const auto& v : s.vectors) {
      for (double x : {v.real(), v.imag()}) {
        const double clamped = std::clamp(x, -1.0, 1.0);
        push(static_cast<std::uint32_t>(std::lround((clamped + 1.0) / 2.0 * levels)));
      }
    }
    if (filled > 0) out.push_back(static_cast<char>(acc & 0xff));
    return out;
  };
  c.decompress = [bits, levels](const std::string& in) {
    CsiSample s = read_header(in);
    const std::size_t need = sizeof(Header) + (s.vectors.size() * 2 * static_cast<std::size_t>(bits) + 7) / 8;
    if (in.size() != need) throw ParseError("quantized payload size mismatch");
    std::size_t pos = sizeof(Header);
    std::uint64_t acc = 0;
    int filled = 0;
    auto pull = [&]() {
      while (filled < bits) {
        acc |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos++])) << filled;
        filled += 8;
      }
      const auto q = static_cast<std::uint32_t>(acc & levels);
      acc >>= bits;
      filled -= bits;
      return 2.0 * q / levels - 1.0;
    };
    for (auto& v : s.vectors) {
      const double re = pull();
      const double im = pull();
      v = cd(re, im);
    }
    for (std::size_t b = 0; b < s.num_subbands; ++b) {
      const auto sub = s.subband(b);
      s.zero[b] = std::all_of(sub.begin(), sub.end(), [](const cd& x) { return x == cd{}; });
    }
    return s;
  };
  return c;
}

Codec codec_by_name(const std::string& name) {
  if (name == "identity") return identity_codec();
  if (name == "null") return null_codec();
  const std::string prefix = "quantize:";
  if (name.rfind(prefix, 0) == 0) {
    const std::string digits = name.substr(prefix.size());
    if (!digits.empty() && digits.size() <= 2 && std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      return quantizing_codec(std::stoi(digits));
    }
  }
  throw ValidationError("codec", "unknown codec '" + name + "' (identity, null, quantize:<bits>)");
}

std::vector<CsiSample> apply_codec(const Codec& codec, const std::vector<CsiSample>& samples) {
  std::vector<CsiSample> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CsiSample r;
    try {
      r = codec.decompress(codec.compress(samples[i]));
    } catch (const std::exception& e) {
      throw CodecError(i, e.what());
    }
    if (r.num_subbands != samples[i].num_subbands || r.tx_ports != samples[i].tx_ports ||
        r.vectors.size() != samples[i].vectors.size()) {
      throw CodecError(i, "restored shape differs from the original");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CellKpi> accumulate_kpis(const std::vector<PerfIndicators>& series) {
  std::vector<CellKpi> out;
  if (series.empty()) return out;
  out.resize(series.front().cells.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c].cell_id = series.front().cells[c].cell_id;
  for (const auto& tick : series) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      const auto& k = tick.cells[c];
      out[c].total_dl_traffic += k.total_dl_traffic;
      out[c].avg_dl_rate += k.avg_dl_rate * k.scheduled_users;
      out[c].avg_bler += k.avg_bler * k.scheduled_users;
      out[c].attached_users += k.attached_users;
      out[c].scheduled_users += k.scheduled_users;
    }
  }
  for (auto& k : out) {
    if (k.scheduled_users > 0) {
      k.avg_dl_rate /= k.scheduled_users;
      k.avg_bler /= k.scheduled_users;
    }
  }
  return out;
}

namespace {

std::vector<PerfIndicators> precoded_run(const CsiDataset& d, const std::vector<CsiSample>& feedback,
                                         const ResourceLimits& limits) {
  SimRequest req = d.params.link_request();
  req.mode = SimMode::protocol_stack;
  const Scenario scenario = effective_scenario(req);
  check_limits(req, limits);
  const std::size_t ticks = tick_count(req);
  const std::size_t cells = scenario.num_cells();
  const std::size_t users = req.n_users;
  const std::size_t tx = static_cast<std::size_t>(scenario.channel.tx_ports);
  const std::size_t rx = static_cast<std::size_t>(scenario.channel.rx_ports);
  const std::size_t num_re = static_cast<std::size_t>(scenario.num_re());
  const std::size_t sb = static_cast<std::size_t>(d.params.subband_size);

  Pipeline pipeline(scenario, users, req.mobility, req.seed, limits.max_users);
  std::vector<PerfIndicators> series;
  series.reserve(ticks);
  for (std::size_t t = 0; t < ticks; ++t) {
    auto hook = [&](std::size_t u, std::size_t c, std::span<const cplx> link) {
      const std::size_t idx = (t * users + u) * cells + c;
      const auto& ideal = d.samples[idx];
      const auto& fed = feedback[idx];
      double total = 0.0;
      for (std::size_t b = 0; b < ideal.num_subbands; ++b) {
        const auto v = ideal.subband(b);
        const auto w = fed.subband(b);
        cd inner{};
        double wn = 0.0;
        for (std::size_t i = 0; i < tx; ++i) {
          inner += std::conj(v[i]) * w[i];
          wn += std::norm(w[i]);
        }
        const double gain = wn > 0.0 ? std::norm(inner) / wn : 0.0;
        double power = 0.0;
        const std::size_t k1 = std::min(num_re, (b + 1) * sb);
        for (std::size_t k = b * sb; k < k1; ++k) {
          for (std::size_t p = 0; p < tx * rx; ++p) power += std::norm(link[k * tx * rx + p]);
        }
        total += gain * power;
      }
      return total / static_cast<double>(num_re * tx * rx);
    };
    series.push_back(std::move(*pipeline.advance(true, hook).indicators));
  }
  return series;
}

void check_dataset(const CsiDataset& d) {
  const std::size_t ticks = d.params.samples_per_user;
  const std::size_t cells = d.params.scenario.num_cells();
  if (d.samples.size() != ticks * d.params.n_users * cells) {
    throw ValidationError("dataset", "sample count does not cover every (tick, user, cell) link");
  }
  const auto ids = d.params.scenario.cell_ids();
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    const std::size_t c = i % cells;
    const std::size_t u = (i / cells) % d.params.n_users;
    const std::size_t t = i / (cells * d.params.n_users);
    if (s.cell_id != ids[c] || s.user_id != static_cast<int>(u) || s.tick_index != static_cast<std::int64_t>(t + 1)) {
      throw ValidationError("dataset", "sample " + std::to_string(i) + " is out of (tick, user, cell) order");
    }
  }
}

}  // namespace

VerificationReport system_verify(const CsiDataset& dataset, const std::vector<CsiSample>& restored,
                                 const ResourceLimits& limits) {
  check_dataset(dataset);
  VerificationReport r;
  r.nmse = nmse(dataset.samples, restored);
  r.ideal = accumulate_kpis(precoded_run(dataset, dataset.samples, limits));
  r.restored = accumulate_kpis(precoded_run(dataset, restored, limits));
  for (std::size_t c = 0; c < r.ideal.size(); ++c) {
    r.delta.push_back({r.ideal[c].cell_id, r.restored[c].total_dl_traffic - r.ideal[c].total_dl_traffic,
                       r.restored[c].avg_dl_rate - r.ideal[c].avg_dl_rate,
                       r.restored[c].avg_bler - r.ideal[c].avg_bler});
  }
  return r;
}

VerificationReport system_verify(const CsiDataset& dataset, const Codec& codec, const ResourceLimits& limits) {
  return system_verify(dataset, apply_codec(codec, dataset.samples), limits);
}

void to_json(json& j, const NmseResult& n) {
  j = json{{"linear", n.linear}, {"db", n.db}, {"samples", n.samples}};
}

void to_json(json& j, const VerificationReport& r) {
  json delta = json::array();
  for (const auto& d : r.delta) {
    delta.push_back({{"cell_id", d.cell_id},
                     {"total_dl_traffic", d.total_dl_traffic},
                     {"avg_dl_rate", d.avg_dl_rate},
                     {"avg_bler", d.avg_bler}});
  }
  j = json{{"nmse", r.nmse}, {"ideal", r.ideal}, {"restored", r.restored}, {"delta", delta}};
}

std::string csi_key(const CsiDatasetParams& params) {
  json p = params;
  p["kind"] = "csi_dataset";
  p["extraction_version"] = kCsiExtractionVersion;
  return canonical_key(p);
}

json csi_dataset_metadata(const CsiDataset& d) {
  json p = d.params;
  p["kind"] = "csi_dataset";
  p["extraction_version"] = kCsiExtractionVersion;
  return json{{"params", p}, {"kind", "csi_dataset"}, {"shape", d.shape}, {"links", d.links},
              {"extraction_version", kCsiExtractionVersion}};
}

CsiDataset generate_dataset(const CsiDatasetParams& params, const ResourceLimits& limits) {
  params.validate();
  const SimResult res = run_link_channel(params.link_request(), limits);
  CsiDataset d;
  d.key = csi_key(params);
  d.params = params;
  d.shape = res.link->shape;
  d.payload = res.link->payload;
  d.links = res.link->samples;
  d.samples = extract_dataset(decode_export(d.payload), d.links, static_cast<std::size_t>(params.subband_size));
  return d;
}

namespace {

std::vector<LinkSampleInfo> links_from_json(const json& j) {
  std::vector<LinkSampleInfo> out;
  for (const auto& e : j) {
    LinkSampleInfo s;
    s.tick_index = e.at("tick_index").get<std::int64_t>();
    s.user_id = e.at("user_id").get<int>();
    s.cell_id = e.at("cell_id").get<int>();
    const auto& cl = e.at("coupling_loss");
    s.coupling_loss = cl.is_null() ? std::numeric_limits<double>::infinity() : cl.get<double>();
    s.usable = e.at("usable").get<bool>();
    s.small_scale_energy = e.at("small_scale_energy").get<double>();
    out.push_back(s);
  }
  return out;
}

}  // namespace

CsiDataset CsiHarness::load(const std::string& key) const {
  const auto stored = store_.get(key);
  const auto& meta = stored.metadata;
  if (meta.value("kind", std::string()) != "csi_dataset") throw ValidationError("key", "not a CSI dataset");
  json params = meta.at("params");
  params.erase("kind");
  params.erase("extraction_version");
  CsiDataset d;
  d.key = key;
  d.params = csi_params_from_json(params);
  d.payload = stored.payload;
  d.links = links_from_json(meta.at("links"));
  const auto decoded = decode_export(d.payload);
  d.shape = decoded.shape;
  d.samples = extract_dataset(decoded, d.links, static_cast<std::size_t>(d.params.subband_size));
  d.cache_hit = true;
  return d;
}

CsiDataset CsiHarness::generate_or_fetch(const CsiDatasetParams& params) {
  params.validate();
  const std::string key = csi_key(params);
  std::unique_lock lock(mutex_);
  auto& key_mutex = key_mutexes_[key];
  if (!key_mutex) key_mutex = std::make_unique<std::mutex>();
  lock.unlock();
  std::lock_guard key_lock(*key_mutex);
  if (store_.contains(key)) return load(key);
  ++simulation_calls_;
  CsiDataset d = generate_dataset(params, limits_);
  store_.put(key, csi_dataset_metadata(d), d.payload);
  return d;
}

}  // namespace netcomb
