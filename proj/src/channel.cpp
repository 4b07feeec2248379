#include "netcomb/channel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>

namespace netcomb {

TapProfile resolve_to_grid(const TapProfile& profile, int num_re, double subcarrier_spacing) {
  profile.validate();
  const double resolution = 1.0 / (static_cast<double>(num_re) * subcarrier_spacing);
  std::map<long long, double> bins;
  for (const auto& t : profile.taps) bins[std::llround(t.delay / resolution)] += t.power;
  TapProfile out;
  out.doppler = profile.doppler;
  out.taps.clear();
  for (const auto& [bin, power] : bins) out.taps.push_back({static_cast<double>(bin) * resolution, power});
  return out.normalized();
}

double ar1_coefficient(double doppler, double tick) {
  const double x = std::numbers::pi * doppler * tick;
  return std::clamp(std::exp(-x * x), 0.0, 1.0);
}

SmallScaleRealization::SmallScaleRealization(const TapProfile& profile, std::vector<int> user_ids,
                                             std::vector<int> cell_ids, int tx_ports, int rx_ports,
                                             std::uint64_t seed)
    : profile_(profile.normalized()),
      user_ids_(std::move(user_ids)),
      cell_ids_(std::move(cell_ids)),
      tx_(tx_ports),
      rx_(rx_ports),
      seed_(seed) {
  profile_.validate();
  gains_.resize(user_ids_.size() * cell_ids_.size() * static_cast<std::size_t>(tx_ * rx_) * profile_.taps.size());
  for (std::size_t u = 0; u < user_ids_.size(); ++u) {
    for (std::size_t c = 0; c < cell_ids_.size(); ++c) {
      Rng rng(seed_, Stage::small_scale_init,
              {static_cast<std::uint64_t>(user_ids_[u]), static_cast<std::uint64_t>(cell_ids_[c])});
      draw(u, c, rng, 0.0, 1.0);
    }
  }
}

SmallScaleRealization SmallScaleRealization::with_gains(const TapProfile& profile, std::vector<int> user_ids,
                                                         std::vector<int> cell_ids, int tx_ports, int rx_ports,
                                                         std::vector<cplx> gains) {
  SmallScaleRealization r(profile, std::move(user_ids), std::move(cell_ids), tx_ports, rx_ports, 0);
  if (gains.size() != r.gains_.size()) throw IndexMismatchError("gain vector does not match link layout");
  r.gains_ = std::move(gains);
  return r;
}

std::size_t SmallScaleRealization::offset(std::size_t u, std::size_t c, int tx, int rx) const {
  const std::size_t pairs = static_cast<std::size_t>(tx_ * rx_);
  return ((u * cell_ids_.size() + c) * pairs + static_cast<std::size_t>(tx * rx_ + rx)) * profile_.taps.size();
}

void SmallScaleRealization::draw(std::size_t u, std::size_t c, Rng& rng, double rho, double innovation) {
  for (int tx = 0; tx < tx_; ++tx) {
    for (int rx = 0; rx < rx_; ++rx) {
      cplx* g = gains_.data() + offset(u, c, tx, rx);
      for (std::size_t l = 0; l < profile_.taps.size(); ++l) {
        const double s = std::sqrt(profile_.taps[l].power / 2.0);
        const double re = rng.normal();
        const double im = rng.normal();
        g[l] = rho * g[l] + innovation * cplx(s * re, s * im);
      }
    }
  }
}

void SmallScaleRealization::advance(std::int64_t tick_index, double tick) {
  const double rho = ar1_coefficient(profile_.doppler, tick);
  if (rho >= 1.0) return;
  const double innovation = std::sqrt(1.0 - rho * rho);
  for (std::size_t u = 0; u < user_ids_.size(); ++u) {
    for (std::size_t c = 0; c < cell_ids_.size(); ++c) {
      Rng rng(seed_, Stage::small_scale_step,
              {static_cast<std::uint64_t>(tick_index), static_cast<std::uint64_t>(user_ids_[u]),
               static_cast<std::uint64_t>(cell_ids_[c])});
      draw(u, c, rng, rho, innovation);
    }
  }
}

std::span<const cplx> SmallScaleRealization::gains(std::size_t u, std::size_t c, int tx, int rx) const {
  return {gains_.data() + offset(u, c, tx, rx), profile_.taps.size()};
}

double SmallScaleRealization::tap_energy(std::size_t u, std::size_t c, int tx, int rx) const {
  double e = 0.0;
  for (const auto& g : gains(u, c, tx, rx)) e += std::norm(g);
  return e;
}

double SmallScaleRealization::link_energy(std::size_t u, std::size_t c) const {
  double e = 0.0;
  for (int tx = 0; tx < tx_; ++tx) {
    for (int rx = 0; rx < rx_; ++rx) e += tap_energy(u, c, tx, rx);
  }
  return e / (tx_ * rx_);
}

SmallScaleRealization draw_small_scale(const Scenario& scenario, std::vector<int> user_ids, std::uint64_t seed) {
  const auto profile = resolve_to_grid(scenario.channel.profile, scenario.num_re(), scenario.channel.subcarrier_spacing);
  return SmallScaleRealization(profile, std::move(user_ids), scenario.cell_ids(), scenario.channel.tx_ports,
                               scenario.channel.rx_ports, seed);
}

ChannelGrid freq_response(const SmallScaleRealization& realization, const Scenario& scenario) {
  ChannelGrid grid;
  grid.num_users = realization.num_users();
  grid.num_cells = realization.num_cells();
  grid.num_re = scenario.num_re();
  grid.tx_ports = realization.tx_ports();
  grid.rx_ports = realization.rx_ports();
  grid.user_ids = realization.user_ids();
  grid.cell_ids = realization.cell_ids();
  grid.data.assign(grid.num_users * grid.num_cells * grid.link_size(), cplx{});

  // Phasor per (tap, RE). The phase 2*pi*f_k*tau_l is reduced modulo one
  // turn before the trig call so large k*tau products keep full precision.
  const auto& taps = realization.profile().taps;
  const double spacing = scenario.channel.subcarrier_spacing;
  std::vector<cplx> phasor(taps.size() * static_cast<std::size_t>(grid.num_re));
  for (std::size_t l = 0; l < taps.size(); ++l) {
    for (int k = 0; k < grid.num_re; ++k) {
      double turns = static_cast<double>(k) * spacing * taps[l].delay;
      turns -= std::floor(turns);
      const double phi = -2.0 * std::numbers::pi * turns;
      phasor[l * grid.num_re + k] = cplx(std::cos(phi), std::sin(phi));
    }
  }

  const int tx_n = grid.tx_ports;
  const int rx_n = grid.rx_ports;
  for (std::size_t u = 0; u < grid.num_users; ++u) {
    for (std::size_t c = 0; c < grid.num_cells; ++c) {
      auto link = grid.link(u, c);
      for (int tx = 0; tx < tx_n; ++tx) {
        for (int rx = 0; rx < rx_n; ++rx) {
          const auto g = realization.gains(u, c, tx, rx);
          for (int k = 0; k < grid.num_re; ++k) {
            cplx h{};
            for (std::size_t l = 0; l < g.size(); ++l) h += g[l] * phasor[l * grid.num_re + k];
            link[(static_cast<std::size_t>(k) * tx_n + tx) * rx_n + rx] = h;
          }
        }
      }
    }
  }
  return grid;
}

void apply_large_scale_in_place(const LargeScaleModel& ls, ChannelGrid& grid) {
  if (ls.user_ids != grid.user_ids || ls.cell_ids != grid.cell_ids) {
    throw IndexMismatchError("large-scale model and channel grid cover different links");
  }
  for (std::size_t u = 0; u < grid.num_users; ++u) {
    for (std::size_t c = 0; c < grid.num_cells; ++c) {
      auto link = grid.link(u, c);
      if (!ls.is_usable(u, c)) {
        std::fill(link.begin(), link.end(), cplx{});
        continue;
      }
      const double amplitude = std::sqrt(std::pow(10.0, -ls.loss(u, c) / 10.0));
      for (auto& h : link) h *= amplitude;
    }
  }
}

ChannelGrid apply_large_scale(const LargeScaleModel& ls, ChannelGrid grid) {
  apply_large_scale_in_place(ls, grid);
  return grid;
}

double mean_link_power(std::span<const cplx> link) {
  if (link.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& h : link) acc += std::norm(h);
  return acc / static_cast<double>(link.size());
}

double mean_port_power(std::span<const cplx> link, int tx_ports, int rx_ports, int tx, int rx) {
  const std::size_t stride = static_cast<std::size_t>(tx_ports) * rx_ports;
  const std::size_t n = link.size() / stride;
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += std::norm(link[k * stride + static_cast<std::size_t>(tx * rx_ports + rx)]);
  return acc / static_cast<double>(n);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace

GridExportWriter::GridExportWriter(std::uint32_t num_re, std::uint32_t tx_ports, std::uint32_t rx_ports)
    : shape_{0, num_re, tx_ports, rx_ports} {}

void GridExportWriter::append(std::span<const cplx> link) {
  if (link.size() != shape_.sample_size()) throw IndexMismatchError("link size does not match export shape");
  body_.reserve(body_.size() + link.size() * 8);
  for (const auto& h : link) {
    put_f32(body_, static_cast<float>(h.real()));
    put_f32(body_, static_cast<float>(h.imag()));
  }
  ++shape_.num_samples;
}

std::string GridExportWriter::finish() const {
  std::string out(kExportMagic, 4);
  put_u32(out, kExportVersion);
  put_u32(out, shape_.num_samples);
  put_u32(out, shape_.num_re);
  put_u32(out, shape_.tx_ports);
  put_u32(out, shape_.rx_ports);
  out += body_;
  return out;
}

DecodedExport decode_export(std::string_view bytes) {
  if (bytes.size() < kExportHeaderSize) throw ParseError("channel export shorter than its header");
  if (std::memcmp(bytes.data(), kExportMagic, 4) != 0) throw ParseError("channel export has bad magic");
  if (get_u32(bytes, 4) != kExportVersion) throw ParseError("unsupported channel export version");
  DecodedExport d;
  d.shape = {get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16), get_u32(bytes, 20)};
  const std::size_t count = d.shape.num_samples * d.shape.sample_size();
  if (bytes.size() != kExportHeaderSize + count * 8) throw ParseError("channel export payload size does not match shape");
  d.values.resize(count);
  std::size_t pos = kExportHeaderSize;
  for (auto& v : d.values) {
    const float re = std::bit_cast<float>(get_u32(bytes, pos));
    const float im = std::bit_cast<float>(get_u32(bytes, pos + 4));
    v = {re, im};
    pos += 8;
  }
  return d;
}

}  // namespace netcomb
