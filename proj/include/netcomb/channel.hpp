#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "netcomb/large_scale.hpp"
#include "netcomb/rng.hpp"
#include "netcomb/scenario.hpp"

namespace netcomb {

using cplx = std::complex<double>;

/// Quantizes tap delays to the sample grid 1/(num_re * spacing) of the RE
/// band, merging taps that land in the same bin, and normalizes powers.
/// On that grid distinct taps are orthogonal across the band, so the
/// band-average of |H|^2 equals the tap energy exactly.
TapProfile resolve_to_grid(const TapProfile& profile, int num_re, double subcarrier_spacing);

/// AR(1) coefficient for one tick: exp(-(pi * doppler * tick)^2) in [0, 1].
double ar1_coefficient(double doppler, double tick);

/// Rayleigh tapped-delay realization for every (user, cell, tx, rx) link.
/// Gains are stored [user][cell][tx][rx][tap]; streams are keyed by ids so
/// a subset of links draws the same values as the full set.
class SmallScaleRealization {
public:
  SmallScaleRealization(const TapProfile& profile, std::vector<int> user_ids, std::vector<int> cell_ids,
                        int tx_ports, int rx_ports, std::uint64_t seed);

  /// Realization with caller-supplied gains laid out [user][cell][tx][rx][tap].
  static SmallScaleRealization with_gains(const TapProfile& profile, std::vector<int> user_ids,
                                          std::vector<int> cell_ids, int tx_ports, int rx_ports,
                                          std::vector<cplx> gains);

  /// Evolves every gain by one tick: g <- rho g + sqrt(1 - rho^2) w.
  void advance(std::int64_t tick_index, double tick);

  const TapProfile& profile() const { return profile_; }
  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_cells() const { return cell_ids_.size(); }
  int tx_ports() const { return tx_; }
  int rx_ports() const { return rx_; }
  std::size_t num_taps() const { return profile_.taps.size(); }
  const std::vector<int>& user_ids() const { return user_ids_; }
  const std::vector<int>& cell_ids() const { return cell_ids_; }

  /// Tap gains of one port pair.
  std::span<const cplx> gains(std::size_t u, std::size_t c, int tx, int rx) const;
  /// Sum over taps of |gain|^2 for one port pair.
  double tap_energy(std::size_t u, std::size_t c, int tx, int rx) const;
  /// Port-pair average of `tap_energy`.
  double link_energy(std::size_t u, std::size_t c) const;

private:
  std::size_t offset(std::size_t u, std::size_t c, int tx, int rx) const;
  void draw(std::size_t u, std::size_t c, Rng& rng, double rho, double innovation);

  TapProfile profile_;
  std::vector<int> user_ids_;
  std::vector<int> cell_ids_;
  int tx_;
  int rx_;
  std::uint64_t seed_;
  std::vector<cplx> gains_;
};

/// Resolves the scenario tap profile to its RE grid and draws the initial
/// realization for the given users and all scenario cells.
SmallScaleRealization draw_small_scale(const Scenario& scenario, std::vector<int> user_ids, std::uint64_t seed);

/// RE-level frequency response, [user][cell][re][tx][rx] row-major.
struct ChannelGrid {
  std::size_t num_users = 0;
  std::size_t num_cells = 0;
  int num_re = 0;
  int tx_ports = 0;
  int rx_ports = 0;
  std::vector<int> user_ids;
  std::vector<int> cell_ids;
  std::vector<cplx> data;

  std::size_t link_size() const { return static_cast<std::size_t>(num_re) * tx_ports * rx_ports; }
  std::span<const cplx> link(std::size_t u, std::size_t c) const {
    return {data.data() + (u * num_cells + c) * link_size(), link_size()};
  }
  std::span<cplx> link(std::size_t u, std::size_t c) {
    return {data.data() + (u * num_cells + c) * link_size(), link_size()};
  }
  const cplx& at(std::size_t u, std::size_t c, int re, int tx, int rx) const {
    return link(u, c)[(static_cast<std::size_t>(re) * tx_ports + tx) * rx_ports + rx];
  }
};

/// H[k] = sum_l g_l exp(-j 2 pi f_k tau_l), f_k = k * spacing.
ChannelGrid freq_response(const SmallScaleRealization& realization, const Scenario& scenario);

/// Scales each link by sqrt(10^(-CL/10)); unusable links are zeroed.
/// Throws IndexMismatchError when user or cell ids differ.
void apply_large_scale_in_place(const LargeScaleModel& ls, ChannelGrid& grid);
ChannelGrid apply_large_scale(const LargeScaleModel& ls, ChannelGrid grid);

/// Mean over REs and port pairs of |H|^2 for one link.
double mean_link_power(std::span<const cplx> link);
/// Mean over REs of |H|^2 for one port pair.
double mean_port_power(std::span<const cplx> link, int tx_ports, int rx_ports, int tx, int rx);

// Binary export: 24-byte little-endian header
//   "NCRE" | u32 version | u32 num_samples | u32 num_re | u32 tx_ports | u32 rx_ports
// followed by num_samples * num_re * tx_ports * rx_ports complex values as
// interleaved float32 (re, im), row-major (sample, re, tx, rx).
inline constexpr char kExportMagic[4] = {'N', 'C', 'R', 'E'};
inline constexpr std::uint32_t kExportVersion = 1;
inline constexpr std::size_t kExportHeaderSize = 24;

struct ExportShape {
  std::uint32_t num_samples = 0;
  std::uint32_t num_re = 0;
  std::uint32_t tx_ports = 0;
  std::uint32_t rx_ports = 0;
  bool operator==(const ExportShape&) const = default;
  std::size_t sample_size() const { return static_cast<std::size_t>(num_re) * tx_ports * rx_ports; }
};

class GridExportWriter {
public:
  GridExportWriter(std::uint32_t num_re, std::uint32_t tx_ports, std::uint32_t rx_ports);
  void append(std::span<const cplx> link);
  /// Finished byte string with the header's sample count filled in.
  std::string finish() const;
  std::uint32_t num_samples() const { return shape_.num_samples; }

private:
  ExportShape shape_;
  std::string body_;
};

struct DecodedExport {
  ExportShape shape;
  std::vector<std::complex<float>> values;
  std::span<const std::complex<float>> sample(std::size_t i) const {
    return {values.data() + i * shape.sample_size(), shape.sample_size()};
  }
};

/// Throws ParseError on bad magic, version, or truncated payload.
DecodedExport decode_export(std::string_view bytes);

}  // namespace netcomb
