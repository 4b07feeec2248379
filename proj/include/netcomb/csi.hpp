#pragma once

#include <atomic>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcomb/combined.hpp"
#include "netcomb/dataset_store.hpp"

namespace netcomb {

/// Bumped when the characteristic extraction changes; recorded in dataset
/// metadata.
inline constexpr int kCsiExtractionVersion = 1;

struct CsiDatasetParams {
  Scenario scenario;
  std::size_t n_users = 4;
  MobilityParams mobility;
  std::size_t samples_per_user = 1;  // ticks simulated
  int subband_size = 48;             // REs per subband
  std::uint64_t seed = 1;

  void validate() const;
  SimRequest link_request() const;
  bool operator==(const CsiDatasetParams&) const = default;
};

void to_json(nlohmann::json& j, const CsiDatasetParams& p);
CsiDatasetParams csi_params_from_json(const nlohmann::json& j);

/// Per-subband dominant tx-space singular vectors of one link.
struct CsiSample {
  std::int64_t tick_index = 0;
  int user_id = 0;
  int cell_id = 0;
  std::size_t num_subbands = 0;
  std::size_t tx_ports = 0;
  std::vector<std::complex<double>> vectors;  // [subband][tx]
  std::vector<bool> zero;                     // subband had no energy

  std::span<const std::complex<double>> subband(std::size_t s) const {
    return {vectors.data() + s * tx_ports, tx_ports};
  }
  bool all_zero() const;
  bool operator==(const CsiSample&) const = default;
};

void to_json(nlohmann::json& j, const CsiSample& s);
/// `path` prefixes error fields, e.g. "restored[3]".
CsiSample csi_sample_from_json(const nlohmann::json& j, const std::string& path);

/// Dominant eigenvector of a Hermitian n x n matrix (row-major). Cyclic
/// Jacobi on the real 2n x 2n embedding.
std::vector<std::complex<double>> dominant_eigenvector(std::span<const std::complex<double>> r, std::size_t n);

/// `link` is laid out [re][tx][rx]. For each subband of `subband_size` REs
/// (the last may be shorter) the covariance (1/n) sum_k G_k^H G_k with
/// G_k = H[k]^T (rx x tx) is formed and its dominant eigenvector taken,
/// scaled to unit norm and rotated so the first component above 1e-12 in
/// magnitude is real and non-negative.
template <typename T>
CsiSample extract_characteristic(std::span<const std::complex<T>> link, std::size_t num_re, std::size_t tx,
                                 std::size_t rx, std::size_t subband_size);

struct NmseResult {
  double linear = 0.0;
  double db = 0.0;  // kSinrFloorDb stands in for -inf
  std::size_t samples = 0;  // samples with non-zero reference
};

/// mean over samples of |x - x^|^2 / |x|^2 (Frobenius); all-zero references
/// are skipped.
NmseResult nmse(const std::vector<CsiSample>& orig, const std::vector<CsiSample>& restored);

struct CsiDataset {
  std::string key;
  CsiDatasetParams params;
  ExportShape shape;
  std::string payload;  // binary export, samples ordered tick, user, cell
  std::vector<LinkSampleInfo> links;
  std::vector<CsiSample> samples;
  bool cache_hit = false;
};

nlohmann::json csi_dataset_metadata(const CsiDataset& d);

/// Characteristic samples from a binary export (float32 values).
std::vector<CsiSample> extract_dataset(const DecodedExport& decoded, const std::vector<LinkSampleInfo>& links,
                                       std::size_t subband_size);

/// Compression round trip. `compress` maps a sample to an opaque bit string;
/// `decompress` must restore a sample of the same shape.
struct Codec {
  std::string name;
  std::function<std::string(const CsiSample&)> compress;
  std::function<CsiSample(const std::string&)> decompress;
};

Codec identity_codec();
/// Discards everything; restores all-zero vectors.
Codec null_codec();
/// Uniform scalar quantizer with `bits` per real component over [-1, 1].
Codec quantizing_codec(int bits);
/// "identity", "null" or "quantize:<bits>".
Codec codec_by_name(const std::string& name);

class CodecError : public Error {
public:
  CodecError(std::size_t sample, const std::string& what)
      : Error("codec_error", "sample " + std::to_string(sample) + ": " + what), sample_(sample) {}
  std::size_t sample() const noexcept { return sample_; }

private:
  std::size_t sample_;
};

std::vector<CsiSample> apply_codec(const Codec& codec, const std::vector<CsiSample>& samples);

struct CellKpiDelta {
  int cell_id = 0;
  double total_dl_traffic = 0.0;  // restored - ideal
  double avg_dl_rate = 0.0;
  double avg_bler = 0.0;
  bool operator==(const CellKpiDelta&) const = default;
};

struct VerificationReport {
  NmseResult nmse;
  // KPIs accumulated over the whole run: traffic summed over ticks, rate and
  // BLER averaged over scheduled user-ticks, user counts summed over ticks.
  std::vector<CellKpi> ideal;
  std::vector<CellKpi> restored;
  std::vector<CellKpiDelta> delta;
};

void to_json(nlohmann::json& j, const NmseResult& n);
void to_json(nlohmann::json& j, const VerificationReport& r);

/// Reruns the protocol stack twice with the dataset's seed. The serving
/// link's signal power is weighted per subband by |v^H w|^2 / |w|^2, v the
/// ideal characteristic vector and w the fed-back one (weight 0 when w = 0).
VerificationReport system_verify(const CsiDataset& dataset, const std::vector<CsiSample>& restored,
                                 const ResourceLimits& limits = {});
VerificationReport system_verify(const CsiDataset& dataset, const Codec& codec, const ResourceLimits& limits = {});

/// Per-cell KPIs folded over a run.
std::vector<CellKpi> accumulate_kpis(const std::vector<PerfIndicators>& series);

CsiDataset generate_dataset(const CsiDatasetParams& params, const ResourceLimits& limits = {});

/// Dataset generation backed by a store; counts simulations so cache hits
/// are observable.
class CsiHarness {
public:
  explicit CsiHarness(DatasetStore& store, ResourceLimits limits = {}) : store_(store), limits_(limits) {}

  CsiDataset generate_or_fetch(const CsiDatasetParams& params);
  /// Loads a stored dataset by key (NotFoundError on miss).
  CsiDataset load(const std::string& key) const;
  std::size_t simulation_calls() const { return simulation_calls_.load(); }

private:
  DatasetStore& store_;
  ResourceLimits limits_;
  std::atomic<std::size_t> simulation_calls_{0};
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_mutexes_;
};

std::string csi_key(const CsiDatasetParams& params);

}  // namespace netcomb
