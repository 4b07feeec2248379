#pragma once

// JSON forms of requests and results shared by the CLI and the service.
// Field names match the C++ members. Non-finite values (rsrp without a
// serving cell) are written as null and read back as -inf.

#include <json.hpp>

#include "netcomb/combined.hpp"

namespace netcomb {

std::string to_string(MobilityModel m);
MobilityModel mobility_model_from_string(const std::string& s, const std::string& path);

void to_json(nlohmann::json& j, const MobilityParams& m);
/// Missing fields keep their defaults; `path` prefixes error fields.
MobilityParams mobility_from_json(const nlohmann::json& j, const std::string& path = "mobility");

void to_json(nlohmann::json& j, const SimRequest& r);
/// Parses and validates a request body (scenario included). Error fields
/// are paths from the request root, e.g. "scenario.sites[0].cells".
SimRequest request_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const LinkMeasurement& m);
void from_json(const nlohmann::json& j, LinkMeasurement& m);
void to_json(nlohmann::json& j, const CellKpi& k);
void from_json(const nlohmann::json& j, CellKpi& k);
void to_json(nlohmann::json& j, const UserPerf& u);
void from_json(const nlohmann::json& j, UserPerf& u);
void to_json(nlohmann::json& j, const PerfIndicators& p);
void from_json(const nlohmann::json& j, PerfIndicators& p);
void to_json(nlohmann::json& j, const CoverageTick& t);
void from_json(const nlohmann::json& j, CoverageTick& t);
void to_json(nlohmann::json& j, const ExportShape& s);
void to_json(nlohmann::json& j, const LinkSampleInfo& s);
void to_json(nlohmann::json& j, const RunMetadata& m);
void from_json(const nlohmann::json& j, RunMetadata& m);

/// Result document. The link payload is not embedded; callers store it and
/// reference it by dataset key.
void to_json(nlohmann::json& j, const SimResult& r);

}  // namespace netcomb
