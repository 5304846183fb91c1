#pragma once

#include "mcrm/mc_model.hpp"
#include "mcrm/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace mcrm {

using Json = nlohmann::ordered_json;

inline constexpr int instance_schema_version = 1;
inline constexpr int report_schema_version = 1;

/// Malformed instance file: bad JSON, wrong types, missing or unknown fields,
/// ragged arrays.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contents of an instance file before validation.
struct InstanceFile {
  McParameters params;
  ResourceModel resources;
  double horizon = 1.0;
  /// Per-product target_price entries, used by fixed-price mode. Present only
  /// if every product has one.
  std::optional<VectorXd> target_prices;
};

InstanceFile parse_instance(const Json& doc);
InstanceFile parse_instance_text(const std::string& text);
InstanceFile read_instance_file(const std::filesystem::path& path);

Json instance_to_json(const InstanceFile& file);

/// Lowercase hex SHA-256 of the compact canonical serialization.
std::string instance_digest(const InstanceFile& file);

struct ReportOptions {
  bool include_timing = false;
};

/// Machine-readable solution report. Identical inputs give identical bytes
/// unless timing is included.
Json solution_report(const PipelineResult& result, const ResourceModel& rm, const std::string& digest,
                     const ReportOptions& options = {});

/// Human-readable rendering of the same content.
std::string report_text(const Json& report);

Json to_json(const ValidationReport& report);

}  // namespace mcrm
