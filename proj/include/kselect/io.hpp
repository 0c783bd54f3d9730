// JSON round-trips for the core types, CSV emission and run metadata.
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "kselect/bo.hpp"
#include "kselect/dataset.hpp"
#include "kselect/kernels.hpp"
#include "kselect/selection.hpp"

namespace kselect {

/// Shortest decimal form that round-trips a double (up to 17 significant
/// digits), the format used for every float in CSV and JSON output.
std::string format_double(double value);

/// FNV-1a 64-bit hash, hex-encoded; used to fingerprint configurations.
std::uint64_t fnv1a64(std::string_view text);
std::string fnv1a64_hex(std::string_view text);

/// Stamp appended to every artifact so runs can be traced to their inputs.
struct RunMetadata {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
};

/// Comma-separated output with a header row, LF line endings and
/// round-trippable floats. Metadata lands in trailing `# key=value` lines.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void write_row(const std::vector<std::string>& cells);
  /// Convenience: formats every value with format_double.
  void write_row(const std::vector<double>& values);
  void write_metadata(const RunMetadata& meta);

 private:
  std::ofstream out_;
  size_t columns_;
};

// JSON shape for kernels: {"family": <string>, "phi": [<numbers>]} plus the
// input dimension so ARD kernels round-trip.
nlohmann::json to_json(const KernelSpec& spec);
KernelSpec kernel_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const HyperparameterDomain& domain);
HyperparameterDomain domain_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Observation& obs);
Observation observation_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BoState& state);
BoState bo_state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SelectionResult& result, const SearchSpace& space);

nlohmann::json metadata_json(const RunMetadata& meta);

/// Writes JSON with sorted keys, two-space indent and a trailing newline.
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace kselect
