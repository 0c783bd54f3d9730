#include "kselect/io.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace kselect {

std::string format_double(double value) {
  // std::to_chars emits the shortest representation that parses back to the
  // same double, capped at 17 significant digits by construction.
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buffer, ptr);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string fnv1a64_hex(std::string_view text) {
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << fnv1a64(text);
  return out.str();
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
  if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  if (header.empty()) throw std::invalid_argument("CsvWriter: empty header");
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out_ << ',';
    out_ << header[i];
  }
  out_ << '\n';
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw std::invalid_argument("CsvWriter: row width does not match header");
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void CsvWriter::write_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (const double v : values) cells.push_back(format_double(v));
  write_row(cells);
}

void CsvWriter::write_metadata(const RunMetadata& meta) {
  out_ << "# config_hash=" << meta.config_hash << '\n';
  out_ << "# seed=" << meta.seed << '\n';
  out_ << "# version=" << meta.version << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("CsvWriter: write failed");
}

namespace {

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a JSON array of numbers");
  Eigen::VectorXd v(static_cast<int>(j.size()));
  int i = 0;
  for (const auto& item : j) {
    if (!item.is_number()) throw std::invalid_argument("expected a JSON array of numbers");
    v(i++) = item.get<double>();
  }
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

nlohmann::json to_json(const KernelSpec& spec) {
  return nlohmann::json{{"family", std::string(to_string(spec.family))},
                        {"phi", vector_to_json(spec.phi)},
                        {"input_dim", spec.input_dim}};
}

KernelSpec kernel_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j.contains("phi")) {
    throw std::invalid_argument("kernel spec JSON needs \"family\" and \"phi\"");
  }
  KernelSpec spec;
  spec.family = kernel_family_from_string(j.at("family").get<std::string>());
  spec.phi = vector_from_json(j.at("phi"));
  spec.input_dim = j.value("input_dim", 1);
  spec.validate();
  return spec;
}

nlohmann::json to_json(const HyperparameterDomain& domain) {
  nlohmann::json flags = nlohmann::json::array();
  for (const bool f : domain.log_scale) flags.push_back(f);
  return nlohmann::json{{"lower", vector_to_json(domain.lower)},
                        {"upper", vector_to_json(domain.upper)},
                        {"log_scale", flags}};
}

HyperparameterDomain domain_from_json(const nlohmann::json& j) {
  HyperparameterDomain d;
  d.lower = vector_from_json(j.at("lower"));
  d.upper = vector_from_json(j.at("upper"));
  for (const auto& f : j.at("log_scale")) d.log_scale.push_back(f.get<bool>());
  d.validate();
  return d;
}

nlohmann::json to_json(const Observation& obs) {
  return nlohmann::json{{"kernel_index", obs.kernel_index},
                        {"phi", vector_to_json(obs.phi)},
                        {"cost", obs.cost},
                        {"trial_index", obs.trial_index}};
}

Observation observation_from_json(const nlohmann::json& j) {
  Observation obs;
  obs.kernel_index = j.at("kernel_index").get<int>();
  obs.phi = vector_from_json(j.at("phi"));
  obs.cost = j.at("cost").get<double>();
  obs.trial_index = j.at("trial_index").get<int>();
  return obs;
}

nlohmann::json to_json(const BoState& state) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& obs : state.history) history.push_back(to_json(obs));
  return nlohmann::json{{"history", history},
                        {"incumbent_trace", state.incumbent_trace},
                        {"incumbent_index", state.incumbent_index},
                        {"rng_seed", state.rng_seed}};
}

BoState bo_state_from_json(const nlohmann::json& j) {
  BoState state;
  state.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  for (const auto& item : j.at("history")) state.append(observation_from_json(item));
  // append() rebuilds the incumbent bookkeeping; cross-check the stored one.
  const int stored = j.at("incumbent_index").get<int>();
  if (stored != state.incumbent_index) {
    throw std::invalid_argument("bo state JSON: incumbent index does not match history");
  }
  return state;
}

nlohmann::json to_json(const SelectionResult& result, const SearchSpace& space) {
  const KernelSpec spec{space.candidates[static_cast<size_t>(result.kernel_index - 1)].family,
                        result.phi, 1};
  return nlohmann::json{{"kernel_index", result.kernel_index},
                        {"kernel", to_json(spec)},
                        {"svr_epsilon", result.svr_epsilon},
                        {"loss", result.loss},
                        {"cost", result.cost},
                        {"search_rollouts", result.search_rollouts},
                        {"trials", result.bo_state.history.size()}};
}

nlohmann::json metadata_json(const RunMetadata& meta) {
  return nlohmann::json{{"config_hash", meta.config_hash},
                        {"seed", meta.seed},
                        {"version", meta.version}};
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_json_file: cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_json_file: write failed for " + path);
}

}  // namespace kselect
