// Experiment configuration: defaults, JSON loading with strict validation,
// and the canonical form used for fingerprinting runs.
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "kselect/bo.hpp"
#include "kselect/plant.hpp"
#include "kselect/selection.hpp"

namespace kselect {

/// Configuration problems carry their own type so the CLI can map them to a
/// distinct exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  struct Plant {
    double x0 = 3.0;
    int horizon = 10;
    double guard = 1e3;
  } plant;

  struct DatasetSpec {
    int count = 11;
    double x_min = -10.0;
    double x_max = 10.0;
  } dataset;

  struct Space {
    std::vector<std::string> kernels = {"linear", "polynomial_cubic", "gaussian"};
    double gaussian_scale_min = 1e-2;
    double gaussian_scale_max = 1e2;
    double epsilon_min = 1e-3;
    double epsilon_max = 1e1;
  } space;

  struct Svr {
    // Robust-scale default; fixed numbers like 1.0 leave the Gaussian
    // candidate too starved to stabilize the loop from x0 = 3.
    double box_c = default_simulation_box_constraint();
    double tol = 1e-4;
  } svr;

  struct Bo {
    std::string acquisition = "ei_plus";
    double ei_plus_lambda = 0.5;
    int data_budget = 30;
    int closed_loop_budget = 50;
    int repetitions = 20;
    int init_per_candidate = 3;
  } bo;

  struct Cv {
    int folds = 5;
  } cv;

  struct Simulate {
    std::string model = "perfect";  // perfect | zero | svr | gp
    std::string kernel = "gaussian";
    std::vector<double> phi = {2.0};
    double epsilon = 0.1;
    double noise_sigma = 0.1;
  } simulate;

  struct Verify {
    int draws = 200;
  } verify;

  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Canonical JSON of the experiment parameters, sorted keys. Equal configs
  /// hash equally regardless of which fields the file spelled out. output_dir
  /// is deliberately left out: it says where results land, not what they are,
  /// so reruns into different directories fingerprint identically.
  nlohmann::json to_json() const;
  std::string config_hash() const;

  /// Cross-field checks (budgets positive, kernel names known, ...).
  /// Throws ConfigError with the offending path.
  void validate() const;

  CostSpec cost_spec() const;
  SearchSpace search_space() const;
  SelectionConfig selection_config() const;
  Dataset training_data() const;
};

/// Parses a config file. Unknown keys and type mismatches are ConfigErrors;
/// missing fields fall back to defaults.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j);

/// JSON Schema describing the accepted config document; the copy shipped in
/// schema/ is generated from this string.
std::string_view config_schema();

}  // namespace kselect
