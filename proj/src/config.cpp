#include "kselect/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kselect/io.hpp"

namespace kselect {

namespace {

constexpr std::string_view kSchema = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "Experiment configuration",
  "type": "object",
  "additionalProperties": false,
  "properties": {
    "plant": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "x0": {"type": "number"},
        "horizon": {"type": "integer", "minimum": 1},
        "guard": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "dataset": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "count": {"type": "integer", "minimum": 2},
        "x_min": {"type": "number"},
        "x_max": {"type": "number"}
      }
    },
    "space": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "kernels": {
          "type": "array",
          "minItems": 1,
          "items": {
            "type": "string",
            "enum": ["linear", "polynomial_cubic", "gaussian", "squared_exponential_ard"]
          }
        },
        "gaussian_scale_min": {"type": "number", "exclusiveMinimum": 0},
        "gaussian_scale_max": {"type": "number", "exclusiveMinimum": 0},
        "epsilon_min": {"type": "number", "exclusiveMinimum": 0},
        "epsilon_max": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "svr": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "box_c": {"type": "number", "exclusiveMinimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0}
      }
    },
    "bo": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "acquisition": {"type": "string", "enum": ["ei", "ei_plus", "ucb"]},
        "ei_plus_lambda": {"type": "number", "minimum": 0},
        "data_budget": {"type": "integer", "minimum": 1},
        "closed_loop_budget": {"type": "integer", "minimum": 1},
        "repetitions": {"type": "integer", "minimum": 1},
        "init_per_candidate": {"type": "integer", "minimum": 1}
      }
    },
    "cv": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "folds": {"type": "integer", "minimum": 2}
      }
    },
    "simulate": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "model": {"type": "string", "enum": ["perfect", "zero", "svr", "gp"]},
        "kernel": {
          "type": "string",
          "enum": ["linear", "polynomial_cubic", "gaussian", "squared_exponential_ard"]
        },
        "phi": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "epsilon": {"type": "number", "minimum": 0},
        "noise_sigma": {"type": "number", "minimum": 0}
      }
    },
    "verify": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "draws": {"type": "integer", "minimum": 0}
      }
    },
    "seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string", "minLength": 1}
  }
}
)";

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& into, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: bad type for " + where + "." + key);
  }
}

}  // namespace

std::string_view config_schema() { return kSchema; }

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  ExperimentConfig cfg;
  require_keys(j, {"plant", "dataset", "space", "svr", "bo", "cv", "simulate", "verify",
                   "seed", "output_dir"},
               "top level");

  if (j.contains("plant")) {
    const auto& p = j.at("plant");
    require_keys(p, {"x0", "horizon", "guard"}, "plant");
    read_field(p, "x0", cfg.plant.x0, "plant");
    read_field(p, "horizon", cfg.plant.horizon, "plant");
    read_field(p, "guard", cfg.plant.guard, "plant");
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    require_keys(d, {"count", "x_min", "x_max"}, "dataset");
    read_field(d, "count", cfg.dataset.count, "dataset");
    read_field(d, "x_min", cfg.dataset.x_min, "dataset");
    read_field(d, "x_max", cfg.dataset.x_max, "dataset");
  }
  if (j.contains("space")) {
    const auto& s = j.at("space");
    require_keys(s, {"kernels", "gaussian_scale_min", "gaussian_scale_max", "epsilon_min",
                     "epsilon_max"},
                 "space");
    read_field(s, "kernels", cfg.space.kernels, "space");
    read_field(s, "gaussian_scale_min", cfg.space.gaussian_scale_min, "space");
    read_field(s, "gaussian_scale_max", cfg.space.gaussian_scale_max, "space");
    read_field(s, "epsilon_min", cfg.space.epsilon_min, "space");
    read_field(s, "epsilon_max", cfg.space.epsilon_max, "space");
  }
  if (j.contains("svr")) {
    const auto& s = j.at("svr");
    require_keys(s, {"box_c", "tol"}, "svr");
    read_field(s, "box_c", cfg.svr.box_c, "svr");
    read_field(s, "tol", cfg.svr.tol, "svr");
  }
  if (j.contains("bo")) {
    const auto& b = j.at("bo");
    require_keys(b, {"acquisition", "ei_plus_lambda", "data_budget", "closed_loop_budget",
                     "repetitions", "init_per_candidate"},
                 "bo");
    read_field(b, "acquisition", cfg.bo.acquisition, "bo");
    read_field(b, "ei_plus_lambda", cfg.bo.ei_plus_lambda, "bo");
    read_field(b, "data_budget", cfg.bo.data_budget, "bo");
    read_field(b, "closed_loop_budget", cfg.bo.closed_loop_budget, "bo");
    read_field(b, "repetitions", cfg.bo.repetitions, "bo");
    read_field(b, "init_per_candidate", cfg.bo.init_per_candidate, "bo");
  }
  if (j.contains("cv")) {
    const auto& c = j.at("cv");
    require_keys(c, {"folds"}, "cv");
    read_field(c, "folds", cfg.cv.folds, "cv");
  }
  if (j.contains("simulate")) {
    const auto& s = j.at("simulate");
    require_keys(s, {"model", "kernel", "phi", "epsilon", "noise_sigma"}, "simulate");
    read_field(s, "model", cfg.simulate.model, "simulate");
    read_field(s, "kernel", cfg.simulate.kernel, "simulate");
    read_field(s, "phi", cfg.simulate.phi, "simulate");
    read_field(s, "epsilon", cfg.simulate.epsilon, "simulate");
    read_field(s, "noise_sigma", cfg.simulate.noise_sigma, "simulate");
  }
  if (j.contains("verify")) {
    const auto& v = j.at("verify");
    require_keys(v, {"draws"}, "verify");
    read_field(v, "draws", cfg.verify.draws, "verify");
  }
  read_field(j, "seed", cfg.seed, "top level");
  read_field(j, "output_dir", cfg.output_dir, "top level");

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void ExperimentConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError("config: " + what); };

  if (!std::isfinite(plant.x0)) fail("plant.x0 must be finite");
  if (plant.horizon < 1) fail("plant.horizon must be >= 1");
  if (!(plant.guard > 0.0)) fail("plant.guard must be positive");

  if (dataset.count < 2) fail("dataset.count must be >= 2");
  if (!(dataset.x_min < dataset.x_max)) fail("dataset.x_min must be below dataset.x_max");

  if (space.kernels.empty()) fail("space.kernels must list at least one kernel");
  for (const auto& name : space.kernels) {
    kernel_family_from_string(name);  // throws std::invalid_argument on typos
  }
  if (!(space.gaussian_scale_min > 0.0) ||
      !(space.gaussian_scale_max >= space.gaussian_scale_min)) {
    fail("space.gaussian_scale bounds must satisfy 0 < min <= max");
  }
  if (!(space.epsilon_min > 0.0) || !(space.epsilon_max >= space.epsilon_min)) {
    fail("space.epsilon bounds must satisfy 0 < min <= max");
  }

  if (!(svr.box_c > 0.0)) fail("svr.box_c must be positive");
  if (!(svr.tol > 0.0)) fail("svr.tol must be positive");

  acquisition_from_string(bo.acquisition);
  if (bo.ei_plus_lambda < 0.0) fail("bo.ei_plus_lambda must be >= 0");
  if (bo.data_budget < 1) fail("bo.data_budget must be >= 1");
  if (bo.closed_loop_budget < 1) fail("bo.closed_loop_budget must be >= 1");
  if (bo.repetitions < 1) fail("bo.repetitions must be >= 1");
  if (bo.init_per_candidate < 1) fail("bo.init_per_candidate must be >= 1");

  if (cv.folds < 2) fail("cv.folds must be >= 2");
  if (cv.folds > dataset.count) fail("cv.folds cannot exceed dataset.count");

  if (simulate.model != "perfect" && simulate.model != "zero" && simulate.model != "svr" &&
      simulate.model != "gp") {
    fail("simulate.model must be one of perfect, zero, svr, gp");
  }
  kernel_family_from_string(simulate.kernel);
  for (const double p : simulate.phi) {
    if (!(p > 0.0)) fail("simulate.phi entries must be positive");
  }
  if (simulate.epsilon < 0.0) fail("simulate.epsilon must be >= 0");
  if (simulate.noise_sigma < 0.0) fail("simulate.noise_sigma must be >= 0");

  if (verify.draws < 0) fail("verify.draws must be >= 0");
  if (output_dir.empty()) fail("output_dir must not be empty");
}

nlohmann::json ExperimentConfig::to_json() const {
  return nlohmann::json{
      {"plant", {{"x0", plant.x0}, {"horizon", plant.horizon}, {"guard", plant.guard}}},
      {"dataset",
       {{"count", dataset.count}, {"x_min", dataset.x_min}, {"x_max", dataset.x_max}}},
      {"space",
       {{"kernels", space.kernels},
        {"gaussian_scale_min", space.gaussian_scale_min},
        {"gaussian_scale_max", space.gaussian_scale_max},
        {"epsilon_min", space.epsilon_min},
        {"epsilon_max", space.epsilon_max}}},
      {"svr", {{"box_c", svr.box_c}, {"tol", svr.tol}}},
      {"bo",
       {{"acquisition", bo.acquisition},
        {"ei_plus_lambda", bo.ei_plus_lambda},
        {"data_budget", bo.data_budget},
        {"closed_loop_budget", bo.closed_loop_budget},
        {"repetitions", bo.repetitions},
        {"init_per_candidate", bo.init_per_candidate}}},
      {"cv", {{"folds", cv.folds}}},
      {"simulate",
       {{"model", simulate.model},
        {"kernel", simulate.kernel},
        {"phi", simulate.phi},
        {"epsilon", simulate.epsilon},
        {"noise_sigma", simulate.noise_sigma}}},
      {"verify", {{"draws", verify.draws}}},
      {"seed", seed}};
}

std::string ExperimentConfig::config_hash() const { return fnv1a64_hex(to_json().dump()); }

CostSpec ExperimentConfig::cost_spec() const {
  return CostSpec{CostKind::TimeWeightedQuadraticState, plant.horizon};
}

SearchSpace ExperimentConfig::search_space() const {
  SearchSpace s;
  for (const auto& name : space.kernels) {
    const KernelFamily family = kernel_family_from_string(name);
    HyperparameterDomain domain = HyperparameterDomain::empty();
    if (family == KernelFamily::Gaussian) {
      Eigen::VectorXd lo(1), hi(1);
      lo << space.gaussian_scale_min;
      hi << space.gaussian_scale_max;
      domain = HyperparameterDomain::box(lo, hi, true);
    } else if (family == KernelFamily::SquaredExponentialArd) {
      domain = default_domain(family, 1);
    }
    s.candidates.push_back(Candidate{family, domain});
  }
  Eigen::VectorXd lo(1), hi(1);
  lo << space.epsilon_min;
  hi << space.epsilon_max;
  s.extra = HyperparameterDomain::box(lo, hi, true);
  return s;
}

SelectionConfig ExperimentConfig::selection_config() const {
  SelectionConfig sel;
  sel.box_c = svr.box_c;
  sel.svr_tol = svr.tol;
  sel.cv_folds = cv.folds;
  sel.guard = plant.guard;
  sel.bo.acquisition = acquisition_from_string(bo.acquisition);
  sel.bo.ei_plus_lambda = bo.ei_plus_lambda;
  sel.bo.init_per_candidate = bo.init_per_candidate;
  return sel;
}

Dataset ExperimentConfig::training_data() const {
  Dataset data;
  data.inputs.resize(dataset.count, 1);
  data.targets.resize(dataset.count);
  const double step = (dataset.x_max - dataset.x_min) / (dataset.count - 1);
  for (int i = 0; i < dataset.count; ++i) {
    const double x = dataset.x_min + step * i;
    data.inputs(i, 0) = x;
    data.targets(i) = step_plant(x, 0.0);
  }
  return data;
}

}  // namespace kselect
