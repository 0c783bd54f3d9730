// Bayesian optimization over a mixed space: a discrete kernel choice plus
// that kernel's continuous hyperparameters (and shared extras such as the
// SVR tube width). The discrete axis is embedded as an integer coordinate
// that the surrogate rounds, so one GP covers the whole space.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "kselect/gp.hpp"
#include "kselect/kernels.hpp"

namespace kselect {

enum class AcquisitionKind {
  ExpectedImprovement,
  ExpectedImprovementPlus,  // EI with an escape from over-exploitation
  UpperConfidenceBound,     // minimization form mu - sqrt(beta) * sigma
};

std::string_view to_string(AcquisitionKind kind);
AcquisitionKind acquisition_from_string(std::string_view name);

/// One selectable kernel family together with its hyperparameter box.
struct Candidate {
  KernelFamily family = KernelFamily::Linear;
  HyperparameterDomain domain = HyperparameterDomain::empty();
};

/// The whole search space: kernel candidates (1-based index) and extra
/// continuous axes shared by every candidate.
struct SearchSpace {
  std::vector<Candidate> candidates;
  HyperparameterDomain extra = HyperparameterDomain::empty();

  int candidate_count() const { return static_cast<int>(candidates.size()); }
  int max_kernel_arity() const;
  /// Length of the encoded surrogate coordinate: 1 + max arity + extras.
  int encoded_dim() const;
  /// Continuous dimensions of candidate `kernel_index` (its arity + extras).
  int point_dim(int kernel_index) const;
  void validate() const;
};

/// A point of the search space: 1-based candidate index plus that
/// candidate's hyperparameters followed by the shared extras.
struct BoPoint {
  int kernel_index = 1;
  Eigen::VectorXd phi;
};

struct Observation {
  int kernel_index = 1;
  Eigen::VectorXd phi;
  double cost = 0.0;
  int trial_index = 0;
};

/// Surrogate coordinate: [index, candidate phi in unit coords padded to the
/// max arity (inactive axes parked at 0.5), extras in unit coords].
Eigen::VectorXd encode(const SearchSpace& space, int kernel_index,
                       const Eigen::VectorXd& phi);
BoPoint decode(const SearchSpace& space, const Eigen::VectorXd& encoded);

/// GP over encoded coordinates with costs standardized to zero mean and
/// unit variance. Standardization happens after an asinh warp so that flat
/// divergence penalties keep their rank without flattening the scale of the
/// healthy region. Predictions live in the standardized space; the index
/// coordinate of a query is rounded before it reaches the kernel.
class BoSurrogate {
 public:
  static BoSurrogate fit(const SearchSpace& space, const std::vector<Observation>& history,
                         std::uint64_t seed, int restarts = 3);

  Prediction predict_encoded(const Eigen::VectorXd& encoded) const;
  double standardize(double cost) const { return (std::asinh(cost) - shift_) / scale_; }
  double destandardize(double value) const { return std::sinh(value * scale_ + shift_); }
  /// Fitted observation-noise level, in standardized cost units.
  double noise_sigma() const { return gp_->noise_sigma(); }
  const GpModel& gp() const { return *gp_; }

 private:
  std::optional<GpModel> gp_;
  int candidate_count_ = 1;
  double shift_ = 0.0;
  double scale_ = 1.0;
};

struct BoState {
  std::vector<Observation> history;
  std::optional<BoSurrogate> surrogate;
  std::vector<double> incumbent_trace;  // best cost after each observation
  int incumbent_index = -1;
  std::uint64_t rng_seed = 0;

  /// Appends and maintains the incumbent and its trace.
  void append(Observation observation);
  const Observation& incumbent() const;
};

struct BoOptions {
  AcquisitionKind acquisition = AcquisitionKind::ExpectedImprovementPlus;
  std::uint64_t seed = 0;
  /// Seeded quasi-random initial evaluations per candidate.
  int init_per_candidate = 3;
  /// Extra user-chosen points evaluated first (e.g. a known-good design).
  std::vector<BoPoint> initial_points;
  int surrogate_restarts = 3;
  int acquisition_restarts = 10;
  /// Escape threshold: proposals whose posterior sigma falls below
  /// lambda * fitted noise are replaced by one wide exploration step.
  double ei_plus_lambda = 0.5;
  double escape_beta = 16.0;
  double penalty_cost = 1e6;
};

/// Expected improvement for minimization: (best - mean) * CDF(t) +
/// stddev * PDF(t) with t = (best - mean) / stddev; 0 when stddev is 0.
double expected_improvement(double mean, double stddev, double best);

/// Acquisition values at an encoded coordinate. EI variants are maximized;
/// the UCB score is minimized. `best_cost` is in raw (unstandardized) units.
double acquisition_ei(const BoSurrogate& surrogate, double best_cost,
                      const Eigen::VectorXd& encoded);
double acquisition_ei_plus(const BoState& state, const Eigen::VectorXd& encoded);
double acquisition_ucb(const BoSurrogate& surrogate, const Eigen::VectorXd& encoded,
                       double beta);

/// Maximizes the acquisition per candidate (multi-start simplex search over
/// that candidate's box) and returns the best point found across candidates.
/// Never proposes outside the space; falls back to a seeded random point if
/// every search fails. Requires a fitted surrogate in `state` unless the
/// history is empty, in which case it returns an initial-design point.
BoPoint propose_next(const BoState& state, const SearchSpace& space,
                     AcquisitionKind kind, std::uint64_t seed,
                     const BoOptions& options = {});

/// Full loop: seeded initial design (user points first, then quasi-random
/// points per candidate), then fit-propose-evaluate until `budget`
/// observations. Non-finite objective values are recorded at the penalty
/// cost; objective exceptions are rethrown tagged with the failing point.
BoState run_bo(const std::function<double(int, const Eigen::VectorXd&)>& objective,
               const SearchSpace& space, int budget, const BoOptions& options = {});

}  // namespace kselect
