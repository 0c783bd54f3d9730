// The two model-selection pipelines under comparison: tuning kernel and
// hyperparameters against cross-validated prediction error versus tuning
// them against the closed-loop control cost the model is used for.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

#include "kselect/bo.hpp"
#include "kselect/dataset.hpp"
#include "kselect/plant.hpp"
#include "kselect/svr.hpp"

namespace kselect {

/// Shared knobs of both pipelines.
struct SelectionConfig {
  double box_c = 1.0;
  double svr_tol = 1e-4;
  int cv_folds = 5;
  double guard = 1e3;
  /// Tube width to use when the search space carries no tube-width axis.
  double svr_epsilon = 0.1;
  BoOptions bo;
};

struct SelectionResult {
  int kernel_index = 1;
  KernelFamily family = KernelFamily::Linear;
  Eigen::VectorXd phi;       // selected kernel hyperparameters (may be empty)
  double svr_epsilon = 0.0;  // selected tube width
  double loss = 0.0;         // cross-validation loss of the selection
  double cost = 0.0;         // closed-loop cost of the selection
  BoState bo_state;
  /// Plant rollouts that happened while the search itself ran (the
  /// data-based pipeline must report 0 here).
  std::uint64_t search_rollouts = 0;
  /// Closed-loop transitions gathered during the search, as regression
  /// pairs (x_k, x_{k+1} - u_k); empty for the data-based pipeline.
  Dataset transitions;
};

/// k-fold cross-validation mean squared error of an SVR fit. Folds are a
/// seeded shuffle split into contiguous blocks; folds == m gives
/// leave-one-out. Throws std::invalid_argument for folds outside [2, m].
double cross_validation_loss(const Dataset& data, const KernelSpec& spec, double epsilon,
                             int folds, std::uint64_t seed, double box_c = 1.0,
                             double svr_tol = 1e-4);

/// The candidate list used in the study: linear, cubic polynomial and
/// Gaussian kernels, with the SVR tube width as a shared extra axis.
SearchSpace simulation_search_space();

/// default_box_constraint applied to the stock identification targets. This
/// is the regularization level the study numbers are calibrated against.
double default_simulation_box_constraint();

/// Picks kernel, hyperparameters and tube width by Bayesian optimization of
/// the cross-validation loss. Touches the plant only once at the end, to
/// report the closed-loop cost of the winner.
SelectionResult data_based_selection(const Dataset& data, const SearchSpace& space,
                                     int budget, std::uint64_t seed, double x0,
                                     const CostSpec& cost, const SelectionConfig& config = {});

/// Picks the same knobs by Bayesian optimization of the closed-loop cost of
/// rollouts from x0. `initial` pins the first evaluated point (typically the
/// data-based winner), which caps the final cost at that point's cost.
SelectionResult closed_loop_selection(const Dataset& data, const SearchSpace& space,
                                      const CostSpec& cost, double x0, int budget,
                                      std::uint64_t seed,
                                      const std::optional<BoPoint>& initial = {},
                                      const SelectionConfig& config = {});

/// Appends closed-loop transitions to an identification set, dropping pairs
/// outside the rollout guard (those come from already-diverged traces).
Dataset augment_with_transitions(const Dataset& data, const Dataset& transitions,
                                 double guard = 1e3);

struct StudyResult {
  std::vector<SelectionResult> runs;
  Eigen::MatrixXd incumbent_curves;  // reps x budget, best cost so far
  Eigen::VectorXd mean_curve;
  Eigen::VectorXd std_curve;         // sample standard deviation across reps
  Eigen::VectorXd final_costs;
  std::vector<int> kernel_counts;    // how often each candidate won
};

/// Repeats closed_loop_selection with seeds base_seed, base_seed+1, ...
/// OpenMP-parallel across repetitions, deterministic per seed.
StudyResult repeated_study(const Dataset& data, const SearchSpace& space,
                           const CostSpec& cost, double x0, int repetitions, int budget,
                           std::uint64_t base_seed,
                           const std::optional<BoPoint>& initial = {},
                           const SelectionConfig& config = {});

}  // namespace kselect
