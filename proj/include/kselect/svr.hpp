// Epsilon-insensitive support vector regression trained by SMO on the dual.
#pragma once

#include <Eigen/Core>

#include "kselect/dataset.hpp"
#include "kselect/kernels.hpp"

namespace kselect {

/// Trained regressor f(x) = sum_i duals_i k(x, centers_i) + bias.
/// `duals` holds beta_i = alpha_i - alpha_i^*; rows of `centers` whose dual
/// vanished are pruned after training.
struct SvrModel {
  KernelSpec spec;
  double epsilon = 0.0;
  double box_c = 1.0;
  double bias = 0.0;
  Eigen::MatrixXd centers;
  Eigen::VectorXd duals;
  long iterations = 0;
  /// Value of the minimized dual objective at the solution,
  /// 1/2 b'Kb - y'b + epsilon * sum(alpha + alpha^*).
  double dual_objective = 0.0;
};

struct SvrOptions {
  double tol = 1e-4;        // maximal-violating-pair KKT gap at which to stop
  long max_passes = 100000; // pair updates before declaring non-convergence
  // Rank-deficient gram matrices (the cubic kernel on wide inputs) leave
  // pairwise descent inching along a flat valley far past any sane pass cap.
  // When the cap is hit with this flag set, an interior-point solve plus an
  // exact solve on the identified active face finishes the job to the same
  // KKT gap. Disable to surface the raw non-convergence error instead.
  bool exact_refinement = true;
};

/// Solves the epsilon-SVR dual with maximal-violating-pair SMO.
/// Throws std::invalid_argument on bad arguments (m < 2, epsilon < 0,
/// box_c <= 0) and std::runtime_error when the pass cap is hit.
SvrModel train_svr(const Dataset& data, const KernelSpec& spec, double epsilon,
                   double box_c, const SvrOptions& options = {});

double predict_svr(const SvrModel& model, const Eigen::VectorXd& point);

/// Predictions for many points (rows); OpenMP-parallel.
Eigen::VectorXd predict_svr_batch(const SvrModel& model, const Eigen::MatrixXd& points);

int count_support_vectors(const SvrModel& model);

/// Box-constraint heuristic: interquartile range of the targets divided by
/// 1.349, the classic robust estimate of their standard deviation. Quartiles
/// use midpoint-offset breakpoints (i - 0.5)/m with linear interpolation.
/// Falls back to 1.0 when the targets are degenerate (iqr == 0 or m < 2).
double default_box_constraint(const Eigen::VectorXd& targets);

/// Default search box for the tube width epsilon.
HyperparameterDomain default_epsilon_domain();

}  // namespace kselect
