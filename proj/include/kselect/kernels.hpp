// Kernel catalog, hyperparameter boxes and Gram matrix construction.
#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

namespace kselect {

enum class KernelFamily {
  Linear,                   // x' * x2
  PolynomialCubic,          // (1 + x' * x2)^3
  Gaussian,                 // exp(-|x - x2|^2 / phi1^2)
  SquaredExponentialArd,    // phi1^2 * exp(-sum_d (x_d - x2_d)^2 / phi_{1+d}^2)
};

std::string_view to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Number of hyperparameters a family takes for the given input dimension.
int kernel_arity(KernelFamily family, int input_dim);

/// A fully specified kernel: family plus hyperparameter vector phi.
struct KernelSpec {
  KernelFamily family = KernelFamily::Linear;
  Eigen::VectorXd phi;
  int input_dim = 1;

  static KernelSpec linear(int input_dim = 1);
  static KernelSpec polynomial_cubic(int input_dim = 1);
  static KernelSpec gaussian(double scale, int input_dim = 1);
  static KernelSpec squared_exponential_ard(double amplitude,
                                            const Eigen::VectorXd& lengthscales);

  /// Throws std::invalid_argument on arity mismatch or non-positive phi.
  void validate() const;
};

/// Axis-aligned search box for hyperparameters, each axis optionally
/// explored on a log scale (lower bound must then be positive).
struct HyperparameterDomain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<bool> log_scale;

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
  bool contains(const Eigen::VectorXd& phi, double tol = 0.0) const;

  /// Map a point of the box to [0,1]^dim and back. Log axes are mapped
  /// linearly in log space, so a unit step means a constant ratio.
  Eigen::VectorXd to_unit(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& unit) const;
  Eigen::VectorXd midpoint() const;

  static HyperparameterDomain empty();
  static HyperparameterDomain box(const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper,
                                  bool log_all);
};

/// k(x, x2) for a single pair of points.
double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& x2);

/// Gram matrix of the given points (rows are samples). OpenMP-parallel over
/// rows for large inputs; bitwise identical to reference::gram_matrix.
/// Throws std::runtime_error if any entry comes out non-finite.
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points);

/// Rectangular kernel matrix K(a_i, b_j), parallel over rows of `a`.
Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& b);

/// Search box used when the family's hyperparameters are tuned.
HyperparameterDomain default_domain(KernelFamily family, int input_dim);

namespace reference {

/// Serial twins of the parallel routines above, kept for equivalence tests
/// and benchmarking.
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points);
Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& b);

}  // namespace reference

}  // namespace kselect
