// RKHS norms of kernel expansions and the norm bound under lengthscale
// shrinkage that justifies searching a widened hyperparameter box.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

#include "kselect/kernels.hpp"

namespace kselect {

/// f(x) = sum_i coeffs_i k(centers_i, x).
struct KernelExpansion {
  KernelSpec spec;
  Eigen::MatrixXd centers;
  Eigen::VectorXd coeffs;
};

/// sqrt(c' K c) for the expansion's own Gram matrix. Throws
/// std::runtime_error if the quadratic form is negative beyond tolerance.
double rkhs_norm(const KernelExpansion& expansion);

struct ScalingCheck {
  double lhs = 0.0;    // f' inv(K_phi_prime) f
  double rhs = 0.0;    // prod_d (phi_d / phi_prime_d) * f' inv(K_phi) f
  bool holds = false;  // lhs <= rhs up to relative slack
};

/// Finite-grid form of the norm growth bound: for the stationary kernel
/// k(x, x2) = exp(-sum_d (x_d - x2_d)^2 / phi_d) and any grid values f,
/// shrinking every lengthscale entry (phi_prime <= phi elementwise) grows
/// the squared norm by at most the product of the ratios phi_d / phi_prime_d.
/// Throws std::invalid_argument unless 0 < phi_prime <= phi.
ScalingCheck scaling_bound_check(const Eigen::VectorXd& values_on_grid,
                                 const Eigen::MatrixXd& grid,
                                 const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& phi_prime,
                                 double relative_slack = 1e-8);

/// Widened box around a fitted hyperparameter vector: per axis
/// [shrink * phi_d, grow * phi_d], explored on a log scale. Requires
/// 0 < shrink < 1 < grow so phi_star sits strictly inside the box.
HyperparameterDomain build_superset(const Eigen::VectorXd& phi_star, double shrink,
                                    double grow);

/// Randomized stress test of the bound: `count` draws of random grids,
/// functions, and lengthscale pairs. OpenMP-parallel, deterministic per seed.
std::vector<ScalingCheck> run_scaling_draws(int count, std::uint64_t seed);

}  // namespace kselect
