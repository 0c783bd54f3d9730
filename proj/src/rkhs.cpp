#include "kselect/rkhs.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>
#include <stdexcept>

#include "kselect/nelder_mead.hpp"

namespace kselect {

double rkhs_norm(const KernelExpansion& expansion) {
  expansion.spec.validate();
  if (expansion.coeffs.size() != expansion.centers.rows()) {
    throw std::invalid_argument("rkhs_norm: coefficient/center count mismatch");
  }
  const Eigen::MatrixXd k = gram_matrix(expansion.spec, expansion.centers);
  const double q = expansion.coeffs.dot(k * expansion.coeffs);
  const double scale = std::max(1.0, k.trace());
  if (q < -1e-10 * scale) {
    throw std::runtime_error("rkhs_norm: Gram matrix is indefinite beyond tolerance");
  }
  return std::sqrt(std::max(0.0, q));
}

namespace {

// Gram of exp(-sum_d delta_d^2 / phi_d): the ARD family with unit amplitude
// and lengthscales sqrt(phi) computes exactly this quadratic exponent.
Eigen::MatrixXd lengthscale_gram(const Eigen::MatrixXd& grid, const Eigen::VectorXd& phi) {
  const KernelSpec spec =
      KernelSpec::squared_exponential_ard(1.0, phi.array().sqrt().matrix());
  return gram_matrix(spec, grid);
}

double inverse_quadratic_form(const Eigen::MatrixXd& k, const Eigen::VectorXd& f) {
  Eigen::MatrixXd shifted = k;
  shifted.diagonal().array() += 1e-10;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("scaling_bound_check: Cholesky failed on grid Gram matrix");
  }
  return f.dot(llt.solve(f));
}

}  // namespace

ScalingCheck scaling_bound_check(const Eigen::VectorXd& values_on_grid,
                                 const Eigen::MatrixXd& grid,
                                 const Eigen::VectorXd& phi,
                                 const Eigen::VectorXd& phi_prime,
                                 double relative_slack) {
  if (grid.rows() != values_on_grid.size()) {
    throw std::invalid_argument("scaling_bound_check: grid/value count mismatch");
  }
  if (phi.size() != grid.cols() || phi_prime.size() != grid.cols()) {
    throw std::invalid_argument("scaling_bound_check: lengthscale dimension mismatch");
  }
  double ratio = 1.0;
  for (int d = 0; d < phi.size(); ++d) {
    if (!(phi_prime(d) > 0.0) || phi_prime(d) > phi(d)) {
      throw std::invalid_argument("scaling_bound_check: needs 0 < phi_prime <= phi elementwise");
    }
    ratio *= phi(d) / phi_prime(d);
  }

  ScalingCheck check;
  check.lhs = inverse_quadratic_form(lengthscale_gram(grid, phi_prime), values_on_grid);
  check.rhs = ratio * inverse_quadratic_form(lengthscale_gram(grid, phi), values_on_grid);
  check.holds = check.lhs <= check.rhs * (1.0 + relative_slack);
  return check;
}

HyperparameterDomain build_superset(const Eigen::VectorXd& phi_star, double shrink,
                                    double grow) {
  if (!(shrink > 0.0 && shrink < 1.0) || !(grow > 1.0)) {
    throw std::invalid_argument("build_superset: needs 0 < shrink < 1 < grow");
  }
  for (int d = 0; d < phi_star.size(); ++d) {
    if (!(phi_star(d) > 0.0)) {
      throw std::invalid_argument("build_superset: phi_star must be positive");
    }
  }
  return HyperparameterDomain::box(shrink * phi_star, grow * phi_star, true);
}

std::vector<ScalingCheck> run_scaling_draws(int count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("run_scaling_draws: count must be >= 0");
  std::vector<ScalingCheck> checks(static_cast<size_t>(count));
#pragma omp parallel for schedule(dynamic) if (count > 1)
  for (int i = 0; i < count; ++i) {
    // Per-draw engine so the draw content is independent of scheduling.
    std::mt19937_64 rng(optim::derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<int> dim_dist(1, 3);
    std::uniform_int_distribution<int> size_dist(4, 24);
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    std::normal_distribution<double> value(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.3, 4.0);
    std::uniform_real_distribution<double> shrink(0.2, 1.0);

    const int dim = dim_dist(rng);
    const int points = size_dist(rng);
    Eigen::MatrixXd grid(points, dim);
    for (int r = 0; r < points; ++r) {
      for (int d = 0; d < dim; ++d) grid(r, d) = coord(rng);
    }
    Eigen::VectorXd f(points);
    for (int r = 0; r < points; ++r) f(r) = value(rng);
    Eigen::VectorXd phi(dim), phi_prime(dim);
    for (int d = 0; d < dim; ++d) {
      phi(d) = scale(rng);
      phi_prime(d) = phi(d) * shrink(rng);
    }
    checks[static_cast<size_t>(i)] = scaling_bound_check(f, grid, phi, phi_prime);
  }
  return checks;
}

}  // namespace kselect
