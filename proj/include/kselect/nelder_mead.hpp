// Derivative-free simplex minimizer plus seeded multi-start helpers.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

namespace kselect::optim {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead with standard reflection/expansion/contraction coefficients.
/// The objective owns any box handling (clamp + penalty); the simplex itself
/// is unconstrained. Deterministic for a fixed start.
SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                          const Eigen::VectorXd& start, double initial_step,
                          int max_evaluations, double f_tolerance = 1e-10);

/// i-th point of the Halton sequence in [0,1]^dim (bases 2, 3, 5, ...).
/// Supports dim <= 12; deterministic and unseeded.
Eigen::VectorXd halton_point(int index, int dim);

/// `count` quasi-random starts in [0,1]^dim: the Halton sequence shifted by
/// a seeded offset (mod 1), so different seeds explore different rotations.
std::vector<Eigen::VectorXd> scrambled_starts(int count, int dim, std::uint64_t seed);

/// Runs nelder_mead from every start (OpenMP-parallel) and returns the best
/// result; ties break on the lowest start index, so the answer does not
/// depend on thread count.
SimplexResult multistart_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                  const std::vector<Eigen::VectorXd>& starts,
                                  double initial_step, int max_evaluations,
                                  double f_tolerance = 1e-10);

/// Splitmix64 stream: hashes (seed, a, b) to a new 64-bit seed. Used to give
/// nested components independent, reproducible randomness.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace kselect::optim
