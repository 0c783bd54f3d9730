// Gaussian process regression with zero prior mean.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>

#include "kselect/dataset.hpp"
#include "kselect/kernels.hpp"

namespace kselect {

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Immutable fitted regressor. Factorizes K + sigma_n^2 I once (Cholesky with
/// an escalating jitter ladder) and answers posterior queries from the factor.
class GpModel {
 public:
  /// Throws std::invalid_argument on shape errors and std::runtime_error if
  /// the factorization still fails at the largest jitter.
  static GpModel fit(Dataset data, KernelSpec spec, double noise_sigma);

  /// Posterior mean and variance at a query point. The variance is the
  /// latent one (no noise term) and is clamped at zero.
  Prediction predict(const Eigen::VectorXd& point) const;

  /// Posterior means for many query points (rows); OpenMP-parallel.
  Eigen::VectorXd predict_mean_batch(const Eigen::MatrixXd& points) const;

  /// Negative log marginal likelihood of the training targets.
  double nll() const;

  const Dataset& data() const { return data_; }
  const KernelSpec& spec() const { return spec_; }
  double noise_sigma() const { return noise_sigma_; }
  double jitter() const { return jitter_; }
  /// Lower-triangular Cholesky factor of K + (sigma_n^2 + jitter) I.
  Eigen::MatrixXd factor() const { return llt_.matrixL(); }
  const Eigen::VectorXd& alpha() const { return alpha_; }

 private:
  GpModel() = default;

  Dataset data_;
  KernelSpec spec_;
  double noise_sigma_ = 0.0;
  double jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

/// Negative log marginal likelihood without keeping the model around.
double nll(const Dataset& data, const KernelSpec& spec, double noise_sigma);

struct HyperparameterFit {
  KernelSpec spec;
  double noise_sigma = 0.0;
  double nll = 0.0;
};

/// Minimizes the negative log marginal likelihood over the kernel box and a
/// noise box with seeded multi-start Nelder-Mead in unit (log where flagged)
/// coordinates. Deterministic for fixed inputs and seed.
HyperparameterFit optimize_hyperparameters(const Dataset& data, KernelFamily family,
                                           const HyperparameterDomain& domain,
                                           const HyperparameterDomain& noise_domain,
                                           int restarts, std::uint64_t seed);

}  // namespace kselect
