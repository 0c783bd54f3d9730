#include "kselect/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "kselect/nelder_mead.hpp"

namespace kselect {

GpModel GpModel::fit(Dataset data, KernelSpec spec, double noise_sigma) {
  data.validate();
  spec.validate();
  if (data.input_dim() != spec.input_dim) {
    throw std::invalid_argument("gp: data dimension does not match kernel");
  }
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    throw std::invalid_argument("gp: noise_sigma must be finite and >= 0");
  }

  GpModel model;
  model.spec_ = std::move(spec);
  model.noise_sigma_ = noise_sigma;

  const Eigen::MatrixXd k = gram_matrix(model.spec_, data.inputs);
  const int m = data.size();
  double base = k.trace() / m;
  if (!(base > 0.0)) base = 1.0;

  // Jitter ladder: try the exact matrix first, then 1e-10 * mean diagonal
  // escalating tenfold up to 1e-4 before giving up.
  bool ok = false;
  for (int level = -1; level <= 6 && !ok; ++level) {
    const double jitter = level < 0 ? 0.0 : base * 1e-10 * std::pow(10.0, level);
    Eigen::MatrixXd shifted = k;
    shifted.diagonal().array() += noise_sigma * noise_sigma + jitter;
    model.llt_.compute(shifted);
    if (model.llt_.info() == Eigen::Success) {
      model.jitter_ = jitter;
      ok = true;
    }
  }
  if (!ok) {
    throw std::runtime_error("gp: Cholesky failed for every jitter level (kernel matrix is too ill-conditioned)");
  }

  model.alpha_ = model.llt_.solve(data.targets);
  model.data_ = std::move(data);
  return model;
}

Prediction GpModel::predict(const Eigen::VectorXd& point) const {
  if (point.size() != spec_.input_dim) {
    throw std::invalid_argument("gp predict: point dimension mismatch");
  }
  const int m = data_.size();
  Eigen::VectorXd k_star(m);
  for (int i = 0; i < m; ++i) {
    k_star(i) = eval_kernel(spec_, data_.inputs.row(i), point);
  }
  Prediction p;
  p.mean = k_star.dot(alpha_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k_star);
  const double k_ss = eval_kernel(spec_, point, point);
  p.variance = std::max(0.0, k_ss - v.squaredNorm());
  return p;
}

Eigen::VectorXd GpModel::predict_mean_batch(const Eigen::MatrixXd& points) const {
  if (points.cols() != spec_.input_dim) {
    throw std::invalid_argument("gp predict_mean_batch: point dimension mismatch");
  }
  const int n = static_cast<int>(points.rows());
  Eigen::VectorXd means(n);
#pragma omp parallel for schedule(static) if (n > 32)
  for (int i = 0; i < n; ++i) {
    const int m = data_.size();
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      acc += eval_kernel(spec_, data_.inputs.row(j), points.row(i)) * alpha_(j);
    }
    means(i) = acc;
  }
  return means;
}

double GpModel::nll() const {
  const int m = data_.size();
  const double fit_term = data_.targets.dot(alpha_);
  double log_det = 0.0;
  const auto& l = llt_.matrixLLT();
  for (int i = 0; i < m; ++i) log_det += 2.0 * std::log(l(i, i));
  return 0.5 * (fit_term + log_det + m * std::log(2.0 * std::numbers::pi));
}

double nll(const Dataset& data, const KernelSpec& spec, double noise_sigma) {
  return GpModel::fit(data, spec, noise_sigma).nll();
}

HyperparameterFit optimize_hyperparameters(const Dataset& data, KernelFamily family,
                                           const HyperparameterDomain& domain,
                                           const HyperparameterDomain& noise_domain,
                                           int restarts, std::uint64_t seed) {
  data.validate();
  domain.validate();
  noise_domain.validate();
  if (restarts < 1) throw std::invalid_argument("optimize_hyperparameters: restarts must be >= 1");
  if (domain.dim() != kernel_arity(family, data.input_dim())) {
    throw std::invalid_argument("optimize_hyperparameters: domain does not match kernel arity");
  }
  if (noise_domain.dim() != 1) {
    throw std::invalid_argument("optimize_hyperparameters: noise_domain must be one-dimensional");
  }

  const int kd = domain.dim();
  const int d = kd + 1;
  auto make_spec = [&](const Eigen::VectorXd& phi) {
    return KernelSpec{family, phi, data.input_dim()};
  };

  auto objective = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd zc = z.cwiseMax(0.0).cwiseMin(1.0);
    const Eigen::VectorXd phi = kd > 0 ? domain.from_unit(zc.head(kd)) : Eigen::VectorXd(0);
    Eigen::VectorXd nz(1);
    nz << zc(d - 1);
    const double sigma = noise_domain.from_unit(nz)(0);
    double value;
    try {
      value = nll(data, make_spec(phi), sigma);
    } catch (const std::runtime_error&) {
      return std::numeric_limits<double>::infinity();
    }
    // Soft wall keeps the simplex near the box without distorting its interior.
    return value + 1e4 * (z - zc).squaredNorm();
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(Eigen::VectorXd::Constant(d, 0.5));
  auto extra = optim::scrambled_starts(restarts - 1, d, optim::derive_seed(seed, 0x6e11));
  starts.insert(starts.end(), extra.begin(), extra.end());

  const auto best = optim::multistart_minimize(objective, starts, 0.25, 150 * d + 100);
  if (!std::isfinite(best.value)) {
    throw std::runtime_error("optimize_hyperparameters: every start failed to factorize");
  }

  Eigen::VectorXd zc = best.x.cwiseMax(0.0).cwiseMin(1.0);
  HyperparameterFit fit{make_spec(kd > 0 ? domain.from_unit(zc.head(kd)) : Eigen::VectorXd(0)),
                        noise_domain.from_unit(zc.tail(1))(0), 0.0};
  fit.nll = nll(data, fit.spec, fit.noise_sigma);
  return fit;
}

}  // namespace kselect
