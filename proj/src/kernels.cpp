#include "kselect/kernels.hpp"

#include <cmath>
#include <stdexcept>

#include "kselect/dataset.hpp"

namespace kselect {

std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Linear: return "linear";
    case KernelFamily::PolynomialCubic: return "polynomial_cubic";
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::SquaredExponentialArd: return "squared_exponential_ard";
  }
  throw std::invalid_argument("unknown kernel family enum value");
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "linear") return KernelFamily::Linear;
  if (name == "polynomial_cubic") return KernelFamily::PolynomialCubic;
  if (name == "gaussian") return KernelFamily::Gaussian;
  if (name == "squared_exponential_ard") return KernelFamily::SquaredExponentialArd;
  throw std::invalid_argument("unknown kernel family: " + std::string(name));
}

int kernel_arity(KernelFamily family, int input_dim) {
  if (input_dim < 1) throw std::invalid_argument("kernel_arity: input_dim must be >= 1");
  switch (family) {
    case KernelFamily::Linear: return 0;
    case KernelFamily::PolynomialCubic: return 0;
    case KernelFamily::Gaussian: return 1;
    case KernelFamily::SquaredExponentialArd: return 1 + input_dim;
  }
  throw std::invalid_argument("unknown kernel family enum value");
}

KernelSpec KernelSpec::linear(int input_dim) {
  KernelSpec s{KernelFamily::Linear, Eigen::VectorXd(0), input_dim};
  s.validate();
  return s;
}

KernelSpec KernelSpec::polynomial_cubic(int input_dim) {
  KernelSpec s{KernelFamily::PolynomialCubic, Eigen::VectorXd(0), input_dim};
  s.validate();
  return s;
}

KernelSpec KernelSpec::gaussian(double scale, int input_dim) {
  Eigen::VectorXd phi(1);
  phi << scale;
  KernelSpec s{KernelFamily::Gaussian, phi, input_dim};
  s.validate();
  return s;
}

KernelSpec KernelSpec::squared_exponential_ard(double amplitude,
                                               const Eigen::VectorXd& lengthscales) {
  Eigen::VectorXd phi(1 + lengthscales.size());
  phi(0) = amplitude;
  phi.tail(lengthscales.size()) = lengthscales;
  KernelSpec s{KernelFamily::SquaredExponentialArd, phi,
               static_cast<int>(lengthscales.size())};
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("KernelSpec: input_dim must be >= 1");
  const int arity = kernel_arity(family, input_dim);
  if (phi.size() != arity) {
    throw std::invalid_argument("KernelSpec: expected " + std::to_string(arity) +
                                " hyperparameters for " + std::string(to_string(family)) +
                                ", got " + std::to_string(phi.size()));
  }
  for (int i = 0; i < phi.size(); ++i) {
    if (!(phi(i) > 0.0) || !std::isfinite(phi(i))) {
      throw std::invalid_argument("KernelSpec: hyperparameters must be positive and finite");
    }
  }
}

void HyperparameterDomain::validate() const {
  if (upper.size() != lower.size() ||
      static_cast<Eigen::Index>(log_scale.size()) != lower.size()) {
    throw std::invalid_argument("HyperparameterDomain: inconsistent sizes");
  }
  for (int i = 0; i < dim(); ++i) {
    if (!std::isfinite(lower(i)) || !std::isfinite(upper(i)) || lower(i) > upper(i)) {
      throw std::invalid_argument("HyperparameterDomain: needs finite lower <= upper");
    }
    if (log_scale[i] && !(lower(i) > 0.0)) {
      throw std::invalid_argument("HyperparameterDomain: log axis needs positive lower bound");
    }
  }
}

bool HyperparameterDomain::contains(const Eigen::VectorXd& phi, double tol) const {
  if (phi.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i) {
    const double slack = tol * std::max(1.0, std::abs(upper(i)) + std::abs(lower(i)));
    if (phi(i) < lower(i) - slack || phi(i) > upper(i) + slack) return false;
  }
  return true;
}

Eigen::VectorXd HyperparameterDomain::to_unit(const Eigen::VectorXd& phi) const {
  if (phi.size() != dim()) throw std::invalid_argument("to_unit: dimension mismatch");
  Eigen::VectorXd u(dim());
  for (int i = 0; i < dim(); ++i) {
    if (log_scale[i]) {
      const double span = std::log(upper(i) / lower(i));
      u(i) = span > 0.0 ? std::log(phi(i) / lower(i)) / span : 0.5;
    } else {
      const double span = upper(i) - lower(i);
      u(i) = span > 0.0 ? (phi(i) - lower(i)) / span : 0.5;
    }
  }
  return u;
}

Eigen::VectorXd HyperparameterDomain::from_unit(const Eigen::VectorXd& unit) const {
  if (unit.size() != dim()) throw std::invalid_argument("from_unit: dimension mismatch");
  Eigen::VectorXd phi(dim());
  for (int i = 0; i < dim(); ++i) {
    const double u = std::min(1.0, std::max(0.0, unit(i)));
    if (log_scale[i]) {
      phi(i) = lower(i) * std::exp(u * std::log(upper(i) / lower(i)));
    } else {
      phi(i) = lower(i) + u * (upper(i) - lower(i));
    }
    phi(i) = std::min(upper(i), std::max(lower(i), phi(i)));
  }
  return phi;
}

Eigen::VectorXd HyperparameterDomain::midpoint() const {
  return from_unit(Eigen::VectorXd::Constant(dim(), 0.5));
}

HyperparameterDomain HyperparameterDomain::empty() {
  return HyperparameterDomain{Eigen::VectorXd(0), Eigen::VectorXd(0), {}};
}

HyperparameterDomain HyperparameterDomain::box(const Eigen::VectorXd& lower,
                                               const Eigen::VectorXd& upper,
                                               bool log_all) {
  HyperparameterDomain d{lower, upper,
                         std::vector<bool>(static_cast<size_t>(lower.size()), log_all)};
  d.validate();
  return d;
}

double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& x2) {
  if (x.size() != spec.input_dim || x2.size() != spec.input_dim) {
    throw std::invalid_argument("eval_kernel: point dimension mismatch");
  }
  switch (spec.family) {
    case KernelFamily::Linear:
      return x.dot(x2);
    case KernelFamily::PolynomialCubic: {
      const double t = 1.0 + x.dot(x2);
      return t * t * t;
    }
    case KernelFamily::Gaussian: {
      const double s = spec.phi(0);
      return std::exp(-(x - x2).squaredNorm() / (s * s));
    }
    case KernelFamily::SquaredExponentialArd: {
      const double amp = spec.phi(0);
      double q = 0.0;
      for (int d = 0; d < spec.input_dim; ++d) {
        const double delta = (x(d) - x2(d)) / spec.phi(1 + d);
        q += delta * delta;
      }
      return amp * amp * std::exp(-q);
    }
  }
  throw std::invalid_argument("unknown kernel family enum value");
}

namespace {

void check_points(const KernelSpec& spec, const Eigen::MatrixXd& points) {
  spec.validate();
  if (points.cols() != spec.input_dim) {
    throw std::invalid_argument("gram: points have dimension " +
                                std::to_string(points.cols()) + ", kernel expects " +
                                std::to_string(spec.input_dim));
  }
}

void check_finite(const Eigen::MatrixXd& k, const char* what) {
  if (!k.allFinite()) {
    throw std::runtime_error(std::string(what) + ": non-finite kernel value (input overflow?)");
  }
}

}  // namespace

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points) {
  check_points(spec, points);
  const int m = static_cast<int>(points.rows());
  Eigen::MatrixXd k(m, m);
  // Each (i,j) entry is written exactly once from the same expression the
  // serial version uses, so thread count cannot change the result.
#pragma omp parallel for schedule(static) if (m > 64)
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double v = eval_kernel(spec, points.row(i), points.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  check_finite(k, "gram_matrix");
  return k;
}

Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& b) {
  check_points(spec, a);
  check_points(spec, b);
  const int ma = static_cast<int>(a.rows());
  const int mb = static_cast<int>(b.rows());
  Eigen::MatrixXd k(ma, mb);
#pragma omp parallel for schedule(static) if (ma * mb > 4096)
  for (int i = 0; i < ma; ++i) {
    for (int j = 0; j < mb; ++j) {
      k(i, j) = eval_kernel(spec, a.row(i), b.row(j));
    }
  }
  check_finite(k, "cross_gram");
  return k;
}

HyperparameterDomain default_domain(KernelFamily family, int input_dim) {
  const int arity = kernel_arity(family, input_dim);
  if (arity == 0) return HyperparameterDomain::empty();
  if (family == KernelFamily::Gaussian) {
    Eigen::VectorXd lo(1), hi(1);
    lo << 1e-2;
    hi << 1e2;
    return HyperparameterDomain::box(lo, hi, true);
  }
  // Squared-exponential ARD: amplitude then one lengthscale per input axis.
  Eigen::VectorXd lo(arity), hi(arity);
  lo(0) = 1e-2;
  hi(0) = 1e2;
  for (int d = 1; d < arity; ++d) {
    lo(d) = 1e-2;
    hi(d) = 1e2;
  }
  return HyperparameterDomain::box(lo, hi, true);
}

void Dataset::validate() const {
  if (targets.size() != inputs.rows()) {
    throw std::invalid_argument("Dataset: inputs/targets row count mismatch");
  }
  if (inputs.rows() < 1 || inputs.cols() < 1) {
    throw std::invalid_argument("Dataset: needs at least one sample and one input column");
  }
  if (!inputs.allFinite() || !targets.allFinite()) {
    throw std::invalid_argument("Dataset: non-finite values");
  }
}

namespace reference {

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& points) {
  check_points(spec, points);
  const int m = static_cast<int>(points.rows());
  Eigen::MatrixXd k(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double v = eval_kernel(spec, points.row(i), points.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  check_finite(k, "reference::gram_matrix");
  return k;
}

Eigen::MatrixXd cross_gram(const KernelSpec& spec, const Eigen::MatrixXd& a,
                           const Eigen::MatrixXd& b) {
  check_points(spec, a);
  check_points(spec, b);
  const int ma = static_cast<int>(a.rows());
  const int mb = static_cast<int>(b.rows());
  Eigen::MatrixXd k(ma, mb);
  for (int i = 0; i < ma; ++i) {
    for (int j = 0; j < mb; ++j) {
      k(i, j) = eval_kernel(spec, a.row(i), b.row(j));
    }
  }
  check_finite(k, "reference::cross_gram");
  return k;
}

}  // namespace reference

}  // namespace kselect
