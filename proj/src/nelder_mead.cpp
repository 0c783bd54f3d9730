#include "kselect/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace kselect::optim {

namespace {

double radical_inverse(int index, int base) {
  double inv = 1.0 / base;
  double factor = inv;
  double value = 0.0;
  int i = index;
  while (i > 0) {
    value += (i % base) * factor;
    i /= base;
    factor *= inv;
  }
  return value;
}

constexpr int kHaltonBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

Eigen::VectorXd halton_point(int index, int dim) {
  if (dim < 1 || dim > 12) throw std::invalid_argument("halton_point: dim must be in [1,12]");
  if (index < 0) throw std::invalid_argument("halton_point: index must be >= 0");
  Eigen::VectorXd p(dim);
  for (int d = 0; d < dim; ++d) {
    p(d) = radical_inverse(index + 1, kHaltonBases[d]);
  }
  return p;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer applied to the combined words
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0x94d049bb133111ebULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<Eigen::VectorXd> scrambled_starts(int count, int dim, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("scrambled_starts: count must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXd offset(dim);
  for (int d = 0; d < dim; ++d) offset(d) = unif(rng);
  std::vector<Eigen::VectorXd> starts;
  starts.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd p = halton_point(i, dim);
    for (int d = 0; d < dim; ++d) {
      p(d) = std::fmod(p(d) + offset(d), 1.0);
    }
    starts.push_back(std::move(p));
  }
  return starts;
}

SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& objective,
                          const Eigen::VectorXd& start, double initial_step,
                          int max_evaluations, double f_tolerance) {
  const int n = static_cast<int>(start.size());
  if (n < 1) throw std::invalid_argument("nelder_mead: empty start point");
  if (!(initial_step > 0.0)) throw std::invalid_argument("nelder_mead: step must be positive");

  constexpr double kReflect = 1.0;
  constexpr double kExpand = 2.0;
  constexpr double kContract = 0.5;
  constexpr double kShrink = 0.5;

  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = objective(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };

  std::vector<Eigen::VectorXd> simplex(static_cast<size_t>(n) + 1, start);
  std::vector<double> f(static_cast<size_t>(n) + 1);
  f[0] = eval(simplex[0]);
  for (int i = 0; i < n; ++i) {
    simplex[static_cast<size_t>(i) + 1](i) += initial_step;
    f[static_cast<size_t>(i) + 1] = eval(simplex[static_cast<size_t>(i) + 1]);
  }

  std::vector<int> order(static_cast<size_t>(n) + 1);
  bool converged = false;
  while (evals < max_evaluations) {
    for (int i = 0; i <= n; ++i) order[static_cast<size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return f[static_cast<size_t>(a)] < f[static_cast<size_t>(b)]; });
    const int best = order[0];
    const int worst = order[static_cast<size_t>(n)];
    const int second_worst = order[static_cast<size_t>(n) - 1];

    const double spread = std::abs(f[static_cast<size_t>(worst)] - f[static_cast<size_t>(best)]);
    if (spread <= f_tolerance * (1.0 + std::abs(f[static_cast<size_t>(best)]))) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i) {
      if (i != worst) centroid += simplex[static_cast<size_t>(i)];
    }
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + kReflect * (centroid - simplex[static_cast<size_t>(worst)]);
    const double f_reflected = eval(reflected);

    if (f_reflected < f[static_cast<size_t>(best)]) {
      const Eigen::VectorXd expanded = centroid + kExpand * (reflected - centroid);
      const double f_expanded = eval(expanded);
      if (f_expanded < f_reflected) {
        simplex[static_cast<size_t>(worst)] = expanded;
        f[static_cast<size_t>(worst)] = f_expanded;
      } else {
        simplex[static_cast<size_t>(worst)] = reflected;
        f[static_cast<size_t>(worst)] = f_reflected;
      }
    } else if (f_reflected < f[static_cast<size_t>(second_worst)]) {
      simplex[static_cast<size_t>(worst)] = reflected;
      f[static_cast<size_t>(worst)] = f_reflected;
    } else {
      const bool outside = f_reflected < f[static_cast<size_t>(worst)];
      const Eigen::VectorXd anchor = outside ? reflected : simplex[static_cast<size_t>(worst)];
      const Eigen::VectorXd contracted = centroid + kContract * (anchor - centroid);
      const double f_contracted = eval(contracted);
      if (f_contracted < std::min(f_reflected, f[static_cast<size_t>(worst)])) {
        simplex[static_cast<size_t>(worst)] = contracted;
        f[static_cast<size_t>(worst)] = f_contracted;
      } else {
        for (int i = 0; i <= n; ++i) {
          if (i == best) continue;
          simplex[static_cast<size_t>(i)] =
              simplex[static_cast<size_t>(best)] +
              kShrink * (simplex[static_cast<size_t>(i)] - simplex[static_cast<size_t>(best)]);
          f[static_cast<size_t>(i)] = eval(simplex[static_cast<size_t>(i)]);
          if (evals >= max_evaluations) break;
        }
      }
    }
  }

  size_t best_idx = 0;
  for (size_t i = 1; i < f.size(); ++i) {
    if (f[i] < f[best_idx]) best_idx = i;
  }
  return SimplexResult{simplex[best_idx], f[best_idx], evals, converged};
}

SimplexResult multistart_minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                                  const std::vector<Eigen::VectorXd>& starts,
                                  double initial_step, int max_evaluations,
                                  double f_tolerance) {
  if (starts.empty()) throw std::invalid_argument("multistart_minimize: no starts");
  std::vector<SimplexResult> results(starts.size());
#pragma omp parallel for schedule(dynamic) if (starts.size() > 1)
  for (int i = 0; i < static_cast<int>(starts.size()); ++i) {
    results[static_cast<size_t>(i)] =
        nelder_mead(objective, starts[static_cast<size_t>(i)], initial_step,
                    max_evaluations, f_tolerance);
  }
  // Fixed-order reduction: scan in start order so ties resolve identically
  // no matter how the loop above was scheduled.
  size_t best = 0;
  for (size_t i = 1; i < results.size(); ++i) {
    if (results[i].value < results[best].value) best = i;
  }
  return results[best];
}

}  // namespace kselect::optim
