#include "kselect/svr.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace kselect {

namespace {

// Short-step primal-dual interior point on the boxed dual
//   min 1/2 theta' q theta + p' theta  s.t.  a' theta = 0,  0 <= theta <= c.
// The log barrier makes every Newton system uniformly well conditioned, so
// unlike coordinate descent the iteration count does not depend on the
// spectrum of q. Only the returned point's active-set pattern is consumed;
// the face solve below supplies the exact coordinates.
Eigen::VectorXd dual_interior_point(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                                    const Eigen::VectorXd& a, double c) {
  const int n = static_cast<int>(p.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(n, 0.5 * c);
  double nu = 0.0;
  const double z0 = std::max(1.0, p.lpNorm<Eigen::Infinity>());
  Eigen::VectorXd zl = Eigen::VectorXd::Constant(n, z0);
  Eigen::VectorXd zu = Eigen::VectorXd::Constant(n, z0);
  const auto duality_mu = [&]() {
    return (theta.dot(zl) + (c - theta.array()).matrix().dot(zu)) / (2.0 * n);
  };
  const double mu0 = duality_mu();
  double mu = mu0;
  const double sigma = 0.2;
  for (int iter = 0; iter < 200 && mu > 1e-14 * mu0; ++iter) {
    const Eigen::VectorXd rd = q * theta + p + nu * a - zl + zu;
    const double rp = a.dot(theta);
    Eigen::MatrixXd h = q;
    h.diagonal() += (zl.array() / theta.array() + zu.array() / (c - theta.array())).matrix();
    h.diagonal().array() += 1e-12 * h.diagonal().maxCoeff();
    const Eigen::VectorXd rhs =
        -rd + (sigma * mu / theta.array() - zl.array()).matrix() -
        (sigma * mu / (c - theta.array()) - zu.array()).matrix();
    const Eigen::LLT<Eigen::MatrixXd> llt(h);
    const Eigen::VectorXd hia = llt.solve(a);
    const Eigen::VectorXd hir = llt.solve(rhs);
    const double dnu = (a.dot(hir) + rp) / a.dot(hia);
    const Eigen::VectorXd dtheta = hir - dnu * hia;
    const Eigen::VectorXd dzl =
        ((sigma * mu - theta.array() * zl.array() - zl.array() * dtheta.array()) /
         theta.array()).matrix();
    const Eigen::VectorXd dzu =
        ((sigma * mu - (c - theta.array()) * zu.array() + zu.array() * dtheta.array()) /
         (c - theta.array())).matrix();
    double ap = 1.0;
    double ad = 1.0;
    for (int t = 0; t < n; ++t) {
      if (dtheta(t) < 0.0) ap = std::min(ap, -theta(t) / dtheta(t));
      if (dtheta(t) > 0.0) ap = std::min(ap, (c - theta(t)) / dtheta(t));
      if (dzl(t) < 0.0) ad = std::min(ad, -zl(t) / dzl(t));
      if (dzu(t) < 0.0) ad = std::min(ad, -zu(t) / dzu(t));
    }
    ap = std::min(1.0, 0.995 * ap);
    ad = std::min(1.0, 0.995 * ad);
    theta += ap * dtheta;
    zl += ad * dzl;
    zu += ad * dzu;
    nu += ad * dnu;
    mu = duality_mu();
  }
  return theta;
}

// Pins each variable to the face suggested by the interior-point solution,
// solves the equality-constrained problem on that face exactly, and then
// repairs the guess: box violators get pinned, gradient violators released.
// Returns a point whose maximal-violating-pair gap is at most tol, or nothing
// when the repair loop fails to settle.
std::optional<Eigen::VectorXd> refine_on_face(const Eigen::MatrixXd& q,
                                              const Eigen::VectorXd& p,
                                              const Eigen::VectorXd& a, double c,
                                              double tol) {
  const int n = static_cast<int>(p.size());
  const Eigen::VectorXd ip = dual_interior_point(q, p, a, c);
  enum State { kAtZero, kAtBox, kFree };
  std::vector<State> state(n);
  const double edge = 1e-8 * c;
  for (int t = 0; t < n; ++t) {
    state[t] = ip(t) < edge ? kAtZero : (ip(t) > c - edge ? kAtBox : kFree);
  }

  Eigen::VectorXd theta(n);
  for (int round = 0; round < 4 * n + 50; ++round) {
    std::vector<int> free_idx;
    for (int t = 0; t < n; ++t) {
      if (state[t] == kFree) free_idx.push_back(t);
    }
    const int f = static_cast<int>(free_idx.size());

    for (int t = 0; t < n; ++t) theta(t) = state[t] == kAtBox ? c : 0.0;
    double nu_hat = 0.0;
    Eigen::VectorXd sol_free(f);
    if (f > 0) {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
      Eigen::VectorXd rhs(f + 1);
      const Eigen::VectorXd q_fixed = q * theta;
      for (int r = 0; r < f; ++r) {
        for (int s = 0; s < f; ++s) kkt(r, s) = q(free_idx[r], free_idx[s]);
        kkt(r, f) = a(free_idx[r]);
        kkt(f, r) = a(free_idx[r]);
        rhs(r) = -p(free_idx[r]) - q_fixed(free_idx[r]);
      }
      rhs(f) = -a.dot(theta);
      const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
      const Eigen::VectorXd sol = cod.solve(rhs);
      sol_free = sol.head(f);
      nu_hat = sol(f);

      int worst = -1;
      double worst_by = 1e-9 * c;
      for (int r = 0; r < f; ++r) {
        const double outside = std::max(-sol_free(r), sol_free(r) - c);
        if (outside > worst_by) {
          worst_by = outside;
          worst = r;
        }
      }
      if (worst >= 0) {
        state[free_idx[worst]] = sol_free(worst) < 0.5 * c ? kAtZero : kAtBox;
        continue;
      }
      for (int r = 0; r < f; ++r) {
        theta(free_idx[r]) = std::min(c, std::max(0.0, sol_free(r)));
      }
    }

    const Eigen::VectorXd grad = q * theta + p;
    const int m = n / 2;
    const double inf = std::numeric_limits<double>::infinity();
    double up = -inf;
    double low = inf;
    int t_up = -1;
    int t_low = -1;
    for (int t = 0; t < n; ++t) {
      const double v = -a(t) * grad(t);
      const bool can_increase = t < m ? theta(t) < c : theta(t) > 0.0;
      const bool can_decrease = t < m ? theta(t) > 0.0 : theta(t) < c;
      if (can_increase && v > up) {
        up = v;
        t_up = t;
      }
      if (can_decrease && v < low) {
        low = v;
        t_low = t;
      }
    }
    if (t_up < 0 || up - low <= tol) return theta;
    if (f == 0) nu_hat = 0.5 * (up + low);

    const int to_release = up - nu_hat >= nu_hat - low ? t_up : t_low;
    if (state[to_release] == kFree) return std::nullopt;
    state[to_release] = kFree;
  }
  return std::nullopt;
}

}  // namespace

// The dual is solved in 2m variables theta = [alpha; alpha^*] with labels
// y = [+1...; -1...]: minimize 1/2 theta' Q theta + p' theta subject to
// y' theta = 0 and 0 <= theta <= C, where Q_st = y_s y_t K(s mod m, t mod m)
// and p = [eps - b; eps + b]. Each step picks the maximal violating pair
// (i from I_up, j from I_low) and moves along y_i e_i - y_j e_j, which keeps
// y' theta = 0 exactly. The gradient is maintained incrementally from two
// rows of K, so a pass costs O(m).
SvrModel train_svr(const Dataset& data, const KernelSpec& spec, double epsilon,
                   double box_c, const SvrOptions& options) {
  data.validate();
  spec.validate();
  if (data.size() < 2) throw std::invalid_argument("svr: need at least two samples");
  if (data.input_dim() != spec.input_dim) {
    throw std::invalid_argument("svr: data dimension does not match kernel");
  }
  if (!std::isfinite(epsilon) || epsilon < 0.0) {
    throw std::invalid_argument("svr: epsilon must be finite and >= 0");
  }
  if (!std::isfinite(box_c) || !(box_c > 0.0)) {
    throw std::invalid_argument("svr: box constraint must be positive");
  }
  if (!(options.tol > 0.0) || options.max_passes < 1) {
    throw std::invalid_argument("svr: tol must be positive and max_passes >= 1");
  }

  const int m = data.size();
  // Precondition by the kernel's own scale: solving with K/kappa and box
  // C*kappa is the same problem (duals map as beta = beta_tilde / kappa,
  // gradients and the stopping gap are untouched). The trajectory is
  // isomorphic too, so this is not a speedup; its job is to make curvatures
  // O(1) so the curvature floor and the gain comparisons below mean the same
  // thing for every kernel, whether its diagonal sits at 1e-6 or 1e6.
  const Eigen::MatrixXd k_raw = gram_matrix(spec, data.inputs);
  double kappa = k_raw.diagonal().maxCoeff();
  if (!(kappa > 0.0)) kappa = 1.0;
  const Eigen::MatrixXd k = k_raw / kappa;
  const double c = box_c * kappa;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2 * m);
  Eigen::VectorXd grad(2 * m);
  grad.head(m) = Eigen::VectorXd::Constant(m, epsilon) - data.targets;
  grad.tail(m) = Eigen::VectorXd::Constant(m, epsilon) + data.targets;

  const auto label = [m](int t) { return t < m ? 1.0 : -1.0; };
  const auto sample = [m](int t) { return t < m ? t : t - m; };

  const double inf = std::numeric_limits<double>::infinity();
  long pass = 0;
  bool converged = false;
  double gap_up = 0.0;
  double gap_low = 0.0;

  for (; pass < options.max_passes; ++pass) {
    int i = -1;
    double up = -inf;
    double low = inf;
    for (int t = 0; t < 2 * m; ++t) {
      const double v = -label(t) * grad(t);
      const bool can_increase = t < m ? theta(t) < c : theta(t) > 0.0;
      const bool can_decrease = t < m ? theta(t) > 0.0 : theta(t) < c;
      if (can_increase && v > up) {
        up = v;
        i = t;
      }
      if (can_decrease && v < low) low = v;
    }
    gap_up = up;
    gap_low = low;
    if (i < 0 || up - low <= options.tol) {
      converged = true;
      break;
    }

    // Partner choice by the decrease the pair can actually deliver once the
    // step is clipped to the box. Ranking by the unclipped violation^2 over
    // curvature keeps electing pairs that are pinned against a bound and can
    // barely move, and the solver churns on them forever while the true
    // violator waits its turn.
    const int si = sample(i);
    const double room_i = i < m ? c - theta(i) : theta(i);
    int j = -1;
    double best_gain = -inf;
    double best_step = 0.0;
    for (int t = 0; t < 2 * m; ++t) {
      const bool can_decrease = t < m ? theta(t) > 0.0 : theta(t) < c;
      if (!can_decrease) continue;
      const double v = -label(t) * grad(t);
      if (v >= up) continue;
      const int st = sample(t);
      double curvature = k(si, si) + k(st, st) - 2.0 * k(si, st);
      if (curvature < 1e-12) curvature = 1e-12;
      const double room_t = t < m ? theta(t) : c - theta(t);
      const double diff = up - v;
      const double delta = std::min(diff / curvature, std::min(room_i, room_t));
      const double gain = delta * (diff - 0.5 * delta * curvature);
      if (gain > best_gain) {
        best_gain = gain;
        best_step = delta;
        j = t;
      }
    }
    if (j < 0) {
      converged = true;
      break;
    }

    const int sj = sample(j);
    const double step = best_step;
    const double room_j = j < m ? theta(j) : c - theta(j);

    // Land exactly on a box face when the step was clipped by it, so a
    // variable never sits a rounding error away from its bound where it
    // would still look movable to the next pass.
    if (step == room_i) {
      theta(i) = i < m ? c : 0.0;
    } else {
      theta(i) += label(i) * step;
    }
    if (step == room_j) {
      theta(j) = j < m ? 0.0 : c;
    } else {
      theta(j) -= label(j) * step;
    }

    for (int s = 0; s < m; ++s) {
      const double delta = step * (k(s, si) - k(s, sj));
      grad(s) += delta;
      grad(m + s) -= delta;
    }

    // Keep alpha_s * alpha*_s = 0: shrinking both by their minimum leaves
    // beta and the gradient untouched and only sheds epsilon-cost, and it
    // removes the zero-curvature same-sample pairs from the violating set.
    for (const int s : {si, sj}) {
      const double shrink = std::min(theta(s), theta(m + s));
      if (shrink > 0.0) {
        theta(s) -= shrink;
        theta(m + s) -= shrink;
      }
    }
  }
  if (!converged && options.exact_refinement) {
    Eigen::MatrixXd q(2 * m, 2 * m);
    q << k, -k, -k, k;
    Eigen::VectorXd avec(2 * m);
    avec.head(m).setOnes();
    avec.tail(m) = Eigen::VectorXd::Constant(m, -1.0);
    Eigen::VectorXd p(2 * m);
    p.head(m) = Eigen::VectorXd::Constant(m, epsilon) - data.targets;
    p.tail(m) = Eigen::VectorXd::Constant(m, epsilon) + data.targets;
    const auto refined = refine_on_face(q, p, avec, c, options.tol);
    if (refined) {
      theta = *refined;
      grad = q * theta + p;
      double up = -inf;
      double low = inf;
      for (int t = 0; t < 2 * m; ++t) {
        const double v = -label(t) * grad(t);
        const bool can_increase = t < m ? theta(t) < c : theta(t) > 0.0;
        const bool can_decrease = t < m ? theta(t) > 0.0 : theta(t) < c;
        if (can_increase && v > up) up = v;
        if (can_decrease && v < low) low = v;
      }
      gap_up = up;
      gap_low = low;
      converged = true;
    }
  }
  if (!converged) {
    throw std::runtime_error("svr: SMO hit the pass cap before reaching the KKT tolerance");
  }

  // Bias from the average of -y_t grad_t over strictly interior variables;
  // midpoint of the final violating-pair bracket when none is interior.
  const double margin = 1e-8 * c;
  double bias_sum = 0.0;
  int interior = 0;
  for (int t = 0; t < 2 * m; ++t) {
    if (theta(t) > margin && theta(t) < c - margin) {
      bias_sum += -label(t) * grad(t);
      ++interior;
    }
  }
  double bias;
  if (interior > 0) {
    bias = bias_sum / interior;
  } else if (std::isfinite(gap_up) && std::isfinite(gap_low)) {
    bias = 0.5 * (gap_up + gap_low);
  } else {
    bias = 0.0;
  }

  const Eigen::VectorXd beta = theta.head(m) - theta.tail(m);
  const double objective = 0.5 * beta.dot(k * beta) - data.targets.dot(beta) +
                           epsilon * theta.sum();

  const double prune_tol = 1e-12 * std::max(1.0, c);
  std::vector<int> kept;
  kept.reserve(static_cast<size_t>(m));
  for (int s = 0; s < m; ++s) {
    if (std::abs(beta(s)) > prune_tol) kept.push_back(s);
  }

  // Map back to the caller's units: duals and objective picked up a factor of
  // kappa from the preconditioning, the bias did not (it comes from the
  // unchanged gradient).
  SvrModel model;
  model.spec = spec;
  model.epsilon = epsilon;
  model.box_c = box_c;
  model.bias = bias;
  model.iterations = pass;
  model.dual_objective = objective / kappa;
  model.centers.resize(static_cast<int>(kept.size()), data.input_dim());
  model.duals.resize(static_cast<int>(kept.size()));
  for (size_t r = 0; r < kept.size(); ++r) {
    model.centers.row(static_cast<int>(r)) = data.inputs.row(kept[r]);
    model.duals(static_cast<int>(r)) = beta(kept[r]) / kappa;
  }
  return model;
}

double predict_svr(const SvrModel& model, const Eigen::VectorXd& point) {
  if (point.size() != model.spec.input_dim) {
    throw std::invalid_argument("svr predict: point dimension mismatch");
  }
  double acc = model.bias;
  for (int i = 0; i < model.duals.size(); ++i) {
    acc += model.duals(i) * eval_kernel(model.spec, model.centers.row(i), point);
  }
  return acc;
}

Eigen::VectorXd predict_svr_batch(const SvrModel& model, const Eigen::MatrixXd& points) {
  if (points.cols() != model.spec.input_dim) {
    throw std::invalid_argument("svr predict_batch: point dimension mismatch");
  }
  const int n = static_cast<int>(points.rows());
  Eigen::VectorXd out(n);
#pragma omp parallel for schedule(static) if (n > 32)
  for (int i = 0; i < n; ++i) {
    double acc = model.bias;
    for (int j = 0; j < model.duals.size(); ++j) {
      acc += model.duals(j) * eval_kernel(model.spec, model.centers.row(j), points.row(i));
    }
    out(i) = acc;
  }
  return out;
}

int count_support_vectors(const SvrModel& model) {
  return static_cast<int>(model.duals.size());
}

double default_box_constraint(const Eigen::VectorXd& targets) {
  const int m = static_cast<int>(targets.size());
  if (m < 2) return 1.0;
  std::vector<double> sorted(targets.data(), targets.data() + m);
  std::sort(sorted.begin(), sorted.end());
  const auto quartile = [&](double p) {
    const double pos = p * m + 0.5;
    if (pos <= 1.0) return sorted.front();
    if (pos >= m) return sorted.back();
    const int i = static_cast<int>(std::floor(pos));
    const double frac = pos - i;
    return sorted[i - 1] + frac * (sorted[i] - sorted[i - 1]);
  };
  const double iqr = quartile(0.75) - quartile(0.25);
  if (!(iqr > 0.0)) return 1.0;
  return iqr / 1.349;
}

HyperparameterDomain default_epsilon_domain() {
  Eigen::VectorXd lo(1), hi(1);
  lo << 1e-3;
  hi << 1e1;
  return HyperparameterDomain::box(lo, hi, true);
}

}  // namespace kselect
