#include "kselect/bo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "kselect/nelder_mead.hpp"

namespace kselect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

int rounded_index(double coord, int candidate_count) {
  const int idx = static_cast<int>(std::lround(coord));
  return std::min(candidate_count, std::max(1, idx));
}

}  // namespace

std::string_view to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::ExpectedImprovement: return "ei";
    case AcquisitionKind::ExpectedImprovementPlus: return "ei_plus";
    case AcquisitionKind::UpperConfidenceBound: return "ucb";
  }
  throw std::invalid_argument("unknown acquisition enum value");
}

AcquisitionKind acquisition_from_string(std::string_view name) {
  if (name == "ei") return AcquisitionKind::ExpectedImprovement;
  if (name == "ei_plus") return AcquisitionKind::ExpectedImprovementPlus;
  if (name == "ucb") return AcquisitionKind::UpperConfidenceBound;
  throw std::invalid_argument("unknown acquisition: " + std::string(name));
}

int SearchSpace::max_kernel_arity() const {
  int arity = 0;
  for (const auto& cand : candidates) arity = std::max(arity, cand.domain.dim());
  return arity;
}

int SearchSpace::encoded_dim() const { return 1 + max_kernel_arity() + extra.dim(); }

int SearchSpace::point_dim(int kernel_index) const {
  if (kernel_index < 1 || kernel_index > candidate_count()) {
    throw std::invalid_argument("SearchSpace: kernel index out of range");
  }
  return candidates[static_cast<size_t>(kernel_index - 1)].domain.dim() + extra.dim();
}

void SearchSpace::validate() const {
  if (candidates.empty()) throw std::invalid_argument("SearchSpace: no candidates");
  for (const auto& cand : candidates) cand.domain.validate();
  extra.validate();
}

Eigen::VectorXd encode(const SearchSpace& space, int kernel_index,
                       const Eigen::VectorXd& phi) {
  space.validate();
  if (kernel_index < 1 || kernel_index > space.candidate_count()) {
    throw std::invalid_argument("encode: kernel index out of range");
  }
  const auto& cand = space.candidates[static_cast<size_t>(kernel_index - 1)];
  const int arity = cand.domain.dim();
  const int extras = space.extra.dim();
  if (phi.size() != arity + extras) {
    throw std::invalid_argument("encode: phi has wrong length for this candidate");
  }
  Eigen::VectorXd z = Eigen::VectorXd::Constant(space.encoded_dim(), 0.5);
  z(0) = kernel_index;
  if (arity > 0) z.segment(1, arity) = cand.domain.to_unit(phi.head(arity));
  if (extras > 0) z.tail(extras) = space.extra.to_unit(phi.tail(extras));
  return z;
}

BoPoint decode(const SearchSpace& space, const Eigen::VectorXd& encoded) {
  space.validate();
  if (encoded.size() != space.encoded_dim()) {
    throw std::invalid_argument("decode: encoded coordinate has wrong length");
  }
  BoPoint p;
  p.kernel_index = rounded_index(encoded(0), space.candidate_count());
  const auto& cand = space.candidates[static_cast<size_t>(p.kernel_index - 1)];
  const int arity = cand.domain.dim();
  const int extras = space.extra.dim();
  p.phi.resize(arity + extras);
  if (arity > 0) {
    p.phi.head(arity) =
        cand.domain.from_unit(encoded.segment(1, arity).cwiseMax(0.0).cwiseMin(1.0));
  }
  if (extras > 0) {
    p.phi.tail(extras) =
        space.extra.from_unit(encoded.tail(extras).cwiseMax(0.0).cwiseMin(1.0));
  }
  return p;
}

BoSurrogate BoSurrogate::fit(const SearchSpace& space,
                             const std::vector<Observation>& history,
                             std::uint64_t seed, int restarts) {
  space.validate();
  if (history.empty()) throw std::invalid_argument("BoSurrogate: empty history");

  BoSurrogate s;
  s.candidate_count_ = space.candidate_count();

  const int n = static_cast<int>(history.size());
  const int d = space.encoded_dim();
  Dataset train;
  train.inputs.resize(n, d);
  train.targets.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& obs = history[static_cast<size_t>(i)];
    train.inputs.row(i) = encode(space, obs.kernel_index, obs.phi);
    train.targets(i) = obs.cost;
  }

  // Warp before standardizing: asinh is monotone and near-identity around
  // zero but logarithmic in the tails, so penalty-valued observations stay
  // ordered above everything else without dwarfing the healthy region.
  train.targets = train.targets.array().unaryExpr([](double c) { return std::asinh(c); });
  s.shift_ = train.targets.mean();
  const double variance =
      (train.targets.array() - s.shift_).square().sum() / std::max(1, n);
  s.scale_ = variance > 1e-18 ? std::sqrt(variance) : 1.0;
  train.targets = (train.targets.array() - s.shift_) / s.scale_;

  // Lengthscales are bounded by twice each axis's span (continuous axes are
  // unit-normalized, the index axis runs over the candidate count). Anything
  // longer is indistinguishable from a constant and lets the likelihood
  // declare an axis irrelevant from a handful of clustered samples, after
  // which the posterior stops exploring it. Costs are deterministic given
  // the seed, so the noise band stays narrow; it absorbs model mismatch
  // without offering an explain-everything-as-noise mode.
  Eigen::VectorXd lo(1 + d), hi(1 + d);
  lo(0) = 0.05;
  hi(0) = 20.0;
  const double index_span = std::max(1, space.candidate_count() - 1);
  for (int a = 1; a <= d; ++a) {
    lo(a) = 0.05;
    hi(a) = 2.0 * (a == 1 ? index_span : 1.0);
  }
  const auto domain = HyperparameterDomain::box(lo, hi, true);
  Eigen::VectorXd nlo(1), nhi(1);
  nlo << 1e-4;
  nhi << 3e-2;
  const auto noise_domain = HyperparameterDomain::box(nlo, nhi, true);

  const auto fit = optimize_hyperparameters(train, KernelFamily::SquaredExponentialArd,
                                            domain, noise_domain, restarts, seed);
  s.gp_ = GpModel::fit(std::move(train), fit.spec, fit.noise_sigma);
  return s;
}

Prediction BoSurrogate::predict_encoded(const Eigen::VectorXd& encoded) const {
  if (!gp_) throw std::logic_error("BoSurrogate: not fitted");
  Eigen::VectorXd z = encoded;
  z(0) = rounded_index(z(0), candidate_count_);
  return gp_->predict(z);
}

void BoState::append(Observation observation) {
  history.push_back(std::move(observation));
  const double cost = history.back().cost;
  if (incumbent_index < 0 || cost < history[static_cast<size_t>(incumbent_index)].cost) {
    incumbent_index = static_cast<int>(history.size()) - 1;
  }
  incumbent_trace.push_back(history[static_cast<size_t>(incumbent_index)].cost);
}

const Observation& BoState::incumbent() const {
  if (incumbent_index < 0) throw std::logic_error("BoState: no observations yet");
  return history[static_cast<size_t>(incumbent_index)];
}

double expected_improvement(double mean, double stddev, double best) {
  if (!(stddev > 1e-14)) return 0.0;
  const double t = (best - mean) / stddev;
  return (best - mean) * normal_cdf(t) + stddev * normal_pdf(t);
}

double acquisition_ei(const BoSurrogate& surrogate, double best_cost,
                      const Eigen::VectorXd& encoded) {
  const Prediction p = surrogate.predict_encoded(encoded);
  return expected_improvement(p.mean, std::sqrt(std::max(0.0, p.variance)),
                              surrogate.standardize(best_cost));
}

double acquisition_ei_plus(const BoState& state, const Eigen::VectorXd& encoded) {
  if (!state.surrogate) throw std::logic_error("acquisition_ei_plus: surrogate not fitted");
  // Pointwise this is plain EI against the incumbent; the over-exploitation
  // escape lives in propose_next, which inspects the winning point.
  return acquisition_ei(*state.surrogate, state.incumbent().cost, encoded);
}

double acquisition_ucb(const BoSurrogate& surrogate, const Eigen::VectorXd& encoded,
                       double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("acquisition_ucb: beta must be >= 0");
  const Prediction p = surrogate.predict_encoded(encoded);
  return p.mean - std::sqrt(beta) * std::sqrt(std::max(0.0, p.variance));
}

namespace {

struct CandidateProposal {
  double score = -kInf;
  Eigen::VectorXd phi;  // box coordinates (candidate dims + extras)
};

// Assembles box coordinates for candidate `j` from a unit-cube point.
Eigen::VectorXd phi_from_unit(const SearchSpace& space, int j, const Eigen::VectorXd& u) {
  const auto& cand = space.candidates[static_cast<size_t>(j - 1)];
  const int arity = cand.domain.dim();
  const int extras = space.extra.dim();
  Eigen::VectorXd phi(arity + extras);
  if (arity > 0) phi.head(arity) = cand.domain.from_unit(u.head(arity));
  if (extras > 0) phi.tail(extras) = space.extra.from_unit(u.tail(extras));
  return phi;
}

Eigen::VectorXd unit_from_phi(const SearchSpace& space, int j, const Eigen::VectorXd& phi) {
  const auto& cand = space.candidates[static_cast<size_t>(j - 1)];
  const int arity = cand.domain.dim();
  const int extras = space.extra.dim();
  Eigen::VectorXd u(arity + extras);
  if (arity > 0) u.head(arity) = cand.domain.to_unit(phi.head(arity));
  if (extras > 0) u.tail(extras) = space.extra.to_unit(phi.tail(extras));
  return u;
}

// Best point per candidate under `score` (higher is better), then the best
// across candidates; ties break toward the lower index.
BoPoint maximize_acquisition(const SearchSpace& space,
                             const std::function<double(const Eigen::VectorXd&)>& score,
                             const BoState& state, std::uint64_t seed,
                             const BoOptions& options) {
  std::vector<CandidateProposal> winners(static_cast<size_t>(space.candidate_count()));

  for (int j = 1; j <= space.candidate_count(); ++j) {
    auto& winner = winners[static_cast<size_t>(j - 1)];
    const int d = space.point_dim(j);
    if (d == 0) {
      winner.phi = Eigen::VectorXd(0);
      const double v = score(encode(space, j, winner.phi));
      winner.score = std::isnan(v) ? -kInf : v;
      continue;
    }

    auto objective = [&](const Eigen::VectorXd& u) {
      const Eigen::VectorXd uc = u.cwiseMax(0.0).cwiseMin(1.0);
      const double v = score(encode(space, j, phi_from_unit(space, j, uc)));
      const double walled = (std::isnan(v) ? kInf : -v) + 1e3 * (u - uc).squaredNorm();
      return walled;
    };

    auto starts = optim::scrambled_starts(options.acquisition_restarts, d,
                                          optim::derive_seed(seed, 0xacf, static_cast<std::uint64_t>(j)));
    if (state.incumbent_index >= 0 && state.incumbent().kernel_index == j) {
      starts.push_back(unit_from_phi(space, j, state.incumbent().phi));
    }
    const auto best = optim::multistart_minimize(objective, starts, 0.2, 80 * d + 60);
    if (std::isfinite(best.value)) {
      const Eigen::VectorXd uc = best.x.cwiseMax(0.0).cwiseMin(1.0);
      winner.phi = phi_from_unit(space, j, uc);
      winner.score = score(encode(space, j, winner.phi));
      if (std::isnan(winner.score)) winner.score = -kInf;
    }
  }

  int best_j = -1;
  for (int j = 1; j <= space.candidate_count(); ++j) {
    const auto& w = winners[static_cast<size_t>(j - 1)];
    if (w.score > -kInf && (best_j < 0 || w.score > winners[static_cast<size_t>(best_j - 1)].score)) {
      best_j = j;
    }
  }
  if (best_j < 0) {
    // Every search failed (degenerate surrogate); fall back to a seeded
    // random in-box point so the loop keeps moving.
    std::mt19937_64 rng(optim::derive_seed(seed, 0xfa11));
    std::uniform_int_distribution<int> cand(1, space.candidate_count());
    const int j = cand(rng);
    const int d = space.point_dim(j);
    Eigen::VectorXd u(d);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int a = 0; a < d; ++a) u(a) = unif(rng);
    return BoPoint{j, phi_from_unit(space, j, u)};
  }
  return BoPoint{best_j, winners[static_cast<size_t>(best_j - 1)].phi};
}

}  // namespace

BoPoint propose_next(const BoState& state, const SearchSpace& space,
                     AcquisitionKind kind, std::uint64_t seed,
                     const BoOptions& options) {
  space.validate();
  if (state.history.empty()) {
    // Nothing to model yet; hand back the centre of the first candidate.
    Eigen::VectorXd u = Eigen::VectorXd::Constant(space.point_dim(1), 0.5);
    return BoPoint{1, phi_from_unit(space, 1, u)};
  }

  BoSurrogate local;
  const BoSurrogate* surrogate = state.surrogate ? &*state.surrogate : nullptr;
  if (surrogate == nullptr) {
    local = BoSurrogate::fit(space, state.history, optim::derive_seed(seed, 0x5f17),
                             options.surrogate_restarts);
    surrogate = &local;
  }

  const double best_std = surrogate->standardize(state.incumbent().cost);
  const auto trials = static_cast<double>(state.history.size());
  const double beta = 2.0 * std::log(trials * trials + 1.0);

  auto score = [&](const Eigen::VectorXd& z) -> double {
    switch (kind) {
      case AcquisitionKind::ExpectedImprovement:
      case AcquisitionKind::ExpectedImprovementPlus: {
        const Prediction p = surrogate->predict_encoded(z);
        return expected_improvement(p.mean, std::sqrt(std::max(0.0, p.variance)), best_std);
      }
      case AcquisitionKind::UpperConfidenceBound:
        return -acquisition_ucb(*surrogate, z, beta);
    }
    throw std::invalid_argument("unknown acquisition enum value");
  };

  BoPoint proposal = maximize_acquisition(space, score, state, seed, options);

  if (kind == AcquisitionKind::ExpectedImprovementPlus && options.ei_plus_lambda > 0.0) {
    const Prediction at = surrogate->predict_encoded(
        encode(space, proposal.kernel_index, proposal.phi));
    const double sigma = std::sqrt(std::max(0.0, at.variance));
    if (sigma < options.ei_plus_lambda * surrogate->noise_sigma()) {
      // The EI winner is already pinned down by data: over-exploitation.
      // Take one deliberately wide confidence-bound step instead.
      auto wide = [&](const Eigen::VectorXd& z) {
        return -acquisition_ucb(*surrogate, z, options.escape_beta);
      };
      proposal = maximize_acquisition(space, wide, state,
                                      optim::derive_seed(seed, 0xe5c), options);
    }
  }
  return proposal;
}

BoState run_bo(const std::function<double(int, const Eigen::VectorXd&)>& objective,
               const SearchSpace& space, int budget, const BoOptions& options) {
  space.validate();
  if (budget < 1) throw std::invalid_argument("run_bo: budget must be >= 1");
  if (!objective) throw std::invalid_argument("run_bo: missing objective");

  BoState state;
  state.rng_seed = options.seed;

  auto evaluate = [&](const BoPoint& p) {
    double cost;
    try {
      cost = objective(p.kernel_index, p.phi);
    } catch (const std::exception& e) {
      std::ostringstream what;
      what << "run_bo: objective failed at kernel " << p.kernel_index << ", phi [";
      for (int a = 0; a < p.phi.size(); ++a) what << (a ? ", " : "") << p.phi(a);
      what << "]: " << e.what();
      throw std::runtime_error(what.str());
    }
    if (!std::isfinite(cost)) cost = options.penalty_cost;
    Observation obs{p.kernel_index, p.phi, cost, static_cast<int>(state.history.size())};
    state.append(std::move(obs));
  };

  // Initial design: caller-pinned points first, then a few seeded
  // quasi-random points inside each candidate's box.
  std::vector<BoPoint> design = options.initial_points;
  for (int j = 1; j <= space.candidate_count(); ++j) {
    const int d = space.point_dim(j);
    if (d == 0) {
      design.push_back(BoPoint{j, Eigen::VectorXd(0)});
      continue;
    }
    const auto units = optim::scrambled_starts(
        options.init_per_candidate, d,
        optim::derive_seed(options.seed, 0xd51, static_cast<std::uint64_t>(j)));
    for (const auto& u : units) design.push_back(BoPoint{j, phi_from_unit(space, j, u)});
  }
  if (static_cast<int>(design.size()) > budget) design.resize(static_cast<size_t>(budget));

  for (const auto& p : design) evaluate(p);

  while (static_cast<int>(state.history.size()) < budget) {
    const auto step = static_cast<std::uint64_t>(state.history.size());
    state.surrogate = BoSurrogate::fit(space, state.history,
                                       optim::derive_seed(options.seed, 0xf17, step),
                                       options.surrogate_restarts);
    const BoPoint next = propose_next(state, space, options.acquisition,
                                      optim::derive_seed(options.seed, 0x9e0, step), options);
    evaluate(next);
  }

  if (!state.surrogate) {
    state.surrogate = BoSurrogate::fit(space, state.history,
                                       optim::derive_seed(options.seed, 0xf17, 0),
                                       options.surrogate_restarts);
  }
  return state;
}

}  // namespace kselect
