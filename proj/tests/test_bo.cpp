#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

#include "kselect/bo.hpp"

using namespace kselect;

namespace {

// Three mixed-arity candidates plus one shared log axis, the same shape the
// selection pipeline feeds in.
SearchSpace mixed_space() {
  SearchSpace space;
  Eigen::VectorXd lo1(1), hi1(1);
  lo1 << 1e-2;
  hi1 << 1e2;
  Eigen::VectorXd lo2(2), hi2(2);
  lo2 << 0.1, 0.5;
  hi2 << 10.0, 50.0;
  space.candidates.push_back({KernelFamily::Linear, HyperparameterDomain::empty()});
  space.candidates.push_back({KernelFamily::Gaussian, HyperparameterDomain::box(lo1, hi1, true)});
  space.candidates.push_back(
      {KernelFamily::SquaredExponentialArd, HyperparameterDomain::box(lo2, hi2, true)});
  Eigen::VectorXd elo(1), ehi(1);
  elo << 1e-3;
  ehi << 10.0;
  space.extra = HyperparameterDomain::box(elo, ehi, true);
  return space;
}

// Single candidate over the unit interval, no extras: the cleanest space for
// driving the full loop against known scalar objectives.
SearchSpace interval_space() {
  SearchSpace space;
  Eigen::VectorXd lo(1), hi(1);
  lo << 0.0;
  hi << 1.0;
  space.candidates.push_back({KernelFamily::Gaussian, HyperparameterDomain::box(lo, hi, false)});
  return space;
}

bool in_space(const SearchSpace& space, const BoPoint& p, double tol = 1e-9) {
  if (p.kernel_index < 1 || p.kernel_index > space.candidate_count()) return false;
  const auto& domain = space.candidates[static_cast<size_t>(p.kernel_index - 1)].domain;
  const int arity = domain.dim();
  if (p.phi.size() != arity + space.extra.dim()) return false;
  if (arity > 0 && !domain.contains(p.phi.head(arity), tol)) return false;
  if (space.extra.dim() > 0 && !space.extra.contains(p.phi.tail(space.extra.dim()), tol))
    return false;
  return true;
}

// EI is the mean of max(best - y, 0) under N(mean, stddev^2). The integrand
// vanishes above `best` and is smooth below it, so Simpson's rule over
// [mean - 13 stddev, best] converges fast and is independent of the closed form.
double ei_by_quadrature(double mean, double stddev, double best) {
  const int n = 4000;
  const double lo = mean - 13.0 * stddev;
  const double hi = std::min(best, mean + 13.0 * stddev);
  if (!(hi > lo)) return 0.0;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double y = lo + h * i;
    const double density =
        std::exp(-0.5 * (y - mean) * (y - mean) / (stddev * stddev)) /
        (stddev * std::sqrt(2.0 * std::acos(-1.0)));
    const double weight = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += weight * (best - y) * density;
  }
  return acc * h / 3.0;
}

BoState observed_state(const SearchSpace& space, std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cand(1, space.candidate_count());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.3);
  BoState state;
  for (int i = 0; i < count; ++i) {
    const int j = cand(rng);
    const int d = space.point_dim(j);
    Eigen::VectorXd unit(d);
    for (int a = 0; a < d; ++a) unit(a) = unif(rng);
    const auto& domain = space.candidates[static_cast<size_t>(j - 1)].domain;
    Eigen::VectorXd phi(d);
    if (domain.dim() > 0) phi.head(domain.dim()) = domain.from_unit(unit.head(domain.dim()));
    if (space.extra.dim() > 0)
      phi.tail(space.extra.dim()) = space.extra.from_unit(unit.tail(space.extra.dim()));
    state.append(Observation{j, phi, double(j) + noise(rng), i});
  }
  state.surrogate = BoSurrogate::fit(space, state.history, seed, 2);
  return state;
}

}  // namespace

TEST_CASE("acquisition names round-trip") {
  for (const auto kind :
       {AcquisitionKind::ExpectedImprovement, AcquisitionKind::ExpectedImprovementPlus,
        AcquisitionKind::UpperConfidenceBound}) {
    CHECK(acquisition_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(acquisition_from_string("entropy"), std::invalid_argument);
}

TEST_CASE("encoding pads inactive axes at the middle and keeps the index") {
  const SearchSpace space = mixed_space();
  REQUIRE(space.encoded_dim() == 4);
  REQUIRE(space.max_kernel_arity() == 2);

  Eigen::VectorXd phi(1);
  phi << 1.0;  // extra axis only; linear has no kernel dims
  const Eigen::VectorXd z = encode(space, 1, phi);
  CHECK(z(0) == 1.0);
  CHECK(z(1) == 0.5);
  CHECK(z(2) == 0.5);
  CHECK(z(3) == doctest::Approx(0.75).epsilon(1e-12));  // 1.0 in [1e-3, 10] log scale
}

TEST_CASE("encode and decode invert each other on every candidate") {
  const SearchSpace space = mixed_space();
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int j = 1 + static_cast<int>(rng() % 3);
    const int d = space.point_dim(j);
    Eigen::VectorXd unit(d);
    for (int a = 0; a < d; ++a) unit(a) = unif(rng);
    const auto& domain = space.candidates[static_cast<size_t>(j - 1)].domain;
    Eigen::VectorXd phi(d);
    if (domain.dim() > 0) phi.head(domain.dim()) = domain.from_unit(unit.head(domain.dim()));
    phi.tail(1) = space.extra.from_unit(unit.tail(1));

    const BoPoint back = decode(space, encode(space, j, phi));
    CHECK(back.kernel_index == j);
    REQUIRE(back.phi.size() == phi.size());
    for (int a = 0; a < d; ++a) CHECK(back.phi(a) == doctest::Approx(phi(a)).epsilon(1e-12));
  }
}

TEST_CASE("decode clamps stray coordinates into the space") {
  const SearchSpace space = mixed_space();
  Eigen::VectorXd z(4);
  z << 7.9, 1.3, -0.2, 0.5;
  const BoPoint high = decode(space, z);
  CHECK(high.kernel_index == 3);
  CHECK(in_space(space, high));
  z(0) = -2.0;
  const BoPoint low = decode(space, z);
  CHECK(low.kernel_index == 1);
  CHECK(in_space(space, low));
}

TEST_CASE("encode validates index and hyperparameter arity") {
  const SearchSpace space = mixed_space();
  Eigen::VectorXd phi(1);
  phi << 1.0;
  CHECK_THROWS_AS(encode(space, 0, phi), std::invalid_argument);
  CHECK_THROWS_AS(encode(space, 4, phi), std::invalid_argument);
  CHECK_THROWS_AS(encode(space, 2, phi), std::invalid_argument);  // needs phi + extra
  Eigen::VectorXd wrong(5);
  wrong.setConstant(1.0);
  CHECK_THROWS_AS(encode(space, 3, wrong), std::invalid_argument);
  CHECK_THROWS_AS(decode(space, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("surrogate rounds the index coordinate before prediction") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 101, 12);
  Eigen::VectorXd a = Eigen::VectorXd::Constant(4, 0.4);
  Eigen::VectorXd b = a;
  a(0) = 1.4;
  b(0) = 0.6;  // both round to candidate 1
  const Prediction pa = state.surrogate->predict_encoded(a);
  const Prediction pb = state.surrogate->predict_encoded(b);
  CHECK(pa.mean == pb.mean);
  CHECK(pa.variance == pb.variance);

  Eigen::VectorXd c = a;
  c(0) = 2.4;  // different candidate, generically different posterior
  const Prediction pc = state.surrogate->predict_encoded(c);
  CHECK(pc.mean != pa.mean);
}

TEST_CASE("expected improvement matches quadrature and its edge cases") {
  CHECK(expected_improvement(1.0, 0.0, 0.5) == 0.0);
  CHECK(expected_improvement(0.2, 0.0, 0.5) == 0.0);
  CHECK(expected_improvement(0.7, 1.0, 0.7) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * std::acos(-1.0))).epsilon(1e-12));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::uniform_real_distribution<double> pos(0.05, 3.0);
  for (int trial = 0; trial < 40; ++trial) {
    const double mean = unif(rng), stddev = pos(rng), best = unif(rng);
    CHECK(expected_improvement(mean, stddev, best) ==
          doctest::Approx(ei_by_quadrature(mean, stddev, best)).epsilon(1e-6));
  }
}

TEST_CASE("expected improvement is nonnegative and monotone in the incumbent") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  std::uniform_real_distribution<double> pos(0.0, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double mean = unif(rng), stddev = pos(rng), best = unif(rng);
    const double ei = expected_improvement(mean, stddev, best);
    CHECK(ei >= 0.0);
    CHECK(expected_improvement(mean, stddev, best + 0.5) >= ei);
  }
}

TEST_CASE("confidence-bound score subtracts the scaled posterior spread") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 31, 10);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(4, 0.3);
  z(0) = 2.0;
  const Prediction p = state.surrogate->predict_encoded(z);
  CHECK(acquisition_ucb(*state.surrogate, z, 0.0) == p.mean);
  CHECK(acquisition_ucb(*state.surrogate, z, 4.0) ==
        doctest::Approx(p.mean - 2.0 * std::sqrt(std::max(0.0, p.variance))).epsilon(1e-12));
  CHECK_THROWS_AS(acquisition_ucb(*state.surrogate, z, -1.0), std::invalid_argument);
}

TEST_CASE("pointwise ei-plus equals plain ei against the incumbent") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 37, 14);
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd z(4);
    z << 1 + static_cast<int>(rng() % 3), unif(rng), unif(rng), unif(rng);
    CHECK(acquisition_ei_plus(state, z) ==
          acquisition_ei(*state.surrogate, state.incumbent().cost, z));
  }
}

TEST_CASE("surrogate standardization is invertible across the cost range") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 43, 8);
  for (const double cost : {0.0, 0.3, 2.0, 150.0, 1e6}) {
    CHECK(state.surrogate->destandardize(state.surrogate->standardize(cost)) ==
          doctest::Approx(cost).epsilon(1e-9));
  }
}

TEST_CASE("state keeps the incumbent at the running minimum") {
  BoState state;
  CHECK_THROWS_AS(state.incumbent(), std::logic_error);
  const double costs[] = {5.0, 6.0, 2.0, 2.5, 2.0, 1.0};
  double running = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 6; ++i) {
    state.append(Observation{1, Eigen::VectorXd::Zero(1), costs[i], i});
    running = std::min(running, costs[i]);
    CHECK(state.incumbent().cost == running);
    CHECK(state.incumbent_trace.back() == running);
  }
  for (size_t i = 1; i < state.incumbent_trace.size(); ++i) {
    CHECK(state.incumbent_trace[i] <= state.incumbent_trace[i - 1]);
  }
  // Ties keep the earlier observation.
  CHECK(state.incumbent().trial_index == 5);
  state.append(Observation{1, Eigen::VectorXd::Zero(1), 1.0, 6});
  CHECK(state.incumbent().trial_index == 5);
}

TEST_CASE("proposals stay inside the declared space under fuzzing") {
  const SearchSpace space = mixed_space();
  BoOptions options;
  options.acquisition_restarts = 2;
  int proposals = 0;
  for (std::uint64_t round = 0; round < 8; ++round) {
    const BoState state = observed_state(space, 1000 + round, 6 + static_cast<int>(round));
    for (std::uint64_t s = 0; s < 42; ++s) {
      const AcquisitionKind kind = s % 3 == 0 ? AcquisitionKind::ExpectedImprovement
                                   : s % 3 == 1 ? AcquisitionKind::ExpectedImprovementPlus
                                                : AcquisitionKind::UpperConfidenceBound;
      const BoPoint p = propose_next(state, space, kind, s * 977 + round, options);
      CHECK(in_space(space, p));
      ++proposals;
    }
  }
  CHECK(proposals == 336);
}

TEST_CASE("proposal on an empty history is an in-space initial point") {
  const SearchSpace space = mixed_space();
  BoState state;
  const BoPoint p = propose_next(state, space, AcquisitionKind::ExpectedImprovement, 5);
  CHECK(p.kernel_index == 1);
  CHECK(in_space(space, p));
}

TEST_CASE("single zero-dimensional candidate always proposes itself") {
  SearchSpace space;
  space.candidates.push_back({KernelFamily::Linear, HyperparameterDomain::empty()});
  BoState state;
  for (int i = 0; i < 3; ++i) {
    const BoPoint p = propose_next(state, space, AcquisitionKind::ExpectedImprovement,
                                   static_cast<std::uint64_t>(i));
    CHECK(p.kernel_index == 1);
    CHECK(p.phi.size() == 0);
    state.append(Observation{1, Eigen::VectorXd(0), 1.0, i});
    state.surrogate = BoSurrogate::fit(space, state.history, 7, 1);
  }
}

TEST_CASE("proposals are deterministic for a fixed seed") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 53, 10);
  for (const auto kind : {AcquisitionKind::ExpectedImprovement,
                          AcquisitionKind::UpperConfidenceBound}) {
    const BoPoint a = propose_next(state, space, kind, 99);
    const BoPoint b = propose_next(state, space, kind, 99);
    CHECK(a.kernel_index == b.kernel_index);
    CHECK(a.phi == b.phi);
  }
}

TEST_CASE("proposal matches a dense grid sweep of the acquisition") {
  const SearchSpace space = interval_space();
  BoState state;
  const double xs[] = {0.05, 0.3, 0.55, 0.8, 0.95};
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd phi(1);
    phi << xs[i];
    state.append(Observation{1, phi, (xs[i] - 0.7) * (xs[i] - 0.7), i});
  }
  state.surrogate = BoSurrogate::fit(space, state.history, 11, 3);

  double grid_best = -1.0;
  for (int g = 0; g <= 2000; ++g) {
    Eigen::VectorXd phi(1);
    phi << g / 2000.0;
    grid_best = std::max(
        grid_best, acquisition_ei(*state.surrogate, state.incumbent().cost,
                                  encode(space, 1, phi)));
  }
  const BoPoint p =
      propose_next(state, space, AcquisitionKind::ExpectedImprovement, 13);
  const double at_proposal =
      acquisition_ei(*state.surrogate, state.incumbent().cost, encode(space, 1, p.phi));
  CHECK(at_proposal >= grid_best - 1e-9 * std::max(1.0, std::abs(grid_best)));
}

TEST_CASE("disabling the escape parameter reduces ei-plus to ei") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 59, 12);
  BoOptions options;
  options.ei_plus_lambda = 0.0;
  const BoPoint plain = propose_next(state, space, AcquisitionKind::ExpectedImprovement, 61, options);
  const BoPoint plus =
      propose_next(state, space, AcquisitionKind::ExpectedImprovementPlus, 61, options);
  CHECK(plain.kernel_index == plus.kernel_index);
  CHECK(plain.phi == plus.phi);
}

TEST_CASE("a forced escape substitutes a wide exploration step") {
  const SearchSpace space = mixed_space();
  const BoState state = observed_state(space, 67, 12);
  BoOptions options;
  options.ei_plus_lambda = 0.0;
  const BoPoint ei = propose_next(state, space, AcquisitionKind::ExpectedImprovementPlus, 71, options);
  options.ei_plus_lambda = 1e9;  // threshold no posterior spread can clear
  const BoPoint wide =
      propose_next(state, space, AcquisitionKind::ExpectedImprovementPlus, 71, options);
  CHECK(in_space(space, wide));
  const bool same = ei.kernel_index == wide.kernel_index && ei.phi == wide.phi;
  CHECK_FALSE(same);
}

TEST_CASE("full loop on a constant objective settles at the constant") {
  const SearchSpace space = mixed_space();
  BoOptions options;
  options.seed = 3;
  options.acquisition_restarts = 2;
  const BoState state = run_bo([](int, const Eigen::VectorXd&) { return 7.5; }, space, 12, options);
  REQUIRE(state.history.size() == 12);
  CHECK(state.incumbent().cost == 7.5);
  for (const auto& obs : state.history) {
    CHECK(obs.cost == 7.5);
    CHECK(in_space(space, BoPoint{obs.kernel_index, obs.phi}));
  }
}

TEST_CASE("full loop is deterministic and traces the running minimum") {
  const SearchSpace space = mixed_space();
  const auto objective = [](int j, const Eigen::VectorXd& phi) {
    return 0.5 * j + std::log(phi(phi.size() - 1) + 1.0) + phi.head(phi.size() - 1).sum() * 0.01;
  };
  BoOptions options;
  options.seed = 17;
  options.acquisition_restarts = 3;
  const BoState a = run_bo(objective, space, 16, options);
  const BoState b = run_bo(objective, space, 16, options);
  REQUIRE(a.history.size() == b.history.size());
  for (size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].kernel_index == b.history[i].kernel_index);
    CHECK(a.history[i].phi == b.history[i].phi);
    CHECK(a.history[i].cost == b.history[i].cost);
  }
  double running = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < a.history.size(); ++i) {
    running = std::min(running, a.history[i].cost);
    CHECK(a.incumbent_trace[i] == running);
  }
}

TEST_CASE("pinned initial points are evaluated first and bound the incumbent") {
  const SearchSpace space = mixed_space();
  const auto objective = [](int j, const Eigen::VectorXd& phi) {
    return double(j) + phi.cwiseAbs().sum() * 0.1;
  };
  BoPoint pinned;
  pinned.kernel_index = 2;
  pinned.phi.resize(2);
  pinned.phi << 0.7, 0.02;
  BoOptions options;
  options.seed = 23;
  options.acquisition_restarts = 2;
  options.initial_points = {pinned};
  const BoState state = run_bo(objective, space, 14, options);
  CHECK(state.history[0].kernel_index == pinned.kernel_index);
  CHECK(state.history[0].phi == pinned.phi);
  CHECK(state.incumbent().cost <= objective(pinned.kernel_index, pinned.phi));
}

TEST_CASE("non-finite objective values are recorded at the penalty cost") {
  const SearchSpace space = mixed_space();
  const auto objective = [](int j, const Eigen::VectorXd& phi) {
    if (j == 2) return std::numeric_limits<double>::quiet_NaN();
    if (j == 3) return std::numeric_limits<double>::infinity();
    return phi(0);
  };
  BoOptions options;
  options.seed = 29;
  options.acquisition_restarts = 2;
  const BoState state = run_bo(objective, space, 13, options);
  int penalized = 0;
  for (const auto& obs : state.history) {
    CHECK(std::isfinite(obs.cost));
    if (obs.kernel_index != 1) {
      CHECK(obs.cost == options.penalty_cost);
      ++penalized;
    }
  }
  CHECK(penalized >= 2);  // the initial design touches every candidate
  CHECK(state.incumbent().kernel_index == 1);
}

TEST_CASE("objective exceptions surface with the failing point attached") {
  const SearchSpace space = interval_space();
  const auto objective = [](int, const Eigen::VectorXd&) -> double {
    throw std::runtime_error("rollout exploded");
  };
  try {
    run_bo(objective, space, 5, BoOptions{});
    FAIL("expected a rethrow");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("kernel") != std::string::npos);
    CHECK(what.find("rollout exploded") != std::string::npos);
  }
  CHECK_THROWS_AS(run_bo({}, space, 5, BoOptions{}), std::invalid_argument);
  CHECK_THROWS_AS(
      run_bo([](int, const Eigen::VectorXd&) { return 0.0; }, space, 0, BoOptions{}),
      std::invalid_argument);
}

TEST_CASE("confidence-bound search localizes a shifted parabola") {
  const SearchSpace space = interval_space();
  const auto objective = [](int, const Eigen::VectorXd& phi) {
    return (phi(0) - 0.3) * (phi(0) - 0.3);
  };
  BoOptions options;
  options.seed = 31;
  options.acquisition = AcquisitionKind::UpperConfidenceBound;
  const BoState state = run_bo(objective, space, 30, options);
  CHECK(std::abs(state.incumbent().phi(0) - 0.3) < 1e-2);
}

TEST_CASE("default loop lands within five percent on a two-axis bowl") {
  SearchSpace space;
  Eigen::VectorXd lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << 1.0, 1.0;
  space.candidates.push_back(
      {KernelFamily::SquaredExponentialArd, HyperparameterDomain::box(lo, hi, false)});
  const auto objective = [](int, const Eigen::VectorXd& phi) {
    const double dx = phi(0) - 0.6, dy = phi(1) - 0.2;
    return 0.5 + dx * dx + 2.0 * dy * dy;
  };
  BoOptions options;
  options.seed = 37;
  const BoState state = run_bo(objective, space, 40, options);
  CHECK(state.incumbent().cost <= 0.5 * 1.05);
}
