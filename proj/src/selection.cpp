#include "kselect/selection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>

#include "kselect/nelder_mead.hpp"

namespace kselect {

namespace {

KernelSpec make_candidate_spec(const SearchSpace& space, int kernel_index,
                               const Eigen::VectorXd& kernel_phi, int input_dim) {
  const KernelSpec spec{space.candidates[static_cast<size_t>(kernel_index - 1)].family,
                        kernel_phi, input_dim};
  spec.validate();
  return spec;
}

// Splits the combined BO coordinate into (kernel phi, tube width).
std::pair<Eigen::VectorXd, double> split_point(const SearchSpace& space, int kernel_index,
                                               const Eigen::VectorXd& phi,
                                               double fallback_epsilon) {
  const int arity = space.candidates[static_cast<size_t>(kernel_index - 1)].domain.dim();
  const Eigen::VectorXd kernel_phi = phi.head(arity);
  const double epsilon = space.extra.dim() > 0 ? phi(arity) : fallback_epsilon;
  return {kernel_phi, epsilon};
}

SelectionResult finalize(const SearchSpace& space, BoState state, const Dataset& data,
                         const CostSpec& cost, double x0, std::uint64_t seed,
                         const SelectionConfig& config) {
  const Observation incumbent = state.incumbent();
  auto [kernel_phi, epsilon] =
      split_point(space, incumbent.kernel_index, incumbent.phi, config.svr_epsilon);

  SelectionResult result;
  result.kernel_index = incumbent.kernel_index;
  result.family = space.candidates[static_cast<size_t>(incumbent.kernel_index - 1)].family;
  result.phi = kernel_phi;
  result.svr_epsilon = epsilon;
  result.bo_state = std::move(state);

  const KernelSpec spec =
      make_candidate_spec(space, incumbent.kernel_index, kernel_phi, data.input_dim());
  try {
    result.loss = cross_validation_loss(data, spec, epsilon, config.cv_folds,
                                        optim::derive_seed(seed, 0xcf), config.box_c,
                                        config.svr_tol);
  } catch (const std::runtime_error&) {
    result.loss = config.bo.penalty_cost;
  }
  try {
    const SvrModel model =
        train_svr(data, spec, epsilon, config.box_c, SvrOptions{config.svr_tol, 100000});
    const ClosedLoopTrace trace =
        rollout(x0, cost.horizon, ModelHandle::svr(model), config.guard);
    result.cost = evaluate_cost(trace, cost);
  } catch (const std::runtime_error&) {
    result.cost = config.bo.penalty_cost;
  }
  return result;
}

}  // namespace

double cross_validation_loss(const Dataset& data, const KernelSpec& spec, double epsilon,
                             int folds, std::uint64_t seed, double box_c, double svr_tol) {
  data.validate();
  const int m = data.size();
  if (folds < 2 || folds > m) {
    throw std::invalid_argument("cross_validation_loss: folds must be in [2, m]");
  }

  std::vector<int> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // Contiguous blocks of the shuffled order; sizes differ by at most one.
  double squared_error = 0.0;
  int fold_start = 0;
  for (int f = 0; f < folds; ++f) {
    const int fold_size = m / folds + (f < m % folds ? 1 : 0);
    const int fold_end = fold_start + fold_size;

    Dataset train;
    train.inputs.resize(m - fold_size, data.input_dim());
    train.targets.resize(m - fold_size);
    int r = 0;
    for (int t = 0; t < m; ++t) {
      if (t >= fold_start && t < fold_end) continue;
      train.inputs.row(r) = data.inputs.row(order[static_cast<size_t>(t)]);
      train.targets(r) = data.targets(order[static_cast<size_t>(t)]);
      ++r;
    }

    const SvrModel model = train_svr(train, spec, epsilon, box_c, SvrOptions{svr_tol, 100000});
    for (int t = fold_start; t < fold_end; ++t) {
      const int idx = order[static_cast<size_t>(t)];
      const double residual = predict_svr(model, data.inputs.row(idx)) - data.targets(idx);
      squared_error += residual * residual;
    }
    fold_start = fold_end;
  }
  return squared_error / m;
}

SearchSpace simulation_search_space() {
  SearchSpace space;
  space.candidates.push_back(Candidate{KernelFamily::Linear, HyperparameterDomain::empty()});
  space.candidates.push_back(
      Candidate{KernelFamily::PolynomialCubic, HyperparameterDomain::empty()});
  space.candidates.push_back(
      Candidate{KernelFamily::Gaussian, default_domain(KernelFamily::Gaussian, 1)});
  space.extra = default_epsilon_domain();
  return space;
}

double default_simulation_box_constraint() {
  static const double value = default_box_constraint(simulation_training_data().targets);
  return value;
}

SelectionResult data_based_selection(const Dataset& data, const SearchSpace& space,
                                     int budget, std::uint64_t seed, double x0,
                                     const CostSpec& cost, const SelectionConfig& config) {
  data.validate();
  space.validate();
  const std::uint64_t cv_seed = optim::derive_seed(seed, 0xcf);

  auto objective = [&](int kernel_index, const Eigen::VectorXd& phi) -> double {
    auto [kernel_phi, epsilon] = split_point(space, kernel_index, phi, config.svr_epsilon);
    const KernelSpec spec = make_candidate_spec(space, kernel_index, kernel_phi, data.input_dim());
    try {
      return cross_validation_loss(data, spec, epsilon, config.cv_folds, cv_seed,
                                   config.box_c, config.svr_tol);
    } catch (const std::runtime_error&) {
      // A fold refused to converge; charge the flat penalty and move on.
      return config.bo.penalty_cost;
    }
  };

  BoOptions options = config.bo;
  options.seed = seed;
  const std::uint64_t rollouts_before = rollout_call_count();
  BoState state = run_bo(objective, space, budget, options);
  const std::uint64_t search_rollouts = rollout_call_count() - rollouts_before;

  SelectionResult result = finalize(space, std::move(state), data, cost, x0, seed, config);
  result.search_rollouts = search_rollouts;
  return result;
}

SelectionResult closed_loop_selection(const Dataset& data, const SearchSpace& space,
                                      const CostSpec& cost, double x0, int budget,
                                      std::uint64_t seed,
                                      const std::optional<BoPoint>& initial,
                                      const SelectionConfig& config) {
  data.validate();
  space.validate();

  std::vector<std::pair<double, double>> transitions;
  auto objective = [&](int kernel_index, const Eigen::VectorXd& phi) -> double {
    auto [kernel_phi, epsilon] = split_point(space, kernel_index, phi, config.svr_epsilon);
    const KernelSpec spec = make_candidate_spec(space, kernel_index, kernel_phi, data.input_dim());
    SvrModel model;
    try {
      model = train_svr(data, spec, epsilon, config.box_c, SvrOptions{config.svr_tol, 100000});
    } catch (const std::runtime_error&) {
      return config.bo.penalty_cost;
    }
    const ClosedLoopTrace trace =
        rollout(x0, cost.horizon, ModelHandle::svr(std::move(model)), config.guard);
    for (int k = 0; k + 1 < trace.states.size(); ++k) {
      transitions.emplace_back(trace.states(k), trace.states(k + 1) - trace.inputs(k));
    }
    return evaluate_cost(trace, cost);
  };

  BoOptions options = config.bo;
  options.seed = seed;
  if (initial) options.initial_points.insert(options.initial_points.begin(), *initial);
  const std::uint64_t rollouts_before = rollout_call_count();
  BoState state = run_bo(objective, space, budget, options);
  const std::uint64_t search_rollouts = rollout_call_count() - rollouts_before;

  SelectionResult result = finalize(space, std::move(state), data, cost, x0, seed, config);
  result.search_rollouts = search_rollouts;
  result.transitions.inputs.resize(static_cast<int>(transitions.size()), 1);
  result.transitions.targets.resize(static_cast<int>(transitions.size()));
  for (size_t t = 0; t < transitions.size(); ++t) {
    result.transitions.inputs(static_cast<int>(t), 0) = transitions[t].first;
    result.transitions.targets(static_cast<int>(t)) = transitions[t].second;
  }
  return result;
}

Dataset augment_with_transitions(const Dataset& data, const Dataset& transitions,
                                 double guard) {
  data.validate();
  if (transitions.inputs.cols() != data.input_dim()) {
    throw std::invalid_argument("augment_with_transitions: dimension mismatch");
  }
  std::vector<int> kept;
  for (int t = 0; t < transitions.inputs.rows(); ++t) {
    if (transitions.inputs.row(t).cwiseAbs().maxCoeff() <= guard &&
        std::abs(transitions.targets(t)) <= guard) {
      kept.push_back(t);
    }
  }
  Dataset merged;
  merged.inputs.resize(data.size() + static_cast<int>(kept.size()), data.input_dim());
  merged.targets.resize(data.size() + static_cast<int>(kept.size()));
  merged.inputs.topRows(data.size()) = data.inputs;
  merged.targets.head(data.size()) = data.targets;
  for (size_t t = 0; t < kept.size(); ++t) {
    merged.inputs.row(data.size() + static_cast<int>(t)) = transitions.inputs.row(kept[t]);
    merged.targets(data.size() + static_cast<int>(t)) = transitions.targets(kept[t]);
  }
  return merged;
}

StudyResult repeated_study(const Dataset& data, const SearchSpace& space,
                           const CostSpec& cost, double x0, int repetitions, int budget,
                           std::uint64_t base_seed, const std::optional<BoPoint>& initial,
                           const SelectionConfig& config) {
  if (repetitions < 1) throw std::invalid_argument("repeated_study: repetitions must be >= 1");
  if (budget < 1) throw std::invalid_argument("repeated_study: budget must be >= 1");

  StudyResult study;
  study.runs.resize(static_cast<size_t>(repetitions));
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic) if (repetitions > 1)
  for (int r = 0; r < repetitions; ++r) {
    try {
      study.runs[static_cast<size_t>(r)] = closed_loop_selection(
          data, space, cost, x0, budget, base_seed + static_cast<std::uint64_t>(r),
          initial, config);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  study.incumbent_curves.resize(repetitions, budget);
  for (int r = 0; r < repetitions; ++r) {
    const auto& trace = study.runs[static_cast<size_t>(r)].bo_state.incumbent_trace;
    if (static_cast<int>(trace.size()) != budget) {
      throw std::logic_error("repeated_study: incumbent trace length mismatch");
    }
    for (int t = 0; t < budget; ++t) study.incumbent_curves(r, t) = trace[static_cast<size_t>(t)];
  }

  study.mean_curve = study.incumbent_curves.colwise().mean();
  study.std_curve.resize(budget);
  for (int t = 0; t < budget; ++t) {
    if (repetitions < 2) {
      study.std_curve(t) = 0.0;
      continue;
    }
    const double mean = study.mean_curve(t);
    const double ss = (study.incumbent_curves.col(t).array() - mean).square().sum();
    study.std_curve(t) = std::sqrt(ss / (repetitions - 1));
  }
  study.final_costs = study.incumbent_curves.col(budget - 1);
  study.kernel_counts.assign(static_cast<size_t>(space.candidate_count()), 0);
  for (const auto& run : study.runs) {
    ++study.kernel_counts[static_cast<size_t>(run.kernel_index - 1)];
  }
  return study;
}

}  // namespace kselect
