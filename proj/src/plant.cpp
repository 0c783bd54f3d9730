#include "kselect/plant.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace kselect {

namespace {
std::atomic<std::uint64_t> g_rollout_calls{0};
}

double plant_drift(double x) {
  return std::exp(-x * x / 100.0) * std::sin(x) + x / 3.0;
}

double step_plant(double x, double u) { return plant_drift(x) + u; }

ModelHandle ModelHandle::svr(SvrModel model) {
  ModelHandle h;
  h.model_ = std::make_shared<const std::variant<SvrModel, GpModel, Perfect, Zero>>(
      std::move(model));
  return h;
}

ModelHandle ModelHandle::gp(GpModel model) {
  ModelHandle h;
  h.model_ = std::make_shared<const std::variant<SvrModel, GpModel, Perfect, Zero>>(
      std::move(model));
  return h;
}

ModelHandle ModelHandle::perfect() {
  ModelHandle h;
  h.model_ = std::make_shared<const std::variant<SvrModel, GpModel, Perfect, Zero>>(Perfect{});
  return h;
}

ModelHandle ModelHandle::zero() {
  ModelHandle h;
  h.model_ = std::make_shared<const std::variant<SvrModel, GpModel, Perfect, Zero>>(Zero{});
  return h;
}

double ModelHandle::predict(double x) const {
  if (!model_) throw std::logic_error("ModelHandle: empty handle");
  Eigen::VectorXd p(1);
  p << x;
  if (const auto* m = std::get_if<SvrModel>(model_.get())) return predict_svr(*m, p);
  if (const auto* m = std::get_if<GpModel>(model_.get())) return m->predict(p).mean;
  if (std::holds_alternative<Perfect>(*model_)) return plant_drift(x);
  return 0.0;
}

double control(double x, const ModelHandle& model) {
  return -model.predict(x) + x / 2.0;
}

ClosedLoopTrace rollout(double x0, int horizon, const ModelHandle& model, double guard) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (!(guard > 0.0)) throw std::invalid_argument("rollout: guard must be positive");
  g_rollout_calls.fetch_add(1, std::memory_order_relaxed);

  ClosedLoopTrace trace;
  trace.states.resize(horizon + 1);
  trace.inputs.resize(horizon);
  trace.states(0) = x0;

  int steps = 0;
  if (!std::isfinite(x0) || std::abs(x0) > guard) {
    trace.diverged = true;
  } else {
    for (int k = 0; k < horizon; ++k) {
      const double u = control(trace.states(k), model);
      const double next = step_plant(trace.states(k), u);
      trace.inputs(k) = u;
      trace.states(k + 1) = next;
      ++steps;
      if (!std::isfinite(next) || std::abs(next) > guard) {
        trace.diverged = true;
        break;
      }
    }
  }
  trace.states.conservativeResize(steps + 1);
  trace.inputs.conservativeResize(steps);
  trace.outputs = trace.states;
  return trace;
}

double evaluate_cost(const ClosedLoopTrace& trace, const CostSpec& cost) {
  if (cost.horizon < 1) throw std::invalid_argument("evaluate_cost: horizon must be >= 1");
  if (trace.diverged) return kDivergencePenalty;
  if (trace.outputs.size() < cost.horizon) {
    throw std::invalid_argument("evaluate_cost: trace shorter than the cost horizon");
  }
  double acc = 0.0;
  if (cost.kind == CostKind::TimeWeightedQuadraticState) {
    for (int k = 0; k < cost.horizon; ++k) {
      acc += k * trace.outputs(k) * trace.outputs(k);
    }
  } else {
    for (int k = 0; k < cost.horizon; ++k) {
      acc += trace.outputs(k) * trace.outputs(k);
    }
    acc /= cost.horizon;
  }
  return acc;
}

Dataset simulation_training_data() {
  Dataset data;
  data.inputs.resize(11, 1);
  data.targets.resize(11);
  for (int i = 0; i < 11; ++i) {
    const double x = -10.0 + 2.0 * i;
    data.inputs(i, 0) = x;
    data.targets(i) = step_plant(x, 0.0);
  }
  return data;
}

std::uint64_t rollout_call_count() {
  return g_rollout_calls.load(std::memory_order_relaxed);
}

}  // namespace kselect
