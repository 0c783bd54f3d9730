// Scalar benchmark plant, model-inverting controller, closed-loop rollout
// and trajectory cost.
#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <variant>

#include "kselect/dataset.hpp"
#include "kselect/gp.hpp"
#include "kselect/svr.hpp"

namespace kselect {

/// Cost charged to a rollout that diverged past the state guard.
inline constexpr double kDivergencePenalty = 1e6;

/// Drift term of the plant: x+ = drift(x) + u.
double plant_drift(double x);

double step_plant(double x, double u);

/// One-step predictor the controller inverts. `perfect` wraps the true
/// drift, `zero` predicts nothing (open loop up to the stabilizing term).
class ModelHandle {
 public:
  static ModelHandle svr(SvrModel model);
  static ModelHandle gp(GpModel model);
  static ModelHandle perfect();
  static ModelHandle zero();

  double predict(double x) const;

 private:
  struct Perfect {};
  struct Zero {};
  std::shared_ptr<const std::variant<SvrModel, GpModel, Perfect, Zero>> model_;
};

/// u = -model(x) + x/2: cancels the predicted drift and leaves x+ = x/2
/// when the model is exact.
double control(double x, const ModelHandle& model);

struct ClosedLoopTrace {
  Eigen::VectorXd states;   // x_0 .. x_n (truncated after a guard breach)
  Eigen::VectorXd inputs;   // u_0 .. u_{n-1}
  Eigen::VectorXd outputs;  // y_k = x_k for this plant
  bool diverged = false;
};

/// Simulates `horizon` steps from x0. Stops early and flags `diverged`
/// as soon as a state leaves [-guard, guard] or turns non-finite.
ClosedLoopTrace rollout(double x0, int horizon, const ModelHandle& model,
                        double guard = 1e3);

enum class CostKind {
  TimeWeightedQuadraticState,  // sum_k k * y_k^2
  MeanSquaredError,            // mean of y_k^2
};

struct CostSpec {
  CostKind kind = CostKind::TimeWeightedQuadraticState;
  int horizon = 10;
};

/// Cost over the first `horizon` outputs. A diverged trace costs the flat
/// penalty; a healthy trace shorter than the horizon is a caller error.
double evaluate_cost(const ClosedLoopTrace& trace, const CostSpec& cost);

/// The identification set used across the study: inputs x in
/// {-10, -8, ..., 10} held at u = 0, targets drift(x).
Dataset simulation_training_data();

/// Process-wide rollout counter, for asserting which selection pipelines
/// touch the plant.
std::uint64_t rollout_call_count();

}  // namespace kselect
