#pragma once

#include <Eigen/Core>

namespace kselect {

/// Regression data: rows of `inputs` are sample points, `targets` the
/// scalar observations.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;

  int size() const { return static_cast<int>(inputs.rows()); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }

  /// Throws std::invalid_argument if shapes disagree or values are non-finite.
  void validate() const;
};

}  // namespace kselect
