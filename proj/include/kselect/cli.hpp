// Command implementations behind the command-line tool, callable directly
// so tests can drive them without spawning a process.
#pragma once

#include <ostream>
#include <string>

#include "kselect/config.hpp"

namespace kselect {

/// Full study: data-based selection, the same again on trial-augmented
/// data, and the repeated closed-loop study. Writes table2.json,
/// fig1_errors.csv and fig2_curve.csv under the configured output dir.
int cmd_reproduce_table2(const ExperimentConfig& config, std::ostream& log);

/// Numeric checks of the theory pieces: randomized norm-scaling draws, the
/// synthetic confidence-bound demo and initialization dominance.
int cmd_verify(const ExperimentConfig& config, std::ostream& log);

/// One closed-loop rollout of the configured model; writes trace.csv.
int cmd_simulate(const ExperimentConfig& config, std::ostream& log);

/// One selection pipeline; `mode` is "data" or "closed-loop". Writes
/// selection.json and incumbent.csv.
int cmd_select(const ExperimentConfig& config, const std::string& mode, std::ostream& log);

/// Bayesian optimization on a synthetic 1-D quadratic with the
/// confidence-bound acquisition; writes bo_demo.csv.
int cmd_bo_demo(const ExperimentConfig& config, int budget, std::ostream& log);

}  // namespace kselect
