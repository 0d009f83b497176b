#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sebf/engine.hpp"
#include "sebf/simkit.hpp"

namespace sebf::sim {

struct StudyOptions {
  std::string out_dir = ".";
  int replications = 10;  // reduced desk scale; --full restores paper scale
  bool full = false;
  std::uint64_t seed = 20200828;
  bool parallel = true;
};

/// Run the online filter over a simulated dataset, one summary per step.
/// `on_step` (when set) sees every summary as it is produced.
std::vector<engine::StepSummary> run_online(
    const Scenario& scenario, const Dataset& data, bool parallel,
    const std::function<void(const engine::StepSummary&)>& on_step = {});

/// The named simulation studies; each emits plot-ready CSV files plus a
/// JSON sidecar into out_dir.
///   ess_comparison  - per-proposal ESS/N distributions and skewness summary
///   estimation      - estimate trajectories + offline posteriors at
///                     T = 20,40,...,100
///   simplified_bias - single-reference estimator arms vs the mixture
///   long_run        - one T=1000 run with Bayes-factor curves + offline
void replicate_study(const std::string& id, const StudyOptions& opts);

}  // namespace sebf::sim
