#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "sebf/engine.hpp"
#include "sebf/mcmc.hpp"
#include "sebf/spatial.hpp"

namespace sebf::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A fully specified simulation setting: site layout, truth, exposures,
/// grids and Monte-Carlo sizes. A scenario plus a seed determines a dataset
/// bit-for-bit.
struct Scenario {
  std::string name;
  MatrixXd coords;                  // n x dim site coordinates
  engine::CovariateSpec covariates;
  double alpha_true = 0.5;
  stats::SmallVec beta_true;
  double sigma2_true = 1.0;
  double phi_true = 0.4;
  std::string family = "poisson";
  double tau = 1.0;                 // constant exposure; see tau_jitter
  int tau_jitter = 0;               // exposures uniform in {tau..tau+jitter}
  double missing_prob = 0.0;
  int T = 100;
  eb::GridSpec grid;
  stats::PriorHyper prior;
  int L = 100;
  int N = 100;
  int Lg = 50;
  proposal::CorrectionMode proposal_mode = proposal::CorrectionMode::kMeanOnly;
  double nugget = 0.0;
  std::uint64_t seed = 1;

  spatial::SiteSet sites() const { return spatial::SiteSet(coords); }
  engine::EngineConfig engine_config() const;
};

/// n equidistant sites on [0,1], constant mean, the default priors and the
/// 41-point range grid; tau and the Monte-Carlo sizes vary per study.
Scenario baseline_scenario();
Scenario scenario_ess_study();     // tau = 1,  L = 100
Scenario scenario_estimation();    // tau = 10, L = 500
Scenario scenario_long_run();      // estimation layout with T = 1000
/// 17 scattered 2-D sites, 146 days, intercept + distance + time-trend
/// covariates, repeated-sampling exposures and missing days.
Scenario scenario_monitoring_synthetic();

Scenario scenario_by_name(const std::string& name);

struct Dataset {
  MatrixXd x;                          // n x (T+1) latent truth
  std::vector<spatial::ObsSlice> y;    // slices for t = 1..T
};

Dataset simulate(const Scenario& sc, Rng& rng);

// --- brute-force marginal likelihood ------------------------------------------

/// Optional exact values for components of theta; a pinned component is not
/// integrated (its prior factor is dropped), which is how the linear-Gaussian
/// Kalman cross-check is run.
struct OraclePins {
  std::optional<double> alpha;
  std::optional<double> sigma2;
  std::optional<Eigen::VectorXd> beta;
};

struct QuadratureSpec {
  int nodes_per_dim = 10;
  int max_dims = 6;  // tensor-product guard on the quadrature dimension
};

/// log p(y_{1:T} | phi) by adaptive Gauss-Hermite quadrature over
/// (x_{1:T}, alpha), with beta, sigma2 and x_0 integrated analytically
/// (conjugate normal / inverse-gamma layers). Tiny instances only; the
/// dimension guard rejects anything beyond spec.max_dims quadrature dims.
double oracle_marginal_loglik(const std::vector<spatial::ObsSlice>& y,
                              const spatial::SiteSet& sites,
                              const engine::CovariateSpec& covariates,
                              const stats::PriorHyper& prior,
                              const spatial::ObservationFamily& family,
                              double phi, double nugget = 0.0,
                              const QuadratureSpec& spec = {},
                              const OraclePins& pins = {});

/// Gauss-Hermite nodes/weights for exp(-z^2) weighting (Golub-Welsch).
void gauss_hermite(int n, std::vector<double>& nodes,
                   std::vector<double>& weights);

}  // namespace sebf::sim
