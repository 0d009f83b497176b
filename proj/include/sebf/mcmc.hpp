#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sebf/engine.hpp"
#include "sebf/spatial.hpp"
#include "sebf/suffstats.hpp"

namespace sebf::mcmc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Offline MCMC smoother settings. Step scales adapt during burn-in toward
/// the acceptance band, then freeze so the retained chain is Markovian.
struct McmcConfig {
  int burn_in = 50;
  int thinning = 10;
  int final_size = 3000;
  double phi_prior_mean = 0.4;  // exponential prior on phi
  double accept_lo = 0.2;
  double accept_hi = 0.4;
  double init_step_x = 0.8;
  double init_step_phi = 0.35;   // random walk on log phi
  int phi_proposals_per_sweep = 5;
  std::uint64_t seed = 99;

  void validate() const;
};

struct McmcSamples {
  std::vector<double> alpha;
  std::vector<double> sigma2;
  std::vector<double> phi;
  MatrixXd beta;          // final_size x m
  MatrixXd x_mean;        // n x (T+1) posterior mean of the latent field
  double accept_rate_x = 0.0;    // measured after adaptation froze
  double accept_rate_phi = 0.0;
  bool acceptance_warning = false;

  double mean_alpha() const;
  double mean_sigma2() const;
  double mean_phi() const;
  VectorXd mean_beta() const;
  /// Equal-tailed interval of one scalar series.
  static std::pair<double, double> interval(const std::vector<double>& v,
                                            double level);
  /// Posterior mode of phi by Gaussian-kernel density evaluated on a grid.
  double phi_mode(const std::vector<double>& grid) const;
};

/// Gibbs for theta (full-history sufficient statistics), single-site
/// random-walk MH for every x_{i,t}, random-walk MH on log phi with an
/// exponential prior. y[t] is the observation slice for time t+1; x_0 is
/// latent-only.
McmcSamples run_offline(const std::vector<spatial::ObsSlice>& y,
                        const spatial::SiteSet& sites,
                        const engine::CovariateSpec& covariates,
                        const stats::PriorHyper& prior,
                        const spatial::ObservationFamily& family,
                        const McmcConfig& config, double nugget = 0.0);

}  // namespace sebf::mcmc
