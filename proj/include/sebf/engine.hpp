#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sebf/ebrange.hpp"
#include "sebf/proposal.hpp"
#include "sebf/spatial.hpp"
#include "sebf/suffstats.hpp"

namespace sebf::engine {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Covariate layout for G_t: any of an intercept column, a
/// distance-from-reference column and a (scaled) time-trend column.
struct CovariateSpec {
  bool intercept = true;
  bool dist = false;
  Eigen::RowVectorXd reference;  // required when dist is set
  bool time = false;
  double time_scale = 1.0;

  int m() const {
    return (intercept ? 1 : 0) + (dist ? 1 : 0) + (time ? 1 : 0);
  }
  MatrixXd build(const spatial::SiteSet& sites, int t) const;
  /// Covariates at arbitrary coordinates (prediction targets).
  MatrixXd build_at(const MatrixXd& coords, const spatial::SiteSet& sites,
                    int t) const;
  void validate(int site_dim) const;
};

struct EngineConfig {
  eb::GridSpec grid;
  stats::PriorHyper prior;
  CovariateSpec covariates;
  std::string family = "poisson";
  proposal::CorrectionMode proposal_mode = proposal::CorrectionMode::kMeanOnly;
  proposal::NewtonOptions newton;
  int n_particles = 100;
  int gibbs_iters = 50;
  double nugget = 0.0;
  double ci_level = 0.99;
  double ess_warn_floor = 0.0;
  bool simplified_estimator = false;  // requires a single coarse point
  std::uint64_t seed = 1;

  void validate(int site_dim) const;
};

struct ChainState {
  int k = 0;
  int l = 0;
  int phi_idx = 0;  // fine-grid index of the chain's own coarse range
  VectorXd x;
  stats::Theta theta;
  std::vector<stats::TemporalSuffStats> z;  // one entry per fine-grid range
  double last_ess = 0.0;
  double last_mean_delta2 = 0.0;
  double last_max_delta2 = 0.0;

  /// The Gibbs statistics are the z entry at the chain's own range
  /// (shared storage, not a copy).
  const stats::TemporalSuffStats& u() const {
    return z[static_cast<std::size_t>(phi_idx)];
  }
};

/// One results row: the empirical Bayes estimates after absorbing y_t.
struct StepSummary {
  int t = 0;
  stats::Theta theta_hat;
  VectorXd x_hat;
  eb::BayesFactorTable table;
  double mean_ess = 0.0;
  double reweight_ess = 0.0;
  bool low_ess_warning = false;
  double mean_delta2 = 0.0;
  double max_delta2 = 0.0;
  double step_seconds = 0.0;
};

/// K x L chain population driving the per-step loop: bootstrap within each
/// coarse component, one filter step per chain (concurrent), then the serial
/// empirical Bayes barrier. Chains draw from streams keyed on
/// (seed, k, l, t), so serial and OpenMP execution are bitwise identical.
class Engine {
 public:
  Engine(spatial::SiteSet sites, EngineConfig config);

  /// Draw the t = 0 population from the prior.
  void init_population();

  /// Absorb the observation batch for time t()+1. Throws without touching
  /// the population if any chain fails; on success the step is committed.
  StepSummary advance(const spatial::ObsSlice& y, bool parallel = true);

  /// The empirical Bayes phase alone on the current population (used to
  /// rebuild estimation weights after a checkpoint restore).
  std::pair<eb::BayesFactorTable, eb::ReweightResult> eb_phase() const;

  int t() const { return t_; }
  int n_sites() const { return sites_.size(); }
  const spatial::SiteSet& sites() const { return sites_; }
  const EngineConfig& config() const { return cfg_; }
  const std::vector<ChainState>& chains() const { return chains_; }
  const spatial::GaussianFactorization& factorization(int fine_idx) const {
    return fac_[static_cast<std::size_t>(fine_idx)];
  }

  /// Resident bytes of the working state (population + factorizations);
  /// history is streamed out, so this is constant in t.
  std::size_t state_bytes() const;

  // Checkpointing (versioned, CRC-checksummed binary blob).
  std::vector<std::uint8_t> checkpoint() const;
  void restore(const std::vector<std::uint8_t>& blob);

 private:
  void chain_loglik_row(const ChainState& chain, MatrixXd& loglik, int i) const;
  StepSummary eb_summarize(const MatrixXd& loglik, int t_new) const;

  spatial::SiteSet sites_;
  EngineConfig cfg_;
  const spatial::ObservationFamily* family_;
  std::vector<spatial::GaussianFactorization> fac_;  // per fine-grid range
  std::vector<int> base_;                            // flat offset per component
  std::vector<ChainState> chains_;
  int t_ = -1;
};

/// Algorithm-1 step for one chain at a fixed range: Gibbs refresh of theta,
/// Laplace/skew proposal, SIR draw of x_t, then the statistics updates at
/// every fine-grid range. `chain` enters as a copy of the bootstrap parent.
void filter_step_fixed_phi(
    ChainState& chain, const spatial::ObsSlice& y, const VectorXd& x_prev,
    const EngineConfig& cfg, const spatial::ObservationFamily& family,
    const std::vector<spatial::GaussianFactorization>& fac,
    const std::vector<MatrixXd>& whitened_g_cur,
    const std::vector<MatrixXd>& whitened_g_prev, Rng& rng);

}  // namespace sebf::engine
