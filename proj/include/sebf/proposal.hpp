#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sebf/skew_normal.hpp"
#include "sebf/spatial.hpp"
#include "sebf/suffstats.hpp"

namespace sebf::proposal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class CorrectionMode { kGaussian, kMeanOnly, kMeanSkew };

CorrectionMode correction_mode_by_name(const std::string& name);
std::string correction_mode_name(CorrectionMode mode);

struct NewtonOptions {
  double tol = 1e-8;     // gradient max-norm
  int max_iter = 50;
  int max_halvings = 30;
};

/// fit_mode failed to converge; carries the last iterate for diagnostics.
struct ModeFitError : NumericalError {
  VectorXd last_iterate;
  ModeFitError(VectorXd it, const std::string& msg)
      : NumericalError(msg), last_iterate(std::move(it)) {}
};

/// Laplace fit of the one-step conditional p(x_t | x_{t-1}, y_t): mode of
///   f(x) = -log p(y_t | x) + (1/2 sigma2) (x - mu)' Rinv (x - mu) + const,
/// with curvature handled through M = L' D L + (1/sigma2) I so that
/// H = L^{-T} M L^{-1} and no inverse of R is ever formed. Skew-normal
/// marginals (when fitted) share the Gaussian marginal mean/sd and take
/// their skewness from the third derivative of the negative log target.
class ProposalFit {
 public:
  CorrectionMode mode_kind = CorrectionMode::kGaussian;
  VectorXd mode;                       // x_hat
  VectorXd shift;                      // proposal center minus x_hat
  VectorXd marg_sd;                    // sqrt of diag(H^{-1})
  std::vector<SkewNormal> marginals;   // per coordinate (empty for gaussian)
  double mean_delta2 = 0.0;            // skewness summary over coordinates
  double max_delta2 = 0.0;

  VectorXd center() const { return mode + shift; }
  double log_det_h() const { return log_det_h_; }

  /// N(center, H^{-1}) log-density (the Gaussian layer of the proposal).
  double gaussian_logpdf(const VectorXd& x) const;
  /// One joint draw from N(center, H^{-1}).
  VectorXd gaussian_sample(Rng& rng) const;

  const spatial::GaussianFactorization* fac = nullptr;

 private:
  friend ProposalFit fit_mode(const spatial::ObsSlice&, const VectorXd&, double,
                              const spatial::GaussianFactorization&,
                              const spatial::ObservationFamily&,
                              const NewtonOptions&);
  MatrixXd lm_;          // lower Cholesky factor of M
  double log_det_h_ = 0.0;
};

/// Newton minimization of f with step-halving damping. Returns the fit with
/// Gaussian marginals only (mode_kind = kGaussian, no skew marginals yet).
ProposalFit fit_mode(const spatial::ObsSlice& obs, const VectorXd& mu,
                     double sigma2, const spatial::GaussianFactorization& fac,
                     const spatial::ObservationFamily& family,
                     const NewtonOptions& opts = {});

/// Attach per-coordinate skew-normal marginals matched to (marginal mean,
/// marginal variance, third-order skewness) and set the correction mode.
void fit_skew_marginals(ProposalFit& fit, const spatial::ObsSlice& obs,
                        const spatial::ObservationFamily& family,
                        CorrectionMode mode);

/// N particles from the fitted proposal under the requested correction.
std::vector<VectorXd> sample_proposal(const ProposalFit& fit, int n_particles,
                                      Rng& rng);

/// Proposal log-density at x (any correction mode).
double proposal_logpdf(const ProposalFit& fit, const VectorXd& x);

struct ResampleResult {
  VectorXd x;       // the selected particle
  double ess;       // (sum w)^2 / sum w^2 of the normalized weights
  int index;        // which particle was selected
};

/// Importance weights w_i = p(y|x_i) p(x_i | x_{t-1}) / q(x_i), log-sum-exp
/// normalized; selects one index by a categorical draw.
ResampleResult weigh_and_resample(const std::vector<VectorXd>& particles,
                                  const spatial::ObsSlice& obs,
                                  const VectorXd& mu, double sigma2,
                                  const spatial::GaussianFactorization& fac,
                                  const spatial::ObservationFamily& family,
                                  const ProposalFit& fit, Rng& rng);

}  // namespace sebf::proposal
