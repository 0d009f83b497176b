#pragma once

#include <Eigen/Dense>

#include "sebf/errors.hpp"
#include "sebf/rng.hpp"
#include "sebf/spatial.hpp"
#include "sebf/stable_math.hpp"

namespace sebf::stats {

// Covariate dimension cap; lets the accumulators live in fixed-size storage
// so chains copy without heap traffic.
inline constexpr int kMaxCovariates = 8;

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                               kMaxCovariates, kMaxCovariates>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxCovariates, 1>;

// --- priors and parameters ----------------------------------------------------

/// Hyperparameters of the conjugate prior block:
///   beta  | s2 ~ N(Q0^{-1} b0, s2 Q0^{-1}),  Q0 = q0 I
///   alpha | s2 ~ N(a0/s0, s2/s0)
///   s2         ~ IG(c0/2, r0/2)
struct PriorHyper {
  double a0 = 0.0;
  double s0 = 0.1;
  SmallVec b0;
  double q0 = 0.01;
  double c0 = 3.0;
  double r0 = 1.0 / 3.0;

  void validate(int m) const;
};

struct Theta {
  double alpha = 0.0;
  SmallVec beta;
  double sigma2 = 1.0;
};

struct GaussianPosterior {
  SmallVec mean;
  SmallMat precision;  // covariance is sigma2 * precision^{-1}
};

struct ScalarGaussianPosterior {
  double mean;
  double precision;  // variance is sigma2 / precision
};

struct InverseGammaPosterior {
  double shape;  // IG(shape, rate) density x^{-shape-1} exp(-rate/x)
  double rate;
};

// --- sufficient statistics -------------------------------------------------------

/// Fixed-size cross-product accumulators against one R(phi)^{-1}. Everything
/// the theta full conditionals and log p(x_{0:t} | theta, phi) need is a
/// polynomial in alpha/beta with these as coefficients, so storage never
/// grows with t. Sums over s = 1..t are Kahan-compensated.
class TemporalSuffStats {
 public:
  TemporalSuffStats() = default;

  /// Accumulators at t = 0 from whitened inputs wg0 = L^{-1} G_0 and
  /// wx0 = L^{-1} x_0.
  static TemporalSuffStats init(const Eigen::MatrixXd& wg0,
                                const Eigen::VectorXd& wx0, double phi);

  /// Add the time-t cross products, again from whitened inputs.
  void update(const Eigen::MatrixXd& wg_cur, const Eigen::MatrixXd& wg_prev,
              const Eigen::VectorXd& wx_cur, const Eigen::VectorXd& wx_prev,
              double phi);

  int t() const { return t_; }
  int m() const { return static_cast<int>(g0_g0_.rows()); }
  double phi() const { return phi_; }

  // Raw accumulators, exposed for the full conditionals below.
  const SmallMat& g0_g0() const { return g0_g0_; }
  const SmallVec& g0_x0() const { return g0_x0_; }
  double x0_x0() const { return x0_x0_; }
  const SmallMat& gg_cur() const { return gg_cur_.value; }
  const SmallMat& gg_cross() const { return gg_cross_.value; }   // sum G_s' Rinv G_{s-1}
  const SmallMat& gg_prev() const { return gg_prev_.value; }
  const SmallVec& gx_cur() const { return gx_cur_.value; }        // sum G_s' Rinv x_s
  const SmallVec& gx_cur_prev() const { return gx_cur_prev_.value; }  // sum G_s' Rinv x_{s-1}
  const SmallVec& gx_prev_cur() const { return gx_prev_cur_.value; }  // sum G_{s-1}' Rinv x_s
  const SmallVec& gx_prev_prev() const { return gx_prev_prev_.value; }
  double xx_cur() const { return xx_cur_.value; }
  double xx_cross() const { return xx_cross_.value; }
  double xx_prev() const { return xx_prev_.value; }

  /// Sum of squared Eq.-(1)-residual quadratic forms
  ///   w_0' Rinv w_0 + sum_s (w_s - alpha w_{s-1})' Rinv (w_s - alpha w_{s-1}),
  /// w_s = x_s - G_s beta, expanded from the accumulators.
  double state_ssr(double alpha, const SmallVec& beta) const;

  std::size_t byte_size() const;

 private:
  void check_phi(double phi) const {
    if (phi != phi_)
      throw ContractViolation(
          "TemporalSuffStats: factorization range does not match the range "
          "the statistics were accumulated with");
  }

  int t_ = -1;
  double phi_ = 0.0;
  SmallMat g0_g0_;
  SmallVec g0_x0_;
  double x0_x0_ = 0.0;
  Kahan<SmallMat> gg_cur_, gg_cross_, gg_prev_;
  Kahan<SmallVec> gx_cur_, gx_cur_prev_, gx_prev_cur_, gx_prev_prev_;
  Kahan<double> xx_cur_{}, xx_cross_{}, xx_prev_{};

  friend struct SuffStatsCodec;
};

// --- full conditionals --------------------------------------------------------------

/// beta | alpha, sigma2 ~ N(Q_t^{-1} b_t, sigma2 Q_t^{-1}).
GaussianPosterior beta_full_conditional(const TemporalSuffStats& u, double alpha,
                                        const PriorHyper& prior);

/// alpha | beta, sigma2 ~ N(s_t^{-1} (a0 + cross), sigma2 / s_t).
ScalarGaussianPosterior alpha_full_conditional(const TemporalSuffStats& u,
                                               const SmallVec& beta,
                                               const PriorHyper& prior);

/// sigma2 | alpha, beta ~ IG((c0 + (t+1) n + m + 1)/2, (r0 + SSR)/2), where
/// the shape counts the t+1 state vectors plus the m+1 sigma2-scaled prior
/// dimensions and SSR adds the state residuals and both prior residuals.
InverseGammaPosterior sigma2_full_conditional(const TemporalSuffStats& u,
                                              double alpha, const SmallVec& beta,
                                              const PriorHyper& prior, int n);

/// Systematic-scan Gibbs: beta -> alpha -> sigma2, n_iter sweeps.
Theta gibbs_sweep(const TemporalSuffStats& u, const Theta& init,
                  const PriorHyper& prior, int n, int n_iter, Rng& rng);

/// log p(x_{0:t} | theta, phi) from the phi-entry statistics and the cached
/// log-determinant of R(phi).
double joint_state_loglik(const TemporalSuffStats& z, const Theta& theta,
                          double log_det_r, int n);

/// Draw theta from its prior (used to seed chains at t = 0).
Theta sample_prior(const PriorHyper& prior, int m, Rng& rng);

}  // namespace sebf::stats
