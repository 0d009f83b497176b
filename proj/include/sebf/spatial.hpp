#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sebf/errors.hpp"
#include "sebf/rng.hpp"

namespace sebf::spatial {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// --- sites ----------------------------------------------------------------

/// A fixed collection of sampling locations with its precomputed pairwise
/// (Euclidean) distance matrix. Coordinates may be 1-D or 2-D; geographic
/// coordinates are treated as planar, which is documented behaviour.
class SiteSet {
 public:
  explicit SiteSet(MatrixXd coordinates);  // n x dim

  int size() const { return static_cast<int>(coords_.rows()); }
  int dim() const { return static_cast<int>(coords_.cols()); }
  const MatrixXd& coordinates() const { return coords_; }
  const MatrixXd& distances() const { return dist_; }
  bool has_coincident_sites() const { return coincident_; }

  /// Sites of *this followed by the sites of other, one distance matrix.
  SiteSet joined_with(const SiteSet& other) const;

 private:
  MatrixXd coords_;
  MatrixXd dist_;
  bool coincident_ = false;
};

// --- correlation kernels ----------------------------------------------------

/// Stationary correlation kernel interface. Only the exponential kernel
/// ships; the interface exists so other decay families can be plugged in.
class CorrelationKernel {
 public:
  virtual ~CorrelationKernel() = default;
  virtual std::string name() const = 0;
  /// Correlation at distance d for range phi. Must give 1 at d = 0.
  virtual double value(double d, double phi) const = 0;
};

class ExponentialKernel final : public CorrelationKernel {
 public:
  std::string name() const override { return "exponential"; }
  double value(double d, double phi) const override {
    return std::exp(-d / phi);
  }
};

const CorrelationKernel& exponential_kernel();

/// R(phi) with R_ij = kernel(d_ij, phi) and (1 + nugget) scaled back to a
/// unit diagonal when nugget > 0. Throws on phi <= 0; coincident sites with
/// a zero nugget produce an exactly singular matrix and are rejected here
/// rather than silently jittered.
MatrixXd build_correlation(const SiteSet& sites, double phi,
                           const CorrelationKernel& kernel = exponential_kernel(),
                           double nugget = 0.0);

// --- factorization ----------------------------------------------------------

/// Immutable Cholesky factorization of a correlation matrix, shared read-only
/// across chains. Densities and samples go through triangular solves; the
/// inverse is never formed.
class GaussianFactorization {
 public:
  /// Factorize symmetric R; throws NotPositiveDefinite with the failing
  /// pivot index otherwise.
  static GaussianFactorization factorize(const MatrixXd& R, double phi = 0.0);

  int size() const { return static_cast<int>(lower_.rows()); }
  double phi() const { return phi_; }
  double log_det() const { return log_det_; }
  const MatrixXd& lower() const { return lower_; }

  /// L^{-1} v (whitening); v may be a matrix of columns.
  MatrixXd half_solve(const MatrixXd& v) const;
  /// R^{-1} v via two triangular solves.
  MatrixXd full_solve(const MatrixXd& v) const;
  /// v' R^{-1} v for a vector v.
  double quad_form(const VectorXd& v) const;

 private:
  GaussianFactorization(MatrixXd lower, double log_det, double phi)
      : lower_(std::move(lower)), log_det_(log_det), phi_(phi) {}
  MatrixXd lower_;
  double log_det_;
  double phi_;  // tag of the range the matrix was built with (0 = untagged)
};

/// log N(x; mean, sigma2 * R) through the factorization.
double mvn_logpdf(const VectorXd& x, const VectorXd& mean, double sigma2,
                  const GaussianFactorization& fac);

/// mean + sigma * L * z with z standard normal. sigma2 = 0 returns the mean.
VectorXd mvn_sample(const VectorXd& mean, double sigma2,
                    const GaussianFactorization& fac, Rng& rng);

// --- observation families ----------------------------------------------------

/// One-parameter exponential-family observation density
///   p(y | x) = exp{ y g(x) - tau b(x) + normalizer(y, tau) },
/// accessed through its log-density and x-derivatives (the proposal
/// machinery needs up to the third).
class ObservationFamily {
 public:
  virtual ~ObservationFamily() = default;
  virtual std::string name() const = 0;
  virtual double log_lik(double y, double tau, double x) const = 0;
  virtual double d1(double y, double tau, double x) const = 0;
  virtual double d2(double y, double tau, double x) const = 0;
  virtual double d3(double y, double tau, double x) const = 0;
  /// Conditional mean h(x) of one observation with tau = 1.
  virtual double mean(double x) const = 0;
  virtual double sample(double tau, double x, Rng& rng) const = 0;
  /// Validate a raw observation (e.g. Poisson counts must be nonneg ints).
  virtual void validate(double y) const = 0;
};

/// y ~ Poisson(tau * exp(x)):  g(x) = x,  b(x) = exp(x),  h(x) = exp(x).
class PoissonFamily final : public ObservationFamily {
 public:
  std::string name() const override { return "poisson"; }
  double log_lik(double y, double tau, double x) const override;
  double d1(double y, double tau, double x) const override;
  double d2(double y, double tau, double x) const override;
  double d3(double y, double tau, double x) const override;
  double mean(double x) const override { return std::exp(x); }
  double sample(double tau, double x, Rng& rng) const override;
  void validate(double y) const override;
};

/// y ~ N(x, 1/tau), identity link; the linear-Gaussian degenerate case used
/// by tests (d3 = 0, so all skewness corrections vanish).
class GaussianFamily final : public ObservationFamily {
 public:
  std::string name() const override { return "gaussian"; }
  double log_lik(double y, double tau, double x) const override;
  double d1(double y, double tau, double x) const override;
  double d2(double y, double tau, double x) const override;
  double d3(double, double, double) const override { return 0.0; }
  double mean(double x) const override { return x; }
  double sample(double tau, double x, Rng& rng) const override;
  void validate(double y) const override;
};

const ObservationFamily& family_by_name(const std::string& name);

/// One time slice of observations: counts, exposures and the missingness
/// mask. Missing components contribute nothing to any likelihood.
struct ObsSlice {
  VectorXd y;
  VectorXd tau;
  std::vector<bool> observed;

  static ObsSlice all_observed(VectorXd y_, VectorXd tau_);
  static ObsSlice all_missing(int n);
  int n() const { return static_cast<int>(y.size()); }
};

/// Sum over observed components of log p(y_i | x_i).
double obs_loglik(const ObsSlice& obs, const VectorXd& x,
                  const ObservationFamily& family);

// --- conditional prediction ---------------------------------------------------

/// Kriging system from monitored sites onto target sites for one range value:
/// weights W = R21 R11^{-1} and the conditional variance diagonal of
/// R22 - R21 R11^{-1} R12, all on the unit-variance correlation scale.
struct KrigingSystem {
  MatrixXd weights;          // n_target x n_monitored
  VectorXd cond_var_unit;    // length n_target, >= 0
};

KrigingSystem build_kriging(const SiteSet& monitored, const SiteSet& targets,
                            double phi,
                            const CorrelationKernel& kernel = exponential_kernel(),
                            double nugget = 0.0);

/// Draw x* | x_t ~ N(mu* + W (x_t - mu), sigma2 * diag-free conditional),
/// where mu / mu* are the covariate-implied means at monitored / target
/// sites. Joint draw (full conditional covariance), one sample.
VectorXd predict_unmonitored(const VectorXd& x_t, const VectorXd& mean_monitored,
                             const VectorXd& mean_targets, double sigma2,
                             const SiteSet& monitored, const SiteSet& targets,
                             double phi, Rng& rng,
                             const CorrelationKernel& kernel = exponential_kernel(),
                             double nugget = 0.0);

}  // namespace sebf::spatial
