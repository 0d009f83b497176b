#include "sebf/spatial.hpp"

#include <cmath>
#include <sstream>

#include "sebf/stable_math.hpp"

namespace sebf::spatial {

// --- SiteSet ---------------------------------------------------------------

SiteSet::SiteSet(MatrixXd coordinates) : coords_(std::move(coordinates)) {
  if (coords_.rows() < 1 || coords_.cols() < 1 || coords_.cols() > 3)
    throw ConfigError("SiteSet: coordinates must be n x d with d in {1,2,3}");
  const int n = size();
  dist_.resize(n, n);
  dist_.setZero();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (coords_.row(i) - coords_.row(j)).norm();
      dist_(i, j) = d;
      dist_(j, i) = d;
      if (d == 0.0) coincident_ = true;
    }
  }
}

SiteSet SiteSet::joined_with(const SiteSet& other) const {
  if (other.dim() != dim())
    throw ConfigError("SiteSet: joined sites must have the same dimension");
  MatrixXd all(size() + other.size(), dim());
  all.topRows(size()) = coords_;
  all.bottomRows(other.size()) = other.coords_;
  return SiteSet(std::move(all));
}

// --- kernels ----------------------------------------------------------------

const CorrelationKernel& exponential_kernel() {
  static const ExponentialKernel k;
  return k;
}

MatrixXd build_correlation(const SiteSet& sites, double phi,
                           const CorrelationKernel& kernel, double nugget) {
  if (!(phi > 0.0))
    throw std::domain_error("build_correlation: range must be > 0, got " +
                            std::to_string(phi));
  if (nugget < 0.0)
    throw std::domain_error("build_correlation: nugget must be >= 0");
  if (sites.has_coincident_sites() && nugget == 0.0)
    throw NumericalError(
        "build_correlation: coincident sites make R(phi) singular; "
        "set a positive kernel nugget to proceed");
  const int n = sites.size();
  const MatrixXd& d = sites.distances();
  MatrixXd r(n, n);
  const double scale = 1.0 / (1.0 + nugget);
  for (int i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double v = kernel.value(d(i, j), phi) * scale;
      r(i, j) = v;
      r(j, i) = v;
    }
  }
  return r;
}

// --- factorization ------------------------------------------------------------

GaussianFactorization GaussianFactorization::factorize(const MatrixXd& R,
                                                       double phi) {
  const int n = static_cast<int>(R.rows());
  if (R.cols() != n) throw ContractViolation("factorize: matrix not square");
  if (!R.isApprox(R.transpose(), 1e-12))
    throw ContractViolation("factorize: matrix not symmetric");

  MatrixXd lower = MatrixXd::Zero(n, n);
  double log_det = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = R(j, j) - lower.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      std::ostringstream msg;
      msg << "factorize: matrix not positive definite at pivot " << (j + 1)
          << " of " << n;
      throw NotPositiveDefinite(j + 1, msg.str());
    }
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    log_det += 2.0 * std::log(ljj);
    for (int i = j + 1; i < n; ++i)
      lower(i, j) = (R(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j))) / ljj;
  }
  return GaussianFactorization(std::move(lower), log_det, phi);
}

MatrixXd GaussianFactorization::half_solve(const MatrixXd& v) const {
  return lower_.triangularView<Eigen::Lower>().solve(v);
}

MatrixXd GaussianFactorization::full_solve(const MatrixXd& v) const {
  MatrixXd w = lower_.triangularView<Eigen::Lower>().solve(v);
  return lower_.transpose().triangularView<Eigen::Upper>().solve(w);
}

double GaussianFactorization::quad_form(const VectorXd& v) const {
  return half_solve(v).squaredNorm();
}

double mvn_logpdf(const VectorXd& x, const VectorXd& mean, double sigma2,
                  const GaussianFactorization& fac) {
  const int n = fac.size();
  if (x.size() != n || mean.size() != n)
    throw ContractViolation("mvn_logpdf: dimension mismatch");
  if (!(sigma2 > 0.0))
    throw std::domain_error("mvn_logpdf: sigma2 must be > 0");
  const double quad = fac.quad_form(x - mean);
  return -0.5 * n * (kLog2Pi + std::log(sigma2)) - 0.5 * fac.log_det() -
         0.5 * quad / sigma2;
}

VectorXd mvn_sample(const VectorXd& mean, double sigma2,
                    const GaussianFactorization& fac, Rng& rng) {
  const int n = fac.size();
  if (mean.size() != n) throw ContractViolation("mvn_sample: dimension mismatch");
  if (sigma2 < 0.0) throw std::domain_error("mvn_sample: sigma2 must be >= 0");
  if (sigma2 == 0.0) return mean;
  VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();
  return mean + std::sqrt(sigma2) *
                    (fac.lower().triangularView<Eigen::Lower>() * z);
}

// --- observation families ------------------------------------------------------

double PoissonFamily::log_lik(double y, double tau, double x) const {
  return y * x - tau * std::exp(x) + y * std::log(tau) - std::lgamma(y + 1.0);
}
double PoissonFamily::d1(double y, double tau, double x) const {
  return y - tau * std::exp(x);
}
double PoissonFamily::d2(double, double tau, double x) const {
  return -tau * std::exp(x);
}
double PoissonFamily::d3(double, double tau, double x) const {
  return -tau * std::exp(x);
}
double PoissonFamily::sample(double tau, double x, Rng& rng) const {
  return static_cast<double>(rng.poisson(tau * std::exp(x)));
}
void PoissonFamily::validate(double y) const {
  if (!(y >= 0.0) || y != std::floor(y))
    throw DataError("poisson observations must be nonnegative integers, got " +
                    std::to_string(y));
}

double GaussianFamily::log_lik(double y, double tau, double x) const {
  const double r = y - x;
  return -0.5 * tau * r * r + 0.5 * (std::log(tau) - kLog2Pi);
}
double GaussianFamily::d1(double y, double tau, double x) const {
  return tau * (y - x);
}
double GaussianFamily::d2(double, double tau, double) const { return -tau; }
double GaussianFamily::sample(double tau, double x, Rng& rng) const {
  return x + rng.normal() / std::sqrt(tau);
}
void GaussianFamily::validate(double y) const {
  if (!std::isfinite(y)) throw DataError("gaussian observation is not finite");
}

const ObservationFamily& family_by_name(const std::string& name) {
  static const PoissonFamily poisson;
  static const GaussianFamily gaussian;
  if (name == "poisson") return poisson;
  if (name == "gaussian") return gaussian;
  throw ConfigError("unknown observation family '" + name + "'");
}

ObsSlice ObsSlice::all_observed(VectorXd y_, VectorXd tau_) {
  ObsSlice s;
  s.y = std::move(y_);
  s.tau = std::move(tau_);
  s.observed.assign(static_cast<std::size_t>(s.y.size()), true);
  if (s.tau.size() != s.y.size())
    throw ContractViolation("ObsSlice: y/tau size mismatch");
  return s;
}

ObsSlice ObsSlice::all_missing(int n) {
  ObsSlice s;
  s.y = VectorXd::Zero(n);
  s.tau = VectorXd::Ones(n);
  s.observed.assign(static_cast<std::size_t>(n), false);
  return s;
}

double obs_loglik(const ObsSlice& obs, const VectorXd& x,
                  const ObservationFamily& family) {
  const int n = obs.n();
  if (x.size() != n || static_cast<int>(obs.observed.size()) != n)
    throw ContractViolation("obs_loglik: dimension mismatch");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!obs.observed[static_cast<std::size_t>(i)]) continue;
    family.validate(obs.y(i));
    if (!(obs.tau(i) > 0.0))
      throw DataError("obs_loglik: exposure must be > 0 where observed");
    total += family.log_lik(obs.y(i), obs.tau(i), x(i));
  }
  return total;
}

// --- conditional prediction -----------------------------------------------------

namespace {
MatrixXd cross_correlation(const SiteSet& monitored, const SiteSet& targets,
                           double phi, const CorrelationKernel& kernel,
                           double nugget) {
  const double scale = 1.0 / (1.0 + nugget);
  MatrixXd k12(monitored.size(), targets.size());
  for (int i = 0; i < monitored.size(); ++i)
    for (int j = 0; j < targets.size(); ++j) {
      const double d =
          (monitored.coordinates().row(i) - targets.coordinates().row(j)).norm();
      k12(i, j) = kernel.value(d, phi) * scale;
    }
  return k12;
}
}  // namespace

KrigingSystem build_kriging(const SiteSet& monitored, const SiteSet& targets,
                            double phi, const CorrelationKernel& kernel,
                            double nugget) {
  const MatrixXd r11 = build_correlation(monitored, phi, kernel, nugget);
  const auto fac = GaussianFactorization::factorize(r11, phi);
  const MatrixXd k12 = cross_correlation(monitored, targets, phi, kernel, nugget);
  const MatrixXd white = fac.half_solve(k12);  // L^{-1} R12
  KrigingSystem sys;
  sys.weights = fac.full_solve(k12).transpose();
  sys.cond_var_unit.resize(targets.size());
  for (int j = 0; j < targets.size(); ++j)
    sys.cond_var_unit(j) = std::max(0.0, 1.0 - white.col(j).squaredNorm());
  return sys;
}

VectorXd predict_unmonitored(const VectorXd& x_t, const VectorXd& mean_monitored,
                             const VectorXd& mean_targets, double sigma2,
                             const SiteSet& monitored, const SiteSet& targets,
                             double phi, Rng& rng,
                             const CorrelationKernel& kernel, double nugget) {
  if (x_t.size() != monitored.size() || mean_monitored.size() != monitored.size() ||
      mean_targets.size() != targets.size())
    throw ContractViolation("predict_unmonitored: dimension mismatch");

  const MatrixXd r11 = build_correlation(monitored, phi, kernel, nugget);
  const auto fac = GaussianFactorization::factorize(r11, phi);
  const MatrixXd k12 = cross_correlation(monitored, targets, phi, kernel, nugget);
  const MatrixXd r22 = build_correlation(targets, phi, kernel, nugget);
  const MatrixXd white = fac.half_solve(k12);

  const VectorXd cond_mean =
      mean_targets + k12.transpose() * fac.full_solve(x_t - mean_monitored);
  MatrixXd cond_cov = r22 - white.transpose() * white;

  // A target coincident with a monitored site has conditional variance 0;
  // sample through the eigendecomposition with negative roundoff clamped.
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cond_cov);
  VectorXd z(targets.size());
  for (int i = 0; i < targets.size(); ++i) z(i) = rng.normal();
  VectorXd scaled = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z;
  return cond_mean + std::sqrt(sigma2) * (eig.eigenvectors() * scaled);
}

}  // namespace sebf::spatial
