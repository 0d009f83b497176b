#include "sebf/suffstats.hpp"

#include <cmath>

namespace sebf::stats {

void PriorHyper::validate(int m) const {
  if (!(s0 >= 0.0)) throw ConfigError("prior: s0 must be >= 0");
  if (!(q0 >= 0.0)) throw ConfigError("prior: q0 must be >= 0");
  if (!(c0 > 0.0)) throw ConfigError("prior: c0 must be > 0");
  if (!(r0 > 0.0)) throw ConfigError("prior: r0 must be > 0");
  if (b0.size() != m)
    throw ConfigError("prior: b0 must have one entry per covariate");
}

TemporalSuffStats TemporalSuffStats::init(const Eigen::MatrixXd& wg0,
                                          const Eigen::VectorXd& wx0,
                                          double phi) {
  const int m = static_cast<int>(wg0.cols());
  if (m > kMaxCovariates)
    throw ConfigError("TemporalSuffStats: more covariates than supported");
  if (wg0.rows() != wx0.size())
    throw ContractViolation("TemporalSuffStats::init: dimension mismatch");

  TemporalSuffStats s;
  s.t_ = 0;
  s.phi_ = phi;
  s.g0_g0_ = wg0.transpose() * wg0;
  s.g0_x0_ = wg0.transpose() * wx0;
  s.x0_x0_ = wx0.squaredNorm();
  const SmallMat zm = SmallMat::Zero(m, m);
  const SmallVec zv = SmallVec::Zero(m);
  s.gg_cur_ = {zm, zm};
  s.gg_cross_ = {zm, zm};
  s.gg_prev_ = {zm, zm};
  s.gx_cur_ = {zv, zv};
  s.gx_cur_prev_ = {zv, zv};
  s.gx_prev_cur_ = {zv, zv};
  s.gx_prev_prev_ = {zv, zv};
  return s;
}

void TemporalSuffStats::update(const Eigen::MatrixXd& wg_cur,
                               const Eigen::MatrixXd& wg_prev,
                               const Eigen::VectorXd& wx_cur,
                               const Eigen::VectorXd& wx_prev, double phi) {
  check_phi(phi);
  gg_cur_.add(wg_cur.transpose() * wg_cur);
  gg_cross_.add(wg_cur.transpose() * wg_prev);
  gg_prev_.add(wg_prev.transpose() * wg_prev);
  gx_cur_.add(wg_cur.transpose() * wx_cur);
  gx_cur_prev_.add(wg_cur.transpose() * wx_prev);
  gx_prev_cur_.add(wg_prev.transpose() * wx_cur);
  gx_prev_prev_.add(wg_prev.transpose() * wx_prev);
  xx_cur_.add(wx_cur.squaredNorm());
  xx_cross_.add(wx_cur.dot(wx_prev));
  xx_prev_.add(wx_prev.squaredNorm());
  ++t_;
}

double TemporalSuffStats::state_ssr(double alpha, const SmallVec& beta) const {
  // time-0 term
  double ssr = x0_x0_ - 2.0 * beta.dot(g0_x0_) + beta.dot(g0_g0_ * beta);
  // sum_s w_s' Rinv w_s
  const double cur =
      xx_cur_.value - 2.0 * beta.dot(gx_cur_.value) + beta.dot(gg_cur_.value * beta);
  // sum_s w_s' Rinv w_{s-1} (= the transposed sum, scalar)
  const double cross = xx_cross_.value - beta.dot(gx_prev_cur_.value) -
                       beta.dot(gx_cur_prev_.value) +
                       beta.dot(gg_cross_.value * beta);
  // sum_s w_{s-1}' Rinv w_{s-1}
  const double prev = xx_prev_.value - 2.0 * beta.dot(gx_prev_prev_.value) +
                      beta.dot(gg_prev_.value * beta);
  ssr += cur - 2.0 * alpha * cross + alpha * alpha * prev;
  return ssr;
}

std::size_t TemporalSuffStats::byte_size() const {
  const std::size_t md = static_cast<std::size_t>(m());
  return sizeof(int) + sizeof(double) * (2 + md * md + md) +
         sizeof(double) * 2 * (3 * md * md + 4 * md + 3);
}

GaussianPosterior beta_full_conditional(const TemporalSuffStats& u, double alpha,
                                        const PriorHyper& prior) {
  const int m = u.m();
  GaussianPosterior post;
  post.precision = prior.q0 * SmallMat::Identity(m, m) + u.g0_g0() +
                   u.gg_cur() - alpha * (u.gg_cross() + u.gg_cross().transpose()) +
                   alpha * alpha * u.gg_prev();
  const SmallVec b = prior.b0 + u.g0_x0() + u.gx_cur() - alpha * u.gx_cur_prev() -
                     alpha * u.gx_prev_cur() + alpha * alpha * u.gx_prev_prev();
  Eigen::LLT<SmallMat> llt(post.precision);
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        "beta_full_conditional: Q_t not positive definite (degenerate "
        "covariates with q0 = 0?)");
  post.mean = llt.solve(b);
  return post;
}

ScalarGaussianPosterior alpha_full_conditional(const TemporalSuffStats& u,
                                               const SmallVec& beta,
                                               const PriorHyper& prior) {
  // w_{s-1}' Rinv w_{s-1} and w_{s-1}' Rinv w_s sums, w_s = x_s - G_s beta.
  const double prev = u.xx_prev() - 2.0 * beta.dot(u.gx_prev_prev()) +
                      beta.dot(u.gg_prev() * beta);
  const double cross = u.xx_cross() - beta.dot(u.gx_prev_cur()) -
                       beta.dot(u.gx_cur_prev()) +
                       beta.dot(u.gg_cross() * beta);
  ScalarGaussianPosterior post;
  post.precision = prior.s0 + prev;
  if (!(post.precision > 0.0))
    throw NumericalError(
        "alpha_full_conditional: zero precision (s0 = 0 with degenerate "
        "state history)");
  post.mean = (prior.a0 + cross) / post.precision;
  return post;
}

InverseGammaPosterior sigma2_full_conditional(const TemporalSuffStats& u,
                                              double alpha, const SmallVec& beta,
                                              const PriorHyper& prior, int n) {
  const int m = u.m();
  double ssr = u.state_ssr(alpha, beta);
  // beta-prior residual (sigma2-scaled): (beta - Q0^{-1} b0)' Q0 (...).
  if (prior.q0 > 0.0) {
    const SmallVec prior_mean = prior.b0 / prior.q0;
    ssr += prior.q0 * (beta - prior_mean).squaredNorm();
  }
  // alpha-prior residual.
  if (prior.s0 > 0.0) {
    const double d = alpha - prior.a0 / prior.s0;
    ssr += prior.s0 * d * d;
  }
  InverseGammaPosterior post;
  post.shape = 0.5 * (prior.c0 + static_cast<double>(u.t() + 1) * n + m + 1);
  post.rate = 0.5 * (prior.r0 + ssr);
  if (!(post.rate > 0.0))
    throw NumericalError(
        "sigma2_full_conditional: nonpositive rate; sufficient statistics "
        "are numerically inconsistent");
  return post;
}

Theta gibbs_sweep(const TemporalSuffStats& u, const Theta& init,
                  const PriorHyper& prior, int n, int n_iter, Rng& rng) {
  if (n_iter < 1) throw ConfigError("gibbs_sweep: n_iter must be >= 1");
  Theta th = init;
  const int m = u.m();
  for (int it = 0; it < n_iter; ++it) {
    // beta | alpha, sigma2
    const auto bpost = beta_full_conditional(u, th.alpha, prior);
    Eigen::LLT<SmallMat> llt(bpost.precision);
    SmallVec z(m);
    for (int j = 0; j < m; ++j) z(j) = rng.normal();
    th.beta = bpost.mean +
              std::sqrt(th.sigma2) *
                  llt.matrixU().solve(z);
    // alpha | beta, sigma2
    const auto apost = alpha_full_conditional(u, th.beta, prior);
    th.alpha = apost.mean + std::sqrt(th.sigma2 / apost.precision) * rng.normal();
    // sigma2 | alpha, beta
    const auto spost = sigma2_full_conditional(u, th.alpha, th.beta, prior, n);
    th.sigma2 = rng.inverse_gamma(spost.shape, spost.rate);
  }
  return th;
}

double joint_state_loglik(const TemporalSuffStats& z, const Theta& theta,
                          double log_det_r, int n) {
  if (!(theta.sigma2 > 0.0))
    throw std::domain_error("joint_state_loglik: sigma2 must be > 0");
  const double tp1 = static_cast<double>(z.t() + 1);
  const double ssr = z.state_ssr(theta.alpha, theta.beta);
  return -0.5 * tp1 * n * (kLog2Pi + std::log(theta.sigma2)) -
         0.5 * tp1 * log_det_r - 0.5 * ssr / theta.sigma2;
}

Theta sample_prior(const PriorHyper& prior, int m, Rng& rng) {
  Theta th;
  th.sigma2 = rng.inverse_gamma(0.5 * prior.c0, 0.5 * prior.r0);
  const double sigma = std::sqrt(th.sigma2);
  th.beta.resize(m);
  if (prior.q0 > 0.0) {
    for (int j = 0; j < m; ++j)
      th.beta(j) = prior.b0(j) / prior.q0 + sigma / std::sqrt(prior.q0) * rng.normal();
  } else {
    th.beta = SmallVec::Zero(m);
  }
  th.alpha = prior.s0 > 0.0
                 ? prior.a0 / prior.s0 + sigma / std::sqrt(prior.s0) * rng.normal()
                 : 0.0;
  return th;
}

}  // namespace sebf::stats
