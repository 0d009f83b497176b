#include <cmath>

#include "sebf/simkit.hpp"
#include "sebf/stable_math.hpp"

namespace sebf::sim {

void gauss_hermite(int n, std::vector<double>& nodes,
                   std::vector<double>& weights) {
  // Golub-Welsch for the e^{-z^2} weight.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(0.5 * i);
    j(i, i - 1) = b;
    j(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
  nodes.resize(static_cast<std::size_t>(n));
  weights.resize(static_cast<std::size_t>(n));
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = sqrt_pi * v0 * v0;
  }
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Joint density of (x_{1:T}, alpha) with beta, sigma2 and x_0 integrated
/// out analytically wherever they are free; evaluated in log space.
class ReducedJoint {
 public:
  ReducedJoint(const std::vector<spatial::ObsSlice>& y,
               const spatial::SiteSet& sites,
               const engine::CovariateSpec& covariates,
               const stats::PriorHyper& prior,
               const spatial::ObservationFamily& family, double phi,
               double nugget, const OraclePins& pins)
      : y_(y), prior_(prior), family_(family), pins_(pins),
        n_(sites.size()), T_(static_cast<int>(y.size())) {
    r_ = spatial::build_correlation(sites, phi, spatial::exponential_kernel(),
                                    nugget);
    g_.reserve(static_cast<std::size_t>(T_) + 1);
    for (int t = 0; t <= T_; ++t) g_.push_back(covariates.build(sites, t));
    if (!pins_.beta && !(prior_.q0 > 0.0))
      throw ConfigError("oracle: a free beta needs q0 > 0");
    beta_mean_ = pins_.beta ? *pins_.beta
                            : VectorXd(prior_.b0 / prior_.q0);
  }

  int dim_x() const { return n_ * T_; }
  bool alpha_free() const { return !pins_.alpha.has_value(); }
  int dim_total() const { return dim_x() + (alpha_free() ? 1 : 0); }

  /// log p(y | x_{1:T}) + log p(x_{1:T}, alpha); `v` stacks x_{1:T} then
  /// (when free) alpha.
  double log_density(const VectorXd& v) const {
    const double alpha = alpha_free() ? v(dim_x()) : *pins_.alpha;
    const int big = n_ * (T_ + 1);

    // Mean of the stacked state under the AR recursion at the prior/pinned
    // beta, and the sigma2-free covariance factor
    //   Sigma = B^{-1} (I (x) R + (1/q0) F F') B^{-T}.
    VectorXd mu(big);
    mu.head(n_) = g_[0] * beta_mean_;
    for (int t = 1; t <= T_; ++t)
      mu.segment(n_ * t, n_) =
          g_[static_cast<std::size_t>(t)] * beta_mean_ +
          alpha * (mu.segment(n_ * (t - 1), n_) -
                   g_[static_cast<std::size_t>(t - 1)] * beta_mean_);

    MatrixXd s = MatrixXd::Zero(big, big);
    for (int t = 0; t <= T_; ++t)
      s.block(n_ * t, n_ * t, n_, n_) = r_;
    if (!pins_.beta) {
      MatrixXd f(big, g_[0].cols());
      f.topRows(n_) = g_[0];
      for (int t = 1; t <= T_; ++t)
        f.middleRows(n_ * t, n_) = g_[static_cast<std::size_t>(t)] -
                                   alpha * g_[static_cast<std::size_t>(t - 1)];
      s.noalias() += f * f.transpose() / prior_.q0;
    }
    MatrixXd b = MatrixXd::Identity(big, big);
    for (int t = 1; t <= T_; ++t)
      b.block(n_ * t, n_ * (t - 1), n_, n_).diagonal().setConstant(-alpha);
    const MatrixXd z = b.triangularView<Eigen::Lower>().solve(s);
    const MatrixXd sigma_full =
        b.triangularView<Eigen::Lower>().solve(MatrixXd(z.transpose())).transpose();

    const int d = dim_x();
    const MatrixXd sigma1 = sigma_full.bottomRightCorner(d, d);
    const VectorXd mu1 = mu.tail(d);

    Eigen::LLT<MatrixXd> llt(sigma1);
    if (llt.info() != Eigen::Success)
      throw NumericalError("oracle: reduced covariance not positive definite");
    double log_det = 0.0;
    for (int i = 0; i < d; ++i)
      log_det += 2.0 * std::log(MatrixXd(llt.matrixL())(i, i));

    const VectorXd diff = v.head(d) - mu1;
    const VectorXd white = llt.matrixL().solve(diff);
    double quad = white.squaredNorm();
    const int d_alpha = alpha_free() ? 1 : 0;
    double log_p = -0.5 * (d + d_alpha) * kLog2Pi - 0.5 * log_det;
    if (alpha_free()) {
      const double da = alpha - prior_.a0 / prior_.s0;
      quad += prior_.s0 * da * da;
      log_p += 0.5 * std::log(prior_.s0);
    }
    if (pins_.sigma2) {
      const double s2 = *pins_.sigma2;
      log_p += -0.5 * (d + d_alpha) * std::log(s2) - 0.5 * quad / s2;
    } else {
      const double c1 = prior_.c0 + d + d_alpha;
      log_p += 0.5 * prior_.c0 * std::log(0.5 * prior_.r0) -
               std::lgamma(0.5 * prior_.c0) + std::lgamma(0.5 * c1) -
               0.5 * c1 * std::log(0.5 * (prior_.r0 + quad));
    }

    double log_lik = 0.0;
    for (int t = 1; t <= T_; ++t)
      log_lik += spatial::obs_loglik(y_[static_cast<std::size_t>(t - 1)],
                                     v.segment(n_ * (t - 1), n_), family_);
    return log_lik + log_p;
  }

 private:
  const std::vector<spatial::ObsSlice>& y_;
  const stats::PriorHyper& prior_;
  const spatial::ObservationFamily& family_;
  OraclePins pins_;
  int n_, T_;
  MatrixXd r_;
  std::vector<MatrixXd> g_;
  VectorXd beta_mean_;
};

VectorXd fd_gradient(const ReducedJoint& joint, const VectorXd& v) {
  const int d = static_cast<int>(v.size());
  VectorXd grad(d);
  for (int i = 0; i < d; ++i) {
    const double h = 1e-5 * (1.0 + std::abs(v(i)));
    VectorXd vp = v, vm = v;
    vp(i) += h;
    vm(i) -= h;
    grad(i) = (joint.log_density(vp) - joint.log_density(vm)) / (2.0 * h);
  }
  return grad;
}

MatrixXd fd_hessian(const ReducedJoint& joint, const VectorXd& v) {
  const int d = static_cast<int>(v.size());
  MatrixXd hess(d, d);
  const double f0 = joint.log_density(v);
  std::vector<double> h(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    h[static_cast<std::size_t>(i)] = 1e-4 * (1.0 + std::abs(v(i)));
  for (int i = 0; i < d; ++i) {
    VectorXd vp = v, vm = v;
    vp(i) += h[static_cast<std::size_t>(i)];
    vm(i) -= h[static_cast<std::size_t>(i)];
    hess(i, i) = (joint.log_density(vp) - 2.0 * f0 + joint.log_density(vm)) /
                 (h[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)]);
  }
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      VectorXd vpp = v, vpm = v, vmp = v, vmm = v;
      const double hi = h[static_cast<std::size_t>(i)];
      const double hj = h[static_cast<std::size_t>(j)];
      vpp(i) += hi; vpp(j) += hj;
      vpm(i) += hi; vpm(j) -= hj;
      vmp(i) -= hi; vmp(j) += hj;
      vmm(i) -= hi; vmm(j) -= hj;
      hess(i, j) = (joint.log_density(vpp) - joint.log_density(vpm) -
                    joint.log_density(vmp) + joint.log_density(vmm)) /
                   (4.0 * hi * hj);
      hess(j, i) = hess(i, j);
    }
  return hess;
}

}  // namespace

double oracle_marginal_loglik(const std::vector<spatial::ObsSlice>& y,
                              const spatial::SiteSet& sites,
                              const engine::CovariateSpec& covariates,
                              const stats::PriorHyper& prior,
                              const spatial::ObservationFamily& family,
                              double phi, double nugget,
                              const QuadratureSpec& spec,
                              const OraclePins& pins) {
  if (y.empty()) return 0.0;  // empty product: marginal likelihood is 1
  bool any_observed = false;
  for (const auto& slice : y)
    for (bool o : slice.observed) any_observed |= o;

  ReducedJoint joint(y, sites, covariates, prior, family, phi, nugget, pins);
  const int d = joint.dim_total();
  if (d > spec.max_dims)
    throw ConfigError("oracle: " + std::to_string(d) +
                      " quadrature dimensions exceed the guard of " +
                      std::to_string(spec.max_dims));
  if (!any_observed) return 0.0;

  // Laplace centering: damped Newton with finite-difference derivatives.
  VectorXd v = VectorXd::Zero(d);
  for (int t = 1; t <= static_cast<int>(y.size()); ++t) {
    const auto& slice = y[static_cast<std::size_t>(t - 1)];
    for (int i = 0; i < sites.size(); ++i) {
      const int idx = sites.size() * (t - 1) + i;
      if (slice.observed[static_cast<std::size_t>(i)] &&
          family.name() == "poisson")
        v(idx) = std::log((slice.y(i) + 0.5) / slice.tau(i));
      else if (slice.observed[static_cast<std::size_t>(i)])
        v(idx) = slice.y(i);
    }
  }
  if (joint.alpha_free())
    v(joint.dim_x()) = prior.s0 > 0.0 ? prior.a0 / prior.s0 : 0.0;

  double fv = joint.log_density(v);
  for (int iter = 0; iter < 200; ++iter) {
    const VectorXd grad = fd_gradient(joint, v);
    if (grad.lpNorm<Eigen::Infinity>() < 1e-7) break;
    MatrixXd neg_hess = -fd_hessian(joint, v);
    Eigen::LLT<MatrixXd> llt(neg_hess);
    double ridge = 1e-8;
    while (llt.info() != Eigen::Success && ridge < 1e8) {
      MatrixXd h = neg_hess;
      h.diagonal().array() += ridge;
      llt.compute(h);
      ridge *= 10.0;
    }
    if (llt.info() != Eigen::Success)
      throw NumericalError("oracle: Laplace Hessian is singular");
    const VectorXd step = llt.solve(grad);
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half) {
      const VectorXd cand = v + scale * step;
      const double fc = joint.log_density(cand);
      if (std::isfinite(fc) && fc > fv) {
        v = cand;
        fv = fc;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved) break;
  }

  MatrixXd neg_hess = -fd_hessian(joint, v);
  Eigen::LLT<MatrixXd> llt(neg_hess);
  double ridge = 1e-10;
  while (llt.info() != Eigen::Success && ridge < 1e6) {
    MatrixXd h = neg_hess;
    h.diagonal().array() += ridge;
    llt.compute(h);
    ridge *= 10.0;
  }
  if (llt.info() != Eigen::Success)
    throw NumericalError("oracle: curvature at the mode is singular");
  // C = chol(H^{-1}) via the inverse transpose of chol(H).
  const MatrixXd lh = llt.matrixL();
  const MatrixXd c = lh.transpose()
                         .triangularView<Eigen::Upper>()
                         .solve(MatrixXd::Identity(d, d));
  double log_det_c = 0.0;
  for (int i = 0; i < d; ++i) log_det_c += std::log(c(i, i));

  std::vector<double> nodes, weights;
  gauss_hermite(spec.nodes_per_dim, nodes, weights);
  std::vector<double> log_w(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) log_w[i] = std::log(weights[i]);

  // Tensor-product sweep in log space.
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::vector<double> terms;
  terms.reserve(1 << 16);
  VectorXd z(d), point(d);
  const double sqrt2 = std::sqrt(2.0);
  for (;;) {
    double log_weight = 0.0, z2 = 0.0;
    for (int i = 0; i < d; ++i) {
      const int ii = idx[static_cast<std::size_t>(i)];
      z(i) = nodes[static_cast<std::size_t>(ii)];
      log_weight += log_w[static_cast<std::size_t>(ii)];
      z2 += z(i) * z(i);
    }
    point = v + sqrt2 * (c * z);
    const double lh_val = joint.log_density(point);
    if (std::isfinite(lh_val)) terms.push_back(lh_val + z2 + log_weight);

    int pos = 0;
    while (pos < d) {
      if (++idx[static_cast<std::size_t>(pos)] < spec.nodes_per_dim) break;
      idx[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == d) break;
  }
  return log_sum_exp(terms) + 0.5 * d * std::log(2.0) + log_det_c;
}

}  // namespace sebf::sim
