#include "sebf/proposal.hpp"

#include <algorithm>
#include <cmath>

#include "sebf/stable_math.hpp"

namespace sebf::proposal {

CorrectionMode correction_mode_by_name(const std::string& name) {
  if (name == "gaussian") return CorrectionMode::kGaussian;
  if (name == "mean_only") return CorrectionMode::kMeanOnly;
  if (name == "mean_skew") return CorrectionMode::kMeanSkew;
  throw ConfigError("unknown proposal mode '" + name +
                    "' (expected gaussian | mean_only | mean_skew)");
}

std::string correction_mode_name(CorrectionMode mode) {
  switch (mode) {
    case CorrectionMode::kGaussian: return "gaussian";
    case CorrectionMode::kMeanOnly: return "mean_only";
    case CorrectionMode::kMeanSkew: return "mean_skew";
  }
  return "?";
}

double ProposalFit::gaussian_logpdf(const VectorXd& x) const {
  const int n = static_cast<int>(mode.size());
  const VectorXd diff = x - center();
  const VectorXd w = lm_.transpose() *
                     fac->lower().triangularView<Eigen::Lower>().solve(diff);
  return 0.5 * log_det_h_ - 0.5 * n * kLog2Pi - 0.5 * w.squaredNorm();
}

VectorXd ProposalFit::gaussian_sample(Rng& rng) const {
  const int n = static_cast<int>(mode.size());
  VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = rng.normal();
  const VectorXd u = lm_.transpose().triangularView<Eigen::Upper>().solve(z);
  return center() + fac->lower().triangularView<Eigen::Lower>() * u;
}

ProposalFit fit_mode(const spatial::ObsSlice& obs, const VectorXd& mu,
                     double sigma2, const spatial::GaussianFactorization& fac,
                     const spatial::ObservationFamily& family,
                     const NewtonOptions& opts) {
  const int n = fac.size();
  if (mu.size() != n || obs.n() != n)
    throw ContractViolation("fit_mode: dimension mismatch");
  if (!(sigma2 > 0.0)) throw std::domain_error("fit_mode: sigma2 must be > 0");
  const double c = 1.0 / sigma2;
  const auto& lower = fac.lower();

  const auto neg_loglik = [&](const VectorXd& x) {
    double v = 0.0;
    for (int i = 0; i < n; ++i)
      if (obs.observed[static_cast<std::size_t>(i)])
        v -= family.log_lik(obs.y(i), obs.tau(i), x(i));
    return v;
  };
  const auto objective = [&](const VectorXd& x) {
    return neg_loglik(x) + 0.5 * c * fac.quad_form(x - mu);
  };

  VectorXd x = mu;
  double fx = objective(x);
  VectorXd grad(n), d(n);
  MatrixXd m_mat(n, n), lm(n, n);

  bool converged = false;
  for (int iter = 0; iter < opts.max_iter && !converged; ++iter) {
    // gradient and Hessian diagonal of the data term
    for (int i = 0; i < n; ++i) {
      const bool seen = obs.observed[static_cast<std::size_t>(i)];
      grad(i) = seen ? -family.d1(obs.y(i), obs.tau(i), x(i)) : 0.0;
      d(i) = seen ? -family.d2(obs.y(i), obs.tau(i), x(i)) : 0.0;
    }
    grad += c * fac.full_solve(x - mu);
    if (grad.lpNorm<Eigen::Infinity>() < opts.tol) {
      converged = true;
      break;
    }

    // M = L' D L + c I, H = L^{-T} M L^{-1}
    m_mat.noalias() = lower.transpose() * d.asDiagonal() * lower;
    m_mat.diagonal().array() += c;
    Eigen::LLT<MatrixXd> llt(m_mat);
    if (llt.info() != Eigen::Success)
      throw ModeFitError(x, "fit_mode: Hessian factorization failed");
    // Newton direction: delta = -H^{-1} grad = -L M^{-1} L' grad
    const VectorXd step = -(lower * llt.solve(lower.transpose() * grad));

    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= opts.max_halvings; ++h) {
      const VectorXd cand = x + scale * step;
      const double fc = objective(cand);
      if (std::isfinite(fc) && fc < fx) {
        x = cand;
        fx = fc;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      // Stalled line search at a nearly stationary point counts as converged
      // only if the gradient test above would pass next round; otherwise fail.
      throw ModeFitError(x, "fit_mode: no decrease after max halvings");
    }
  }
  if (!converged) {
    // one last gradient check after the final step
    for (int i = 0; i < n; ++i) {
      const bool seen = obs.observed[static_cast<std::size_t>(i)];
      grad(i) = seen ? -family.d1(obs.y(i), obs.tau(i), x(i)) : 0.0;
    }
    grad += c * fac.full_solve(x - mu);
    if (grad.lpNorm<Eigen::Infinity>() >= opts.tol)
      throw ModeFitError(x, "fit_mode: Newton did not converge in " +
                                std::to_string(opts.max_iter) + " iterations");
  }

  // Final curvature at the mode.
  for (int i = 0; i < n; ++i)
    d(i) = obs.observed[static_cast<std::size_t>(i)]
               ? -family.d2(obs.y(i), obs.tau(i), x(i))
               : 0.0;
  m_mat.noalias() = lower.transpose() * d.asDiagonal() * lower;
  m_mat.diagonal().array() += c;
  Eigen::LLT<MatrixXd> llt(m_mat);
  if (llt.info() != Eigen::Success)
    throw ModeFitError(x, "fit_mode: Hessian not positive definite at mode");

  ProposalFit fit;
  fit.mode = x;
  fit.fac = &fac;
  fit.lm_ = llt.matrixL();
  double log_det_m = 0.0;
  for (int i = 0; i < n; ++i) log_det_m += 2.0 * std::log(fit.lm_(i, i));
  fit.log_det_h_ = log_det_m - fac.log_det();
  fit.shift = VectorXd::Zero(n);

  // Marginal sds: diag(H^{-1}) = diag(L M^{-1} L'), column norms of Lm^{-1} L'.
  const MatrixXd b = fit.lm_.triangularView<Eigen::Lower>().solve(
      MatrixXd(lower.transpose()));
  fit.marg_sd.resize(n);
  for (int i = 0; i < n; ++i) fit.marg_sd(i) = b.col(i).norm();
  return fit;
}

void fit_skew_marginals(ProposalFit& fit, const spatial::ObsSlice& obs,
                        const spatial::ObservationFamily& family,
                        CorrectionMode mode) {
  const int n = static_cast<int>(fit.mode.size());
  fit.mode_kind = mode;
  fit.shift = VectorXd::Zero(n);
  fit.marginals.clear();
  fit.mean_delta2 = 0.0;
  fit.max_delta2 = 0.0;
  if (mode == CorrectionMode::kGaussian) return;

  fit.marginals.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double s = fit.marg_sd(i);
    // Third derivative of the negative log target; the Gaussian prior term
    // contributes nothing.
    const double f3 = obs.observed[static_cast<std::size_t>(i)]
                          ? -family.d3(obs.y(i), obs.tau(i), fit.mode(i))
                          : 0.0;
    const double eta3 = f3 * s * s * s;
    const double target_mean = fit.mode(i) - 0.5 * eta3 * s;
    const double target_skew = -eta3;
    auto& sn = fit.marginals[static_cast<std::size_t>(i)];
    sn = fit_skew_normal_by_moments(target_mean, s * s, target_skew);
    const double d2 = sn.delta() * sn.delta();
    fit.mean_delta2 += d2 / n;
    fit.max_delta2 = std::max(fit.max_delta2, d2);
    if (mode == CorrectionMode::kMeanOnly) fit.shift(i) = sn.mean() - fit.mode(i);
  }
}

std::vector<VectorXd> sample_proposal(const ProposalFit& fit, int n_particles,
                                      Rng& rng) {
  if (n_particles < 1)
    throw ConfigError("sample_proposal: need at least one particle");
  std::vector<VectorXd> out;
  out.reserve(static_cast<std::size_t>(n_particles));
  const int n = static_cast<int>(fit.mode.size());
  for (int p = 0; p < n_particles; ++p) {
    VectorXd x = fit.gaussian_sample(rng);
    if (fit.mode_kind == CorrectionMode::kMeanSkew) {
      for (int i = 0; i < n; ++i) {
        const auto& sn = fit.marginals[static_cast<std::size_t>(i)];
        if (sn.a == 0.0) continue;
        const double u = normal_cdf((x(i) - fit.mode(i)) / fit.marg_sd(i));
        x(i) = sn.quantile(std::clamp(u, 1e-300, 1.0 - 1e-16));
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

double proposal_logpdf(const ProposalFit& fit, const VectorXd& x) {
  if (fit.mode_kind != CorrectionMode::kMeanSkew) return fit.gaussian_logpdf(x);

  const int n = static_cast<int>(fit.mode.size());
  VectorXd pre(n);
  double jac = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& sn = fit.marginals[static_cast<std::size_t>(i)];
    const double m = fit.mode(i), s = fit.marg_sd(i);
    if (sn.a == 0.0) {
      pre(i) = x(i);
      continue;
    }
    const double u = std::clamp(sn.cdf(x(i)), 1e-300, 1.0 - 1e-16);
    const double z = normal_quantile(u);
    pre(i) = m + s * z;
    jac += sn.logpdf(x(i)) - (normal_logpdf(z) - std::log(s));
  }
  return fit.gaussian_logpdf(pre) + jac;
}

ResampleResult weigh_and_resample(const std::vector<VectorXd>& particles,
                                  const spatial::ObsSlice& obs,
                                  const VectorXd& mu, double sigma2,
                                  const spatial::GaussianFactorization& fac,
                                  const spatial::ObservationFamily& family,
                                  const ProposalFit& fit, Rng& rng) {
  const int np = static_cast<int>(particles.size());
  if (np < 1) throw ContractViolation("weigh_and_resample: no particles");
  std::vector<double> logw(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) {
    const VectorXd& x = particles[static_cast<std::size_t>(i)];
    logw[static_cast<std::size_t>(i)] = spatial::obs_loglik(obs, x, family) +
                                        spatial::mvn_logpdf(x, mu, sigma2, fac) -
                                        proposal_logpdf(fit, x);
  }
  const double lse = log_sum_exp(logw);
  if (!std::isfinite(lse))
    throw NumericalError(
        "weigh_and_resample: all importance weights vanished (degenerate "
        "proposal)");
  double sumsq = 0.0;
  for (double& lw : logw) {
    lw = std::exp(lw - lse);  // normalized weight from here on
    sumsq += lw * lw;
  }
  const double ess = 1.0 / sumsq;

  const double u = rng.uniform();
  double cum = 0.0;
  int pick = np - 1;
  for (int i = 0; i < np; ++i) {
    cum += logw[static_cast<std::size_t>(i)];
    if (u <= cum) {
      pick = i;
      break;
    }
  }
  return {particles[static_cast<std::size_t>(pick)], ess, pick};
}

}  // namespace sebf::proposal
