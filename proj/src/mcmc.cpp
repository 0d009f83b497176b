#include "sebf/mcmc.hpp"

#include <algorithm>
#include <cmath>

#include "sebf/stable_math.hpp"

namespace sebf::mcmc {

void McmcConfig::validate() const {
  if (burn_in < 0 || thinning < 0 || final_size < 1)
    throw ConfigError("mcmc: burn_in/thinning must be >= 0, final_size >= 1");
  if (!(phi_prior_mean > 0.0))
    throw ConfigError("mcmc: phi prior mean must be > 0");
  if (!(accept_lo > 0.0 && accept_hi < 1.0 && accept_lo < accept_hi))
    throw ConfigError("mcmc: acceptance band must satisfy 0 < lo < hi < 1");
  if (phi_proposals_per_sweep < 1)
    throw ConfigError("mcmc: phi_proposals_per_sweep must be >= 1");
}

double McmcSamples::mean_alpha() const {
  double s = 0.0;
  for (double v : alpha) s += v;
  return s / static_cast<double>(alpha.size());
}
double McmcSamples::mean_sigma2() const {
  double s = 0.0;
  for (double v : sigma2) s += v;
  return s / static_cast<double>(sigma2.size());
}
double McmcSamples::mean_phi() const {
  double s = 0.0;
  for (double v : phi) s += v;
  return s / static_cast<double>(phi.size());
}
VectorXd McmcSamples::mean_beta() const { return beta.colwise().mean(); }

std::pair<double, double> McmcSamples::interval(const std::vector<double>& v,
                                                double level) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const double lo_q = 0.5 * (1.0 - level);
  const auto at = [&](double q) {
    const double pos = q * (static_cast<double>(s.size()) - 1.0);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 >= s.size()) return s.back();
    return s[i] * (1.0 - frac) + s[i + 1] * frac;
  };
  return {at(lo_q), at(1.0 - lo_q)};
}

double McmcSamples::phi_mode(const std::vector<double>& grid) const {
  // Silverman bandwidth over the phi draws.
  const double n = static_cast<double>(phi.size());
  const double mean = mean_phi();
  double var = 0.0;
  for (double v : phi) var += (v - mean) * (v - mean);
  var /= std::max(1.0, n - 1.0);
  const double bw = std::max(1e-6, 1.06 * std::sqrt(var) * std::pow(n, -0.2));
  double best = grid.front(), best_density = -1.0;
  for (double g : grid) {
    double d = 0.0;
    for (double v : phi) d += normal_pdf((g - v) / bw);
    if (d > best_density) {
      best_density = d;
      best = g;
    }
  }
  return best;
}

namespace {

struct PhiWork {
  spatial::GaussianFactorization fac;
  MatrixXd precision;  // R^{-1}, assembled by triangular solves
};

PhiWork make_phi_work(const spatial::SiteSet& sites, double phi, double nugget) {
  auto fac = spatial::GaussianFactorization::factorize(
      spatial::build_correlation(sites, phi, spatial::exponential_kernel(),
                                 nugget),
      phi);
  MatrixXd p = fac.full_solve(MatrixXd::Identity(sites.size(), sites.size()));
  return {std::move(fac), std::move(p)};
}

}  // namespace

McmcSamples run_offline(const std::vector<spatial::ObsSlice>& y,
                        const spatial::SiteSet& sites,
                        const engine::CovariateSpec& covariates,
                        const stats::PriorHyper& prior,
                        const spatial::ObservationFamily& family,
                        const McmcConfig& config, double nugget) {
  config.validate();
  const int T = static_cast<int>(y.size());
  const int n = sites.size();
  const int m = covariates.m();
  prior.validate(m);
  if (T < 1) throw DataError("run_offline: need at least one observation slice");

  Rng rng = Rng::keyed(config.seed, 0x0ff1, 0, 0);

  std::vector<MatrixXd> g(static_cast<std::size_t>(T) + 1);
  for (int t = 0; t <= T; ++t) g[static_cast<std::size_t>(t)] = covariates.build(sites, t);

  // Initial state: crude data-driven latents, prior-centred parameters.
  double phi = config.phi_prior_mean;
  stats::Theta theta;
  theta.alpha = prior.s0 > 0.0 ? prior.a0 / prior.s0 : 0.0;
  theta.beta = prior.q0 > 0.0 ? stats::SmallVec(prior.b0 / prior.q0)
                              : stats::SmallVec(stats::SmallVec::Zero(m));
  theta.sigma2 = 1.0;
  MatrixXd x(n, T + 1);
  x.setZero();
  for (int t = 1; t <= T; ++t) {
    const auto& slice = y[static_cast<std::size_t>(t - 1)];
    for (int i = 0; i < n; ++i)
      if (slice.observed[static_cast<std::size_t>(i)] &&
          family.name() == "poisson")
        x(i, t) = std::log((slice.y(i) + 0.5) / slice.tau(i));
      else if (slice.observed[static_cast<std::size_t>(i)])
        x(i, t) = slice.y(i);
  }

  PhiWork work = make_phi_work(sites, phi, nugget);

  // Residuals r_t = x_t - mu_t(x_{t-1}) and q_t = R^{-1} r_t, maintained
  // incrementally across single-site updates.
  MatrixXd r(n, T + 1), q(n, T + 1);
  const auto rebuild_residuals = [&]() {
    r.col(0) = x.col(0) - g[0] * theta.beta;
    for (int t = 1; t <= T; ++t)
      r.col(t) = x.col(t) - g[static_cast<std::size_t>(t)] * theta.beta -
                 theta.alpha * (x.col(t - 1) - g[static_cast<std::size_t>(t - 1)] * theta.beta);
    q = work.precision * r;
  };
  rebuild_residuals();

  const auto state_quad = [&](const MatrixXd& prec) {
    double s = 0.0;
    for (int t = 0; t <= T; ++t) s += r.col(t).dot(prec * r.col(t));
    return s;
  };

  const auto theta_gibbs = [&]() {
    std::vector<Eigen::MatrixXd> wg(static_cast<std::size_t>(T) + 1);
    for (int t = 0; t <= T; ++t)
      wg[static_cast<std::size_t>(t)] = work.fac.half_solve(g[static_cast<std::size_t>(t)]);
    auto u = stats::TemporalSuffStats::init(wg[0], work.fac.half_solve(x.col(0)),
                                            phi);
    Eigen::VectorXd w_prev = work.fac.half_solve(x.col(0));
    for (int t = 1; t <= T; ++t) {
      Eigen::VectorXd w_cur = work.fac.half_solve(x.col(t));
      u.update(wg[static_cast<std::size_t>(t)], wg[static_cast<std::size_t>(t - 1)],
               w_cur, w_prev, phi);
      w_prev = std::move(w_cur);
    }
    theta = stats::gibbs_sweep(u, theta, prior, n, 1, rng);
  };

  double step_x = config.init_step_x;
  double step_phi = config.init_step_phi;
  const double phi_rate = 1.0 / config.phi_prior_mean;

  long prop_x = 0, acc_x = 0, prop_phi = 0, acc_phi = 0;

  const auto sweep_x = [&]() {
    const double inv2s2 = 0.5 / theta.sigma2;
    for (int t = 0; t <= T; ++t) {
      const spatial::ObsSlice* slice =
          t >= 1 ? &y[static_cast<std::size_t>(t - 1)] : nullptr;
      for (int i = 0; i < n; ++i) {
        const double delta = step_x * rng.normal();
        double dlog = -inv2s2 * (2.0 * delta * q(i, t) + delta * delta * work.precision(i, i));
        if (t < T)
          dlog -= inv2s2 * (-2.0 * theta.alpha * delta * q(i, t + 1) +
                            theta.alpha * theta.alpha * delta * delta *
                                work.precision(i, i));
        if (slice && slice->observed[static_cast<std::size_t>(i)])
          dlog += family.log_lik(slice->y(i), slice->tau(i), x(i, t) + delta) -
                  family.log_lik(slice->y(i), slice->tau(i), x(i, t));
        ++prop_x;
        if (std::log(rng.uniform()) < dlog) {
          ++acc_x;
          x(i, t) += delta;
          r(i, t) += delta;
          q.col(t) += delta * work.precision.col(i);
          if (t < T) {
            r(i, t + 1) -= theta.alpha * delta;
            q.col(t + 1) -= theta.alpha * delta * work.precision.col(i);
          }
        }
      }
    }
  };

  const auto update_phi = [&]() {
    const double log_phi_new = std::log(phi) + step_phi * rng.normal();
    const double phi_new = std::exp(log_phi_new);
    ++prop_phi;
    PhiWork cand;
    try {
      cand = make_phi_work(sites, phi_new, nugget);
    } catch (const NumericalError&) {
      return;  // reject ranges where the kernel cannot be factorized
    }
    const double tp1 = static_cast<double>(T + 1);
    const double cur_ll = -0.5 * tp1 * work.fac.log_det() -
                          0.5 * state_quad(work.precision) / theta.sigma2;
    const double new_ll = -0.5 * tp1 * cand.fac.log_det() -
                          0.5 * state_quad(cand.precision) / theta.sigma2;
    // exponential prior plus the log-scale random-walk Jacobian
    const double dlog = new_ll - cur_ll - phi_rate * (phi_new - phi) +
                        (log_phi_new - std::log(phi));
    if (std::log(rng.uniform()) < dlog) {
      ++acc_phi;
      phi = phi_new;
      work = std::move(cand);
      q = work.precision * r;
    }
  };

  McmcSamples out;
  out.beta.resize(config.final_size, m);
  out.x_mean = MatrixXd::Zero(n, T + 1);
  out.alpha.reserve(static_cast<std::size_t>(config.final_size));
  out.sigma2.reserve(static_cast<std::size_t>(config.final_size));
  out.phi.reserve(static_cast<std::size_t>(config.final_size));

  const int thin = std::max(1, config.thinning);  // 0 keeps every sweep
  const long total_sweeps =
      config.burn_in + static_cast<long>(config.final_size) * thin;
  int kept = 0;
  for (long sweep = 0; sweep < total_sweeps; ++sweep) {
    theta_gibbs();
    rebuild_residuals();
    sweep_x();
    for (int rep = 0; rep < config.phi_proposals_per_sweep; ++rep) update_phi();

    const bool in_burn_in = sweep < config.burn_in;
    if (in_burn_in) {
      // Robbins–Monro pull toward the middle of the acceptance band.
      const double target = 0.5 * (config.accept_lo + config.accept_hi);
      const double gain = 1.0 / std::pow(static_cast<double>(sweep) + 1.0, 0.6);
      if (prop_x > 0)
        step_x *= std::exp(gain * (static_cast<double>(acc_x) / prop_x - target));
      if (prop_phi > 0)
        step_phi *=
            std::exp(gain * (static_cast<double>(acc_phi) / prop_phi - target));
      prop_x = acc_x = prop_phi = acc_phi = 0;  // window per sweep
      continue;
    }
    const long kept_sweep = sweep - config.burn_in;
    if ((kept_sweep + 1) % thin == 0 && kept < config.final_size) {
      out.alpha.push_back(theta.alpha);
      out.sigma2.push_back(theta.sigma2);
      out.phi.push_back(phi);
      for (int j = 0; j < m; ++j) out.beta(kept, j) = theta.beta(j);
      out.x_mean += x / static_cast<double>(config.final_size);
      ++kept;
    }
  }
  if (kept != config.final_size)
    throw NumericalError("run_offline: sample accounting failed");

  out.accept_rate_x = prop_x > 0 ? static_cast<double>(acc_x) / prop_x : 0.0;
  out.accept_rate_phi =
      prop_phi > 0 ? static_cast<double>(acc_phi) / prop_phi : 0.0;
  out.acceptance_warning = out.accept_rate_phi < config.accept_lo ||
                           out.accept_rate_phi > config.accept_hi ||
                           out.accept_rate_x < config.accept_lo ||
                           out.accept_rate_x > config.accept_hi;
  return out;
}

}  // namespace sebf::mcmc
