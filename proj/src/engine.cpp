#include "sebf/engine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sebf/stable_math.hpp"

namespace sebf::engine {

// --- covariates ---------------------------------------------------------------

MatrixXd CovariateSpec::build(const spatial::SiteSet& sites, int t) const {
  return build_at(sites.coordinates(), sites, t);
}

MatrixXd CovariateSpec::build_at(const MatrixXd& coords,
                                 const spatial::SiteSet& sites, int t) const {
  (void)sites;
  const int n = static_cast<int>(coords.rows());
  MatrixXd g(n, m());
  int col = 0;
  if (intercept) g.col(col++).setOnes();
  if (dist) {
    for (int i = 0; i < n; ++i)
      g(i, col) = (coords.row(i) - reference).norm();
    ++col;
  }
  if (time) g.col(col++).setConstant(time_scale * static_cast<double>(t));
  return g;
}

void CovariateSpec::validate(int site_dim) const {
  if (m() < 1) throw ConfigError("covariates: at least one column required");
  if (m() > stats::kMaxCovariates)
    throw ConfigError("covariates: at most " +
                      std::to_string(stats::kMaxCovariates) + " columns");
  if (dist && reference.size() != site_dim)
    throw ConfigError(
        "covariates: distance column needs a reference point matching the "
        "site dimension");
  if (time && !(time_scale > 0.0))
    throw ConfigError("covariates: time_scale must be > 0");
}

void EngineConfig::validate(int site_dim) const {
  grid.validate();
  covariates.validate(site_dim);
  prior.validate(covariates.m());
  if (n_particles < 1) throw ConfigError("mc: N must be >= 1");
  if (gibbs_iters < 1) throw ConfigError("mc: Lg must be >= 1");
  if (nugget < 0.0) throw ConfigError("model: nugget must be >= 0");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw ConfigError("ci: level must be in (0,1)");
  if (simplified_estimator && grid.K() != 1)
    throw ConfigError(
        "estimator: the simplified Bayes factor estimator samples at the "
        "reference only; the coarse grid must be exactly {reference}");
  spatial::family_by_name(family);  // throws on unknown family
}

// --- engine ----------------------------------------------------------------------

Engine::Engine(spatial::SiteSet sites, EngineConfig config)
    : sites_(std::move(sites)), cfg_(std::move(config)) {
  cfg_.validate(sites_.dim());
  family_ = &spatial::family_by_name(cfg_.family);
  fac_.reserve(static_cast<std::size_t>(cfg_.grid.J()));
  for (int j = 0; j < cfg_.grid.J(); ++j) {
    const double phi = cfg_.grid.phi_fine(j);
    fac_.push_back(spatial::GaussianFactorization::factorize(
        spatial::build_correlation(sites_, phi, spatial::exponential_kernel(),
                                   cfg_.nugget),
        phi));
  }
  base_.assign(static_cast<std::size_t>(cfg_.grid.K()) + 1, 0);
  for (int k = 0; k < cfg_.grid.K(); ++k)
    base_[static_cast<std::size_t>(k) + 1] =
        base_[static_cast<std::size_t>(k)] +
        cfg_.grid.chain_counts[static_cast<std::size_t>(k)];
}

void Engine::init_population() {
  const int n = sites_.size();
  const int m = cfg_.covariates.m();
  const MatrixXd g0 = cfg_.covariates.build(sites_, 0);
  std::vector<MatrixXd> wg0(static_cast<std::size_t>(cfg_.grid.J()));
  for (int j = 0; j < cfg_.grid.J(); ++j)
    wg0[static_cast<std::size_t>(j)] = fac_[static_cast<std::size_t>(j)].half_solve(g0);

  chains_.clear();
  chains_.resize(static_cast<std::size_t>(cfg_.grid.total_chains()));
  for (int k = 0; k < cfg_.grid.K(); ++k) {
    for (int l = 0; l < cfg_.grid.chain_counts[static_cast<std::size_t>(k)]; ++l) {
      ChainState& c = chains_[static_cast<std::size_t>(base_[static_cast<std::size_t>(k)] + l)];
      c.k = k;
      c.l = l;
      c.phi_idx = cfg_.grid.coarse[static_cast<std::size_t>(k)];
      Rng rng = Rng::keyed(cfg_.seed, static_cast<std::uint64_t>(k),
                           static_cast<std::uint64_t>(l), 0);
      c.theta = stats::sample_prior(cfg_.prior, m, rng);
      const VectorXd mean0 = g0 * c.theta.beta;
      c.x = spatial::mvn_sample(mean0, c.theta.sigma2,
                                fac_[static_cast<std::size_t>(c.phi_idx)], rng);
      c.z.clear();
      c.z.reserve(static_cast<std::size_t>(cfg_.grid.J()));
      for (int j = 0; j < cfg_.grid.J(); ++j)
        c.z.push_back(stats::TemporalSuffStats::init(
            wg0[static_cast<std::size_t>(j)],
            fac_[static_cast<std::size_t>(j)].half_solve(c.x),
            cfg_.grid.phi_fine(j)));
      c.last_ess = static_cast<double>(cfg_.n_particles);
    }
  }
  t_ = 0;
}

void filter_step_fixed_phi(
    ChainState& chain, const spatial::ObsSlice& y, const VectorXd& x_prev,
    const EngineConfig& cfg, const spatial::ObservationFamily& family,
    const std::vector<spatial::GaussianFactorization>& fac,
    const std::vector<MatrixXd>& whitened_g_cur,
    const std::vector<MatrixXd>& whitened_g_prev, Rng& rng) {
  const auto& own_fac = fac[static_cast<std::size_t>(chain.phi_idx)];
  const int n = own_fac.size();

  // 1. theta | u_{t-1}
  chain.theta = stats::gibbs_sweep(chain.u(), chain.theta, cfg.prior, n,
                                   cfg.gibbs_iters, rng);

  // 2-3. proposal around the one-step conditional
  // mu_t = G_t beta + alpha (x_{t-1} - G_{t-1} beta), recovered from the
  // whitened covariates: L w = wg implies G = L wg.
  const auto& lt = own_fac.lower().triangularView<Eigen::Lower>();
  const VectorXd g_cur_beta =
      lt * (whitened_g_cur[static_cast<std::size_t>(chain.phi_idx)] * chain.theta.beta);
  const VectorXd g_prev_beta =
      lt * (whitened_g_prev[static_cast<std::size_t>(chain.phi_idx)] * chain.theta.beta);
  const VectorXd mu = g_cur_beta + chain.theta.alpha * (x_prev - g_prev_beta);

  auto fit = proposal::fit_mode(y, mu, chain.theta.sigma2, own_fac, family,
                                cfg.newton);
  proposal::fit_skew_marginals(fit, y, family, cfg.proposal_mode);
  chain.last_mean_delta2 = fit.mean_delta2;
  chain.last_max_delta2 = fit.max_delta2;

  // 4-6. SIR draw of x_t
  const auto particles = proposal::sample_proposal(fit, cfg.n_particles, rng);
  const auto pick = proposal::weigh_and_resample(particles, y, mu,
                                                 chain.theta.sigma2, own_fac,
                                                 family, fit, rng);
  chain.x = pick.x;
  chain.last_ess = pick.ess;

  // 7. statistics update at every fine-grid range
  for (std::size_t j = 0; j < chain.z.size(); ++j) {
    chain.z[j].update(whitened_g_cur[j], whitened_g_prev[j],
                      fac[j].half_solve(chain.x), fac[j].half_solve(x_prev),
                      fac[j].phi());
  }
}

void Engine::chain_loglik_row(const ChainState& chain, MatrixXd& loglik,
                              int i) const {
  for (int j = 0; j < cfg_.grid.J(); ++j)
    loglik(i, j) = stats::joint_state_loglik(
        chain.z[static_cast<std::size_t>(j)], chain.theta,
        fac_[static_cast<std::size_t>(j)].log_det(), sites_.size());
}

StepSummary Engine::eb_summarize(const MatrixXd& loglik, int t_new) const {
  const int nch = static_cast<int>(chains_.size());
  const int K = cfg_.grid.K();

  MatrixXd loglik_coarse(nch, K);
  std::vector<int> component(static_cast<std::size_t>(nch));
  for (int i = 0; i < nch; ++i) {
    component[static_cast<std::size_t>(i)] = chains_[static_cast<std::size_t>(i)].k;
    for (int k = 0; k < K; ++k)
      loglik_coarse(i, k) = loglik(i, cfg_.grid.coarse[static_cast<std::size_t>(k)]);
  }

  StepSummary s;
  s.t = t_new;
  s.table.t = t_new;
  s.table.log_b_coarse = eb::reverse_logistic_fit(
      loglik_coarse, component, cfg_.grid.lambda(), cfg_.grid.reference);
  const auto den = eb::mixture_denominators(loglik_coarse, s.table.log_b_coarse,
                                            cfg_.grid.chain_counts);
  s.table.log_bf_fine.resize(static_cast<std::size_t>(cfg_.grid.J()));
  std::vector<double> col(static_cast<std::size_t>(nch));
  for (int j = 0; j < cfg_.grid.J(); ++j) {
    for (int i = 0; i < nch; ++i) col[static_cast<std::size_t>(i)] = loglik(i, j);
    s.table.log_bf_fine[static_cast<std::size_t>(j)] =
        eb::mixture_bayes_factor(col, den);
  }
  eb::estimate_phi(cfg_.grid, s.table, cfg_.ci_level);

  // importance reweighting onto phi_hat
  int hat_idx = 0;
  for (int j = 0; j < cfg_.grid.J(); ++j)
    if (cfg_.grid.phi_fine(j) == s.table.phi_hat) hat_idx = j;
  std::vector<double> at_hat(static_cast<std::size_t>(nch));
  for (int i = 0; i < nch; ++i)
    at_hat[static_cast<std::size_t>(i)] = loglik(i, hat_idx);
  std::vector<double> bf_coarse(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    bf_coarse[static_cast<std::size_t>(k)] =
        s.table.log_bf_fine[static_cast<std::size_t>(
            cfg_.grid.coarse[static_cast<std::size_t>(k)])];
  const auto rw = eb::reweight(
      at_hat, loglik_coarse, cfg_.grid.lambda(),
      s.table.log_bf_fine[static_cast<std::size_t>(hat_idx)], bf_coarse,
      cfg_.ess_warn_floor);
  s.reweight_ess = rw.ess;
  s.low_ess_warning = rw.low_ess_warning;

  const int m = cfg_.covariates.m();
  s.theta_hat.beta = stats::SmallVec::Zero(m);
  s.theta_hat.alpha = 0.0;
  s.theta_hat.sigma2 = 0.0;
  s.x_hat = VectorXd::Zero(sites_.size());
  s.mean_ess = 0.0;
  s.mean_delta2 = 0.0;
  s.max_delta2 = 0.0;
  for (int i = 0; i < nch; ++i) {
    const auto& c = chains_[static_cast<std::size_t>(i)];
    const double w = rw.weights(i);
    s.theta_hat.alpha += w * c.theta.alpha;
    s.theta_hat.beta += w * c.theta.beta;
    s.theta_hat.sigma2 += w * c.theta.sigma2;
    s.x_hat += w * c.x;
    s.mean_ess += c.last_ess / nch;
    s.mean_delta2 += c.last_mean_delta2 / nch;
    s.max_delta2 = std::max(s.max_delta2, c.last_max_delta2);
  }
  return s;
}

std::pair<eb::BayesFactorTable, eb::ReweightResult> Engine::eb_phase() const {
  if (t_ < 1)
    throw ContractViolation("eb_phase: no data has been absorbed yet");
  const int nch = static_cast<int>(chains_.size());
  MatrixXd loglik(nch, cfg_.grid.J());
  for (int i = 0; i < nch; ++i)
    chain_loglik_row(chains_[static_cast<std::size_t>(i)], loglik, i);
  const StepSummary s = eb_summarize(loglik, t_);

  // Rebuild the weights exactly as eb_summarize did.
  const int K = cfg_.grid.K();
  MatrixXd loglik_coarse(nch, K);
  for (int i = 0; i < nch; ++i)
    for (int k = 0; k < K; ++k)
      loglik_coarse(i, k) = loglik(i, cfg_.grid.coarse[static_cast<std::size_t>(k)]);
  int hat_idx = 0;
  for (int j = 0; j < cfg_.grid.J(); ++j)
    if (cfg_.grid.phi_fine(j) == s.table.phi_hat) hat_idx = j;
  std::vector<double> at_hat(static_cast<std::size_t>(nch));
  for (int i = 0; i < nch; ++i)
    at_hat[static_cast<std::size_t>(i)] = loglik(i, hat_idx);
  std::vector<double> bf_coarse(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    bf_coarse[static_cast<std::size_t>(k)] =
        s.table.log_bf_fine[static_cast<std::size_t>(
            cfg_.grid.coarse[static_cast<std::size_t>(k)])];
  auto rw = eb::reweight(at_hat, loglik_coarse, cfg_.grid.lambda(),
                         s.table.log_bf_fine[static_cast<std::size_t>(hat_idx)],
                         bf_coarse, cfg_.ess_warn_floor);
  return {s.table, std::move(rw)};
}

StepSummary Engine::advance(const spatial::ObsSlice& y, bool parallel) {
  if (t_ < 0) throw ContractViolation("advance: population not initialized");
  if (y.n() != sites_.size())
    throw DataError("advance: observation batch size " + std::to_string(y.n()) +
                    " does not match the " + std::to_string(sites_.size()) +
                    " sites");
  const auto t_start = std::chrono::steady_clock::now();
  const int t_new = t_ + 1;
  const int nch = static_cast<int>(chains_.size());
  const int J = cfg_.grid.J();

  // Whitened covariates, shared by all chains this step.
  const MatrixXd g_cur = cfg_.covariates.build(sites_, t_new);
  const MatrixXd g_prev = cfg_.covariates.build(sites_, t_new - 1);
  std::vector<MatrixXd> wg_cur(static_cast<std::size_t>(J)),
      wg_prev(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    wg_cur[static_cast<std::size_t>(j)] = fac_[static_cast<std::size_t>(j)].half_solve(g_cur);
    wg_prev[static_cast<std::size_t>(j)] = fac_[static_cast<std::size_t>(j)].half_solve(g_prev);
  }

  // Concurrent chain updates into a fresh population; the t-1 population
  // stays intact until the whole step has succeeded.
  std::vector<ChainState> next(static_cast<std::size_t>(nch));
  MatrixXd loglik(nch, J);
  std::atomic<bool> failed{false};
  std::exception_ptr failure = nullptr;
  int failed_chain = -1;

  const auto work = [&](int i) {
    const int k = chains_[static_cast<std::size_t>(i)].k;
    const int l = chains_[static_cast<std::size_t>(i)].l;
    Rng rng = Rng::keyed(cfg_.seed, static_cast<std::uint64_t>(k),
                         static_cast<std::uint64_t>(l),
                         static_cast<std::uint64_t>(t_new));
    const int lk = cfg_.grid.chain_counts[static_cast<std::size_t>(k)];
    const int parent_l = static_cast<int>(rng.uniform_index(
        static_cast<std::uint64_t>(lk)));
    const ChainState& parent =
        chains_[static_cast<std::size_t>(base_[static_cast<std::size_t>(k)] + parent_l)];
    ChainState& mine = next[static_cast<std::size_t>(i)];
    mine = parent;
    mine.l = l;
    const VectorXd x_prev = parent.x;
    filter_step_fixed_phi(mine, y, x_prev, cfg_, *family_, fac_, wg_cur,
                          wg_prev, rng);
    chain_loglik_row(mine, loglik, i);
  };

  if (parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < nch; ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      try {
        work(i);
      } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
        {
          if (!failed.exchange(true)) {
            failure = std::current_exception();
            failed_chain = i;
          }
        }
      }
    }
  } else {
    for (int i = 0; i < nch && !failed.load(); ++i) {
      try {
        work(i);
      } catch (...) {
        failed.store(true);
        failure = std::current_exception();
        failed_chain = i;
      }
    }
  }
  if (failure) {
    const auto& c = chains_[static_cast<std::size_t>(failed_chain)];
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw NumericalError("advance: step " + std::to_string(t_new) +
                           " aborted by chain (k=" + std::to_string(c.k) +
                           ", l=" + std::to_string(c.l) + "): " + e.what());
    }
  }

  chains_ = std::move(next);
  StepSummary s = eb_summarize(loglik, t_new);
  t_ = t_new;
  s.step_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return s;
}

std::size_t Engine::state_bytes() const {
  std::size_t bytes = 0;
  for (const auto& f : fac_)
    bytes += sizeof(double) * static_cast<std::size_t>(f.size()) *
                 static_cast<std::size_t>(f.size()) +
             2 * sizeof(double);
  for (const auto& c : chains_) {
    bytes += sizeof(ChainState);
    bytes += sizeof(double) * static_cast<std::size_t>(c.x.size());
    bytes += sizeof(double) * static_cast<std::size_t>(c.theta.beta.size());
    for (const auto& z : c.z) bytes += z.byte_size();
  }
  return bytes;
}

}  // namespace sebf::engine
