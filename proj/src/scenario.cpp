#include <cmath>

#include "sebf/simkit.hpp"

namespace sebf::sim {

namespace {

eb::GridSpec default_grid(int L) {
  eb::GridSpec g;
  // 41 equidistant points on [phi/2, 2 phi] for phi = 0.4, coarse points
  // every seventh grid step starting at 0.230; the first coarse point is
  // the reference.
  g.fine.resize(41);
  for (int j = 0; j < 41; ++j) g.fine[static_cast<std::size_t>(j)] = 0.2 + 0.015 * j;
  g.coarse = {2, 9, 16, 23, 30, 37};  // 0.230 0.335 0.440 0.545 0.650 0.755
  g.reference = 0;
  g.chain_counts.assign(6, L);
  return g;
}

stats::PriorHyper default_prior(int m) {
  stats::PriorHyper p;
  p.a0 = 0.0;
  p.s0 = 0.1;
  p.b0 = stats::SmallVec::Zero(m);
  p.q0 = 0.01;
  p.c0 = 3.0;
  p.r0 = 1.0 / 3.0;
  return p;
}

}  // namespace

engine::EngineConfig Scenario::engine_config() const {
  engine::EngineConfig cfg;
  cfg.grid = grid;
  cfg.prior = prior;
  cfg.covariates = covariates;
  cfg.family = family;
  cfg.proposal_mode = proposal_mode;
  cfg.n_particles = N;
  cfg.gibbs_iters = Lg;
  cfg.nugget = nugget;
  cfg.seed = seed;
  return cfg;
}

Scenario baseline_scenario() {
  Scenario sc;
  sc.name = "baseline";
  sc.coords.resize(11, 1);
  for (int i = 0; i < 11; ++i) sc.coords(i, 0) = 0.1 * i;
  sc.covariates.intercept = true;
  sc.alpha_true = 0.5;
  sc.beta_true = stats::SmallVec::Ones(1);
  sc.sigma2_true = 1.0;
  sc.phi_true = 0.4;
  sc.tau = 1.0;
  sc.T = 100;
  sc.L = 100;
  sc.N = 100;
  sc.Lg = 50;
  sc.grid = default_grid(sc.L);
  sc.prior = default_prior(1);
  return sc;
}

Scenario scenario_ess_study() {
  Scenario sc = baseline_scenario();
  sc.name = "ess_study";
  return sc;
}

Scenario scenario_estimation() {
  Scenario sc = baseline_scenario();
  sc.name = "estimation";
  sc.tau = 10.0;
  sc.L = 500;
  sc.grid = default_grid(sc.L);
  return sc;
}

Scenario scenario_long_run() {
  Scenario sc = scenario_estimation();
  sc.name = "long_run";
  sc.T = 1000;
  return sc;
}

Scenario scenario_monitoring_synthetic() {
  Scenario sc;
  sc.name = "monitoring_synthetic";
  // 17 scattered sites on a ~0.6 x 0.6 planar patch; deterministic layout.
  sc.coords.resize(17, 2);
  Rng layout = Rng::keyed(20110316, 17, 0, 0);
  for (int i = 0; i < 17; ++i) {
    sc.coords(i, 0) = 140.8 + 0.6 * layout.uniform();
    sc.coords(i, 1) = 37.2 + 0.6 * layout.uniform();
  }
  sc.covariates.intercept = true;
  sc.covariates.dist = true;
  sc.covariates.reference = Eigen::RowVectorXd(2);
  sc.covariates.reference << 141.03, 37.42;  // the emission source
  sc.covariates.time = true;
  sc.covariates.time_scale = 0.01;
  sc.alpha_true = 0.6;
  sc.beta_true = stats::SmallVec(3);
  sc.beta_true << 2.0, -3.0, -0.5;  // decay with distance and time
  sc.sigma2_true = 0.3;
  sc.phi_true = 0.05;
  sc.tau = 1.0;
  sc.tau_jitter = 2;  // sites sampled 1-3 times per day
  sc.missing_prob = 0.25;
  sc.T = 146;
  // 50 equally spaced points on (0, 0.1]: the [0, 0.1] layout with the
  // degenerate zero excluded. Coarse points every eighth step on
  // [0.002, 0.098].
  sc.grid.fine.resize(50);
  for (int j = 0; j < 50; ++j)
    sc.grid.fine[static_cast<std::size_t>(j)] = 0.002 * (j + 1);
  sc.grid.coarse = {0, 8, 16, 24, 32, 40, 48};
  sc.grid.reference = 0;
  sc.L = 60;
  sc.N = 100;
  sc.Lg = 50;
  sc.grid.chain_counts.assign(7, sc.L);
  sc.prior = default_prior(3);
  sc.prior.c0 = 0.1;
  sc.prior.r0 = 0.1;
  sc.seed = 146;
  return sc;
}

Scenario scenario_by_name(const std::string& name) {
  if (name == "ess" || name == "ess_study") return scenario_ess_study();
  if (name == "estimation") return scenario_estimation();
  if (name == "long_run") return scenario_long_run();
  if (name == "monitoring" || name == "monitoring_synthetic")
    return scenario_monitoring_synthetic();
  if (name == "baseline") return baseline_scenario();
  throw ConfigError("unknown scenario '" + name +
                    "' (expected baseline | ess_study | estimation | "
                    "long_run | monitoring_synthetic)");
}

Dataset simulate(const Scenario& sc, Rng& rng) {
  const spatial::SiteSet sites(sc.coords);
  const int n = sites.size();
  const auto& family = spatial::family_by_name(sc.family);
  const auto fac = spatial::GaussianFactorization::factorize(
      spatial::build_correlation(sites, sc.phi_true,
                                 spatial::exponential_kernel(), sc.nugget),
      sc.phi_true);

  Dataset ds;
  ds.x.resize(n, sc.T + 1);
  const MatrixXd g0 = sc.covariates.build(sites, 0);
  ds.x.col(0) = spatial::mvn_sample(g0 * sc.beta_true, sc.sigma2_true, fac, rng);
  MatrixXd g_prev = g0;
  for (int t = 1; t <= sc.T; ++t) {
    const MatrixXd g_cur = sc.covariates.build(sites, t);
    const VectorXd mean = g_cur * sc.beta_true +
                          sc.alpha_true * (ds.x.col(t - 1) - g_prev * sc.beta_true);
    ds.x.col(t) = spatial::mvn_sample(mean, sc.sigma2_true, fac, rng);
    g_prev = g_cur;
  }

  ds.y.reserve(static_cast<std::size_t>(sc.T));
  for (int t = 1; t <= sc.T; ++t) {
    spatial::ObsSlice slice;
    slice.y.resize(n);
    slice.tau.resize(n);
    slice.observed.assign(static_cast<std::size_t>(n), true);
    for (int i = 0; i < n; ++i) {
      double tau = sc.tau;
      if (sc.tau_jitter > 0)
        tau += static_cast<double>(
            rng.uniform_index(static_cast<std::uint64_t>(sc.tau_jitter) + 1));
      const bool missing = sc.missing_prob > 0.0 && rng.uniform() < sc.missing_prob;
      slice.tau(i) = tau;
      slice.y(i) = missing ? 0.0 : family.sample(tau, ds.x(i, t), rng);
      if (missing) slice.observed[static_cast<std::size_t>(i)] = false;
    }
    ds.y.push_back(std::move(slice));
  }
  return ds;
}

}  // namespace sebf::sim
