#include "sebf/config.hpp"

#include <cmath>
#include <fstream>

namespace sebf::io {

using nlohmann::json;

namespace {

const json* maybe(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double num_or(const json& j, const char* key, double fallback) {
  if (const json* v = maybe(j, key)) {
    if (!v->is_number())
      throw ConfigError(std::string("config: '") + key + "' must be a number");
    return v->get<double>();
  }
  return fallback;
}

int int_or(const json& j, const char* key, int fallback) {
  if (const json* v = maybe(j, key)) {
    if (!v->is_number_integer())
      throw ConfigError(std::string("config: '") + key + "' must be an integer");
    return v->get<int>();
  }
  return fallback;
}

bool bool_or(const json& j, const char* key, bool fallback) {
  if (const json* v = maybe(j, key)) {
    if (!v->is_boolean())
      throw ConfigError(std::string("config: '") + key + "' must be a boolean");
    return v->get<bool>();
  }
  return fallback;
}

std::string str_or(const json& j, const char* key, const std::string& fallback) {
  if (const json* v = maybe(j, key)) {
    if (!v->is_string())
      throw ConfigError(std::string("config: '") + key + "' must be a string");
    return v->get<std::string>();
  }
  return fallback;
}

int fine_index_of(const std::vector<double>& fine, double phi,
                  const char* what) {
  for (std::size_t j = 0; j < fine.size(); ++j)
    if (std::abs(fine[j] - phi) <= 1e-9 * std::max(1.0, std::abs(phi)))
      return static_cast<int>(j);
  throw ConfigError(std::string("config: ") + what + " value " +
                    std::to_string(phi) + " is not a fine-grid point");
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig rc;
  auto& eng = rc.engine;

  // model block
  if (const json* model = maybe(j, "model")) {
    if (const json* kernel = maybe(*model, "kernel")) {
      const std::string kind = str_or(*kernel, "kind", "exponential");
      if (kind != "exponential")
        throw ConfigError("config: only the exponential kernel is available; "
                          "got '" + kind + "'");
      eng.nugget = num_or(*kernel, "nugget", 0.0);
    }
    if (const json* obs = maybe(*model, "observation"))
      eng.family = str_or(*obs, "family", "poisson");
    if (const json* cov = maybe(*model, "covariates")) {
      eng.covariates.intercept = bool_or(*cov, "intercept", true);
      eng.covariates.dist = bool_or(*cov, "dist", false);
      eng.covariates.time = bool_or(*cov, "time", false);
      eng.covariates.time_scale = num_or(*cov, "time_scale", 1.0);
      if (const json* ref = maybe(*cov, "reference")) {
        if (!ref->is_array())
          throw ConfigError("config: covariates.reference must be an array");
        eng.covariates.reference.resize(static_cast<int>(ref->size()));
        for (std::size_t i = 0; i < ref->size(); ++i)
          eng.covariates.reference(static_cast<int>(i)) = (*ref)[i].get<double>();
      }
    }
  }

  // prior block
  const int m = eng.covariates.m();
  eng.prior.b0 = stats::SmallVec::Zero(m);
  if (const json* prior = maybe(j, "prior")) {
    eng.prior.a0 = num_or(*prior, "a0", 0.0);
    eng.prior.s0 = num_or(*prior, "s0", 0.1);
    eng.prior.q0 = num_or(*prior, "q0", 0.01);
    eng.prior.c0 = num_or(*prior, "c0", 3.0);
    eng.prior.r0 = num_or(*prior, "r0", 1.0 / 3.0);
    if (const json* b0 = maybe(*prior, "b0")) {
      if (b0->is_number()) {
        eng.prior.b0.setConstant(b0->get<double>());
      } else if (b0->is_array()) {
        if (static_cast<int>(b0->size()) != m)
          throw ConfigError("config: prior.b0 needs one entry per covariate (" +
                            std::to_string(m) + ")");
        for (int i = 0; i < m; ++i)
          eng.prior.b0(i) = (*b0)[static_cast<std::size_t>(i)].get<double>();
      } else {
        throw ConfigError("config: prior.b0 must be a number or array");
      }
    }
  }

  // grid block
  const json* grid = maybe(j, "grid");
  if (!grid) throw ConfigError("config: missing required 'grid' block");
  if (const json* fine = maybe(*grid, "fine")) {
    if (fine->is_array()) {
      for (const auto& v : *fine) eng.grid.fine.push_back(v.get<double>());
    } else if (fine->is_object()) {
      const double lo = num_or(*fine, "min", 0.0);
      const double hi = num_or(*fine, "max", 0.0);
      const int count = int_or(*fine, "count", 0);
      if (count < 1 || !(hi >= lo))
        throw ConfigError("config: grid.fine needs min <= max and count >= 1");
      for (int i = 0; i < count; ++i)
        eng.grid.fine.push_back(
            count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    } else {
      throw ConfigError("config: grid.fine must be an array or {min,max,count}");
    }
  } else {
    throw ConfigError("config: grid.fine is required");
  }
  const json* coarse = maybe(*grid, "coarse");
  if (!coarse || !coarse->is_array() || coarse->empty())
    throw ConfigError("config: grid.coarse must be a nonempty array of "
                      "fine-grid values");
  for (const auto& v : *coarse)
    eng.grid.coarse.push_back(
        fine_index_of(eng.grid.fine, v.get<double>(), "coarse grid"));
  if (const json* ref = maybe(*grid, "reference")) {
    const int fine_idx =
        fine_index_of(eng.grid.fine, ref->get<double>(), "reference");
    eng.grid.reference = -1;
    for (std::size_t k = 0; k < eng.grid.coarse.size(); ++k)
      if (eng.grid.coarse[k] == fine_idx) eng.grid.reference = static_cast<int>(k);
    if (eng.grid.reference < 0)
      throw ConfigError("config: grid.reference must be a coarse-grid point");
  } else {
    eng.grid.reference = 0;
  }

  // monte-carlo block
  int L = 100;
  if (const json* mc = maybe(j, "mc")) {
    L = int_or(*mc, "L", 100);
    eng.n_particles = int_or(*mc, "N", 100);
    eng.gibbs_iters = int_or(*mc, "Lg", 50);
  }
  eng.grid.chain_counts.assign(eng.grid.coarse.size(), L);
  if (const json* mc = maybe(j, "mc"))
    if (const json* lk = maybe(*mc, "L_per_component")) {
      if (!lk->is_array() || lk->size() != eng.grid.coarse.size())
        throw ConfigError("config: mc.L_per_component needs one entry per "
                          "coarse point");
      for (std::size_t k = 0; k < lk->size(); ++k)
        eng.grid.chain_counts[k] = (*lk)[k].get<int>();
    }

  // proposal block
  if (const json* prop = maybe(j, "proposal")) {
    eng.proposal_mode = proposal::correction_mode_by_name(
        str_or(*prop, "mode", "mean_only"));
    eng.newton.tol = num_or(*prop, "newton_tol", 1e-8);
    eng.newton.max_iter = int_or(*prop, "newton_max_iter", 50);
  }

  // estimator switch (the single-reference simplified Bayes factor)
  if (const json* est = maybe(j, "estimator")) {
    const std::string kind = str_or(*est, "kind", "mixture");
    if (kind == "simplified")
      rc.simplified_estimator = true;
    else if (kind != "mixture")
      throw ConfigError("config: estimator.kind must be mixture | simplified");
  }
  eng.simplified_estimator = rc.simplified_estimator;

  if (const json* ci = maybe(j, "ci")) eng.ci_level = num_or(*ci, "level", 0.99);
  if (const json* ebj = maybe(j, "eb"))
    eng.ess_warn_floor = num_or(*ebj, "ess_warn_floor", 0.0);
  if (const json* seed = maybe(j, "seed"))
    eng.seed = seed->get<std::uint64_t>();

  // data columns
  if (const json* data = maybe(j, "data")) {
    if (const json* cols = maybe(*data, "columns")) {
      rc.columns.site = str_or(*cols, "site", "site");
      rc.columns.time = str_or(*cols, "time", "day");
      rc.columns.count = str_or(*cols, "count", "count");
      rc.columns.exposure = str_or(*cols, "exposure", "exposure");
      if (const json* cc = maybe(*cols, "coords")) {
        rc.columns.coords.clear();
        for (const auto& c : *cc) rc.columns.coords.push_back(c.get<std::string>());
      }
    }
  }

  // offline mcmc block
  if (const json* mj = maybe(j, "mcmc")) {
    rc.mcmc.burn_in = int_or(*mj, "burn_in", 50);
    rc.mcmc.thinning = int_or(*mj, "thinning", 10);
    rc.mcmc.final_size = int_or(*mj, "final_size", 3000);
    rc.mcmc.phi_prior_mean = num_or(*mj, "phi_prior_mean", 0.4);
    rc.mcmc.seed = static_cast<std::uint64_t>(int_or(*mj, "seed", 99));
    rc.mcmc.validate();
  }

  // surface grid/prior/mc inconsistencies now rather than at run start
  eng.grid.validate();
  return rc;
}

nlohmann::json RunConfig::to_json() const {
  json j;
  j["model"]["kernel"] = {{"kind", "exponential"}, {"nugget", engine.nugget}};
  j["model"]["observation"] = {{"family", engine.family}};
  json cov = {{"intercept", engine.covariates.intercept},
              {"dist", engine.covariates.dist},
              {"time", engine.covariates.time},
              {"time_scale", engine.covariates.time_scale}};
  if (engine.covariates.reference.size() > 0) {
    std::vector<double> ref(static_cast<std::size_t>(engine.covariates.reference.size()));
    for (int i = 0; i < engine.covariates.reference.size(); ++i)
      ref[static_cast<std::size_t>(i)] = engine.covariates.reference(i);
    cov["reference"] = ref;
  }
  j["model"]["covariates"] = cov;
  std::vector<double> b0(static_cast<std::size_t>(engine.prior.b0.size()));
  for (int i = 0; i < engine.prior.b0.size(); ++i)
    b0[static_cast<std::size_t>(i)] = engine.prior.b0(i);
  j["prior"] = {{"a0", engine.prior.a0}, {"s0", engine.prior.s0},
                {"b0", b0},             {"q0", engine.prior.q0},
                {"c0", engine.prior.c0}, {"r0", engine.prior.r0}};
  j["grid"]["fine"] = engine.grid.fine;
  std::vector<double> coarse;
  for (int idx : engine.grid.coarse)
    coarse.push_back(engine.grid.fine[static_cast<std::size_t>(idx)]);
  j["grid"]["coarse"] = coarse;
  j["grid"]["reference"] = engine.grid.phi_ref();
  j["mc"] = {{"L", engine.grid.chain_counts.front()},
             {"N", engine.n_particles},
             {"Lg", engine.gibbs_iters}};
  j["proposal"] = {{"mode", proposal::correction_mode_name(engine.proposal_mode)},
                   {"newton_tol", engine.newton.tol},
                   {"newton_max_iter", engine.newton.max_iter}};
  j["estimator"] = {{"kind", simplified_estimator ? "simplified" : "mixture"}};
  j["ci"] = {{"level", engine.ci_level}};
  j["eb"] = {{"ess_warn_floor", engine.ess_warn_floor}};
  j["seed"] = engine.seed;
  j["data"]["columns"] = {{"site", columns.site},
                          {"time", columns.time},
                          {"count", columns.count},
                          {"exposure", columns.exposure},
                          {"coords", columns.coords}};
  j["mcmc"] = {{"burn_in", mcmc.burn_in},
               {"thinning", mcmc.thinning},
               {"final_size", mcmc.final_size},
               {"phi_prior_mean", mcmc.phi_prior_mean},
               {"seed", mcmc.seed}};
  return j;
}

}  // namespace sebf::io
