#include "sebf/ebrange.hpp"

#include <algorithm>
#include <cmath>

#include "sebf/stable_math.hpp"

namespace sebf::eb {

int GridSpec::total_chains() const {
  int total = 0;
  for (int lk : chain_counts) total += lk;
  return total;
}

std::vector<double> GridSpec::lambda() const {
  const double total = static_cast<double>(total_chains());
  std::vector<double> lam(chain_counts.size());
  for (std::size_t k = 0; k < chain_counts.size(); ++k)
    lam[k] = chain_counts[k] / total;
  return lam;
}

void GridSpec::validate() const {
  if (fine.empty()) throw ConfigError("grid: fine grid is empty");
  for (std::size_t j = 0; j < fine.size(); ++j) {
    if (!(fine[j] > 0.0))
      throw ConfigError("grid: fine grid points must be > 0 (the kernel "
                        "degenerates at 0); got " + std::to_string(fine[j]));
    if (j > 0 && !(fine[j] > fine[j - 1]))
      throw ConfigError("grid: fine grid must be strictly ascending");
  }
  if (coarse.empty()) throw ConfigError("grid: coarse grid is empty");
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    if (coarse[k] < 0 || coarse[k] >= J())
      throw ConfigError("grid: coarse index out of range");
    if (k > 0 && coarse[k] <= coarse[k - 1])
      throw ConfigError("grid: coarse grid must be strictly ascending");
  }
  if (reference < 0 || reference >= K())
    throw ConfigError("grid: reference must point into the coarse grid");
  if (static_cast<int>(chain_counts.size()) != K())
    throw ConfigError("grid: need one chain count per coarse point");
  for (int lk : chain_counts)
    if (lk < 1) throw ConfigError("grid: chain counts must be >= 1");
}

std::vector<double> reverse_logistic_fit(const MatrixXd& loglik,
                                         const std::vector<int>& component,
                                         const std::vector<double>& lambda,
                                         int reference, double tol,
                                         int max_iter) {
  const int nch = static_cast<int>(loglik.rows());
  const int K = static_cast<int>(loglik.cols());
  if (K < 1 || nch < 1)
    throw ContractViolation("reverse_logistic_fit: empty input");
  if (static_cast<int>(component.size()) != nch ||
      static_cast<int>(lambda.size()) != K || reference < 0 || reference >= K)
    throw ContractViolation("reverse_logistic_fit: shape mismatch");
  for (int j = 0; j < nch; ++j)
    for (int k = 0; k < K; ++k)
      if (!std::isfinite(loglik(j, k)))
        throw NumericalError(
            "reverse_logistic_fit: non-finite log-likelihood from chain " +
            std::to_string(j) + " at coarse point " + std::to_string(k));
  if (K == 1) return {0.0};

  std::vector<double> log_lambda(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) log_lambda[static_cast<std::size_t>(k)] = std::log(lambda[static_cast<std::size_t>(k)]);

  // Parameters v_k = -log b_k, reference pinned at 0. Scores
  // S_jk = loglik(j,k) + log lambda_k + v_k; objective is the sum of
  // log-softmax terms picking each chain's own component.
  VectorXd v = VectorXd::Zero(K);
  VectorXd counts = VectorXd::Zero(K);
  for (int j = 0; j < nch; ++j) counts(component[static_cast<std::size_t>(j)]) += 1.0;

  MatrixXd p(nch, K);
  const auto eval = [&](const VectorXd& vv, VectorXd& grad, MatrixXd* hess) {
    double obj = 0.0;
    grad.setZero();
    if (hess) hess->setZero();
    std::vector<double> row(static_cast<std::size_t>(K));
    for (int j = 0; j < nch; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        row[static_cast<std::size_t>(k)] =
            loglik(j, k) + log_lambda[static_cast<std::size_t>(k)] + vv(k);
        mx = std::max(mx, row[static_cast<std::size_t>(k)]);
      }
      double s = 0.0;
      for (int k = 0; k < K; ++k) s += std::exp(row[static_cast<std::size_t>(k)] - mx);
      const double lse = mx + std::log(s);
      obj += row[static_cast<std::size_t>(component[static_cast<std::size_t>(j)])] - lse;
      for (int k = 0; k < K; ++k)
        p(j, k) = std::exp(row[static_cast<std::size_t>(k)] - lse);
    }
    grad = counts - p.colwise().sum().transpose();
    if (hess) {
      // negative Hessian of the concave objective: sum_j diag(p_j) - p_j p_j'
      hess->noalias() = -(p.transpose() * p);
      for (int k = 0; k < K; ++k) (*hess)(k, k) += p.col(k).sum();
    }
    return obj;
  };

  VectorXd grad(K);
  MatrixXd neg_hess(K, K);
  double obj = eval(v, grad, &neg_hess);

  // Free coordinates exclude the pinned reference.
  std::vector<int> free;
  for (int k = 0; k < K; ++k)
    if (k != reference) free.push_back(k);
  const int nf = static_cast<int>(free.size());

  for (int iter = 0; iter < max_iter; ++iter) {
    double gmax = 0.0;
    for (int k : free) gmax = std::max(gmax, std::abs(grad(k)));
    if (gmax < tol) break;

    MatrixXd h(nf, nf);
    VectorXd g(nf);
    for (int a = 0; a < nf; ++a) {
      g(a) = grad(free[static_cast<std::size_t>(a)]);
      for (int b = 0; b < nf; ++b)
        h(a, b) = neg_hess(free[static_cast<std::size_t>(a)],
                           free[static_cast<std::size_t>(b)]);
    }
    // Levenberg damping for the (rare) near-singular population layouts.
    Eigen::LLT<MatrixXd> llt(h);
    double ridge = 0.0;
    while (llt.info() != Eigen::Success) {
      ridge = ridge == 0.0 ? 1e-10 : ridge * 10.0;
      MatrixXd hr = h;
      hr.diagonal().array() += ridge;
      llt.compute(hr);
      if (ridge > 1e6)
        throw NumericalError("reverse_logistic_fit: singular Hessian");
    }
    const VectorXd step = llt.solve(g);

    double scale = 1.0;
    for (int half = 0; half < 60; ++half) {
      VectorXd cand = v;
      for (int a = 0; a < nf; ++a) cand(free[static_cast<std::size_t>(a)]) += scale * step(a);
      VectorXd gc(K);
      const double oc = eval(cand, gc, nullptr);
      if (oc >= obj || scale < 1e-12) {
        v = cand;
        obj = eval(v, grad, &neg_hess);
        break;
      }
      scale *= 0.5;
    }
    if (iter + 1 == max_iter) {
      double g2 = 0.0;
      for (int k : free) g2 = std::max(g2, std::abs(grad(k)));
      if (g2 >= tol)
        throw NumericalError("reverse_logistic_fit: Newton did not converge");
    }
  }

  // log b_k = -v_k, shifted so the reference is exactly 0.
  std::vector<double> log_b(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) log_b[static_cast<std::size_t>(k)] = -(v(k) - v(reference));
  return log_b;
}

std::vector<double> mixture_denominators(const MatrixXd& loglik_coarse,
                                         const std::vector<double>& log_b,
                                         const std::vector<int>& chain_counts) {
  const int nch = static_cast<int>(loglik_coarse.rows());
  const int K = static_cast<int>(loglik_coarse.cols());
  if (static_cast<int>(log_b.size()) != K ||
      static_cast<int>(chain_counts.size()) != K)
    throw ContractViolation("mixture_denominators: shape mismatch");
  std::vector<double> den(static_cast<std::size_t>(nch));
  std::vector<double> terms(static_cast<std::size_t>(K));
  for (int j = 0; j < nch; ++j) {
    for (int k = 0; k < K; ++k)
      terms[static_cast<std::size_t>(k)] =
          std::log(static_cast<double>(chain_counts[static_cast<std::size_t>(k)])) -
          log_b[static_cast<std::size_t>(k)] + loglik_coarse(j, k);
    den[static_cast<std::size_t>(j)] = log_sum_exp(terms);
    if (!std::isfinite(den[static_cast<std::size_t>(j)]))
      throw NumericalError("mixture_bayes_factor: zero denominator for chain " +
                           std::to_string(j));
  }
  return den;
}

double mixture_bayes_factor(const std::vector<double>& loglik_phi,
                            const std::vector<double>& denominators) {
  if (loglik_phi.size() != denominators.size())
    throw ContractViolation("mixture_bayes_factor: shape mismatch");
  std::vector<double> terms(loglik_phi.size());
  for (std::size_t j = 0; j < loglik_phi.size(); ++j)
    terms[j] = loglik_phi[j] - denominators[j];
  return log_sum_exp(terms);
}

void estimate_phi(const GridSpec& grid, BayesFactorTable& table,
                  double ci_level) {
  const int J = grid.J();
  if (static_cast<int>(table.log_bf_fine.size()) != J)
    throw ContractViolation("estimate_phi: table size mismatch");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw ConfigError("ci level must be in (0,1)");

  int best = 0;
  for (int j = 1; j < J; ++j)
    if (table.log_bf_fine[static_cast<std::size_t>(j)] >
        table.log_bf_fine[static_cast<std::size_t>(best)])
      best = j;  // strict '>' breaks ties toward the smaller phi
  table.phi_hat = grid.phi_fine(best);

  const double mx =
      table.log_bf_fine[static_cast<std::size_t>(best)];
  double mn = mx;
  for (double v : table.log_bf_fine) mn = std::min(mn, v);
  table.flat = (mx - mn) < 1e-12;

  if (J == 1) {
    table.ci_lo = table.ci_hi = grid.phi_fine(0);
    return;
  }

  // Unnormalized posterior over the grid -> trapezoid cumulative -> quantiles.
  std::vector<double> cdf(static_cast<std::size_t>(J), 0.0);
  for (int j = 1; j < J; ++j) {
    const double b0 = std::exp(table.log_bf_fine[static_cast<std::size_t>(j - 1)] - mx);
    const double b1 = std::exp(table.log_bf_fine[static_cast<std::size_t>(j)] - mx);
    cdf[static_cast<std::size_t>(j)] =
        cdf[static_cast<std::size_t>(j - 1)] +
        0.5 * (b0 + b1) * (grid.phi_fine(j) - grid.phi_fine(j - 1));
  }
  const double total = cdf.back();
  for (double& c : cdf) c /= total;
  // Strictly increasing by construction (exp > 0); guard roundoff ties.
  for (int j = 1; j < J; ++j)
    if (cdf[static_cast<std::size_t>(j)] <= cdf[static_cast<std::size_t>(j - 1)])
      cdf[static_cast<std::size_t>(j)] =
          std::nextafter(cdf[static_cast<std::size_t>(j - 1)], 2.0);

  MonotoneCubic phi_of_cdf(cdf, grid.fine);
  const double lo_q = 0.5 * (1.0 - ci_level);
  table.ci_lo = phi_of_cdf(lo_q);
  table.ci_hi = phi_of_cdf(1.0 - lo_q);
}

ReweightResult reweight(const std::vector<double>& loglik_at_hat,
                        const MatrixXd& loglik_coarse,
                        const std::vector<double>& lambda,
                        double log_bf_at_hat,
                        const std::vector<double>& log_bf_coarse,
                        double ess_warn_floor) {
  const int nch = static_cast<int>(loglik_coarse.rows());
  const int K = static_cast<int>(loglik_coarse.cols());
  if (static_cast<int>(loglik_at_hat.size()) != nch ||
      static_cast<int>(lambda.size()) != K ||
      static_cast<int>(log_bf_coarse.size()) != K)
    throw ContractViolation("reweight: shape mismatch");

  std::vector<double> logv(static_cast<std::size_t>(nch));
  std::vector<double> terms(static_cast<std::size_t>(K));
  for (int j = 0; j < nch; ++j) {
    for (int k = 0; k < K; ++k)
      terms[static_cast<std::size_t>(k)] =
          std::log(lambda[static_cast<std::size_t>(k)]) + loglik_coarse(j, k) -
          log_bf_coarse[static_cast<std::size_t>(k)];
    logv[static_cast<std::size_t>(j)] =
        loglik_at_hat[static_cast<std::size_t>(j)] - log_bf_at_hat -
        log_sum_exp(terms);
  }
  const double lse = log_sum_exp(logv);
  ReweightResult res;
  res.weights.resize(nch);
  double sumsq = 0.0;
  for (int j = 0; j < nch; ++j) {
    res.weights(j) = std::exp(logv[static_cast<std::size_t>(j)] - lse);
    sumsq += res.weights(j) * res.weights(j);
  }
  res.ess = 1.0 / sumsq;
  res.low_ess_warning = ess_warn_floor > 0.0 && res.ess < ess_warn_floor;
  return res;
}

}  // namespace sebf::eb
