#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "sebf/errors.hpp"
#include "sebf/suffstats.hpp"

namespace sebf::eb {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Fine evaluation grid for the range parameter with the coarse sampling
/// grid embedded in it. Chains are simulated at the coarse points only;
/// Bayes factors are evaluated over the whole fine grid.
struct GridSpec {
  std::vector<double> fine;        // ascending, all > 0
  std::vector<int> coarse;         // indices into fine, ascending
  int reference = 0;               // position within `coarse` of phi~
  std::vector<int> chain_counts;   // L_k per coarse point

  int J() const { return static_cast<int>(fine.size()); }
  int K() const { return static_cast<int>(coarse.size()); }
  int total_chains() const;
  double phi_fine(int j) const { return fine[static_cast<std::size_t>(j)]; }
  double phi_coarse(int k) const {
    return fine[static_cast<std::size_t>(coarse[static_cast<std::size_t>(k)])];
  }
  double phi_ref() const { return phi_coarse(reference); }
  /// lambda_k = L_k / sum L.
  std::vector<double> lambda() const;
  void validate() const;
};

/// Per-time empirical Bayes summary appended to the results stream.
struct BayesFactorTable {
  int t = 0;
  std::vector<double> log_b_coarse;  // over coarse grid, reference pinned to 0
  std::vector<double> log_bf_fine;   // log B(phi; phi~) over the fine grid
  double phi_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool flat = false;  // table was flat; interval spans the grid
};

/// Reverse logistic regression (Geyer-style) for the coarse-grid Bayes
/// factors. `loglik` is chains x K with entry (j,k) = log p(x^{(j)} |
/// theta^{(j)}, phi_k); `component` gives each chain's coarse index. Returns
/// log b over the coarse grid with the reference entry pinned to 0. Newton
/// on the concave objective; converges when the gradient max-norm drops
/// below `tol`.
std::vector<double> reverse_logistic_fit(const MatrixXd& loglik,
                                         const std::vector<int>& component,
                                         const std::vector<double>& lambda,
                                         int reference, double tol = 1e-10,
                                         int max_iter = 200);

/// Per-chain mixture denominators log sum_k' (L_k'/b_k') p(x|theta,phi_k'),
/// shared by every fine-grid evaluation at this time step.
std::vector<double> mixture_denominators(const MatrixXd& loglik_coarse,
                                         const std::vector<double>& log_b,
                                         const std::vector<int>& chain_counts);

/// log B(phi; phi~) for one fine-grid column of per-chain log-likelihoods.
double mixture_bayes_factor(const std::vector<double>& loglik_phi,
                            const std::vector<double>& denominators);

/// Argmax over the fine grid (ties to the smaller phi) plus a credible
/// interval read off the trapezoid-normalized cumulative of exp(log B)
/// by monotone piecewise-cubic interpolation of phi against the cdf.
void estimate_phi(const GridSpec& grid, BayesFactorTable& table,
                  double ci_level = 0.99);

struct ReweightResult {
  VectorXd weights;       // normalized v-bar, one per chain
  double ess = 0.0;       // 1 / sum v-bar^2
  bool low_ess_warning = false;
};

/// Importance weights rescaling the coarse-mixture draws to the phi_hat
/// posterior. `loglik_at_hat` is log p(x|theta, phi_hat) per chain;
/// `loglik_coarse` as in reverse_logistic_fit; `log_bf_at` / `log_bf_coarse`
/// are table values at phi_hat and at the coarse points.
ReweightResult reweight(const std::vector<double>& loglik_at_hat,
                        const MatrixXd& loglik_coarse,
                        const std::vector<double>& lambda,
                        double log_bf_at_hat,
                        const std::vector<double>& log_bf_coarse,
                        double ess_warn_floor = 0.0);

}  // namespace sebf::eb
