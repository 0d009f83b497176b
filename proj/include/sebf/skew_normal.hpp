#pragma once

#include <cmath>

namespace sebf {

/// Azzalini skew-normal with location xi, scale omega > 0 and shape a.
/// pdf(z) = (2/omega) phi((z-xi)/omega) Phi(a (z-xi)/omega).
struct SkewNormal {
  double xi = 0.0;
  double omega = 1.0;
  double a = 0.0;

  double delta() const { return a / std::sqrt(1.0 + a * a); }
  double mean() const;
  double variance() const;
  double skewness() const;

  double logpdf(double z) const;
  double cdf(double z) const;
  /// Inverse cdf by bracketed bisection, |z_hi - z_lo| tolerance 1e-12.
  double quantile(double p) const;
};

/// Largest |skewness| a skew-normal can represent (delta^2 -> 1 limit).
double skew_normal_max_skewness();

/// Solve the moment equations for (xi, omega, a) given a target mean,
/// variance and skewness. Skewness beyond the family's supremum is clamped
/// to a delta^2 just inside the boundary, so the fit always succeeds.
SkewNormal fit_skew_normal_by_moments(double mean, double variance,
                                      double skewness);

}  // namespace sebf
