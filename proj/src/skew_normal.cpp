#include "sebf/skew_normal.hpp"

#include <algorithm>
#include <stdexcept>

#include "sebf/stable_math.hpp"

namespace sebf {

namespace {
constexpr double kSqrt2OverPi = 0.7978845608028653558798921198687637;
// delta^2 ceiling used when a requested skewness is at or beyond the
// supremum; close enough to 1 to be visually indistinguishable, far enough
// to keep a finite.
constexpr double kDelta2Clamp = 0.999;
}  // namespace

double SkewNormal::mean() const {
  return xi + omega * delta() * kSqrt2OverPi;
}

double SkewNormal::variance() const {
  const double d = delta();
  return omega * omega * (1.0 - 2.0 * d * d / M_PI);
}

double SkewNormal::skewness() const {
  const double c = delta() * kSqrt2OverPi;
  const double v = 1.0 - c * c;
  return 0.5 * (4.0 - M_PI) * c * c * c / (v * std::sqrt(v));
}

double SkewNormal::logpdf(double z) const {
  const double u = (z - xi) / omega;
  // log(2 Phi(a u)) via erfc for a stable left tail.
  const double t = std::erfc(-a * u * 0.7071067811865475244008443621048490);
  double log_tail;
  if (t > 0.0) {
    log_tail = std::log(t);  // log(2 Phi(au)) = log(erfc(-au/sqrt2))
  } else {
    // Asymptotic log Phi(w) ~ -w^2/2 - log(-w sqrt(2 pi)) for w << 0.
    const double w = a * u;
    log_tail = std::log(2.0) - 0.5 * w * w - std::log(-w) -
               0.5 * kLog2Pi;
  }
  return -std::log(omega) + normal_logpdf(u) + log_tail;
}

double SkewNormal::cdf(double z) const {
  const double u = (z - xi) / omega;
  return std::clamp(normal_cdf(u) - 2.0 * owens_t(u, a), 0.0, 1.0);
}

double SkewNormal::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("SkewNormal::quantile: p must be in (0,1)");
  // Bracket around the Gaussian start, expanding until the cdf straddles p.
  double lo = xi - 10.0 * omega, hi = xi + 10.0 * omega;
  int guard = 0;
  while (cdf(lo) > p) {
    lo -= 10.0 * omega;
    if (++guard > 60)
      throw std::runtime_error("SkewNormal::quantile: bracketing failed");
  }
  while (cdf(hi) < p) {
    hi += 10.0 * omega;
    if (++guard > 120)
      throw std::runtime_error("SkewNormal::quantile: bracketing failed");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double skew_normal_max_skewness() {
  const double c2 = kSqrt2OverPi * kSqrt2OverPi;  // delta^2 -> 1 limit of c^2
  const double v = 1.0 - c2;
  return 0.5 * (4.0 - M_PI) * c2 * kSqrt2OverPi / (v * std::sqrt(v));
}

SkewNormal fit_skew_normal_by_moments(double mean, double variance,
                                      double skewness) {
  if (!(variance > 0.0))
    throw std::domain_error("fit_skew_normal_by_moments: variance must be > 0");

  // Invert gamma1 = (4-pi)/2 c^3 / (1-c^2)^{3/2} with c = delta
  // sqrt(2/pi): the signed cube root gives c/sqrt(1-c^2) directly.
  const double r =
      std::cbrt(2.0 * skewness / (4.0 - M_PI));
  double c = r / std::sqrt(1.0 + r * r);
  double delta2 = c * c / (kSqrt2OverPi * kSqrt2OverPi);
  if (delta2 >= kDelta2Clamp) {
    delta2 = kDelta2Clamp;
    c = std::copysign(std::sqrt(delta2) * kSqrt2OverPi, skewness);
  }
  const double delta = c / kSqrt2OverPi;

  SkewNormal sn;
  sn.omega = std::sqrt(variance / (1.0 - c * c));
  sn.xi = mean - sn.omega * c;
  sn.a = delta / std::sqrt(1.0 - delta * delta);
  return sn;
}

}  // namespace sebf
