#include "sebf/rng.hpp"

#include <stdexcept>

namespace sebf {

// Marsaglia–Tsang squeeze; shapes < 1 are boosted via the U^(1/a) identity.
double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::domain_error("Rng::gamma: shape must be > 0");
  if (shape < 1.0) {
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Inversion by cdf walk, chunked through Poisson additivity so each walk stays
// short even for large means. Exact and deterministic, used only on the
// simulation path.
long Rng::poisson(double mean) {
  if (!(mean >= 0.0)) throw std::domain_error("Rng::poisson: mean must be >= 0");
  if (mean == 0.0) return 0;
  long total = 0;
  double remaining = mean;
  while (remaining > 25.0) {
    const double chunk = 20.0;
    total += poisson(chunk);
    remaining -= chunk;
  }
  const double u = uniform();
  double p = std::exp(-remaining);
  double cdf = p;
  long k = 0;
  while (u > cdf && k < 4000) {
    ++k;
    p *= remaining / static_cast<double>(k);
    cdf += p;
  }
  return total + k;
}

}  // namespace sebf
