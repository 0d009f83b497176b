#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

namespace sebf {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112353;

// --- standard normal ---------------------------------------------------

double normal_cdf(double z);
double normal_quantile(double p);  // Wichura AS 241, double precision

inline double normal_logpdf(double z) { return -0.5 * (kLog2Pi + z * z); }
inline double normal_pdf(double z) { return std::exp(normal_logpdf(z)); }

/// Owen's T function T(h, a).
double owens_t(double h, double a);

// --- log-space reductions ----------------------------------------------

double log_sum_exp(std::span<const double> v);

inline double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(std::span<const double>(v));
}

// --- compensated accumulation -------------------------------------------

/// Kahan-compensated accumulator, elementwise over Eigen types or plain
/// doubles. Long runs add many small increments to large totals; the
/// compensation keeps the accumulated error O(1) ulps instead of O(t).
template <typename T>
struct Kahan {
  T value;
  T comp;

  void add(const T& x) {
    if constexpr (std::is_arithmetic_v<T>) {
      T y = x - comp;
      T t = value + y;
      comp = (t - value) - y;
      value = t;
    } else {
      T y = x - comp;
      T t = value + y;
      comp = (t - value) - y;
      value = t;
    }
  }
};

// --- monotone piecewise-cubic interpolation ------------------------------

/// Fritsch–Carlson monotone cubic through (x, y); x strictly increasing.
/// Used to read quantiles off a cumulative distribution, where overshoot
/// from a global polynomial would break monotonicity.
class MonotoneCubic {
 public:
  MonotoneCubic(std::vector<double> x, std::vector<double> y);
  double operator()(double xq) const;

 private:
  std::vector<double> x_, y_, slope_;
};

}  // namespace sebf
