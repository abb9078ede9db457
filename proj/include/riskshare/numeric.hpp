#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "riskshare/error.hpp"

namespace riskshare {

/// log(sum_i w_i exp(a_i)) with a max shift. Zero weights are skipped.
inline double log_sum_exp(std::span<const double> logs, std::span<const double> weights) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logs.size(); ++i)
    if (weights[i] > 0.0) m = std::max(m, logs[i]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i)
    if (weights[i] > 0.0) s += weights[i] * std::exp(logs[i] - m);
  return m + std::log(s);
}

/// Golden-section search for the minimum of a unimodal f on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                             int max_iter = 500) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

/// Root of a monotone function by bisection. f(lo) and f(hi) must differ in sign.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-13,
                     int max_iter = 400) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorKind::Numerical, "bisection bracket does not change sign");
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= tol * (1.0 + std::abs(mid))) return mid;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Newton on a monotone function with a maintained bracket [lo, hi]; falls
/// back to bisection whenever the Newton step leaves the bracket.
inline double safeguarded_newton(const std::function<std::pair<double, double>(double)>& fdf, double lo,
                                 double hi, double tol = 1e-13, int max_iter = 200) {
  auto [flo, dlo] = fdf(lo);
  (void)dlo;
  auto [fhi, dhi] = fdf(hi);
  (void)dhi;
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) fail(ErrorKind::Numerical, "root bracket does not change sign");
  const bool inc = fhi > 0.0;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < max_iter; ++it) {
    auto [fx, dfx] = fdf(x);
    if (fx == 0.0) return x;
    if ((fx > 0.0) == inc)
      hi = x;
    else
      lo = x;
    double next = (dfx != 0.0) ? x - fx / dfx : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= tol * (1.0 + std::abs(x)) || hi - lo <= tol * (1.0 + std::abs(x))) return next;
    x = next;
  }
  return x;
}

}  // namespace riskshare
