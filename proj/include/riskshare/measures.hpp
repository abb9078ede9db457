#pragma once

// Law-invariant base risk measures on a finite weighted space.
//
// Entropic, AVaR and expectation are all members of one family: the
// penalised worst-case expectation
//     xi(Y) = max { E[qY] - H(q)/alpha : q >= 0, E[q] = 1, q <= cap }
// with entropic = (alpha, inf), AVaR_beta = (inf, 1/(1-beta)) and
// expectation = (inf, 1). Infimal convolution adds the penalties, so the
// family is closed under it: the alphas combine harmonically and the caps
// by minimum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/numeric.hpp"
#include "riskshare/scenario.hpp"

namespace riskshare {

enum class Family { Entropic, AVaR, Expectation };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Entropic: return "entropic";
    case Family::AVaR: return "avar";
    case Family::Expectation: return "expectation";
  }
  return "?";
}

struct BaseMeasure {
  Family family = Family::Expectation;
  double alpha = 0.0;  // entropic risk aversion
  double beta = 0.0;   // AVaR level

  static BaseMeasure entropic(double a) {
    if (!(a > 0.0) || !std::isfinite(a)) fail(ErrorKind::Domain, "entropic risk aversion must be positive");
    return {Family::Entropic, a, 0.0};
  }
  static BaseMeasure avar(double b) {
    if (!(b > 0.0 && b < 1.0)) fail(ErrorKind::Domain, "AVaR level must lie in (0,1)");
    return {Family::AVaR, 0.0, b};
  }
  static BaseMeasure expectation() { return {Family::Expectation, 0.0, 0.0}; }

  /// Penalty scale; infinite means no entropy penalty.
  double risk_aversion() const { return family == Family::Entropic ? alpha : kInfinity; }
  /// Upper bound on dual densities.
  double cap() const {
    switch (family) {
      case Family::Entropic: return kInfinity;
      case Family::AVaR: return 1.0 / (1.0 - beta);
      case Family::Expectation: return 1.0;
    }
    return kInfinity;
  }
  std::string describe() const {
    switch (family) {
      case Family::Entropic: return "entropic(" + std::to_string(alpha) + ")";
      case Family::AVaR: return "avar(" + std::to_string(beta) + ")";
      case Family::Expectation: return "expectation";
    }
    return "?";
  }

  static constexpr double kInfinity = std::numeric_limits<double>::infinity();
};

/// (alpha, cap) form of a base measure or of a convolution of several.
struct CappedEntropic {
  double alpha = BaseMeasure::kInfinity;
  double cap = BaseMeasure::kInfinity;

  static CappedEntropic of(const BaseMeasure& m) { return {m.risk_aversion(), m.cap()}; }
};

inline CappedEntropic convolve(std::span<const BaseMeasure> ms) {
  if (ms.empty()) fail(ErrorKind::Domain, "convolution of an empty family");
  double inv = 0.0, cap = BaseMeasure::kInfinity;
  for (const auto& m : ms) {
    if (m.family == Family::Entropic) inv += 1.0 / m.alpha;
    cap = std::min(cap, m.cap());
  }
  return {inv > 0.0 ? 1.0 / inv : BaseMeasure::kInfinity, cap};
}

struct WaterFill {
  std::vector<double> q;  // optimal density on the scenarios passed in
  double nu = 0.0;        // log normaliser of the uncapped part (finite alpha)
  double value = 0.0;
  std::size_t capped = 0;
};

/// max sum_w p_w (q_w y_w - q_w log q_w / alpha) over 0 <= q <= cap with
/// sum_w p_w q_w = mass. Closed form q = min(cap, exp(alpha y - nu)); for
/// infinite alpha the greedy fill of the largest y.
inline WaterFill water_fill(std::span<const double> p, std::span<const double> y, double alpha, double cap,
                            double mass = 1.0) {
  const std::size_t n = p.size();
  WaterFill out;
  out.q.assign(n, 0.0);
  double ptot = 0.0;
  for (double w : p) ptot += w;
  if (mass < 0.0) fail(ErrorKind::Domain, "negative mass");
  if (mass == 0.0 || n == 0) return out;
  if (std::isfinite(cap) && cap * ptot < mass * (1.0 - 1e-14))
    fail(ErrorKind::Domain, "density cap too small for the requested mass");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // full key so the order (and the rounding) does not depend on scenario labels
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return y[a] != y[b] ? y[a] > y[b] : p[a] > p[b]; });

  if (!std::isfinite(alpha)) {
    double left = mass;
    for (auto w : order) {
      if (left <= 0.0) break;
      const double take = std::min(cap * p[w], left);
      out.q[w] = take / p[w];
      out.value += take * y[w];
      left -= take;
      if (out.q[w] >= cap) ++out.capped;
    }
    out.nu = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  const double logcap = std::isfinite(cap) ? std::log(cap) : BaseMeasure::kInfinity;
  std::vector<double> ay(n);
  for (std::size_t i = 0; i < n; ++i) ay[i] = alpha * y[i];
  double capped_mass = 0.0;
  std::size_t k = 0;
  double nu = 0.0;
  for (; k <= n; ++k) {
    const double rest = mass - capped_mass;
    if (k == n || rest <= 0.0) {
      // everything capped
      nu = -BaseMeasure::kInfinity;
      break;
    }
    std::vector<double> logs, ws;
    for (std::size_t r = k; r < n; ++r) {
      logs.push_back(ay[order[r]]);
      ws.push_back(p[order[r]]);
    }
    nu = log_sum_exp(logs, ws) - std::log(rest);
    if (!(ay[order[k]] - nu > logcap)) break;
    capped_mass += cap * p[order[k]];
  }
  out.capped = k;
  out.nu = nu;
  double value = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t w = order[r];
    if (r < k) {
      out.q[w] = cap;
      value += p[w] * cap * (y[w] - logcap / alpha);
    } else {
      out.q[w] = std::exp(ay[w] - nu);
    }
  }
  if (k < n) value += (nu / alpha) * (mass - capped_mass);
  out.value = value;
  return out;
}

inline WaterFill water_fill(const CappedEntropic& m, const RandomVariable& y) {
  return water_fill(y.space()->probs(), y.values(), m.alpha, m.cap, 1.0);
}

/// xi(Y) for a member of the family (or a convolution).
inline double xi(const CappedEntropic& m, const RandomVariable& y) {
  const auto& pr = y.space()->probs();
  if ((std::isfinite(m.alpha) && !std::isfinite(m.cap)) || m.cap == 1.0) {
    // sum in sorted order: exact invariance under measure-preserving permutations
    std::vector<std::pair<double, double>> vp(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) vp[i] = {y[i], pr[i]};
    std::sort(vp.begin(), vp.end(), std::greater<>());
    if (m.cap == 1.0) {
      double e = 0.0;
      for (const auto& [v, q] : vp) e += q * v;
      return e;
    }
    std::vector<double> logs(vp.size()), ws(vp.size());
    for (std::size_t i = 0; i < vp.size(); ++i) {
      logs[i] = m.alpha * vp[i].first;
      ws[i] = vp[i].second;
    }
    return log_sum_exp(logs, ws) / m.alpha;
  }
  return water_fill(m, y).value;
}

inline double xi(const BaseMeasure& m, const RandomVariable& y) { return xi(CappedEntropic::of(m), y); }

/// Maximising density of the dual representation (a subgradient of xi).
inline std::vector<double> optimal_density(const CappedEntropic& m, const RandomVariable& y) {
  if (m.cap == 1.0) return std::vector<double>(y.size(), 1.0);
  return water_fill(m, y).q;
}

/// xi*(q) for a density q (the functional E[q .]); +inf off the dual domain.
inline ExtReal xi_conjugate(const CappedEntropic& m, const SpacePtr& space, std::span<const double> q,
                            double tol = 1e-9) {
  double mass = 0.0, h = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] < -tol) return ExtReal::pos_inf();
    if (q[i] > m.cap + tol) return ExtReal::pos_inf();
    mass += space->prob(i) * q[i];
    if (q[i] > 0.0) h += space->prob(i) * q[i] * std::log(q[i]);
  }
  if (std::abs(mass - 1.0) > tol) return ExtReal::pos_inf();
  if (!std::isfinite(m.alpha)) return ExtReal::finite(0.0);
  return ExtReal::finite(h / m.alpha);
}

/// Relative entropy H(Q|P) of a density.
inline double relative_entropy(const SpacePtr& space, std::span<const double> q) {
  double h = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0) h += space->prob(i) * q[i] * std::log(q[i]);
  return h;
}

/// n non-decreasing piecewise-linear functions with sum equal to the identity.
/// f_i(x) = offsets[i] + integral from 0 to x of the piecewise-constant slope.
struct ComonotoneSplit {
  std::vector<double> knots;                // increasing breakpoints
  std::vector<std::vector<double>> slopes;  // [agent][segment], knots.size()+1 segments
  std::vector<double> offsets;              // f_i(0)

  std::size_t size() const { return offsets.size(); }

  double apply(std::size_t i, double x) const {
    // integrate slope from 0 to x
    auto seg_of = [&](double t) {
      return static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin());
    };
    const double a = std::min(0.0, x), b = std::max(0.0, x);
    double integral = 0.0, lo = a;
    std::size_t s = seg_of(a);
    while (lo < b) {
      const double hi = (s < knots.size()) ? std::min(b, std::max(lo, knots[s])) : b;
      integral += slopes[i][s] * (hi - lo);
      lo = hi;
      ++s;
      if (s > knots.size()) break;
    }
    return offsets[i] + (x >= 0.0 ? integral : -integral);
  }

  RandomVariable apply(std::size_t i, const RandomVariable& x) const {
    RandomVariable out(x.space());
    for (std::size_t w = 0; w < x.size(); ++w) out[w] = apply(i, x[w]);
    return out;
  }

  /// slopes in [0,1] summing to 1 on each segment and offsets summing to 0.
  bool is_partition_of_identity(double tol = 1e-12) const {
    for (std::size_t s = 0; s <= knots.size(); ++s) {
      double tot = 0.0;
      for (const auto& sl : slopes) {
        if (sl[s] < -tol || sl[s] > 1.0 + tol) return false;
        tot += sl[s];
      }
      if (std::abs(tot - 1.0) > tol) return false;
    }
    double off = 0.0;
    for (double o : offsets) off += o;
    return std::abs(off) <= tol * (1.0 + std::abs(*std::max_element(offsets.begin(), offsets.end())));
  }
};

struct SplitResult {
  ComonotoneSplit split;
  double value = 0.0;        // convolution value xi(Y)
  std::vector<double> parts;  // xi_i(f_i(Y)) after rebalancing
  double zeta = 0.0;          // breakpoint of the mixed case (NaN otherwise)
};

/// Comonotone split of Y attaining the infimal convolution of the members.
/// Constants are rebalanced so that part i carries the fraction weight_i of
/// the total, where weights are the proportional entropic shares (the
/// absorbing AVaR or expectation part carries zero).
inline SplitResult comonotone_split(std::span<const BaseMeasure> ms, const RandomVariable& y) {
  const std::size_t n = ms.size();
  if (n == 0) fail(ErrorKind::Domain, "comonotone split of an empty family");
  const CappedEntropic conv = convolve(ms);
  SplitResult out;
  out.value = xi(conv, y);
  out.zeta = std::numeric_limits<double>::quiet_NaN();
  ComonotoneSplit& f = out.split;
  f.offsets.assign(n, 0.0);
  std::vector<double> weight(n, 0.0);

  auto first_with_cap = [&](double cap) {
    for (std::size_t i = 0; i < n; ++i)
      if (ms[i].cap() == cap) return i;
    return n;
  };

  if (!std::isfinite(conv.alpha) || conv.cap == 1.0) {
    // a single member absorbs everything
    const std::size_t k = first_with_cap(conv.cap);
    f.slopes.assign(n, std::vector<double>(1, 0.0));
    f.slopes[k][0] = 1.0;
    weight[k] = 1.0;
  } else if (!std::isfinite(conv.cap)) {
    f.slopes.assign(n, std::vector<double>(1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      f.slopes[i][0] = conv.alpha / ms[i].alpha;
      weight[i] = f.slopes[i][0];
    }
  } else {
    const WaterFill wf = water_fill(conv, y);
    const double zeta = (wf.nu + std::log(conv.cap)) / conv.alpha;
    out.zeta = zeta;
    f.knots = {zeta};
    f.slopes.assign(n, std::vector<double>(2, 0.0));
    const std::size_t k = first_with_cap(conv.cap);
    f.slopes[k] = {0.0, 1.0};
    f.offsets[k] = std::max(0.0, -zeta);
    for (std::size_t i = 0; i < n; ++i) {
      if (ms[i].family != Family::Entropic) continue;
      const double w = conv.alpha / ms[i].alpha;
      f.slopes[i] = {w, 0.0};
      f.offsets[i] = w * std::min(0.0, zeta);
      weight[i] = w;
    }
  }

  // Rebalance: xi_i(f_i(Y) + c) = xi_i(f_i(Y)) + c.
  out.parts.assign(n, 0.0);
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = xi(ms[i], f.apply(i, y));
  double csum = 0.0;
  std::size_t absorb = n;
  for (std::size_t i = 0; i < n; ++i) {
    const bool active = std::any_of(f.slopes[i].begin(), f.slopes[i].end(), [](double s) { return s > 0.0; });
    if (!active) continue;
    absorb = i;
    const double c = weight[i] * out.value - raw[i];
    f.offsets[i] += c;
    csum += c;
  }
  // rounding residue lands on the last active member
  f.offsets[absorb] -= csum;
  for (std::size_t i = 0; i < n; ++i) out.parts[i] = xi(ms[i], f.apply(i, y));
  return out;
}

}  // namespace riskshare
