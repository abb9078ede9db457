#pragma once

// Cheapest securitisation under a smooth base measure:
//     inf { price(Z) : Z in span(basis), xi(X - Z) <= 0 }.
// Securities are written Z = t U + N(s) with U >= 0 of unit price and N(s)
// ranging over the zero-price securities. For fixed s the constraint pins
// t by a monotone root; the outer problem in s is convex and smooth, solved
// by damped Newton with a finite-difference Hessian.

#include <cmath>
#include <optional>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/linalg.hpp"
#include "riskshare/linprog.hpp"
#include "riskshare/measures.hpp"
#include "riskshare/numeric.hpp"
#include "riskshare/scenario.hpp"

namespace riskshare {

struct SecuritisedMin {
  ExtReal value;                // price of the cheapest security (+inf if none works)
  std::vector<double> coeffs;   // in the given basis
  RandomVariable security;      // Z
  std::vector<double> density;  // optimal dual density of xi at X - Z
  double unit_weight = 0.0;     // E_q[U]
};

struct UnitSecurity {
  std::vector<double> coeffs;
  bool strictly_positive = false;
};

/// A non-negative security of unit price, preferring cash and otherwise the
/// one with the largest minimum coordinate.
inline std::optional<UnitSecurity> unit_security(const SpacePtr& space, const std::vector<RandomVariable>& basis,
                                                 const std::vector<double>& prices) {
  const std::size_t k = basis.size(), n = space->size();
  std::vector<Vec> cols;
  for (const auto& b : basis) cols.push_back(b.values());
  if (k > 0) {
    const Vec one(n, 1.0);
    Vec c = least_squares(cols, one);
    Vec fit(n, 0.0);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t w = 0; w < n; ++w) fit[w] += c[j] * cols[j][w];
    double resid = 0.0;
    for (std::size_t w = 0; w < n; ++w) resid = std::max(resid, std::abs(fit[w] - 1.0));
    const double price = dot(c, prices);
    if (resid <= 1e-10 && price > 1e-12) {
      for (double& v : c) v /= price;
      return UnitSecurity{c, true};
    }
  }
  // max m  s.t.  sum_j c_j b_j >= m, price(c) = 1, m <= 1
  LpProblem lp;
  for (std::size_t j = 0; j < k; ++j) lp.add_variable(0.0);
  const std::size_t m = lp.add_variable(-1.0, -kInf, 1.0);
  for (std::size_t w = 0; w < n; ++w) {
    std::vector<LpTerm> t;
    for (std::size_t j = 0; j < k; ++j)
      if (basis[j][w] != 0.0) t.push_back({j, basis[j][w]});
    t.push_back({m, -1.0});
    lp.add_row(std::move(t), Sense::GreaterEq, 0.0);
  }
  std::vector<LpTerm> pt;
  for (std::size_t j = 0; j < k; ++j) pt.push_back({j, prices[j]});
  lp.add_row(pt, Sense::Equal, 1.0);
  auto s = solve(lp);
  if (s.status == LpStatus::Optimal && s.primal[m] > 1e-12)
    return UnitSecurity{Vec(s.primal.begin(), s.primal.begin() + static_cast<std::ptrdiff_t>(k)), true};
  // non-negative but not strictly positive
  LpProblem f;
  for (std::size_t j = 0; j < k; ++j) f.add_variable(0.0);
  for (std::size_t w = 0; w < n; ++w) {
    std::vector<LpTerm> t;
    for (std::size_t j = 0; j < k; ++j)
      if (basis[j][w] != 0.0) t.push_back({j, basis[j][w]});
    if (!t.empty()) f.add_row(std::move(t), Sense::GreaterEq, 0.0);
  }
  f.add_row(pt, Sense::Equal, 1.0);
  auto fs = solve(f);
  if (fs.status != LpStatus::Optimal) return std::nullopt;
  return UnitSecurity{fs.primal, false};
}

namespace detail {

inline RandomVariable combine(const SpacePtr& space, const std::vector<RandomVariable>& basis,
                              std::span<const double> c) {
  RandomVariable z(space);
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t w = 0; w < z.size(); ++w) z[w] += c[j] * basis[j][w];
  return z;
}

}  // namespace detail

/// Requires a finite penalty scale (entropic component present). Measures
/// without one are LP-representable and go through the LP route.
inline SecuritisedMin securitised_min(const CappedEntropic& m, const RandomVariable& x,
                                      const std::vector<RandomVariable>& basis, const std::vector<double>& prices) {
  if (!std::isfinite(m.alpha)) fail(ErrorKind::Internal, "securitised_min needs a finite penalty scale");
  const SpacePtr& space = x.space();
  const std::size_t k = basis.size();
  auto unit = unit_security(space, basis, prices);
  if (!unit) fail(ErrorKind::Contract, "security market has no non-negative unit-price security");
  const RandomVariable u = detail::combine(space, basis, unit->coeffs);

  // zero-price directions in coefficient space
  std::vector<Vec> kernel;
  if (k > 1) kernel = null_space(Matrix::from_rows({prices}));
  if (!kernel.empty() && !unit->strictly_positive)
    fail(ErrorKind::Unsupported, "zero-price securities without a strictly positive unit security");
  std::vector<RandomVariable> nvec;
  for (const auto& c : kernel) nvec.push_back(detail::combine(space, basis, c));

  auto shifted = [&](std::span<const double> s) {
    RandomVariable y = x;
    for (std::size_t j = 0; j < s.size(); ++j) y -= s[j] * nvec[j];
    return y;
  };
  auto g = [&](const RandomVariable& y, double t) {
    RandomVariable v = y;
    v -= t * u;
    return v;
  };

  // root in t of xi(y - t u) = 0; returns nullopt when no t works
  const bool cash_unit = unit->strictly_positive && u.max() == u.min();
  auto root = [&](const RandomVariable& y) -> std::optional<double> {
    // cash additivity gives the root directly
    if (cash_unit) return xi(m, y) / u[0];
    double lo, hi;
    if (unit->strictly_positive) {
      lo = kInf;
      hi = -kInf;
      for (std::size_t w = 0; w < y.size(); ++w) {
        lo = std::min(lo, y[w] / u[w]);
        hi = std::max(hi, y[w] / u[w]);
      }
      if (hi - lo <= 1e-15 * (1.0 + std::abs(hi))) return hi;
    } else {
      hi = 1.0;
      int guard = 0;
      while (xi(m, g(y, hi)) > 0.0) {
        hi = 2.0 * std::abs(hi) + 1.0;
        if (++guard > 60) return std::nullopt;
      }
      lo = hi - 1.0;
      guard = 0;
      while (xi(m, g(y, lo)) < 0.0) {
        lo = lo - 2.0 * (std::abs(lo) + 1.0);
        if (++guard > 200) fail(ErrorKind::Numerical, "cannot bracket securitisation root");
      }
    }
    return safeguarded_newton(
        [&](double t) {
          const RandomVariable v = g(y, t);
          const WaterFill wf = water_fill(m, v);
          double eu = 0.0;
          for (std::size_t w = 0; w < v.size(); ++w) eu += space->prob(w) * wf.q[w] * u[w];
          return std::make_pair(xi(m, v), -eu);
        },
        lo, hi, 1e-15);
  };

  struct Eval {
    double t = kInf;
    Vec grad;
    std::vector<double> q;
    double eu = 0.0;
    bool finite = false;
  };
  auto eval = [&](std::span<const double> s) {
    Eval e;
    const RandomVariable y = shifted(s);
    auto t = root(y);
    if (!t) return e;
    e.finite = true;
    e.t = *t;
    const RandomVariable v = g(y, *t);
    e.q = optimal_density(m, v);
    for (std::size_t w = 0; w < v.size(); ++w) e.eu += space->prob(w) * e.q[w] * u[w];
    e.grad.assign(s.size(), 0.0);
    for (std::size_t j = 0; j < s.size(); ++j) {
      double en = 0.0;
      for (std::size_t w = 0; w < v.size(); ++w) en += space->prob(w) * e.q[w] * nvec[j][w];
      e.grad[j] = -en / e.eu;
    }
    return e;
  };

  const std::size_t d = nvec.size();
  Vec s(d, 0.0);
  Eval cur = eval(s);
  SecuritisedMin out;
  if (!cur.finite) {
    out.value = ExtReal::pos_inf();
    return out;
  }
  for (int iter = 0; iter < 200 && d > 0; ++iter) {
    if (norm_inf(cur.grad) <= 1e-13) break;
    // finite-difference Hessian of the gradient
    Matrix h(d, d);
    const double step = 1e-6;
    for (std::size_t j = 0; j < d; ++j) {
      Vec sp = s, sm = s;
      sp[j] += step;
      sm[j] -= step;
      Eval ep = eval(sp), em = eval(sm);
      if (!ep.finite || !em.finite) fail(ErrorKind::Numerical, "securitisation left the feasible region");
      for (std::size_t i = 0; i < d; ++i) h(i, j) = (ep.grad[i] - em.grad[i]) / (2.0 * step);
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) h(i, j) = h(j, i) = 0.5 * (h(i, j) + h(j, i));
    Vec dir;
    Vec ng(d);
    for (std::size_t i = 0; i < d; ++i) ng[i] = -cur.grad[i];
    double reg = 0.0;
    for (int tries = 0; tries < 30; ++tries) {
      Matrix hr = h;
      for (std::size_t i = 0; i < d; ++i) hr(i, i) += reg;
      if (solve_square(hr, ng, dir) && dot(dir, cur.grad) < 0.0) break;
      reg = reg == 0.0 ? 1e-8 : reg * 10.0;
      dir.clear();
    }
    if (dir.empty()) dir = ng;
    double step_len = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Vec trial = s;
      for (std::size_t i = 0; i < d; ++i) trial[i] += step_len * dir[i];
      Eval e = eval(trial);
      if (e.finite && e.t <= cur.t + 1e-4 * step_len * dot(dir, cur.grad) + 1e-15 * (1.0 + std::abs(cur.t))) {
        s = trial;
        cur = e;
        moved = true;
        break;
      }
      step_len *= 0.5;
    }
    if (norm_inf(s) > 1e12) fail(ErrorKind::Numerical, "securitisation diverges; zero-price arbitrage");
    if (!moved || step_len * norm_inf(dir) <= 1e-15 * (1.0 + norm_inf(s))) break;
  }

  out.value = ExtReal::finite(cur.t);
  out.coeffs.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) out.coeffs[j] = cur.t * unit->coeffs[j];
  for (std::size_t l = 0; l < d; ++l)
    for (std::size_t j = 0; j < k; ++j) out.coeffs[j] += s[l] * kernel[l][j];
  out.security = detail::combine(space, basis, out.coeffs);
  out.density = cur.q;
  out.unit_weight = cur.eu;
  return out;
}

}  // namespace riskshare
