#pragma once

// Brute-force baselines for small instances. They share no code path with
// the LP and closed-form solvers beyond single-agent rho evaluations.

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "riskshare/market.hpp"
#include "riskshare/measures.hpp"
#include "riskshare/numeric.hpp"
#include "riskshare/regime.hpp"
#include "riskshare/sharing.hpp"

namespace riskshare {

/// Per-scenario box for the first agent's part and a uniform resolution.
struct GridSpec {
  std::vector<double> lo, hi;
  double h = 0.05;
  static constexpr double kMaxPoints = 1e7;

  static GridSpec around(const RandomVariable& centre, double radius, double h) {
    GridSpec g;
    for (std::size_t w = 0; w < centre.size(); ++w) {
      g.lo.push_back(centre[w] - radius);
      g.hi.push_back(centre[w] + radius);
    }
    g.h = h;
    return g;
  }

  std::size_t steps(std::size_t w) const { return static_cast<std::size_t>(std::floor((hi[w] - lo[w]) / h + 1e-9)) + 1; }
};

/// Sup-norm Lipschitz constant of rho on its ideal: 1 / max min_{supp} U over
/// unit-price U in the security space.
inline double rho_lipschitz(const Regime& r) {
  const auto& mk = r.market();
  const auto supp = r.support().indices();
  LpProblem lp;
  for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(0.0);
  const std::size_t m = lp.add_variable(-1.0, -kInf, 1e6);
  for (auto w : supp) {
    std::vector<LpTerm> t;
    for (std::size_t k = 0; k < mk.size(); ++k)
      if (mk.basis[k][w] != 0.0) t.push_back({k, mk.basis[k][w]});
    t.push_back({m, -1.0});
    lp.add_row(std::move(t), Sense::GreaterEq, 0.0);
  }
  std::vector<LpTerm> pt;
  for (std::size_t k = 0; k < mk.size(); ++k) pt.push_back({k, mk.prices[k]});
  lp.add_row(pt, Sense::Equal, 1.0);
  auto s = solve(lp);
  if (s.status != LpStatus::Optimal || s.primal[m] <= 1e-12) return kInf;
  return 1.0 / s.primal[m];
}

struct BruteLambda {
  double lower = 0.0;     // best - omega: certified lower bound when the optimum lies in the box
  double best = kInf;     // smallest grid value, an upper bound on Lambda
  double omega = 0.0;     // modulus of continuity at the grid resolution
  std::vector<double> lipschitz;
  Allocation argmin;
  std::size_t points = 0;
  bool proportional = false;  // searched over X_1 = theta X instead of a box
};

namespace detail {

inline double rho_or_inf(const Regime& r, const RandomVariable& x) { return rho(r, x).value.as_double(); }

}  // namespace detail

/// min over a grid of rho_1(X_1) + rho_2(X - X_1). Two agents; for at most
/// four scenarios the grid covers the shared coordinates of the box, for
/// larger law-invariant cash systems it covers proportional splits.
inline BruteLambda brute_lambda(const AgentSystem& s, const RandomVariable& x, const GridSpec& g) {
  if (s.size() != 2) fail(ErrorKind::Domain, "grid oracle handles two agents");
  if (!(g.h > 0.0)) fail(ErrorKind::Domain, "grid resolution must be positive");
  const SpacePtr& sp = s.space();
  const Regime& r1 = s.regime(0);
  const Regime& r2 = s.regime(1);
  BruteLambda out;
  out.lipschitz = {rho_lipschitz(r1), rho_lipschitz(r2)};
  const double lsum = out.lipschitz[0] + out.lipschitz[1];

  if (sp->size() > 4) {
    if (!s.all_law_invariant()) fail(ErrorKind::Domain, "grid oracle handles at most four scenarios");
    const std::size_t steps = static_cast<std::size_t>(std::floor(1.0 / g.h + 1e-9)) + 1;
    if (static_cast<double>(steps) > GridSpec::kMaxPoints) fail(ErrorKind::Domain, "grid exceeds the point cap");
    out.proportional = true;
    for (std::size_t k = 0; k < steps; ++k) {
      const double th = std::min(1.0, static_cast<double>(k) * g.h);
      RandomVariable x1 = th * x;
      RandomVariable x2 = x - x1;
      const double v = detail::rho_or_inf(r1, x1) + detail::rho_or_inf(r2, x2);
      ++out.points;
      if (v < out.best) {
        out.best = v;
        out.argmin.parts = {x1, x2};
      }
    }
    out.omega = lsum * 0.5 * g.h * x.sup_norm();
    out.lower = out.best - out.omega;
    return out;
  }

  if (g.lo.size() != sp->size() || g.hi.size() != sp->size()) fail(ErrorKind::Structural, "grid bounds per scenario");
  std::vector<std::size_t> free;
  RandomVariable base(sp);
  for (std::size_t w = 0; w < sp->size(); ++w) {
    const bool in1 = r1.support().includes(w), in2 = r2.support().includes(w);
    if (in1 && in2) free.push_back(w);
    else if (in1) base[w] = x[w];
    else if (!in2) fail(ErrorKind::Domain, "scenario covered by neither agent");
  }
  double total = 1.0;
  for (auto w : free) total *= static_cast<double>(g.steps(w));
  if (total > GridSpec::kMaxPoints) fail(ErrorKind::Domain, "grid exceeds the point cap");

  std::vector<std::size_t> idx(free.size(), 0);
  while (true) {
    RandomVariable x1 = base;
    for (std::size_t k = 0; k < free.size(); ++k) x1[free[k]] = g.lo[free[k]] + static_cast<double>(idx[k]) * g.h;
    RandomVariable x2 = x - x1;
    const double v = detail::rho_or_inf(r1, x1) + detail::rho_or_inf(r2, x2);
    ++out.points;
    if (v < out.best) {
      out.best = v;
      out.argmin.parts = {x1, x2};
    }
    std::size_t k = 0;
    for (; k < free.size(); ++k) {
      if (++idx[k] < g.steps(free[k])) break;
      idx[k] = 0;
    }
    if (k == free.size()) break;
  }
  out.omega = free.empty() ? 0.0 : lsum * 0.5 * g.h;
  out.lower = out.best - out.omega;
  return out;
}

struct ParetoVerdict {
  bool pareto = true;
  double gap = 0.0;  // sum of risks of the allocation minus the grid minimum
  double omega = 0.0;
  std::optional<Allocation> witness;  // strictly dominating allocation
};

/// No grid allocation has a smaller total risk. A smaller total yields a
/// strictly dominating allocation after moving the saving through a shared
/// unit-price security.
inline ParetoVerdict verify_pareto(const AgentSystem& s, const RandomVariable& x, const Allocation& a,
                                   const GridSpec& g, double tol = 1e-9) {
  if (s.size() != 2 || a.size() != 2) fail(ErrorKind::Domain, "grid oracle handles two agents");
  const double r1 = detail::rho_or_inf(s.regime(0), a.parts[0]);
  const double r2 = detail::rho_or_inf(s.regime(1), a.parts[1]);
  auto b = brute_lambda(s, x, g);
  ParetoVerdict out;
  out.omega = b.omega;
  out.gap = (r1 + r2) - b.best;
  if (!(out.gap > tol)) return out;
  out.pareto = false;
  Allocation w = b.argmin;
  const double d1 = detail::rho_or_inf(s.regime(0), w.parts[0]);
  if (auto z = shared_unit_security(s, 0, 1)) {
    const double t = r1 - d1 - 0.5 * out.gap;
    w.parts[0] += t * *z;
    w.parts[1] -= t * *z;
  }
  out.witness = w;
  return out;
}

struct FdCheck {
  bool kink = false;
  double max_rel_error = 0.0;    // smooth path
  double worst_violation = 0.0;  // kink path: max of Lambda(X) + phi(Y - X) - Lambda(Y)
  bool pass = false;
};

/// Central differences against the subgradient weights; at kinks the
/// subgradient inequality on sampled points instead.
inline FdCheck fd_subgradient_check(const AgentSystem& s, const RandomVariable& x, const Functional& phi,
                                    unsigned seed = 0, double delta = 1e-5, std::size_t samples = 100,
                                    double rel_tol = 1e-4, double ineq_tol = 1e-8) {
  const SpacePtr& sp = s.space();
  const double l0 = lambda(s, x).value.value();
  FdCheck out;
  std::vector<double> fd(sp->size());
  for (std::size_t w = 0; w < sp->size(); ++w) {
    RandomVariable up = x, dn = x;
    up[w] += delta;
    dn[w] -= delta;
    const double lu = lambda(s, up).value.as_double(), ld = lambda(s, dn).value.as_double();
    const double right = (lu - l0) / delta, left = (l0 - ld) / delta;
    if (!std::isfinite(right) || !std::isfinite(left) || std::abs(right - left) > 1e-4 * (1.0 + std::abs(right)))
      out.kink = true;
    fd[w] = (lu - ld) / (2.0 * delta);
    const double wt = phi.weight(w);
    out.max_rel_error = std::max(out.max_rel_error, std::abs(fd[w] - wt) / std::max(std::abs(wt), 1e-6));
  }
  if (!out.kink) {
    out.pass = out.max_rel_error <= rel_tol;
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t k = 0; k < samples; ++k) {
    RandomVariable y = x;
    for (std::size_t w = 0; w < sp->size(); ++w) y[w] += u(rng);
    const ExtReal ly = lambda(s, y).value;
    if (ly.is_pos_inf()) continue;
    const double viol = l0 + phi(y - x) - ly.as_double();
    out.worst_violation = std::max(out.worst_violation, viol);
  }
  out.pass = out.worst_violation <= ineq_tol * (1.0 + std::abs(l0));
  return out;
}

// ---------------------------------------------------------------------------
// One-dimensional searches for the two worked law-invariant configurations

namespace detail {

/// Minimiser of a convex function on the real line: coarse scan of an
/// expanding window, then golden section on the best cell.
inline std::pair<double, double> convex_line_min(const std::function<double(double)>& f, double centre, double width,
                                                 std::size_t cells = 200, bool expand_window = true) {
  double lo = centre - width, hi = centre + width;
  for (int expand = 0; expand < 40; ++expand) {
    double best = kInf;
    std::size_t arg = 0;
    std::vector<double> vals(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) {
      vals[k] = f(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(cells));
      if (vals[k] < best) {
        best = vals[k];
        arg = k;
      }
    }
    if (expand_window && (arg == 0 || arg == cells)) {
      const double w = hi - lo;
      lo -= w;
      hi += w;
      continue;
    }
    const double step = (hi - lo) / static_cast<double>(cells);
    const double a = lo + step * static_cast<double>(arg == 0 ? 0 : arg - 1);
    const double b = lo + step * static_cast<double>(std::min(cells, arg + 1));
    const double t = golden_section(f, a, b, 1e-12);
    return {t, f(t)};
  }
  fail(ErrorKind::Numerical, "line search window does not bracket a minimum");
}

}  // namespace detail

/// p min_r xi_alpha(X - r 1_A + r 1_A^c) for two entropic agents.
inline double entropic_pair_oracle(double p, double beta, double gamma, const RandomVariable& a_ind,
                               const RandomVariable& x) {
  const BaseMeasure m = BaseMeasure::entropic(beta * gamma / (beta + gamma));
  RandomVariable n = a_ind - (RandomVariable::constant(x.space(), 1.0) - a_ind);
  auto f = [&](double r) { return xi(m, x - r * n); };
  return p * detail::convex_line_min(f, 0.0, 1.0 + x.sup_norm()).second;
}

/// min_s min_zeta AVaR((Y_s - zeta)^+) + xi_gamma(Y_s ^ zeta), Y_s = X - s N.
inline double avar_entropic_oracle(double beta, double gamma, const RandomVariable& a_ind, double q_star_a,
                               const RandomVariable& x) {
  const double r = q_star_a / (1.0 - q_star_a);
  RandomVariable n = a_ind - r * (RandomVariable::constant(x.space(), 1.0) - a_ind);
  const BaseMeasure av = BaseMeasure::avar(beta), en = BaseMeasure::entropic(gamma);
  auto inner = [&](const RandomVariable& y) {
    auto g = [&](double z) {
      RandomVariable t(y.space()), b(y.space());
      for (std::size_t w = 0; w < y.size(); ++w) {
        t[w] = std::max(0.0, y[w] - z);
        b[w] = std::min(y[w], z);
      }
      return xi(av, t) + xi(en, b);
    };
    // flat outside [min Y, max Y], so a fixed window suffices
    return detail::convex_line_min(g, 0.5 * (y.min() + y.max()), 0.5 * (y.max() - y.min()) + 1.0, 200, false)
        .second;
  };
  auto outer = [&](double s) { return inner(x - s * n); };
  return detail::convex_line_min(outer, 0.0, 1.0 + x.sup_norm(), 60).second;
}

}  // namespace riskshare
