#pragma once

// Optimal number of subsidiaries: minimise Lambda_n(W) + c(n) over n, where
// Lambda_n shares W among the first n regimes of a sequence.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskshare/market.hpp"
#include "riskshare/regime.hpp"
#include "riskshare/sharing.hpp"

namespace riskshare {

struct CostFunction {
  std::function<double(std::size_t)> eval;
  std::string name;

  double operator()(std::size_t n) const { return eval(n); }

  static CostFunction linear(double rate) {
    if (!(rate >= 0.0)) fail(ErrorKind::Domain, "cost rate must be non-negative");
    return {[rate](std::size_t n) { return rate * static_cast<double>(n); }, "linear"};
  }
  /// height for every started block of width subsidiaries
  static CostFunction step(double height, std::size_t width) {
    if (!(height >= 0.0) || width == 0) fail(ErrorKind::Domain, "step cost needs height >= 0 and width >= 1");
    return {[height, width](std::size_t n) { return height * static_cast<double>((n + width - 1) / width); },
            "step"};
  }
  /// values[n-1] = c(n); defined up to values.size()
  static CostFunction tabulated(std::vector<double> values) {
    if (values.empty()) fail(ErrorKind::Domain, "empty cost table");
    return {[v = std::move(values)](std::size_t n) {
              if (n == 0 || n > v.size()) fail(ErrorKind::Domain, "cost table too short");
              return v[n - 1];
            },
            "tabulated"};
  }
};

struct SplitProblem {
  std::function<Regime(std::size_t)> regime;  // 0-based
  CostFunction cost;
  std::size_t n_max = 50;
  // price functional with summable support functions; enables the stopping bound
  std::optional<Functional> phi0;
  // upper bound on sum_{i > n_max} rho_i*(phi0); required for a certified stop
  std::optional<double> conjugate_tail;

  static std::function<Regime(std::size_t)> repeat(std::vector<Regime> pattern) {
    if (pattern.empty()) fail(ErrorKind::Structural, "empty regime pattern");
    return [p = std::move(pattern)](std::size_t i) { return p[i % p.size()]; };
  }
};

struct SplitStep {
  std::size_t n = 0;
  ExtReal lambda;
  double cost = 0.0;
  double objective = 0.0;  // +inf outside the domain
  double lower_bound = -kInf;
  bool solved = false;  // false for the step where the bound stopped the sweep
};

struct SplitOutcome {
  std::size_t n_star = 0;
  double value = 0.0;
  Allocation allocation;
  std::vector<SplitStep> trajectory;
  bool cap_limited = false;
};

inline AgentSystem first_agents(const SplitProblem& p, std::size_t n) {
  std::vector<Regime> rs;
  for (std::size_t i = 0; i < n; ++i) rs.push_back(p.regime(i));
  return AgentSystem(std::move(rs));
}

inline SplitOutcome split_optimize(const SplitProblem& p, const RandomVariable& w) {
  if (p.n_max == 0) fail(ErrorKind::Domain, "n_max must be positive");
  for (std::size_t n = 1; n < p.n_max; ++n)
    if (p.cost(n + 1) < p.cost(n) - 1e-15) fail(ErrorKind::Validation, "cost function must be non-decreasing");
  std::vector<Regime> rs;
  for (std::size_t i = 0; i < p.n_max; ++i) {
    rs.push_back(p.regime(i));
    const ExtReal r0 = rho(rs.back(), RandomVariable(w.space())).value;
    if (!r0.is_finite() || std::abs(r0.value()) > 1e-10)
      fail(ErrorKind::Validation, "regime " + std::to_string(i + 1) + " is not normalised");
  }

  // phi0(W) - sum_{i <= n_max} rho_i*(phi0) - tail, valid for every n
  std::optional<double> bound;
  if (p.phi0 && p.conjugate_tail) {
    ExtReal s = ExtReal::finite(*p.conjugate_tail);
    for (const auto& r : rs) {
      const ExtReal c = conjugate(r, *p.phi0);
      if (c.is_pos_inf()) {
        s = c;
        break;
      }
      s = s + c;
    }
    if (s.is_finite()) bound = (*p.phi0)(w) - s.value();
  }

  SplitOutcome out;
  out.value = kInf;
  bool stopped = false;
  for (std::size_t n = 1; n <= p.n_max; ++n) {
    SplitStep st;
    st.n = n;
    st.cost = p.cost(n);
    if (bound) st.lower_bound = *bound + st.cost;
    if (bound && std::isfinite(out.value) && st.lower_bound > out.value) {
      out.trajectory.push_back(st);
      stopped = true;
      break;
    }
    AgentSystem sys(std::vector<Regime>(rs.begin(), rs.begin() + static_cast<std::ptrdiff_t>(n)));
    auto res = lambda(sys, w);
    st.lambda = res.value;
    st.solved = true;
    st.objective = res.value.is_finite() ? res.value.value() + st.cost : kInf;
    out.trajectory.push_back(st);
    if (st.objective < out.value) {
      out.value = st.objective;
      out.n_star = n;
      out.allocation = std::move(res.allocation);
    }
  }
  if (out.n_star == 0) fail(ErrorKind::Domain, "aggregate loss outside every Lambda_n up to n_max");
  out.cap_limited = !stopped;
  return out;
}

/// sigma_A(phi) = sup { phi(Y) : Y in A } over the regime's ideal.
inline ExtReal support_function(const Regime& r, const Functional& phi, double tol = 1e-9) {
  const SpacePtr& sp = r.space();
  if (r.lp_representable()) {
    LpProblem lp;
    std::vector<AffineExpr> pos(sp->size());
    for (std::size_t w = 0; w < sp->size(); ++w)
      if (r.support().includes(w)) pos[w].terms.push_back({lp.add_variable(-phi.weight(w)), 1.0});
    append_acceptance(lp, r, pos);
    auto s = solve(lp);
    if (s.status == LpStatus::Unbounded) return ExtReal::pos_inf();
    if (s.status == LpStatus::Infeasible) return ExtReal::neg_inf();
    return ExtReal::finite(-s.objective_value);
  }
  double mass = 0.0;
  for (std::size_t w = 0; w < sp->size(); ++w) {
    if (phi.weight(w) < -tol) return ExtReal::pos_inf();
    mass += phi.weight(w);
  }
  if (mass <= tol) return ExtReal::finite(0.0);
  std::vector<double> q(sp->size());
  for (std::size_t w = 0; w < sp->size(); ++w) q[w] = std::max(0.0, phi.density(w)) / mass;
  const ExtReal c = xi_conjugate(CappedEntropic::of(r.base()), sp, q, tol);
  return c.is_finite() ? ExtReal::finite(mass * c.value()) : c;
}

struct SupInftyReport {
  Report report;
  std::vector<double> terms;         // sigma_{A_i}(phi0), i <= n_max
  std::vector<double> partial_sums;
};

inline SupInftyReport check_sup_infty(const SplitProblem& p, const Functional& phi0, double tol = 1e-8) {
  SupInftyReport out;
  bool consistent = true, finite = true, nonpos = true;
  double mis = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < p.n_max; ++i) {
    const Regime r = p.regime(i);
    const double m = price_mismatch(r, phi0);
    mis = std::max(mis, m);
    consistent = consistent && m <= tol;
    const ExtReal s = support_function(r, phi0);
    if (!s.is_finite()) {
      finite = false;
      out.terms.push_back(s.as_double());
      out.partial_sums.push_back(s.as_double());
      continue;
    }
    nonpos = nonpos && s.value() <= tol;
    sum += s.value();
    out.terms.push_back(s.value());
    out.partial_sums.push_back(sum);
  }
  out.report.add("sup.price_consistent", consistent, mis);
  out.report.add("sup.finite_terms", finite, finite ? sum : kInf);
  out.report.add("sup.nonpositive_terms", nonpos, 0.0, "sufficient for a summable tail");
  return out;
}

}  // namespace riskshare
