#pragma once

// One entry point for Lambda whatever the acceptance sets: LP-representable
// systems go through the joint LP, entropic law-invariant systems through
// the securitised convolution.

#include <optional>

#include "riskshare/lawinv.hpp"
#include "riskshare/market.hpp"

namespace riskshare {

struct SharingResult {
  ExtReal value;
  Allocation allocation;
  RandomVariable payoff;
  std::optional<Functional> subgradient;
  bool dual_degenerate = false;
  std::string route;  // "lp" or "law-invariant"
};

inline void require_nsa(const AgentSystem& s) {
  if (!nsa_check(s).nsa) fail(ErrorKind::Contract, "security arbitrage: pi(0) = -inf");
}

inline SharingResult lambda(const AgentSystem& s, const RandomVariable& x, const LambdaOptions& opt = {}) {
  require_nsa(s);
  SharingResult out;
  if (s.lp_representable()) {
    auto r = lambda_lp(s, x, opt);
    out.value = r.value;
    out.allocation = std::move(r.allocation);
    out.payoff = std::move(r.payoff);
    out.subgradient = std::move(r.subgradient);
    out.dual_degenerate = r.dual_degenerate;
    out.route = "lp";
    return out;
  }
  if (!s.all_law_invariant())
    fail(ErrorKind::Unsupported, "entropic agents cannot be combined with polyhedral agents");
  auto r = lawinv_lambda(s, x);
  out.value = r.value;
  out.allocation = std::move(r.allocation);
  out.payoff = std::move(r.payoff);
  out.subgradient = std::move(r.subgradient);
  out.route = "law-invariant";
  return out;
}

inline double lambda_value(const AgentSystem& s, const RandomVariable& x) {
  auto r = lambda(s, x);
  return r.value.as_double();
}

/// A subgradient phi of Lambda at X: Lambda(X) = phi(X) - Lambda*(phi).
inline Functional subgradient(const AgentSystem& s, const RandomVariable& x) {
  auto r = lambda(s, x);
  if (!r.value.is_finite()) fail(ErrorKind::Domain, "loss outside the domain of Lambda");
  return *r.subgradient;
}

/// Lambda*(phi) as the sum of the individual conjugates.
inline ExtReal conjugate_sum(const AgentSystem& s, const Functional& phi, double tol = 1e-9) {
  ExtReal sum = ExtReal::finite(0.0);
  for (const auto& r : s.regimes()) {
    const ExtReal c = conjugate(r, phi, tol);
    if (c.is_pos_inf()) return c;
    sum = sum + c;
  }
  return sum;
}

/// Lambda*(phi) = sup_{X, X_i, z_i} phi(X) - sum p_i(z_i) over attainable
/// acceptable allocations, as one LP (LP-representable systems).
inline ExtReal lambda_conjugate_lp(const AgentSystem& s, const Functional& phi) {
  if (!s.lp_representable()) fail(ErrorKind::Unsupported, "entropic agents need the closed form");
  const SpacePtr& sp = s.space();
  const std::size_t m = sp->size();
  auto j = detail::joint_lp(s, RandomVariable(sp));
  // aggregate X becomes a variable: sum_i X_i - X = 0
  std::vector<std::size_t> xv;
  for (std::size_t w = 0; w < m; ++w) {
    xv.push_back(j.lp.add_variable(-phi.weight(w)));
    j.lp.rows[j.agg_row[w]].terms.push_back({xv[w], -1.0});
  }
  auto sol = solve(j.lp);
  if (sol.status == LpStatus::Unbounded) return ExtReal::pos_inf();
  if (sol.status == LpStatus::Infeasible) return ExtReal::neg_inf();
  return ExtReal::finite(-sol.objective_value);
}

/// X +- eps e_w stays in dom Lambda for every scenario w.
inline bool interior_of_domain(const AgentSystem& s, const RandomVariable& x, double eps = 1e-6) {
  for (std::size_t w = 0; w < x.size(); ++w)
    for (double sg : {1.0, -1.0}) {
      RandomVariable y = x;
      y[w] += sg * eps;
      if (!lambda(s, y).value.is_finite()) return false;
    }
  return true;
}

}  // namespace riskshare
