#pragma once

// Equilibria: a Pareto allocation plus a subgradient price, with budgets
// balanced by transfers of a jointly held security.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "riskshare/market.hpp"
#include "riskshare/sharing.hpp"

namespace riskshare {

struct Equilibrium {
  Allocation allocation;
  Functional price;
  RandomVariable transfer_security;  // unit-price security held by every agent
  std::vector<double> transfers;     // phi(W_i - Y_i)
  bool price_nonunique = false;
};

/// Basis of the intersection of all security spaces.
inline std::vector<RandomVariable> common_securities(const AgentSystem& s) {
  const SpacePtr& sp = s.space();
  const std::size_t m = sp->size();
  // rows of (I - Q_i Q_i^T) for every agent; the joint null space is the intersection
  std::vector<Vec> rows;
  for (const auto& r : s.regimes()) {
    std::vector<Vec> cols;
    for (const auto& b : r.market().basis) cols.push_back(b.values());
    auto q = orthonormalize(cols);
    for (std::size_t a = 0; a < m; ++a) {
      Vec row(m, 0.0);
      row[a] = 1.0;
      for (const auto& v : q)
        for (std::size_t b = 0; b < m; ++b) row[b] -= v[a] * v[b];
      rows.push_back(row);
    }
  }
  std::vector<RandomVariable> out;
  for (auto& v : null_space(Matrix::from_rows(rows))) out.emplace_back(sp, v);
  return out;
}

/// A security held by every agent, scaled to unit price.
inline std::optional<RandomVariable> common_unit_security(const AgentSystem& s) {
  std::optional<RandomVariable> best;
  double best_price = 0.0;
  for (const auto& z : common_securities(s)) {
    const double p = s.pi(z);
    if (std::abs(p) > std::abs(best_price) + 1e-12) {
      best_price = p;
      best = z;
    }
  }
  if (!best || std::abs(best_price) <= 1e-10) return std::nullopt;
  return (1.0 / best_price) * *best;
}

inline void require_endowments(const AgentSystem& s, const std::vector<RandomVariable>& w) {
  if (w.size() != s.size()) fail(ErrorKind::Structural, "one endowment per agent");
  for (std::size_t i = 0; i < s.size(); ++i) require_in_support(s.regime(i), w[i]);
}

inline Equilibrium build_equilibrium(const AgentSystem& s, const std::vector<RandomVariable>& endowments) {
  require_endowments(s, endowments);
  RandomVariable total(s.space());
  for (const auto& w : endowments) total += w;
  auto res = lambda(s, total);
  if (!res.value.is_finite()) fail(ErrorKind::Domain, "aggregate endowment outside the domain of Lambda");
  auto z = common_unit_security(s);
  if (!z) fail(ErrorKind::NRViolation, "no security with nonzero price is held by every agent");
  Equilibrium eq;
  eq.price = *res.subgradient;
  eq.transfer_security = *z;
  eq.price_nonunique = res.dual_degenerate;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = eq.price(endowments[i] - res.allocation.parts[i]);
    eq.transfers.push_back(t);
    eq.allocation.parts.push_back(res.allocation.parts[i] + t * *z);
  }
  return eq;
}

/// min rho_i(Y) over Y in the ideal with phi(Y) >= phi(W_i), as an LP.
inline ExtReal budget_optimum_lp(const Regime& r, const Functional& phi, double budget) {
  const SpacePtr& sp = r.space();
  const auto& mk = r.market();
  LpProblem lp;
  std::vector<std::size_t> yv(sp->size(), static_cast<std::size_t>(-1));
  for (std::size_t w = 0; w < sp->size(); ++w)
    if (r.support().includes(w)) yv[w] = lp.add_variable(0.0);
  const std::size_t z0 = lp.num_vars();
  for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(mk.prices[k]);
  std::vector<AffineExpr> pos(sp->size());
  std::vector<LpTerm> bt;
  for (std::size_t w = 0; w < sp->size(); ++w) {
    if (yv[w] == static_cast<std::size_t>(-1)) continue;
    pos[w].terms.push_back({yv[w], 1.0});
    for (std::size_t k = 0; k < mk.size(); ++k)
      if (mk.basis[k][w] != 0.0) pos[w].terms.push_back({z0 + k, -mk.basis[k][w]});
    if (phi.weight(w) != 0.0) bt.push_back({yv[w], phi.weight(w)});
  }
  append_acceptance(lp, r, pos);
  lp.add_row(bt, Sense::GreaterEq, budget);
  auto sol = solve(lp);
  if (sol.status == LpStatus::Unbounded) return ExtReal::neg_inf();
  if (sol.status == LpStatus::Infeasible) return ExtReal::pos_inf();
  return ExtReal::finite(sol.objective_value);
}

struct EquilibriumTolerances {
  double budget = 1e-8;
  double price = 1e-8;
  double optimality = 1e-6;
  double pareto = 1e-8;
};

inline Report verify_equilibrium(const AgentSystem& s, const std::vector<RandomVariable>& endowments,
                                 const Equilibrium& eq, const EquilibriumTolerances& tol = {}) {
  require_endowments(s, endowments);
  Report rep;
  const Functional& phi = eq.price;
  rep.add("price.positive", phi.is_nonnegative(1e-10), *std::min_element(phi.density().begin(), phi.density().end()));
  double mis = 0.0;
  for (const auto& r : s.regimes()) mis = std::max(mis, price_mismatch(r, phi));
  rep.add("price.consistent", mis <= tol.price, mis);

  RandomVariable tw(s.space());
  for (const auto& w : endowments) tw += w;
  const double att = (eq.allocation.total() - tw).sup_norm();
  bool in_ideals = true;
  for (std::size_t i = 0; i < s.size(); ++i)
    in_ideals = in_ideals && s.regime(i).support().contains(eq.allocation.parts[i], 1e-10);
  rep.add("allocation.attainable", att <= 1e-10 && in_ideals, att);

  double sum_rho = 0.0;
  bool finite = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string tag = "agent" + std::to_string(i + 1);
    const RandomVariable& xi_ = eq.allocation.parts[i];
    const double bgap = std::abs(phi(xi_) - phi(endowments[i]));
    rep.add(tag + ".budget", bgap <= tol.budget, bgap);
    const ExtReal rh = rho(s.regime(i), xi_).value;
    if (!rh.is_finite()) {
      finite = false;
      rep.add(tag + ".optimal", false, rh.as_double(), "risk of the allocated part is infinite");
      continue;
    }
    sum_rho += rh.value();
    // duality certificate: rho_i(Y) >= phi(W_i) - rho_i*(phi) on the budget set
    const ExtReal cj = conjugate(s.regime(i), phi);
    const double cert = cj.is_finite() ? rh.value() - (phi(endowments[i]) - cj.value()) : kInf;
    if (s.regime(i).lp_representable()) {
      const ExtReal best = budget_optimum_lp(s.regime(i), phi, phi(endowments[i]));
      const double gap = best.is_finite() ? rh.value() - best.value() : kInf;
      rep.add(tag + ".optimal", std::abs(gap) <= tol.optimality, gap, "budget LP");
    } else {
      rep.add(tag + ".optimal", cert <= tol.optimality, cert, "duality certificate");
    }
  }
  const ExtReal lam = lambda(s, tw).value;
  const double pg = finite && lam.is_finite() ? std::abs(sum_rho - lam.value()) : kInf;
  rep.add("pareto", pg <= tol.pareto * (1.0 + std::abs(sum_rho)), pg);
  return rep;
}

}  // namespace riskshare
