#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/linalg.hpp"
#include "riskshare/linprog.hpp"
#include "riskshare/measures.hpp"
#include "riskshare/scenario.hpp"
#include "riskshare/securitize.hpp"

namespace riskshare {

/// {X : phi_j(X) <= bound_j for all j}, inside a support ideal.
struct PolyhedralAcceptanceSet {
  std::vector<Functional> functionals;
  std::vector<double> bounds;

  bool contains(const RandomVariable& x, double tol = 1e-9) const {
    for (std::size_t j = 0; j < functionals.size(); ++j)
      if (functionals[j](x) > bounds[j] + tol) return false;
    return true;
  }
};

/// {X : xi(X) <= 0} for a base measure xi.
struct LawInvariantAcceptanceSet {
  BaseMeasure base;

  bool contains(const RandomVariable& x, double tol = 1e-9) const { return xi(base, x) <= tol; }
};

using Acceptance = std::variant<PolyhedralAcceptanceSet, LawInvariantAcceptanceSet>;

struct SecurityMarket {
  std::vector<RandomVariable> basis;
  std::vector<double> prices;

  std::size_t size() const { return basis.size(); }
  double price(std::span<const double> c) const { return dot(c, prices); }
  RandomVariable combine(const SpacePtr& space, std::span<const double> c) const {
    return detail::combine(space, basis, c);
  }
};

class Regime {
 public:
  Regime(SupportMask support, Acceptance acceptance, SecurityMarket market, std::string name = {})
      : support_(std::move(support)), acc_(std::move(acceptance)), market_(std::move(market)), name_(std::move(name)) {
    const SpacePtr& sp = support_.space();
    if (market_.basis.size() != market_.prices.size())
      fail(ErrorKind::Structural, "security basis and prices differ in length");
    if (market_.basis.empty()) fail(ErrorKind::Structural, "security market needs at least one security");
    for (const auto& b : market_.basis) {
      require_same_space(sp, b.space(), "security basis");
      if (!support_.contains(b, 0.0)) fail(ErrorKind::Structural, "security lies outside the support ideal");
    }
    if (auto* p = std::get_if<PolyhedralAcceptanceSet>(&acc_)) {
      if (p->functionals.size() != p->bounds.size())
        fail(ErrorKind::Structural, "acceptance functionals and bounds differ in length");
      for (const auto& f : p->functionals) {
        require_same_space(sp, f.space(), "acceptance functional");
        for (std::size_t w = 0; w < sp->size(); ++w)
          if (!support_.includes(w) && f.density(w) != 0.0)
            fail(ErrorKind::Structural, "acceptance functional charges a scenario outside the support");
      }
      for (double b : p->bounds)
        if (!std::isfinite(b)) fail(ErrorKind::Structural, "acceptance bounds must be finite");
    } else if (!support_.is_full()) {
      fail(ErrorKind::Structural, "law-invariant acceptance requires full support");
    }
  }

  const SpacePtr& space() const { return support_.space(); }
  const SupportMask& support() const { return support_; }
  const Acceptance& acceptance() const { return acc_; }
  const SecurityMarket& market() const { return market_; }
  const std::string& name() const { return name_; }

  bool is_polyhedral() const { return std::holds_alternative<PolyhedralAcceptanceSet>(acc_); }
  const PolyhedralAcceptanceSet& polyhedral() const { return std::get<PolyhedralAcceptanceSet>(acc_); }
  const BaseMeasure& base() const { return std::get<LawInvariantAcceptanceSet>(acc_).base; }
  /// Acceptance expressible by linear constraints (possibly with auxiliaries).
  bool lp_representable() const { return is_polyhedral() || base().family != Family::Entropic; }

  bool accepts(const RandomVariable& x, double tol = 1e-9) const {
    if (!support_.contains(x, tol)) return false;
    return std::visit([&](const auto& a) { return a.contains(x, tol); }, acc_);
  }

 private:
  SupportMask support_;
  Acceptance acc_;
  SecurityMarket market_;
  std::string name_;
};

/// Linear expression sum coeff * var + constant over LP variables.
struct AffineExpr {
  std::vector<LpTerm> terms;
  double constant = 0.0;
};

/// Adds rows forcing the position (one expression per scenario) into the
/// regime's acceptance set. Off-support entries are ignored.
inline void append_acceptance(LpProblem& lp, const Regime& r, const std::vector<AffineExpr>& pos) {
  const SpacePtr& sp = r.space();
  if (r.is_polyhedral()) {
    const auto& a = r.polyhedral();
    for (std::size_t j = 0; j < a.functionals.size(); ++j) {
      std::vector<LpTerm> t;
      double rhs = a.bounds[j];
      for (std::size_t w = 0; w < sp->size(); ++w) {
        const double wt = a.functionals[j].weight(w);
        if (wt == 0.0 || !r.support().includes(w)) continue;
        for (const auto& term : pos[w].terms) t.push_back({term.var, wt * term.coeff});
        rhs -= wt * pos[w].constant;
      }
      lp.add_row(std::move(t), Sense::LessEq, rhs);
    }
    return;
  }
  const BaseMeasure& b = r.base();
  if (b.family == Family::Entropic) fail(ErrorKind::Unsupported, "entropic acceptance is not LP-representable");
  if (b.family == Family::Expectation) {
    std::vector<LpTerm> t;
    double rhs = 0.0;
    for (std::size_t w = 0; w < sp->size(); ++w) {
      for (const auto& term : pos[w].terms) t.push_back({term.var, sp->prob(w) * term.coeff});
      rhs -= sp->prob(w) * pos[w].constant;
    }
    lp.add_row(std::move(t), Sense::LessEq, rhs);
    return;
  }
  // AVaR(Y) <= 0  iff  exists t, u >= 0 : u >= Y - t, t + cap E[u] <= 0
  const double cap = b.cap();
  const std::size_t tv = lp.add_variable(0.0);
  std::vector<LpTerm> last{{tv, 1.0}};
  for (std::size_t w = 0; w < sp->size(); ++w) {
    const std::size_t uv = lp.add_variable(0.0, 0.0);
    std::vector<LpTerm> t = pos[w].terms;
    t.push_back({tv, -1.0});
    t.push_back({uv, -1.0});
    lp.add_row(std::move(t), Sense::LessEq, -pos[w].constant);
    last.push_back({uv, cap * sp->prob(w)});
  }
  lp.add_row(std::move(last), Sense::LessEq, 0.0);
}

struct RhoResult {
  ExtReal value;
  std::vector<double> coeffs;  // security coefficients in the regime basis
  RandomVariable security;
};

inline void require_in_support(const Regime& r, const RandomVariable& x) {
  require_same_space(r.space(), x.space(), "rho");
  if (!r.support().contains(x, 0.0)) fail(ErrorKind::Domain, "loss lies outside the agent's support ideal");
}

/// rho(X) = inf { price(Z) : Z in S, X - Z acceptable }.
inline RhoResult rho(const Regime& r, const RandomVariable& x) {
  require_in_support(r, x);
  const SpacePtr& sp = r.space();
  const auto& mk = r.market();
  RhoResult out;
  if (!r.is_polyhedral() && mk.size() == 1 && mk.basis[0].min() == mk.basis[0].max() && mk.basis[0][0] > 0.0) {
    // cash only: closed form by cash additivity
    const double c = xi(r.base(), x) / mk.basis[0][0];
    out.value = ExtReal::finite(mk.prices[0] * c);
    out.coeffs = {c};
    out.security = c * mk.basis[0];
    return out;
  }
  if (!r.lp_representable()) {
    auto s = securitised_min(CappedEntropic::of(r.base()), x, mk.basis, mk.prices);
    out.value = s.value;
    out.coeffs = s.coeffs;
    out.security = s.value.is_finite() ? s.security : RandomVariable(sp);
    return out;
  }
  LpProblem lp;
  for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(mk.prices[k]);
  std::vector<AffineExpr> pos(sp->size());
  for (std::size_t w = 0; w < sp->size(); ++w) {
    pos[w].constant = x[w];
    for (std::size_t k = 0; k < mk.size(); ++k)
      if (mk.basis[k][w] != 0.0) pos[w].terms.push_back({k, -mk.basis[k][w]});
  }
  append_acceptance(lp, r, pos);
  auto s = solve(lp);
  switch (s.status) {
    case LpStatus::Infeasible:
      out.value = ExtReal::pos_inf();
      out.security = RandomVariable(sp);
      return out;
    case LpStatus::Unbounded:
      out.value = ExtReal::neg_inf();
      out.security = RandomVariable(sp);
      return out;
    case LpStatus::Optimal: break;
  }
  out.coeffs.assign(s.primal.begin(), s.primal.begin() + static_cast<std::ptrdiff_t>(mk.size()));
  out.value = ExtReal::finite(mk.price(out.coeffs));
  out.security = mk.combine(sp, out.coeffs);
  return out;
}

/// Agrees phi with the security prices on every basis vector?
inline double price_mismatch(const Regime& r, const Functional& phi) {
  double m = 0.0;
  for (std::size_t k = 0; k < r.market().size(); ++k)
    m = std::max(m, std::abs(phi(r.market().basis[k]) - r.market().prices[k]));
  return m;
}

/// rho*(phi) = sup_X phi(X) - rho(X) over the support ideal.
inline ExtReal conjugate(const Regime& r, const Functional& phi, double tol = 1e-9) {
  require_same_space(r.space(), phi.space(), "conjugate");
  const SpacePtr& sp = r.space();
  if (r.lp_representable()) {
    // sup phi(X) - price(z)  s.t.  X - Z in A, X in the ideal
    const auto& mk = r.market();
    LpProblem lp;
    std::vector<std::size_t> xv(sp->size(), static_cast<std::size_t>(-1));
    for (std::size_t w = 0; w < sp->size(); ++w)
      if (r.support().includes(w)) xv[w] = lp.add_variable(-phi.weight(w));
    const std::size_t z0 = lp.num_vars();
    for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(mk.prices[k]);
    std::vector<AffineExpr> pos(sp->size());
    for (std::size_t w = 0; w < sp->size(); ++w) {
      if (!r.support().includes(w)) continue;
      pos[w].terms.push_back({xv[w], 1.0});
      for (std::size_t k = 0; k < mk.size(); ++k)
        if (mk.basis[k][w] != 0.0) pos[w].terms.push_back({z0 + k, -mk.basis[k][w]});
    }
    append_acceptance(lp, r, pos);
    auto s = solve(lp);
    if (s.status == LpStatus::Unbounded) return ExtReal::pos_inf();
    if (s.status == LpStatus::Infeasible) return ExtReal::neg_inf();
    return ExtReal::finite(-s.objective_value);
  }
  if (price_mismatch(r, phi) > tol * (1.0 + norm_inf(r.market().prices))) return ExtReal::pos_inf();
  double mass = 0.0;
  for (std::size_t w = 0; w < sp->size(); ++w) {
    if (phi.weight(w) < -tol) return ExtReal::pos_inf();
    mass += phi.weight(w);
  }
  if (mass <= tol) return ExtReal::finite(0.0);
  std::vector<double> q(sp->size());
  for (std::size_t w = 0; w < sp->size(); ++w) q[w] = std::max(0.0, phi.density(w)) / mass;
  ExtReal c = xi_conjugate(CappedEntropic::of(r.base()), sp, q, tol);
  if (!c.is_finite()) return c;
  return ExtReal::finite(mass * c.value());
}

struct Check {
  std::string name;
  bool pass = true;
  double value = 0.0;
  std::string detail;
  bool probabilistic = false;
};

struct Report {
  std::vector<Check> checks;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  void add(std::string name, bool pass, double value, std::string detail = {}, bool probabilistic = false) {
    checks.push_back({std::move(name), pass, value, std::move(detail), probabilistic});
  }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

/// sup { price(Z) : Z in S, X + Z acceptable } is finite? (LP route)
inline LpStatus arbitrage_probe(const Regime& r, const RandomVariable& x) {
  const SpacePtr& sp = r.space();
  const auto& mk = r.market();
  LpProblem lp;
  for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(-mk.prices[k]);
  std::vector<AffineExpr> pos(sp->size());
  for (std::size_t w = 0; w < sp->size(); ++w) {
    pos[w].constant = x[w];
    for (std::size_t k = 0; k < mk.size(); ++k)
      if (mk.basis[k][w] != 0.0) pos[w].terms.push_back({k, mk.basis[k][w]});
  }
  append_acceptance(lp, r, pos);
  return solve(lp).status;
}

inline Report validate_regime(const Regime& r, unsigned seed = 0) {
  Report rep;
  const SpacePtr& sp = r.space();
  const auto& mk = r.market();
  const auto supp = r.support().indices();

  if (r.is_polyhedral()) {
    const auto& a = r.polyhedral();
    bool mono = true;
    for (const auto& f : a.functionals) mono = mono && f.is_nonnegative();
    rep.add("acceptance.monotone", mono, 0.0, "non-negative densities");
    // non-empty: some X in the ideal satisfies all rows
    LpProblem lp;
    for (std::size_t i = 0; i < supp.size(); ++i) lp.add_variable(0.0);
    std::vector<AffineExpr> pos(sp->size());
    for (std::size_t i = 0; i < supp.size(); ++i) pos[supp[i]].terms.push_back({i, 1.0});
    append_acceptance(lp, r, pos);
    rep.add("acceptance.nonempty", solve(lp).status == LpStatus::Optimal, 0.0);
    // proper: a large multiple of the support indicator violates some row
    bool proper = false;
    for (const auto& f : a.functionals) {
      double mass = 0.0;
      for (auto w : supp) mass += f.weight(w);
      proper = proper || mass > 0.0;
    }
    rep.add("acceptance.proper", proper, 0.0);
  } else {
    rep.add("acceptance.monotone", true, 0.0, r.base().describe());
    rep.add("acceptance.nonempty", true, xi(r.base(), RandomVariable(sp)), "0 is acceptable");
    rep.add("acceptance.proper", true, 0.0, "positive constants are rejected");
  }

  // securities
  std::vector<Vec> cols;
  for (const auto& b : mk.basis) cols.push_back(b.values());
  const std::size_t rk = rank(Matrix::from_columns(cols, sp->size()));
  rep.add("market.independent", rk == mk.size(), static_cast<double>(rk));

  // U in S, U >= 0, U != 0, price 1
  {
    LpProblem lp;
    for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(0.0);
    for (std::size_t w = 0; w < sp->size(); ++w) {
      std::vector<LpTerm> t;
      for (std::size_t k = 0; k < mk.size(); ++k)
        if (mk.basis[k][w] != 0.0) t.push_back({k, mk.basis[k][w]});
      if (!t.empty()) lp.add_row(std::move(t), Sense::GreaterEq, 0.0);
    }
    std::vector<LpTerm> pt;
    for (std::size_t k = 0; k < mk.size(); ++k) pt.push_back({k, mk.prices[k]});
    lp.add_row(pt, Sense::Equal, 1.0);
    rep.add("market.unit_security", solve(lp).status == LpStatus::Optimal, 0.0, "exists U >= 0 with price 1");
  }
  // max min-coordinate on the support of a unit-price security (informative)
  {
    LpProblem lp;
    for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(0.0);
    const std::size_t m = lp.add_variable(-1.0, -kInf, 1.0);
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
    const double v = s.status == LpStatus::Optimal ? -s.objective_value : -kInf;
    rep.add("market.strict_unit_security", true, v, v > 0.0 ? "strictly positive on support" : "only weakly positive");
  }
  // positivity of the prices
  {
    LpProblem lp;
    for (std::size_t k = 0; k < mk.size(); ++k) lp.add_variable(mk.prices[k]);
    std::vector<LpTerm> tot;
    for (std::size_t w = 0; w < sp->size(); ++w) {
      std::vector<LpTerm> t;
      for (std::size_t k = 0; k < mk.size(); ++k)
        if (mk.basis[k][w] != 0.0) {
          t.push_back({k, mk.basis[k][w]});
          tot.push_back({k, mk.basis[k][w]});
        }
      if (!t.empty()) lp.add_row(std::move(t), Sense::GreaterEq, 0.0);
    }
    lp.add_row(tot, Sense::Equal, 1.0);
    auto s = solve(lp);
    const double v = s.status == LpStatus::Optimal ? s.objective_value : 0.0;
    rep.add("market.positive", s.status != LpStatus::Unbounded && v >= -1e-10, v);
  }

  // no-arbitrage
  if (r.lp_representable()) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    bool ok = arbitrage_probe(r, RandomVariable(sp)) != LpStatus::Unbounded;
    for (int p = 0; p < 8 && ok; ++p) {
      RandomVariable x(sp);
      for (auto w : supp) x[w] = u(rng);
      ok = arbitrage_probe(r, x) != LpStatus::Unbounded;
    }
    rep.add("no_arbitrage", ok, 0.0, "probed at 0 and 8 random losses", true);
  } else {
    // exact: a positive functional pricing every security bounds rho from below
    LpProblem lp;
    for (std::size_t w = 0; w < sp->size(); ++w) lp.add_variable(0.0, 0.0);
    for (std::size_t k = 0; k < mk.size(); ++k) {
      std::vector<LpTerm> t;
      for (std::size_t w = 0; w < sp->size(); ++w)
        if (mk.basis[k][w] != 0.0) t.push_back({w, mk.basis[k][w]});
      lp.add_row(std::move(t), Sense::Equal, mk.prices[k]);
    }
    rep.add("no_arbitrage", solve(lp).status == LpStatus::Optimal, 0.0, "positive pricing functional exists");
  }
  return rep;
}

}  // namespace riskshare
