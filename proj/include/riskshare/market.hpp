#pragma once

// Agent systems, the representative agent and the LP route to the risk
// sharing functional.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/linalg.hpp"
#include "riskshare/linprog.hpp"
#include "riskshare/regime.hpp"
#include "riskshare/scenario.hpp"

namespace riskshare {

struct Allocation {
  std::vector<RandomVariable> parts;

  std::size_t size() const { return parts.size(); }
  RandomVariable total() const {
    RandomVariable t(parts.at(0).space());
    for (const auto& p : parts) t += p;
    return t;
  }
};

/// Reference to security k of agent i.
struct SecurityRef {
  std::size_t agent;
  std::size_t index;
};

class AgentSystem {
 public:
  explicit AgentSystem(std::vector<Regime> regimes) : regimes_(std::move(regimes)) {
    if (regimes_.empty()) fail(ErrorKind::Structural, "agent system needs at least one agent");
    for (const auto& r : regimes_) require_same_space(regimes_[0].space(), r.space(), "agent system");
    build_market();
  }

  std::size_t size() const { return regimes_.size(); }
  const Regime& regime(std::size_t i) const { return regimes_.at(i); }
  const std::vector<Regime>& regimes() const { return regimes_; }
  const SpacePtr& space() const { return regimes_[0].space(); }

  /// All securities of all agents, in agent order.
  const std::vector<SecurityRef>& stacked() const { return stacked_; }
  const RandomVariable& security(const SecurityRef& s) const { return regimes_[s.agent].market().basis[s.index]; }
  double security_price(const SecurityRef& s) const { return regimes_[s.agent].market().prices[s.index]; }

  /// Independent subset of the stacked securities spanning the global space M.
  const std::vector<RandomVariable>& global_basis() const { return gbasis_; }
  const std::vector<double>& global_prices() const { return gprices_; }

  bool all_polyhedral() const {
    return std::all_of(regimes_.begin(), regimes_.end(), [](const Regime& r) { return r.is_polyhedral(); });
  }
  bool lp_representable() const {
    return std::all_of(regimes_.begin(), regimes_.end(), [](const Regime& r) { return r.lp_representable(); });
  }
  bool all_law_invariant() const {
    return std::none_of(regimes_.begin(), regimes_.end(), [](const Regime& r) { return r.is_polyhedral(); });
  }

  /// Coefficients of Z in the global basis, or nullopt when Z is not in M.
  std::optional<std::vector<double>> global_coords(const RandomVariable& z, double tol = 1e-10) const {
    std::vector<Vec> cols;
    for (const auto& b : gbasis_) cols.push_back(b.values());
    Vec c = least_squares(cols, z.values());
    RandomVariable fit(space());
    for (std::size_t k = 0; k < c.size(); ++k) fit += c[k] * gbasis_[k];
    if ((fit - z).sup_norm() > tol * (1.0 + z.sup_norm())) return std::nullopt;
    return c;
  }

  /// pi(Z) for Z in M (well defined under NSA).
  double pi(const RandomVariable& z) const {
    auto c = global_coords(z);
    if (!c) fail(ErrorKind::Domain, "security lies outside the global security space");
    return dot(*c, gprices_);
  }

  /// Stage bases of the security selection (see security_selection).
  const std::vector<std::vector<RandomVariable>>& selection_stages() const { return stages_; }

 private:
  void build_market() {
    const SpacePtr& sp = space();
    std::vector<Vec> cols;
    for (std::size_t i = 0; i < regimes_.size(); ++i)
      for (std::size_t k = 0; k < regimes_[i].market().size(); ++k) {
        stacked_.push_back({i, k});
        cols.push_back(regimes_[i].market().basis[k].values());
      }
    Matrix b = Matrix::from_columns(cols, sp->size());
    Matrix r = b;
    for (auto p : detail::rref(r, kRankTol)) {
      gbasis_.push_back(security(stacked_[p]));
      gprices_.push_back(security_price(stacked_[p]));
    }
    // Selection stages: orthonormal basis of the orthogonal complement,
    // inside S_i, of S_i intersected with what earlier stages span.
    std::vector<Vec> acc;
    for (const auto& reg : regimes_) {
      std::vector<Vec> si;
      for (const auto& v : reg.market().basis) si.push_back(v.values());
      std::vector<Vec> on_si = orthonormalize(si);
      std::vector<Vec> inter;
      if (!acc.empty()) {
        // coefficients (a, c) with S_i a = acc c
        std::vector<Vec> both = on_si;
        for (const auto& v : acc) {
          Vec m = v;
          for (double& x : m) x = -x;
          both.push_back(m);
        }
        Matrix mb = Matrix::from_columns(both, sp->size());
        for (const auto& nv : null_space(mb)) {
          Vec z(sp->size(), 0.0);
          for (std::size_t j = 0; j < on_si.size(); ++j)
            for (std::size_t w = 0; w < z.size(); ++w) z[w] += nv[j] * on_si[j][w];
          inter.push_back(z);
        }
        inter = orthonormalize(inter);
      }
      std::vector<Vec> stage = orthonormalize(on_si, inter);
      std::vector<RandomVariable> st;
      for (auto& v : stage) {
        st.emplace_back(sp, v);
        acc.push_back(v);
      }
      stages_.push_back(std::move(st));
    }
  }

  std::vector<Regime> regimes_;
  std::vector<SecurityRef> stacked_;
  std::vector<RandomVariable> gbasis_;
  std::vector<double> gprices_;
  std::vector<std::vector<RandomVariable>> stages_;
};

// ---------------------------------------------------------------------------
// Structure checks

struct StarReport {
  Report report;
  std::vector<std::vector<bool>> adjacency;
  bool connected = false;
  double max_price_residual = 0.0;
};

namespace detail {

inline std::vector<Vec> regime_columns(const Regime& r) {
  std::vector<Vec> c;
  for (const auto& b : r.market().basis) c.push_back(b.values());
  return c;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace detail

/// Prices agree on pairwise intersections, and agents linked by a
/// non-trivially priced common security form a connected graph.
inline StarReport validate_star(const AgentSystem& s, double tol = 1e-10) {
  StarReport out;
  const std::size_t n = s.size();
  out.adjacency.assign(n, std::vector<bool>(n, false));
  detail::UnionFind uf(n);
  bool agree = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      auto ci = detail::regime_columns(s.regime(i));
      auto cj = detail::regime_columns(s.regime(j));
      std::vector<Vec> both = ci;
      for (auto v : cj) {
        for (double& x : v) x = -x;
        both.push_back(v);
      }
      const auto& pi = s.regime(i).market().prices;
      const auto& pj = s.regime(j).market().prices;
      bool priced = false;
      for (const auto& nv : null_space(Matrix::from_columns(both, s.space()->size()))) {
        double a = 0.0, b = 0.0;
        for (std::size_t k = 0; k < ci.size(); ++k) a += pi[k] * nv[k];
        for (std::size_t k = 0; k < cj.size(); ++k) b += pj[k] * nv[ci.size() + k];
        const double res = std::abs(a - b);
        out.max_price_residual = std::max(out.max_price_residual, res);
        if (res > tol * (1.0 + std::abs(a))) agree = false;
        if (std::abs(a) > tol) priced = true;
      }
      if (priced) {
        out.adjacency[i][j] = out.adjacency[j][i] = true;
        uf.unite(i, j);
      }
    }
  std::size_t comps = 0;
  for (std::size_t i = 0; i < n; ++i) comps += uf.find(i) == i ? 1 : 0;
  out.connected = comps == 1;
  out.report.add("star.prices_agree", agree, out.max_price_residual);
  out.report.add("star.connected", out.connected, static_cast<double>(comps), "connected components");
  return out;
}

struct NsaResult {
  bool nsa = false;          // pi(0) = 0
  std::size_t dim_v = 0;     // dim of the zero-sum price image
  LpStatus lp_status = LpStatus::Optimal;
  bool lp_agrees = false;    // LP unbounded exactly when dim_v = n
};

/// pi(0) = 0 or -inf, decided by the dimension of
/// V = {(price_i(N_i))_i : sum_i N_i = 0} and cross-checked by an LP.
inline NsaResult nsa_check(const AgentSystem& s) {
  const auto& st = s.stacked();
  std::vector<Vec> cols;
  for (const auto& r : st) cols.push_back(s.security(r).values());
  const std::size_t n = s.size();
  auto ns = null_space(Matrix::from_columns(cols, s.space()->size()));
  Matrix v(n, ns.size());
  for (std::size_t l = 0; l < ns.size(); ++l)
    for (std::size_t k = 0; k < st.size(); ++k) v(st[k].agent, l) += s.security_price(st[k]) * ns[l][k];
  NsaResult out;
  out.dim_v = ns.empty() ? 0 : rank(v);
  out.nsa = out.dim_v < n;

  LpProblem lp;
  for (std::size_t k = 0; k < st.size(); ++k) lp.add_variable(s.security_price(st[k]));
  for (std::size_t w = 0; w < s.space()->size(); ++w) {
    std::vector<LpTerm> t;
    for (std::size_t k = 0; k < st.size(); ++k)
      if (cols[k][w] != 0.0) t.push_back({k, cols[k][w]});
    if (!t.empty()) lp.add_row(std::move(t), Sense::Equal, 0.0);
  }
  out.lp_status = solve(lp).status;
  out.lp_agrees = (out.lp_status == LpStatus::Unbounded) == (out.dim_v == n);
  return out;
}

/// Cover, star, NSA and per-regime checks in one report.
inline Report validate_system(const AgentSystem& s, unsigned seed = 0) {
  Report rep;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto r = validate_regime(s.regime(i), seed + static_cast<unsigned>(i));
    for (auto c : r.checks) {
      c.name = "agent" + std::to_string(i + 1) + "." + c.name;
      rep.checks.push_back(std::move(c));
    }
  }
  std::vector<bool> cov(s.space()->size(), false);
  for (const auto& r : s.regimes())
    for (auto w : r.support().indices()) cov[w] = true;
  rep.add("system.cover", std::all_of(cov.begin(), cov.end(), [](bool b) { return b; }), 0.0);
  rep.add("system.agents", s.size() >= 2, static_cast<double>(s.size()), "at least two agents");
  auto star = validate_star(s);
  for (auto& c : star.report.checks) rep.checks.push_back(c);
  auto nsa = nsa_check(s);
  rep.add("system.nsa", nsa.nsa, static_cast<double>(nsa.dim_v),
          nsa.nsa ? "pi(0) = 0" : "pi(0) = -inf");
  rep.add("system.nsa_lp_agrees", nsa.lp_agrees, 0.0, to_string(nsa.lp_status));
  return rep;
}

// ---------------------------------------------------------------------------
// Security selection

/// Linear selection Psi: M -> prod S_i with sum_i Psi(Z)_i = Z. Stage i uses
/// an orthonormal basis of the part of S_i orthogonal to its overlap with the
/// earlier stages; coordinates come from the combined (non-orthogonal) basis.
inline std::vector<RandomVariable> security_selection(const AgentSystem& s, const RandomVariable& z,
                                                      double tol = 1e-10) {
  require_same_space(s.space(), z.space(), "security_selection");
  std::vector<Vec> cols;
  for (const auto& st : s.selection_stages())
    for (const auto& v : st) cols.push_back(v.values());
  std::vector<RandomVariable> out(s.size(), RandomVariable(s.space()));
  if (cols.empty()) {
    if (z.sup_norm() > tol) fail(ErrorKind::Domain, "security lies outside the global security space");
    return out;
  }
  Vec c = least_squares(cols, z.values());
  std::size_t k = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (const auto& v : s.selection_stages()[i]) out[i] += c[k++] * v;
  RandomVariable sum(s.space());
  for (const auto& o : out) sum += o;
  if ((sum - z).sup_norm() > tol * (1.0 + z.sup_norm()))
    fail(ErrorKind::Domain, "security lies outside the global security space");
  // exact sum: push rounding into the first agent whose stage covers it
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!s.selection_stages()[i].empty()) {
      out[i] += z - sum;
      break;
    }
  return out;
}

// ---------------------------------------------------------------------------
// LP route

enum class Selection { PivotOrder, WeightedL1 };

struct LambdaOptions {
  Selection selection = Selection::WeightedL1;
};

struct LambdaResult {
  ExtReal value;
  Allocation allocation;
  RandomVariable payoff;                     // Z^X, sum of the securities
  std::vector<RandomVariable> securities;    // Z_i in S_i
  std::optional<Functional> subgradient;     // aggregate-constraint duals
  bool dual_degenerate = false;
  bool price_nonunique = false;
};

namespace detail {

struct JointLp {
  LpProblem lp;
  std::vector<std::vector<std::size_t>> xvar;  // [agent][scenario] or npos
  std::vector<std::vector<std::size_t>> zvar;  // [agent][security]
  std::vector<std::size_t> agg_row;            // per scenario
  std::size_t acc_rows_end = 0;
};

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// Variables X_i on the supports and z_i per security, acceptance of
/// X_i - Z_i, and sum_i X_i = X scenario by scenario. Objective: total price.
inline JointLp joint_lp(const AgentSystem& s, const RandomVariable& x) {
  JointLp j;
  const SpacePtr& sp = s.space();
  const std::size_t n = s.size(), m = sp->size();
  j.xvar.assign(n, std::vector<std::size_t>(m, npos));
  j.zvar.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Regime& r = s.regime(i);
    for (std::size_t w = 0; w < m; ++w)
      if (r.support().includes(w)) j.xvar[i][w] = j.lp.add_variable(0.0);
    for (std::size_t k = 0; k < r.market().size(); ++k) j.zvar[i].push_back(j.lp.add_variable(r.market().prices[k]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Regime& r = s.regime(i);
    std::vector<AffineExpr> pos(m);
    for (std::size_t w = 0; w < m; ++w) {
      if (j.xvar[i][w] == npos) continue;
      pos[w].terms.push_back({j.xvar[i][w], 1.0});
      for (std::size_t k = 0; k < r.market().size(); ++k)
        if (r.market().basis[k][w] != 0.0) pos[w].terms.push_back({j.zvar[i][k], -r.market().basis[k][w]});
    }
    append_acceptance(j.lp, r, pos);
  }
  j.acc_rows_end = j.lp.rows.size();
  for (std::size_t w = 0; w < m; ++w) {
    std::vector<LpTerm> t;
    for (std::size_t i = 0; i < n; ++i)
      if (j.xvar[i][w] != npos) t.push_back({j.xvar[i][w], 1.0});
    j.agg_row.push_back(j.lp.add_row(std::move(t), Sense::Equal, x[w]));
  }
  return j;
}

/// Deterministic generic weights for the L1 tie-break.
inline double tie_weight(std::size_t v) {
  const double g = 0.6180339887498949;
  const double f = static_cast<double>(v) * g;
  return 1.0 + 0.5 * (f - std::floor(f));
}

}  // namespace detail

/// Lambda(X) via one joint LP (agents with LP-representable acceptance).
/// Among optimal allocations the default selection minimises a fixed
/// generic weighted L1 norm, which makes it unique and continuous in X.
inline LambdaResult lambda_lp(const AgentSystem& s, const RandomVariable& x, const LambdaOptions& opt = {}) {
  require_same_space(s.space(), x.space(), "lambda");
  if (!s.lp_representable()) fail(ErrorKind::Unsupported, "entropic agents need the law-invariant route");
  const SpacePtr& sp = s.space();
  const std::size_t n = s.size(), m = sp->size();
  auto j = detail::joint_lp(s, x);
  auto sol = solve(j.lp);
  LambdaResult out;
  if (sol.status == LpStatus::Infeasible) {
    out.value = ExtReal::pos_inf();
    return out;
  }
  if (sol.status == LpStatus::Unbounded)
    fail(ErrorKind::Internal, "risk sharing LP unbounded: the system admits security arbitrage or lacks support");
  out.value = ExtReal::finite(sol.objective_value);
  out.dual_degenerate = sol.dual_degenerate;
  out.price_nonunique = sol.primal_degenerate;
  {
    std::vector<double> w(m);
    for (std::size_t k = 0; k < m; ++k) w[k] = sol.duals[j.agg_row[k]];
    out.subgradient = Functional::from_weights(sp, w);
  }

  Vec primal = sol.primal;
  if (opt.selection == Selection::WeightedL1) {
    LpProblem sel = j.lp;
    const std::size_t nv = sel.num_vars();
    std::vector<LpTerm> cost;
    for (std::size_t v = 0; v < nv; ++v) {
      if (j.lp.objective[v] != 0.0) cost.push_back({v, j.lp.objective[v]});
      sel.objective[v] = 0.0;
    }
    sel.add_row(cost, Sense::LessEq, sol.objective_value + 1e-11 * (1.0 + std::abs(sol.objective_value)));
    std::vector<std::size_t> reg;
    for (std::size_t i = 0; i < n; ++i) {
      for (auto v : j.xvar[i])
        if (v != detail::npos) reg.push_back(v);
      for (auto v : j.zvar[i]) reg.push_back(v);
    }
    for (auto v : reg) {
      const std::size_t a = sel.add_variable(detail::tie_weight(v), 0.0);
      sel.add_row({{a, 1.0}, {v, -1.0}}, Sense::GreaterEq, 0.0);
      sel.add_row({{a, 1.0}, {v, 1.0}}, Sense::GreaterEq, 0.0);
    }
    auto ss = solve(sel);
    if (ss.status == LpStatus::Optimal) primal.assign(ss.primal.begin(), ss.primal.begin() + static_cast<std::ptrdiff_t>(nv));
  }

  out.payoff = RandomVariable(sp);
  for (std::size_t i = 0; i < n; ++i) {
    RandomVariable part(sp), sec(sp);
    for (std::size_t w = 0; w < m; ++w)
      if (j.xvar[i][w] != detail::npos) part[w] = primal[j.xvar[i][w]];
    const auto& mk = s.regime(i).market();
    for (std::size_t k = 0; k < mk.size(); ++k) sec += primal[j.zvar[i][k]] * mk.basis[k];
    out.allocation.parts.push_back(part);
    out.securities.push_back(sec);
    out.payoff += sec;
  }
  // exact aggregation: put the rounding residue on a part that covers it
  RandomVariable resid = x - out.allocation.total();
  for (std::size_t w = 0; w < m; ++w)
    for (std::size_t i = 0; i < n; ++i)
      if (s.regime(i).support().includes(w)) {
        out.allocation.parts[i][w] += resid[w];
        break;
      }
  return out;
}

/// inf { pi(Z) : Z in M, X - Z in A_+ }, an LP over global coefficients and
/// acceptable parts. Returns value and optimal payoff.
inline std::pair<ExtReal, RandomVariable> payoff_form_lp(const AgentSystem& s, const RandomVariable& x) {
  if (!s.lp_representable()) fail(ErrorKind::Unsupported, "entropic agents need the law-invariant route");
  const SpacePtr& sp = s.space();
  const std::size_t n = s.size(), m = sp->size();
  const auto& gb = s.global_basis();
  LpProblem lp;
  std::vector<std::size_t> cv;
  for (std::size_t k = 0; k < gb.size(); ++k) cv.push_back(lp.add_variable(s.global_prices()[k]));
  std::vector<std::vector<std::size_t>> yv(n, std::vector<std::size_t>(m, detail::npos));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<AffineExpr> pos(m);
    for (std::size_t w = 0; w < m; ++w)
      if (s.regime(i).support().includes(w)) {
        yv[i][w] = lp.add_variable(0.0);
        pos[w].terms.push_back({yv[i][w], 1.0});
      }
    append_acceptance(lp, s.regime(i), pos);
  }
  for (std::size_t w = 0; w < m; ++w) {
    std::vector<LpTerm> t;
    for (std::size_t i = 0; i < n; ++i)
      if (yv[i][w] != detail::npos) t.push_back({yv[i][w], 1.0});
    for (std::size_t k = 0; k < gb.size(); ++k)
      if (gb[k][w] != 0.0) t.push_back({cv[k], gb[k][w]});
    lp.add_row(std::move(t), Sense::Equal, x[w]);
  }
  auto sol = solve(lp);
  RandomVariable z(sp);
  if (sol.status == LpStatus::Infeasible) return {ExtReal::pos_inf(), z};
  if (sol.status == LpStatus::Unbounded) return {ExtReal::neg_inf(), z};
  for (std::size_t k = 0; k < gb.size(); ++k) z += sol.primal[cv[k]] * gb[k];
  return {ExtReal::finite(sol.objective_value), z};
}

/// Y_i in A_i (inside the ideals) with sum_i Y_i = target, if any.
inline std::optional<Allocation> acceptable_split(const AgentSystem& s, const RandomVariable& target) {
  const SpacePtr& sp = s.space();
  const std::size_t n = s.size(), m = sp->size();
  LpProblem lp;
  std::vector<std::vector<std::size_t>> yv(n, std::vector<std::size_t>(m, detail::npos));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<AffineExpr> pos(m);
    for (std::size_t w = 0; w < m; ++w)
      if (s.regime(i).support().includes(w)) {
        yv[i][w] = lp.add_variable(0.0);
        pos[w].terms.push_back({yv[i][w], 1.0});
      }
    append_acceptance(lp, s.regime(i), pos);
  }
  for (std::size_t w = 0; w < m; ++w) {
    std::vector<LpTerm> t;
    for (std::size_t i = 0; i < n; ++i)
      if (yv[i][w] != detail::npos) t.push_back({yv[i][w], 1.0});
    lp.add_row(std::move(t), Sense::Equal, target[w]);
  }
  auto sol = solve(lp);
  if (sol.status != LpStatus::Optimal) return std::nullopt;
  Allocation a;
  for (std::size_t i = 0; i < n; ++i) {
    RandomVariable y(sp);
    for (std::size_t w = 0; w < m; ++w)
      if (yv[i][w] != detail::npos) y[w] = sol.primal[yv[i][w]];
    a.parts.push_back(y);
  }
  return a;
}

/// X - Lambda(X) U in A_+ + ker(pi)? (level-set identity certificate)
inline bool in_acceptable_plus_kernel(const AgentSystem& s, const RandomVariable& target, double tol = 1e-9) {
  const SpacePtr& sp = s.space();
  const std::size_t n = s.size(), m = sp->size();
  const auto& gb = s.global_basis();
  LpProblem lp;
  std::vector<std::size_t> cv;
  for (std::size_t k = 0; k < gb.size(); ++k) cv.push_back(lp.add_variable(0.0));
  std::vector<LpTerm> price;
  for (std::size_t k = 0; k < gb.size(); ++k) price.push_back({cv[k], s.global_prices()[k]});
  lp.add_row(price, Sense::Equal, 0.0);
  std::vector<std::vector<std::size_t>> yv(n, std::vector<std::size_t>(m, detail::npos));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<AffineExpr> pos(m);
    for (std::size_t w = 0; w < m; ++w)
      if (s.regime(i).support().includes(w)) {
        yv[i][w] = lp.add_variable(0.0);
        pos[w].terms.push_back({yv[i][w], 1.0});
      }
    append_acceptance(lp, s.regime(i), pos);
  }
  for (std::size_t w = 0; w < m; ++w) {
    std::vector<LpTerm> t;
    for (std::size_t i = 0; i < n; ++i)
      if (yv[i][w] != detail::npos) t.push_back({yv[i][w], 1.0});
    for (std::size_t k = 0; k < gb.size(); ++k)
      if (gb[k][w] != 0.0) t.push_back({cv[k], gb[k][w]});
    lp.add_row(std::move(t), Sense::Equal, target[w] - tol);
  }
  return solve(lp).status == LpStatus::Optimal;
}

/// A non-negative unit-price global security U = sum_i U_i.
inline RandomVariable global_unit(const AgentSystem& s) {
  auto u = unit_security(s.space(), s.global_basis(), s.global_prices());
  if (!u) fail(ErrorKind::Contract, "global market has no non-negative unit-price security");
  return detail::combine(s.space(), s.global_basis(), u->coeffs);
}

// ---------------------------------------------------------------------------
// Recession data

struct RecessionData {
  std::vector<Functional> cone;      // 0+A = {U in ideal : phi_j(U) <= 0}
  std::vector<RandomVariable> lineality;
};

inline RecessionData recession_data(const Regime& r) {
  if (!r.is_polyhedral()) fail(ErrorKind::Unsupported, "recession data needs an H-representation");
  const auto& a = r.polyhedral();
  const auto idx = r.support().indices();
  RecessionData out;
  out.cone = a.functionals;
  Matrix st(std::max<std::size_t>(a.functionals.size(), 1), idx.size());
  for (std::size_t j = 0; j < a.functionals.size(); ++j)
    for (std::size_t c = 0; c < idx.size(); ++c) st(j, c) = a.functionals[j].weight(idx[c]);
  for (const auto& v : null_space(st)) {
    RandomVariable u(r.space());
    for (std::size_t c = 0; c < idx.size(); ++c) u[idx[c]] = v[c];
    out.lineality.push_back(u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pareto construction from an optimal payoff

/// Splits X - Z into acceptable parts and adds the selected securities.
/// Requires Z in M with pi(Z) = Lambda(X), which is checked against
/// lambda_value when given.
inline Allocation pareto_from_payoff(const AgentSystem& s, const RandomVariable& x, const RandomVariable& z,
                                     std::optional<double> lambda_value = std::nullopt) {
  require_same_space(s.space(), x.space(), "pareto_from_payoff");
  if (!s.global_coords(z)) fail(ErrorKind::Domain, "payoff lies outside the global security space");
  if (lambda_value && std::abs(s.pi(z) - *lambda_value) > 1e-8 * (1.0 + std::abs(*lambda_value)))
    fail(ErrorKind::Contract, "payoff price differs from Lambda(X)");
  auto y = acceptable_split(s, x - z);
  if (!y) fail(ErrorKind::Contract, "X - Z is not in the aggregate acceptance set");
  auto psi = security_selection(s, z);
  Allocation a;
  for (std::size_t i = 0; i < s.size(); ++i) a.parts.push_back(y->parts[i] + psi[i]);
  return a;
}

/// First common security of agents i and j with nonzero price, scaled to
/// unit price. Used to move along a family of Pareto optima.
inline std::optional<RandomVariable> shared_unit_security(const AgentSystem& s, std::size_t i, std::size_t j) {
  auto ci = detail::regime_columns(s.regime(i));
  auto cj = detail::regime_columns(s.regime(j));
  std::vector<Vec> both = ci;
  for (auto v : cj) {
    for (double& x : v) x = -x;
    both.push_back(v);
  }
  for (const auto& nv : null_space(Matrix::from_columns(both, s.space()->size()))) {
    RandomVariable z(s.space());
    double p = 0.0;
    for (std::size_t k = 0; k < ci.size(); ++k) {
      z += nv[k] * s.regime(i).market().basis[k];
      p += nv[k] * s.regime(i).market().prices[k];
    }
    if (std::abs(p) > 1e-10) return (1.0 / p) * z;
  }
  return std::nullopt;
}

/// Moves amount * (unit shared security) from agent j to agent i. Sum of
/// risks is unchanged, so Pareto optimality is preserved.
inline Allocation shift_pareto(const AgentSystem& s, Allocation a, std::size_t i, std::size_t j, double amount) {
  auto z = shared_unit_security(s, i, j);
  if (!z) fail(ErrorKind::Domain, "agents share no priced security");
  a.parts[i] += amount * *z;
  a.parts[j] -= amount * *z;
  return a;
}

}  // namespace riskshare
