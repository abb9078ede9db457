#pragma once

// Dense two-phase tableau simplex. Every LP formulation in the library
// (risk measures, risk sharing, arbitrage checks, conjugates) is built with
// LpProblem and solved here; dual multipliers carry subgradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/linalg.hpp"

namespace riskshare {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEq, Equal, GreaterEq };
enum class LpStatus { Optimal, Unbounded, Infeasible };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::Infeasible: return "infeasible";
  }
  return "?";
}

struct LpTerm {
  std::size_t var;
  double coeff;
};

struct LpRow {
  std::vector<LpTerm> terms;
  Sense sense = Sense::LessEq;
  double rhs = 0.0;
};

/// minimise objective . x  subject to rows and lower <= x <= upper.
struct LpProblem {
  Vec objective;
  std::vector<LpRow> rows;
  Vec lower;
  Vec upper;

  std::size_t num_vars() const { return objective.size(); }

  std::size_t add_variable(double cost, double lo = -kInf, double hi = kInf) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    return objective.size() - 1;
  }
  std::size_t add_row(std::vector<LpTerm> terms, Sense sense, double rhs) {
    rows.push_back(LpRow{std::move(terms), sense, rhs});
    return rows.size() - 1;
  }
  /// Dense constructor helper: one row per entry of a.
  static LpProblem dense(Vec c, const std::vector<Vec>& a, const std::vector<Sense>& senses, const Vec& b,
                         Vec lo, Vec hi) {
    LpProblem p;
    p.objective = std::move(c);
    p.lower = std::move(lo);
    p.upper = std::move(hi);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].size() != p.objective.size()) fail(ErrorKind::Structural, "LP row width differs from objective length");
      LpRow r;
      for (std::size_t j = 0; j < a[i].size(); ++j)
        if (a[i][j] != 0.0) r.terms.push_back({j, a[i][j]});
      r.sense = senses.at(i);
      r.rhs = b.at(i);
      p.rows.push_back(std::move(r));
    }
    return p;
  }

  double row_activity(std::size_t i, const Vec& x) const {
    double s = 0.0;
    for (const auto& t : rows[i].terms) s += t.coeff * x[t.var];
    return s;
  }
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vec primal;                  // original variables (Optimal)
  Vec duals;                   // one per row: d objective / d rhs (Optimal)
  Vec reduced_costs;           // c - A^T y (Optimal)
  Vec ray;                     // improving feasible direction (Unbounded)
  double objective_value = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double complementarity_residual = 0.0;
  std::size_t iterations = 0;
  bool primal_degenerate = false;  // duals may be non-unique
  bool dual_degenerate = false;    // primal optimum may be non-unique
};

struct LpOptions {
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-9;
  double feasibility_tol = 1e-9;
  std::size_t degenerate_switch = 50;  // consecutive degenerate pivots before Bland
  std::size_t max_iterations = 0;      // 0: automatic cap
};

namespace detail {

class Tableau {
 public:
  Tableau(std::size_t m, std::size_t n) : m_(m), n_(n), t_(m + 1, n + 1), basis_(m) {}

  double& at(std::size_t i, std::size_t j) { return t_(i, j); }
  double at(std::size_t i, std::size_t j) const { return t_(i, j); }
  double& rhs(std::size_t i) { return t_(i, n_); }
  double rhs(std::size_t i) const { return t_(i, n_); }
  double& cost(std::size_t j) { return t_(m_, j); }
  double cost(std::size_t j) const { return t_(m_, j); }
  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::vector<std::size_t>& basis() { return basis_; }
  const std::vector<std::size_t>& basis() const { return basis_; }

  void pivot(std::size_t r, std::size_t c) {
    const double p = t_(r, c);
    auto prow = t_.row(r);
    for (double& v : prow) v /= p;
    prow[c] = 1.0;
    for (std::size_t i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f == 0.0) continue;
      auto row = t_.row(i);
      for (std::size_t j = 0; j <= n_; ++j) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
    basis_[r] = c;
  }

 private:
  std::size_t m_, n_;
  Matrix t_;
  std::vector<std::size_t> basis_;
};

struct ColumnMap {
  double offset = 0.0;
  std::vector<std::pair<std::size_t, double>> cols;  // (standard column, sign)
};

}  // namespace detail

/// Solve an LP. Status is exact up to the option tolerances; on Optimal the
/// solution carries duals and certificate residuals. Deterministic: the pivot
/// rule is Dantzig's with lowest-index tie breaking, switching to Bland's rule
/// after a run of degenerate pivots.
inline LpSolution solve(const LpProblem& p, const LpOptions& opt = {}) {
  const std::size_t nvar = p.objective.size();
  if (p.lower.size() != nvar || p.upper.size() != nvar)
    fail(ErrorKind::Structural, "LP bounds length differs from objective length");
  for (const auto& r : p.rows) {
    if (!std::isfinite(r.rhs)) fail(ErrorKind::Structural, "LP right-hand sides must be finite");
    for (const auto& t : r.terms)
      if (t.var >= nvar) fail(ErrorKind::Structural, "LP row references unknown variable");
  }

  LpSolution sol;

  // Variable substitution to y >= 0.
  std::vector<detail::ColumnMap> map(nvar);
  std::vector<double> std_cost;
  std::vector<std::size_t> mirror;  // partner column of a free split, or npos
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  struct BoundRow {
    std::size_t col;
    double ub;
  };
  std::vector<BoundRow> bound_rows;
  double cost_offset = 0.0;
  for (std::size_t j = 0; j < nvar; ++j) {
    const double lo = p.lower[j], hi = p.upper[j], c = p.objective[j];
    if (lo > hi) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    if (std::isfinite(lo)) {
      map[j].offset = lo;
      map[j].cols.push_back({std_cost.size(), 1.0});
      if (std::isfinite(hi)) bound_rows.push_back({std_cost.size(), hi - lo});
      std_cost.push_back(c);
      mirror.push_back(npos);
      cost_offset += c * lo;
    } else if (std::isfinite(hi)) {
      map[j].offset = hi;
      map[j].cols.push_back({std_cost.size(), -1.0});
      std_cost.push_back(-c);
      mirror.push_back(npos);
      cost_offset += c * hi;
    } else {
      const std::size_t a = std_cost.size();
      map[j].cols.push_back({a, 1.0});
      map[j].cols.push_back({a + 1, -1.0});
      std_cost.push_back(c);
      std_cost.push_back(-c);
      mirror.push_back(a + 1);
      mirror.push_back(a);
    }
  }
  const std::size_t nstruct = std_cost.size();

  const std::size_t m_orig = p.rows.size();
  const std::size_t m = m_orig + bound_rows.size();
  std::size_t nslack = 0;
  for (const auto& r : p.rows)
    if (r.sense != Sense::Equal) ++nslack;
  nslack += bound_rows.size();
  const std::size_t nreal = nstruct + nslack;
  const std::size_t ncols = nreal + m;  // + artificials
  for (std::size_t k = 0; k < nslack; ++k) {
    std_cost.push_back(0.0);
    mirror.push_back(npos);
  }

  detail::Tableau tab(m, ncols);
  std::vector<double> flip(m, 1.0);
  std::vector<std::size_t> slack_of_row(m, npos);
  {
    std::size_t slack = nstruct;
    for (std::size_t i = 0; i < m_orig; ++i) {
      const auto& r = p.rows[i];
      double rhs = r.rhs;
      for (const auto& t : r.terms) {
        rhs -= t.coeff * map[t.var].offset;
        for (const auto& [col, sign] : map[t.var].cols) tab.at(i, col) += t.coeff * sign;
      }
      if (r.sense != Sense::Equal) {
        tab.at(i, slack) = (r.sense == Sense::LessEq) ? 1.0 : -1.0;
        slack_of_row[i] = slack++;
      }
      tab.rhs(i) = rhs;
    }
    for (std::size_t k = 0; k < bound_rows.size(); ++k) {
      const std::size_t i = m_orig + k;
      tab.at(i, bound_rows[k].col) = 1.0;
      tab.at(i, slack) = 1.0;
      slack_of_row[i] = slack++;
      tab.rhs(i) = bound_rows[k].ub;
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.rhs(i) < 0.0) {
      flip[i] = -1.0;
      for (std::size_t j = 0; j < nreal; ++j) tab.at(i, j) = -tab.at(i, j);
      tab.rhs(i) = -tab.rhs(i);
    }
    tab.at(i, nreal + i) = 1.0;
    tab.basis()[i] = nreal + i;
  }

  const std::size_t cap =
      opt.max_iterations ? opt.max_iterations : 200 * (m + ncols) + 5000;
  std::size_t iters = 0;

  auto is_art = [&](std::size_t j) { return j >= nreal; };

  // Runs the simplex loop on the current cost row. Returns npos on optimality
  // or the entering column that proved unboundedness.
  auto run = [&](bool allow_art) -> std::size_t {
    std::size_t degenerate_run = 0;
    while (true) {
      const bool bland = degenerate_run >= opt.degenerate_switch;
      std::size_t enter = npos;
      double best = -opt.optimality_tol;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (!allow_art && is_art(j)) continue;
        const double d = tab.cost(j);
        if (d < -opt.optimality_tol) {
          if (bland) {
            enter = j;
            break;
          }
          if (d < best) {
            best = d;
            enter = j;
          }
        }
      }
      if (enter == npos) return npos;

      std::size_t leave = npos;
      double best_ratio = kInf;
      for (std::size_t i = 0; i < m; ++i) {
        const double a = tab.at(i, enter);
        if (a <= opt.pivot_tol) continue;
        const double ratio = std::max(tab.rhs(i), 0.0) / a;
        const double eps = 1e-12 * (1.0 + ratio);
        if (leave == npos || ratio < best_ratio - eps ||
            (ratio <= best_ratio + eps && tab.basis()[i] < tab.basis()[leave])) {
          best_ratio = ratio;
          leave = i;
        }
      }
      if (leave == npos) return enter;

      degenerate_run = (best_ratio <= 1e-12) ? degenerate_run + 1 : 0;
      tab.pivot(leave, enter);
      if (++iters > cap) fail(ErrorKind::Numerical, "simplex iteration cap exceeded");
    }
  };

  // Phase 1: minimise the sum of artificials.
  for (std::size_t j = 0; j <= ncols; ++j) tab.cost(j) = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < nreal; ++j) tab.cost(j) -= tab.at(i, j);
  tab.cost(ncols) = 0.0;
  for (std::size_t i = 0; i < m; ++i) tab.cost(ncols) -= tab.rhs(i);
  run(true);

  double bscale = 1.0;
  for (std::size_t i = 0; i < m; ++i) bscale = std::max(bscale, std::abs(tab.rhs(i)));
  double infeas = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (is_art(tab.basis()[i])) infeas += std::max(tab.rhs(i), 0.0);
  if (infeas > opt.feasibility_tol * bscale) {
    sol.status = LpStatus::Infeasible;
    sol.iterations = iters;
    return sol;
  }
  // Drive remaining artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (!is_art(tab.basis()[i])) continue;
    std::size_t best = npos;
    double bestv = opt.pivot_tol;
    for (std::size_t j = 0; j < nreal; ++j)
      if (std::abs(tab.at(i, j)) > bestv) {
        bestv = std::abs(tab.at(i, j));
        best = j;
      }
    if (best != npos) tab.pivot(i, best);
  }

  // Phase 2 cost row: d_j = c_j - c_B^T B^{-1} A_j.
  auto basic_cost = [&](std::size_t i) { return is_art(tab.basis()[i]) ? 0.0 : std_cost[tab.basis()[i]]; };
  for (std::size_t j = 0; j < ncols; ++j) {
    double d = is_art(j) ? 0.0 : std_cost[j];
    for (std::size_t i = 0; i < m; ++i) d -= basic_cost(i) * tab.at(i, j);
    tab.cost(j) = d;
  }
  {
    double z = 0.0;
    for (std::size_t i = 0; i < m; ++i) z += basic_cost(i) * tab.rhs(i);
    tab.cost(ncols) = -z;
  }
  const std::size_t unbounded_col = run(false);
  sol.iterations = iters;

  auto to_original = [&](const std::vector<double>& y, bool with_offset) {
    Vec x(nvar, 0.0);
    for (std::size_t j = 0; j < nvar; ++j) {
      double v = with_offset ? map[j].offset : 0.0;
      for (const auto& [col, sign] : map[j].cols) v += sign * y[col];
      x[j] = v;
    }
    return x;
  };

  if (unbounded_col != npos) {
    std::vector<double> d(ncols, 0.0);
    d[unbounded_col] = 1.0;
    for (std::size_t i = 0; i < m; ++i) d[tab.basis()[i]] = -tab.at(i, unbounded_col);
    sol.status = LpStatus::Unbounded;
    sol.ray = to_original(d, false);
    return sol;
  }

  std::vector<double> y(ncols, 0.0);
  for (std::size_t i = 0; i < m; ++i) y[tab.basis()[i]] = std::max(tab.rhs(i), 0.0);
  sol.status = LpStatus::Optimal;
  sol.primal = to_original(y, true);
  sol.objective_value = dot(p.objective, sol.primal);

  sol.duals.assign(m_orig, 0.0);
  for (std::size_t i = 0; i < m_orig; ++i) {
    double v = 0.0;
    for (std::size_t r = 0; r < m; ++r) v += basic_cost(r) * tab.at(r, nreal + i);
    sol.duals[i] = flip[i] * v;
  }

  // Certificates in terms of the original problem.
  sol.reduced_costs = p.objective;
  for (std::size_t i = 0; i < m_orig; ++i)
    for (const auto& t : p.rows[i].terms) sol.reduced_costs[t.var] -= t.coeff * sol.duals[i];
  double dobj = 0.0;
  for (std::size_t i = 0; i < m_orig; ++i) dobj += p.rows[i].rhs * sol.duals[i];
  double comp = 0.0;
  for (std::size_t j = 0; j < nvar; ++j) {
    const double r = sol.reduced_costs[j];
    if (r > 0.0) {
      if (std::isfinite(p.lower[j])) {
        dobj += r * p.lower[j];
        comp += r * std::abs(sol.primal[j] - p.lower[j]);
      } else if (r > opt.optimality_tol) {
        dobj = -kInf;
      } else {
        comp += r * std::abs(sol.primal[j]);
      }
    } else if (r < 0.0) {
      if (std::isfinite(p.upper[j])) {
        dobj += r * p.upper[j];
        comp += -r * std::abs(sol.primal[j] - p.upper[j]);
      } else if (r < -opt.optimality_tol) {
        dobj = -kInf;
      } else {
        comp += -r * std::abs(sol.primal[j]);
      }
    }
  }
  double pres = 0.0;
  for (std::size_t i = 0; i < m_orig; ++i) {
    const double act = p.row_activity(i, sol.primal);
    const double rhs = p.rows[i].rhs;
    double viol = 0.0;
    switch (p.rows[i].sense) {
      case Sense::LessEq: viol = std::max(0.0, act - rhs); break;
      case Sense::GreaterEq: viol = std::max(0.0, rhs - act); break;
      case Sense::Equal: viol = std::abs(act - rhs); break;
    }
    pres = std::max(pres, viol);
    comp += std::abs(sol.duals[i]) * (p.rows[i].sense == Sense::Equal ? 0.0 : std::abs(act - rhs));
  }
  for (std::size_t j = 0; j < nvar; ++j) {
    pres = std::max(pres, p.lower[j] - sol.primal[j]);
    pres = std::max(pres, sol.primal[j] - p.upper[j]);
  }
  sol.dual_objective = dobj;
  sol.primal_residual = pres;
  sol.complementarity_residual = comp;

  std::vector<bool> basic(ncols, false);
  for (std::size_t i = 0; i < m; ++i) {
    basic[tab.basis()[i]] = true;
    if (tab.rhs(i) <= opt.feasibility_tol) sol.primal_degenerate = true;
  }
  for (std::size_t j = 0; j < nreal; ++j) {
    if (basic[j]) continue;
    if (mirror[j] != npos && basic[mirror[j]]) continue;
    if (std::abs(tab.cost(j)) <= opt.optimality_tol) sol.dual_degenerate = true;
  }
  (void)cost_offset;
  return sol;
}

}  // namespace riskshare
