#pragma once

// Law-invariant risk sharing: entropic convolutions, the two worked
// two-agent configurations (entropic/entropic and AVaR/entropic with a
// zero-price kernel security) and the general decomposition
//     X_i = A_i - N_i + Lambda(X) U_i,   A_i = f_i(X - Lambda(X) U + N).

#include <cmath>
#include <optional>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/market.hpp"
#include "riskshare/measures.hpp"
#include "riskshare/numeric.hpp"
#include "riskshare/regime.hpp"
#include "riskshare/securitize.hpp"

namespace riskshare {

struct InfConvResult {
  double value = 0.0;
  double alpha = 0.0;  // harmonic sum of the risk aversions
  ComonotoneSplit split;
  std::vector<double> parts;  // xi_i(f_i(X))
};

inline InfConvResult entropic_infconv(std::span<const double> alphas, const RandomVariable& x) {
  if (alphas.empty()) fail(ErrorKind::Domain, "no risk aversions given");
  std::vector<BaseMeasure> ms;
  for (double a : alphas) {
    if (!(a > 0.0) || !std::isfinite(a)) fail(ErrorKind::Domain, "risk aversion must be positive");
    ms.push_back(BaseMeasure::entropic(a));
  }
  auto s = comonotone_split(ms, x);
  return {s.value, convolve(ms).alpha, std::move(s.split), std::move(s.parts)};
}

namespace detail {

inline double mass_on(const RandomVariable& ind) {
  double m = 0.0;
  for (std::size_t w = 0; w < ind.size(); ++w) m += ind.space()->prob(w) * ind[w];
  return m;
}

inline void require_indicator(const RandomVariable& ind) {
  for (std::size_t w = 0; w < ind.size(); ++w)
    if (ind[w] != 0.0 && ind[w] != 1.0) fail(ErrorKind::Structural, "event must be given as a 0/1 indicator");
  const double m = mass_on(ind);
  if (!(m > 0.0 && m < 1.0)) fail(ErrorKind::Domain, "event must have probability strictly between 0 and 1");
}

inline RandomVariable complement(const RandomVariable& ind) { return RandomVariable::constant(ind.space(), 1.0) - ind; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Two entropic agents: S_1 = span{1_A, 1_A^c}, S_2 = R 1_A, prices p E_Q with
// Q(A) = 1/2.

struct EntropicPairResult {
  double lambda = 0.0;
  double alpha = 0.0;      // beta gamma / (beta + gamma)
  double cash = 0.0;       // lambda / p units of the riskless asset
  double r_star = 0.0;     // kernel coefficient, N_r = r 1_A - r 1_A^c
  double discriminant = 0.0;
  Allocation allocation;
  std::vector<RandomVariable> acceptable;  // the two acceptable components
  double residual = 0.0;   // xi_alpha(X - cash - N_r*)
};

inline EntropicPairResult lambda_entropic_pair(double p, double beta, double gamma, const RandomVariable& a_ind,
                                        const RandomVariable& x) {
  if (!(p > 0.0)) fail(ErrorKind::Domain, "price scale must be positive");
  if (!(beta > 0.0) || !(gamma > 0.0)) fail(ErrorKind::Domain, "risk aversions must be positive");
  require_same_space(a_ind.space(), x.space(), "lambda_entropic_pair");
  detail::require_indicator(a_ind);
  const SpacePtr& sp = x.space();
  EntropicPairResult out;
  out.alpha = beta * gamma / (beta + gamma);
  const double al = out.alpha;

  // log E[e^{alpha X} 1_B] with a max shift
  auto log_part = [&](const RandomVariable& ind, double shift) {
    std::vector<double> logs, ws;
    for (std::size_t w = 0; w < sp->size(); ++w)
      if (ind[w] == 1.0) {
        logs.push_back(al * (x[w] - shift));
        ws.push_back(sp->prob(w));
      }
    return log_sum_exp(logs, ws);
  };
  const RandomVariable ac = detail::complement(a_ind);
  // minimising the kernel coefficient gives 2 sqrt(ab) e^{-alpha c} <= 1
  out.cash = (log_part(a_ind, 0.0) + log_part(ac, 0.0) + 2.0 * std::log(2.0)) / (2.0 * al);
  out.lambda = p * out.cash;

  const double la = log_part(a_ind, out.cash), lb = log_part(ac, out.cash);
  const double ab4 = 4.0 * std::exp(la + lb);
  out.discriminant = 1.0 - ab4;
  if (out.discriminant < -1e-10) fail(ErrorKind::Contract, "negative discriminant for the kernel coefficient");
  const double root = std::sqrt(std::max(0.0, out.discriminant));
  out.r_star = (std::log(2.0) + la - std::log(1.0 + root)) / al;

  RandomVariable n = out.r_star * a_ind - out.r_star * ac;
  RandomVariable y = x - out.cash - n;
  out.residual = xi(BaseMeasure::entropic(al), y);
  if (out.residual > 1e-8) fail(ErrorKind::Internal, "assembled position is not acceptable");
  const double w1 = gamma / (beta + gamma), w2 = beta / (beta + gamma);
  out.acceptable = {w1 * y, w2 * y};
  RandomVariable x1 = w1 * y + out.cash + n;
  RandomVariable x2 = x - x1;
  out.allocation.parts = {x1, x2};
  return out;
}

// ---------------------------------------------------------------------------
// AVaR agent and entropic agent, S_1 = span{1_A, 1_A^c}, S_2 = R 1_A,
// prices E_{Q*} with Q*(A) = a*. The zero-price security is
// N = 1_A - r* 1_A^c with r* = a* / (1 - a*).

struct AvarEntropicResult {
  double lambda = 0.0;
  double a_star = 0.0;
  double r_star = 0.0;
  double s_star = 0.0;
  double s_lower = 0.0;  // one-sided difference-quotient bounds on s
  double s_upper = 0.0;
  double zeta = 0.0;
  double rebalance = 0.0;                // cash moved from part 1 to part 2
  std::vector<double> dual_density;      // maximiser of the dual problem
  double dual_gap = 0.0;                 // F(X - s* N) - lambda
  std::vector<RandomVariable> acceptable;
  Allocation allocation;
};

namespace detail {

/// max E_Q[X] - H(Q|P)/gamma over 0 <= q <= cap, E[q] = 1, Q(A) = a.
struct SplitDual {
  double value = 0.0;
  double lambda_a = 0.0, lambda_ac = 0.0;  // marginal values of mass on A, A^c
  std::vector<double> q;
};

inline SplitDual split_dual(const RandomVariable& x, const RandomVariable& a_ind, double gamma, double cap,
                            double a) {
  const SpacePtr& sp = x.space();
  std::vector<double> pa, ya, pc, yc;
  std::vector<std::size_t> ia, ic;
  for (std::size_t w = 0; w < sp->size(); ++w) {
    if (a_ind[w] == 1.0) {
      pa.push_back(sp->prob(w));
      ya.push_back(x[w]);
      ia.push_back(w);
    } else {
      pc.push_back(sp->prob(w));
      yc.push_back(x[w]);
      ic.push_back(w);
    }
  }
  const WaterFill fa = water_fill(pa, ya, gamma, cap, a);
  const WaterFill fc = water_fill(pc, yc, gamma, cap, 1.0 - a);
  SplitDual d;
  d.value = fa.value + fc.value;
  d.lambda_a = (fa.nu - 1.0) / gamma;
  d.lambda_ac = (fc.nu - 1.0) / gamma;
  d.q.assign(sp->size(), 0.0);
  for (std::size_t k = 0; k < ia.size(); ++k) d.q[ia[k]] = fa.q[k];
  for (std::size_t k = 0; k < ic.size(); ++k) d.q[ic[k]] = fc.q[k];
  return d;
}

}  // namespace detail

inline AvarEntropicResult lambda_avar_entropic(double beta, double gamma, const RandomVariable& a_ind, double q_star_a,
                                       const RandomVariable& x) {
  if (!(beta > 0.0 && beta < 1.0)) fail(ErrorKind::Domain, "AVaR level must lie in (0,1)");
  if (!(gamma > 0.0)) fail(ErrorKind::Domain, "risk aversion must be positive");
  require_same_space(a_ind.space(), x.space(), "lambda_avar_entropic");
  detail::require_indicator(a_ind);
  const double cap = 1.0 / (1.0 - beta);
  const double pa = detail::mass_on(a_ind), pc = 1.0 - pa;
  if (!(pa < 1.0 - beta)) fail(ErrorKind::Contract, "event probability must be below 1 - beta");
  const double lo = std::max(0.0, 1.0 - cap * pc), hi = cap * pa;
  if (!(q_star_a > lo && q_star_a < hi))
    fail(ErrorKind::Contract, "pricing mass on the event must lie strictly inside the dual range");

  AvarEntropicResult out;
  out.a_star = q_star_a;
  out.r_star = q_star_a / (1.0 - q_star_a);
  const RandomVariable ac = detail::complement(a_ind);
  const RandomVariable n = a_ind - out.r_star * ac;

  const auto d = detail::split_dual(x, a_ind, gamma, cap, q_star_a);
  out.lambda = d.value;
  out.dual_density = d.q;
  out.s_star = (1.0 - q_star_a) * (d.lambda_a - d.lambda_ac);

  // one-sided bounds from the definition of the admissible interval
  const double h = 1e-6 * std::min(hi - q_star_a, q_star_a - lo);
  const double scale = 1.0 + out.r_star;
  out.s_lower = (detail::split_dual(x, a_ind, gamma, cap, q_star_a + h).value - out.lambda) / (scale * h);
  out.s_upper = (out.lambda - detail::split_dual(x, a_ind, gamma, cap, q_star_a - h).value) / (scale * h);
  const double slack = 1e-6 * (1.0 + std::abs(out.s_star));
  if (out.s_lower > out.s_star + slack || out.s_star > out.s_upper + slack)
    fail(ErrorKind::Contract, "empty interval for the kernel coefficient");

  const RandomVariable y = x - out.lambda - out.s_star * n;
  const CappedEntropic conv{gamma, cap};
  out.dual_gap = xi(conv, y);

  // breakpoint: gamma z - log E[e^{gamma (Y ^ z)}] = log cap
  auto hfun = [&](double z) {
    std::vector<double> logs(y.size());
    for (std::size_t w = 0; w < y.size(); ++w) logs[w] = gamma * std::min(y[w], z);
    return gamma * z - log_sum_exp(logs, y.space()->probs()) - std::log(cap);
  };
  const double zlo = y.min() - 1.0;
  const double zhi = std::max(y.min(), xi(BaseMeasure::entropic(gamma), y) + std::log(cap) / gamma) + 1.0;
  out.zeta = bisect(hfun, zlo, zhi, 1e-14);

  RandomVariable tail(y.space()), body(y.space());
  for (std::size_t w = 0; w < y.size(); ++w) {
    tail[w] = std::max(0.0, y[w] - out.zeta);
    body[w] = std::min(y[w], out.zeta);
  }
  out.rebalance = xi(BaseMeasure::avar(beta), tail);
  RandomVariable a1 = tail - out.rebalance;
  RandomVariable a2 = body + out.rebalance;
  out.acceptable = {a1, a2};
  RandomVariable x1 = a1 - out.s_star * out.r_star * ac + out.lambda;
  RandomVariable x2 = x - x1;
  out.allocation.parts = {x1, x2};
  return out;
}

// ---------------------------------------------------------------------------
// General law-invariant systems

/// Law-invariant problem given by base measures, security spaces and a
/// pricing rule p E_Q.
struct LawInvProblem {
  SpacePtr space;
  std::vector<BaseMeasure> measures;
  std::vector<std::vector<RandomVariable>> securities;
  std::vector<double> q;  // pricing density
  double p = 1.0;

  AgentSystem system() const {
    if (measures.size() != securities.size()) fail(ErrorKind::Structural, "one security space per agent");
    std::vector<Regime> rs;
    for (std::size_t i = 0; i < measures.size(); ++i) {
      SecurityMarket m;
      m.basis = securities[i];
      for (const auto& b : m.basis) m.prices.push_back(price(b));
      rs.emplace_back(SupportMask::full(space), LawInvariantAcceptanceSet{measures[i]}, m,
                      "agent" + std::to_string(i + 1));
    }
    return AgentSystem(std::move(rs));
  }

  double price(const RandomVariable& z) const {
    double s = 0.0;
    for (std::size_t w = 0; w < space->size(); ++w) s += space->prob(w) * q[w] * z[w];
    return p * s;
  }
};

/// Shape of the pricing rule and the risk-aversion-to-pricing condition,
/// the latter checked on +-N for a basis N of the zero-price securities.
inline Report check_pricing_assumption(const LawInvProblem& prob, double tol = 1e-10) {
  Report rep;
  const SpacePtr& sp = prob.space;
  double mass = 0.0;
  bool nonneg = true, is_one = true;
  for (std::size_t w = 0; w < sp->size(); ++w) {
    nonneg = nonneg && prob.q.at(w) >= 0.0;
    is_one = is_one && std::abs(prob.q[w] - 1.0) <= tol;
    mass += sp->prob(w) * prob.q[w];
  }
  rep.add("pricing.density", nonneg && std::abs(mass - 1.0) <= 1e-10 && prob.p > 0.0, mass);
  if (is_one) {
    rep.add("pricing.shape", true, 0.0, "pricing equals the reference measure");
    return rep;
  }
  double cap = BaseMeasure::kInfinity;
  for (const auto& m : prob.measures) cap = std::min(cap, m.cap());
  bool in_dom = true;
  for (std::size_t w = 0; w < sp->size(); ++w) in_dom = in_dom && prob.q[w] <= cap + tol;
  rep.add("pricing.in_dual_domain", in_dom && cap > 1.0, cap);

  std::vector<RandomVariable> all;
  for (const auto& s : prob.securities)
    for (const auto& b : s) all.push_back(b);
  std::vector<Vec> cols;
  for (const auto& b : all) cols.push_back(b.values());
  // independent subset, then zero-price combinations
  Matrix m = Matrix::from_columns(cols, sp->size());
  auto piv = detail::rref(m, kRankTol);
  std::vector<RandomVariable> basis;
  Vec prices;
  for (auto k : piv) {
    basis.push_back(all[k]);
    prices.push_back(prob.price(all[k]));
  }
  bool ok = true;
  double worst = kInf;
  if (basis.size() > 1)
    for (const auto& c : null_space(Matrix::from_rows({prices}))) {
      const RandomVariable nv = detail::combine(sp, basis, c);
      for (double sign : {1.0, -1.0}) {
        RandomVariable y = sign * nv;
        const double best = cap == 1.0 ? expectation(y)
                                       : water_fill(sp->probs(), y.values(), BaseMeasure::kInfinity, cap).value;
        worst = std::min(worst, best);
        ok = ok && best > tol;
      }
    }
  rep.add("pricing.kernel_witness", ok, std::isfinite(worst) ? worst : 0.0, "checked on +-N for a kernel basis");
  return rep;
}

struct LawInvResult {
  ExtReal value;
  RandomVariable payoff;   // Z^X
  RandomVariable unit;     // U, unit price
  RandomVariable kernel;   // N = Lambda U - Z^X
  std::vector<RandomVariable> acceptable;  // A_i
  std::vector<RandomVariable> kernel_parts;
  std::vector<RandomVariable> unit_parts;
  Allocation allocation;
  SplitResult split;
  std::optional<Functional> subgradient;
};

/// Lambda for a system of law-invariant agents: cheapest securitisation
/// under the convolved base measure, then a comonotone split of the
/// securitised position.
inline LawInvResult lawinv_lambda(const AgentSystem& s, const RandomVariable& x) {
  if (!s.all_law_invariant()) fail(ErrorKind::Unsupported, "every agent must be law-invariant");
  require_same_space(s.space(), x.space(), "lawinv_lambda");
  const SpacePtr& sp = s.space();
  std::vector<BaseMeasure> ms;
  for (const auto& r : s.regimes()) ms.push_back(r.base());
  const CappedEntropic conv = convolve(ms);

  LawInvResult out;
  if (std::isfinite(conv.alpha)) {
    auto sm = securitised_min(conv, x, s.global_basis(), s.global_prices());
    out.value = sm.value;
    if (!sm.value.is_finite()) return out;
    out.payoff = sm.security;
    std::vector<double> w(sp->size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = sp->prob(k) * sm.density[k] / sm.unit_weight;
    out.subgradient = Functional::from_weights(sp, w);
  } else {
    auto lr = lambda_lp(s, x);
    out.value = lr.value;
    if (!lr.value.is_finite()) return out;
    out.payoff = lr.payoff;
    out.subgradient = lr.subgradient;
  }
  const double lam = out.value.value();
  out.unit = global_unit(s);
  out.kernel = lam * out.unit - out.payoff;
  const RandomVariable y = x - out.payoff;  // X - Lambda U + N
  out.split = comonotone_split(ms, y);
  const auto psi_n = security_selection(s, out.kernel);
  const auto psi_u = security_selection(s, out.unit);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.acceptable.push_back(out.split.split.apply(i, y));
    out.kernel_parts.push_back(psi_n[i]);
    out.unit_parts.push_back(psi_u[i]);
    out.allocation.parts.push_back(out.acceptable[i] - psi_n[i] + lam * psi_u[i]);
  }
  // exact aggregation
  RandomVariable resid = x - out.allocation.total();
  out.allocation.parts.back() += resid;
  return out;
}

}  // namespace riskshare
