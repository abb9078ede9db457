// One line per acceptance criterion; non-zero exit when any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "riskshare/io.hpp"
#include "support.hpp"

using namespace riskshare;
using rs_test::rv;

namespace {

const std::string kFixtures = RISKSHARE_FIXTURES;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += "; over the " + fmt("%.0f", budget_s) + " s budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %-34s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

double sum_risks(const AgentSystem& s, const Allocation& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) t += rho(s.regime(i), a.parts[i]).value.as_double();
  return t;
}

// random polyhedral systems with finite Lambda near the origin
std::vector<AgentSystem> polyhedral_family(std::mt19937_64& rng, std::size_t count, std::size_t scenarios) {
  std::vector<AgentSystem> out;
  for (std::size_t k = 0; k < count; ++k) {
    rs_test::RandomPolyhedral cfg;
    cfg.agents = 2 + k % 2;
    cfg.scenarios = scenarios;
    out.push_back(rs_test::random_polyhedral(rng, cfg));
  }
  return out;
}

Outcome two_desk_closed_form() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  double err = 0.0, perr = 0.0;
  for (int t = 0; t < 200; ++t) {
    const double k1a = u(rng), k1b = u(rng), k2b = u(rng), k2c = u(rng);
    auto s = rs_test::two_desk(k1a, k1b, k2b, k2c);
    auto x = rv(s.space(), {u(rng), u(rng), u(rng)});
    const double lam = lambda(s, x).value.value();
    const double ra = x[0] - k1a, rb = x[1] - k1b - k2b, rc = x[2] - k2c;
    err = std::max(err, std::abs(lam - (ra + rb + rc)));
    auto z = rv(s.space(), {ra, lam - ra - rc, rc});
    perr = std::max(perr, std::abs(s.pi(z) - lam));
  }
  return {err <= 1e-8 && perr <= 1e-10, "max |Lambda - closed form| " + fmt("%.1e", err) + ", payoff price error " +
                                            fmt("%.1e", perr)};
}

Outcome entropic_convolution() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  auto sp = ScenarioSpace::uniform(8);
  double err = 0.0, bracket = -kInf;
  for (int t = 0; t < 50; ++t) {
    const double b = u(rng), g = u(rng);
    auto x = rs_test::random_loss(rng, sp, -2, 2);
    const std::vector<double> al = {b, g};
    const double v = entropic_infconv(al, x).value;
    err = std::max(err, std::abs(v - xi(BaseMeasure::entropic(b * g / (b + g)), x)));
    AgentSystem s({rs_test::lawinv_cash(sp, BaseMeasure::entropic(b)), rs_test::lawinv_cash(sp, BaseMeasure::entropic(g))});
    auto br = brute_lambda(s, x, GridSpec::around(x, 2.0, 0.02));
    // distance outside [lower, best]
    bracket = std::max(bracket, std::max(v - br.best, br.lower - v));
  }
  return {err <= 1e-8 && bracket <= 1e-10,
          "max identity error " + fmt("%.1e", err) + ", worst bracket excess " + fmt("%.1e", bracket)};
}

Outcome entropic_pair() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  auto sp = ScenarioSpace::uniform(8);
  auto a = rs_test::indicator(sp, {0, 1, 2, 3});
  double err = 0.0, acc = -kInf, sum = 0.0;
  for (int t = 0; t < 20; ++t) {
    const double p = u(rng), b = u(rng), g = u(rng);
    auto x = rs_test::random_loss(rng, sp);
    auto r = lambda_entropic_pair(p, b, g, a, x);
    err = std::max(err, std::abs(r.lambda - entropic_pair_oracle(p, b, g, a, x)));
    acc = std::max({acc, xi(BaseMeasure::entropic(b), r.acceptable[0]), xi(BaseMeasure::entropic(g), r.acceptable[1])});
    sum = std::max(sum, (r.allocation.total() - x).sup_norm());
  }
  return {err <= 1e-6 && acc <= 1e-8 && sum <= 1e-12, "max |closed form - line search| " + fmt("%.1e", err) +
                                                        ", max xi of parts " + fmt("%.1e", acc) + ", sum residual " +
                                                        fmt("%.1e", sum)};
}

Outcome avar_entropic() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto sp = ScenarioSpace::uniform(8);
  auto a = rs_test::indicator(sp, {0, 1});
  double err = 0.0, av = -kInf, en = -kInf;
  for (int t = 0; t < 10; ++t) {
    const double beta = 0.3 + 0.4 * u(rng), gamma = 0.5 + 2.0 * u(rng);
    const double hi = 0.25 / (1.0 - beta), lo = std::max(0.0, 1.0 - 0.75 / (1.0 - beta));
    const double qa = lo + (0.1 + 0.8 * u(rng)) * (hi - lo);
    auto x = rs_test::random_loss(rng, sp, -2, 2);
    auto r = lambda_avar_entropic(beta, gamma, a, qa, x);
    err = std::max(err, std::abs(r.lambda - avar_entropic_oracle(beta, gamma, a, qa, x)));
    av = std::max(av, xi(BaseMeasure::avar(beta), r.acceptable[0]));
    en = std::max(en, xi(BaseMeasure::entropic(gamma), r.acceptable[1]));
  }
  return {err <= 2e-4 && av <= 1e-6 && en <= 1e-6, "max |solver - oracle| " + fmt("%.1e", err) + ", AVaR part " +
                                                       fmt("%.1e", av) + ", entropic part " + fmt("%.1e", en)};
}

Outcome pareto() {
  std::mt19937_64 rng(5);
  double gap = 0.0;
  bool all_pareto = true;
  int certified = 0;
  auto check = [&](const AgentSystem& s, const RandomVariable& x, bool brute) {
    auto r = lambda(s, x);
    if (!r.value.is_finite()) return;
    gap = std::max(gap, std::abs(sum_risks(s, r.allocation) - r.value.value()));
    if (s.lp_representable()) {
      auto b = pareto_from_payoff(s, x, r.payoff);
      gap = std::max(gap, std::abs(sum_risks(s, b) - r.value.value()));
    }
    if (brute) {
      auto v = verify_pareto(s, x, r.allocation, GridSpec::around(r.allocation.parts[0], 1.0, 0.05));
      all_pareto = all_pareto && v.pareto;
      ++certified;
    }
  };
  auto p = io::load_problem(kFixtures + "/two_desk.json");
  check(p.system(), *p.loss, true);
  for (int t = 0; t < 20; ++t) {
    rs_test::RandomPolyhedral cfg;
    cfg.scenarios = 3;
    auto s = rs_test::random_polyhedral(rng, cfg);
    check(s, rs_test::random_loss(rng, s.space(), -2, 2), true);
  }
  for (const char* f : {"entropic_pair.json", "avar_entropic.json"}) {
    auto q = io::load_problem(kFixtures + "/" + f);
    check(q.system(), *q.loss, false);
  }
  return {gap <= 1e-8 && all_pareto, "max |sum rho - Lambda| " + fmt("%.1e", gap) + ", " + std::to_string(certified) +
                                         " grid verdicts all Pareto: " + (all_pareto ? "yes" : "no")};
}

Outcome nsa() {
  auto p = io::load_problem(kFixtures + "/nsa_violation.json");
  auto full = nsa_check(p.system());
  AgentSystem two({p.regimes[0], p.regimes[1]});
  auto sub = nsa_check(two);
  const bool ok = !full.nsa && full.dim_v == 3 && full.lp_status == LpStatus::Unbounded && full.lp_agrees && sub.nsa &&
                  sub.dim_v < 2 && sub.lp_status == LpStatus::Optimal && sub.lp_agrees;
  return {ok, "three agents: dim V = " + std::to_string(full.dim_v) + " (" + to_string(full.lp_status) +
                  "), two agents: dim V = " + std::to_string(sub.dim_v) + " (" + to_string(sub.lp_status) + ")"};
}

Outcome equilibria() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  double budget = 0.0, gap = 0.0, price = 0.0;
  int built = 0, passed = 0, tries = 0;
  while (built < 50 && tries < 200) {
    ++tries;
    rs_test::RandomPolyhedral cfg;
    cfg.agents = 2 + tries % 2;
    cfg.scenarios = 3 + tries % 3;
    auto s = rs_test::random_polyhedral(rng, cfg);
    std::vector<RandomVariable> w;
    for (std::size_t i = 0; i < s.size(); ++i) {
      RandomVariable e(s.space());
      for (auto k : s.regime(i).support().indices()) e[k] = u(rng);
      w.push_back(e);
    }
    RandomVariable tot(s.space());
    for (const auto& e : w) tot += e;
    // interior: Lambda finite in a box around the aggregate
    bool interior = lambda(s, tot).value.is_finite();
    for (std::size_t k = 0; k < tot.size() && interior; ++k)
      for (double d : {-0.1, 0.1}) {
        auto y = tot;
        y[k] += d;
        interior = interior && lambda(s, y).value.is_finite();
      }
    if (!interior) continue;
    ++built;
    auto eq = build_equilibrium(s, w);
    auto rep = verify_equilibrium(s, w, eq);
    if (rep.ok()) ++passed;
    for (const auto& c : rep.checks) {
      if (c.name.ends_with(".budget")) budget = std::max(budget, std::abs(c.value));
      if (c.name.ends_with(".optimal")) gap = std::max(gap, std::abs(c.value));
      if (c.name == "price.consistent") price = std::max(price, std::abs(c.value));
    }
  }
  return {built == 50 && passed == built, std::to_string(passed) + "/" + std::to_string(built) +
                                              " verified; max budget gap " + fmt("%.1e", budget) + ", optimality gap " +
                                              fmt("%.1e", gap) + ", price mismatch " + fmt("%.1e", price)};
}

Outcome axioms() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  auto sp = ScenarioSpace::uniform(4);
  auto kern = rv(sp, {1, -1, 0, 0});
  std::vector<std::pair<std::string, Regime>> fam = {
      {"polyhedral", Regime(SupportMask::full(sp),
                            PolyhedralAcceptanceSet{{Functional::expectation(sp), Functional(sp, {4, 0, 0, 0}),
                                                     Functional(sp, {0, 2, 2, 0})},
                                                    {0.0, 1.0, 1.0}},
                            SecurityMarket{{RandomVariable::constant(sp, 1.0), kern}, {1.0, 0.0}})},
      {"entropic", rs_test::lawinv_cash(sp, BaseMeasure::entropic(1.3))},
      {"avar", rs_test::lawinv_cash(sp, BaseMeasure::avar(0.4))},
      {"expectation", rs_test::lawinv_cash(sp, BaseMeasure::expectation())}};
  double worst = 0.0;
  std::string where;
  auto note = [&](double v, const std::string& tag) {
    if (v > worst) {
      worst = v;
      where = tag;
    }
  };
  for (const auto& [name, r] : fam) {
    note(std::abs(rho(r, RandomVariable(sp)).value.value()), name + " normalisation");
    const auto& mk = r.market();
    for (int t = 0; t < 1000; ++t) {
      auto x = rs_test::random_loss(rng, sp), y = rs_test::random_loss(rng, sp);
      const double rx = rho(r, x).value.value(), ry = rho(r, y).value.value();
      RandomVariable z(sp);
      double pz = 0.0;
      for (std::size_t k = 0; k < mk.size(); ++k) {
        const double c = u(rng);
        z += c * mk.basis[k];
        pz += c * mk.prices[k];
      }
      note(std::abs(rho(r, x + z).value.value() - rx - pz), name + " additivity");
      auto up = x;
      up[t % 4] += std::abs(u(rng));
      note(rx - rho(r, up).value.value(), name + " monotonicity");
      note(rho(r, 0.5 * (x + y)).value.value() - 0.5 * (rx + ry), name + " convexity");
    }
  }
  return {worst <= 1e-8, "4 families x 1000 trials, worst violation " + fmt("%.1e", worst) +
                             (where.empty() ? "" : " (" + where + ")")};
}

Outcome conjugates() {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  int finite = 0;
  // subgradients at random losses are dual points with finite conjugate
  auto run = [&](const AgentSystem& s, double spread) {
    for (int t = 0; t < 20; ++t) {
      auto x = rs_test::random_loss(rng, s.space(), -spread, spread);
      auto r = lambda(s, x);
      if (!r.value.is_finite() || !r.subgradient) continue;
      const Functional& phi = *r.subgradient;
      const ExtReal lhs = s.lp_representable() ? lambda_conjugate_lp(s, phi)
                                                : ExtReal::finite(phi(x) - r.value.value());
      const ExtReal rhs = conjugate_sum(s, phi);
      if (!lhs.is_finite() || !rhs.is_finite()) {
        if (!(lhs.is_pos_inf() && rhs.is_pos_inf())) worst = kInf;
        continue;
      }
      ++finite;
      worst = std::max(worst, std::abs(lhs.value() - rhs.value()));
    }
  };
  for (const char* f : {"two_desk.json", "entropic_pair.json", "avar_entropic.json"})
    run(io::load_problem(kFixtures + "/" + f).system(), 3.0);
  for (auto& s : polyhedral_family(rng, 5, 4)) run(s, 2.0);
  return {worst <= 1e-6 && finite > 0,
          std::to_string(finite) + " finite dual points, max |Lambda* - sum rho*| " + fmt("%.1e", worst)};
}

Outcome splits() {
  auto p = io::load_problem(kFixtures + "/split_entropic.json");
  SplitProblem sp;
  sp.regime = SplitProblem::repeat(p.regimes);
  sp.cost = p.split->cost;
  sp.n_max = p.split->n_max;
  sp.phi0 = p.split->phi0;
  sp.conjugate_tail = p.split->conjugate_tail;
  auto out = split_optimize(sp, *p.loss);
  double best = kInf;
  std::size_t arg = 0;
  for (std::size_t n = 1; n <= sp.n_max; ++n) {
    const double v = xi(BaseMeasure::entropic(1.0 / static_cast<double>(n)), *p.loss) + sp.cost(n);
    if (v < best) {
      best = v;
      arg = n;
    }
  }
  // monotonicity along an uncut sweep
  sp.phi0.reset();
  auto full = split_optimize(sp, *p.loss);
  double mono = 0.0;
  for (std::size_t k = 1; k < full.trajectory.size(); ++k)
    mono = std::max(mono, full.trajectory[k].lambda.value() - full.trajectory[k - 1].lambda.value());
  return {out.n_star == arg && mono <= 1e-8 && full.n_star == arg,
          "n* = " + std::to_string(out.n_star) + " (sweep argmin " + std::to_string(arg) +
              "), worst increase of Lambda_n " + fmt("%.1e", mono)};
}

Outcome stability() {
  std::mt19937_64 rng(11);
  const int steps = 20;
  const double dt = 0.1 / steps;
  double worst_ratio = 0.0, lip = 0.0;
  int segments = 0;
  std::vector<AgentSystem> systems = polyhedral_family(rng, 10, 3);
  auto sp8 = ScenarioSpace::uniform(6);
  systems.push_back(AgentSystem({rs_test::lawinv_cash(sp8, BaseMeasure::entropic(0.8)),
                                 rs_test::lawinv_cash(sp8, BaseMeasure::entropic(2.0))}));
  systems.push_back(AgentSystem({rs_test::lawinv_cash(sp8, BaseMeasure::avar(0.5)),
                                 rs_test::lawinv_cash(sp8, BaseMeasure::entropic(1.0))}));
  for (std::size_t k = 0; segments < 20; ++k) {
    const AgentSystem& s = systems[k % systems.size()];
    auto x = rs_test::random_loss(rng, s.space(), -2, 2);
    auto d = rs_test::random_loss(rng, s.space(), -1, 1);
    const double nd = d.sup_norm();
    std::vector<SharingResult> path;
    bool inside = true;
    for (int i = 0; i <= steps && inside; ++i) {
      path.push_back(lambda(s, x + (i * dt) * d));
      inside = path.back().value.is_finite();
    }
    if (!inside) continue;
    ++segments;
    for (int i = 1; i <= steps; ++i) {
      lip = std::max(lip, std::abs(path[i].value.value() - path[i - 1].value.value()) / (nd * dt));
      double jump = 0.0;
      for (std::size_t a = 0; a < s.size(); ++a)
        jump = std::max(jump, (path[i].allocation.parts[a] - path[i - 1].allocation.parts[a]).sup_norm());
      worst_ratio = std::max(worst_ratio, jump / (nd * dt));
    }
  }
  return {std::isfinite(lip) && worst_ratio <= 10.0, "fitted Lipschitz constant " + fmt("%.2f", lip) +
                                                         ", worst allocation jump " + fmt("%.2f", worst_ratio) +
                                                         " x |D| dt"};
}

Outcome subgradients() {
  std::mt19937_64 rng(12);
  double rel = 0.0, viol = 0.0;
  auto sp = ScenarioSpace::uniform(5);
  AgentSystem ent({rs_test::lawinv_cash(sp, BaseMeasure::entropic(1.0)), rs_test::lawinv_cash(sp, BaseMeasure::entropic(2.5))});
  for (int t = 0; t < 5; ++t) {
    auto x = rs_test::random_loss(rng, sp, -2, 2);
    auto r = lambda(ent, x);
    auto c = fd_subgradient_check(ent, x, *r.subgradient, 100 + t);
    if (c.kink) return {false, "unexpected kink on an entropic system"};
    rel = std::max(rel, c.max_rel_error);
  }
  // two agents accepting {E_P <= 0, E_Q <= 0}: Lambda = max(E_P, E_Q), kinked where E_P X = E_Q X
  auto s3 = ScenarioSpace::uniform(3);
  auto max_agent = [&] {
    PolyhedralAcceptanceSet a{{Functional::expectation(s3), Functional(s3, {0.5, 1.0, 1.5})}, {0.0, 0.0}};
    return Regime(SupportMask::full(s3), a, SecurityMarket{{RandomVariable::constant(s3, 1.0)}, {1.0}});
  };
  AgentSystem max_pair({max_agent(), max_agent()});
  std::vector<std::pair<AgentSystem, RandomVariable>> kinks;
  for (int t = 0; t < 5; ++t) {
    auto x = rs_test::random_loss(rng, s3, -2, 2);
    x[2] = x[0];
    kinks.emplace_back(max_pair, x);
  }
  auto p = io::load_problem(kFixtures + "/two_desk.json");
  kinks.emplace_back(p.system(), *p.loss);
  int kinked = 0;
  for (auto& [s, x] : kinks) {
    auto r = lambda(s, x);
    if (!r.value.is_finite()) continue;
    auto c = fd_subgradient_check(s, x, *r.subgradient, 7, 1e-5, 100);
    if (c.kink) {
      ++kinked;
      viol = std::max(viol, c.worst_violation / (1.0 + std::abs(r.value.value())));
    } else {
      rel = std::max(rel, c.max_rel_error);
    }
  }
  return {rel <= 1e-4 && viol <= 1e-8 && kinked > 0, "smooth max rel error " + fmt("%.1e", rel) + ", " +
                                                        std::to_string(kinked) + " kinks, worst inequality violation " +
                                                        fmt("%.1e", viol)};
}

}  // namespace

int main() {
  criterion(1, "two-desk closed form", 5, two_desk_closed_form);
  criterion(2, "entropic convolution identity", 30, entropic_convolution);
  criterion(3, "two entropic agents, kernel trade", 0, entropic_pair);
  criterion(4, "AVaR and entropic agents", 0, avar_entropic);
  criterion(5, "Pareto certification", 0, pareto);
  criterion(6, "NSA dichotomy", 0, nsa);
  criterion(7, "equilibria", 0, equilibria);
  criterion(8, "risk measure axioms", 0, axioms);
  criterion(9, "conjugate of the sharing value", 0, conjugates);
  criterion(10, "optimal splits", 10, splits);
  criterion(11, "selection stability", 0, stability);
  criterion(12, "subgradients vs finite differences", 0, subgradients);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
