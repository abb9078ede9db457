#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace riskshare;
using rs_test::rv;

namespace {

Regime mean_agent(const SpacePtr& sp, std::vector<RandomVariable> basis, std::vector<double> prices) {
  PolyhedralAcceptanceSet a{{Functional::expectation(sp)}, {0.0}};
  return Regime(SupportMask::full(sp), a, SecurityMarket{std::move(basis), std::move(prices)});
}

// three agents sharing cash; the third misprices a combination of the other two
AgentSystem nsa_violation(bool with_third = true) {
  auto sp = ScenarioSpace::uniform(3);
  auto one = RandomVariable::constant(sp, 1.0);
  std::vector<Regime> rs = {mean_agent(sp, {one, rv(sp, {1, -1, 0})}, {1.0, 0.0}),
                            mean_agent(sp, {one, rv(sp, {0, 1, -1})}, {1.0, 0.0})};
  if (with_third) rs.push_back(mean_agent(sp, {one, rv(sp, {1, 0, -1})}, {1.0, 0.5}));
  return AgentSystem(rs);
}

}  // namespace

TEST(Market, TwoDeskValidates) {
  auto s = rs_test::two_desk(1, 2, 1, 3);
  auto rep = validate_system(s);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name;
  auto star = validate_star(s);
  EXPECT_TRUE(star.connected);
  EXPECT_TRUE(star.adjacency[0][1]);
}

TEST(Market, StarDetectsPriceConflict) {
  auto sp = ScenarioSpace::uniform(2);
  auto one = RandomVariable::constant(sp, 1.0);
  AgentSystem s({mean_agent(sp, {one}, {1.0}), mean_agent(sp, {one}, {1.1})});
  auto star = validate_star(s);
  EXPECT_FALSE(star.report.find("star.prices_agree")->pass);
  // residual is measured on a unit-norm kernel vector (1, -1) / sqrt 2
  EXPECT_NEAR(star.max_price_residual, 0.1 / std::sqrt(2.0), 1e-12);
}

TEST(Market, StarDetectsDisconnectedAgents) {
  auto sp = ScenarioSpace::uniform(2);
  AgentSystem s({rs_test::box_regime(sp, {0}, {0}), rs_test::box_regime(sp, {1}, {0})});
  EXPECT_FALSE(validate_star(s).connected);
}

TEST(Market, NsaDichotomy) {
  auto bad = nsa_check(nsa_violation());
  EXPECT_FALSE(bad.nsa);
  EXPECT_EQ(bad.dim_v, 3u);
  EXPECT_EQ(bad.lp_status, LpStatus::Unbounded);
  EXPECT_TRUE(bad.lp_agrees);

  auto good = nsa_check(nsa_violation(false));
  EXPECT_TRUE(good.nsa);
  EXPECT_LT(good.dim_v, 2u);
  EXPECT_EQ(good.lp_status, LpStatus::Optimal);
  EXPECT_TRUE(good.lp_agrees);

  try {
    lambda(nsa_violation(), RandomVariable(nsa_violation().space()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Contract);
  }
}

TEST(Market, GlobalPriceMatchesAgents) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 20; ++t) {
    auto s = rs_test::random_polyhedral(rng, {3, 5, 2, 1, false});
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t k = 0; k < s.regime(i).market().size(); ++k)
        EXPECT_NEAR(s.pi(s.regime(i).market().basis[k]), s.regime(i).market().prices[k], 1e-10);
    // positivity on sampled non-negative securities: U >= 0 built from agent units
    auto u = global_unit(s);
    for (std::size_t w = 0; w < u.size(); ++w) EXPECT_GE(u[w], -1e-12);
    EXPECT_NEAR(s.pi(u), 1.0, 1e-10);
  }
}

TEST(Market, SecuritySelectionExamples) {
  auto sp = ScenarioSpace::uniform(2);
  auto one = RandomVariable::constant(sp, 1.0);
  auto e1 = rv(sp, {1, 0});
  {
    AgentSystem s({mean_agent(sp, {one}, {1.0}), mean_agent(sp, {one, rv(sp, {1, -1})}, {1.0, 0.0})});
    auto psi = security_selection(s, rv(sp, {2, 0}));
    EXPECT_NEAR(psi[0][0], 1.0, 1e-12);
    EXPECT_NEAR(psi[0][1], 1.0, 1e-12);
    EXPECT_NEAR(psi[1][0], 1.0, 1e-12);
    EXPECT_NEAR(psi[1][1], -1.0, 1e-12);
    auto zero = security_selection(s, RandomVariable(sp));
    for (const auto& z : zero) EXPECT_EQ(z.sup_norm(), 0.0);
  }
  {
    AgentSystem s({rs_test::box_regime(sp, {0}, {0}), rs_test::box_regime(sp, {1}, {0})});
    auto psi = security_selection(s, 3.0 * e1);
    EXPECT_NEAR(psi[0][0], 3.0, 1e-12);
    EXPECT_EQ(psi[1].sup_norm(), 0.0);
  }
}

TEST(Market, SecuritySelectionIsLinearAndExact) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 20; ++t) {
    auto s = rs_test::random_polyhedral(rng, {3, 5, 1, 1, false});
    const auto& gb = s.global_basis();
    RandomVariable z1(s.space()), z2(s.space());
    for (const auto& b : gb) {
      z1 += u(rng) * b;
      z2 += u(rng) * b;
    }
    auto p1 = security_selection(s, z1), p2 = security_selection(s, z2), p12 = security_selection(s, z1 + 2.0 * z2);
    RandomVariable sum(s.space());
    for (std::size_t i = 0; i < s.size(); ++i) {
      sum += p1[i];
      EXPECT_LE((p12[i] - p1[i] - 2.0 * p2[i]).sup_norm(), 1e-9);
      // each piece lies in the agent's security space
      std::vector<Vec> cols;
      for (const auto& b : s.regime(i).market().basis) cols.push_back(b.values());
      Vec c = least_squares(cols, p1[i].values());
      RandomVariable fit(s.space());
      for (std::size_t k = 0; k < c.size(); ++k) fit += c[k] * s.regime(i).market().basis[k];
      EXPECT_LE((fit - p1[i]).sup_norm(), 1e-9);
    }
    EXPECT_LE((sum - z1).sup_norm(), 1e-12);
  }
  try {
    // cash only: a point mass is not a global security
    auto sp = ScenarioSpace::uniform(2);
    AgentSystem t({mean_agent(sp, {RandomVariable::constant(sp, 1.0)}, {1.0}),
                   mean_agent(sp, {RandomVariable::constant(sp, 1.0)}, {1.0})});
    security_selection(t, rv(sp, {1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Domain);
  }
}

TEST(Market, TwoDeskLambda) {
  auto s = rs_test::two_desk(1, 2, 1, 3);
  auto x = rv(s.space(), {4, 5, 6});
  auto r = lambda_lp(s, x);
  EXPECT_NEAR(r.value.value(), 8.0, 1e-10);
  EXPECT_NEAR(r.payoff[0], 3.0, 1e-10);
  EXPECT_NEAR(r.payoff[1], 2.0, 1e-10);
  EXPECT_NEAR(r.payoff[2], 3.0, 1e-10);
  EXPECT_EQ((r.allocation.total() - x).sup_norm(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i) sum += rho(s.regime(i), r.allocation.parts[i]).value.value();
  EXPECT_NEAR(sum, 8.0, 1e-8);
}

TEST(Market, RepresentativeAgentConsistency) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 30; ++t) {
    auto s = rs_test::random_polyhedral(rng, {2 + static_cast<std::size_t>(t % 3), 4, 2, 1, false});
    auto x = rs_test::random_loss(rng, s.space());
    auto a = lambda_lp(s, x);
    auto b = payoff_form_lp(s, x);
    ASSERT_EQ(a.value.kind(), b.first.kind());
    if (!a.value.is_finite()) continue;
    EXPECT_NEAR(a.value.value(), b.first.value(), 1e-8);
    EXPECT_NEAR(s.pi(a.payoff), a.value.value(), 1e-8);
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) sum += rho(s.regime(i), a.allocation.parts[i]).value.value();
    EXPECT_NEAR(sum, a.value.value(), 1e-8);
  }
}

TEST(Market, LevelSetIdentity) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    auto s = rs_test::random_polyhedral(rng, {2, 4, 2, 1, false});
    auto x = rs_test::random_loss(rng, s.space());
    auto r = lambda_lp(s, x);
    if (!r.value.is_finite()) continue;
    auto u = global_unit(s);
    EXPECT_TRUE(in_acceptable_plus_kernel(s, x - r.value.value() * u));
    EXPECT_FALSE(in_acceptable_plus_kernel(s, x - (r.value.value() - 1e-3) * u, 0.0));
  }
}

TEST(Market, ParetoFromPayoff) {
  auto s = rs_test::two_desk(1, 2, 1, 3);
  auto x = rv(s.space(), {4, 5, 6});
  auto a = pareto_from_payoff(s, x, rv(s.space(), {3, 2, 3}), 8.0);
  EXPECT_LE((a.total() - x).sup_norm(), 1e-12);
  double sum = 0.0;
  for (std::size_t i = 0; i < 2; ++i) sum += rho(s.regime(i), a.parts[i]).value.value();
  EXPECT_NEAR(sum, 8.0, 1e-8);
  // a payoff priced below Lambda cannot be split
  EXPECT_THROW(pareto_from_payoff(s, x, rv(s.space(), {3, 2, 2})), Error);
  EXPECT_THROW(pareto_from_payoff(s, x, rv(s.space(), {3, 2, 3}), 7.0), Error);

  // Z = Lambda U with X - Z acceptable for one agent
  auto sp = ScenarioSpace::uniform(2);
  AgentSystem t({mean_agent(sp, {RandomVariable::constant(sp, 1.0)}, {1.0}),
                 mean_agent(sp, {RandomVariable::constant(sp, 1.0)}, {1.0})});
  auto y = rv(sp, {3, 1});
  auto b = pareto_from_payoff(t, y, RandomVariable::constant(sp, 2.0), 2.0);
  EXPECT_NEAR(rho(t.regime(0), b.parts[0]).value.value() + rho(t.regime(1), b.parts[1]).value.value(), 2.0, 1e-8);
}

TEST(Market, ZetaFamilyStaysPareto) {
  auto s = rs_test::two_desk(1, 2, 1, 3);
  auto x = rv(s.space(), {4, 5, 6});
  auto a = lambda_lp(s, x).allocation;
  for (double z : {-3.0, -0.5, 0.0, 1.25, 10.0}) {
    auto b = shift_pareto(s, a, 0, 1, z);
    double sum = 0.0;
    for (std::size_t i = 0; i < 2; ++i) sum += rho(s.regime(i), b.parts[i]).value.value();
    EXPECT_NEAR(sum, 8.0, 1e-8);
    EXPECT_NEAR(b.parts[0][1] - a.parts[0][1], z, 1e-12);
  }
}

TEST(Market, RecessionData) {
  auto sp = ScenarioSpace::uniform(3);
  auto box = rs_test::box_regime(sp, {0, 1, 2}, {1, 1, 1});
  auto rd = recession_data(box);
  EXPECT_TRUE(rd.lineality.empty());
  EXPECT_EQ(rd.cone.size(), 3u);

  auto half = mean_agent(sp, {RandomVariable::constant(sp, 1.0)}, {1.0});
  auto hd = recession_data(half);
  ASSERT_EQ(hd.lineality.size(), 2u);
  for (const auto& l : hd.lineality) EXPECT_NEAR(expectation(l), 0.0, 1e-12);

  auto s = rs_test::two_desk(1, 2, 1, 3);
  EXPECT_TRUE(recession_data(s.regime(0)).lineality.empty());
  EXPECT_THROW(recession_data(rs_test::lawinv_cash(sp, BaseMeasure::entropic(1.0))), Error);
}

TEST(Market, AvarAgentsUseTheLp) {
  auto sp = ScenarioSpace::uniform(4);
  AgentSystem s({rs_test::lawinv_cash(sp, BaseMeasure::avar(0.5)), rs_test::lawinv_cash(sp, BaseMeasure::avar(0.25))});
  auto x = rv(sp, {1, 2, 3, 4});
  auto r = lambda(s, x);
  EXPECT_EQ(r.route, "lp");
  // the convolution is AVaR at the smaller level
  EXPECT_NEAR(r.value.value(), xi(BaseMeasure::avar(0.25), x), 1e-9);
}

TEST(Market, SelectionIsDeterministic) {
  std::mt19937_64 rng(77);
  auto s = rs_test::random_polyhedral(rng, {3, 5, 2, 1, false});
  auto x = rs_test::random_loss(rng, s.space());
  auto a = lambda_lp(s, x), b = lambda_lp(s, x);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(a.allocation.parts[i].values(), b.allocation.parts[i].values());
}
