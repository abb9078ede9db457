#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace riskshare;
using rs_test::rv;

namespace {

// desks with bounds (1,2) on A,B and (1,3) on B,C
AgentSystem two_desk_system() {
  auto sp = ScenarioSpace::make({"A", "B", "C"}, {1.0 / 3, 1.0 / 3, 1.0 - 2.0 / 3});
  auto r1 = rs_test::box_regime(sp, {0, 1}, {1, 2}, "desk1");
  auto r2 = rs_test::box_regime(sp, {1, 2}, {1, 3}, "desk2");
  return AgentSystem({r1, r2});
}

std::vector<RandomVariable> endowments(const SpacePtr& sp) { return {rv(sp, {2, 3, 0}), rv(sp, {0, 2, 6})}; }

}  // namespace

TEST(Equilibrium, TwoDeskBuildsAndVerifies) {
  auto s = two_desk_system();
  auto w = endowments(s.space());
  auto eq = build_equilibrium(s, w);
  auto rep = verify_equilibrium(s, w, eq);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
  double t = 0.0;
  for (double v : eq.transfers) t += v;
  EXPECT_NEAR(t, 0.0, 1e-10);
  // B is the only scenario both desks price; its price is 1
  EXPECT_NEAR(eq.price.weight(1), 1.0, 1e-10);
  EXPECT_NEAR(eq.transfer_security[1], 1.0, 1e-12);
}

TEST(Equilibrium, RandomPolyhedralInstances) {
  std::mt19937_64 rng(2024);
  int built = 0;
  for (int t = 0; t < 25; ++t) {
    rs_test::RandomPolyhedral cfg;
    cfg.agents = 2 + t % 2;
    cfg.scenarios = 3 + t % 3;
    auto s = rs_test::random_polyhedral(rng, cfg);
    std::vector<RandomVariable> w;
    for (std::size_t i = 0; i < s.size(); ++i) {
      RandomVariable e(s.space());
      for (auto k : s.regime(i).support().indices()) e[k] = std::uniform_real_distribution<double>(-2, 4)(rng);
      w.push_back(e);
    }
    Equilibrium eq;
    try {
      eq = build_equilibrium(s, w);
    } catch (const Error& e) {
      // aggregate outside the domain is allowed for random data, nothing else
      ASSERT_EQ(e.kind(), ErrorKind::Domain) << e.what();
      continue;
    }
    ++built;
    auto rep = verify_equilibrium(s, w, eq);
    for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << "instance " << t << ": " << c.name << " " << c.value;
    double sum = 0.0;
    for (double v : eq.transfers) sum += v;
    EXPECT_NEAR(sum, 0.0, 1e-8);
  }
  EXPECT_GT(built, 10);
}

TEST(Equilibrium, PerturbedPriceIsInconsistent) {
  auto s = two_desk_system();
  auto w = endowments(s.space());
  auto eq = build_equilibrium(s, w);
  auto bad = eq;
  std::vector<double> d = bad.price.density();
  d[0] *= 1.1;
  bad.price = Functional(s.space(), d);
  auto rep = verify_equilibrium(s, w, bad);
  EXPECT_FALSE(rep.find("price.consistent")->pass);
  EXPECT_FALSE(rep.ok());
}

TEST(Equilibrium, DegradedAllocationIsNotOptimal) {
  auto sp = ScenarioSpace::uniform(4);
  AgentSystem s({rs_test::lawinv_cash(sp, BaseMeasure::entropic(1.0)), rs_test::lawinv_cash(sp, BaseMeasure::entropic(2.0))});
  std::vector<RandomVariable> w = {rv(sp, {1, 0, 2, -1}), rv(sp, {0, 3, -1, 1})};
  auto eq = build_equilibrium(s, w);
  // a zero-cost trade between the agents: budgets hold, agent 1 is worse off
  std::vector<double> d = {1.0, -1.0, 0.5, 0.0};
  RandomVariable dv(sp, d);
  dv = dv - eq.price(dv);
  auto bad = eq;
  bad.allocation.parts[0] += dv;
  bad.allocation.parts[1] -= dv;
  auto rep = verify_equilibrium(s, w, bad);
  EXPECT_TRUE(rep.find("agent1.budget")->pass);
  EXPECT_FALSE(rep.find("agent1.optimal")->pass);
  EXPECT_FALSE(rep.find("pareto")->pass);
}

TEST(Equilibrium, LawInvariantCashAgents) {
  auto sp = ScenarioSpace::uniform(4);
  AgentSystem s({rs_test::lawinv_cash(sp, BaseMeasure::entropic(1.0)), rs_test::lawinv_cash(sp, BaseMeasure::entropic(2.0))});
  std::vector<RandomVariable> w = {rv(sp, {1, 0, 2, -1}), rv(sp, {0, 3, -1, 1})};
  auto eq = build_equilibrium(s, w);
  auto rep = verify_equilibrium(s, w, eq);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value;
  // the price is the Esscher density of the aggregate
  const auto q = optimal_density(convolve(std::vector<BaseMeasure>{BaseMeasure::entropic(1.0), BaseMeasure::entropic(2.0)}),
                                 w[0] + w[1]);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(eq.price.density(k), q[k], 1e-8);
}

TEST(Equilibrium, NoCommonPricedSecurityIsReported) {
  // disjoint supports, nothing held in common
  auto sp = ScenarioSpace::uniform(2);
  AgentSystem s({rs_test::box_regime(sp, {0}, {0}), rs_test::box_regime(sp, {1}, {0})});
  try {
    build_equilibrium(s, {rv(sp, {1, 0}), rv(sp, {0, 1})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NRViolation);
  }
}

TEST(Equilibrium, EndowmentOutsideIdeal) {
  auto s = two_desk_system();
  auto sp = s.space();
  EXPECT_THROW(build_equilibrium(s, {rv(sp, {1, 1, 1}), rv(sp, {0, 1, 1})}), Error);
  EXPECT_THROW(build_equilibrium(s, {rv(sp, {1, 1, 0})}), Error);
}
