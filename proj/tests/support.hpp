#pragma once

// Shared builders for the test suites.

#include <random>
#include <vector>

#include "riskshare/riskshare.hpp"

namespace rs_test {

using namespace riskshare;

inline RandomVariable rv(const SpacePtr& sp, std::vector<double> v) { return RandomVariable(sp, std::move(v)); }

inline RandomVariable indicator(const SpacePtr& sp, std::initializer_list<std::size_t> idx) {
  RandomVariable r(sp);
  for (auto i : idx) r[i] = 1.0;
  return r;
}

/// X <= K on the scenarios in idx, Arrow-Debreu securities on each of them.
inline Regime box_regime(const SpacePtr& sp, const std::vector<std::size_t>& idx, const std::vector<double>& k,
                         std::string name = {}) {
  PolyhedralAcceptanceSet a;
  SecurityMarket m;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    a.functionals.push_back(Functional::point(sp, idx[j]));
    a.bounds.push_back(k[j]);
    RandomVariable b(sp);
    b[idx[j]] = 1.0;
    m.basis.push_back(b);
    m.prices.push_back(1.0);
  }
  return Regime(SupportMask::of(sp, idx), a, m, std::move(name));
}

/// The two-desk example on singletons A, B, C (uniform weights).
inline AgentSystem two_desk(double k1a, double k1b, double k2b, double k2c) {
  auto sp = ScenarioSpace::make({"A", "B", "C"}, {1.0 / 3, 1.0 / 3, 1.0 - 2.0 / 3});
  return AgentSystem({box_regime(sp, {0, 1}, {k1a, k1b}, "desk1"), box_regime(sp, {1, 2}, {k2b, k2c}, "desk2")});
}

/// Closed-form sharing value of the two-desk example.
inline double two_desk_lambda(double k1a, double k1b, double k2b, double k2c, const RandomVariable& x) {
  return (x[0] - k1a) + (x[1] - k1b - k2b) + (x[2] - k2c);
}

inline Regime lawinv_cash(const SpacePtr& sp, BaseMeasure b, double price = 1.0) {
  SecurityMarket m;
  m.basis.push_back(RandomVariable::constant(sp, 1.0));
  m.prices.push_back(price);
  return Regime(SupportMask::full(sp), LawInvariantAcceptanceSet{b}, m);
}

/// Random polyhedral agent system. All prices come from one positive
/// measure mu, which is also one of each agent's acceptance functionals, so
/// no-arbitrage and NSA hold by construction. Each agent holds the indicator
/// of its support and the indicator of a common core scenario set.
struct RandomPolyhedral {
  std::size_t agents = 2;
  std::size_t scenarios = 3;
  std::size_t extra_rows = 2;
  std::size_t extra_securities = 1;
  bool full_support = false;
};

inline AgentSystem random_polyhedral(std::mt19937_64& rng, const RandomPolyhedral& cfg) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = cfg.scenarios;
  std::vector<std::string> labels;
  std::vector<double> probs(n);
  double tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    labels.push_back("s" + std::to_string(i));
    probs[i] = 0.5 + u(rng);
    tot += probs[i];
  }
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    probs[i] /= tot;
    acc += probs[i];
  }
  probs[n - 1] = 1.0 - acc;
  auto sp = ScenarioSpace::make(labels, probs);
  std::vector<double> mu(n);
  for (auto& m : mu) m = 0.5 + u(rng);

  // supports: core scenario 0 shared by all, others spread round-robin
  std::vector<std::vector<std::size_t>> supp(cfg.agents);
  for (std::size_t a = 0; a < cfg.agents; ++a) {
    supp[a].push_back(0);
    for (std::size_t w = 1; w < n; ++w)
      if (cfg.full_support || w % cfg.agents == a % cfg.agents || u(rng) < 0.3) supp[a].push_back(w);
  }
  // every scenario covered
  for (std::size_t w = 1; w < n; ++w) {
    bool covered = false;
    for (const auto& s : supp)
      for (auto x : s) covered = covered || x == w;
    if (!covered) supp[w % cfg.agents].push_back(w);
  }
  std::vector<Regime> regimes;
  for (std::size_t a = 0; a < cfg.agents; ++a) {
    std::sort(supp[a].begin(), supp[a].end());
    PolyhedralAcceptanceSet acc;
    std::vector<double> d(n, 0.0);
    for (auto w : supp[a]) d[w] = mu[w] / sp->prob(w);
    acc.functionals.push_back(Functional(sp, d));
    acc.bounds.push_back(2.0 * u(rng) - 0.5);
    for (std::size_t j = 0; j < cfg.extra_rows; ++j) {
      std::vector<double> dd(n, 0.0);
      for (auto w : supp[a]) dd[w] = (u(rng) < 0.7 ? u(rng) : 0.0) / sp->prob(w);
      acc.functionals.push_back(Functional(sp, dd));
      acc.bounds.push_back(2.0 * u(rng) - 0.5);
    }
    SecurityMarket m;
    auto price_of = [&](const RandomVariable& z) {
      double p = 0.0;
      for (std::size_t w = 0; w < n; ++w) p += mu[w] * z[w];
      return p;
    };
    RandomVariable core(sp);
    core[0] = 1.0;
    m.basis.push_back(core);
    RandomVariable own(sp);
    for (auto w : supp[a]) own[w] = 1.0;
    if (supp[a].size() > 1) m.basis.push_back(own);
    for (std::size_t e = 0; e < cfg.extra_securities && m.basis.size() < supp[a].size(); ++e) {
      RandomVariable z(sp);
      for (auto w : supp[a]) z[w] = 2.0 * u(rng) - 1.0;
      m.basis.push_back(z);
    }
    for (const auto& b : m.basis) m.prices.push_back(price_of(b));
    regimes.emplace_back(SupportMask::of(sp, supp[a]), acc, m, "agent" + std::to_string(a + 1));
  }
  return AgentSystem(std::move(regimes));
}

inline RandomVariable random_loss(std::mt19937_64& rng, const SpacePtr& sp, double lo = -5.0, double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RandomVariable x(sp);
  for (std::size_t w = 0; w < sp->size(); ++w) x[w] = u(rng);
  return x;
}

}  // namespace rs_test
