#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riskshare/error.hpp"

namespace riskshare {

/// Finite state space with strictly positive probability weights.
class ScenarioSpace {
 public:
  ScenarioSpace(std::vector<std::string> labels, std::vector<double> probs)
      : labels_(std::move(labels)), probs_(std::move(probs)) {
    if (labels_.empty()) fail(ErrorKind::Structural, "scenario space needs at least one scenario");
    if (labels_.size() != probs_.size())
      fail(ErrorKind::Structural, "labels and probabilities differ in length");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size()) fail(ErrorKind::Structural, "scenario labels must be unique");
    double total = 0.0;
    for (double p : probs_) {
      if (!(p > 0.0) || !std::isfinite(p))
        fail(ErrorKind::Structural, "scenario probabilities must be strictly positive");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::Structural, "scenario probabilities must sum to 1");
  }

  static std::shared_ptr<const ScenarioSpace> make(std::vector<std::string> labels,
                                                   std::vector<double> probs) {
    return std::make_shared<const ScenarioSpace>(std::move(labels), std::move(probs));
  }

  /// Uniform space with labels w0, w1, ...
  static std::shared_ptr<const ScenarioSpace> uniform(std::size_t n) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("w" + std::to_string(i));
    // identical weights; the sum test tolerates the rounding
    std::vector<double> probs(n, 1.0 / static_cast<double>(n));
    return make(std::move(labels), std::move(probs));
  }

  std::size_t size() const { return probs_.size(); }
  double prob(std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }

  std::size_t index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) fail(ErrorKind::Structural, "unknown scenario label '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  bool is_uniform() const {
    return std::all_of(probs_.begin(), probs_.end(),
                       [&](double p) { return std::abs(p - probs_[0]) <= 1e-15; });
  }

  friend bool operator==(const ScenarioSpace& a, const ScenarioSpace& b) {
    return a.labels_ == b.labels_ && a.probs_ == b.probs_;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<double> probs_;
};

using SpacePtr = std::shared_ptr<const ScenarioSpace>;

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
  return a == b || (a && b && *a == *b);
}

inline void require_same_space(const SpacePtr& a, const SpacePtr& b, const char* where) {
  if (!same_space(a, b)) fail(ErrorKind::Structural, std::string(where) + ": mismatched scenario spaces");
}

/// Loss profile: one monetary value per scenario (losses net of gains).
class RandomVariable {
 public:
  RandomVariable() = default;
  explicit RandomVariable(SpacePtr space) : space_(std::move(space)), values_(space_->size(), 0.0) {}
  RandomVariable(SpacePtr space, std::vector<double> values)
      : space_(std::move(space)), values_(std::move(values)) {
    if (values_.size() != space_->size())
      fail(ErrorKind::Structural, "random variable length differs from scenario count");
  }

  static RandomVariable constant(SpacePtr space, double c) {
    return RandomVariable(space, std::vector<double>(space->size(), c));
  }
  static RandomVariable indicator(SpacePtr space, std::span<const std::size_t> idx) {
    RandomVariable r(std::move(space));
    for (auto i : idx) r.values_.at(i) = 1.0;
    return r;
  }

  const SpacePtr& space() const { return space_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  RandomVariable& operator+=(const RandomVariable& o) {
    require_same_space(space_, o.space_, "RandomVariable +=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  RandomVariable& operator-=(const RandomVariable& o) {
    require_same_space(space_, o.space_, "RandomVariable -=");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  RandomVariable& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  RandomVariable& operator+=(double c) {
    for (double& v : values_) v += c;
    return *this;
  }
  friend RandomVariable operator+(RandomVariable a, const RandomVariable& b) { return a += b; }
  friend RandomVariable operator-(RandomVariable a, const RandomVariable& b) { return a -= b; }
  friend RandomVariable operator*(double s, RandomVariable a) { return a *= s; }
  friend RandomVariable operator+(RandomVariable a, double c) { return a += c; }
  friend RandomVariable operator-(RandomVariable a, double c) { return a += -c; }
  friend RandomVariable operator-(RandomVariable a) { return a *= -1.0; }

 private:
  SpacePtr space_;
  std::vector<double> values_;
};

/// Linear functional represented by a density with respect to the scenario
/// probabilities: phi(X) = sum_w density(w) * P(w) * X(w).
class Functional {
 public:
  Functional() = default;
  Functional(SpacePtr space, std::vector<double> density) : space_(std::move(space)), density_(std::move(density)) {
    if (density_.size() != space_->size()) fail(ErrorKind::Structural, "density length differs from scenario count");
  }

  /// The expectation E[.] under the reference probabilities.
  static Functional expectation(SpacePtr space) {
    return Functional(space, std::vector<double>(space->size(), 1.0));
  }
  /// Point evaluation X -> X(w).
  static Functional point(SpacePtr space, std::size_t w) {
    std::vector<double> d(space->size(), 0.0);
    d.at(w) = 1.0 / space->prob(w);
    return Functional(std::move(space), std::move(d));
  }
  /// Functional from scenario-wise weights: X -> sum_w weight(w) X(w).
  static Functional from_weights(SpacePtr space, std::span<const double> weights) {
    std::vector<double> d(weights.begin(), weights.end());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] /= space->prob(i);
    return Functional(std::move(space), std::move(d));
  }

  const SpacePtr& space() const { return space_; }
  const std::vector<double>& density() const { return density_; }
  double density(std::size_t i) const { return density_[i]; }
  /// Scenario weight density(w) * P(w).
  double weight(std::size_t i) const { return density_[i] * space_->prob(i); }
  std::vector<double> weights() const {
    std::vector<double> w(density_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight(i);
    return w;
  }

  double operator()(const RandomVariable& x) const {
    require_same_space(space_, x.space(), "Functional application");
    double s = 0.0;
    for (std::size_t i = 0; i < density_.size(); ++i) s += density_[i] * space_->prob(i) * x[i];
    return s;
  }

  /// Total mass phi(1).
  double mass() const { return (*this)(RandomVariable::constant(space_, 1.0)); }
  bool is_nonnegative(double tol = 0.0) const {
    return std::all_of(density_.begin(), density_.end(), [&](double d) { return d >= -tol; });
  }

  Functional& operator*=(double s) {
    for (double& d : density_) d *= s;
    return *this;
  }
  friend Functional operator*(double s, Functional f) { return f *= s; }
  friend Functional operator+(Functional a, const Functional& b) {
    require_same_space(a.space_, b.space_, "Functional +");
    for (std::size_t i = 0; i < a.density_.size(); ++i) a.density_[i] += b.density_[i];
    return a;
  }

 private:
  SpacePtr space_;
  std::vector<double> density_;
};

/// Coordinate ideal of R^Omega: profiles vanishing off the included scenarios.
class SupportMask {
 public:
  SupportMask() = default;
  SupportMask(SpacePtr space, std::vector<bool> included) : space_(std::move(space)), included_(std::move(included)) {
    if (included_.size() != space_->size()) fail(ErrorKind::Structural, "support mask length differs from scenario count");
  }
  static SupportMask full(SpacePtr space) {
    auto n = space->size();
    return SupportMask(std::move(space), std::vector<bool>(n, true));
  }
  static SupportMask of(SpacePtr space, std::span<const std::size_t> idx) {
    std::vector<bool> inc(space->size(), false);
    for (auto i : idx) inc.at(i) = true;
    return SupportMask(std::move(space), std::move(inc));
  }

  const SpacePtr& space() const { return space_; }
  bool includes(std::size_t w) const { return included_[w]; }
  bool is_full() const { return std::all_of(included_.begin(), included_.end(), [](bool b) { return b; }); }
  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < included_.size(); ++i)
      if (included_[i]) out.push_back(i);
    return out;
  }
  std::size_t count() const { return static_cast<std::size_t>(std::count(included_.begin(), included_.end(), true)); }

  /// X lies in the ideal iff it vanishes on every excluded scenario.
  bool contains(const RandomVariable& x, double tol = 0.0) const {
    require_same_space(space_, x.space(), "SupportMask::contains");
    for (std::size_t i = 0; i < included_.size(); ++i)
      if (!included_[i] && std::abs(x[i]) > tol) return false;
    return true;
  }

 private:
  SpacePtr space_;
  std::vector<bool> included_;
};

inline double expectation(const Functional& q, const RandomVariable& x) {
  require_same_space(q.space(), x.space(), "expectation");
  return q(x);
}

inline double expectation(const RandomVariable& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x.space()->prob(i) * x[i];
  return s;
}

struct SortedProfile {
  std::vector<std::size_t> permutation;  // permutation[k] = scenario at rank k
  std::vector<double> values;            // descending
};

/// Stable descending sort; ties keep scenario order.
inline SortedProfile sort_descending(const RandomVariable& x) {
  SortedProfile out;
  out.permutation.resize(x.size());
  std::iota(out.permutation.begin(), out.permutation.end(), std::size_t{0});
  std::stable_sort(out.permutation.begin(), out.permutation.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  out.values.reserve(x.size());
  for (auto i : out.permutation) out.values.push_back(x[i]);
  return out;
}

/// Inverse of sort_descending: scatters sorted values back to scenario order.
inline RandomVariable unsort(const SpacePtr& space, const SortedProfile& s) {
  RandomVariable r(space);
  for (std::size_t k = 0; k < s.permutation.size(); ++k) r[s.permutation[k]] = s.values[k];
  return r;
}

inline bool is_comonotone(const RandomVariable& x, const RandomVariable& y, double tol = 0.0) {
  require_same_space(x.space(), y.space(), "is_comonotone");
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j)
      if ((x[i] - x[j]) * (y[i] - y[j]) < -tol) return false;
  return true;
}

}  // namespace riskshare
