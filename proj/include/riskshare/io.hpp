#pragma once

// Problem and result documents (JSON). Vectors are keyed by scenario label.
// Needs nlohmann/json for the document model and RapidJSON for schema
// validation; not part of the umbrella header.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <rapidjson/document.h>
#include <rapidjson/error/en.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

#include "riskshare/riskshare.hpp"

namespace riskshare::io {

using nlohmann::json;

struct SplitConfig {
  CostFunction cost;
  std::size_t n_max = 50;
  std::optional<Functional> phi0;
  std::optional<double> conjugate_tail;
};

struct Problem {
  SpacePtr space;
  std::vector<Regime> regimes;
  std::optional<RandomVariable> loss;
  std::vector<RandomVariable> endowments;
  std::optional<SplitConfig> split;
  std::optional<std::vector<double>> pricing_density;
  double pricing_scale = 1.0;

  AgentSystem system() const { return AgentSystem(regimes); }
};

[[noreturn]] inline void schema_error(const std::string& where, const std::string& what) {
  fail(ErrorKind::Structural, where + ": " + what);
}

inline const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) schema_error(where, std::string("missing '") + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) schema_error(where, "expected a finite number");
  return v;
}

/// {label: value} with unlisted labels read as 0 (or rejected when dense).
inline std::vector<double> labelled(const SpacePtr& sp, const json& j, const std::string& where, bool dense = false) {
  if (!j.is_object()) schema_error(where, "expected an object keyed by scenario label");
  std::vector<double> v(sp->size(), 0.0);
  std::vector<bool> seen(sp->size(), false);
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::size_t w;
    try {
      w = sp->index_of(it.key());
    } catch (const Error&) {
      schema_error(where, "unknown scenario label '" + it.key() + "'");
    }
    v[w] = number(it.value(), where + "." + it.key());
    seen[w] = true;
  }
  if (dense)
    for (std::size_t w = 0; w < sp->size(); ++w)
      if (!seen[w]) schema_error(where, "missing scenario '" + sp->label(w) + "'");
  return v;
}

inline RandomVariable read_vector(const SpacePtr& sp, const json& j, const std::string& where) {
  return RandomVariable(sp, labelled(sp, j, where));
}

inline SpacePtr read_space(const json& j) {
  const json& s = need(j, "scenarios", "document");
  const json& labels = need(s, "labels", "scenarios");
  if (!labels.is_array() || labels.empty()) schema_error("scenarios.labels", "expected a non-empty array");
  std::vector<std::string> ls;
  for (const auto& l : labels) {
    if (!l.is_string()) schema_error("scenarios.labels", "labels must be strings");
    ls.push_back(l.get<std::string>());
  }
  const json& probs = need(s, "probs", "scenarios");
  if (probs.is_string()) {
    if (probs.get<std::string>() != "uniform") schema_error("scenarios.probs", "expected 'uniform' or an object");
    const std::size_t n = ls.size();
    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) acc += p[i];
    p[n - 1] = 1.0 - acc;
    return ScenarioSpace::make(ls, p);
  }
  if (!probs.is_object()) schema_error("scenarios.probs", "expected 'uniform' or an object");
  std::vector<double> p(ls.size(), 0.0);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    if (!probs.contains(ls[i])) schema_error("scenarios.probs", "missing scenario '" + ls[i] + "'");
    p[i] = number(probs.at(ls[i]), "scenarios.probs." + ls[i]);
  }
  if (probs.size() != ls.size()) schema_error("scenarios.probs", "unknown scenario label");
  return ScenarioSpace::make(ls, p);
}

inline Functional read_functional(const SpacePtr& sp, const json& j, const std::string& where) {
  const bool d = j.contains("density"), w = j.contains("weights");
  if (d == w) schema_error(where, "give exactly one of 'density' or 'weights'");
  if (d) return Functional(sp, labelled(sp, j.at("density"), where + ".density"));
  const auto wt = labelled(sp, j.at("weights"), where + ".weights");
  return Functional::from_weights(sp, wt);
}

inline Regime read_agent(const SpacePtr& sp, const json& a, std::size_t i, const Problem& prob) {
  const std::string where = "agents[" + std::to_string(i) + "]";
  if (!a.is_object()) schema_error(where, "expected an object");
  std::string name = a.contains("name") ? a.at("name").get<std::string>() : "agent" + std::to_string(i + 1);

  SupportMask supp = SupportMask::full(sp);
  if (a.contains("support")) {
    const json& s = a.at("support");
    if (!s.is_array()) schema_error(where + ".support", "expected an array of labels");
    std::vector<std::size_t> idx;
    for (const auto& l : s) {
      if (!l.is_string()) schema_error(where + ".support", "labels must be strings");
      try {
        idx.push_back(sp->index_of(l.get<std::string>()));
      } catch (const Error&) {
        schema_error(where + ".support", "unknown scenario label '" + l.get<std::string>() + "'");
      }
    }
    supp = SupportMask::of(sp, idx);
  }

  const json& acc = need(a, "acceptance", where);
  if (!acc.is_object() || acc.size() != 1) schema_error(where + ".acceptance", "expected exactly one acceptance kind");
  Acceptance acceptance;
  if (acc.contains("polyhedral")) {
    const json& rows = acc.at("polyhedral");
    if (!rows.is_array()) schema_error(where + ".acceptance.polyhedral", "expected an array");
    PolyhedralAcceptanceSet p;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::string rw = where + ".acceptance.polyhedral[" + std::to_string(k) + "]";
      p.functionals.push_back(read_functional(sp, rows[k], rw));
      p.bounds.push_back(number(need(rows[k], "bound", rw), rw + ".bound"));
    }
    acceptance = p;
  } else if (acc.contains("entropic")) {
    acceptance = LawInvariantAcceptanceSet{BaseMeasure::entropic(number(acc.at("entropic"), where + ".entropic"))};
  } else if (acc.contains("avar")) {
    acceptance = LawInvariantAcceptanceSet{BaseMeasure::avar(number(acc.at("avar"), where + ".avar"))};
  } else if (acc.contains("expectation")) {
    acceptance = LawInvariantAcceptanceSet{BaseMeasure::expectation()};
  } else {
    schema_error(where + ".acceptance", "unknown acceptance kind");
  }

  const json& secs = need(a, "securities", where);
  if (!secs.is_array() || secs.empty()) schema_error(where + ".securities", "expected a non-empty array");
  SecurityMarket m;
  for (std::size_t k = 0; k < secs.size(); ++k) {
    const std::string sw = where + ".securities[" + std::to_string(k) + "]";
    RandomVariable z = read_vector(sp, need(secs[k], "payoff", sw), sw + ".payoff");
    double price;
    if (secs[k].contains("price")) {
      price = number(secs[k].at("price"), sw + ".price");
    } else if (prob.pricing_density) {
      price = 0.0;
      for (std::size_t w = 0; w < sp->size(); ++w) price += sp->prob(w) * (*prob.pricing_density)[w] * z[w];
      price *= prob.pricing_scale;
    } else {
      schema_error(sw, "missing 'price' and no pricing density given");
    }
    m.basis.push_back(std::move(z));
    m.prices.push_back(price);
  }
  return Regime(supp, acceptance, m, name);
}

inline CostFunction read_cost(const json& c) {
  if (!c.is_object() || c.size() != 1) schema_error("split.cost", "expected exactly one cost kind");
  if (c.contains("linear")) return CostFunction::linear(number(c.at("linear"), "split.cost.linear"));
  if (c.contains("step")) {
    const json& s = c.at("step");
    return CostFunction::step(number(need(s, "height", "split.cost.step"), "split.cost.step.height"),
                              need(s, "width", "split.cost.step").get<std::size_t>());
  }
  if (c.contains("table")) {
    std::vector<double> v;
    for (const auto& x : c.at("table")) v.push_back(number(x, "split.cost.table"));
    return CostFunction::tabulated(v);
  }
  schema_error("split.cost", "unknown cost kind");
}

inline Problem read_problem(const json& j) {
  if (!j.is_object()) schema_error("document", "expected an object");
  Problem p;
  p.space = read_space(j);
  if (j.contains("pricing")) {
    const json& pr = j.at("pricing");
    p.pricing_density = labelled(p.space, need(pr, "density", "pricing"), "pricing.density", true);
    if (pr.contains("scale")) p.pricing_scale = number(pr.at("scale"), "pricing.scale");
  }
  const json& agents = need(j, "agents", "document");
  if (!agents.is_array() || agents.empty()) schema_error("agents", "expected a non-empty array");
  for (std::size_t i = 0; i < agents.size(); ++i) p.regimes.push_back(read_agent(p.space, agents[i], i, p));
  if (j.contains("loss")) p.loss = read_vector(p.space, j.at("loss"), "loss");
  if (j.contains("endowments")) {
    const json& e = j.at("endowments");
    if (!e.is_array() || e.size() != p.regimes.size()) schema_error("endowments", "expected one entry per agent");
    for (std::size_t i = 0; i < e.size(); ++i)
      p.endowments.push_back(read_vector(p.space, e[i], "endowments[" + std::to_string(i) + "]"));
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    SplitConfig c{read_cost(need(s, "cost", "split")), 50, std::nullopt, std::nullopt};
    if (s.contains("n_max")) c.n_max = s.at("n_max").get<std::size_t>();
    if (s.contains("phi0")) c.phi0 = read_functional(p.space, s.at("phi0"), "split.phi0");
    if (s.contains("conjugate_tail")) c.conjugate_tail = number(s.at("conjugate_tail"), "split.conjugate_tail");
    p.split = c;
  }
  return p;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Structural, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Structural, "'" + path + "' is not valid JSON: " + e.what());
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Structural, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Throws Structural naming the first violated schema rule.
inline void validate_schema(const std::string& text, const std::string& schema_text) {
  rapidjson::Document sd;
  if (sd.Parse(schema_text.c_str()).HasParseError()) fail(ErrorKind::Internal, "schema is not valid JSON");
  rapidjson::SchemaDocument schema(sd);
  rapidjson::Document d;
  if (d.Parse(text.c_str()).HasParseError())
    fail(ErrorKind::Structural, std::string("not valid JSON: ") + rapidjson::GetParseError_En(d.GetParseError()) +
                                    " at offset " + std::to_string(d.GetErrorOffset()));
  rapidjson::SchemaValidator v(schema);
  if (!d.Accept(v)) {
    rapidjson::StringBuffer where, rule;
    v.GetInvalidDocumentPointer().StringifyUriFragment(where);
    v.GetInvalidSchemaPointer().StringifyUriFragment(rule);
    fail(ErrorKind::Structural, std::string("schema violation at '") + where.GetString() + "' (rule " +
                                    rule.GetString() + ", keyword '" + v.GetInvalidSchemaKeyword() + "')");
  }
}

inline Problem load_problem(const std::string& path) { return read_problem(read_json_file(path)); }

inline Problem load_problem(const std::string& path, const std::string& schema_path) {
  const std::string text = read_text(path);
  validate_schema(text, read_text(schema_path));
  return read_problem(json::parse(text));
}

// ---------------------------------------------------------------------------
// Result documents

// non-finite values are written as strings; -0 is written as 0
inline json real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v == 0.0 ? 0.0 : v;
}

inline json num(double v, double tol) { return {{"value", real(v)}, {"tol", real(tol)}}; }

inline json num(const ExtReal& v, double tol) { return num(v.as_double(), tol); }

inline json vec(const RandomVariable& x, double tol) {
  json vals = json::object();
  for (std::size_t w = 0; w < x.size(); ++w) vals[x.space()->label(w)] = real(x[w]);
  return {{"values", vals}, {"tol", real(tol)}};
}

inline json weights(const Functional& f, double tol) {
  json vals = json::object();
  for (std::size_t w = 0; w < f.space()->size(); ++w) vals[f.space()->label(w)] = real(f.weight(w));
  return {{"weights", vals}, {"tol", real(tol)}};
}

inline json allocation(const Allocation& a, double tol) {
  json arr = json::array();
  for (const auto& p : a.parts) arr.push_back(vec(p, tol));
  return arr;
}

inline json report(const Report& r, double tol) {
  json arr = json::array();
  for (const auto& c : r.checks) {
    json j = {{"name", c.name}, {"pass", c.pass}, {"value", num(c.value, tol)}};
    if (!c.detail.empty()) j["detail"] = c.detail;
    if (c.probabilistic) j["probabilistic"] = true;
    arr.push_back(j);
  }
  return arr;
}

/// Parses "A=1,B=2", "1,2,3" (label order) or a JSON file with a labelled object.
inline RandomVariable parse_loss(const SpacePtr& sp, const std::string& text) {
  if (std::ifstream f(text); f.good()) return read_vector(sp, read_json_file(text), text);
  std::vector<std::string> items;
  std::stringstream ss(text);
  for (std::string it; std::getline(ss, it, ',');) items.push_back(it);
  RandomVariable x(sp);
  const bool keyed = text.find('=') != std::string::npos;
  if (!keyed && items.size() != sp->size())
    fail(ErrorKind::Structural, "loss has " + std::to_string(items.size()) + " entries, expected " +
                                    std::to_string(sp->size()));
  for (std::size_t k = 0; k < items.size(); ++k) {
    std::string lab, val = items[k];
    if (keyed) {
      const auto eq = items[k].find('=');
      if (eq == std::string::npos) fail(ErrorKind::Structural, "mixed keyed and positional loss entries");
      lab = items[k].substr(0, eq);
      val = items[k].substr(eq + 1);
    }
    double v;
    try {
      std::size_t used = 0;
      v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      fail(ErrorKind::Structural, "cannot read '" + val + "' as a number");
    }
    x[keyed ? sp->index_of(lab) : k] = v;
  }
  return x;
}

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Structural:
    case ErrorKind::Validation: return 1;
    case ErrorKind::Domain:
    case ErrorKind::Contract:
    case ErrorKind::NRViolation:
    case ErrorKind::Unsupported: return 2;
    case ErrorKind::Numerical:
    case ErrorKind::Internal: return 3;
  }
  return 3;
}

}  // namespace riskshare::io
