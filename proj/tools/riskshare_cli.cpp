// riskshare_cli: load a problem document, run one solver, print a result
// document on stdout. Exit codes: 0 ok, 1 validation failure, 2 infeasible
// or domain error, 3 numerical failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "riskshare/io.hpp"

#ifndef RISKSHARE_SCHEMA_DIR
#define RISKSHARE_SCHEMA_DIR "schemas"
#endif

namespace {

using namespace riskshare;
using io::json;

struct Flags {
  std::string file;
  std::string schema = std::string(RISKSHARE_SCHEMA_DIR) + "/problem.schema.json";
  unsigned seed = 0;
  double tol = 1e-8;
  std::string loss;
  std::size_t agent = 1;
  std::optional<double> zeta;
  std::string endowments;
  std::string check;
  double grid_h = 0.02;
  double grid_radius = 2.0;
};

RandomVariable loss_of(const io::Problem& p, const Flags& f) {
  if (!f.loss.empty()) return io::parse_loss(p.space, f.loss);
  if (p.loss) return *p.loss;
  fail(ErrorKind::Structural, "no loss given: use --loss or a 'loss' section");
}

std::optional<LawInvProblem> lawinv_view(const io::Problem& p) {
  AgentSystem s = p.system();
  if (!s.all_law_invariant() || !p.pricing_density) return std::nullopt;
  LawInvProblem lp{p.space, {}, {}, *p.pricing_density, p.pricing_scale};
  for (const auto& r : p.regimes) {
    lp.measures.push_back(r.base());
    lp.securities.push_back(r.market().basis);
  }
  return lp;
}

json cmd_validate(const io::Problem& p, const Flags& f, bool& ok) {
  AgentSystem s = p.system();
  Report rep = validate_system(s, f.seed);
  if (auto lp = lawinv_view(p))
    for (const auto& c : check_pricing_assumption(*lp).checks) rep.checks.push_back(c);
  auto nsa = nsa_check(s);
  ok = rep.ok();
  return {{"ok", ok},
          {"checks", io::report(rep, f.tol)},
          {"nsa",
           {{"verdict", nsa.nsa ? "pi(0) = 0" : "pi(0) = -inf"},
            {"dim_v", io::num(static_cast<double>(nsa.dim_v), 0.0)},
            {"agents", io::num(static_cast<double>(s.size()), 0.0)},
            {"lp_status", to_string(nsa.lp_status)}}}};
}

json cmd_rho(const io::Problem& p, const Flags& f) {
  if (f.agent == 0 || f.agent > p.regimes.size()) fail(ErrorKind::Structural, "--agent must be in 1..n");
  const Regime& r = p.regimes[f.agent - 1];
  RandomVariable x = loss_of(p, f);
  auto res = rho(r, x);
  json out = {{"agent", r.name()}, {"loss", io::vec(x, 0.0)}, {"value", io::num(res.value, f.tol)}};
  if (res.value.is_finite()) out["security"] = io::vec(res.security, f.tol);
  return out;
}

json cmd_lambda(const io::Problem& p, const Flags& f) {
  AgentSystem s = p.system();
  RandomVariable x = loss_of(p, f);
  auto res = lambda(s, x);
  json out = {{"loss", io::vec(x, 0.0)}, {"route", res.route}, {"value", io::num(res.value, f.tol)}};
  if (!res.value.is_finite()) return out;
  out["payoff"] = io::vec(res.payoff, f.tol);
  out["allocation"] = io::allocation(res.allocation, f.tol);
  if (res.subgradient) out["subgradient"] = io::weights(*res.subgradient, f.tol);
  out["dual_degenerate"] = res.dual_degenerate;
  return out;
}

json risks(const AgentSystem& s, const Allocation& a, double tol, double& sum) {
  json arr = json::array();
  sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const ExtReal v = rho(s.regime(i), a.parts[i]).value;
    sum += v.as_double();
    arr.push_back(io::num(v, tol));
  }
  return arr;
}

json cmd_pareto(const io::Problem& p, const Flags& f, bool& ok) {
  AgentSystem s = p.system();
  RandomVariable x = loss_of(p, f);
  auto res = lambda(s, x);
  if (!res.value.is_finite()) fail(ErrorKind::Domain, "loss outside the domain of Lambda");
  Allocation a = res.allocation;
  if (f.zeta) {
    if (s.size() != 2) fail(ErrorKind::Domain, "--zeta needs exactly two agents");
    a = shift_pareto(s, a, 0, 1, *f.zeta);
  }
  double sum = 0.0;
  json r = risks(s, a, f.tol, sum);
  const double gap = std::abs(sum - res.value.value());
  ok = gap <= f.tol * (1.0 + std::abs(sum));
  json out = {{"loss", io::vec(x, 0.0)},
              {"lambda", io::num(res.value, f.tol)},
              {"allocation", io::allocation(a, f.tol)},
              {"risks", r},
              {"sum_of_risks", io::num(sum, f.tol)},
              {"pareto", ok}};
  if (f.zeta) out["zeta"] = io::num(*f.zeta, 0.0);
  return out;
}

json cmd_equilibrium(const io::Problem& p, const Flags& f, bool& ok) {
  AgentSystem s = p.system();
  std::vector<RandomVariable> w = p.endowments;
  if (!f.endowments.empty()) {
    const json e = io::read_json_file(f.endowments);
    const json& arr = e.is_object() && e.contains("endowments") ? e.at("endowments") : e;
    if (!arr.is_array()) fail(ErrorKind::Structural, "endowments file must hold an array");
    w.clear();
    for (std::size_t i = 0; i < arr.size(); ++i)
      w.push_back(io::read_vector(p.space, arr[i], "endowments[" + std::to_string(i) + "]"));
  }
  if (w.empty()) fail(ErrorKind::Structural, "no endowments: use --endowments or an 'endowments' section");
  auto eq = build_equilibrium(s, w);
  EquilibriumTolerances tol;
  tol.budget = tol.price = tol.pareto = f.tol;
  Report rep = verify_equilibrium(s, w, eq, tol);
  ok = rep.ok();
  json tr = json::array();
  for (double t : eq.transfers) tr.push_back(io::num(t, tol.budget));
  return {{"allocation", io::allocation(eq.allocation, f.tol)},
          {"price", io::weights(eq.price, tol.price)},
          {"transfer_security", io::vec(eq.transfer_security, f.tol)},
          {"transfers", tr},
          {"price_nonunique", eq.price_nonunique},
          {"ok", ok},
          {"checks", io::report(rep, f.tol)}};
}

json cmd_split(const io::Problem& p, const Flags& f) {
  if (!p.split) fail(ErrorKind::Structural, "problem has no 'split' section");
  SplitProblem sp{SplitProblem::repeat(p.regimes), p.split->cost, p.split->n_max, p.split->phi0,
                  p.split->conjugate_tail};
  RandomVariable x = loss_of(p, f);
  auto out = split_optimize(sp, x);
  json traj = json::array();
  for (const auto& st : out.trajectory) {
    json j = {{"n", io::num(static_cast<double>(st.n), 0.0)},
              {"solved", st.solved},
              {"cost", io::num(st.cost, 0.0)},
              {"lower_bound", io::num(st.lower_bound, f.tol)}};
    if (st.solved) {
      j["lambda"] = io::num(st.lambda, f.tol);
      j["objective"] = io::num(st.objective, f.tol);
    }
    traj.push_back(j);
  }
  return {{"loss", io::vec(x, 0.0)},
          {"cost", p.split->cost.name},
          {"n_star", io::num(static_cast<double>(out.n_star), 0.0)},
          {"value", io::num(out.value, f.tol)},
          {"allocation", io::allocation(out.allocation, f.tol)},
          {"cap_limited", out.cap_limited},
          {"trajectory", traj}};
}

json cmd_oracle(const io::Problem& p, const Flags& f, bool& ok) {
  AgentSystem s = p.system();
  RandomVariable x = loss_of(p, f);
  auto res = lambda(s, x);
  if (!res.value.is_finite()) fail(ErrorKind::Domain, "loss outside the domain of Lambda");
  const double lam = res.value.value();
  json out = {{"check", f.check}, {"loss", io::vec(x, 0.0)}, {"lambda", io::num(lam, f.tol)}};
  if (f.check == "lambda" || f.check == "pareto") {
    const GridSpec g = GridSpec::around(res.allocation.parts.at(0), f.grid_radius, f.grid_h);
    if (f.check == "lambda") {
      auto b = brute_lambda(s, x, g);
      // an infinite modulus (no strictly positive unit security) certifies nothing
      out["certified"] = std::isfinite(b.omega);
      ok = std::isfinite(b.omega) && b.lower - f.tol <= lam && lam <= b.best + f.tol;
      out["grid_best"] = io::num(b.best, f.tol);
      out["grid_lower"] = io::num(b.lower, b.omega);
      out["omega"] = io::num(b.omega, 0.0);
      out["points"] = io::num(static_cast<double>(b.points), 0.0);
    } else {
      auto v = verify_pareto(s, x, res.allocation, g, f.tol);
      ok = v.pareto;
      out["gap"] = io::num(v.gap, f.tol);
      out["omega"] = io::num(v.omega, 0.0);
      if (v.witness) out["witness"] = io::allocation(*v.witness, f.tol);
    }
  } else if (f.check == "subgradient") {
    auto c = fd_subgradient_check(s, x, *res.subgradient, f.seed);
    ok = c.pass;
    out["kink"] = c.kink;
    out["max_rel_error"] = io::num(c.max_rel_error, 1e-4);
    out["worst_violation"] = io::num(c.worst_violation, f.tol);
    out["subgradient"] = io::weights(*res.subgradient, f.tol);
  } else {
    fail(ErrorKind::Structural, "--check must be lambda, pareto or subgradient");
  }
  out["pass"] = ok;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk sharing for capital requirements on finite scenario spaces"};
  app.require_subcommand(1, 1);
  Flags f;
  app.add_option("--seed", f.seed, "seed for randomized probes")->capture_default_str();
  app.add_option("--tol", f.tol, "reporting tolerance")->capture_default_str();
  app.add_option("--schema", f.schema, "problem schema")->capture_default_str();

  auto add_file = [&](CLI::App* c) { c->add_option("file", f.file, "problem document")->required(); };
  auto* validate = app.add_subcommand("validate", "regime, star and NSA reports");
  add_file(validate);
  auto* rho_c = app.add_subcommand("rho", "individual risk of one agent");
  add_file(rho_c);
  rho_c->add_option("--agent", f.agent, "agent index, 1-based")->required();
  rho_c->add_option("--loss", f.loss, "CSV in label order, label=value pairs or a JSON file");
  auto* lambda_c = app.add_subcommand("lambda", "risk sharing value, payoff and allocation");
  add_file(lambda_c);
  lambda_c->add_option("--loss", f.loss, "CSV in label order, label=value pairs or a JSON file");
  auto* pareto_c = app.add_subcommand("pareto", "Pareto optimal allocation");
  add_file(pareto_c);
  pareto_c->add_option("--loss", f.loss, "CSV in label order, label=value pairs or a JSON file");
  pareto_c->add_option("--zeta", f.zeta, "units of the shared unit-price security moved to agent 1");
  auto* eq_c = app.add_subcommand("equilibrium", "equilibrium from endowments");
  add_file(eq_c);
  eq_c->add_option("--endowments", f.endowments, "JSON file with one labelled vector per agent");
  auto* split_c = app.add_subcommand("split", "optimal number of subsidiaries");
  add_file(split_c);
  split_c->add_option("--loss", f.loss, "CSV in label order, label=value pairs or a JSON file");
  auto* oracle_c = app.add_subcommand("oracle", "brute-force certification");
  add_file(oracle_c);
  oracle_c->add_option("--loss", f.loss, "CSV in label order, label=value pairs or a JSON file");
  oracle_c->add_option("--check", f.check, "lambda, pareto or subgradient")
      ->required()
      ->check(CLI::IsMember({"lambda", "pareto", "subgradient"}));
  oracle_c->add_option("--grid-h", f.grid_h, "grid resolution")->capture_default_str();
  oracle_c->add_option("--grid-radius", f.grid_radius, "grid half-width around the allocation")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    const std::string text = io::read_text(f.file);
    io::validate_schema(text, io::read_text(f.schema));
    const json doc = json::parse(text);
    const io::Problem p = io::read_problem(doc);
    bool ok = true;
    json result;
    if (cmd == "validate") result = cmd_validate(p, f, ok);
    else if (cmd == "rho") result = cmd_rho(p, f);
    else if (cmd == "lambda") result = cmd_lambda(p, f);
    else if (cmd == "pareto") result = cmd_pareto(p, f, ok);
    else if (cmd == "equilibrium") result = cmd_equilibrium(p, f, ok);
    else if (cmd == "split") result = cmd_split(p, f);
    else result = cmd_oracle(p, f, ok);
    const json out = {{"command", cmd},
                      {"seed", f.seed},
                      {"tol", f.tol},
                      {"problem", doc},
                      {"result", result}};
    std::cout << out.dump(2) << '\n';
    if (!ok) std::cerr << cmd << ": a check failed, see the result document\n";
    return ok ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << cmd << ": " << e.what() << '\n';
    return io::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << cmd << ": internal: " << e.what() << '\n';
    return 3;
  }
}
