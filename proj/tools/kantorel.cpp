// kantorel: exact sensitivity analysis for small probabilistic programs.
//
// Exit codes: 0 verdict holds / computation succeeded, 1 verdict fails
// (witness in the report), 2 usage or parse error, 3 inconclusive
// (approximate mode, or an iteration budget was exhausted).

#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kantorel/casebook.hpp"
#include "kantorel/report.hpp"

using namespace kantorel;

namespace {

enum class Format { Table, Json, Csv };

struct GlobalOpts {
  std::string mode = "exact";
  double epsilon = 1e-9;
  long max_iters = 100000;
  long n_max = 64;
  uint64_t seed = 1;
  int jobs = 1;
  std::string format = "table";

  LoopConfig loop_config() const {
    LoopConfig cfg;
    cfg.mode = mode == "float" ? LoopMode::Approximate
                               : LoopMode::ExactTerminating;
    cfg.epsilon = epsilon;
    cfg.max_iters = max_iters;
    return cfg;
  }
  Format fmt() const {
    if (format == "json") return Format::Json;
    if (format == "csv") return Format::Csv;
    return Format::Table;
  }
  bool exact_mode() const { return mode != "float"; }
};

struct CaseOpts {
  std::string name;
  long N = 3, K = 4, N2 = -1, T = 20;
  std::string p = "1/2", alpha = "1/2", gamma = "1/2";

  CaseParams params() const {
    CaseParams pr;
    pr.N = N;
    pr.K = K;
    pr.N2 = N2;
    pr.T = T;
    auto rat = [](const std::string& s, const char* what) {
      ExtRat v = parse_ext_rat(s);
      if (v.is_inf()) throw CaseError(std::string(what) + " must be finite");
      return v.value();
    };
    pr.p = rat(p, "-p");
    pr.alpha = rat(alpha, "--alpha");
    pr.gamma = rat(gamma, "--gamma");
    return pr;
  }
};

void add_case_opts(CLI::App* cmd, CaseOpts& c, bool required = false) {
  auto* opt = cmd->add_option("--case", c.name, "built-in case study name");
  if (required) opt->required();
  cmd->add_option("-N", c.N, "dimension / deck size / iteration count");
  cmd->add_option("-K", c.K, "number of chain steps");
  cmd->add_option("--N2", c.N2, "right-hand iteration count (binom)");
  cmd->add_option("-p", c.p, "coin bias, e.g. 1/3 (binom)");
  cmd->add_option("--alpha", c.alpha, "step size (td0, pgd)");
  cmd->add_option("--gamma", c.gamma, "discount factor (td0)");
  cmd->add_option("-T", c.T, "iteration count (sgd, pgd)");
}

// --- input plumbing --------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot read file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// `--exp` style arguments are inline text, or @file to read from a file.
std::string inline_or_file(const std::string& arg) {
  if (!arg.empty() && arg[0] == '@') return slurp(arg.substr(1));
  return arg;
}

Value parse_value(const std::string& raw) {
  std::string s = raw;
  auto trim = [](std::string& t) {
    size_t a = t.find_first_not_of(" \t");
    size_t b = t.find_last_not_of(" \t");
    t = a == std::string::npos ? "" : t.substr(a, b - a + 1);
  };
  trim(s);
  if (s == "true") return Value(true);
  if (s == "false") return Value(false);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw CaseError("unterminated array value '" + raw + "'");
    std::vector<Int> items;
    std::string body = s.substr(1, s.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      trim(item);
      if (item.empty()) throw CaseError("empty array element in '" + raw + "'");
      items.emplace_back(item);
    }
    return Value(std::move(items));
  }
  try {
    return Value(Int(s));
  } catch (const std::exception&) {
    throw CaseError("cannot parse value '" + raw + "'");
  }
}

// Default initial state: ints 0, bools false, arrays the identity sequence.
State default_state(const Program& prog) {
  State s;
  for (const auto& d : prog.decls) {
    switch (d.type) {
      case Type::Int: s.set(d.name, Value(0L)); break;
      case Type::Bool: s.set(d.name, Value(false)); break;
      case Type::Array: {
        std::vector<Int> v(d.array_len);
        for (long i = 0; i < d.array_len; ++i) v[i] = i;
        s.set(d.name, Value(std::move(v)));
        break;
      }
    }
  }
  return s;
}

void apply_sets(State& s, const Program& prog,
                const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw CaseError("--set expects var=value, got '" + kv + "'");
    std::string var = kv.substr(0, eq);
    if (!prog.find_decl(var))
      throw CaseError("--set: program has no variable '" + var + "'");
    s.set(var, parse_value(kv.substr(eq + 1)));
  }
}

Value value_from_json(const Json& j) {
  if (j.is_boolean()) return Value(j.get<bool>());
  if (j.is_number_integer()) return Value(j.get<long>());
  if (j.is_string()) return parse_value(j.get<std::string>());
  if (j.is_array()) {
    std::vector<Int> v;
    for (const auto& e : j) {
      if (e.is_number_integer())
        v.emplace_back(e.get<long>());
      else if (e.is_string())
        v.emplace_back(e.get<std::string>());
      else
        throw CaseError("array elements must be integers");
    }
    return Value(std::move(v));
  }
  throw CaseError("unsupported value in state file: " + j.dump());
}

State state_from_json(const Json& j) {
  if (!j.is_object()) throw CaseError("a state must be a JSON object");
  State s;
  for (auto it = j.begin(); it != j.end(); ++it)
    s.set(it.key(), value_from_json(it.value()));
  return s;
}

std::vector<State> states_from_file(const std::string& path) {
  Json j = Json::parse(slurp(path));
  if (!j.is_array()) throw CaseError("states file must be a JSON array");
  std::vector<State> out;
  for (const auto& e : j) out.push_back(state_from_json(e));
  return out;
}

std::vector<std::pair<State, State>> pairs_from_file(const std::string& path) {
  Json j = Json::parse(slurp(path));
  if (!j.is_array()) throw CaseError("pairs file must be a JSON array");
  std::vector<std::pair<State, State>> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw CaseError("each entry in a pairs file must be a two-element array");
    out.emplace_back(state_from_json(e[0]), state_from_json(e[1]));
  }
  return out;
}

// Coupling files: one `<site-index> <coupling>` per line, '#' comments.
SiteSpecs specs_from_file(const std::string& path) {
  SiteSpecs specs;
  std::stringstream ss(slurp(path));
  std::string line;
  while (std::getline(ss, line)) {
    size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::stringstream ls(line);
    int site;
    std::string name;
    if (!(ls >> site)) continue;
    if (!(ls >> name))
      throw CaseError("coupling file line missing a coupling: '" + line + "'");
    specs[site] = coupling_by_name(name);
  }
  return specs;
}

// --- output plumbing -------------------------------------------------------

std::string ext_str(const ExtRat& v) {
  if (v.is_inf()) return "inf";
  std::ostringstream os;
  os << to_string(v.value()) << " (" << v.to_double() << ")";
  return os.str();
}

void emit_kv(Format fmt, const Json& j,
             const std::vector<std::pair<std::string, std::string>>& rows) {
  if (fmt == Format::Json) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  if (fmt == Format::Csv) {
    std::string head, vals;
    for (const auto& [k, v] : rows) {
      if (!head.empty()) {
        head += ',';
        vals += ',';
      }
      head += csv_escape(k);
      vals += csv_escape(v);
    }
    std::cout << head << "\n" << vals << "\n";
    return;
  }
  size_t w = 0;
  for (const auto& [k, v] : rows) w = std::max(w, k.size());
  for (const auto& [k, v] : rows)
    std::cout << k << std::string(w - k.size() + 2, ' ') << v << "\n";
}

std::string violation_str(const PairViolation& v) {
  std::ostringstream os;
  os << v.which << " at " << v.s1.str() << " / " << v.s2.str() << ": "
     << ext_str(v.lhs) << " > " << ext_str(v.rhs);
  return os.str();
}

int verdict_exit(bool ok, bool exact) {
  if (!ok) return 1;
  return exact ? 0 : 3;
}

// --- shared loading --------------------------------------------------------

struct Loaded {
  Program prog;
  std::optional<CaseStudy> cs;
};

Loaded load_program(const CaseOpts& copt, const std::string& program_file) {
  Loaded out;
  if (!copt.name.empty()) {
    out.cs = make_case(copt.name, copt.params());
    if (!out.cs->discrete)
      throw CaseError("case '" + copt.name +
                      "' is simulator-backed; use the simulate subcommand");
    out.prog = out.cs->program;
  } else if (!program_file.empty()) {
    out.prog = parse_program(slurp(program_file));
  } else {
    throw CaseError("need --case or --program");
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exact sensitivity analysis for probabilistic programs"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--mode", g.mode, "arithmetic mode")
      ->check(CLI::IsMember({"exact", "float"}))
      ->envname("KANTOREL_MODE");
  app.add_option("--epsilon", g.epsilon, "float-mode residual tolerance")
      ->envname("KANTOREL_EPSILON");
  app.add_option("--max-iters", g.max_iters, "loop iteration budget")
      ->envname("KANTOREL_MAX_ITERS");
  app.add_option("--n-max", g.n_max, "omega-invariant family depth")
      ->envname("KANTOREL_N_MAX");
  app.add_option("--seed", g.seed, "root seed for simulation")
      ->envname("KANTOREL_SEED");
  app.add_option("--jobs", g.jobs, "parallel workers for independent units")
      ->envname("KANTOREL_JOBS");
  app.add_option("--format", g.format, "output format")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->envname("KANTOREL_FORMAT");

  // ---- run ----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run a program, print its output "
                                        "distribution");
  CaseOpts run_case;
  std::string run_prog;
  std::vector<std::string> run_sets;
  std::string run_var;
  add_case_opts(run, run_case);
  run->add_option("--program", run_prog, "program file (.pwl)");
  run->add_option("--set", run_sets, "initial value override, var=value");
  run->add_option("--var", run_var, "report this variable's marginal only");

  // ---- dist ---------------------------------------------------------------
  auto* dist = app.add_subcommand(
      "dist", "exact distance between two output distributions");
  CaseOpts dist_case;
  std::string dist_p1, dist_p2, dist_cost = "discrete";
  std::vector<std::string> dist_sets1, dist_sets2;
  bool dist_plan = false;
  add_case_opts(dist, dist_case);
  dist->add_option("program1", dist_p1, "first program file");
  dist->add_option("program2", dist_p2,
                   "second program file (default: same as first)");
  dist->add_option("--cost", dist_cost,
                   "'discrete' (tv) or a relational expression (or @file)");
  dist->add_option("--set", dist_sets1, "left initial override, var=value");
  dist->add_option("--set2", dist_sets2, "right initial override, var=value");
  dist->add_flag("--plan", dist_plan, "include an optimal coupling plan");

  // ---- rpe ----------------------------------------------------------------
  auto* rpe_cmd = app.add_subcommand(
      "rpe", "relational pre-expectation of an expectation");
  CaseOpts rpe_case;
  std::string rpe_prog, rpe_exp, rpe_couplings;
  std::vector<std::string> rpe_sets1, rpe_sets2;
  bool rpe_semantic = false;
  add_case_opts(rpe_cmd, rpe_case);
  rpe_cmd->add_option("--program", rpe_prog, "program file (.pwl)");
  rpe_cmd->add_option("--exp", rpe_exp,
                      "relational expectation (or @file); default: the "
                      "case's distance");
  rpe_cmd->add_option("--couplings", rpe_couplings,
                      "per-site coupling file; default: the case's couplings");
  rpe_cmd->add_option("--set", rpe_sets1, "left initial override, var=value");
  rpe_cmd->add_option("--set2", rpe_sets2,
                      "right initial override, var=value");
  rpe_cmd->add_flag("--semantic", rpe_semantic,
                    "compute the exact output distance instead of the "
                    "calculus upper bound");

  // ---- check-inv ----------------------------------------------------------
  auto* cinv = app.add_subcommand("check-inv",
                                  "certify a relational loop invariant");
  CaseOpts cinv_case;
  std::string cinv_prog, cinv_exp, cinv_inv, cinv_pairs, cinv_couplings;
  add_case_opts(cinv, cinv_case);
  cinv->add_option("--program", cinv_prog, "program file (.pwl)");
  cinv->add_option("--exp", cinv_exp, "post relational expectation (or @file)");
  cinv->add_option("--inv", cinv_inv, "candidate invariant (or @file)");
  cinv->add_option("--pairs", cinv_pairs,
                   "JSON file with state pairs to check");
  cinv->add_option("--couplings", cinv_couplings, "per-site coupling file");

  // ---- check-async --------------------------------------------------------
  auto* casy = app.add_subcommand(
      "check-async", "certify an invariant under the asynchronous loop rule");
  CaseOpts casy_case;
  std::string casy_prog, casy_exp, casy_inv, casy_pairs, casy_couplings;
  add_case_opts(casy, casy_case);
  casy->add_option("--program", casy_prog, "program file (.pwl)");
  casy->add_option("--exp", casy_exp, "post relational expectation (or @file)");
  casy->add_option("--inv", casy_inv, "candidate invariant (or @file)");
  casy->add_option("--pairs", casy_pairs,
                   "JSON file with state pairs to check");
  casy->add_option("--couplings", casy_couplings, "per-site coupling file");

  // ---- check-omega --------------------------------------------------------
  auto* comega = app.add_subcommand(
      "check-omega", "certify an omega-invariant family for a loop");
  CaseOpts comega_case;
  std::string com_prog, com_post, com_family, com_limit, com_states;
  std::string com_index = "n", com_dir = "both";
  add_case_opts(comega, comega_case);
  comega->add_option("--program", com_prog, "program file (.pwl)");
  comega->add_option("--post", com_post, "post expectation f (or @file)");
  comega->add_option("--family", com_family,
                     "indexed family I_n, free index variable (or @file)");
  comega->add_option("--index", com_index, "index variable name");
  comega->add_option("--limit", com_limit, "claimed limit (or @file)");
  comega->add_option("--states", com_states, "JSON file with states to check");
  comega->add_option("--direction", com_dir, "which inequalities to check")
      ->check(CLI::IsMember({"upper", "lower", "both"}));

  // ---- wpe ----------------------------------------------------------------
  auto* wpe_cmd = app.add_subcommand(
      "wpe", "expected value of an expectation over a program's output");
  CaseOpts wpe_case;
  std::string wpe_prog, wpe_exp;
  std::vector<std::string> wpe_sets;
  add_case_opts(wpe_cmd, wpe_case);
  wpe_cmd->add_option("--program", wpe_prog, "program file (.pwl)");
  wpe_cmd->add_option("--exp", wpe_exp, "unary expectation (or @file)")
      ->required();
  wpe_cmd->add_option("--set", wpe_sets, "initial override, var=value");

  // ---- lower-bound --------------------------------------------------------
  auto* lb = app.add_subcommand(
      "lower-bound", "certified tv lower bound from a witness function");
  CaseOpts lb_case;
  std::string lb_prog, lb_exp;
  std::vector<std::string> lb_sets1, lb_sets2;
  add_case_opts(lb, lb_case);
  lb->add_option("--program", lb_prog, "program file (.pwl)");
  lb->add_option("--exp", lb_exp,
                 "witness function with range [0,1] (or @file); default for "
                 "--case hwalk: normalized Hamming weight");
  lb->add_option("--set", lb_sets1, "left initial override, var=value");
  lb->add_option("--set2", lb_sets2, "right initial override, var=value");

  // ---- mix ----------------------------------------------------------------
  auto* mix = app.add_subcommand("mix",
                                 "mixing curve: distance vs. steps K");
  CaseOpts mix_case;
  std::string mix_ks;
  bool mix_sim = false;
  long mix_trials = 10000;
  add_case_opts(mix, mix_case, /*required=*/true);
  mix->add_option("--Ks", mix_ks, "K values, e.g. 0..8 or 0,2,4")->required();
  mix->add_flag("--simulated", mix_sim,
                "estimate from paired samples instead of exact semantics");
  mix->add_option("--trials", mix_trials, "trials per K in simulated mode");

  // ---- uniformity ---------------------------------------------------------
  auto* unif = app.add_subcommand(
      "uniformity", "distance to the uniform distribution, with the "
                    "supporting domination artifact");
  CaseOpts unif_case;
  add_case_opts(unif, unif_case, /*required=*/true);

  // ---- simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand("simulate",
                                 "coupled Monte-Carlo estimate vs. the "
                                 "case's analytic bound");
  CaseOpts sim_case;
  long sim_trials = 10000;
  std::string sim_exp, sim_couplings;
  bool sim_trace = false;
  add_case_opts(sim, sim_case, /*required=*/true);
  sim->add_option("--trials", sim_trials, "number of coupled trials");
  sim->add_option("--exp", sim_exp,
                  "relational expectation to estimate (or @file); default: "
                  "the case's distance");
  sim->add_option("--couplings", sim_couplings, "per-site coupling file");
  sim->add_flag("--trace", sim_trace, "include the first trial's trace");

  // ---- cases --------------------------------------------------------------
  auto* cases = app.add_subcommand("cases", "list built-in case studies");
  std::string cases_name;
  cases->add_option("name", cases_name, "show one case in detail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  LoopConfig cfg = g.loop_config();
  Format fmt = g.fmt();

  try {
    // ---- run --------------------------------------------------------------
    if (*run) {
      Loaded L = load_program(run_case, run_prog);
      State s = L.cs ? L.cs->init1 : default_state(L.prog);
      apply_sets(s, L.prog, run_sets);
      DenoteResult r = denote_full(L.prog.body, s, cfg);
      Json j = json_report_head("run");
      j["initial"] = json_state(s);
      j["residual"] = json_rat(r.residual);
      std::vector<std::pair<std::string, std::string>> rows;
      if (!run_var.empty()) {
        ValueDist m = marginal(r.dist, run_var);
        j["distribution"] = json_value_dist(m);
        for (const auto& [v, p] : m.entries())
          rows.emplace_back(v.str(), to_string(p) + " (" +
                                         std::to_string(to_double(p)) + ")");
      } else {
        j["distribution"] = json_dist(r.dist);
        for (const auto& [t, p] : r.dist.entries())
          rows.emplace_back(t.str(), to_string(p) + " (" +
                                         std::to_string(to_double(p)) + ")");
      }
      rows.emplace_back("mass", to_string(r.dist.mass()));
      emit_kv(fmt, j, rows);
      return r.residual == 0 ? 0 : 3;
    }

    // ---- dist -------------------------------------------------------------
    if (*dist) {
      Program p1, p2;
      State s1, s2;
      if (!dist_case.name.empty()) {
        CaseStudy cs = make_case(dist_case.name, dist_case.params());
        if (!cs.discrete)
          throw CaseError("case '" + cs.name + "' is simulator-backed");
        p1 = p2 = cs.program;
        s1 = cs.init1;
        s2 = cs.init2;
        if (dist_cost == "discrete" && cs.distance) {
          // keep the default discrete metric unless asked otherwise
        }
      } else {
        if (dist_p1.empty()) throw CaseError("need --case or program files");
        p1 = parse_program(slurp(dist_p1));
        p2 = dist_p2.empty() ? p1 : parse_program(slurp(dist_p2));
        s1 = default_state(p1);
        s2 = default_state(p2);
      }
      apply_sets(s1, p1, dist_sets1);
      apply_sets(s2, p2, dist_sets2);
      DenoteResult r1 = denote_full(p1.body, s1, cfg);
      DenoteResult r2 = denote_full(p2.body, s2, cfg);
      bool exact = r1.residual == 0 && r2.residual == 0;
      Json j = json_report_head("dist");
      std::vector<std::pair<std::string, std::string>> rows;
      ExtRat value;
      if (dist_cost == "discrete") {
        KantorovichResult<State> kr =
            kantorovich_discrete(r1.dist, r2.dist);
        value = kr.value;
        if (dist_plan && kr.plan) j["plan"] = json_plan(*kr.plan);
      } else {
        SExprPtr cost = parse_relexp(inline_or_file(dist_cost));
        KantorovichResult<State> kr = kantorovich<State>(
            r1.dist, r2.dist,
            [&](const State& a, const State& b) {
              return eval_relexp(cost, a, b);
            });
        value = kr.value;
        if (dist_plan && kr.plan) j["plan"] = json_plan(*kr.plan);
      }
      j["cost"] = dist_cost;
      j["value"] = json_ext(value);
      j["exact"] = exact;
      rows.emplace_back("cost", dist_cost);
      rows.emplace_back("distance", ext_str(value));
      rows.emplace_back("exact", exact ? "yes" : "no");
      emit_kv(fmt, j, rows);
      return exact ? 0 : 3;
    }

    // ---- rpe --------------------------------------------------------------
    if (*rpe_cmd) {
      Loaded L = load_program(rpe_case, rpe_prog);
      SExprPtr E = !rpe_exp.empty() ? parse_relexp(inline_or_file(rpe_exp))
                 : L.cs             ? L.cs->distance
                                    : nullptr;
      if (!E) throw CaseError("need --exp (or a --case with a distance)");
      SiteSpecs specs;
      const SiteSpecs* sp = nullptr;
      if (!rpe_couplings.empty()) {
        specs = specs_from_file(rpe_couplings);
        sp = &specs;
      } else if (L.cs && !L.cs->specs.empty()) {
        sp = &L.cs->specs;
      }
      State s1 = L.cs ? L.cs->init1 : default_state(L.prog);
      State s2 = L.cs ? L.cs->init2 : default_state(L.prog);
      apply_sets(s1, L.prog, rpe_sets1);
      apply_sets(s2, L.prog, rpe_sets2);
      RpeResult r = rpe_semantic
                        ? kantorovich_pre(L.prog.body, relfn(E), s1, s2, cfg)
                        : rpe(L.prog.body, relfn(E), s1, s2, cfg, sp);
      Json j = json_report_head(rpe_semantic ? "kantorovich-pre" : "rpe");
      j["state1"] = json_state(s1);
      j["state2"] = json_state(s2);
      j["value"] = json_ext(r.value);
      j["exact"] = r.exact;
      emit_kv(fmt, j,
              {{"value", ext_str(r.value)}, {"exact", r.exact ? "yes" : "no"}});
      return r.exact ? 0 : 3;
    }

    // ---- check-inv / check-async ------------------------------------------
    if (*cinv || *casy) {
      bool async = casy->parsed();
      const CaseOpts& copt = async ? casy_case : cinv_case;
      const std::string& prog_file = async ? casy_prog : cinv_prog;
      const std::string& exp_arg = async ? casy_exp : cinv_exp;
      const std::string& inv_arg = async ? casy_inv : cinv_inv;
      const std::string& pairs_arg = async ? casy_pairs : cinv_pairs;
      const std::string& coup_arg = async ? casy_couplings : cinv_couplings;

      Loaded L = load_program(copt, prog_file);
      SExprPtr E = !exp_arg.empty() ? parse_relexp(inline_or_file(exp_arg))
                 : L.cs             ? L.cs->distance
                                    : nullptr;
      SExprPtr I = !inv_arg.empty() ? parse_relexp(inline_or_file(inv_arg))
                 : L.cs             ? L.cs->invariant
                                    : nullptr;
      if (!E || !I) throw CaseError("need --exp and --inv (or a --case)");
      std::vector<std::pair<State, State>> pairs =
          !pairs_arg.empty() ? pairs_from_file(pairs_arg)
          : L.cs             ? L.cs->invariant_pairs
                             : std::vector<std::pair<State, State>>{};
      if (pairs.empty()) throw CaseError("need --pairs (or a --case)");
      SiteSpecs specs;
      const SiteSpecs* sp = nullptr;
      if (!coup_arg.empty()) {
        specs = specs_from_file(coup_arg);
        sp = &specs;
      } else if (L.cs && !L.cs->specs.empty()) {
        sp = &L.cs->specs;
      }
      const Command* loop = CaseStudy::find_loop(L.prog.body);
      if (!loop) throw CaseError("the program has no loop");

      InvariantReport rep;
      bool bounded = true;
      if (async) {
        AsyncReport ar = check_async_invariant(*loop, E, I, pairs, cfg, sp);
        bounded = ar.bounded;
        rep = std::move(ar);
      } else {
        rep = check_invariant(*loop, E, I, pairs, cfg, sp);
      }
      Json j = async ? json_report_head("async-invariant")
                     : json_invariant_report(rep);
      if (async) {
        j["ok"] = rep.ok;
        j["exact"] = rep.exact;
        j["bounded"] = bounded;
        j["pairs_checked"] = rep.pairs_checked;
        Json vs = Json::array();
        for (const auto& v : rep.violations) vs.push_back(json_violation(v));
        j["violations"] = vs;
      }
      std::vector<std::pair<std::string, std::string>> rows = {
          {"invariant", rep.ok ? "holds" : "fails"},
          {"pairs checked", std::to_string(rep.pairs_checked)},
          {"exact", rep.exact ? "yes" : "no"}};
      if (async) rows.emplace_back("loop bounded", bounded ? "yes" : "no");
      for (size_t i = 0; i < rep.violations.size() && i < 5; ++i)
        rows.emplace_back("witness", violation_str(rep.violations[i]));
      emit_kv(fmt, j, rows);
      return verdict_exit(rep.ok, rep.exact && (!async || bounded));
    }

    // ---- check-omega ------------------------------------------------------
    if (*comega) {
      OmegaFamily fam;
      const Command* loop = nullptr;
      Program prog;
      if (!comega_case.name.empty()) {
        if (comega_case.name != "hwalk")
          throw CaseError(
              "a built-in omega family is available for hwalk only");
        CaseParams pr = comega_case.params();
        CaseStudy cs = make_case("hwalk", pr);
        prog = cs.program;
        fam = hwalk_omega_family(pr.N, pr.K);
        loop = cs.loop();
      } else {
        if (com_prog.empty() || com_post.empty() || com_family.empty() ||
            com_states.empty())
          throw CaseError(
              "need --program, --post, --family and --states (or --case)");
        prog = parse_program(slurp(com_prog));
        loop = CaseStudy::find_loop(prog.body);
        if (!loop) throw CaseError("the program has no loop");
        fam.f = parse_relexp(inline_or_file(com_post));
        fam.family.body = parse_relexp(inline_or_file(com_family));
        fam.family.index = com_index;
        if (!com_limit.empty())
          fam.limit = parse_relexp(inline_or_file(com_limit));
        fam.states = states_from_file(com_states);
      }
      bool do_upper = com_dir != "lower";
      bool do_lower = com_dir != "upper";
      Json j = json_report_head("omega");
      std::vector<std::pair<std::string, std::string>> rows;
      bool ok = true, exact = true;
      auto run_dir = [&](bool upper) {
        OmegaReport rep = check_omega_invariant(
            *loop, fam.f, fam.family, fam.states, g.n_max, upper, fam.limit,
            cfg);
        const char* tag = upper ? "upper" : "lower";
        j[tag] = json_omega_report(rep);
        rows.emplace_back(tag, rep.ok ? "holds" : "fails");
        for (size_t i = 0; i < rep.violations.size() && i < 5; ++i) {
          const auto& v = rep.violations[i];
          std::ostringstream os;
          os << v.which << " n=" << v.n << " at " << v.state.str() << ": "
             << ext_str(v.lhs) << " vs " << ext_str(v.rhs);
          rows.emplace_back("witness", os.str());
        }
        ok = ok && rep.ok;
      };
      if (do_upper) run_dir(true);
      if (do_lower) run_dir(false);
      rows.emplace_back("depth", std::to_string(g.n_max));
      rows.emplace_back("states", std::to_string(fam.states.size()));
      exact = g.exact_mode();
      emit_kv(fmt, j, rows);
      return verdict_exit(ok, exact);
    }

    // ---- wpe --------------------------------------------------------------
    if (*wpe_cmd) {
      Loaded L = load_program(wpe_case, wpe_prog);
      SExprPtr f = parse_relexp(inline_or_file(wpe_exp));
      State s = L.cs ? L.cs->init1 : default_state(L.prog);
      apply_sets(s, L.prog, wpe_sets);
      DenoteResult r = denote_full(L.prog.body, s, cfg);
      ExtRat v = r.dist.expected(
          [&](const State& t) { return eval_unary(f, t); });
      Json j = json_report_head("wpe");
      j["state"] = json_state(s);
      j["value"] = json_ext(v);
      j["exact"] = r.residual == 0;
      emit_kv(fmt, j,
              {{"value", ext_str(v)},
               {"exact", r.residual == 0 ? "yes" : "no"}});
      return r.residual == 0 ? 0 : 3;
    }

    // ---- lower-bound ------------------------------------------------------
    if (*lb) {
      Loaded L = load_program(lb_case, lb_prog);
      SExprPtr f;
      if (!lb_exp.empty()) {
        f = parse_relexp(inline_or_file(lb_exp));
      } else if (lb_case.name == "hwalk") {
        f = hwalk_weight(lb_case.N);
      } else {
        throw CaseError("need --exp (built-in witness exists for hwalk only)");
      }
      State s1 = L.cs ? L.cs->init1 : default_state(L.prog);
      State s2 = L.cs ? L.cs->init2 : default_state(L.prog);
      apply_sets(s1, L.prog, lb_sets1);
      apply_sets(s2, L.prog, lb_sets2);
      TvLowerBound r = tv_lower_bound(L.prog.body, s1, s2, f, cfg);
      Json j = json_report_head("lower-bound");
      j["bound"] = json_ext(r.bound);
      j["range_ok"] = r.range_ok;
      if (r.range_violation) j["range_violation"] = json_state(*r.range_violation);
      std::vector<std::pair<std::string, std::string>> rows = {
          {"tv lower bound", ext_str(r.bound)},
          {"witness in [0,1]", r.range_ok ? "yes" : "no"}};
      if (r.range_violation)
        rows.emplace_back("range violation", r.range_violation->str());
      emit_kv(fmt, j, rows);
      if (!r.range_ok) return 1;
      return g.exact_mode() ? 0 : 3;
    }

    // ---- mix --------------------------------------------------------------
    if (*mix) {
      std::vector<long> Ks;
      size_t dots = mix_ks.find("..");
      if (dots != std::string::npos) {
        long lo = std::stol(mix_ks.substr(0, dots));
        long hi = std::stol(mix_ks.substr(dots + 2));
        for (long k = lo; k <= hi; ++k) Ks.push_back(k);
      } else {
        std::stringstream ss(mix_ks);
        std::string item;
        while (std::getline(ss, item, ',')) Ks.push_back(std::stol(item));
      }
      if (Ks.empty()) throw CaseError("--Ks selected no K values");
      CaseParams base = mix_case.params();
      MixMode mode = mix_sim ? MixMode::Simulated : MixMode::Exact;

      std::vector<MixRow> rows(Ks.size());
      auto point = [&](size_t i) {
        CaseParams pr = base;
        pr.K = Ks[i];
        CaseStudy cs = make_case(mix_case.name, pr);
        if (mode == MixMode::Exact) {
          if (cs.initial_states.size() > 720)
            throw CaseError(
                "state space too large for exact mixing; use --simulated");
          rows[i] = mixing_point_exact(cs, cfg);
        } else {
          rows[i] = mixing_point_simulated(cs, mix_trials, g.seed + Ks[i]);
        }
      };
      if (g.jobs > 1) {
        std::vector<std::future<void>> fut;
        std::atomic<size_t> next{0};
        for (int w = 0; w < g.jobs; ++w)
          fut.push_back(std::async(std::launch::async, [&] {
            for (size_t i = next++; i < Ks.size(); i = next++) point(i);
          }));
        for (auto& f : fut) f.get();
      } else {
        for (size_t i = 0; i < Ks.size(); ++i) point(i);
      }

      Json j = json_report_head("mix");
      j["case"] = mix_case.name;
      j["N"] = base.N;
      Json jr = Json::array();
      for (const auto& r : rows) jr.push_back(json_mix_row(r));
      j["rows"] = jr;
      if (fmt == Format::Json) {
        std::cout << j.dump(2) << "\n";
      } else if (fmt == Format::Csv) {
        std::cout << kCsvHeader << "\n";
        for (const auto& r : rows)
          std::cout << csv_mix_row(mix_case.name, base.N, r, g.seed).str()
                    << "\n";
      } else {
        for (const auto& r : rows) {
          std::cout << "K=" << r.K << "  bound=" << ext_str(r.bound);
          if (r.trials > 0)
            std::cout << "  tv_est=" << r.tv_est << "  ci=[" << r.ci_lo << ", "
                      << r.ci_hi << "]  trials=" << r.trials;
          else
            std::cout << "  tv=" << ext_str(r.tv_exact)
                      << "  tv_uniform=" << ext_str(r.tv_uniform);
          std::cout << "\n";
        }
      }
      bool within = true;
      for (const auto& r : rows)
        if (r.trials == 0 && !(r.tv_exact <= r.bound)) within = false;
      if (!within) return 1;
      return (mode == MixMode::Exact && g.exact_mode()) ? 0 : 3;
    }

    // ---- uniformity -------------------------------------------------------
    if (*unif) {
      CaseStudy cs = make_case(unif_case.name, unif_case.params());
      UniformityReport rep = uniformity_check(cs, cfg);
      bool ok = rep.artifact_ok && rep.tv_uniform <= rep.bound;
      Json j = json_report_head("uniformity");
      j["case"] = cs.name;
      j["tv_uniform"] = json_ext(rep.tv_uniform);
      j["bound"] = json_ext(rep.bound);
      j["artifact_ok"] = rep.artifact_ok;
      j["pairs_checked"] = rep.pairs_checked;
      j["ok"] = ok;
      std::vector<std::pair<std::string, std::string>> rows = {
          {"tv to uniform", ext_str(rep.tv_uniform)},
          {"bound", ext_str(rep.bound)},
          {"domination artifact",
           rep.artifact_ok ? "holds" : "fails"},
          {"verdict", ok ? "holds" : "fails"}};
      if (rep.violation)
        rows.emplace_back("witness", rep.violation->first.str() + " / " +
                                         rep.violation->second.str());
      emit_kv(fmt, j, rows);
      return verdict_exit(ok, g.exact_mode());
    }

    // ---- simulate ---------------------------------------------------------
    if (*sim) {
      CaseStudy cs = make_case(sim_case.name, sim_case.params());
      SExprPtr E =
          sim_exp.empty() ? nullptr : parse_relexp(inline_or_file(sim_exp));
      SiteSpecs specs;
      const SiteSpecs* sp = nullptr;
      if (!sim_couplings.empty()) {
        specs = specs_from_file(sim_couplings);
        sp = &specs;
      }
      SimReport rep = coupled_simulate(cs, sim_trials, g.seed, E, sp,
                                       sim_trace);
      const SimStats& st = rep.stats;
      bool has_bound = !rep.bound.is_inf();
      bool ok = !has_bound ||
                st.mean + 3 * st.stderr_ <= rep.bound.to_double();
      Json j = json_report_head("simulate");
      j["case"] = cs.name;
      j["stats"] = json_sim_stats(st);
      j["bound"] = json_ext(rep.bound);
      j["ok"] = ok;
      if (rep.trace) {
        Json tr = Json::array();
        for (size_t i = 0; i < rep.trace->dists.size(); ++i)
          tr.push_back(to_double(rep.trace->dists[i]));
        j["trace_distances"] = tr;
      }
      if (fmt == Format::Csv) {
        CsvRow row;
        row.case_name = cs.name;
        row.N = cs.params.N;
        row.K = cs.discrete ? cs.params.K : cs.params.T;
        row.bound = csv_ext(rep.bound);
        row.trials = std::to_string(st.trials);
        row.mean = std::to_string(st.mean);
        row.ci_lo = std::to_string(st.ci_lo);
        row.ci_hi = std::to_string(st.ci_hi);
        row.seed = std::to_string(st.seed);
        std::cout << kCsvHeader << "\n" << row.str() << "\n";
      } else {
        emit_kv(fmt, j,
                {{"trials", std::to_string(st.trials)},
                 {"seed", std::to_string(st.seed)},
                 {"mean", to_string(st.mean_exact) + " (" +
                              std::to_string(st.mean) + ")"},
                 {"95% ci", "[" + std::to_string(st.ci_lo) + ", " +
                                std::to_string(st.ci_hi) + "]"},
                 {"bound", ext_str(rep.bound)},
                 {"verdict", ok ? "holds" : "fails"}});
      }
      return ok ? 0 : 1;
    }

    // ---- cases ------------------------------------------------------------
    if (*cases) {
      if (!cases_name.empty()) {
        CaseStudy cs = make_case(cases_name, CaseParams{});
        Json j = json_report_head("case");
        j["name"] = cs.name;
        j["summary"] = cs.summary;
        j["discrete"] = cs.discrete;
        j["async"] = cs.async;
        j["bound"] = json_ext(cs.bound);
        Json consts = Json::object();
        for (const auto& [k, v] : cs.constants) consts[k] = json_rat(v);
        j["constants"] = consts;
        if (cs.discrete) j["source"] = cs.source;
        if (fmt == Format::Json) {
          std::cout << j.dump(2) << "\n";
        } else {
          std::cout << cs.name << ": " << cs.summary << "\n";
          std::cout << "default bound: " << ext_str(cs.bound) << "\n";
          for (const auto& [k, v] : cs.constants)
            std::cout << k << " = " << to_string(v) << "\n";
          if (cs.discrete) std::cout << "\n" << cs.source;
        }
        return 0;
      }
      Json jr = Json::array();
      for (const auto& name : case_names()) {
        CaseStudy cs = make_case(name, CaseParams{});
        jr.push_back({{"name", cs.name}, {"summary", cs.summary}});
        if (fmt != Format::Json)
          std::cout << cs.name << "\t" << cs.summary << "\n";
      }
      if (fmt == Format::Json) {
        Json j = json_report_head("cases");
        j["cases"] = jr;
        std::cout << j.dump(2) << "\n";
      }
      return 0;
    }
  } catch (const SemanticsError& e) {
    std::cerr << "inconclusive: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
