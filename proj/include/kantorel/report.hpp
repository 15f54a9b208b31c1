#pragma once

#include <string>

#include <json.hpp>

#include "kantorel/casebook.hpp"
#include "kantorel/rpe.hpp"
#include "kantorel/transport.hpp"
#include "kantorel/wpe.hpp"

namespace kantorel {

using Json = nlohmann::json;

/// Version of the JSON report layout; bumped on breaking changes.
inline constexpr int kReportSchemaVersion = 1;

inline Json json_rat(const Rat& q) {
  return Json{{"fraction", to_string(q)}, {"float", to_double(q)}};
}

inline Json json_ext(const ExtRat& v) {
  if (v.is_inf()) return Json{{"fraction", "inf"}, {"float", nullptr}};
  return json_rat(v.value());
}

inline Json json_value(const Value& v) { return v.str(); }

inline Json json_state(const State& s) {
  Json j = Json::object();
  for (const auto& [k, v] : s.vars) j[k] = v.str();
  return j;
}

inline Json json_dist(const SubDist& mu) {
  Json rows = Json::array();
  for (const auto& [s, p] : mu.entries())
    rows.push_back({{"state", json_state(s)}, {"prob", json_rat(p)}});
  return Json{{"mass", json_rat(mu.mass())}, {"support", rows}};
}

inline Json json_value_dist(const ValueDist& mu) {
  Json rows = Json::array();
  for (const auto& [v, p] : mu.entries())
    rows.push_back({{"value", v.str()}, {"prob", json_rat(p)}});
  return Json{{"mass", json_rat(mu.mass())}, {"support", rows}};
}

template <typename K>
Json json_plan(const JointDist<K>& plan) {
  Json rows = Json::array();
  for (const auto& [ab, p] : plan.entries())
    rows.push_back({{"left", ab.first.str()},
                    {"right", ab.second.str()},
                    {"prob", json_rat(p)}});
  return rows;
}

inline Json json_report_head(const std::string& kind) {
  return Json{{"schema_version", kReportSchemaVersion}, {"kind", kind}};
}

inline Json json_violation(const PairViolation& v) {
  return Json{{"which", v.which},
              {"state1", json_state(v.s1)},
              {"state2", json_state(v.s2)},
              {"lhs", json_ext(v.lhs)},
              {"rhs", json_ext(v.rhs)}};
}

inline Json json_invariant_report(const InvariantReport& rep) {
  Json j = json_report_head("invariant");
  j["ok"] = rep.ok;
  j["exact"] = rep.exact;
  j["pairs_checked"] = rep.pairs_checked;
  Json vs = Json::array();
  for (const auto& v : rep.violations) vs.push_back(json_violation(v));
  j["violations"] = vs;
  return j;
}

inline Json json_omega_report(const OmegaReport& rep) {
  Json j = json_report_head("omega-invariant");
  j["ok"] = rep.ok;
  j["depth"] = rep.depth;
  j["states_checked"] = rep.states_checked;
  Json vs = Json::array();
  for (const auto& v : rep.violations)
    vs.push_back({{"which", v.which},
                  {"n", v.n},
                  {"state", json_state(v.state)},
                  {"lhs", json_ext(v.lhs)},
                  {"rhs", json_ext(v.rhs)}});
  j["violations"] = vs;
  return j;
}

inline Json json_sim_stats(const SimStats& st) {
  return Json{{"trials", st.trials},
              {"seed", st.seed},
              {"mean", st.mean},
              {"mean_fraction", to_string(st.mean_exact)},
              {"stddev", st.stddev},
              {"stderr", st.stderr_},
              {"ci_lo", st.ci_lo},
              {"ci_hi", st.ci_hi},
              {"all_zero", st.all_zero}};
}

inline Json json_mix_row(const MixRow& r) {
  Json j{{"K", r.K}, {"bound", json_ext(r.bound)}};
  if (r.trials > 0) {
    j["trials"] = r.trials;
    j["tv_est"] = r.tv_est;
    j["ci_lo"] = r.ci_lo;
    j["ci_hi"] = r.ci_hi;
  } else {
    j["tv_exact"] = json_ext(r.tv_exact);
    j["tv_uniform"] = json_ext(r.tv_uniform);
  }
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline const char* kCsvHeader =
    "case,N,K,tv_exact,bound,tv_uniform,trials,mean,ci_lo,ci_hi,seed";

inline std::string csv_ext(const ExtRat& v) {
  return v.is_inf() ? "inf" : std::to_string(v.to_double());
}

/// One row in the shared CSV layout; fields that do not apply stay empty.
struct CsvRow {
  std::string case_name;
  long N = -1, K = -1;
  std::string tv_exact, bound, tv_uniform, trials, mean, ci_lo, ci_hi, seed;

  std::string str() const {
    auto num = [](long v) { return v < 0 ? std::string() : std::to_string(v); };
    std::string out;
    for (const std::string& f :
         {csv_escape(case_name), num(N), num(K), tv_exact, bound, tv_uniform,
          trials, mean, ci_lo, ci_hi, seed}) {
      if (!out.empty()) out += ',';
      out += f;
    }
    return out;
  }
};

inline CsvRow csv_mix_row(const std::string& case_name, long N,
                          const MixRow& r, uint64_t seed) {
  CsvRow row;
  row.case_name = case_name;
  row.N = N;
  row.K = r.K;
  row.bound = csv_ext(r.bound);
  if (r.trials > 0) {
    row.trials = std::to_string(r.trials);
    row.mean = std::to_string(r.tv_est);
    row.ci_lo = std::to_string(r.ci_lo);
    row.ci_hi = std::to_string(r.ci_hi);
    row.seed = std::to_string(seed);
  } else {
    row.tv_exact = csv_ext(r.tv_exact);
    row.tv_uniform = csv_ext(r.tv_uniform);
  }
  return row;
}

}  // namespace kantorel
