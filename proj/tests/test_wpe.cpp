#include <doctest.h>

#include "kantorel/casebook.hpp"
#include "kantorel/parser.hpp"
#include "kantorel/wpe.hpp"

using namespace kantorel;

namespace {

State st(std::initializer_list<std::pair<std::string, Value>> kv) {
  State s;
  for (const auto& [k, v] : kv) s.set(k, v);
  return s;
}

}  // namespace

TEST_CASE("wpe of a single coin flip") {
  Program p = parse_program(
      "program coin\nvar x : bool;\n\nx :~ bernoulli(1/3);\n");
  State s = st({{"x", Value(false)}});
  CHECK(wpe(p.body, parse_relexp("[x<1> == true]"), s) == ExtRat(Rat(1, 3)));
  CHECK(wpe(p.body, parse_relexp("[x<1> == false]"), s) ==
        ExtRat(Rat(2, 3)));
}

TEST_CASE("wpe is linear in the expectation") {
  CaseParams pr;
  pr.N = 3;
  pr.K = 2;
  CaseStudy cs = make_case("hwalk", pr);
  SExprPtr wH = hwalk_weight(3);
  ExtRat a = wpe(cs.program.body, wH, cs.init2);
  ExtRat b = wpe(cs.program.body, parse_relexp(
                                      "2 * (sum(j, 0, 2, pos[j]) / 3) + 1"),
                 cs.init2);
  CHECK(b == ExtRat(2) * a + ExtRat(1));
}

TEST_CASE("hypercube omega family certifies its limit in both directions") {
  OmegaFamily fam = hwalk_omega_family(3, 3);
  CaseParams pr;
  pr.N = 3;
  pr.K = 3;
  CaseStudy cs = make_case("hwalk", pr);
  OmegaReport up = check_omega_invariant(*cs.loop(), fam.f, fam.family,
                                         fam.states, 8, true, fam.limit);
  OmegaReport lo = check_omega_invariant(*cs.loop(), fam.f, fam.family,
                                         fam.states, 8, false, fam.limit);
  CHECK(up.ok);
  CHECK(lo.ok);
  CHECK(up.states_checked == fam.states.size());

  // the certified limit is the exact expected weight from every start
  for (const State& s : cs.initial_states) {
    ExtRat claimed = eval_unary(fam.limit, s);
    ExtRat actual = wpe(cs.program.body, fam.f, s);
    CHECK(claimed == actual);
  }
}

TEST_CASE("a perturbed family is rejected with a witness") {
  OmegaFamily fam = hwalk_omega_family(3, 3);
  IndexedExp wrong;
  wrong.index = "n";
  // inflate the additive part: the step inequality must break
  wrong.body = parse_relexp(
      "[3 - n <= k] * (2 * (sum(i, 0, monus(3, k) - 1, pow(1/2, i)) / 4) + "
      "pow(1/2, monus(3, k)) * (sum(j, 0, 2, pos[j]) / 3))");
  CaseParams pr;
  pr.N = 3;
  pr.K = 3;
  CaseStudy cs = make_case("hwalk", pr);
  OmegaReport lo = check_omega_invariant(*cs.loop(), fam.f, wrong, fam.states,
                                         8, false, fam.limit);
  CHECK_FALSE(lo.ok);
  CHECK_FALSE(lo.violations.empty());
}

TEST_CASE("witness functions certify tv lower bounds") {
  SExprPtr f = hwalk_weight(3);
  for (long K = 1; K <= 4; ++K) {
    CaseParams pr;
    pr.N = 3;
    pr.K = K;
    CaseStudy cs = make_case("hwalk", pr);
    TvLowerBound lb = tv_lower_bound(cs.program.body, cs.init1, cs.init2, f);
    REQUIRE(lb.range_ok);
    CHECK(lb.bound == ExtRat::pow(ExtRat(Rat(1, 2)), Int(K)));
    Rat exact = tv(marginal(denote(cs.program.body, cs.init1), "pos"),
                   marginal(denote(cs.program.body, cs.init2), "pos"));
    CHECK(lb.bound <= ExtRat(exact));
  }
}

TEST_CASE("witnesses outside the unit interval are rejected") {
  Program p = parse_program(
      "program t\nvar x : int;\n\nx :~ uniform(0 .. 3);\n");
  State s1 = st({{"x", Value(0L)}});
  State s2 = st({{"x", Value(1L)}});
  TvLowerBound lb = tv_lower_bound(p.body, s1, s2, parse_relexp("x<1>"));
  CHECK_FALSE(lb.range_ok);
  CHECK(lb.range_violation.has_value());
  CHECK(lb.bound == ExtRat(0));
}

TEST_CASE("negative indexed expectations are rejected") {
  IndexedExp bad;
  bad.index = "n";
  bad.body = parse_relexp("k - 10");
  CHECK_THROWS_AS(bad.at(Int(0), st({{"k", Value(0L)}})), EvalError);
}
