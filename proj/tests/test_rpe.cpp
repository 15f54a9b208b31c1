#include <doctest.h>

#include "kantorel/casebook.hpp"
#include "kantorel/parser.hpp"
#include "kantorel/rpe.hpp"

using namespace kantorel;

namespace {

State st(std::initializer_list<std::pair<std::string, Value>> kv) {
  State s;
  for (const auto& [k, v] : kv) s.set(k, v);
  return s;
}

Program prog(const std::string& body,
             const std::string& decls = "var x : int;\nvar y : int;\n") {
  return parse_program("program t\n" + decls + "\n" + body);
}

}  // namespace

TEST_CASE("unit rules of the pre-expectation transformer") {
  SExprPtr E = parse_relexp("[x<1> != x<2>] + [y<1> != y<2>]");
  State s1 = st({{"x", Value(0L)}, {"y", Value(0L)}});
  State s2 = st({{"x", Value(1L)}, {"y", Value(0L)}});

  SUBCASE("skip is the identity") {
    CHECK(rpe(prog("skip;\n").body, relfn(E), s1, s2).value == ExtRat(1));
  }
  SUBCASE("assignment substitutes") {
    // both sides write x := y, erasing the difference in x
    CHECK(rpe(prog("x := y;\n").body, relfn(E), s1, s2).value == ExtRat(0));
  }
  SUBCASE("sampling takes the optimal coupling") {
    // identical uniform draws couple perfectly
    CHECK(rpe(prog("x :~ uniform(0 .. 3);\n").body, relfn(E), s1, s2).value ==
          ExtRat(0));
  }
  SUBCASE("sequencing composes backwards") {
    ExtRat nested = rpe(prog("x := x + 1;\n").body,
                        [&](const State& a, const State& b) {
                          return rpe(prog("y := x;\n").body, relfn(E), a, b)
                              .value;
                        },
                        s1, s2)
                        .value;
    ExtRat whole =
        rpe(prog("x := x + 1;\ny := x;\n").body, relfn(E), s1, s2).value;
    CHECK(nested == whole);
  }
  SUBCASE("conditionals charge infinity on guard disagreement") {
    CmdPtr c = prog("if x == 0 { y := 1; } else { y := 2; }\n").body;
    CHECK(rpe(c, relfn(E), s1, s2).value.is_inf());
    CHECK(rpe(c, relfn(E), s1, s1).value == ExtRat(0));
  }
}

TEST_CASE("per-site coupling choices override the optimal plan") {
  Program p = prog("x :~ uniform(0 .. 1);\n");
  SExprPtr E = parse_relexp("[x<1> == x<2>]");  // rewarded for disagreeing
  State s = st({{"x", Value(0L)}, {"y", Value(0L)}});
  // optimal coupling can avoid the diagonal entirely
  CHECK(rpe(p.body, relfn(E), s, s).value == ExtRat(0));
  // forcing the identity coupling pays full price
  SiteSpecs specs;
  specs[0] = CouplingSpec::identity();
  CHECK(rpe(p.body, relfn(E), s, s, {}, &specs).value == ExtRat(1));
  // independent coupling pays half
  specs[0] = CouplingSpec::independent();
  CHECK(rpe(p.body, relfn(E), s, s, {}, &specs).value == ExtRat(Rat(1, 2)));
}

TEST_CASE("loop rule reaches the fixed point on a bounded chain") {
  CaseParams pr;
  pr.N = 2;
  pr.K = 2;
  CaseStudy cs = make_case("hwalk", pr);
  RpeResult up = rpe(cs.program.body, relfn(cs.distance), cs.init1, cs.init2,
                     {}, &cs.specs);
  RpeResult sem =
      kantorovich_pre(cs.program.body, relfn(cs.distance), cs.init1, cs.init2);
  CHECK(up.exact);
  CHECK(sem.value <= up.value);
}

TEST_CASE("invariant check produces a witness for a rate that is too strong") {
  CaseParams pr;
  pr.N = 2;
  pr.K = 2;
  CaseStudy cs = make_case("hwalk", pr);
  SExprPtr wrong = parse_relexp(
      "[k<1> != k<2>] * inf + [k<1> == k<2>] * dH(pos<1>, pos<2>) * "
      "pow(1/5, monus(2, k<1>))");
  InvariantReport rep = check_invariant(*cs.loop(), cs.distance, wrong,
                                        cs.invariant_pairs, {}, &cs.specs);
  CHECK_FALSE(rep.ok);
  REQUIRE_FALSE(rep.violations.empty());
  const PairViolation& v = rep.violations.front();
  CHECK(v.which == "step");
  CHECK(v.rhs < v.lhs);
}

TEST_CASE("canonical invariants certify at the smallest parameters") {
  for (const char* name : {"hwalk", "rtop", "rtrans", "riffle"}) {
    CaseParams pr;
    pr.N = 3;
    pr.K = 2;
    CaseStudy cs = make_case(name, pr);
    InvariantReport rep = check_invariant(*cs.loop(), cs.distance,
                                          cs.invariant, cs.invariant_pairs,
                                          {}, &cs.specs);
    CHECK(rep.ok);
    CHECK(rep.exact);
  }
}

TEST_CASE("asynchronous rule certifies the binomial invariant") {
  CaseParams pr;
  pr.N = 2;
  pr.N2 = 4;
  pr.p = Rat(1, 2);
  CaseStudy cs = make_case("binom", pr);
  AsyncReport rep = check_async_invariant(*cs.loop(), cs.distance,
                                          cs.invariant, cs.invariant_pairs,
                                          {}, &cs.specs);
  CHECK(rep.ok);
  CHECK(rep.bounded);
  CHECK(rep.pairs_checked == cs.invariant_pairs.size());
}

TEST_CASE("one-sided pre-expectations require bounded loops") {
  Program p = prog(
      "stop := 0;\nwhile stop == 0 {\n  stop :~ uniform(0 .. 1);\n}\n",
      "var stop : int;\n");
  State s = st({{"stop", Value(0L)}});
  SExprPtr E = parse_relexp("[stop<1> == stop<2>]");
  CHECK_THROWS(rpe_left(p.body, relfn(E), s, s));
}

TEST_CASE("sampling bounds dominate the optimal site value") {
  Program p = prog("x :~ uniform(0 .. 2);\n");
  const Command* samp = p.body.get();
  while (samp->kind == Command::Kind::Seq) samp = samp->c1.get();
  SExprPtr E = parse_relexp("monus(x<1>, x<2>) + monus(x<2>, x<1>)");
  State s1 = st({{"x", Value(0L)}, {"y", Value(0L)}});
  State s2 = st({{"x", Value(2L)}, {"y", Value(1L)}});
  for (const CouplingSpec& spec :
       {CouplingSpec::identity(), CouplingSpec::independent(),
        CouplingSpec::optimal()}) {
    SampBound sb = rpe_sample_bound(samp->var, samp->dist, E, s1, s2, spec);
    REQUIRE(sb.applies);
    CHECK(sb.optimal <= sb.bound);
  }
}

TEST_CASE("structural properties hold on a fixed instance") {
  Fig3Instance inst;
  inst.c = prog("x :~ uniform(0 .. 1);\ny := x + 1;\n",
                "var x : int;\nvar y : int;\nvar z : int;\n")
               .body;
  inst.E = parse_relexp("[x<1> != x<2>]");
  inst.E2 = parse_relexp("monus(z<1>, z<2>)");
  inst.scale = Rat(3, 2);
  auto pair = std::make_pair(
      st({{"x", Value(0L)}, {"y", Value(0L)}, {"z", Value(2L)}}),
      st({{"x", Value(1L)}, {"y", Value(0L)}, {"z", Value(0L)}}));
  for (Fig3Rule rule : {Fig3Rule::Const, Fig3Rule::SupAdd, Fig3Rule::Scale})
    CHECK(check_fig3_property(rule, inst, {pair}).ok);
  inst.E2 = parse_relexp("[x<1> != x<2>] + [y<1> != y<2>]");
  CHECK(check_fig3_property(Fig3Rule::Mono, inst, {pair}).ok);
}
