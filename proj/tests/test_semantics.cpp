#include <doctest.h>

#include "kantorel/casebook.hpp"
#include "kantorel/parser.hpp"
#include "kantorel/semantics.hpp"

using namespace kantorel;

namespace {

State st(std::initializer_list<std::pair<std::string, Value>> kv) {
  State s;
  for (const auto& [k, v] : kv) s.set(k, v);
  return s;
}

Rat binom_pmf(long n, long k, const Rat& p) {
  Rat c = 1;
  for (long i = 0; i < k; ++i) c = c * Rat(n - i) / Rat(i + 1);
  Rat q = 1 - p;
  Rat out = c;
  for (long i = 0; i < k; ++i) out *= p;
  for (long i = 0; i < n - k; ++i) out *= q;
  return out;
}

}  // namespace

TEST_CASE("distribution monad laws on small instances") {
  ValueDist unit;
  unit.add(Value(3L), Rat(1));
  auto f = [](const Value& v) {
    ValueDist d;
    d.add(Value(v.as_int() + 1), Rat(1, 2));
    d.add(Value(v.as_int() - 1), Rat(1, 2));
    return d;
  };
  // left identity: unit(x) >>= f  ==  f(x)
  CHECK(unit.bind(f).entries() == f(Value(3L)).entries());
  // right identity: m >>= unit  ==  m
  ValueDist m = f(Value(0L));
  auto ret = [](const Value& v) {
    ValueDist d;
    d.add(v, Rat(1));
    return d;
  };
  CHECK(m.bind(ret).entries() == m.entries());
  // associativity
  auto g = [](const Value& v) {
    ValueDist d;
    d.add(Value(v.as_int() * 2), Rat(1, 3));
    d.add(Value(0L), Rat(2, 3));
    return d;
  };
  ValueDist lhs = m.bind(f).bind(g);
  ValueDist rhs = m.bind(
      [&](const Value& v) { return f(v).bind(g); });
  CHECK(lhs.entries() == rhs.entries());
}

TEST_CASE("one step of the hypercube walk from the origin") {
  CaseParams pr;
  pr.N = 2;
  pr.K = 1;
  CaseStudy cs = make_case("hwalk", pr);
  ValueDist pos = marginal(denote(cs.program.body, cs.init1), "pos");
  REQUIRE(pos.entries().size() == 3);
  CHECK(pos.prob(Value(std::vector<Int>{0, 0})) == Rat(1, 3));
  CHECK(pos.prob(Value(std::vector<Int>{1, 0})) == Rat(1, 3));
  CHECK(pos.prob(Value(std::vector<Int>{0, 1})) == Rat(1, 3));
}

TEST_CASE("binomial counter matches the closed-form pmf") {
  CaseParams pr;
  pr.N = 5;
  pr.p = Rat(1, 3);
  CaseStudy cs = make_case("binom", pr);
  ValueDist k = marginal(denote(cs.program.body, cs.init1), "k");
  for (long i = 0; i <= 5; ++i)
    CHECK(k.prob(Value(i)) == binom_pmf(5, i, Rat(1, 3)));
}

TEST_CASE("empty trial count gives a point mass at zero") {
  CaseParams pr;
  pr.N = 0;
  CaseStudy cs = make_case("binom", pr);
  ValueDist k = marginal(denote(cs.program.body, cs.init1), "k");
  CHECK(k.entries().size() == 1);
  CHECK(k.prob(Value(0L)) == Rat(1));
}

TEST_CASE("approximants grow monotonically toward the output") {
  Program p = parse_program(
      "program geo\nvar x : int;\nvar stop : int;\n\n"
      "stop := 0;\nwhile stop == 0 {\n  x := x + 1;\n"
      "  stop :~ uniform(0 .. 1);\n}\n");
  State s0 = st({{"x", Value(0L)}, {"stop", Value(0L)}});
  Rat prev_mass = 0;
  for (long n = 1; n <= 6; ++n) {
    SubDist d = denote_approximant(p.body, s0, n);
    CHECK(d.mass() >= prev_mass);
    prev_mass = d.mass();
  }
  // n unrollings allow n - 1 coin flips: mass 1 - 2^-(n-1)
  CHECK(prev_mass == Rat(31, 32));
}

TEST_CASE("unbounded loops need approximate mode") {
  Program p = parse_program(
      "program geo\nvar stop : int;\n\nstop := 0;\n"
      "while stop == 0 {\n  stop :~ uniform(0 .. 1);\n}\n");
  State s0 = st({{"stop", Value(0L)}});
  CHECK_FALSE(all_loops_bounded(p.body));
  CHECK_THROWS_AS(denote(p.body, s0), SemanticsError);
  LoopConfig cfg;
  cfg.mode = LoopMode::Approximate;
  cfg.epsilon = 1e-9;
  DenoteResult r = denote_full(p.body, s0, cfg);
  CHECK(to_double(r.residual) <= 1e-9);
  CHECK(r.dist.prob(st({{"stop", Value(1L)}})) + r.residual == Rat(1));
}

TEST_CASE("counter loops are recognized as bounded") {
  CaseStudy cs = make_case("hwalk", CaseParams{});
  CHECK(all_loops_bounded(cs.program.body));
  CHECK(is_bounded_loop(*cs.loop()));
}

TEST_CASE("denotation weights sum to at most one") {
  for (const char* name : {"hwalk", "rtop", "rtrans", "riffle"}) {
    CaseParams pr;
    pr.N = 3;
    pr.K = 2;
    CaseStudy cs = make_case(name, pr);
    SubDist d = denote(cs.program.body, cs.init1);
    CHECK(d.mass() == Rat(1));
    for (const auto& [t, p] : d.entries()) CHECK(p > 0);
  }
}
