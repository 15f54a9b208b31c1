// Acceptance gate: one pass/fail line per criterion. Exit 0 iff all pass.

#include <iostream>
#include <sstream>
#include <vector>

#include "kantorel/casebook.hpp"

using namespace kantorel;

namespace {

int g_failures = 0;

void report(int idx, bool ok, const std::string& what) {
  std::cout << "criterion " << idx << ": " << (ok ? "PASS" : "FAIL") << " - "
            << what << std::endl;
  if (!ok) ++g_failures;
}

State mk_state(std::initializer_list<std::pair<std::string, Value>> kv) {
  State s;
  for (const auto& [k, v] : kv) s.set(k, v);
  return s;
}

// Small random programs over x, y (z is never written, so it can serve as
// the constant expectation in the Const rule).
struct ProgGen {
  Prng g;
  explicit ProgGen(uint64_t seed) : g(seed) {}

  long ri(long n) { return static_cast<long>(g.next_below(n)); }
  std::string var() { return ri(2) ? "x" : "y"; }

  std::string rhs() {
    switch (ri(5)) {
      case 0: return var();
      case 1: return std::to_string(ri(4));
      case 2: return var() + " + " + std::to_string(1 + ri(3));
      case 3: return var() + " - " + std::to_string(1 + ri(2));
      default: return var() + " + " + var();
    }
  }

  std::string guard() {
    switch (ri(4)) {
      case 0: return "x < y";
      case 1: return "x == y";
      case 2: return "x <= 1";
      default: return "y > 0";
    }
  }

  std::string dist() {
    switch (ri(3)) {
      case 0: return "uniform(0 .. 2)";
      case 1: return "uniform(0 .. 1)";
      default: return "uniform{0, 2}";
    }
  }

  std::string stmt(int depth, const std::string& pad) {
    long pick = ri(depth > 0 ? 4 : 3);
    switch (pick) {
      case 0: return pad + var() + " := " + rhs() + ";\n";
      case 1: return pad + var() + " :~ " + dist() + ";\n";
      case 2: return pad + "skip;\n";
      default: {
        std::string out = pad + "if " + guard() + " {\n";
        out += stmt(depth - 1, pad + "  ");
        out += pad + "} else {\n";
        out += stmt(depth - 1, pad + "  ");
        out += pad + "}\n";
        return out;
      }
    }
  }

  Program loop_free() {
    std::string src =
        "program rnd\nvar x : int;\nvar y : int;\nvar z : int;\n\n";
    long n = 2 + ri(3);
    for (long i = 0; i < n; ++i) src += stmt(2, "");
    return parse_program(src);
  }

  Program bounded_loop() {
    std::string src =
        "program rnd\nvar x : int;\nvar y : int;\nvar z : int;\n"
        "var k : int;\n\nk := 0;\nwhile k < 2 {\n";
    long n = 1 + ri(2);
    for (long i = 0; i < n; ++i) src += stmt(1, "  ");
    src += "  k := k + 1;\n}\n";
    return parse_program(src);
  }

  SExprPtr rel_exp() {
    switch (ri(4)) {
      case 0: return parse_relexp("[x<1> != x<2>]");
      case 1: return parse_relexp("[x<1> != x<2>] + [y<1> != y<2>]");
      case 2:
        return parse_relexp("monus(x<1>, x<2>) + monus(x<2>, x<1>)");
      default: return parse_relexp("2 * [y<1> != y<2>]");
    }
  }

  std::pair<State, State> state_pair(bool with_k) {
    auto one = [&] {
      State s = mk_state({{"x", Value(ri(3))},
                          {"y", Value(ri(3))},
                          {"z", Value(ri(3))}});
      if (with_k) s.set("k", Value(0L));
      return s;
    };
    return {one(), one()};
  }
};

// ---------------------------------------------------------------------------

void criterion_1() {
  const std::string decls =
      "var b : bool;\nvar x : bool;\nvar y : bool;\n\n";
  Program c = parse_program(
      "program c\n" + decls +
      "if b { x :~ bernoulli(1/2); } else { y :~ bernoulli(1/2); }\n");
  Program cp = parse_program(
      "program cp\n" + decls +
      "if b { y :~ bernoulli(1/2); } else { x :~ bernoulli(1/2); }\n");
  SExprPtr E = parse_relexp("[x<1> != x<2> || y<1> != y<2>]");
  State s1 = mk_state({{"b", Value(true)}, {"x", Value(false)},
                       {"y", Value(false)}});
  State s2 = mk_state({{"b", Value(false)}, {"x", Value(false)},
                       {"y", Value(false)}});
  CmdPtr seq = mk_seq(c.body, cp.body);
  ExtRat whole = kantorovich_pre(seq, E, s1, s2).value;
  RelFn inner = [&](const State& a, const State& b) {
    return kantorovich_pre(cp.body, relfn(E), a, b).value;
  };
  ExtRat nested = kantorovich_pre(c.body, inner, s1, s2).value;
  report(1, whole == ExtRat(0) && nested == ExtRat(Rat(1, 2)),
         "exact pre-distance is not compositional: whole=" + whole.str() +
             ", nested=" + nested.str());
}

void criterion_2() {
  Prng g(42);
  bool ok = true;
  auto cost = [](const Value& a, const Value& b) {
    return ExtRat(a == b ? 0 : 1);
  };
  for (int t = 0; t < 200 && ok; ++t) {
    long n = 1 + g.next_below(8);
    auto make = [&] {
      ValueDist d;
      std::vector<long> w(n);
      long total = 0;
      for (long i = 0; i < n; ++i) total += w[i] = 1 + g.next_below(9);
      for (long i = 0; i < n; ++i)
        d.add(Value(static_cast<long>(g.next_below(10))), Rat(w[i], total));
      return d;
    };
    ValueDist mu = make(), nu = make();
    if (ExtRat(tv(mu, nu)) != kantorovich<Value>(mu, nu, cost).value)
      ok = false;
  }
  report(2, ok, "Kantorovich with the discrete metric equals tv on 200 "
                "random pairs");
}

void criterion_3() {
  bool curve_ok = true;
  for (long K = 0; K <= 8; ++K) {
    CaseParams pr;
    pr.N = 3;
    pr.K = K;
    CaseStudy cs = make_case("hwalk", pr);
    Rat t = tv(marginal(denote(cs.program.body, cs.init1), cs.state_var),
               marginal(denote(cs.program.body, cs.init2), cs.state_var));
    if (!(ExtRat(t) <= cs.bound)) curve_ok = false;
  }
  CaseParams pr;
  pr.N = 3;
  pr.K = 4;
  CaseStudy cs = make_case("hwalk", pr);
  InvariantReport rep =
      check_invariant(*cs.loop(), cs.distance, cs.invariant,
                      cs.invariant_pairs, {}, &cs.specs);
  report(3, curve_ok && rep.ok,
         "hypercube tv <= N(1-2/(N+1))^K for K in 0..8 and the invariant "
         "certifies on " + std::to_string(rep.pairs_checked) + " pairs");
}

void criterion_4() {
  bool lb_ok = true;
  SExprPtr f = hwalk_weight(3);
  for (long K = 1; K <= 5; ++K) {
    CaseParams pr;
    pr.N = 3;
    pr.K = K;
    CaseStudy cs = make_case("hwalk", pr);
    TvLowerBound lb =
        tv_lower_bound(cs.program.body, cs.init1, cs.init2, f);
    ExtRat expect = ExtRat::pow(ExtRat(Rat(1, 2)), Int(K));
    Rat exact_tv =
        tv(marginal(denote(cs.program.body, cs.init1), cs.state_var),
           marginal(denote(cs.program.body, cs.init2), cs.state_var));
    if (!lb.range_ok || lb.bound != expect || !(lb.bound <= ExtRat(exact_tv)))
      lb_ok = false;
  }
  OmegaFamily fam = hwalk_omega_family(3, 4);
  CaseParams pr;
  pr.N = 3;
  pr.K = 4;
  CaseStudy cs = make_case("hwalk", pr);
  OmegaReport up = check_omega_invariant(*cs.loop(), fam.f, fam.family,
                                         fam.states, 12, true, fam.limit);
  OmegaReport lo = check_omega_invariant(*cs.loop(), fam.f, fam.family,
                                         fam.states, 12, false, fam.limit);
  report(4, lb_ok && up.ok && lo.ok,
         "hypercube witness lower bound ((N-1)/(N+1))^K is exact and the "
         "omega family passes both checks at depth 12");
}

void criterion_5() {
  bool curve_ok = true;
  ExtRat tvu_at_12;
  for (long K = 0; K <= 12; ++K) {
    CaseParams pr;
    pr.N = 4;
    pr.K = K;
    CaseStudy cs = make_case("rtop", pr);
    MixRow row = mixing_point_exact(cs);
    if (!(row.tv_exact <= row.bound)) curve_ok = false;
    if (K == 12) tvu_at_12 = row.tv_uniform;
  }
  CaseParams pr;
  pr.N = 4;
  pr.K = 12;
  CaseStudy cs = make_case("rtop", pr);
  InvariantReport rep =
      check_invariant(*cs.loop(), cs.distance, cs.invariant,
                      cs.invariant_pairs, {}, &cs.specs);
  report(5, curve_ok && rep.ok && tvu_at_12 <= cs.bound,
         "random-to-top worst-pair tv <= N((N-1)/N)^K for K in 0..12, the "
         "d_M invariant certifies, and tv to uniform at K=12 is within the "
         "bound");
}

void criterion_6() {
  bool curve_ok = true;
  for (long K = 0; K <= 10; ++K) {
    CaseParams pr;
    pr.N = 3;
    pr.K = K;
    CaseStudy cs = make_case("rtrans", pr);
    MixRow row = mixing_point_exact(cs);
    if (!(row.tv_exact <= row.bound)) curve_ok = false;
  }
  CaseParams pr;
  pr.N = 3;
  pr.K = 10;
  CaseStudy cs = make_case("rtrans", pr);
  InvariantReport rep =
      check_invariant(*cs.loop(), cs.distance, cs.invariant,
                      cs.invariant_pairs, {}, &cs.specs);
  report(6, curve_ok && rep.ok,
         "random transpositions worst-pair tv <= N(1-1/N^2)^K for K in "
         "0..10 and the two-coupling invariant certifies");
}

void criterion_7() {
  // One riffle step halves d_M in expectation, exhaustively at N=4.
  auto perms = detail::all_permutations(4);
  auto bvecs = detail::all_bitvectors(4);
  bool halving_ok = true;
  for (const auto& d1 : perms) {
    for (const auto& d2 : perms) {
      Rat before = block_distance(d1, d2);
      Rat sum = 0;
      for (const auto& b : bvecs) {
        // same bit for the same card on both sides
        std::vector<Int> b2(4);
        for (long j = 0; j < 4; ++j)
          b2[j] = b[inv_perm(d1, d2[j]).convert_to<long>()];
        auto step = [](const std::vector<Int>& d, const std::vector<Int>& bb) {
          std::vector<Int> out = select_bits(d, bb);
          for (const Int& v : select_bits(d, neg_bits(bb))) out.push_back(v);
          return out;
        };
        sum += block_distance(step(d1, b), step(d2, b2));
      }
      if (!(sum / 16 <= before / 2)) halving_ok = false;
    }
  }
  bool curve_ok = true;
  for (long K = 0; K <= 8; ++K) {
    CaseParams pr;
    pr.N = 4;
    pr.K = K;
    CaseStudy cs = make_case("riffle", pr);
    MixRow row = mixing_point_exact(cs);
    if (!(row.tv_exact <= row.bound)) curve_ok = false;
  }
  report(7, halving_ok && curve_ok,
         "riffle halves d_M in expectation over all deck pairs and "
         "bitvectors, and tv <= N^2(1/2)^K for K in 0..8");
}

void criterion_8() {
  bool ok = true;
  struct Inst { long n1, n2; Rat p; };
  for (const Inst& in : {Inst{2, 4, Rat(1, 2)}, Inst{3, 5, Rat(1, 3)},
                         Inst{2, 4, Rat(1, 3)}, Inst{3, 5, Rat(1, 2)}}) {
    CaseParams pr;
    pr.N = in.n1;
    pr.N2 = in.n2;
    pr.p = in.p;
    CaseStudy cs = make_case("binom", pr);
    AsyncReport rep =
        check_async_invariant(*cs.loop(), cs.distance, cs.invariant,
                              cs.invariant_pairs, {}, &cs.specs);
    if (!rep.ok || !rep.bounded) ok = false;
    SubDist m1 = denote(cs.program.body, cs.init1);
    SubDist m2 = denote(cs.program.body, cs.init2);
    ExtRat d = kantorovich<State>(m1, m2, relfn(cs.distance)).value;
    ExtRat expect = ExtRat(in.p * Rat(in.n2 - in.n1));
    if (d != expect) ok = false;
  }
  report(8, ok,
         "asynchronous binomial invariant certifies and the exact "
         "Kantorovich distance equals p|N1-N2|");
}

void criterion_9() {
  bool ok = true;
  for (long N = 1; N <= 5; ++N) {
    CaseParams pr;
    pr.N = N;
    CaseStudy cs = make_case("td0", pr);
    SimReport rep = coupled_simulate(cs, 10000, 2026);
    if (!(rep.stats.mean + 3 * rep.stats.stderr_ <= rep.bound.to_double()))
      ok = false;
  }
  report(9, ok,
         "TD(0) coupled simulation stays within k^N * ||V1-V2||_inf "
         "(mean + 3 SE, 10^4 trials, N in 1..5)");
}

void criterion_10() {
  CaseParams pr;
  CaseStudy cs = make_case("sgd", pr);
  SimReport rep = coupled_simulate(cs, 10000, 2026);
  report(10,
         rep.stats.mean + 3 * rep.stats.stderr_ <= rep.bound.to_double(),
         "SGD coupled simulation stays within gamma*L (mean + 3 SE, 10^4 "
         "trials)");
}

void criterion_11() {
  ProgGen gen(11);
  bool ok = true;
  size_t checked = 0;
  auto probe = [&](const Program& prog, bool with_k) {
    SExprPtr E = gen.rel_exp();
    auto [s1, s2] = gen.state_pair(with_k);
    RpeResult upper = rpe(prog.body, relfn(E), s1, s2);
    RpeResult sem = kantorovich_pre(prog.body, relfn(E), s1, s2);
    ++checked;
    if (!(sem.value <= upper.value)) ok = false;
  };
  for (int t = 0; t < 100; ++t) probe(gen.loop_free(), false);
  for (int t = 0; t < 20; ++t) probe(gen.bounded_loop(), true);
  report(11, ok,
         "semantic distance <= calculus pre-expectation on 100 loop-free "
         "and 20 bounded-loop random programs");
}

void criterion_12() {
  ProgGen gen(12);
  bool ok = true;
  for (Fig3Rule rule : {Fig3Rule::Mono, Fig3Rule::Const, Fig3Rule::SupAdd,
                        Fig3Rule::Scale}) {
    for (int t = 0; t < 100; ++t) {
      Fig3Instance inst;
      inst.c = gen.loop_free().body;
      inst.E = gen.rel_exp();
      switch (rule) {
        case Fig3Rule::Mono: {
          // premise E <= E2 by construction
          std::ostringstream os;
          inst.E2 = parse_relexp("[x<1> != x<2>] + [y<1> != y<2>] + "
                                 "monus(x<1>, x<2>) + monus(x<2>, x<1>) + "
                                 "2 * [y<1> != y<2>]");
          break;
        }
        case Fig3Rule::Const:
        case Fig3Rule::SupAdd:
          inst.E2 = parse_relexp("monus(z<1>, z<2>) + monus(z<2>, z<1>)");
          break;
        case Fig3Rule::Scale:
          inst.scale = Rat(1 + gen.ri(4), 1 + gen.ri(2));
          break;
      }
      auto pair = gen.state_pair(false);
      InvariantReport rep = check_fig3_property(rule, inst, {pair});
      if (!rep.ok) ok = false;
    }
  }
  // sampling-rule bounds dominate the optimal coupling value
  long applied = 0;
  for (int t = 0; t < 100; ++t) {
    Program prog = parse_program(
        "program s\nvar x : int;\nvar y : int;\nvar z : int;\n\n"
        "x :~ " + gen.dist() + ";\n");
    const Command* samp = prog.body.get();
    while (samp->kind == Command::Kind::Seq) samp = samp->c1.get();
    SExprPtr E = gen.rel_exp();
    auto [s1, s2] = gen.state_pair(false);
    for (const CouplingSpec& spec :
         {CouplingSpec::identity(), CouplingSpec::independent()}) {
      SampBound sb = rpe_sample_bound(samp->var, samp->dist, E, s1, s2, spec);
      if (!sb.applies) continue;
      ++applied;
      if (!(sb.optimal <= sb.bound)) ok = false;
    }
  }
  if (applied < 100) ok = false;
  report(12, ok,
         "Mono/Const/SupAdd/Scale hold on 100 instances each and sampling "
         "bounds dominate the optimal value (" + std::to_string(applied) +
             " sites probed)");
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  if (g_failures) {
    std::cout << g_failures << " criteria failed" << std::endl;
    return 1;
  }
  std::cout << "all 12 criteria passed" << std::endl;
  return 0;
}
