#include <doctest.h>

#include "kantorel/casebook.hpp"

using namespace kantorel;

namespace {

Rat case_tv(const CaseStudy& cs) {
  return tv(marginal(denote(cs.program.body, cs.init1), cs.state_var),
            marginal(denote(cs.program.body, cs.init2), cs.state_var));
}

CaseStudy make(const char* name, long N, long K) {
  CaseParams pr;
  pr.N = N;
  pr.K = K;
  return make_case(name, pr);
}

}  // namespace

TEST_CASE("catalogue lists all eight case studies") {
  CHECK(case_names().size() == 8);
  for (const auto& name : case_names()) {
    CaseStudy cs = make_case(name, CaseParams{});
    CHECK(cs.name == name);
    CHECK_FALSE(cs.summary.empty());
  }
  CHECK_THROWS_AS(make_case("nonesuch", CaseParams{}), CaseError);
  CHECK_THROWS_AS(make_case("hwalk", [] {
                    CaseParams p;
                    p.N = 40;
                    return p;
                  }()),
                  CaseError);
}

TEST_CASE("frozen exact distances") {
  // regression-locked values computed from the exact semantics
  CHECK(case_tv(make("hwalk", 3, 3)) == Rat(1, 4));
  CHECK(case_tv(make("rtop", 3, 3)) == Rat(1, 9));
  CHECK(case_tv(make("rtrans", 3, 3)) == Rat(5, 81));
  CHECK(case_tv(make("riffle", 3, 3)) == Rat(1, 8));
  CHECK(case_tv(make("riffle", 4, 2)) == Rat(9, 16));
}

TEST_CASE("frozen mixing rows") {
  MixRow hw = mixing_point_exact(make("hwalk", 3, 3));
  CHECK(hw.tv_exact == ExtRat(Rat(1, 4)));
  CHECK(hw.tv_uniform == ExtRat(Rat(1, 8)));
  CHECK(hw.bound == ExtRat(Rat(3, 8)));

  MixRow rt = mixing_point_exact(make("rtop", 3, 3));
  CHECK(rt.tv_exact == ExtRat(Rat(1, 9)));
  CHECK(rt.tv_uniform == ExtRat(Rat(1, 18)));

  MixRow rf = mixing_point_exact(make("riffle", 3, 3));
  CHECK(rf.tv_exact == ExtRat(Rat(1, 8)));
  CHECK(rf.tv_uniform == ExtRat(Rat(13, 192)));

  MixRow big = mixing_point_exact(make("rtop", 4, 12));
  CHECK(big.tv_exact == ExtRat(Rat(3071, 2097152)));
  CHECK(big.tv_uniform == ExtRat(Rat(3071, 4194304)));
}

TEST_CASE("analytic bounds sandwich the exact distance") {
  for (const char* name : {"hwalk", "rtop", "rtrans", "riffle"}) {
    for (long K = 0; K <= 5; ++K) {
      CaseStudy cs = make(name, 3, K);
      CHECK(ExtRat(case_tv(cs)) <= cs.bound);
    }
  }
}

TEST_CASE("uniformity report for random-to-top") {
  CaseParams pr;
  pr.N = 3;
  pr.K = 20;
  CaseStudy cs = make_case("rtop", pr);
  UniformityReport rep = uniformity_check(cs);
  CHECK(rep.tv_uniform == ExtRat(Rat(1, 2324522934LL)));
  CHECK(rep.tv_uniform <= rep.bound);
  CHECK(rep.artifact_ok);
  CHECK(rep.pairs_checked == 36);
}

TEST_CASE("coupling specs parse by name") {
  CHECK(coupling_by_name("id").kind == CouplingSpec::Kind::Identity);
  CHECK(coupling_by_name("independent").kind ==
        CouplingSpec::Kind::Independent);
  CHECK(coupling_by_name("optimal").kind == CouplingSpec::Kind::Optimal);
  CHECK(coupling_by_name("cycle_diff:pos").kind ==
        CouplingSpec::Kind::Bijection);
  CHECK(coupling_by_name("match_card").kind == CouplingSpec::Kind::Bijection);
  CHECK(coupling_by_name("cond_eq:k").kind ==
        CouplingSpec::Kind::Conditional);
  CHECK_THROWS_AS(coupling_by_name("wat"), CaseError);
}

TEST_CASE("coupled simulation is reproducible and honors the seed") {
  CaseStudy cs = make("hwalk", 3, 3);
  SimReport a = coupled_simulate(cs, 300, 5);
  SimReport b = coupled_simulate(cs, 300, 5);
  SimReport c = coupled_simulate(cs, 300, 6);
  CHECK(a.stats.mean_exact == b.stats.mean_exact);
  CHECK(a.stats.mean_exact != c.stats.mean_exact);
}

TEST_CASE("identity coupling on identical inputs gives distance zero") {
  CaseStudy cs = make("rtop", 3, 4);
  cs.init2 = cs.init1;
  SiteSpecs specs;
  specs[0] = CouplingSpec::identity();
  SimReport rep = coupled_simulate(cs, 500, 3, nullptr, &specs);
  CHECK(rep.stats.all_zero);
  CHECK(rep.stats.mean_exact == Rat(0));
}

TEST_CASE("simulated marginals match the exact semantics (chi-square)") {
  CaseStudy cs = make("hwalk", 3, 2);
  ValueDist exact = marginal(denote(cs.program.body, cs.init1), "pos");
  std::map<Value, long> counts;
  const long trials = 10000;
  Prng root(99);
  for (long t = 0; t < trials; ++t) {
    Prng g = root.substream(t);
    auto [f1, f2] =
        run_coupled(cs.program.body, cs.init1, cs.init1, g, &cs.specs);
    ++counts[f1.get("pos")];
  }
  ChiSquareReport chi = chi_square_fit(counts, exact, trials);
  CHECK(chi.pvalue > 0.01);
}

TEST_CASE("continuous simulators respect their analytic bounds") {
  SUBCASE("sgd") {
    CaseStudy cs = make_case("sgd", CaseParams{});
    SimReport rep = coupled_simulate(cs, 2000, 11);
    CHECK(rep.stats.mean + 3 * rep.stats.stderr_ <= rep.bound.to_double());
  }
  SUBCASE("td0") {
    CaseStudy cs = make_case("td0", CaseParams{});
    SimReport rep = coupled_simulate(cs, 2000, 12);
    CHECK(rep.stats.mean + 3 * rep.stats.stderr_ <= rep.bound.to_double());
  }
  SUBCASE("pgd is deterministic") {
    CaseStudy cs = make_case("pgd", CaseParams{});
    SimReport a = coupled_simulate(cs, 10, 1);
    SimReport b = coupled_simulate(cs, 10, 2);
    CHECK(a.stats.stddev == 0);
    CHECK(a.stats.mean_exact == b.stats.mean_exact);
    CHECK(ExtRat(Rat(a.stats.mean_exact)) <= a.bound);
  }
}

TEST_CASE("simulated mixing intervals cover the exact value") {
  CaseStudy cs = make("hwalk", 3, 2);
  MixRow ex = mixing_point_exact(cs);
  MixRow sim = mixing_point_simulated(cs, 4000, 21);
  REQUIRE(sim.trials == 4000);
  CHECK(sim.ci_lo <= ex.tv_exact.to_double());
  CHECK(ex.tv_exact.to_double() <= sim.ci_hi);
}

TEST_CASE("mixing curves reject oversized exact state spaces") {
  CaseParams pr;
  pr.N = 7;  // 5040 permutations
  CHECK_THROWS_AS(mixing_curve("rtop", pr, {1}, MixMode::Exact), CaseError);
}

TEST_CASE("binomial bound matches the exact distance") {
  CaseParams pr;
  pr.N = 2;
  pr.N2 = 4;
  pr.p = Rat(1, 2);
  CaseStudy cs = make_case("binom", pr);
  SubDist m1 = denote(cs.program.body, cs.init1);
  SubDist m2 = denote(cs.program.body, cs.init2);
  ExtRat d = kantorovich<State>(m1, m2, relfn(cs.distance)).value;
  CHECK(d == ExtRat(1));
  CHECK(d <= cs.bound);
}
