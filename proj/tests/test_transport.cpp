#include <doctest.h>

#include "kantorel/prng.hpp"
#include "kantorel/transport.hpp"
#include "kantorel/value.hpp"

using namespace kantorel;

namespace {

// Random full distribution on integer points 0..9 with <= n support points.
ValueDist random_dist(Prng& g, long n) {
  ValueDist d;
  std::vector<long> w(n);
  long total = 0;
  for (long i = 0; i < n; ++i) total += w[i] = 1 + g.next_below(9);
  for (long i = 0; i < n; ++i)
    d.add(Value(static_cast<long>(g.next_below(10))), Rat(w[i], total));
  return d;
}

// Independent 1-d oracle: for cost |x - y| on the integers, the optimal
// transport cost is the L1 distance between the cumulative distributions.
Rat w1_oracle(const ValueDist& mu, const ValueDist& nu) {
  Rat out = 0, fm = 0, fn = 0;
  std::map<Int, std::pair<Rat, Rat>> pts;
  for (const auto& [v, p] : mu.entries()) pts[v.as_int()].first = p;
  for (const auto& [v, p] : nu.entries()) pts[v.as_int()].second = p;
  Int prev;
  bool first = true;
  for (const auto& [x, pq] : pts) {
    if (!first) out += abs(fm - fn) * Rat(x - prev);
    fm += pq.first;
    fn += pq.second;
    prev = x;
    first = false;
  }
  return out;
}

ExtRat abs_cost(const Value& a, const Value& b) {
  Int d = a.as_int() - b.as_int();
  return ExtRat(Rat(d < 0 ? -d : d));
}

}  // namespace

TEST_CASE("1-d transport matches the cumulative-distribution oracle") {
  Prng g(7);
  for (int t = 0; t < 60; ++t) {
    ValueDist mu = random_dist(g, 1 + g.next_below(6));
    ValueDist nu = random_dist(g, 1 + g.next_below(6));
    CHECK(kantorovich<Value>(mu, nu, abs_cost).value == ExtRat(w1_oracle(mu, nu)));
  }
}

TEST_CASE("discrete-metric transport equals total variation") {
  Prng g(8);
  for (int t = 0; t < 60; ++t) {
    ValueDist mu = random_dist(g, 1 + g.next_below(8));
    ValueDist nu = random_dist(g, 1 + g.next_below(8));
    CHECK(kantorovich_discrete(mu, nu).value == ExtRat(tv(mu, nu)));
  }
}

TEST_CASE("optimal plans are couplings achieving the reported value") {
  Prng g(9);
  for (int t = 0; t < 30; ++t) {
    ValueDist mu = random_dist(g, 1 + g.next_below(5));
    ValueDist nu = random_dist(g, 1 + g.next_below(5));
    KantorovichResult<Value> r = kantorovich<Value>(mu, nu, abs_cost);
    REQUIRE(r.plan);
    CHECK(is_coupling(*r.plan, mu, nu));
    CHECK(r.plan->expected(abs_cost) == r.value);
  }
}

TEST_CASE("metric costs give symmetric values satisfying the triangle "
          "inequality") {
  Prng g(10);
  for (int t = 0; t < 20; ++t) {
    ValueDist a = random_dist(g, 4), b = random_dist(g, 4),
              c = random_dist(g, 4);
    ExtRat ab = kantorovich<Value>(a, b, abs_cost).value;
    ExtRat ba = kantorovich<Value>(b, a, abs_cost).value;
    ExtRat bc = kantorovich<Value>(b, c, abs_cost).value;
    ExtRat ac = kantorovich<Value>(a, c, abs_cost).value;
    CHECK(ab == ba);
    CHECK(ac <= ab + bc);
  }
}

TEST_CASE("tv basics") {
  ValueDist a, b;
  a.add(Value(0L), Rat(1));
  b.add(Value(1L), Rat(1));
  CHECK(tv(a, a) == Rat(0));
  CHECK(tv(a, b) == Rat(1));
  ValueDist c;
  c.add(Value(0L), Rat(1, 2));
  c.add(Value(1L), Rat(1, 2));
  CHECK(tv(a, c) == Rat(1, 2));
}

TEST_CASE("scaled distances bound tv from transport values") {
  // cost >= rho * discrete metric implies tv <= kantorovich / rho
  Prng g(11);
  Rat rho(2);
  std::function<ExtRat(const Value&, const Value&)> cost =
      [](const Value& a, const Value& b) {
        return a == b ? ExtRat(0) : ExtRat(2);
      };
  for (int t = 0; t < 20; ++t) {
    ValueDist mu = random_dist(g, 4), nu = random_dist(g, 4);
    ScaledTvResult<Value> r = scaled_tv_bound<Value>(mu, nu, cost, rho);
    REQUIRE(r.applicable);
    CHECK(ExtRat(tv(mu, nu)) <= r.tv_bound);
  }
}

TEST_CASE("infinite costs propagate") {
  ValueDist a, b;
  a.add(Value(0L), Rat(1));
  b.add(Value(1L), Rat(1));
  auto cost = [](const Value&, const Value&) { return ExtRat::infinity(); };
  CHECK(kantorovich<Value>(a, b, cost).value.is_inf());
}
