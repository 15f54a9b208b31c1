#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "kantorel/coupling.hpp"
#include "kantorel/eval.hpp"
#include "kantorel/prng.hpp"
#include "kantorel/rpe.hpp"
#include "kantorel/semantics.hpp"

namespace kantorel {

/// Draws from a finite distribution using one 64-bit uniform, mapped into
/// [0,1) as an exact rational and walked through the cumulative weights.
template <typename K>
const K& sample_from(const FiniteDist<K>& d, Prng& g) {
  if (d.empty()) throw std::runtime_error("sampling an empty distribution");
  Rat u(Int(g.next_u64()), Int(1) << 64);
  u *= d.mass();
  Rat acc = 0;
  const K* last = nullptr;
  for (const auto& [k, p] : d.entries()) {
    acc += p;
    last = &k;
    if (u < acc) return k;
  }
  return *last;
}

template <typename K>
const std::pair<K, K>& sample_pair(const JointDist<K>& j, Prng& g) {
  if (j.entries().empty())
    throw std::runtime_error("sampling an empty coupling");
  Rat u(Int(g.next_u64()), Int(1) << 64);
  u *= j.mass();
  Rat acc = 0;
  const std::pair<K, K>* last = nullptr;
  for (const auto& [ab, p] : j.entries()) {
    acc += p;
    last = &ab;
    if (u < acc) return ab;
  }
  return *last;
}

/// One recorded sampling event of a paired run. When only one side was
/// active the other value is absent from the state anyway; both fields are
/// still filled with the drawn value for the active side(s).
struct TraceEvent {
  int site = -1;
  Value v1, v2;
  bool active1 = true, active2 = true;
};

struct CoupledTrace {
  uint64_t seed = 0;
  std::vector<TraceEvent> events;
  std::vector<std::pair<State, State>> states;  // after each sampling event
  std::vector<Rat> dists;                       // distance at those points
};

/// Runs a program once, resolving every sampling statement with the
/// generator. Loops are executed as written; max_iters bounds the total
/// number of loop iterations.
inline State run_single(const CmdPtr& c, State s, Prng& g,
                        long max_iters = 100000) {
  switch (c->kind) {
    case Command::Kind::Skip: return s;
    case Command::Kind::Assign:
      s.set(c->var, eval_expr(c->expr, EvalCtx::unary(s)));
      return s;
    case Command::Kind::Sample:
      s.set(c->var, sample_from(eval_dist(c->dist, s), g));
      return s;
    case Command::Kind::Seq:
      return run_single(c->c2, run_single(c->c1, std::move(s), g, max_iters),
                        g, max_iters);
    case Command::Kind::If: {
      bool b = eval_expr(c->expr, EvalCtx::unary(s)).as_bool();
      return run_single(b ? c->c1 : c->c2, std::move(s), g, max_iters);
    }
    case Command::Kind::While: {
      long it = 0;
      while (eval_expr(c->expr, EvalCtx::unary(s)).as_bool()) {
        if (++it > max_iters)
          throw SemanticsError("simulated loop exceeded max-iters");
        s = run_single(c->c1, std::move(s), g, max_iters);
      }
      return s;
    }
  }
  throw std::runtime_error("bad command");
}

namespace detail {

struct CoupledRun {
  const SiteSpecs* specs = nullptr;
  Prng* gen = nullptr;
  RelFn distance;          // optional, recorded into the trace
  CoupledTrace* trace = nullptr;
  long max_iters = 100000;

  void record(int site, const Value& a, const Value& b, bool a1, bool a2,
              const State& s1, const State& s2) {
    if (!trace) return;
    trace->events.push_back({site, a, b, a1, a2});
    trace->states.emplace_back(s1, s2);
    if (distance) {
      ExtRat d = distance(s1, s2);
      trace->dists.push_back(d.is_inf() ? Rat(-1) : d.value());
    }
  }

  /// Executes c on the sides flagged active, keeping the two runs aligned.
  /// At a sampling site where both sides are active the pair of values is
  /// drawn from the site's coupling (independent when none is configured);
  /// a side running alone samples unilaterally.
  void run(const CmdPtr& c, State& s1, State& s2, bool a1, bool a2) {
    if (!a1 && !a2) return;
    switch (c->kind) {
      case Command::Kind::Skip: return;
      case Command::Kind::Assign:
        if (a1) s1.set(c->var, eval_expr(c->expr, EvalCtx::unary(s1)));
        if (a2) s2.set(c->var, eval_expr(c->expr, EvalCtx::unary(s2)));
        return;
      case Command::Kind::Sample: {
        if (a1 && a2) {
          ValueDist d1 = eval_dist(c->dist, s1);
          ValueDist d2 = eval_dist(c->dist, s2);
          CouplingSpec spec = CouplingSpec::independent();
          if (specs) {
            auto it = specs->find(c->site);
            // optimal-transport couplings need a cost, which a simulation
            // does not have; they fall back to the product coupling
            if (it != specs->end() &&
                it->second.kind != CouplingSpec::Kind::Optimal)
              spec = it->second;
          }
          CouplingBuildResult built = build_coupling(spec, d1, d2, s1, s2);
          if (!built.joint)
            throw CouplingError("site " + std::to_string(c->site) + " (" +
                                spec.name + "): " + built.error);
          auto [v1, v2] = sample_pair(*built.joint, *gen);
          s1.set(c->var, v1);
          s2.set(c->var, v2);
          record(c->site, v1, v2, true, true, s1, s2);
        } else if (a1) {
          Value v = sample_from(eval_dist(c->dist, s1), *gen);
          s1.set(c->var, v);
          record(c->site, v, v, true, false, s1, s2);
        } else {
          Value v = sample_from(eval_dist(c->dist, s2), *gen);
          s2.set(c->var, v);
          record(c->site, v, v, false, true, s1, s2);
        }
        return;
      }
      case Command::Kind::Seq:
        run(c->c1, s1, s2, a1, a2);
        run(c->c2, s1, s2, a1, a2);
        return;
      case Command::Kind::If: {
        bool g1 = a1 && eval_expr(c->expr, EvalCtx::unary(s1)).as_bool();
        bool g2 = a2 && eval_expr(c->expr, EvalCtx::unary(s2)).as_bool();
        run(c->c1, s1, s2, g1, g2);
        run(c->c2, s1, s2, a1 && !g1, a2 && !g2);
        return;
      }
      case Command::Kind::While: {
        long it = 0;
        while (true) {
          bool g1 = a1 && eval_expr(c->expr, EvalCtx::unary(s1)).as_bool();
          bool g2 = a2 && eval_expr(c->expr, EvalCtx::unary(s2)).as_bool();
          if (!g1 && !g2) return;
          if (++it > max_iters)
            throw SemanticsError("simulated loop exceeded max-iters");
          run(c->c1, s1, s2, g1, g2);
        }
      }
    }
  }
};

}  // namespace detail

/// One coupled execution of a program from a pair of initial states; both
/// sides consume the same generator, so the pairing at each site follows
/// the configured coupling. Returns the final state pair.
inline std::pair<State, State> run_coupled(
    const CmdPtr& c, State s1, State s2, Prng& g,
    const SiteSpecs* specs = nullptr, CoupledTrace* trace = nullptr,
    const RelFn& distance = {}, long max_iters = 100000) {
  detail::CoupledRun r{specs, &g, distance, trace, max_iters};
  r.run(c, s1, s2, true, true);
  return {std::move(s1), std::move(s2)};
}

// ---------------------------------------------------------------------------
// Statistics

struct SimStats {
  long trials = 0;
  uint64_t seed = 0;
  double mean = 0;
  double stddev = 0;
  double stderr_ = 0;
  double ci_lo = 0, ci_hi = 0;  // 95% normal-approximation interval
  Rat mean_exact = 0;           // exact sample mean
  bool all_zero = true;
};

inline SimStats summarize(const std::vector<Rat>& vals, uint64_t seed) {
  SimStats st;
  st.seed = seed;
  st.trials = static_cast<long>(vals.size());
  if (vals.empty()) return st;
  Rat sum = 0;
  for (const Rat& v : vals) {
    sum += v;
    if (v != 0) st.all_zero = false;
  }
  st.mean_exact = sum / Rat(Int(vals.size()));
  st.mean = to_double(st.mean_exact);
  double sq = 0;
  for (const Rat& v : vals) {
    double d = to_double(v) - st.mean;
    sq += d * d;
  }
  if (vals.size() > 1)
    st.stddev = std::sqrt(sq / static_cast<double>(vals.size() - 1));
  st.stderr_ = st.stddev / std::sqrt(static_cast<double>(vals.size()));
  st.ci_lo = st.mean - 1.96 * st.stderr_;
  st.ci_hi = st.mean + 1.96 * st.stderr_;
  return st;
}

/// Wilson score interval for a binomial proportion at 95% confidence.
inline std::pair<double, double> wilson_interval(long successes, long n) {
  if (n == 0) return {0.0, 1.0};
  const double z = 1.959963984540054;
  double phat = static_cast<double>(successes) / static_cast<double>(n);
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (phat + z2 / (2.0 * n)) / denom;
  double half =
      z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * double(n) * n)) /
      denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------
// Chi-square goodness of fit (marginal fidelity of coupled runs)

namespace detail {

/// Regularized lower incomplete gamma P(a, x), by series (x < a+1) or
/// continued fraction (Lentz), standard numerics.
inline double gamma_p(double a, double x) {
  if (x < 0 || a <= 0) return 0;
  if (x == 0) return 0;
  double gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

}  // namespace detail

/// Upper tail probability of the chi-square distribution with df degrees.
inline double chi_square_pvalue(double stat, long df) {
  if (stat <= 0) return 1.0;
  return 1.0 - detail::gamma_p(static_cast<double>(df) / 2.0, stat / 2.0);
}

struct ChiSquareReport {
  double stat = 0;
  long df = 0;
  double pvalue = 1;
  long trials = 0;
};

/// Goodness of fit of observed category counts against exact expected
/// probabilities. Categories with zero expected probability must have zero
/// observed count (else pvalue = 0).
template <typename K>
ChiSquareReport chi_square_fit(const std::map<K, long>& counts,
                               const FiniteDist<K>& expected, long trials) {
  ChiSquareReport rep;
  rep.trials = trials;
  for (const auto& [k, n] : counts) {
    if (expected.prob(k) == 0 && n > 0) {
      rep.pvalue = 0;
      rep.stat = std::numeric_limits<double>::infinity();
      return rep;
    }
  }
  for (const auto& [k, p] : expected.entries()) {
    double e = to_double(p) * static_cast<double>(trials);
    auto it = counts.find(k);
    double o = it == counts.end() ? 0.0 : static_cast<double>(it->second);
    rep.stat += (o - e) * (o - e) / e;
  }
  rep.df = static_cast<long>(expected.support_size()) - 1;
  rep.pvalue = rep.df > 0 ? chi_square_pvalue(rep.stat, rep.df) : 1.0;
  return rep;
}

}  // namespace kantorel
