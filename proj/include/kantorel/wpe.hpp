#pragma once

#include <functional>
#include <set>
#include <vector>

#include "kantorel/eval.hpp"
#include "kantorel/semantics.hpp"

namespace kantorel {

using UnaryFn = std::function<ExtRat(const State&)>;

/// Weakest pre-expectation: expected value of f over the output
/// distribution. In approximate mode truncated loop mass contributes
/// nothing, so the result is a lower bound on the exact value.
inline ExtRat wpe(const CmdPtr& c, const UnaryFn& f, const State& s,
                  const LoopConfig& cfg = {}) {
  return denote(c, s, cfg).expected(f);
}

inline ExtRat wpe(const CmdPtr& c, const SExprPtr& f, const State& s,
                  const LoopConfig& cfg = {}) {
  return wpe(c, [&](const State& t) { return eval_unary(f, t); }, s, cfg);
}

// ---------------------------------------------------------------------------
// Omega-invariants for loops

/// An indexed family I_n of expectations; the index variable is free in the
/// expression and bound per evaluation.
struct IndexedExp {
  SExprPtr body;
  std::string index = "n";

  ExtRat at(const Int& n, const State& s) const {
    EvalCtx ctx = EvalCtx::unary(s);
    ctx.locals[index] = n;
    ExtRat v = eval_sexpr(body, ctx);
    if (!v.is_nonneg()) throw EvalError("indexed expectation negative");
    return v;
  }
};

struct OmegaViolation {
  State state;
  long n;           // family index; -1 for the base case or the limit check
  ExtRat lhs, rhs;  // the failed comparison, lhs <= rhs (or >= for lower)
  std::string which;
};

struct OmegaReport {
  bool ok = true;
  long depth = 0;  // indices certified: 0..depth
  std::vector<OmegaViolation> violations;
  size_t states_checked = 0;
};

/// Upper omega-invariant check for `while b { body }` with post
/// expectation f, over a finite set of states closed enough to cover the
/// loop's reachable configurations:
///   [!b] * f <= I_0   and   [b] * wpe(body, I_n) + [!b] * f <= I_{n+1}.
/// Each I_n then dominates the n-th loop approximant, so a supplied `limit`
/// that dominates every I_n up to n_max certifies wpe(loop) <= limit once
/// the approximants have stabilized. Pass upper=false for the lower variant
/// with the base and step inequalities reversed; there each I_n is a lower
/// bound on wpe, so `limit` certifies wpe(loop) >= limit as soon as the
/// family reaches it, which is checked at index n_max.
inline OmegaReport check_omega_invariant(
    const Command& loop, const SExprPtr& f, const IndexedExp& I,
    const std::vector<State>& states, long n_max, bool upper = true,
    const SExprPtr& limit = nullptr, const LoopConfig& cfg = {}) {
  if (loop.kind != Command::Kind::While)
    throw std::runtime_error("omega-invariant check expects a loop");
  OmegaReport rep;
  rep.depth = n_max;
  auto leq = [&](const ExtRat& a, const ExtRat& b) {
    return upper ? a <= b : a >= b;
  };
  auto record = [&](const State& s, long n, const ExtRat& lhs,
                    const ExtRat& rhs, const char* which) {
    rep.ok = false;
    rep.violations.push_back({s, n, lhs, rhs, which});
  };
  for (const State& s : states) {
    ++rep.states_checked;
    bool b = eval_expr(loop.expr, EvalCtx::unary(s)).as_bool();
    ExtRat fv = b ? ExtRat(0) : eval_unary(f, s);
    {
      ExtRat i0 = I.at(0, s);
      if (!leq(fv, i0)) record(s, -1, fv, i0, "base");
    }
    for (long n = 0; n < n_max; ++n) {
      ExtRat lhs = fv;
      if (b) {
        lhs = wpe(loop.c1, [&](const State& t) { return I.at(n, t); }, s, cfg);
      }
      ExtRat next = I.at(n + 1, s);
      if (!leq(lhs, next)) record(s, n, lhs, next, "step");
    }
    if (limit) {
      ExtRat lim = eval_unary(limit, s);
      if (upper) {
        for (long n = 0; n <= n_max; ++n) {
          ExtRat in = I.at(n, s);
          if (!(in <= lim)) record(s, n, in, lim, "limit");
        }
      } else {
        ExtRat in = I.at(n_max, s);
        if (!(in >= lim)) record(s, n_max, in, lim, "limit");
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Total-variation lower bounds

struct TvLowerBound {
  ExtRat bound;        // |E_mu1[f] - E_mu2[f]|, a certified TV lower bound
  bool range_ok;       // f took values in [0,1] on every reachable output
  std::optional<State> range_violation;
};

/// Lower bound on TV(out(c, s1), out(c, s2)) from a witness function f with
/// range [0,1]; the range condition is checked exhaustively on both output
/// supports. In approximate mode both expectations are truncations, so the
/// reported bound may be off by at most the residual masses.
inline TvLowerBound tv_lower_bound(const CmdPtr& c, const State& s1,
                                   const State& s2, const SExprPtr& f,
                                   const LoopConfig& cfg = {}) {
  TvLowerBound out;
  out.range_ok = true;
  SubDist m1 = denote(c, s1, cfg);
  SubDist m2 = denote(c, s2, cfg);
  auto fv = [&](const State& t) { return eval_unary(f, t); };
  for (const SubDist* m : {&m1, &m2}) {
    for (const auto& [t, p] : m->entries()) {
      ExtRat v = fv(t);
      if (v.is_inf() || v.value() < 0 || v.value() > 1) {
        out.range_ok = false;
        out.range_violation = t;
        out.bound = ExtRat(0);
        return out;
      }
    }
  }
  ExtRat a = m1.expected(fv);
  ExtRat b = m2.expected(fv);
  out.bound = (a - b).abs();
  return out;
}

}  // namespace kantorel
