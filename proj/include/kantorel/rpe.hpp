#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <vector>

#include "kantorel/coupling.hpp"
#include "kantorel/semantics.hpp"
#include "kantorel/transport.hpp"
#include "kantorel/wpe.hpp"

namespace kantorel {

using RelFn = std::function<ExtRat(const State&, const State&)>;

inline RelFn relfn(const SExprPtr& e) {
  return [e](const State& a, const State& b) { return eval_relexp(e, a, b); };
}

struct RpeResult {
  ExtRat value;
  bool exact = true;  // false when a loop fixpoint was truncated; the value
                      // is then a lower approximation
};

struct CouplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-site coupling choices; sites are numbered in program order.
using SiteSpecs = std::map<int, CouplingSpec>;

namespace detail {

struct RpeCtx {
  LoopConfig cfg;
  bool exact = true;
  const SiteSpecs* specs = nullptr;
};

inline ExtRat rpe_eval(const CmdPtr& c, const RelFn& E, const State& s1,
                       const State& s2, RpeCtx& ctx);

inline RelFn memoized(RelFn f) {
  auto cache = std::make_shared<std::map<std::pair<State, State>, ExtRat>>();
  return [f = std::move(f), cache](const State& a, const State& b) {
    auto key = std::make_pair(a, b);
    auto it = cache->find(key);
    if (it != cache->end()) return it->second;
    ExtRat v = f(a, b);
    cache->emplace(std::move(key), v);
    return v;
  };
}

inline bool guard_holds(const ExprPtr& g, const State& s) {
  return eval_expr(g, EvalCtx::unary(s)).as_bool();
}

/// Relational pre-expectation of a loop by Kleene iteration of its
/// characteristic functional over the reachable pair space.
inline ExtRat rpe_loop(const Command& loop, const RelFn& E, const State& s1,
                       const State& s2, RpeCtx& ctx) {
  using PairKey = std::pair<State, State>;
  // output distributions of the body, per state, computed on demand
  std::map<State, SubDist> body_out;
  auto out_of = [&](const State& s) -> const SubDist& {
    auto it = body_out.find(s);
    if (it != body_out.end()) return it->second;
    DenoteResult r = denote_full(loop.c1, s, ctx.cfg);
    if (r.residual != 0) ctx.exact = false;
    return body_out.emplace(s, std::move(r.dist)).first->second;
  };

  // reachable pair space: closure of the initial pair under supports of the
  // body output on both sides while both guards hold
  std::map<PairKey, ExtRat> X;
  std::vector<PairKey> frontier{{s1, s2}};
  X.emplace(frontier.back(), ExtRat(0));
  while (!frontier.empty()) {
    PairKey p = std::move(frontier.back());
    frontier.pop_back();
    if (!guard_holds(loop.expr, p.first) ||
        !guard_holds(loop.expr, p.second))
      continue;
    for (const auto& [t1, q1] : out_of(p.first).entries()) {
      for (const auto& [t2, q2] : out_of(p.second).entries()) {
        PairKey np{t1, t2};
        if (X.emplace(np, ExtRat(0)).second) frontier.push_back(np);
      }
    }
  }

  for (long iter = 0; iter < ctx.cfg.max_iters; ++iter) {
    bool changed = false;
    double max_delta = 0;
    std::map<PairKey, ExtRat> Y;
    for (const auto& [p, xv] : X) {
      bool g1 = guard_holds(loop.expr, p.first);
      bool g2 = guard_holds(loop.expr, p.second);
      ExtRat nv;
      if (g1 != g2) {
        nv = ExtRat::infinity();
      } else if (!g1) {
        nv = E(p.first, p.second);
      } else {
        RelFn xfn = [&](const State& a, const State& b) {
          auto it = X.find({a, b});
          return it == X.end() ? ExtRat::infinity() : it->second;
        };
        nv = rpe_eval(loop.c1, memoized(xfn), p.first, p.second, ctx);
      }
      if (nv != xv) {
        changed = true;
        if (nv.is_inf() || xv.is_inf()) {
          max_delta = std::numeric_limits<double>::infinity();
        } else {
          double d = std::abs((nv - xv).to_double());
          if (d > max_delta) max_delta = d;
        }
      }
      Y.emplace(p, nv);
    }
    X = std::move(Y);
    if (!changed) return X.at({s1, s2});
    if (ctx.cfg.mode == LoopMode::Approximate && max_delta < ctx.cfg.epsilon) {
      ctx.exact = false;
      return X.at({s1, s2});
    }
  }
  if (ctx.cfg.mode == LoopMode::ExactTerminating)
    throw SemanticsError(
        "relational loop fixpoint not reached within max-iters in exact mode");
  ctx.exact = false;
  return X.at({s1, s2});
}

inline ExtRat rpe_eval(const CmdPtr& c, const RelFn& E, const State& s1,
                       const State& s2, RpeCtx& ctx) {
  switch (c->kind) {
    case Command::Kind::Skip: return E(s1, s2);
    case Command::Kind::Assign: {
      State t1 = s1, t2 = s2;
      t1.set(c->var, eval_expr(c->expr, EvalCtx::unary(s1)));
      t2.set(c->var, eval_expr(c->expr, EvalCtx::unary(s2)));
      return E(t1, t2);
    }
    case Command::Kind::Sample: {
      ValueDist d1 = eval_dist(c->dist, s1);
      ValueDist d2 = eval_dist(c->dist, s2);
      auto post = [&](const Value& a, const Value& b) {
        State t1 = s1, t2 = s2;
        t1.set(c->var, a);
        t2.set(c->var, b);
        return E(t1, t2);
      };
      if (ctx.specs) {
        auto it = ctx.specs->find(c->site);
        if (it != ctx.specs->end() &&
            it->second.kind != CouplingSpec::Kind::Optimal) {
          CouplingBuildResult built =
              build_coupling(it->second, d1, d2, s1, s2, post);
          if (!built.joint)
            throw CouplingError("site " + std::to_string(c->site) + " (" +
                                it->second.name + "): " + built.error);
          return built.joint->expected(post);
        }
      }
      return kantorovich<Value>(d1, d2, post).value;
    }
    case Command::Kind::Seq: {
      CmdPtr c2 = c->c2;
      RelFn post = memoized([c2, &E, &ctx](const State& a, const State& b) {
        return rpe_eval(c2, E, a, b, ctx);
      });
      return rpe_eval(c->c1, post, s1, s2, ctx);
    }
    case Command::Kind::If: {
      bool g1 = guard_holds(c->expr, s1);
      bool g2 = guard_holds(c->expr, s2);
      if (g1 != g2) return ExtRat::infinity();
      return rpe_eval(g1 ? c->c1 : c->c2, E, s1, s2, ctx);
    }
    case Command::Kind::While: return rpe_loop(*c, E, s1, s2, ctx);
  }
  throw std::runtime_error("bad command");
}

}  // namespace detail

/// Compositional relational pre-expectation of c with respect to E at a
/// pair of initial states. Sound upper bound on the semantic transport
/// quantity below; not compositional under sequencing in general.
inline RpeResult rpe(const CmdPtr& c, const RelFn& E, const State& s1,
                     const State& s2, const LoopConfig& cfg = {},
                     const SiteSpecs* specs = nullptr) {
  detail::RpeCtx ctx{cfg, true, specs};
  ExtRat v = detail::rpe_eval(c, detail::memoized(E), s1, s2, ctx);
  return {v, ctx.exact};
}

inline RpeResult rpe(const CmdPtr& c, const SExprPtr& E, const State& s1,
                     const State& s2, const LoopConfig& cfg = {}) {
  return rpe(c, relfn(E), s1, s2, cfg);
}

/// Semantic sensitivity: the exact Kantorovich distance between the two
/// output distributions with cost E. This is the quantity the calculus
/// upper-bounds.
inline RpeResult kantorovich_pre(const CmdPtr& c, const RelFn& E,
                                 const State& s1, const State& s2,
                                 const LoopConfig& cfg = {}) {
  DenoteResult r1 = denote_full(c, s1, cfg);
  DenoteResult r2 = denote_full(c, s2, cfg);
  ExtRat v = kantorovich<State>(r1.dist, r2.dist, E).value;
  return {v, r1.residual == 0 && r2.residual == 0};
}

inline RpeResult kantorovich_pre(const CmdPtr& c, const SExprPtr& E,
                                 const State& s1, const State& s2,
                                 const LoopConfig& cfg = {}) {
  return kantorovich_pre(c, relfn(E), s1, s2, cfg);
}

/// One-sided pre-expectations: only one program advances, the other state
/// is held fixed.
inline ExtRat rpe_left(const CmdPtr& c, const RelFn& E, const State& s1,
                       const State& s2, const LoopConfig& cfg = {}) {
  if (!all_loops_bounded(c))
    throw std::runtime_error(
        "one-sided pre-expectation requires a provably terminating command");
  return denote(c, s1, cfg).expected(
      [&](const State& t) { return E(t, s2); });
}

inline ExtRat rpe_right(const CmdPtr& c, const RelFn& E, const State& s1,
                        const State& s2, const LoopConfig& cfg = {}) {
  if (!all_loops_bounded(c))
    throw std::runtime_error(
        "one-sided pre-expectation requires a provably terminating command");
  return denote(c, s2, cfg).expected(
      [&](const State& t) { return E(s1, t); });
}

// ---------------------------------------------------------------------------
// Invariant checking

struct PairViolation {
  State s1, s2;
  ExtRat lhs, rhs;  // the failed comparison lhs <= rhs
  std::string which;
};

struct InvariantReport {
  bool ok = true;
  bool exact = true;  // all left-hand sides computed without truncation
  size_t pairs_checked = 0;
  std::vector<PairViolation> violations;
};

/// Park-induction check for a synchronized loop invariant I:
///   guards agree, and
///   both true  -> rpe(body, I) <= I
///   both false -> E <= I
/// on every supplied pair. When this holds on all pairs reachable from an
/// initial pair, rpe of the loop with post E is at most I there.
inline InvariantReport check_invariant(
    const Command& loop, const SExprPtr& E, const SExprPtr& I,
    const std::vector<std::pair<State, State>>& pairs,
    const LoopConfig& cfg = {}, const SiteSpecs* specs = nullptr) {
  if (loop.kind != Command::Kind::While)
    throw std::runtime_error("invariant check expects a loop");
  InvariantReport rep;
  RelFn ifn = relfn(I);
  for (const auto& [s1, s2] : pairs) {
    ++rep.pairs_checked;
    bool g1 = detail::guard_holds(loop.expr, s1);
    bool g2 = detail::guard_holds(loop.expr, s2);
    ExtRat lhs;
    const char* which;
    if (g1 != g2) {
      lhs = ExtRat::infinity();
      which = "guards-disagree";
    } else if (!g1) {
      lhs = eval_relexp(E, s1, s2);
      which = "exit";
    } else {
      detail::RpeCtx ctx{cfg, true, specs};
      lhs = detail::rpe_eval(loop.c1, detail::memoized(ifn), s1, s2, ctx);
      if (!ctx.exact) rep.exact = false;
      which = "step";
    }
    ExtRat rhs = eval_relexp(I, s1, s2);
    if (!(lhs <= rhs)) {
      rep.ok = false;
      rep.violations.push_back({s1, s2, lhs, rhs, which});
    }
  }
  return rep;
}

/// Asynchronous invariant check: the two sides of the loop may exit at
/// different times. Case split on the two guards; when only one side is
/// still running, that side takes a step alone. Sound for loops that
/// terminate from every supplied state; syntactically bounded loops
/// (`bounded` in the report) satisfy this by construction.
struct AsyncReport : InvariantReport {
  bool bounded = false;
};

inline AsyncReport check_async_invariant(
    const Command& loop, const SExprPtr& E, const SExprPtr& I,
    const std::vector<std::pair<State, State>>& pairs,
    const LoopConfig& cfg = {}, const SiteSpecs* specs = nullptr) {
  if (loop.kind != Command::Kind::While)
    throw std::runtime_error("async invariant check expects a loop");
  AsyncReport rep;
  rep.bounded = is_bounded_loop(loop);
  RelFn ifn = relfn(I);
  for (const auto& [s1, s2] : pairs) {
    ++rep.pairs_checked;
    bool g1 = detail::guard_holds(loop.expr, s1);
    bool g2 = detail::guard_holds(loop.expr, s2);
    ExtRat lhs;
    const char* which;
    if (g1 && g2) {
      detail::RpeCtx ctx{cfg, true, specs};
      lhs = detail::rpe_eval(loop.c1, detail::memoized(ifn), s1, s2, ctx);
      if (!ctx.exact) rep.exact = false;
      which = "both-step";
    } else if (g1) {
      lhs = rpe_left(loop.c1, ifn, s1, s2, cfg);
      which = "left-step";
    } else if (g2) {
      lhs = rpe_right(loop.c1, ifn, s1, s2, cfg);
      which = "right-step";
    } else {
      lhs = eval_relexp(E, s1, s2);
      which = "exit";
    }
    ExtRat rhs = eval_relexp(I, s1, s2);
    if (!(lhs <= rhs)) {
      rep.ok = false;
      rep.violations.push_back({s1, s2, lhs, rhs, which});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Structural property checks

namespace detail {

inline void modified_vars(const CmdPtr& c, std::set<std::string>& out) {
  if (!c) return;
  if (c->kind == Command::Kind::Assign || c->kind == Command::Kind::Sample)
    out.insert(c->var);
  modified_vars(c->c1, out);
  modified_vars(c->c2, out);
}

inline void expr_vars(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == Expr::Kind::Var) out.insert(e->name);
  for (const auto& a : e->args) expr_vars(a, out);
}

inline void sexpr_vars(const SExprPtr& e, std::set<std::string>& out) {
  if (e->ie) expr_vars(e->ie, out);
  for (const auto& pe : e->eargs) expr_vars(pe, out);
  for (const auto& a : e->args) sexpr_vars(a, out);
  if (!e->ix.empty()) out.erase(e->ix);
}

}  // namespace detail

enum class Fig3Rule { Mono, Const, SupAdd, Scale };

struct Fig3Instance {
  CmdPtr c;
  SExprPtr E;
  SExprPtr E2;    // second expectation (Mono premise E <= E2; Const/SupAdd)
  Rat scale = 1;  // Scale rule: f(z) = scale * z, with f(inf) = inf
};

/// Checks one structural property of the pre-expectation transformer on an
/// explicit set of state pairs:
///   Mono:   E <= E2 everywhere  ==>  rpe(c,E) <= rpe(c,E2)
///   Const:  c does not modify the variables of E2
///           ==> rpe(c, E + E2) <= rpe(c,E) + E2
///   SupAdd: rpe(c,E) + rpe(c,E2) <= rpe(c, E + E2)
///   Scale:  rpe(c, f.E) = f(rpe(c,E)) for linear f with f(inf) = inf
inline InvariantReport check_fig3_property(
    Fig3Rule rule, const Fig3Instance& inst,
    const std::vector<std::pair<State, State>>& pairs,
    const LoopConfig& cfg = {}) {
  InvariantReport rep;
  RelFn e1 = relfn(inst.E);
  RelFn e2 = inst.E2 ? relfn(inst.E2) : RelFn{};
  RelFn esum = [&](const State& a, const State& b) {
    return e1(a, b) + e2(a, b);
  };
  auto f = [&](const ExtRat& z) {
    return z.is_inf() ? ExtRat::infinity() : ExtRat(inst.scale) * z;
  };
  RelFn escaled = [&](const State& a, const State& b) { return f(e1(a, b)); };
  if (rule == Fig3Rule::Const) {
    std::set<std::string> mv, fv;
    detail::modified_vars(inst.c, mv);
    detail::sexpr_vars(inst.E2, fv);
    for (const auto& v : fv)
      if (mv.count(v))
        throw std::runtime_error(
            "Const premise violated: command modifies '" + v + "'");
  }
  for (const auto& [s1, s2] : pairs) {
    ++rep.pairs_checked;
    ExtRat lhs, rhs;
    const char* which = "";
    bool holds = true;
    switch (rule) {
      case Fig3Rule::Mono:
        lhs = rpe(inst.c, e1, s1, s2, cfg).value;
        rhs = rpe(inst.c, e2, s1, s2, cfg).value;
        which = "mono";
        holds = lhs <= rhs;
        break;
      case Fig3Rule::Const:
        lhs = rpe(inst.c, esum, s1, s2, cfg).value;
        rhs = rpe(inst.c, e1, s1, s2, cfg).value + e2(s1, s2);
        which = "const";
        holds = lhs <= rhs;
        break;
      case Fig3Rule::SupAdd:
        lhs = rpe(inst.c, e1, s1, s2, cfg).value +
              rpe(inst.c, e2, s1, s2, cfg).value;
        rhs = rpe(inst.c, esum, s1, s2, cfg).value;
        which = "supadd";
        holds = lhs <= rhs;
        break;
      case Fig3Rule::Scale:
        lhs = rpe(inst.c, escaled, s1, s2, cfg).value;
        rhs = f(rpe(inst.c, e1, s1, s2, cfg).value);
        which = "scale";
        holds = lhs == rhs;
        break;
    }
    if (!holds) {
      rep.ok = false;
      rep.violations.push_back({s1, s2, lhs, rhs, which});
    }
  }
  return rep;
}

/// Soundness probe: the semantic transport quantity never exceeds the
/// computed pre-expectation.
inline InvariantReport soundness_probe(
    const CmdPtr& c, const SExprPtr& E,
    const std::vector<std::pair<State, State>>& pairs,
    const LoopConfig& cfg = {}) {
  InvariantReport rep;
  for (const auto& [s1, s2] : pairs) {
    ++rep.pairs_checked;
    RpeResult upper = rpe(c, E, s1, s2, cfg);
    RpeResult sem = kantorovich_pre(c, E, s1, s2, cfg);
    if (!upper.exact || !sem.exact) rep.exact = false;
    if (!(sem.value <= upper.value)) {
      rep.ok = false;
      rep.violations.push_back({s1, s2, sem.value, upper.value, "soundness"});
    }
  }
  return rep;
}

/// A relational expectation family indexed by a free natural symbol.
struct RelIndexed {
  SExprPtr body;
  std::string index = "n";

  ExtRat at(const Int& n, const State& a, const State& b) const {
    EvalCtx ctx = EvalCtx::pair(a, b);
    ctx.locals[index] = n;
    ExtRat v = eval_sexpr(body, ctx);
    if (!v.is_nonneg()) throw EvalError("indexed expectation negative");
    return v;
  }
};

/// Continuity probe for a chain E_0 <= E_1 <= ... with pointwise limit E:
/// rpe(c, E_n) must be monotone in n and approach rpe(c, E) within epsilon
/// by n_max on every probed pair (or both sides must be infinite).
inline InvariantReport continuity_probe(
    const CmdPtr& c, const RelIndexed& chain, const SExprPtr& E_limit,
    long n_max, const std::vector<std::pair<State, State>>& pairs,
    const LoopConfig& cfg = {}) {
  InvariantReport rep;
  for (const auto& [s1, s2] : pairs) {
    ++rep.pairs_checked;
    ExtRat prev(0);
    ExtRat last(0);
    for (long n = 0; n <= n_max; ++n) {
      RelFn en = [&](const State& a, const State& b) {
        return chain.at(n, a, b);
      };
      ExtRat v = rpe(c, en, s1, s2, cfg).value;
      if (n > 0 && !(prev <= v)) {
        rep.ok = false;
        rep.violations.push_back({s1, s2, prev, v, "chain-monotone"});
      }
      prev = v;
      last = v;
    }
    ExtRat lim = rpe(c, E_limit, s1, s2, cfg).value;
    bool close;
    if (lim.is_inf() || last.is_inf()) {
      close = lim.is_inf() && last.is_inf();
    } else {
      close = std::abs((lim - last).to_double()) <= cfg.epsilon;
    }
    if (!close) {
      rep.ok = false;
      rep.violations.push_back({s1, s2, last, lim, "limit"});
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Sampling-rule bounds

struct SampBound {
  bool applies = false;
  std::string error;
  ExtRat bound;    // expected post-expectation under the chosen coupling
  ExtRat optimal;  // exact Kantorovich value at the site
};

/// Upper bound on the pre-expectation of a single sampling statement from a
/// chosen coupling of the two site distributions; dominates the exact
/// optimal-transport value whenever the coupling is valid.
inline SampBound rpe_sample_bound(const std::string& var, const DistPtr& dist,
                                  const SExprPtr& E, const State& s1,
                                  const State& s2, const CouplingSpec& spec) {
  SampBound out;
  ValueDist d1 = eval_dist(dist, s1);
  ValueDist d2 = eval_dist(dist, s2);
  auto post = [&](const Value& a, const Value& b) {
    State t1 = s1, t2 = s2;
    t1.set(var, a);
    t2.set(var, b);
    return eval_relexp(E, t1, t2);
  };
  out.optimal = kantorovich<Value>(d1, d2, post).value;
  CouplingBuildResult built = build_coupling(spec, d1, d2, s1, s2, post);
  if (!built.joint) {
    out.error = built.error;
    return out;
  }
  out.applies = true;
  out.bound = built.joint->expected(post);
  return out;
}

}  // namespace kantorel
