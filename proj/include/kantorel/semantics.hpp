#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include "kantorel/ast.hpp"
#include "kantorel/dist.hpp"
#include "kantorel/eval.hpp"

namespace kantorel {

enum class LoopMode { ExactTerminating, Approximate };

struct LoopConfig {
  LoopMode mode = LoopMode::ExactTerminating;
  double epsilon = 1e-9;   // residual-mass cutoff in approximate mode
  long max_iters = 100000;
};

struct SemanticsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool assigns_var(const CmdPtr& c, const std::string& name) {
  if (!c) return false;
  switch (c->kind) {
    case Command::Kind::Skip: return false;
    case Command::Kind::Assign:
    case Command::Kind::Sample: return c->var == name;
    case Command::Kind::Seq:
    case Command::Kind::If:
      return assigns_var(c->c1, name) || assigns_var(c->c2, name);
    case Command::Kind::While: return assigns_var(c->c1, name);
  }
  return false;
}

inline void collect_read_vars(const ExprPtr& e, std::set<std::string>& out) {
  if (!e) return;
  if (e->kind == Expr::Kind::Var) out.insert(e->name);
  for (const auto& a : e->args) collect_read_vars(a, out);
}

/// Recognizes `ctr := ctr + 1` (also written `ctr := 1 + ctr`).
inline bool is_unit_increment(const CmdPtr& c, const std::string& ctr) {
  if (c->kind != Command::Kind::Assign || c->var != ctr) return false;
  const Expr& e = *c->expr;
  if (e.kind != Expr::Kind::Binary || e.op != "+") return false;
  auto is_ctr = [&](const ExprPtr& x) {
    return x->kind == Expr::Kind::Var && x->name == ctr && x->tag == 0;
  };
  auto is_one = [](const ExprPtr& x) {
    return x->kind == Expr::Kind::IntLit && x->int_lit == 1;
  };
  return (is_ctr(e.args[0]) && is_one(e.args[1])) ||
         (is_one(e.args[0]) && is_ctr(e.args[1]));
}

/// Counts assignments to `ctr` in the loop body, rejecting any that is not
/// the unit increment. Returns -1 on a disqualifying assignment.
inline long count_unit_increments(const CmdPtr& c, const std::string& ctr) {
  if (!c) return 0;
  switch (c->kind) {
    case Command::Kind::Skip: return 0;
    case Command::Kind::Assign:
      if (c->var != ctr) return 0;
      return is_unit_increment(c, ctr) ? 1 : -1;
    case Command::Kind::Sample: return c->var == ctr ? -1 : 0;
    case Command::Kind::Seq: {
      long a = count_unit_increments(c->c1, ctr);
      long b = count_unit_increments(c->c2, ctr);
      if (a < 0 || b < 0) return -1;
      return a + b;
    }
    case Command::Kind::If: {
      long a = count_unit_increments(c->c1, ctr);
      long b = count_unit_increments(c->c2, ctr);
      if (a < 0 || b < 0 || a != b) return -1;
      return a;
    }
    case Command::Kind::While:
      return count_unit_increments(c->c1, ctr) == 0 ? 0 : -1;
  }
  return -1;
}

}  // namespace detail

/// A loop is syntactically bounded when its guard is `ctr < E`, the body
/// increments ctr by exactly 1 on every path, and neither ctr nor any
/// variable of E is otherwise modified in the body. Such loops run at most
/// max(E - ctr, 0) iterations from any state.
inline bool is_bounded_loop(const Command& loop) {
  if (loop.kind != Command::Kind::While) return false;
  const Expr& g = *loop.expr;
  if (g.kind != Expr::Kind::Binary || g.op != "<") return false;
  if (g.args[0]->kind != Expr::Kind::Var) return false;
  const std::string& ctr = g.args[0]->name;
  std::set<std::string> bound_vars;
  detail::collect_read_vars(g.args[1], bound_vars);
  if (bound_vars.count(ctr)) return false;
  for (const auto& v : bound_vars)
    if (detail::assigns_var(loop.c1, v)) return false;
  return detail::count_unit_increments(loop.c1, ctr) == 1;
}

/// True when every loop in c is syntactically bounded; such programs
/// terminate from every state, so their semantics has full mass.
inline bool all_loops_bounded(const CmdPtr& c) {
  if (!c) return true;
  switch (c->kind) {
    case Command::Kind::Skip:
    case Command::Kind::Assign:
    case Command::Kind::Sample: return true;
    case Command::Kind::Seq:
    case Command::Kind::If:
      return all_loops_bounded(c->c1) && all_loops_bounded(c->c2);
    case Command::Kind::While:
      return is_bounded_loop(*c) && all_loops_bounded(c->c1);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Denotational semantics

struct DenoteResult {
  SubDist dist;
  Rat residual = 0;   // mass still inside some loop when iteration stopped
  long loop_iters = 0;  // largest iteration count used by any loop
};

namespace detail {

inline void denote_into(const CmdPtr& c, const SubDist& mu, DenoteResult& out,
                        const LoopConfig& cfg, SubDist& result);

/// Runs command c from every state of mu, accumulating the output.
inline SubDist denote_dist(const CmdPtr& c, const SubDist& mu,
                           DenoteResult& out, const LoopConfig& cfg) {
  SubDist result;
  denote_into(c, mu, out, cfg, result);
  return result;
}

inline void denote_into(const CmdPtr& c, const SubDist& mu, DenoteResult& out,
                        const LoopConfig& cfg, SubDist& result) {
  switch (c->kind) {
    case Command::Kind::Skip:
      result = result.plus(mu);
      return;
    case Command::Kind::Assign: {
      for (const auto& [s, p] : mu.entries()) {
        State t = s;
        t.set(c->var, eval_expr(c->expr, EvalCtx::unary(s)));
        result.add(t, p);
      }
      return;
    }
    case Command::Kind::Sample: {
      for (const auto& [s, p] : mu.entries()) {
        ValueDist d = eval_dist(c->dist, s);
        for (const auto& [v, q] : d.entries()) {
          State t = s;
          t.set(c->var, v);
          result.add(t, p * q);
        }
      }
      return;
    }
    case Command::Kind::Seq: {
      SubDist mid = denote_dist(c->c1, mu, out, cfg);
      denote_into(c->c2, mid, out, cfg, result);
      return;
    }
    case Command::Kind::If: {
      SubDist mt, mf;
      for (const auto& [s, p] : mu.entries()) {
        if (eval_expr(c->expr, EvalCtx::unary(s)).as_bool())
          mt.add(s, p);
        else
          mf.add(s, p);
      }
      denote_into(c->c1, mt, out, cfg, result);
      denote_into(c->c2, mf, out, cfg, result);
      return;
    }
    case Command::Kind::While: {
      SubDist cur = mu;
      long iters = 0;
      bool bounded = is_bounded_loop(*c);
      // A loop that is not syntactically bounded keeps a shrinking but
      // nonzero mass alive forever; grinding it down to max-iters in exact
      // rationals would take essentially unbounded time, so refuse upfront.
      if (!bounded && cfg.mode == LoopMode::ExactTerminating && !mu.empty())
        throw SemanticsError(
            "loop is not syntactically bounded; exact mode cannot certify "
            "termination (rerun in approximate mode)");
      while (!cur.empty()) {
        SubDist active;
        for (const auto& [s, p] : cur.entries()) {
          if (eval_expr(c->expr, EvalCtx::unary(s)).as_bool())
            active.add(s, p);
          else
            result.add(s, p);
        }
        if (active.empty()) break;
        if (iters >= cfg.max_iters) {
          if (cfg.mode == LoopMode::ExactTerminating)
            throw SemanticsError(
                "loop did not terminate within max-iters in exact mode");
          out.residual += active.mass();
          break;
        }
        if (!bounded && cfg.mode == LoopMode::Approximate &&
            to_double(active.mass()) < cfg.epsilon) {
          out.residual += active.mass();
          break;
        }
        cur = denote_dist(c->c1, active, out, cfg);
        ++iters;
      }
      if (iters > out.loop_iters) out.loop_iters = iters;
      return;
    }
  }
}

}  // namespace detail

/// Exact denotational output distribution of c from initial state s.
/// In approximate mode loops are cut off once the mass still iterating
/// drops below epsilon; the truncated mass is reported as residual.
inline DenoteResult denote_full(const CmdPtr& c, const State& s,
                                const LoopConfig& cfg = {}) {
  DenoteResult out;
  out.dist = detail::denote_dist(c, dirac(s), out, cfg);
  return out;
}

inline SubDist denote(const CmdPtr& c, const State& s,
                      const LoopConfig& cfg = {}) {
  return denote_full(c, s, cfg).dist;
}

inline DenoteResult denote_full(const Program& p, const State& s,
                                const LoopConfig& cfg = {}) {
  return denote_full(p.body, s, cfg);
}

inline SubDist denote(const Program& p, const State& s,
                      const LoopConfig& cfg = {}) {
  return denote(p.body, s, cfg);
}

// ---------------------------------------------------------------------------
// Loop approximants

/// The n-th loop approximant: every while loop is unrolled at most n times,
/// with still-iterating mass discarded (the zero sub-distribution). The
/// approximants increase monotonically to the loop semantics.
inline CmdPtr unroll(const CmdPtr& c, long n) {
  switch (c->kind) {
    case Command::Kind::Skip:
    case Command::Kind::Assign:
    case Command::Kind::Sample: return c;
    case Command::Kind::Seq:
      return mk_seq(unroll(c->c1, n), unroll(c->c2, n));
    case Command::Kind::If:
      return mk_if(c->expr, unroll(c->c1, n), unroll(c->c2, n));
    case Command::Kind::While: {
      CmdPtr body = unroll(c->c1, n);
      // abort encoded as `while true { skip; }`, which is cut off at depth 0
      CmdPtr acc = mk_while(mk_bool(true), mk_skip());
      for (long i = 0; i < n; ++i)
        acc = mk_if(c->expr, mk_seq(body, acc), mk_skip());
      return acc;
    }
  }
  return c;
}

inline SubDist denote_approximant(const CmdPtr& c, const State& s, long n) {
  LoopConfig cfg;
  cfg.mode = LoopMode::Approximate;
  cfg.epsilon = 0;
  cfg.max_iters = 0;  // any residual loop aborts immediately
  return denote(unroll(c, n), s, cfg);
}

}  // namespace kantorel
