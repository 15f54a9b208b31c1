#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>

#include "kantorel/ast.hpp"
#include "kantorel/blockdecomp.hpp"
#include "kantorel/dist.hpp"
#include "kantorel/rational.hpp"
#include "kantorel/value.hpp"

namespace kantorel {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Evaluation context. Unary evaluation sets only s1; relational evaluation
/// sets both. `locals` holds bound index variables (sums, maxes) and free
/// symbols such as an invariant-family index.
struct EvalCtx {
  const State* s1 = nullptr;
  const State* s2 = nullptr;
  std::map<std::string, Int> locals;

  static EvalCtx unary(const State& s) {
    EvalCtx c;
    c.s1 = &s;
    return c;
  }
  static EvalCtx pair(const State& a, const State& b) {
    EvalCtx c;
    c.s1 = &a;
    c.s2 = &b;
    return c;
  }
};

namespace detail {

inline const Value& lookup_var(const Expr& e, const EvalCtx& ctx) {
  if (e.tag == 1) {
    if (!ctx.s1) throw EvalError("tagged variable in unary context: " + e.name);
    return ctx.s1->get(e.name);
  }
  if (e.tag == 2) {
    if (!ctx.s2) throw EvalError("tagged variable in unary context: " + e.name);
    return ctx.s2->get(e.name);
  }
  // Untagged in relational context: permitted when both states agree.
  if (ctx.s2) {
    const Value& a = ctx.s1->get(e.name);
    const Value& b = ctx.s2->get(e.name);
    if (!(a == b))
      throw EvalError("untagged variable '" + e.name +
                      "' differs between the two states");
    return a;
  }
  return ctx.s1->get(e.name);
}

inline void require_bit(const Int& b) {
  if (b != 0 && b != 1) throw EvalError("bitvector entry not in {0,1}");
}

}  // namespace detail

/// shiftR(a, j): cycle the block a[0..j] one position right, moving a[j]
/// to the front; positions above j are unchanged.
inline std::vector<Int> shift_right(const std::vector<Int>& a, long j) {
  if (j < 0 || j >= static_cast<long>(a.size()))
    throw EvalError("shiftR index out of bounds");
  std::vector<Int> out = a;
  std::rotate(out.begin(), out.begin() + j, out.begin() + j + 1);
  return out;
}

/// select(a, b): subsequence of a at positions where bit b[i] = 1,
/// preserving relative order.
inline std::vector<Int> select_bits(const std::vector<Int>& a,
                                    const std::vector<Int>& b) {
  if (a.size() != b.size()) throw EvalError("select: length mismatch");
  std::vector<Int> out;
  for (size_t i = 0; i < a.size(); ++i) {
    detail::require_bit(b[i]);
    if (b[i] == 1) out.push_back(a[i]);
  }
  return out;
}

inline std::vector<Int> neg_bits(const std::vector<Int>& b) {
  std::vector<Int> out(b.size());
  for (size_t i = 0; i < b.size(); ++i) {
    detail::require_bit(b[i]);
    out[i] = 1 - b[i];
  }
  return out;
}

/// invPerm(a, v): position of value v in array a.
inline Int inv_perm(const std::vector<Int>& a, const Int& v) {
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] == v) return Int(i);
  throw EvalError("invPerm: value not present");
}

inline Value eval_expr(const ExprPtr& e, const EvalCtx& ctx);

namespace detail {

inline Int eval_int(const ExprPtr& e, const EvalCtx& ctx) {
  Value v = eval_expr(e, ctx);
  return v.as_int();
}
inline bool eval_bool(const ExprPtr& e, const EvalCtx& ctx) {
  Value v = eval_expr(e, ctx);
  return v.as_bool();
}

}  // namespace detail

inline Value eval_expr(const ExprPtr& e, const EvalCtx& ctx) {
  using K = Expr::Kind;
  switch (e->kind) {
    case K::IntLit: return Value(e->int_lit);
    case K::BoolLit: return Value(e->bool_lit);
    case K::Var: {
      if (e->tag == 0) {
        auto it = ctx.locals.find(e->name);
        if (it != ctx.locals.end()) return Value(it->second);
      }
      return detail::lookup_var(*e, ctx);
    }
    case K::Unary: {
      if (e->op == "-") return Value(Int(-detail::eval_int(e->args[0], ctx)));
      if (e->op == "!") return Value(!detail::eval_bool(e->args[0], ctx));
      throw EvalError("unknown unary op " + e->op);
    }
    case K::Binary: {
      const std::string& op = e->op;
      if (op == "&&") {
        return Value(detail::eval_bool(e->args[0], ctx) &&
                     detail::eval_bool(e->args[1], ctx));
      }
      if (op == "||") {
        return Value(detail::eval_bool(e->args[0], ctx) ||
                     detail::eval_bool(e->args[1], ctx));
      }
      Value a = eval_expr(e->args[0], ctx);
      Value b = eval_expr(e->args[1], ctx);
      if (op == "==") return Value(a == b);
      if (op == "!=") return Value(!(a == b));
      const Int& x = a.as_int();
      const Int& y = b.as_int();
      if (op == "+") return Value(Int(x + y));
      if (op == "-") return Value(Int(x - y));
      if (op == "*") return Value(Int(x * y));
      if (op == "monus") return Value(x > y ? Int(x - y) : Int(0));
      if (op == "max") return Value(x > y ? x : y);
      if (op == "min") return Value(x < y ? x : y);
      if (op == "<") return Value(x < y);
      if (op == "<=") return Value(x <= y);
      if (op == ">") return Value(x > y);
      if (op == ">=") return Value(x >= y);
      throw EvalError("unknown binary op " + op);
    }
    case K::Index: {
      Value a = eval_expr(e->args[0], ctx);
      Int i = detail::eval_int(e->args[1], ctx);
      const auto& arr = a.as_array();
      if (i < 0 || i >= static_cast<long>(arr.size()))
        throw EvalError("array index out of bounds: " + i.str());
      return Value(arr[i.convert_to<long>()]);
    }
    case K::Update: {
      Value a = eval_expr(e->args[0], ctx);
      Int i = detail::eval_int(e->args[1], ctx);
      Int v = detail::eval_int(e->args[2], ctx);
      auto arr = a.as_array();
      if (i < 0 || i >= static_cast<long>(arr.size()))
        throw EvalError("array update out of bounds: " + i.str());
      arr[i.convert_to<long>()] = v;
      return Value(std::move(arr));
    }
    case K::ArrayLit: {
      std::vector<Int> arr;
      arr.reserve(e->args.size());
      for (const auto& a : e->args) arr.push_back(detail::eval_int(a, ctx));
      return Value(std::move(arr));
    }
    case K::Call: {
      const std::string& fn = e->name;
      if (fn == "shiftR") {
        auto a = eval_expr(e->args[0], ctx).as_array();
        Int j = detail::eval_int(e->args[1], ctx);
        return Value(shift_right(a, j.convert_to<long>()));
      }
      if (fn == "flip") {
        auto a = eval_expr(e->args[0], ctx).as_array();
        Int j = detail::eval_int(e->args[1], ctx);
        // flip(a, 0) = a; flip(a, j) reverses bit j-1 for 1 <= j <= len(a)
        if (j < 0 || j > static_cast<long>(a.size()))
          throw EvalError("flip index out of bounds");
        if (j > 0) {
          long at = j.convert_to<long>() - 1;
          detail::require_bit(a[at]);
          a[at] = 1 - a[at];
        }
        return Value(std::move(a));
      }
      if (fn == "cat") {
        auto a = eval_expr(e->args[0], ctx).as_array();
        auto b = eval_expr(e->args[1], ctx).as_array();
        a.insert(a.end(), b.begin(), b.end());
        return Value(std::move(a));
      }
      if (fn == "select") {
        auto a = eval_expr(e->args[0], ctx).as_array();
        auto b = eval_expr(e->args[1], ctx).as_array();
        return Value(select_bits(a, b));
      }
      if (fn == "negBits") {
        auto b = eval_expr(e->args[0], ctx).as_array();
        return Value(neg_bits(b));
      }
      if (fn == "invPerm") {
        auto a = eval_expr(e->args[0], ctx).as_array();
        Int v = detail::eval_int(e->args[1], ctx);
        return Value(inv_perm(a, v));
      }
      if (fn == "len") {
        auto a = eval_expr(e->args[0], ctx).as_array();
        return Value(Int(a.size()));
      }
      throw EvalError("unknown builtin " + fn);
    }
  }
  throw EvalError("bad expression node");
}

/// Evaluates a primitive distribution in a state; finite support, mass 1.
inline ValueDist eval_dist(const DistPtr& d, const State& s) {
  EvalCtx ctx = EvalCtx::unary(s);
  ValueDist out;
  switch (d->kind) {
    case DistExpr::Kind::UniformRange: {
      Int lo = detail::eval_int(d->lo, ctx);
      Int hi = detail::eval_int(d->hi, ctx);
      if (hi < lo) throw EvalError("uniform range is empty");
      Int n = hi - lo + 1;
      Rat p = Rat(1) / Rat(n);
      for (Int v = lo; v <= hi; ++v) out.add(Value(v), p);
      break;
    }
    case DistExpr::Kind::UniformSet: {
      Rat p = Rat(1) / Rat(Int(d->set.size()));
      for (const auto& v : d->set) out.add(v, p);
      break;
    }
    case DistExpr::Kind::Bernoulli: {
      if (d->bern_p < 0 || d->bern_p > 1)
        throw EvalError("bernoulli parameter outside [0,1]");
      out.add(Value(false), Rat(1) - d->bern_p);
      out.add(Value(true), d->bern_p);
      break;
    }
    case DistExpr::Kind::UniformBits: {
      Int n = detail::eval_int(d->nbits, ctx);
      long nl = n.convert_to<long>();
      if (nl < 0 || nl > 20) throw EvalError("bits(n): n out of range");
      Rat p = Rat(1) / Rat(Int(1) << nl);
      for (long m = 0; m < (1L << nl); ++m) {
        std::vector<Int> bits(nl);
        for (long i = 0; i < nl; ++i) bits[i] = (m >> i) & 1;
        out.add(Value(std::move(bits)), p);
      }
      break;
    }
    case DistExpr::Kind::Table: {
      Rat total = 0;
      for (const auto& [v, p] : d->table) {
        if (p < 0) throw EvalError("table probability negative");
        out.add(v, p);
        total += p;
      }
      if (total != 1) throw EvalError("table probabilities do not sum to 1");
      break;
    }
  }
  if (out.mass() != 1) throw EvalError("primitive distribution mass != 1");
  return out;
}

// ---------------------------------------------------------------------------
// Expectation expressions

namespace detail {

inline ExtRat value_to_scalar(const Value& v) {
  if (v.is_int()) return ExtRat(v.as_int());
  if (v.is_bool()) return ExtRat(v.as_bool() ? 1 : 0);
  throw EvalError("array value used as a number");
}

inline ExtRat builtin_dH(const std::vector<Int>& a, const std::vector<Int>& b) {
  if (a.size() != b.size()) throw EvalError("dH: length mismatch");
  if (a.empty()) return ExtRat(0);
  long mism = 0;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) ++mism;
  return ExtRat(Rat(Int(mism), Int(a.size())));
}

/// Matched-prefix distance: (1/N) * (N - length of longest common prefix).
inline ExtRat builtin_dM(const std::vector<Int>& a, const std::vector<Int>& b) {
  if (a.size() != b.size()) throw EvalError("dM: length mismatch");
  if (a.empty()) return ExtRat(0);
  size_t lcp = 0;
  while (lcp < a.size() && a[lcp] == b[lcp]) ++lcp;
  return ExtRat(Rat(Int(a.size() - lcp), Int(a.size())));
}

inline ExtRat builtin_inf_norm(const std::vector<Int>& a,
                               const std::vector<Int>& b) {
  if (a.size() != b.size()) throw EvalError("infNorm: length mismatch");
  Int m = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    Int d = a[i] > b[i] ? Int(a[i] - b[i]) : Int(b[i] - a[i]);
    if (d > m) m = d;
  }
  return ExtRat(m);
}

inline ExtRat builtin_dBD(const std::vector<Int>& a,
                          const std::vector<Int>& b) {
  return ExtRat(block_distance(a, b));
}

}  // namespace detail

inline ExtRat eval_sexpr(const SExprPtr& e, EvalCtx& ctx) {
  using K = SExpr::Kind;
  switch (e->kind) {
    case K::Const: return ExtRat(e->c);
    case K::Inf: return ExtRat::infinity();
    case K::Num: return detail::value_to_scalar(eval_expr(e->ie, ctx));
    case K::Add: return eval_sexpr(e->args[0], ctx) + eval_sexpr(e->args[1], ctx);
    case K::Sub: return eval_sexpr(e->args[0], ctx) - eval_sexpr(e->args[1], ctx);
    case K::Mul: return eval_sexpr(e->args[0], ctx) * eval_sexpr(e->args[1], ctx);
    case K::Div: return eval_sexpr(e->args[0], ctx) / eval_sexpr(e->args[1], ctx);
    case K::Monus:
      return eval_sexpr(e->args[0], ctx).monus(eval_sexpr(e->args[1], ctx));
    case K::Max:
      return ExtRat::max(eval_sexpr(e->args[0], ctx),
                         eval_sexpr(e->args[1], ctx));
    case K::Min:
      return ExtRat::min(eval_sexpr(e->args[0], ctx),
                         eval_sexpr(e->args[1], ctx));
    case K::Abs: return eval_sexpr(e->args[0], ctx).abs();
    case K::Pow: {
      ExtRat base = eval_sexpr(e->args[0], ctx);
      ExtRat ex = eval_sexpr(e->args[1], ctx);
      if (ex.is_inf()) throw EvalError("pow: infinite exponent");
      const Rat& q = ex.value();
      if (denominator(q) != 1) throw EvalError("pow: non-integer exponent");
      return ExtRat::pow(base, numerator(q));
    }
    case K::Sum:
    case K::MaxR: {
      ExtRat lo_v = eval_sexpr(e->args[0], ctx);
      ExtRat hi_v = eval_sexpr(e->args[1], ctx);
      Int lo = numerator(lo_v.value());
      Int hi = numerator(hi_v.value());
      if (denominator(lo_v.value()) != 1 || denominator(hi_v.value()) != 1)
        throw EvalError("range bound is not an integer");
      ExtRat acc(0);
      auto saved = ctx.locals.find(e->ix);
      bool had = saved != ctx.locals.end();
      Int old = had ? saved->second : Int(0);
      for (Int i = lo; i <= hi; ++i) {
        ctx.locals[e->ix] = i;
        ExtRat term = eval_sexpr(e->args[2], ctx);
        acc = e->kind == K::Sum ? acc + term : ExtRat::max(acc, term);
      }
      if (had)
        ctx.locals[e->ix] = old;
      else
        ctx.locals.erase(e->ix);
      return acc;
    }
    case K::Indicator:
      return ExtRat(detail::eval_bool(e->ie, ctx) ? 1 : 0);
    case K::Builtin: {
      auto a = eval_expr(e->eargs[0], ctx).as_array();
      auto b = eval_expr(e->eargs[1], ctx).as_array();
      if (e->fn == "dH") return detail::builtin_dH(a, b);
      if (e->fn == "dM") return detail::builtin_dM(a, b);
      if (e->fn == "dBD") return detail::builtin_dBD(a, b);
      if (e->fn == "infNorm") return detail::builtin_inf_norm(a, b);
      throw EvalError("unknown distance builtin " + e->fn);
    }
  }
  throw EvalError("bad expectation node");
}

/// Relational expectation value at a state pair; must be >= 0 or infinity.
inline ExtRat eval_relexp(const SExprPtr& e, const State& s1, const State& s2) {
  EvalCtx ctx = EvalCtx::pair(s1, s2);
  ExtRat v = eval_sexpr(e, ctx);
  if (!v.is_nonneg())
    throw EvalError("relational expectation evaluated to a negative value");
  return v;
}

/// Unary expectation value at a state.
inline ExtRat eval_unary(const SExprPtr& e, const State& s) {
  EvalCtx ctx = EvalCtx::unary(s);
  ExtRat v = eval_sexpr(e, ctx);
  if (!v.is_nonneg())
    throw EvalError("expectation evaluated to a negative value");
  return v;
}

}  // namespace kantorel
