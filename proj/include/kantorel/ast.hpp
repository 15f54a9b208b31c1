#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kantorel/rational.hpp"
#include "kantorel/value.hpp"

namespace kantorel {

struct SourceSpan {
  int line = 0;
  int col = 0;
};

enum class Type { Int, Bool, Array };

inline const char* type_name(Type t) {
  switch (t) {
    case Type::Int: return "int";
    case Type::Bool: return "bool";
    case Type::Array: return "array";
  }
  return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Program expression. In relational expectation contexts variable
/// references may carry a tag (1 or 2) selecting the left or right state;
/// tag 0 means untagged.
struct Expr {
  enum class Kind {
    IntLit,
    BoolLit,
    Var,
    Unary,    // op in {-, !}
    Binary,   // op in {+,-,*,monus,max,min,==,!=,<,<=,>,>=,&&,||}
    Index,    // args[0][args[1]]
    Update,   // Update(args[0], args[1], args[2])
    ArrayLit,
    Call,     // shiftR, cat, select, negBits, invPerm, len
  };
  Kind kind;
  Int int_lit;
  bool bool_lit = false;
  std::string name;  // Var or Call
  int tag = 0;
  std::string op;
  std::vector<ExprPtr> args;
  SourceSpan span;
};

inline ExprPtr mk_int(Int n) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::IntLit;
  e->int_lit = std::move(n);
  return e;
}
inline ExprPtr mk_bool(bool b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::BoolLit;
  e->bool_lit = b;
  return e;
}
inline ExprPtr mk_var(std::string name, int tag = 0) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Var;
  e->name = std::move(name);
  e->tag = tag;
  return e;
}
inline ExprPtr mk_binary(std::string op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Binary;
  e->op = std::move(op);
  e->args = {std::move(a), std::move(b)};
  return e;
}
inline ExprPtr mk_unary(std::string op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Unary;
  e->op = std::move(op);
  e->args = {std::move(a)};
  return e;
}
inline ExprPtr mk_call(std::string name, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Call;
  e->name = std::move(name);
  e->args = std::move(args);
  return e;
}
inline ExprPtr mk_index(ExprPtr a, ExprPtr i) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Index;
  e->args = {std::move(a), std::move(i)};
  return e;
}
inline ExprPtr mk_update(ExprPtr a, ExprPtr i, ExprPtr v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Update;
  e->args = {std::move(a), std::move(i), std::move(v)};
  return e;
}

/// Primitive distribution: finite support, total mass exactly 1.
struct DistExpr {
  enum class Kind { UniformRange, UniformSet, Bernoulli, UniformBits, Table };
  Kind kind;
  ExprPtr lo, hi;                             // uniform(lo .. hi), inclusive
  std::vector<Value> set;                     // uniform{v, ...}
  Rat bern_p;                                 // bernoulli(p)
  ExprPtr nbits;                              // bits(n)
  std::vector<std::pair<Value, Rat>> table;   // table{v: p, ...}
  SourceSpan span;
};
using DistPtr = std::shared_ptr<const DistExpr>;

struct Command;
using CmdPtr = std::shared_ptr<const Command>;

struct Command {
  enum class Kind { Skip, Assign, Sample, Seq, If, While };
  Kind kind;
  std::string var;   // Assign / Sample target
  ExprPtr expr;      // Assign rhs; If / While guard
  DistPtr dist;      // Sample
  CmdPtr c1, c2;     // Seq both; If then/else; While body = c1
  SourceSpan span;
  int site = -1;     // sampling site index, in program order
};

inline CmdPtr mk_skip() {
  auto c = std::make_shared<Command>();
  c->kind = Command::Kind::Skip;
  return c;
}
inline CmdPtr mk_assign(std::string var, ExprPtr e) {
  auto c = std::make_shared<Command>();
  c->kind = Command::Kind::Assign;
  c->var = std::move(var);
  c->expr = std::move(e);
  return c;
}
inline CmdPtr mk_sample(std::string var, DistPtr d) {
  auto c = std::make_shared<Command>();
  c->kind = Command::Kind::Sample;
  c->var = std::move(var);
  c->dist = std::move(d);
  return c;
}
inline CmdPtr mk_seq(CmdPtr a, CmdPtr b) {
  auto c = std::make_shared<Command>();
  c->kind = Command::Kind::Seq;
  c->c1 = std::move(a);
  c->c2 = std::move(b);
  return c;
}
inline CmdPtr mk_if(ExprPtr g, CmdPtr t, CmdPtr e) {
  auto c = std::make_shared<Command>();
  c->kind = Command::Kind::If;
  c->expr = std::move(g);
  c->c1 = std::move(t);
  c->c2 = std::move(e);
  return c;
}
inline CmdPtr mk_while(ExprPtr g, CmdPtr body) {
  auto c = std::make_shared<Command>();
  c->kind = Command::Kind::While;
  c->expr = std::move(g);
  c->c1 = std::move(body);
  return c;
}

struct VarDecl {
  std::string name;
  Type type;
  long array_len = 0;
};

struct Program {
  std::string name;
  std::vector<VarDecl> decls;
  CmdPtr body;
  int num_sites = 0;

  const VarDecl* find_decl(const std::string& n) const {
    for (const auto& d : decls)
      if (d.name == n) return &d;
    return nullptr;
  }
};

/// Expectation expression: evaluates to an extended rational over one state
/// (unary) or a tagged pair of states (relational).
struct SExpr;
using SExprPtr = std::shared_ptr<const SExpr>;

struct SExpr {
  enum class Kind {
    Const,      // rational literal
    Inf,
    Num,        // embedded integer/bool program expression, as a number
    Add, Sub, Mul, Div,
    Monus, Max, Min,
    Abs,        // abs(e)
    Pow,        // pow(base, natural-exponent)
    Sum,        // sum(ix, lo, hi, body), inclusive; empty range = 0
    MaxR,       // maxr(ix, lo, hi, body); empty range = 0
    Indicator,  // [boolean program expression]
    Builtin,    // dH, dM, dBD, infNorm over two array expressions
  };
  Kind kind;
  Rat c;
  ExprPtr ie;                  // Num operand or Indicator condition
  std::string ix;              // Sum / MaxR index variable
  std::string fn;              // Builtin name
  std::vector<SExprPtr> args;
  std::vector<ExprPtr> eargs;  // Builtin array operands
  SourceSpan span;
};

inline SExprPtr s_const(Rat q) {
  auto e = std::make_shared<SExpr>();
  e->kind = SExpr::Kind::Const;
  e->c = std::move(q);
  return e;
}
inline SExprPtr s_inf() {
  auto e = std::make_shared<SExpr>();
  e->kind = SExpr::Kind::Inf;
  return e;
}
inline SExprPtr s_num(ExprPtr ie) {
  auto e = std::make_shared<SExpr>();
  e->kind = SExpr::Kind::Num;
  e->ie = std::move(ie);
  return e;
}
inline SExprPtr s_node(SExpr::Kind k, std::vector<SExprPtr> args) {
  auto e = std::make_shared<SExpr>();
  e->kind = k;
  e->args = std::move(args);
  return e;
}
inline SExprPtr s_ind(ExprPtr cond) {
  auto e = std::make_shared<SExpr>();
  e->kind = SExpr::Kind::Indicator;
  e->ie = std::move(cond);
  return e;
}
inline SExprPtr s_builtin(std::string fn, std::vector<ExprPtr> eargs) {
  auto e = std::make_shared<SExpr>();
  e->kind = SExpr::Kind::Builtin;
  e->fn = std::move(fn);
  e->eargs = std::move(eargs);
  return e;
}
inline SExprPtr s_range(SExpr::Kind k, std::string ix, SExprPtr lo, SExprPtr hi,
                        SExprPtr body) {
  auto e = std::make_shared<SExpr>();
  e->kind = k;
  e->ix = std::move(ix);
  e->args = {std::move(lo), std::move(hi), std::move(body)};
  return e;
}
inline SExprPtr s_add(SExprPtr a, SExprPtr b) {
  return s_node(SExpr::Kind::Add, {std::move(a), std::move(b)});
}
inline SExprPtr s_mul(SExprPtr a, SExprPtr b) {
  return s_node(SExpr::Kind::Mul, {std::move(a), std::move(b)});
}

}  // namespace kantorel
