#pragma once

#include <cctype>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kantorel/ast.hpp"
#include "kantorel/rational.hpp"

namespace kantorel {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg + " at " + std::to_string(line_) + ":" +
                           std::to_string(col_)),
        line(line_),
        col(col_) {}
};

namespace lex {

enum class Tok {
  Ident, Number, Punct, End,
};

struct Token {
  Tok kind;
  std::string text;
  int line, col;
};

inline std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto push = [&](Tok k, std::string t, int l, int c) {
    out.push_back({k, std::move(t), l, c});
  };
  while (i < src.size()) {
    char ch = src[i];
    if (ch == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      ++i;
      ++col;
      continue;
    }
    if (ch == '#') {  // line comment
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (ch == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    int l = line, c = col;
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
      size_t j = i;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      push(Tok::Ident, src.substr(i, j - i), l, c);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j])))
        ++j;
      push(Tok::Number, src.substr(i, j - i), l, c);
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    // multi-char punctuation
    static const char* two[] = {":=", ":~", "==", "!=", "<=", ">=", "&&",
                                "||", ".."};
    bool matched = false;
    for (const char* t : two) {
      if (src.compare(i, 2, t) == 0) {
        push(Tok::Punct, t, l, c);
        i += 2;
        col += 2;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    static const std::string singles = "+-*/%<>=!(){}[],;:|^.";
    if (singles.find(ch) != std::string::npos) {
      push(Tok::Punct, std::string(1, ch), l, c);
      ++i;
      ++col;
      continue;
    }
    throw ParseError(std::string("unexpected character '") + ch + "'", l, c);
  }
  out.push_back({Tok::End, "", line, col});
  return out;
}

}  // namespace lex

namespace detail {

class ParserBase {
public:
  explicit ParserBase(const std::string& src) : toks_(lex::tokenize(src)) {}

protected:
  const lex::Token& peek(size_t k = 0) const {
    size_t i = pos_ + k;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  lex::Token next() {
    const lex::Token& t = peek();
    if (t.kind != lex::Tok::End) ++pos_;
    return t;
  }
  bool at(const std::string& text) const { return peek().text == text; }
  bool at_ident(const std::string& text) const {
    return peek().kind == lex::Tok::Ident && peek().text == text;
  }
  bool accept(const std::string& text) {
    if (at(text)) {
      next();
      return true;
    }
    return false;
  }
  lex::Token expect(const std::string& text) {
    if (!at(text)) fail("expected '" + text + "', found '" + tok_desc() + "'");
    return next();
  }
  std::string expect_ident() {
    if (peek().kind != lex::Tok::Ident)
      fail("expected identifier, found '" + tok_desc() + "'");
    return next().text;
  }
  Int expect_number() {
    if (peek().kind != lex::Tok::Number)
      fail("expected number, found '" + tok_desc() + "'");
    return Int(next().text);
  }
  std::string tok_desc() const {
    return peek().kind == lex::Tok::End ? "<eof>" : peek().text;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().col);
  }
  SourceSpan span() const { return {peek().line, peek().col}; }

  std::vector<lex::Token> toks_;
  size_t pos_ = 0;
};

inline bool is_scalar_fn(const std::string& s) {
  static const std::set<std::string> fns = {"abs", "pow",  "sum", "maxr",
                                            "dH",  "dM",   "dBD", "infNorm"};
  return fns.count(s) != 0;
}

inline bool is_expr_call(const std::string& s) {
  static const std::set<std::string> fns = {"shiftR",  "cat",     "select",
                                            "negBits", "invPerm", "len",
                                            "flip",    "max",     "min",
                                            "monus"};
  return fns.count(s) != 0;
}

class Parser : public ParserBase {
public:
  explicit Parser(const std::string& src) : ParserBase(src) {}

  // ----- program expressions -----

  ExprPtr parse_expr() { return parse_or(); }

  // ----- expectation expressions -----

  SExprPtr parse_sexpr() { return parse_s_add(); }

  // ----- programs -----

  Program parse_program() {
    Program p;
    if (at_ident("program")) {
      next();
      p.name = expect_ident();
    }
    while (at_ident("var")) {
      next();
      VarDecl d;
      d.name = expect_ident();
      expect(":");
      std::string ty = expect_ident();
      if (ty == "int") {
        d.type = Type::Int;
        if (accept("[")) {
          d.type = Type::Array;
          d.array_len = expect_number().convert_to<long>();
          expect("]");
        }
      } else if (ty == "bool") {
        d.type = Type::Bool;
      } else {
        fail("unknown type '" + ty + "'");
      }
      expect(";");
      p.decls.push_back(std::move(d));
    }
    p.body = parse_stmts_until_end();
    if (peek().kind != lex::Tok::End) fail("trailing input after program");
    p.num_sites = site_counter_;
    return p;
  }

private:
  int site_counter_ = 0;

  // Statements

  CmdPtr parse_stmts_until_end() {
    CmdPtr acc = nullptr;
    while (peek().kind != lex::Tok::End && !at("}")) {
      CmdPtr s = parse_stmt();
      acc = acc ? mk_seq(std::move(acc), std::move(s)) : std::move(s);
    }
    return acc ? acc : mk_skip();
  }

  CmdPtr parse_block() {
    expect("{");
    CmdPtr body = parse_stmts_until_end();
    expect("}");
    return body;
  }

  CmdPtr parse_stmt() {
    SourceSpan sp = span();
    if (at_ident("skip")) {
      next();
      expect(";");
      auto c = std::make_shared<Command>();
      c->kind = Command::Kind::Skip;
      c->span = sp;
      return c;
    }
    if (at_ident("if")) {
      next();
      ExprPtr guard = parse_expr();
      CmdPtr then_c = parse_block();
      CmdPtr else_c = mk_skip();
      if (at_ident("else")) {
        next();
        else_c = parse_block();
      }
      auto c = std::make_shared<Command>();
      c->kind = Command::Kind::If;
      c->expr = std::move(guard);
      c->c1 = std::move(then_c);
      c->c2 = std::move(else_c);
      c->span = sp;
      return c;
    }
    if (at_ident("while")) {
      next();
      ExprPtr guard = parse_expr();
      CmdPtr body = parse_block();
      auto c = std::make_shared<Command>();
      c->kind = Command::Kind::While;
      c->expr = std::move(guard);
      c->c1 = std::move(body);
      c->span = sp;
      return c;
    }
    // assignment / sample, possibly to an array element
    std::string name = expect_ident();
    if (accept("[")) {
      ExprPtr idx = parse_expr();
      expect("]");
      expect(":=");
      ExprPtr rhs = parse_expr();
      expect(";");
      auto c = std::make_shared<Command>();
      c->kind = Command::Kind::Assign;
      c->var = name;
      c->expr = mk_update(mk_var(name), std::move(idx), std::move(rhs));
      c->span = sp;
      return c;
    }
    if (accept(":=")) {
      ExprPtr rhs = parse_expr();
      expect(";");
      auto c = std::make_shared<Command>();
      c->kind = Command::Kind::Assign;
      c->var = name;
      c->expr = std::move(rhs);
      c->span = sp;
      return c;
    }
    if (accept(":~")) {
      DistPtr d = parse_dist();
      expect(";");
      auto c = std::make_shared<Command>();
      c->kind = Command::Kind::Sample;
      c->var = name;
      c->dist = std::move(d);
      c->span = sp;
      c->site = site_counter_++;
      return c;
    }
    fail("expected ':=' or ':~' after identifier '" + name + "'");
  }

  DistPtr parse_dist() {
    SourceSpan sp = span();
    auto d = std::make_shared<DistExpr>();
    d->span = sp;
    std::string kw = expect_ident();
    if (kw == "uniform") {
      if (accept("(")) {
        d->kind = DistExpr::Kind::UniformRange;
        d->lo = parse_expr();
        expect("..");
        d->hi = parse_expr();
        expect(")");
        return d;
      }
      expect("{");
      d->kind = DistExpr::Kind::UniformSet;
      do {
        d->set.push_back(parse_literal_value());
      } while (accept(","));
      expect("}");
      return d;
    }
    if (kw == "bernoulli") {
      d->kind = DistExpr::Kind::Bernoulli;
      expect("(");
      d->bern_p = parse_rat();
      expect(")");
      return d;
    }
    if (kw == "bits") {
      d->kind = DistExpr::Kind::UniformBits;
      expect("(");
      d->nbits = parse_expr();
      expect(")");
      return d;
    }
    if (kw == "table") {
      d->kind = DistExpr::Kind::Table;
      expect("{");
      do {
        Value v = parse_literal_value();
        expect(":");
        Rat p = parse_rat();
        d->table.emplace_back(std::move(v), std::move(p));
      } while (accept(","));
      expect("}");
      return d;
    }
    fail("unknown distribution '" + kw + "'");
  }

  Value parse_literal_value() {
    if (at_ident("true")) {
      next();
      return Value(true);
    }
    if (at_ident("false")) {
      next();
      return Value(false);
    }
    if (accept("[")) {
      std::vector<Int> arr;
      if (!at("]")) {
        do {
          bool neg = accept("-");
          Int n = expect_number();
          arr.push_back(neg ? Int(-n) : n);
        } while (accept(","));
      }
      expect("]");
      return Value(std::move(arr));
    }
    bool neg = accept("-");
    Int n = expect_number();
    return Value(neg ? Int(-n) : n);
  }

  Rat parse_rat() {
    bool neg = accept("-");
    Int num = expect_number();
    Int den = 1;
    if (accept("/")) den = expect_number();
    Rat q(num, den);
    return neg ? Rat(-q) : q;
  }

  // Program expressions, precedence climbing.

  ExprPtr parse_or() {
    ExprPtr e = parse_and();
    while (at("||")) {
      next();
      e = mk_binary("||", std::move(e), parse_and());
    }
    return e;
  }
  ExprPtr parse_and() {
    ExprPtr e = parse_cmp();
    while (at("&&")) {
      next();
      e = mk_binary("&&", std::move(e), parse_cmp());
    }
    return e;
  }
  ExprPtr parse_cmp() {
    ExprPtr e = parse_add();
    static const std::set<std::string> ops = {"==", "!=", "<", "<=", ">", ">="};
    if (ops.count(peek().text)) {
      std::string op = next().text;
      e = mk_binary(op, std::move(e), parse_add());
    }
    return e;
  }
  ExprPtr parse_add() {
    ExprPtr e = parse_mul();
    while (at("+") || at("-")) {
      std::string op = next().text;
      e = mk_binary(op, std::move(e), parse_mul());
    }
    return e;
  }
  ExprPtr parse_mul() {
    ExprPtr e = parse_unary_expr();
    while (at("*")) {
      next();
      e = mk_binary("*", std::move(e), parse_unary_expr());
    }
    return e;
  }
  ExprPtr parse_unary_expr() {
    if (accept("-")) return mk_unary("-", parse_unary_expr());
    if (accept("!")) return mk_unary("!", parse_unary_expr());
    return parse_postfix();
  }
  ExprPtr parse_postfix() {
    ExprPtr e = parse_primary();
    while (at("[")) {
      next();
      ExprPtr idx = parse_expr();
      expect("]");
      e = mk_index(std::move(e), std::move(idx));
    }
    return e;
  }
  ExprPtr parse_primary() {
    SourceSpan sp = span();
    if (peek().kind == lex::Tok::Number) {
      auto e = mk_int(expect_number());
      return e;
    }
    if (accept("(")) {
      ExprPtr e = parse_expr();
      expect(")");
      return e;
    }
    if (accept("[")) {  // array literal
      std::vector<ExprPtr> elems;
      if (!at("]")) {
        do {
          elems.push_back(parse_expr());
        } while (accept(","));
      }
      expect("]");
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::ArrayLit;
      e->args = std::move(elems);
      e->span = sp;
      return e;
    }
    if (peek().kind == lex::Tok::Ident) {
      std::string name = next().text;
      if (name == "true") return mk_bool(true);
      if (name == "false") return mk_bool(false);
      if (is_expr_call(name) && at("(")) {
        next();
        std::vector<ExprPtr> args;
        if (!at(")")) {
          do {
            args.push_back(parse_expr());
          } while (accept(","));
        }
        expect(")");
        if ((name == "max" || name == "min" || name == "monus") &&
            args.size() == 2) {
          return mk_binary(name, args[0], args[1]);
        }
        auto e = mk_call(name, std::move(args));
        return e;
      }
      int tag = 0;
      // tagged reference: x<1> or x<2>, only when directly adjacent
      if (at("<") && peek(1).kind == lex::Tok::Number &&
          (peek(1).text == "1" || peek(1).text == "2") && peek(2).text == ">") {
        next();
        tag = std::stoi(next().text);
        next();
      }
      auto e = mk_var(name, tag);
      return e;
    }
    fail("expected expression, found '" + tok_desc() + "'");
  }

  // Expectation expressions.

  SExprPtr parse_s_add() {
    SExprPtr e = parse_s_mul();
    while (at("+") || at("-")) {
      std::string op = next().text;
      e = s_node(op == "+" ? SExpr::Kind::Add : SExpr::Kind::Sub,
                 {std::move(e), parse_s_mul()});
    }
    return e;
  }
  SExprPtr parse_s_mul() {
    SExprPtr e = parse_s_primary();
    while (at("*") || at("/")) {
      std::string op = next().text;
      e = s_node(op == "*" ? SExpr::Kind::Mul : SExpr::Kind::Div,
                 {std::move(e), parse_s_primary()});
    }
    return e;
  }
  SExprPtr parse_s_primary() {
    if (peek().kind == lex::Tok::Number) {
      return s_const(Rat(expect_number()));
    }
    if (accept("(")) {
      SExprPtr e = parse_sexpr();
      expect(")");
      return e;
    }
    if (accept("[")) {  // indicator over a tagged boolean formula
      ExprPtr cond = parse_expr();
      expect("]");
      return s_ind(std::move(cond));
    }
    if (peek().kind == lex::Tok::Ident) {
      const std::string& name = peek().text;
      if (name == "inf") {
        next();
        return s_inf();
      }
      if (is_scalar_fn(name) && peek(1).text == "(") {
        return parse_s_call();
      }
      if ((name == "max" || name == "min" || name == "monus") &&
          peek(1).text == "(") {
        std::string fn = next().text;
        next();  // (
        SExprPtr a = parse_sexpr();
        expect(",");
        SExprPtr b = parse_sexpr();
        expect(")");
        SExpr::Kind k = fn == "max" ? SExpr::Kind::Max
                        : fn == "min" ? SExpr::Kind::Min
                                      : SExpr::Kind::Monus;
        return s_node(k, {std::move(a), std::move(b)});
      }
      // embedded program expression (variable / array element, tagged)
      size_t save = pos_;
      ExprPtr pe = parse_postfix();
      (void)save;
      return s_num(std::move(pe));
    }
    fail("expected expectation expression, found '" + tok_desc() + "'");
  }

  SExprPtr parse_s_call() {
    std::string fn = next().text;
    expect("(");
    if (fn == "abs") {
      SExprPtr a = parse_sexpr();
      expect(")");
      return s_node(SExpr::Kind::Abs, {std::move(a)});
    }
    if (fn == "pow") {
      SExprPtr b = parse_sexpr();
      expect(",");
      SExprPtr ex = parse_sexpr();
      expect(")");
      return s_node(SExpr::Kind::Pow, {std::move(b), std::move(ex)});
    }
    if (fn == "sum" || fn == "maxr") {
      std::string ix = expect_ident();
      expect(",");
      SExprPtr lo = parse_sexpr();
      expect(",");
      SExprPtr hi = parse_sexpr();
      expect(",");
      SExprPtr body = parse_sexpr();
      expect(")");
      return s_range(fn == "sum" ? SExpr::Kind::Sum : SExpr::Kind::MaxR,
                     std::move(ix), std::move(lo), std::move(hi),
                     std::move(body));
    }
    // distance builtins over two array expressions
    ExprPtr a = parse_postfix_pub();
    expect(",");
    ExprPtr b = parse_postfix_pub();
    expect(")");
    return s_builtin(fn, {std::move(a), std::move(b)});
  }

  ExprPtr parse_postfix_pub() { return parse_postfix(); }
};

}  // namespace detail

inline Program parse_program(const std::string& text) {
  detail::Parser p(text);
  return p.parse_program();
}

inline ExprPtr parse_expr_text(const std::string& text) {
  detail::Parser p(text);
  return p.parse_expr();
}

/// Parses an expectation expression (relational or unary).
inline SExprPtr parse_relexp(const std::string& text) {
  detail::Parser p(text);
  return p.parse_sexpr();
}

// ---------------------------------------------------------------------------
// Pretty printing

namespace detail {

inline void print_expr(std::ostream& os, const ExprPtr& e);

inline void print_args(std::ostream& os, const std::vector<ExprPtr>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) os << ", ";
    print_expr(os, args[i]);
  }
}

inline void print_expr(std::ostream& os, const ExprPtr& e) {
  using K = Expr::Kind;
  switch (e->kind) {
    case K::IntLit: os << e->int_lit; break;
    case K::BoolLit: os << (e->bool_lit ? "true" : "false"); break;
    case K::Var:
      os << e->name;
      if (e->tag) os << '<' << e->tag << '>';
      break;
    case K::Unary:
      os << e->op;
      os << '(';
      print_expr(os, e->args[0]);
      os << ')';
      break;
    case K::Binary:
      if (e->op == "max" || e->op == "min" || e->op == "monus") {
        os << e->op << '(';
        print_expr(os, e->args[0]);
        os << ", ";
        print_expr(os, e->args[1]);
        os << ')';
      } else {
        os << '(';
        print_expr(os, e->args[0]);
        os << ' ' << e->op << ' ';
        print_expr(os, e->args[1]);
        os << ')';
      }
      break;
    case K::Index:
      print_expr(os, e->args[0]);
      os << '[';
      print_expr(os, e->args[1]);
      os << ']';
      break;
    case K::Update:
      os << "__update(";
      print_args(os, e->args);
      os << ')';
      break;
    case K::ArrayLit:
      os << '[';
      print_args(os, e->args);
      os << ']';
      break;
    case K::Call:
      os << e->name << '(';
      print_args(os, e->args);
      os << ')';
      break;
  }
}

inline void print_dist(std::ostream& os, const DistPtr& d) {
  switch (d->kind) {
    case DistExpr::Kind::UniformRange:
      os << "uniform(";
      print_expr(os, d->lo);
      os << " .. ";
      print_expr(os, d->hi);
      os << ')';
      break;
    case DistExpr::Kind::UniformSet: {
      os << "uniform{";
      for (size_t i = 0; i < d->set.size(); ++i) {
        if (i) os << ", ";
        os << d->set[i].str();
      }
      os << '}';
      break;
    }
    case DistExpr::Kind::Bernoulli:
      os << "bernoulli(" << d->bern_p << ')';
      break;
    case DistExpr::Kind::UniformBits:
      os << "bits(";
      print_expr(os, d->nbits);
      os << ')';
      break;
    case DistExpr::Kind::Table: {
      os << "table{";
      for (size_t i = 0; i < d->table.size(); ++i) {
        if (i) os << ", ";
        os << d->table[i].first.str() << ": " << d->table[i].second;
      }
      os << '}';
      break;
    }
  }
}

inline void print_cmd(std::ostream& os, const CmdPtr& c, int indent) {
  std::string pad(indent * 2, ' ');
  using K = Command::Kind;
  switch (c->kind) {
    case K::Skip: os << pad << "skip;\n"; break;
    case K::Assign:
      // array-element sugar prints as the underlying update
      if (c->expr->kind == Expr::Kind::Update &&
          c->expr->args[0]->kind == Expr::Kind::Var &&
          c->expr->args[0]->name == c->var) {
        os << pad << c->var << '[';
        print_expr(os, c->expr->args[1]);
        os << "] := ";
        print_expr(os, c->expr->args[2]);
        os << ";\n";
      } else {
        os << pad << c->var << " := ";
        print_expr(os, c->expr);
        os << ";\n";
      }
      break;
    case K::Sample:
      os << pad << c->var << " :~ ";
      print_dist(os, c->dist);
      os << ";\n";
      break;
    case K::Seq:
      print_cmd(os, c->c1, indent);
      print_cmd(os, c->c2, indent);
      break;
    case K::If:
      os << pad << "if ";
      print_expr(os, c->expr);
      os << " {\n";
      print_cmd(os, c->c1, indent + 1);
      os << pad << "}";
      if (c->c2 && c->c2->kind != K::Skip) {
        os << " else {\n";
        print_cmd(os, c->c2, indent + 1);
        os << pad << "}";
      }
      os << "\n";
      break;
    case K::While:
      os << pad << "while ";
      print_expr(os, c->expr);
      os << " {\n";
      print_cmd(os, c->c1, indent + 1);
      os << pad << "}\n";
      break;
  }
}

}  // namespace detail

inline std::string print_program(const Program& p) {
  std::ostringstream os;
  if (!p.name.empty()) os << "program " << p.name << "\n";
  for (const auto& d : p.decls) {
    os << "var " << d.name << " : ";
    if (d.type == Type::Array)
      os << "int[" << d.array_len << ']';
    else
      os << type_name(d.type);
    os << ";\n";
  }
  detail::print_cmd(os, p.body, 0);
  return os.str();
}

inline std::string print_expr(const ExprPtr& e) {
  std::ostringstream os;
  detail::print_expr(os, e);
  return os.str();
}

// ---------------------------------------------------------------------------
// Structural equality (ignores source spans)

inline bool same_expr(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind || a->op != b->op || a->name != b->name ||
      a->tag != b->tag || a->int_lit != b->int_lit ||
      a->bool_lit != b->bool_lit || a->args.size() != b->args.size())
    return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!same_expr(a->args[i], b->args[i])) return false;
  return true;
}

inline bool same_dist(const DistPtr& a, const DistPtr& b) {
  if (a->kind != b->kind) return false;
  return a->set == b->set && a->bern_p == b->bern_p && a->table == b->table &&
         same_expr(a->lo, b->lo) && same_expr(a->hi, b->hi) &&
         same_expr(a->nbits, b->nbits);
}

inline bool same_cmd(const CmdPtr& a, const CmdPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind || a->var != b->var) return false;
  if ((a->expr != nullptr) != (b->expr != nullptr)) return false;
  if (a->expr && !same_expr(a->expr, b->expr)) return false;
  if ((a->dist != nullptr) != (b->dist != nullptr)) return false;
  if (a->dist && !same_dist(a->dist, b->dist)) return false;
  auto same_child = [](const CmdPtr& x, const CmdPtr& y) {
    if (!x || !y) return x == y;
    return same_cmd(x, y);
  };
  return same_child(a->c1, b->c1) && same_child(a->c2, b->c2);
}

// ---------------------------------------------------------------------------
// Conservative static checks

namespace detail {

struct CheckCtx {
  std::map<std::string, Type> types;
  std::set<std::string> defined;  // definitely assigned on every path
  std::vector<std::string>* errors;
  bool relational = false;

  void err(const std::string& msg, SourceSpan sp) {
    errors->push_back(msg + " at " + std::to_string(sp.line) + ":" +
                      std::to_string(sp.col));
  }
};

inline std::optional<Type> check_expr(const ExprPtr& e, CheckCtx& cx);

inline void want(const ExprPtr& e, Type t, CheckCtx& cx) {
  auto got = check_expr(e, cx);
  if (got && *got != t)
    cx.err(std::string("expected ") + type_name(t) + ", found " +
               type_name(*got),
           e->span);
}

inline std::optional<Type> check_expr(const ExprPtr& e, CheckCtx& cx) {
  using K = Expr::Kind;
  switch (e->kind) {
    case K::IntLit: return Type::Int;
    case K::BoolLit: return Type::Bool;
    case K::Var: {
      if (e->tag != 0 && !cx.relational)
        cx.err("tagged variable '" + e->name + "' outside relational context",
               e->span);
      auto it = cx.types.find(e->name);
      if (it == cx.types.end()) {
        cx.err("read of undeclared or possibly-unset variable '" + e->name +
                   "'",
               e->span);
        return std::nullopt;
      }
      if (e->tag == 0 && !cx.defined.count(e->name))
        cx.err("variable '" + e->name + "' may be read before assignment",
               e->span);
      return it->second;
    }
    case K::Unary:
      if (e->op == "-") {
        want(e->args[0], Type::Int, cx);
        return Type::Int;
      }
      want(e->args[0], Type::Bool, cx);
      return Type::Bool;
    case K::Binary: {
      const std::string& op = e->op;
      if (op == "&&" || op == "||") {
        want(e->args[0], Type::Bool, cx);
        want(e->args[1], Type::Bool, cx);
        return Type::Bool;
      }
      if (op == "==" || op == "!=") {
        auto a = check_expr(e->args[0], cx);
        auto b = check_expr(e->args[1], cx);
        if (a && b && *a != *b)
          cx.err("comparison between different types", e->span);
        return Type::Bool;
      }
      want(e->args[0], Type::Int, cx);
      want(e->args[1], Type::Int, cx);
      if (op == "<" || op == "<=" || op == ">" || op == ">=") return Type::Bool;
      return Type::Int;
    }
    case K::Index:
      want(e->args[0], Type::Array, cx);
      want(e->args[1], Type::Int, cx);
      return Type::Int;
    case K::Update:
      want(e->args[0], Type::Array, cx);
      want(e->args[1], Type::Int, cx);
      want(e->args[2], Type::Int, cx);
      return Type::Array;
    case K::ArrayLit:
      for (const auto& a : e->args) want(a, Type::Int, cx);
      return Type::Array;
    case K::Call: {
      const std::string& fn = e->name;
      auto arity = [&](size_t n) {
        if (e->args.size() != n)
          cx.err(fn + " expects " + std::to_string(n) + " arguments", e->span);
        return e->args.size() == n;
      };
      if (fn == "shiftR" || fn == "invPerm") {
        if (arity(2)) {
          want(e->args[0], Type::Array, cx);
          want(e->args[1], Type::Int, cx);
        }
        return fn == "shiftR" ? Type::Array : Type::Int;
      }
      if (fn == "flip") {
        if (arity(2)) {
          want(e->args[0], Type::Array, cx);
          want(e->args[1], Type::Int, cx);
        }
        return Type::Array;
      }
      if (fn == "cat" || fn == "select") {
        if (arity(2)) {
          want(e->args[0], Type::Array, cx);
          want(e->args[1], Type::Array, cx);
        }
        return Type::Array;
      }
      if (fn == "negBits") {
        if (arity(1)) want(e->args[0], Type::Array, cx);
        return Type::Array;
      }
      if (fn == "len") {
        if (arity(1)) want(e->args[0], Type::Array, cx);
        return Type::Int;
      }
      cx.err("unknown builtin '" + fn + "'", e->span);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

inline std::optional<Type> dist_type(const DistPtr& d, CheckCtx& cx,
                                     SourceSpan sp) {
  switch (d->kind) {
    case DistExpr::Kind::UniformRange:
      want(d->lo, Type::Int, cx);
      want(d->hi, Type::Int, cx);
      return Type::Int;
    case DistExpr::Kind::Bernoulli:
      if (d->bern_p < 0 || d->bern_p > 1)
        cx.err("bernoulli parameter outside [0,1]", sp);
      return Type::Bool;
    case DistExpr::Kind::UniformBits:
      want(d->nbits, Type::Int, cx);
      return Type::Array;
    case DistExpr::Kind::UniformSet:
    case DistExpr::Kind::Table: {
      std::vector<const Value*> vs;
      for (const auto& v : d->set) vs.push_back(&v);
      Rat total = 0;
      for (const auto& [v, p] : d->table) {
        vs.push_back(&v);
        if (p < 0) cx.err("negative table probability", sp);
        total += p;
      }
      if (d->kind == DistExpr::Kind::Table && total != 1)
        cx.err("table probabilities sum to " + total.str() + ", expected 1",
               sp);
      if (vs.empty()) {
        cx.err("empty support", sp);
        return std::nullopt;
      }
      auto ty_of = [](const Value& v) {
        return v.is_int() ? Type::Int : v.is_bool() ? Type::Bool : Type::Array;
      };
      Type t = ty_of(*vs[0]);
      for (const Value* v : vs)
        if (ty_of(*v) != t) cx.err("mixed value types in support", sp);
      return t;
    }
  }
  return std::nullopt;
}

inline void check_cmd(const CmdPtr& c, CheckCtx& cx) {
  using K = Command::Kind;
  switch (c->kind) {
    case K::Skip: break;
    case K::Assign:
    case K::Sample: {
      std::optional<Type> rhs =
          c->kind == K::Assign ? check_expr(c->expr, cx)
                               : dist_type(c->dist, cx, c->span);
      auto it = cx.types.find(c->var);
      if (it == cx.types.end()) {
        if (rhs) cx.types[c->var] = *rhs;
      } else if (rhs && *rhs != it->second) {
        cx.err("assignment changes type of '" + c->var + "' from " +
                   type_name(it->second) + " to " + type_name(*rhs),
               c->span);
      }
      cx.defined.insert(c->var);
      break;
    }
    case K::Seq:
      check_cmd(c->c1, cx);
      check_cmd(c->c2, cx);
      break;
    case K::If: {
      want(c->expr, Type::Bool, cx);
      CheckCtx cx1 = cx;
      CheckCtx cx2 = cx;
      check_cmd(c->c1, cx1);
      check_cmd(c->c2, cx2);
      cx.types = cx1.types;
      for (const auto& [n, t] : cx2.types) cx.types.emplace(n, t);
      // definitely-assigned only when assigned on both branches
      std::set<std::string> both;
      for (const auto& n : cx1.defined)
        if (cx2.defined.count(n)) both.insert(n);
      cx.defined = std::move(both);
      break;
    }
    case K::While: {
      want(c->expr, Type::Bool, cx);
      // the body may run zero times: reads inside see the pre-loop state
      // extended by earlier body assignments, but nothing escapes the loop
      CheckCtx cxb = cx;
      check_cmd(c->c1, cxb);
      for (const auto& [n, t] : cxb.types) cx.types.emplace(n, t);
      break;
    }
  }
}

inline void collect_sexpr_vars(const SExprPtr& e, CheckCtx& cx,
                               std::set<std::string> bound) {
  std::function<void(const ExprPtr&)> walk_e = [&](const ExprPtr& pe) {
    if (!pe) return;
    if (pe->kind == Expr::Kind::Var) {
      if (!bound.count(pe->name) && !cx.types.count(pe->name))
        cx.err("unknown variable '" + pe->name + "' in expectation", pe->span);
    }
    for (const auto& a : pe->args) walk_e(a);
  };
  if (e->ie) walk_e(e->ie);
  for (const auto& pe : e->eargs) walk_e(pe);
  if (e->kind == SExpr::Kind::Sum || e->kind == SExpr::Kind::MaxR) {
    collect_sexpr_vars(e->args[0], cx, bound);
    collect_sexpr_vars(e->args[1], cx, bound);
    auto bound2 = bound;
    bound2.insert(e->ix);
    collect_sexpr_vars(e->args[2], cx, bound2);
    return;
  }
  for (const auto& a : e->args) collect_sexpr_vars(a, cx, bound);
}

}  // namespace detail

/// Conservative static checks: declared-before-read (declared variables count
/// as initialized from the starting state), guard booleanness, distribution
/// well-formedness, builtin arities. Returns diagnostics; empty means ok.
inline std::vector<std::string> check_program(const Program& p) {
  std::vector<std::string> errors;
  detail::CheckCtx cx;
  cx.errors = &errors;
  for (const auto& d : p.decls) {
    if (cx.types.count(d.name))
      errors.push_back("duplicate declaration of '" + d.name + "'");
    cx.types[d.name] = d.type;
    cx.defined.insert(d.name);
  }
  detail::check_cmd(p.body, cx);
  return errors;
}

/// Checks that every variable named in an expectation expression is declared
/// in the given program; bound range indices and extra free symbols listed in
/// `extra` are permitted.
inline std::vector<std::string> check_relexp(
    const SExprPtr& e, const Program& p,
    const std::set<std::string>& extra = {}) {
  std::vector<std::string> errors;
  detail::CheckCtx cx;
  cx.errors = &errors;
  cx.relational = true;
  for (const auto& d : p.decls) cx.types[d.name] = d.type;
  detail::collect_sexpr_vars(e, cx, extra);
  return errors;
}

inline bool same_program(const Program& a, const Program& b) {
  if (a.decls.size() != b.decls.size()) return false;
  for (size_t i = 0; i < a.decls.size(); ++i) {
    if (a.decls[i].name != b.decls[i].name ||
        a.decls[i].type != b.decls[i].type ||
        a.decls[i].array_len != b.decls[i].array_len)
      return false;
  }
  return same_cmd(a.body, b.body);
}

}  // namespace kantorel
