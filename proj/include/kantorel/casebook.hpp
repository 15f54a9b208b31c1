#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kantorel/blockdecomp.hpp"
#include "kantorel/parser.hpp"
#include "kantorel/rpe.hpp"
#include "kantorel/simulate.hpp"

namespace kantorel {

struct CaseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Built-in coupling functions

/// Hypercube coupling: pair the draws so that differing coordinates cancel.
/// Draws range over {0..N} with 0 = stay and i = flip coordinate i-1. With
/// two or more differing coordinates they are cycled against each other;
/// with exactly one it is swapped against the stay draw; equal positions
/// pair identically.
inline CouplingSpec coupling_cycle_diff(const std::string& pos_var = "pos") {
  return CouplingSpec::bijection(
      "cycle_diff", [pos_var](const Value& v, const State& s1,
                              const State& s2) -> Value {
        const auto& a = s1.get(pos_var).as_array();
        const auto& b = s2.get(pos_var).as_array();
        if (a.size() != b.size())
          throw std::runtime_error("cycle_diff: length mismatch");
        std::vector<Int> diff;  // draw values (coordinate index + 1)
        for (size_t i = 0; i < a.size(); ++i)
          if (a[i] != b[i]) diff.push_back(Int(i + 1));
        const Int& x = v.as_int();
        if (diff.empty()) return v;
        if (diff.size() == 1) {
          if (x == 0) return Value(diff[0]);
          if (x == diff[0]) return Value(Int(0));
          return v;
        }
        for (size_t i = 0; i < diff.size(); ++i)
          if (x == diff[i]) return Value(diff[(i + 1) % diff.size()]);
        return v;
      });
}

/// Pairs a position draw on the left with the position of the same card in
/// the right deck.
inline CouplingSpec coupling_match_card(const std::string& deck_var = "deck") {
  return CouplingSpec::bijection(
      "match_card", [deck_var](const Value& v, const State& s1,
                               const State& s2) -> Value {
        const auto& d1 = s1.get(deck_var).as_array();
        const auto& d2 = s2.get(deck_var).as_array();
        return Value(inv_perm(d2, d1[v.as_int().convert_to<long>()]));
      });
}

/// Same position-to-card pairing under a different report name; used where
/// the second draw of a transposition follows the deck-induced bijection.
inline CouplingSpec coupling_deck_bijection(
    const std::string& deck_var = "deck") {
  CouplingSpec sp = coupling_match_card(deck_var);
  sp.name = "deck_bijection";
  return sp;
}

/// Riffle coupling: the right side assigns each card the same bit the left
/// side assigned it, by permuting the bit positions through the two decks.
inline CouplingSpec coupling_same_bits_per_card(
    const std::string& deck_var = "deck") {
  return CouplingSpec::bijection(
      "same_bits_per_card", [deck_var](const Value& v, const State& s1,
                                       const State& s2) -> Value {
        const auto& d1 = s1.get(deck_var).as_array();
        const auto& d2 = s2.get(deck_var).as_array();
        const auto& bits = v.as_array();
        if (bits.size() != d1.size() || d1.size() != d2.size())
          throw std::runtime_error("same_bits_per_card: length mismatch");
        std::vector<Int> out(bits.size());
        for (size_t j = 0; j < d2.size(); ++j) {
          Int pos = inv_perm(d1, d2[j]);
          out[j] = bits[pos.convert_to<long>()];
        }
        return Value(std::move(out));
      });
}

/// Transposes the draw 0 with the value of the given expression (evaluated
/// against the state pair); all other draws pair identically.
inline CouplingSpec coupling_swap_with(const ExprPtr& target) {
  return CouplingSpec::bijection(
      "swap_with", [target](const Value& v, const State& s1,
                            const State& s2) -> Value {
        Int t = eval_expr(target, EvalCtx::pair(s1, s2)).as_int();
        const Int& x = v.as_int();
        if (x == 0) return Value(t);
        if (x == t) return Value(Int(0));
        return v;
      });
}

/// Pairs a left position draw with the right-deck position of the card
/// matched under the fixed pairing R1[i] <-> R2[i].
inline CouplingSpec coupling_match_perm(std::vector<Int> r1,
                                        std::vector<Int> r2,
                                        const std::string& deck_var = "deck") {
  if (r1.size() != r2.size() || !is_permutation_of_range(r1) ||
      !is_permutation_of_range(r2))
    throw CaseError("match_perm: both references must be permutations");
  return CouplingSpec::bijection(
      "match_perm",
      [r1 = std::move(r1), r2 = std::move(r2), deck_var](
          const Value& v, const State& s1, const State& s2) -> Value {
        const auto& d1 = s1.get(deck_var).as_array();
        const auto& d2 = s2.get(deck_var).as_array();
        Int card1 = d1[v.as_int().convert_to<long>()];
        Int card2 = r2[inv_perm(r1, card1).convert_to<long>()];
        return Value(inv_perm(d2, card2));
      });
}

/// Identity when the named variable agrees across the pair, independent
/// otherwise.
inline CouplingSpec coupling_cond_eq(const std::string& var) {
  return CouplingSpec::conditional(
      "cond_eq(" + var + ")", [var](const State& s1, const State& s2) {
        return s1.get(var) == s2.get(var);
      });
}

/// Parses a coupling name as used on the command line and in coupling-spec
/// files: id | independent | optimal | cycle_diff[:posvar]
/// | match_card[:deckvar] | deck_bijection[:deckvar]
/// | same_bits_per_card[:deckvar] | swap_with:<expr> | cond_eq:<var>
/// | match_perm:<deckvar>:<perm1>:<perm2> (perms as comma-separated values)
inline CouplingSpec coupling_by_name(const std::string& text) {
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : s) {
      if (ch == ':') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    parts.push_back(cur);
    return parts;
  };
  auto parse_perm = [](const std::string& s) {
    std::vector<Int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.emplace_back(item);
    return out;
  };
  std::vector<std::string> p = split(text);
  const std::string& head = p[0];
  auto arg = [&](size_t i, const char* dflt) {
    return p.size() > i ? p[i] : std::string(dflt);
  };
  if (head == "id" || head == "identity") return CouplingSpec::identity();
  if (head == "independent") return CouplingSpec::independent();
  if (head == "optimal") return CouplingSpec::optimal();
  if (head == "cycle_diff") return coupling_cycle_diff(arg(1, "pos"));
  if (head == "match_card") return coupling_match_card(arg(1, "deck"));
  if (head == "deck_bijection") return coupling_deck_bijection(arg(1, "deck"));
  if (head == "same_bits_per_card")
    return coupling_same_bits_per_card(arg(1, "deck"));
  if (head == "swap_with" && p.size() == 2)
    return coupling_swap_with(parse_expr_text(p[1]));
  if (head == "cond_eq" && p.size() == 2) return coupling_cond_eq(p[1]);
  if (head == "match_perm" && p.size() == 4)
    return coupling_match_perm(parse_perm(p[2]), parse_perm(p[3]), p[1]);
  throw CaseError("unknown coupling '" + text + "'");
}

// ---------------------------------------------------------------------------
// Case studies

struct CaseParams {
  long N = 3;        // dimension / deck size / iteration count
  long K = 4;        // number of chain steps
  long N2 = -1;      // binom: right-hand iteration count (-1: same as N)
  Rat p = Rat(1, 2);      // binom coin bias
  Rat alpha = Rat(1, 2);  // td0 step size; pgd step scale
  Rat gamma = Rat(1, 2);  // td0 discount factor
  long T = 20;            // sgd / pgd iteration count
};

struct CaseStudy {
  std::string name;
  std::string summary;
  CaseParams params;
  bool discrete = true;  // false: simulator-backed continuous state
  bool async = false;    // invariant uses the asynchronous loop rule

  // discrete cases
  std::string source;  // program text; `program` is its parse
  Program program;
  std::string state_var;  // observable whose distribution mixes
  SExprPtr distance;      // canonical relational distance
  SExprPtr invariant;     // canonical loop invariant
  SiteSpecs specs;        // canonical per-site couplings
  State init1, init2;     // documented worst initial pair
  std::vector<State> initial_states;
  std::vector<std::pair<State, State>> invariant_pairs;

  // analytic bound at these parameters, and as a function of K
  ExtRat bound;
  std::function<ExtRat(long)> bound_at;
  std::map<std::string, Rat> constants;  // named derived constants

  // continuous cases: one coupled trial -> observed distance
  std::function<Rat(Prng)> trial;

  const Command* loop() const {
    const Command* w = find_loop(program.body);
    if (!w) throw CaseError("case '" + name + "' has no loop");
    return w;
  }

  static const Command* find_loop(const CmdPtr& c) {
    if (!c) return nullptr;
    if (c->kind == Command::Kind::While) return c.get();
    if (c->kind == Command::Kind::Seq) {
      const Command* r = find_loop(c->c2);
      return r ? r : find_loop(c->c1);
    }
    return nullptr;
  }
};

inline const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names = {
      "hwalk", "rtop", "rtrans", "riffle", "binom", "td0", "sgd", "pgd"};
  return names;
}

namespace detail {

inline std::string rat_str(const Rat& q) {
  return denominator(q) == 1 ? numerator(q).str()
                             : numerator(q).str() + "/" + denominator(q).str();
}

inline std::vector<std::vector<Int>> all_permutations(long n) {
  std::vector<Int> base(n);
  for (long i = 0; i < n; ++i) base[i] = i;
  std::vector<std::vector<Int>> out;
  do {
    out.push_back(base);
  } while (std::next_permutation(base.begin(), base.end()));
  return out;
}

inline std::vector<std::vector<Int>> all_bitvectors(long n) {
  std::vector<std::vector<Int>> out;
  for (long m = 0; m < (1L << n); ++m) {
    std::vector<Int> bits(n);
    for (long i = 0; i < n; ++i) bits[i] = (m >> i) & 1;
    out.push_back(std::move(bits));
  }
  return out;
}

inline std::vector<Int> identity_perm(long n) {
  std::vector<Int> v(n);
  for (long i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline std::vector<Int> reversed_perm(long n) {
  std::vector<Int> v(n);
  for (long i = 0; i < n; ++i) v[i] = n - 1 - i;
  return v;
}

/// Pairs of loop-head states for the synchronized shuffle invariants: all
/// combinations of the main values, with equal counters 0..K plus a few
/// desynchronized counters. The pair space is only materialized when the
/// base set is small enough to enumerate; past that, callers must supply
/// their own pairs.
inline std::vector<std::pair<State, State>> shuffle_pairs(
    const std::vector<State>& bases, long K) {
  std::vector<std::pair<State, State>> out;
  if (bases.size() > 40) return out;
  for (const State& a : bases) {
    for (const State& b : bases) {
      for (long k = 0; k <= K; ++k) {
        State s1 = a, s2 = b;
        s1.set("k", Value(k));
        s2.set("k", Value(k));
        out.emplace_back(s1, s2);
      }
      State s1 = a, s2 = b;  // desynchronized counters
      s1.set("k", Value(0L));
      s2.set("k", Value(std::min(1L, K)));
      out.emplace_back(s1, s2);
    }
  }
  return out;
}

}  // namespace detail

/// Distribution of a single variable under a state distribution.
inline ValueDist marginal(const SubDist& mu, const std::string& var) {
  ValueDist out;
  for (const auto& [s, p] : mu.entries()) out.add(s.get(var), p);
  return out;
}

namespace detail {

inline CaseStudy make_hwalk(const CaseParams& pr) {
  if (pr.N < 1 || pr.N > 12 || pr.K < 0)
    throw CaseError("hwalk: need 1 <= N <= 12 and K >= 0");
  CaseStudy cs;
  cs.name = "hwalk";
  cs.summary = "lazy random walk on the " + std::to_string(pr.N) +
               "-dimensional hypercube, " + std::to_string(pr.K) + " steps";
  cs.params = pr;
  std::ostringstream src;
  src << "program hwalk\n"
      << "var pos : int[" << pr.N << "];\n"
      << "var k : int;\n"
      << "var i : int;\n\n"
      << "k := 0;\n"
      << "while k < " << pr.K << " {\n"
      << "  i :~ uniform(0 .. " << pr.N << ");\n"
      << "  pos := flip(pos, i);\n"
      << "  k := k + 1;\n"
      << "}\n";
  cs.source = src.str();
  cs.program = parse_program(cs.source);
  cs.state_var = "pos";
  cs.distance = parse_relexp("dH(pos<1>, pos<2>)");
  Rat rate(pr.N - 1, pr.N + 1);
  cs.invariant = parse_relexp(
      "[k<1> != k<2>] * inf + [k<1> == k<2>] * dH(pos<1>, pos<2>) * pow(" +
      rat_str(rate) + ", monus(" + std::to_string(pr.K) + ", k<1>))");
  cs.specs[0] = coupling_cycle_diff("pos");
  cs.constants["rate"] = rate;
  cs.bound_at = [N = pr.N, rate](long K) {
    return ExtRat(Rat(N)) * ExtRat::pow(ExtRat(rate), Int(K));
  };
  cs.bound = cs.bound_at(pr.K);
  for (auto& bits : all_bitvectors(pr.N)) {
    State s;
    s.set("pos", Value(bits));
    s.set("k", Value(0L));
    s.set("i", Value(0L));
    cs.initial_states.push_back(std::move(s));
  }
  cs.init1 = cs.initial_states.front();  // all zeros
  cs.init2 = cs.initial_states.back();   // all ones
  cs.invariant_pairs = shuffle_pairs(cs.initial_states, pr.K);
  return cs;
}

inline CaseStudy make_rtop(const CaseParams& pr) {
  if (pr.N < 1 || pr.N > 8 || pr.K < 0)
    throw CaseError("rtop: need 1 <= N <= 8 and K >= 0");
  CaseStudy cs;
  cs.name = "rtop";
  cs.summary = "random-to-top shuffle of " + std::to_string(pr.N) +
               " cards, " + std::to_string(pr.K) + " steps";
  cs.params = pr;
  std::ostringstream src;
  src << "program rtop\n"
      << "var deck : int[" << pr.N << "];\n"
      << "var k : int;\n"
      << "var p : int;\n\n"
      << "k := 0;\n"
      << "while k < " << pr.K << " {\n"
      << "  p :~ uniform(0 .. " << pr.N - 1 << ");\n"
      << "  deck := shiftR(deck, p);\n"
      << "  k := k + 1;\n"
      << "}\n";
  cs.source = src.str();
  cs.program = parse_program(cs.source);
  cs.state_var = "deck";
  cs.distance = parse_relexp("dM(deck<1>, deck<2>)");
  Rat rate(pr.N - 1, pr.N);
  cs.invariant = parse_relexp(
      "[k<1> != k<2>] * inf + [k<1> == k<2>] * dM(deck<1>, deck<2>) * pow(" +
      rat_str(rate) + ", monus(" + std::to_string(pr.K) + ", k<1>))");
  cs.specs[0] = coupling_match_card("deck");
  cs.constants["rate"] = rate;
  cs.bound_at = [N = pr.N, rate](long K) {
    return ExtRat(Rat(N)) * ExtRat::pow(ExtRat(rate), Int(K));
  };
  cs.bound = cs.bound_at(pr.K);
  for (auto& perm : all_permutations(pr.N)) {
    State s;
    s.set("deck", Value(perm));
    s.set("k", Value(0L));
    s.set("p", Value(0L));
    cs.initial_states.push_back(std::move(s));
  }
  State w1, w2;
  w1.set("deck", Value(identity_perm(pr.N)));
  w2.set("deck", Value(reversed_perm(pr.N)));
  for (State* s : {&w1, &w2}) {
    s->set("k", Value(0L));
    s->set("p", Value(0L));
  }
  cs.init1 = std::move(w1);
  cs.init2 = std::move(w2);
  cs.invariant_pairs = shuffle_pairs(cs.initial_states, pr.K);
  return cs;
}

inline CaseStudy make_rtrans(const CaseParams& pr) {
  if (pr.N < 1 || pr.N > 8 || pr.K < 0)
    throw CaseError("rtrans: need 1 <= N <= 8 and K >= 0");
  CaseStudy cs;
  cs.name = "rtrans";
  cs.summary = "random transpositions on " + std::to_string(pr.N) +
               " cards, " + std::to_string(pr.K) + " steps";
  cs.params = pr;
  std::ostringstream src;
  src << "program rtrans\n"
      << "var deck : int[" << pr.N << "];\n"
      << "var k : int;\n"
      << "var p : int;\n"
      << "var q : int;\n"
      << "var t : int;\n\n"
      << "k := 0;\n"
      << "while k < " << pr.K << " {\n"
      << "  p :~ uniform(0 .. " << pr.N - 1 << ");\n"
      << "  q :~ uniform(0 .. " << pr.N - 1 << ");\n"
      << "  t := deck[p];\n"
      << "  deck[p] := deck[q];\n"
      << "  deck[q] := t;\n"
      << "  k := k + 1;\n"
      << "}\n";
  cs.source = src.str();
  cs.program = parse_program(cs.source);
  cs.state_var = "deck";
  cs.distance = parse_relexp("dH(deck<1>, deck<2>)");
  Rat rate = Rat(1) - Rat(1, Int(pr.N) * Int(pr.N));
  cs.invariant = parse_relexp(
      "[k<1> != k<2>] * inf + [k<1> == k<2>] * dH(deck<1>, deck<2>) * pow(" +
      rat_str(rate) + ", monus(" + std::to_string(pr.K) + ", k<1>))");
  cs.specs[0] = CouplingSpec::identity();
  cs.specs[1] = coupling_deck_bijection("deck");
  cs.constants["rate"] = rate;
  cs.bound_at = [N = pr.N, rate](long K) {
    return ExtRat(Rat(N)) * ExtRat::pow(ExtRat(rate), Int(K));
  };
  cs.bound = cs.bound_at(pr.K);
  for (auto& perm : all_permutations(pr.N)) {
    State s;
    s.set("deck", Value(perm));
    s.set("k", Value(0L));
    s.set("p", Value(0L));
    s.set("q", Value(0L));
    s.set("t", Value(0L));
    cs.initial_states.push_back(std::move(s));
  }
  State w1 = cs.initial_states.front(), w2 = cs.initial_states.front();
  w1.set("deck", Value(identity_perm(pr.N)));
  w2.set("deck", Value(reversed_perm(pr.N)));
  cs.init1 = std::move(w1);
  cs.init2 = std::move(w2);
  cs.invariant_pairs = shuffle_pairs(cs.initial_states, pr.K);
  return cs;
}

inline CaseStudy make_riffle(const CaseParams& pr) {
  if (pr.N < 1 || pr.N > 8 || pr.K < 0)
    throw CaseError("riffle: need 1 <= N <= 8 and K >= 0");
  CaseStudy cs;
  cs.name = "riffle";
  cs.summary = "inverse riffle shuffle of " + std::to_string(pr.N) +
               " cards, " + std::to_string(pr.K) + " steps";
  cs.params = pr;
  std::ostringstream src;
  src << "program riffle\n"
      << "var deck : int[" << pr.N << "];\n"
      << "var b : int[" << pr.N << "];\n"
      << "var k : int;\n\n"
      << "k := 0;\n"
      << "while k < " << pr.K << " {\n"
      << "  b :~ bits(" << pr.N << ");\n"
      << "  deck := cat(select(deck, b), select(deck, negBits(b)));\n"
      << "  k := k + 1;\n"
      << "}\n";
  cs.source = src.str();
  cs.program = parse_program(cs.source);
  cs.state_var = "deck";
  cs.distance = parse_relexp("dBD(deck<1>, deck<2>)");
  cs.invariant = parse_relexp(
      "[k<1> != k<2>] * inf + [k<1> == k<2>] * dBD(deck<1>, deck<2>) * "
      "pow(1/2, monus(" +
      std::to_string(pr.K) + ", k<1>))");
  cs.specs[0] = coupling_same_bits_per_card("deck");
  cs.constants["rate"] = Rat(1, 2);
  cs.bound_at = [N = pr.N](long K) {
    return ExtRat(Rat(Int(N) * Int(N))) *
           ExtRat::pow(ExtRat(Rat(1, 2)), Int(K));
  };
  cs.bound = cs.bound_at(pr.K);
  for (auto& perm : all_permutations(pr.N)) {
    State s;
    s.set("deck", Value(perm));
    s.set("b", Value(std::vector<Int>(pr.N, Int(0))));
    s.set("k", Value(0L));
    cs.initial_states.push_back(std::move(s));
  }
  State w1 = cs.initial_states.front(), w2 = cs.initial_states.front();
  w1.set("deck", Value(identity_perm(pr.N)));
  w2.set("deck", Value(reversed_perm(pr.N)));
  cs.init1 = std::move(w1);
  cs.init2 = std::move(w2);
  cs.invariant_pairs = shuffle_pairs(cs.initial_states, pr.K);
  return cs;
}

inline CaseStudy make_binom(const CaseParams& pr) {
  long N1 = pr.N;
  long N2 = pr.N2 < 0 ? pr.N : pr.N2;
  if (N1 < 0 || N2 < 0 || N1 > 64 || N2 > 64)
    throw CaseError("binom: need 0 <= N, N2 <= 64");
  if (pr.p < 0 || pr.p > 1) throw CaseError("binom: bias outside [0,1]");
  CaseStudy cs;
  cs.name = "binom";
  cs.summary = "binomial counters with trial counts " + std::to_string(N1) +
               " and " + std::to_string(N2) + ", bias " + rat_str(pr.p);
  cs.params = pr;
  cs.params.N2 = N2;
  cs.async = true;
  std::ostringstream src;
  src << "program binom\n"
      << "var N : int;\n"
      << "var n : int;\n"
      << "var k : int;\n"
      << "var b : bool;\n\n"
      << "n := 0;\n"
      << "k := 0;\n"
      << "while n < N {\n"
      << "  b :~ bernoulli(" << rat_str(pr.p) << ");\n"
      << "  if b {\n"
      << "    k := k + 1;\n"
      << "  }\n"
      << "  n := n + 1;\n"
      << "}\n";
  cs.source = src.str();
  cs.program = parse_program(cs.source);
  cs.state_var = "k";
  cs.distance = parse_relexp("abs(k<1> - k<2>)");
  std::string ps = rat_str(pr.p);
  cs.invariant =
      parse_relexp("abs(k<1> - k<2> + " + ps + " * monus(N<1>, n<1>) - " + ps +
                   " * monus(N<2>, n<2>))");
  cs.specs[0] = CouplingSpec::identity();
  Rat gap = pr.p * Rat(N1 > N2 ? N1 - N2 : N2 - N1);
  cs.constants["expected_gap"] = gap;
  cs.bound = ExtRat(gap);
  cs.bound_at = [gap](long) { return ExtRat(gap); };
  auto mk = [](long cap, long n, long k) {
    State s;
    s.set("N", Value(cap));
    s.set("n", Value(n));
    s.set("k", Value(k));
    s.set("b", Value(false));
    return s;
  };
  cs.init1 = mk(N1, 0, 0);
  cs.init2 = mk(N2, 0, 0);
  cs.initial_states = {cs.init1, cs.init2};
  // pair space reachable under the identity coupling: counters move in
  // lockstep while both run, then the longer side advances alone with its
  // counter never falling behind
  long lo = std::min(N1, N2), hi = std::max(N1, N2);
  bool left_long = N1 >= N2;
  for (long n = 0; n <= lo; ++n)
    for (long k = 0; k <= n; ++k)
      cs.invariant_pairs.emplace_back(mk(N1, n, k), mk(N2, n, k));
  for (long nl = lo; nl <= hi; ++nl)
    for (long ks = 0; ks <= lo; ++ks)
      for (long d = 0; d <= nl - lo; ++d) {
        State a = mk(left_long ? N1 : N2, nl, ks + d);
        State b = mk(left_long ? N2 : N1, lo, ks);
        if (left_long)
          cs.invariant_pairs.emplace_back(std::move(a), std::move(b));
        else
          cs.invariant_pairs.emplace_back(std::move(b), std::move(a));
      }
  return cs;
}

// Fixed 3-state, 2-action decision process for the td0 case: uniform
// policy, Bernoulli rewards, rational transition rows.
struct Td0Model {
  static constexpr int S = 3;
  static constexpr int A = 2;
  Rat reward_p[S][A] = {{Rat(1, 2), Rat(1, 4)},
                        {Rat(1, 3), Rat(2, 3)},
                        {Rat(1, 5), Rat(3, 5)}};
  Rat trans[S][A][S] = {
      {{Rat(1, 2), Rat(1, 4), Rat(1, 4)}, {Rat(1, 3), Rat(1, 3), Rat(1, 3)}},
      {{Rat(1, 4), Rat(1, 2), Rat(1, 4)}, {Rat(1, 3), Rat(1, 3), Rat(1, 3)}},
      {{Rat(1, 4), Rat(1, 4), Rat(1, 2)}, {Rat(1, 3), Rat(1, 3), Rat(1, 3)}}};

  int sample_trans(int s, int a, Prng& g) const {
    Rat u(Int(g.next_u64()), Int(1) << 64);
    Rat acc = 0;
    for (int j = 0; j < S; ++j) {
      acc += trans[s][a][j];
      if (u < acc) return j;
    }
    return S - 1;
  }
};

inline CaseStudy make_td0(const CaseParams& pr) {
  if (pr.N < 0 || pr.N > 1000) throw CaseError("td0: need 0 <= N <= 1000");
  if (pr.alpha <= 0 || pr.alpha >= 1)
    throw CaseError("td0: step size must lie in (0,1)");
  if (pr.gamma < 0 || pr.gamma >= 1)
    throw CaseError("td0: discount must lie in [0,1)");
  CaseStudy cs;
  cs.name = "td0";
  cs.summary = "temporal-difference value estimation on a fixed 3-state, "
               "2-action decision process, " +
               std::to_string(pr.N) + " sweeps";
  cs.params = pr;
  cs.discrete = false;
  Rat k = Rat(1) - pr.alpha + pr.alpha * pr.gamma;
  std::vector<Rat> V1 = {Rat(1), Rat(0), Rat(1, 2)};
  std::vector<Rat> V2 = {Rat(0), Rat(0), Rat(0)};
  Rat d0 = 0;
  for (int i = 0; i < 3; ++i) {
    Rat d = V1[i] - V2[i];
    if (d < 0) d = -d;
    if (d > d0) d0 = d;
  }
  cs.constants["k"] = k;
  cs.constants["init_dist"] = d0;
  cs.bound = ExtRat::pow(ExtRat(k), Int(pr.N)) * ExtRat(d0);
  cs.bound_at = [k, d0](long n) {
    return ExtRat::pow(ExtRat(k), Int(n)) * ExtRat(d0);
  };
  cs.trial = [pr, V1, V2](Prng g) -> Rat {
    Td0Model m;
    std::vector<Rat> a = V1, b = V2;
    for (long n = 0; n < pr.N; ++n) {
      std::vector<Rat> wa = a, wb = b;
      for (int i = 0; i < Td0Model::S; ++i) {
        // identity coupling on the action; rewards and transitions then
        // share draws too (the conditional coupling's identity branch)
        int act1 = static_cast<int>(g.next_below(Td0Model::A));
        int act2 = act1;
        Rat r1, r2;
        int j1, j2;
        if (act1 == act2) {
          bool r = g.next_bernoulli(m.reward_p[i][act1]);
          r1 = r2 = r ? 1 : 0;
          j1 = j2 = m.sample_trans(i, act1, g);
        } else {
          r1 = g.next_bernoulli(m.reward_p[i][act1]) ? 1 : 0;
          r2 = g.next_bernoulli(m.reward_p[i][act2]) ? 1 : 0;
          j1 = m.sample_trans(i, act1, g);
          j2 = m.sample_trans(i, act2, g);
        }
        wa[i] = (Rat(1) - pr.alpha) * a[i] + pr.alpha * (r1 + pr.gamma * a[j1]);
        wb[i] = (Rat(1) - pr.alpha) * b[i] + pr.alpha * (r2 + pr.gamma * b[j2]);
      }
      a = std::move(wa);
      b = std::move(wb);
    }
    Rat worst = 0;
    for (int i = 0; i < Td0Model::S; ++i) {
      Rat d = a[i] - b[i];
      if (d < 0) d = -d;
      if (d > worst) worst = d;
    }
    return worst;
  };
  return cs;
}

inline CaseStudy make_sgd(const CaseParams& pr) {
  if (pr.T < 1 || pr.T > 100000) throw CaseError("sgd: need 1 <= T <= 1e5");
  CaseStudy cs;
  cs.name = "sgd";
  cs.summary =
      "stochastic gradient descent on clamped 1-d quadratic losses, two "
      "datasets differing in one example, " +
      std::to_string(pr.T) + " steps";
  cs.params = pr;
  cs.discrete = false;
  const long n = 10;
  const Rat L(2), beta(2);
  // datasets differ only at index 3
  std::vector<Rat> z1(n), z2(n);
  for (long i = 0; i < n; ++i) z1[i] = z2[i] = Rat(i, 10);
  z2[3] = Rat(9, 10);
  Rat sum_alpha = 0;  // step sizes 1/(beta t)
  for (long t = 1; t <= pr.T; ++t) sum_alpha += Rat(1) / (beta * Rat(t));
  Rat gamma = Rat(2) * L / Rat(n) * sum_alpha;
  cs.constants["L"] = L;
  cs.constants["beta"] = beta;
  cs.constants["gamma"] = gamma;
  cs.bound = ExtRat(gamma * L);
  cs.bound_at = [g = gamma * L](long) { return ExtRat(g); };
  auto grad = [](const Rat& z, const Rat& w) -> Rat {
    Rat d = w - z;
    return d * d < 1 ? Rat(2) * d : Rat(0);  // clamp flattens the loss at 1
  };
  auto loss = [](const Rat& z, const Rat& w) -> Rat {
    Rat d = w - z;
    Rat q = d * d;
    return q < 1 ? q : Rat(1);
  };
  cs.trial = [pr, z1, z2, beta, grad, loss](Prng g) -> Rat {
    Rat w1 = 0, w2 = 0;
    for (long t = 1; t <= pr.T; ++t) {
      long i = static_cast<long>(g.next_below(10));  // same index both sides
      Rat at = Rat(1) / (beta * Rat(t));
      w1 -= at * grad(z1[i], w1);
      w2 -= at * grad(z2[i], w2);
    }
    Rat z = z1[g.next_below(10)];  // fresh test example
    Rat d = loss(z, w1) - loss(z, w2);
    return d < 0 ? -d : d;
  };
  return cs;
}

inline CaseStudy make_pgd(const CaseParams& pr) {
  if (pr.T < 1 || pr.T > 100000) throw CaseError("pgd: need 1 <= T <= 1e5");
  if (pr.alpha <= 0) throw CaseError("pgd: step scale must be positive");
  CaseStudy cs;
  cs.name = "pgd";
  cs.summary =
      "projected gradient descent on an interval, two quadratic losses with "
      "uniformly close gradients, " +
      std::to_string(pr.T) + " steps";
  cs.params = pr;
  cs.discrete = false;
  const Rat z(1, 4), delta(1, 8), beta(2);
  Rat gamma = Rat(2) * delta;  // sup-norm gap between the two gradients
  cs.constants["beta"] = beta;
  cs.constants["gamma"] = gamma;
  // alpha * gamma * T^(alpha beta + 1); the exponent is an integer when
  // alpha beta is (here alpha = 1/2, beta = 2 gives T^2)
  Rat ab = pr.alpha * beta;
  if (denominator(ab) != 1)
    throw CaseError("pgd: alpha * beta must be an integer");
  auto bound_fn = [alpha = pr.alpha, gamma, e = numerator(ab) + 1](long T) {
    return ExtRat(alpha) * ExtRat(gamma) * ExtRat::pow(ExtRat(Rat(T)), e);
  };
  cs.bound_at = bound_fn;
  cs.bound = bound_fn(pr.T);
  cs.trial = [pr, z, delta](Prng) -> Rat {
    auto project = [](const Rat& w) {
      if (w < -1) return Rat(-1);
      if (w > 1) return Rat(1);
      return w;
    };
    Rat w1 = 0, w2 = 0;
    for (long t = 1; t <= pr.T; ++t) {
      Rat at = pr.alpha / Rat(t);
      w1 = project(w1 - at * Rat(2) * (w1 - z));
      w2 = project(w2 - at * Rat(2) * (w2 - z - delta));
    }
    Rat d = w1 - w2;
    return d < 0 ? -d : d;
  };
  return cs;
}

}  // namespace detail

inline CaseStudy make_case(const std::string& name, const CaseParams& pr) {
  if (name == "hwalk") return detail::make_hwalk(pr);
  if (name == "rtop") return detail::make_rtop(pr);
  if (name == "rtrans") return detail::make_rtrans(pr);
  if (name == "riffle") return detail::make_riffle(pr);
  if (name == "binom") return detail::make_binom(pr);
  if (name == "td0") return detail::make_td0(pr);
  if (name == "sgd") return detail::make_sgd(pr);
  if (name == "pgd") return detail::make_pgd(pr);
  throw CaseError("unknown case study '" + name + "'");
}

// ---------------------------------------------------------------------------
// Omega-invariant family for the hypercube walk

/// Normalized Hamming weight of the walk position, as a unary expectation.
inline SExprPtr hwalk_weight(long N) {
  return parse_relexp("sum(j, 0, " + std::to_string(N - 1) + ", pos[j]) / " +
                      std::to_string(N));
}

struct OmegaFamily {
  SExprPtr f;         // post expectation of the loop
  IndexedExp family;  // I_n, index variable "n"
  SExprPtr limit;     // pointwise limit of the family
  std::vector<State> states;
};

/// The indexed family certifying the exact expected weight of the hypercube
/// walk: with r = (N-1)/(N+1),
///   I_n = [K - n <= k] * (B(k) + A(k) * wH),
///   A(k) = r^(K monus k),  B(k) = (1/(N+1)) * sum_{i < K-k} r^i.
/// The same family passes the upper and the lower check, so its limit pins
/// wpe of the walk exactly.
inline OmegaFamily hwalk_omega_family(long N, long K) {
  if (N < 1 || N > 12 || K < 0) throw CaseError("hwalk omega: bad parameters");
  OmegaFamily fam;
  std::string Ns = std::to_string(N), Ks = std::to_string(K);
  std::string r = detail::rat_str(Rat(N - 1, N + 1));
  std::string wh = "sum(j, 0, " + std::to_string(N - 1) + ", pos[j]) / " + Ns;
  std::string ak = "pow(" + r + ", monus(" + Ks + ", k))";
  std::string bk = "sum(i, 0, monus(" + Ks + ", k) - 1, pow(" + r + ", i)) / " +
                   std::to_string(N + 1);
  fam.f = parse_relexp(wh);
  fam.family.body = parse_relexp("[" + Ks + " - n <= k] * (" + bk + " + " + ak +
                                 " * (" + wh + "))");
  fam.family.index = "n";
  fam.limit = parse_relexp(bk + " + " + ak + " * (" + wh + ")");
  for (auto& bits : detail::all_bitvectors(N)) {
    for (long k = 0; k <= K; ++k) {
      State s;
      s.set("pos", Value(bits));
      s.set("k", Value(k));
      s.set("i", Value(0L));
      fam.states.push_back(std::move(s));
    }
  }
  return fam;
}

// ---------------------------------------------------------------------------
// Mixing curves

enum class MixMode { Exact, Simulated };

struct MixRow {
  long K = 0;
  ExtRat tv_exact;    // worst-pair tv (exact mode)
  ExtRat bound;       // analytic bound at K
  ExtRat tv_uniform;  // worst-start tv to uniform (exact mode)
  double tv_est = -1, ci_lo = -1, ci_hi = -1;  // simulated mode
  long trials = 0;
};

namespace detail {

inline void require_mixing_case(const CaseStudy& cs) {
  if (!cs.discrete || cs.async)
    throw CaseError("mixing curves are defined for the shuffle cases "
                    "(hwalk, rtop, rtrans, riffle)");
}

inline ValueDist uniform_over_states(const CaseStudy& cs) {
  ValueDist u;
  Rat p(1, Int(cs.initial_states.size()));
  for (const State& s : cs.initial_states) u.add(s.get(cs.state_var), p);
  return u;
}

}  // namespace detail

/// Exact worst-pair mixing data for one K. Enumerates all ordered initial
/// pairs when the initial set is small; otherwise falls back to the
/// documented worst pair (reversed decks, complementary bitvectors).
inline MixRow mixing_point_exact(const CaseStudy& cs,
                                 const LoopConfig& cfg = {},
                                 size_t enumerate_limit = 40) {
  detail::require_mixing_case(cs);
  MixRow row;
  row.K = cs.params.K;
  row.bound = cs.bound;
  const std::vector<State>* starts = &cs.initial_states;
  std::vector<State> worst_only;
  if (cs.initial_states.size() > enumerate_limit) {
    worst_only = {cs.init1, cs.init2};
    starts = &worst_only;
  }
  std::vector<ValueDist> margs;
  margs.reserve(starts->size());
  for (const State& s : *starts)
    margs.push_back(marginal(denote(cs.program.body, s, cfg), cs.state_var));
  ValueDist unif = detail::uniform_over_states(cs);
  Rat worst = 0, worst_u = 0;
  for (size_t i = 0; i < margs.size(); ++i) {
    for (size_t j = 0; j < margs.size(); ++j) {
      Rat t = tv(margs[i], margs[j]);
      if (t > worst) worst = t;
    }
    Rat tu = tv(margs[i], unif);
    if (tu > worst_u) worst_u = tu;
  }
  row.tv_exact = ExtRat(worst);
  row.tv_uniform = ExtRat(worst_u);
  return row;
}

/// Simulated mixing data for one K: paired empirical distributions from the
/// documented worst pair, with a conservative interval assembled from
/// per-point Wilson bounds.
inline MixRow mixing_point_simulated(const CaseStudy& cs, long trials,
                                     uint64_t seed) {
  detail::require_mixing_case(cs);
  MixRow row;
  row.K = cs.params.K;
  row.bound = cs.bound;
  row.trials = trials;
  std::map<Value, long> c1, c2;
  Prng root(seed);
  for (long t = 0; t < trials; ++t) {
    Prng g1 = root.substream(2 * t);
    Prng g2 = root.substream(2 * t + 1);
    State f1 = run_single(cs.program.body, cs.init1, g1);
    State f2 = run_single(cs.program.body, cs.init2, g2);
    ++c1[f1.get(cs.state_var)];
    ++c2[f2.get(cs.state_var)];
  }
  std::set<Value> support;
  for (const auto& [v, n] : c1) support.insert(v);
  for (const auto& [v, n] : c2) support.insert(v);
  double tv_hat = 0, half = 0;
  for (const Value& v : support) {
    long n1 = c1.count(v) ? c1[v] : 0;
    long n2 = c2.count(v) ? c2[v] : 0;
    double p1 = double(n1) / double(trials);
    double p2 = double(n2) / double(trials);
    tv_hat += 0.5 * std::fabs(p1 - p2);
    auto [lo1, hi1] = wilson_interval(n1, trials);
    auto [lo2, hi2] = wilson_interval(n2, trials);
    half += 0.5 * std::max(hi1 - p1, p1 - lo1);
    half += 0.5 * std::max(hi2 - p2, p2 - lo2);
  }
  row.tv_est = tv_hat;
  row.ci_lo = std::max(0.0, tv_hat - half);
  row.ci_hi = std::min(1.0, tv_hat + half);
  return row;
}

inline std::vector<MixRow> mixing_curve(const std::string& name,
                                        const CaseParams& base,
                                        const std::vector<long>& Ks,
                                        MixMode mode, long trials = 10000,
                                        uint64_t seed = 1,
                                        const LoopConfig& cfg = {}) {
  std::vector<MixRow> rows;
  for (long K : Ks) {
    CaseParams p = base;
    p.K = K;
    CaseStudy cs = make_case(name, p);
    if (mode == MixMode::Exact) {
      if (cs.initial_states.size() > 720)
        throw CaseError(
            "state space too large for exact mixing; use simulated mode");
      rows.push_back(mixing_point_exact(cs, cfg));
    } else {
      rows.push_back(mixing_point_simulated(cs, trials, seed + K));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Uniformity

struct UniformityReport {
  ExtRat tv_uniform;  // worst over enumerated starts
  ExtRat bound;
  bool artifact_ok = true;  // pairwise distance dominates |S1 - S2|
  size_t pairs_checked = 0;
  std::optional<std::pair<Value, Value>> violation;
};

/// Distance to the uniform distribution over the case's value space, plus a
/// check of the supporting argument: with reference values R1, R2 and the
/// pairing pi = {(R1[i], R2[i])}, the distance
///   d(a, b) = #{i : (a[i], b[i]) not in pi}
/// dominates |[a = R1] - [b = R2]| on every value pair.
inline UniformityReport uniformity_check(const CaseStudy& cs,
                                         const LoopConfig& cfg = {}) {
  detail::require_mixing_case(cs);
  UniformityReport rep;
  rep.bound = cs.bound;
  ValueDist unif = detail::uniform_over_states(cs);
  Rat worst = 0;
  for (const State& s : cs.initial_states) {
    Rat t = tv(marginal(denote(cs.program.body, s, cfg), cs.state_var), unif);
    if (t > worst) worst = t;
  }
  rep.tv_uniform = ExtRat(worst);

  const auto& r1 = cs.init1.get(cs.state_var).as_array();
  const auto& r2 = cs.init2.get(cs.state_var).as_array();
  std::set<std::pair<Int, Int>> pi;
  for (size_t i = 0; i < r1.size(); ++i) pi.insert({r1[i], r2[i]});
  for (const State& sa : cs.initial_states) {
    for (const State& sb : cs.initial_states) {
      const Value& a = sa.get(cs.state_var);
      const Value& b = sb.get(cs.state_var);
      ++rep.pairs_checked;
      long d = 0;
      const auto& av = a.as_array();
      const auto& bv = b.as_array();
      for (size_t i = 0; i < av.size(); ++i)
        if (!pi.count({av[i], bv[i]})) ++d;
      bool s1 = a == cs.init1.get(cs.state_var);
      bool s2 = b == cs.init2.get(cs.state_var);
      if (s1 != s2 && d < 1) {
        rep.artifact_ok = false;
        if (!rep.violation) rep.violation = {a, b};
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Coupled simulation

struct SimReport {
  SimStats stats;
  ExtRat bound;
  std::optional<CoupledTrace> trace;  // first trial, when requested
};

/// Monte-Carlo estimate of a relational expectation over the coupled output
/// pair. Discrete cases execute the program with the configured site
/// couplings; continuous cases run their built-in paired simulator (the
/// expectation argument is ignored there). Deterministic given the seed.
inline SimReport coupled_simulate(const CaseStudy& cs, long trials,
                                  uint64_t seed,
                                  const SExprPtr& E = nullptr,
                                  const SiteSpecs* specs = nullptr,
                                  bool keep_trace = false) {
  if (trials < 1) throw CaseError("coupled_simulate: need at least one trial");
  SimReport rep;
  rep.bound = cs.bound;
  std::vector<Rat> vals;
  vals.reserve(trials);
  Prng root(seed);
  if (cs.discrete) {
    const SExprPtr& post = E ? E : cs.distance;
    const SiteSpecs& sp = specs ? *specs : cs.specs;
    RelFn dist = relfn(post);
    for (long t = 0; t < trials; ++t) {
      Prng g = root.substream(t);
      CoupledTrace trace;
      trace.seed = seed;
      bool want = keep_trace && t == 0;
      auto [f1, f2] =
          run_coupled(cs.program.body, cs.init1, cs.init2, g, &sp,
                      want ? &trace : nullptr, want ? dist : RelFn{});
      ExtRat v = eval_relexp(post, f1, f2);
      if (v.is_inf())
        throw CaseError("simulated expectation is infinite on a trial");
      vals.push_back(v.value());
      if (want) rep.trace = std::move(trace);
    }
  } else {
    for (long t = 0; t < trials; ++t) vals.push_back(cs.trial(root.substream(t)));
  }
  rep.stats = summarize(vals, seed);
  return rep;
}

}  // namespace kantorel
