#pragma once

#include <functional>
#include <map>
#include <utility>

#include "kantorel/rational.hpp"
#include "kantorel/value.hpp"

namespace kantorel {

/// Finite sub-distribution over a totally ordered key type.
/// Total mass <= 1; zero-probability entries are never stored.
template <typename K>
class FiniteDist {
public:
  using Map = std::map<K, Rat>;

  FiniteDist() = default;

  static FiniteDist dirac(const K& k) {
    FiniteDist d;
    d.add(k, Rat(1));
    return d;
  }

  void add(const K& k, const Rat& p) {
    if (p == 0) return;
    if (p < 0) throw std::runtime_error("negative probability");
    auto [it, inserted] = entries_.emplace(k, p);
    if (!inserted) it->second += p;
    mass_ += p;
  }

  const Map& entries() const { return entries_; }
  size_t support_size() const { return entries_.size(); }
  const Rat& mass() const { return mass_; }
  bool empty() const { return entries_.empty(); }

  Rat prob(const K& k) const {
    auto it = entries_.find(k);
    return it == entries_.end() ? Rat(0) : it->second;
  }

  /// Monadic bind: sum_k p(k) * f(k).
  template <typename F>
  auto bind(F&& f) const -> FiniteDist<K> {
    FiniteDist<K> out;
    for (const auto& [k, p] : entries_) {
      FiniteDist<K> fk = f(k);
      for (const auto& [k2, p2] : fk.entries_) out.add(k2, p * p2);
    }
    return out;
  }

  template <typename F, typename K2>
  FiniteDist<K2> map_keys(F&& f) const {
    FiniteDist<K2> out;
    for (const auto& [k, p] : entries_) out.add(f(k), p);
    return out;
  }

  /// E[f] with f mapping into extended rationals; infinity dominates any
  /// positive-mass point mapped to infinity.
  ExtRat expected(const std::function<ExtRat(const K&)>& f) const {
    ExtRat acc(0);
    for (const auto& [k, p] : entries_) acc += f(k) * ExtRat(Rat(p));
    return acc;
  }

  FiniteDist scaled(const Rat& c) const {
    FiniteDist out;
    for (const auto& [k, p] : entries_) out.add(k, p * c);
    return out;
  }

  FiniteDist plus(const FiniteDist& o) const {
    FiniteDist out = *this;
    for (const auto& [k, p] : o.entries_) out.add(k, p);
    return out;
  }

  bool operator==(const FiniteDist& o) const { return entries_ == o.entries_; }

private:
  Map entries_;
  Rat mass_ = 0;
};

using SubDist = FiniteDist<State>;
using ValueDist = FiniteDist<Value>;

inline SubDist dirac(const State& s) { return SubDist::dirac(s); }

template <typename F>
SubDist bind(const SubDist& mu, F&& f) {
  return mu.bind(std::forward<F>(f));
}

inline ExtRat expected(const SubDist& mu,
                       const std::function<ExtRat(const State&)>& f) {
  return mu.expected(f);
}

/// Joint sub-distribution over pairs, with marginal recomputation.
template <typename K>
class JointDist {
public:
  using Pair = std::pair<K, K>;

  void add(const K& a, const K& b, const Rat& p) { d_.add({a, b}, p); }
  const std::map<Pair, Rat>& entries() const { return d_.entries(); }
  const Rat& mass() const { return d_.mass(); }

  FiniteDist<K> left_marginal() const {
    FiniteDist<K> m;
    for (const auto& [ab, p] : d_.entries()) m.add(ab.first, p);
    return m;
  }
  FiniteDist<K> right_marginal() const {
    FiniteDist<K> m;
    for (const auto& [ab, p] : d_.entries()) m.add(ab.second, p);
    return m;
  }

  ExtRat expected(const std::function<ExtRat(const K&, const K&)>& f) const {
    ExtRat acc(0);
    for (const auto& [ab, p] : d_.entries())
      acc += f(ab.first, ab.second) * ExtRat(Rat(p));
    return acc;
  }

private:
  FiniteDist<Pair> d_;
};

using StateJoint = JointDist<State>;
using ValueJoint = JointDist<Value>;

}  // namespace kantorel
