#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "kantorel/dist.hpp"
#include "kantorel/rational.hpp"

namespace kantorel {

/// Total variation distance: half the L1 distance between the mass
/// functions. Defined for sub-distributions of any masses.
template <typename K>
Rat tv(const FiniteDist<K>& mu, const FiniteDist<K>& nu) {
  Rat acc = 0;
  for (const auto& [k, p] : mu.entries()) {
    Rat d = p - nu.prob(k);
    acc += d < 0 ? Rat(-d) : d;
  }
  for (const auto& [k, q] : nu.entries())
    if (mu.prob(k) == 0) acc += q;
  return acc / 2;
}

namespace detail {

/// Exact min-cost flow by successive shortest paths, rational arithmetic
/// throughout. Node 0 is the super source, node 1 the super sink.
class MinCostFlow {
public:
  explicit MinCostFlow(int n) : head_(n, -1) {}

  void add_edge(int u, int v, Rat cap, Rat cost) {
    edges_.push_back({v, head_[u], std::move(cap), cost});
    head_[u] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({u, head_[v], Rat(0), Rat(-cost)});
    head_[v] = static_cast<int>(edges_.size()) - 1;
  }

  /// Routes as much flow as possible from s to t at minimum cost.
  /// Returns {flow, cost}.
  std::pair<Rat, Rat> run(int s, int t) {
    Rat flow = 0, cost = 0;
    const int n = static_cast<int>(head_.size());
    while (true) {
      // Bellman-Ford on the residual graph; costs may be negative there.
      std::vector<std::optional<Rat>> dist(n);
      std::vector<int> pre(n, -1);
      dist[s] = Rat(0);
      bool changed = true;
      for (int round = 0; round < n && changed; ++round) {
        changed = false;
        for (int u = 0; u < n; ++u) {
          if (!dist[u]) continue;
          for (int ei = head_[u]; ei != -1; ei = edges_[ei].next) {
            const Edge& e = edges_[ei];
            if (e.cap == 0) continue;
            Rat nd = *dist[u] + e.cost;
            if (!dist[e.to] || nd < *dist[e.to]) {
              dist[e.to] = nd;
              pre[e.to] = ei;
              changed = true;
            }
          }
        }
      }
      if (!dist[t]) break;
      Rat push;
      bool first = true;
      for (int v = t; v != s;) {
        const Edge& e = edges_[pre[v]];
        if (first || e.cap < push) push = e.cap;
        first = false;
        v = edges_[pre[v] ^ 1].to;
      }
      for (int v = t; v != s;) {
        edges_[pre[v]].cap -= push;
        edges_[pre[v] ^ 1].cap += push;
        v = edges_[pre[v] ^ 1].to;
      }
      flow += push;
      cost += push * *dist[t];
    }
    return {flow, cost};
  }

  const Rat& forward_flow(int edge_pair_index) const {
    // flow on the k-th added edge equals the residual cap of its reverse
    return edges_[2 * edge_pair_index + 1].cap;
  }

private:
  struct Edge {
    int to, next;
    Rat cap, cost;
  };
  std::vector<Edge> edges_;
  std::vector<int> head_;
};

}  // namespace detail

template <typename K>
struct KantorovichResult {
  ExtRat value;
  std::optional<JointDist<K>> plan;  // optimal coupling when value is finite
};

/// Exact Kantorovich distance between sub-distributions of equal mass with
/// respect to a nonnegative extended-rational cost. If the masses differ
/// there is no coupling and the distance is infinite; infinite-cost pairs
/// are simply unusable by the plan.
template <typename K>
KantorovichResult<K> kantorovich(
    const FiniteDist<K>& mu, const FiniteDist<K>& nu,
    const std::function<ExtRat(const K&, const K&)>& cost) {
  KantorovichResult<K> out;
  if (mu.mass() != nu.mass()) {
    out.value = ExtRat::infinity();
    return out;
  }
  if (mu.mass() == 0) {
    out.value = ExtRat(0);
    out.plan.emplace();
    return out;
  }
  std::vector<const K*> left, right;
  std::vector<Rat> lmass, rmass;
  for (const auto& [k, p] : mu.entries()) {
    left.push_back(&k);
    lmass.push_back(p);
  }
  for (const auto& [k, p] : nu.entries()) {
    right.push_back(&k);
    rmass.push_back(p);
  }
  const int m = static_cast<int>(left.size());
  const int n = static_cast<int>(right.size());
  // nodes: 0 = source, 1 = sink, 2..2+m-1 = left, 2+m.. = right
  detail::MinCostFlow mcf(2 + m + n);
  struct Arc {
    int i, j, pair_index;
  };
  std::vector<Arc> arcs;
  int pair_index = 0;
  for (int i = 0; i < m; ++i) {
    mcf.add_edge(0, 2 + i, lmass[i], Rat(0));
    ++pair_index;
  }
  for (int j = 0; j < n; ++j) {
    mcf.add_edge(2 + m + j, 1, rmass[j], Rat(0));
    ++pair_index;
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      ExtRat c = cost(*left[i], *right[j]);
      if (!c.is_nonneg()) throw std::runtime_error("negative transport cost");
      if (c.is_inf()) continue;  // unusable pair
      mcf.add_edge(2 + i, 2 + m + j, lmass[i] < rmass[j] ? lmass[i] : rmass[j],
                   c.value());
      arcs.push_back({i, j, pair_index++});
    }
  }
  auto [flow, total_cost] = mcf.run(0, 1);
  if (flow != mu.mass()) {
    // some mass can only move along infinite-cost pairs
    out.value = ExtRat::infinity();
    return out;
  }
  out.value = ExtRat(total_cost);
  out.plan.emplace();
  for (const Arc& a : arcs) {
    const Rat& f = mcf.forward_flow(a.pair_index);
    if (f != 0) out.plan->add(*left[a.i], *right[a.j], f);
  }
  return out;
}

/// Discrete-metric cost: 0 on the diagonal, 1 off it.
template <typename K>
ExtRat discrete_cost(const K& a, const K& b) {
  return ExtRat(a == b ? 0 : 1);
}

/// Kantorovich distance for the discrete metric; coincides with tv() for
/// equal-mass arguments.
template <typename K>
KantorovichResult<K> kantorovich_discrete(const FiniteDist<K>& mu,
                                          const FiniteDist<K>& nu) {
  return kantorovich<K>(mu, nu, [](const K& a, const K& b) {
    return discrete_cost(a, b);
  });
}

/// Verifies that a plan is a genuine coupling of mu and nu by recomputing
/// both marginals.
template <typename K>
bool is_coupling(const JointDist<K>& plan, const FiniteDist<K>& mu,
                 const FiniteDist<K>& nu) {
  return plan.left_marginal() == mu && plan.right_marginal() == nu;
}

/// |E_mu[f] - E_nu[f]| for a real-valued f; any coupling-based relational
/// bound with cost |f(s1) - f(s2)| dominates this quantity.
template <typename K>
ExtRat expected_diff(const FiniteDist<K>& mu, const FiniteDist<K>& nu,
                     const std::function<ExtRat(const K&)>& f) {
  ExtRat a = mu.expected(f);
  ExtRat b = nu.expected(f);
  if (a.is_inf() || b.is_inf()) return ExtRat::infinity();
  return (a - b).abs();
}

template <typename K>
struct ScaledTvResult {
  bool applicable = false;          // cost >= rho off the diagonal held
  std::optional<std::pair<K, K>> violation;  // witness when it did not
  ExtRat tv_bound;                  // kantorovich / rho when applicable
};

/// Scaled total-variation bound: when the cost is at least rho off the
/// diagonal on the two supports, TV <= Kantorovich / rho. The pointwise
/// precondition is checked exhaustively over support pairs.
template <typename K>
ScaledTvResult<K> scaled_tv_bound(
    const FiniteDist<K>& mu, const FiniteDist<K>& nu,
    const std::function<ExtRat(const K&, const K&)>& cost, const Rat& rho) {
  ScaledTvResult<K> out;
  if (rho <= 0) throw std::runtime_error("scaled_tv_bound: rho must be > 0");
  for (const auto& [a, pa] : mu.entries()) {
    for (const auto& [b, pb] : nu.entries()) {
      if (a == b) continue;
      if (cost(a, b) < ExtRat(rho)) {
        out.violation = {a, b};
        return out;
      }
    }
  }
  out.applicable = true;
  out.tv_bound = kantorovich(mu, nu, cost).value / ExtRat(rho);
  return out;
}

/// Coupling induced by a bijection between the supports: pairs k with f(k).
/// Fails (nullopt) unless f maps the support of mu onto the support of nu
/// preserving mass exactly.
template <typename K>
std::optional<JointDist<K>> coupling_from_bijection(
    const FiniteDist<K>& mu, const FiniteDist<K>& nu,
    const std::function<K(const K&)>& f) {
  JointDist<K> plan;
  for (const auto& [k, p] : mu.entries()) {
    K k2 = f(k);
    if (nu.prob(k2) != p) return std::nullopt;
    plan.add(k, k2, p);
  }
  if (!is_coupling(plan, mu, nu)) return std::nullopt;
  return plan;
}

}  // namespace kantorel
