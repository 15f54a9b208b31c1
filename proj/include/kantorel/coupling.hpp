#pragma once

#include <functional>
#include <optional>
#include <string>

#include "kantorel/dist.hpp"
#include "kantorel/transport.hpp"

namespace kantorel {

/// How to pair the two draws at a sampling site when both programs sample.
struct CouplingSpec {
  enum class Kind {
    Optimal,      // exact optimal transport for the ambient cost
    Identity,     // same value on both sides; distributions must agree
    Independent,  // product coupling
    Bijection,    // pair v with h(v, s1, s2); mass-preserving bijection
    Conditional,  // identity when cond(s1, s2), otherwise independent
  };
  Kind kind = Kind::Optimal;
  std::string name;  // label for reports
  std::function<Value(const Value&, const State&, const State&)> bij;
  std::function<bool(const State&, const State&)> cond;

  static CouplingSpec optimal() { return {Kind::Optimal, "optimal", {}, {}}; }
  static CouplingSpec identity() {
    return {Kind::Identity, "identity", {}, {}};
  }
  static CouplingSpec independent() {
    return {Kind::Independent, "independent", {}, {}};
  }
  static CouplingSpec bijection(
      std::string name,
      std::function<Value(const Value&, const State&, const State&)> h) {
    CouplingSpec sp;
    sp.kind = Kind::Bijection;
    sp.name = std::move(name);
    sp.bij = std::move(h);
    return sp;
  }
  static CouplingSpec conditional(
      std::string name, std::function<bool(const State&, const State&)> c) {
    CouplingSpec sp;
    sp.kind = Kind::Conditional;
    sp.name = std::move(name);
    sp.cond = std::move(c);
    return sp;
  }
};

struct CouplingBuildResult {
  std::optional<ValueJoint> joint;
  std::string error;  // why the spec does not apply, when joint is empty
};

/// Materializes a coupling of the two sampled-value distributions at a site.
/// The result, when present, is validated to have the exact marginals d1, d2.
inline CouplingBuildResult build_coupling(
    const CouplingSpec& spec, const ValueDist& d1, const ValueDist& d2,
    const State& s1, const State& s2,
    const std::function<ExtRat(const Value&, const Value&)>& cost = {}) {
  CouplingBuildResult out;
  auto independent = [&]() {
    ValueJoint j;
    for (const auto& [a, p] : d1.entries())
      for (const auto& [b, q] : d2.entries()) j.add(a, b, p * q);
    return j;
  };
  switch (spec.kind) {
    case CouplingSpec::Kind::Identity: {
      if (!(d1 == d2)) {
        out.error = "identity coupling: distributions differ";
        return out;
      }
      ValueJoint j;
      for (const auto& [v, p] : d1.entries()) j.add(v, v, p);
      out.joint = std::move(j);
      break;
    }
    case CouplingSpec::Kind::Independent:
      out.joint = independent();
      break;
    case CouplingSpec::Kind::Conditional:
      if (spec.cond(s1, s2)) {
        return build_coupling(CouplingSpec::identity(), d1, d2, s1, s2, cost);
      }
      out.joint = independent();
      break;
    case CouplingSpec::Kind::Bijection: {
      ValueJoint j;
      for (const auto& [v, p] : d1.entries()) {
        Value w = spec.bij(v, s1, s2);
        if (d2.prob(w) != p) {
          out.error = "bijection coupling: " + v.str() + " -> " + w.str() +
                      " does not preserve mass (" + p.str() + " vs " +
                      d2.prob(w).str() + ")";
          return out;
        }
        j.add(v, w, p);
      }
      out.joint = std::move(j);
      break;
    }
    case CouplingSpec::Kind::Optimal: {
      if (!cost) {
        out.error = "optimal coupling requires a cost";
        return out;
      }
      auto r = kantorovich<Value>(d1, d2, cost);
      if (!r.plan) {
        out.error = "no finite-cost coupling exists";
        return out;
      }
      out.joint = std::move(*r.plan);
      break;
    }
  }
  if (out.joint) {
    if (!(out.joint->left_marginal() == d1) ||
        !(out.joint->right_marginal() == d2)) {
      out.error = "coupling marginals do not match the site distributions";
      out.joint.reset();
    }
  }
  return out;
}

}  // namespace kantorel
