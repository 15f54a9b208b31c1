#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kantorel/rational.hpp"

namespace kantorel {

/// Runtime value: arbitrary-precision integer, boolean, or integer array.
struct Value {
  std::variant<Int, bool, std::vector<Int>> v;

  Value() : v(Int(0)) {}
  Value(Int n) : v(std::move(n)) {}
  Value(long n) : v(Int(n)) {}
  Value(int n) : v(Int(n)) {}
  Value(bool b) : v(b) {}
  Value(std::vector<Int> a) : v(std::move(a)) {}

  bool is_int() const { return std::holds_alternative<Int>(v); }
  bool is_bool() const { return std::holds_alternative<bool>(v); }
  bool is_array() const { return std::holds_alternative<std::vector<Int>>(v); }

  const Int& as_int() const {
    if (!is_int()) throw std::runtime_error("value is not an integer");
    return std::get<Int>(v);
  }
  bool as_bool() const {
    if (!is_bool()) throw std::runtime_error("value is not a boolean");
    return std::get<bool>(v);
  }
  const std::vector<Int>& as_array() const {
    if (!is_array()) throw std::runtime_error("value is not an array");
    return std::get<std::vector<Int>>(v);
  }
  std::vector<Int>& as_array() {
    if (!is_array()) throw std::runtime_error("value is not an array");
    return std::get<std::vector<Int>>(v);
  }

  bool operator==(const Value& o) const { return v == o.v; }
  bool operator<(const Value& o) const {
    if (v.index() != o.v.index()) return v.index() < o.v.index();
    if (is_int()) return as_int() < o.as_int();
    if (is_bool()) return as_bool() < o.as_bool();
    return as_array() < o.as_array();
  }

  std::string str() const {
    std::ostringstream os;
    if (is_int())
      os << as_int();
    else if (is_bool())
      os << (as_bool() ? "true" : "false");
    else {
      os << '[';
      const auto& a = as_array();
      for (size_t i = 0; i < a.size(); ++i) {
        if (i) os << ',';
        os << a[i];
      }
      os << ']';
    }
    return os.str();
  }
};

inline std::ostream& operator<<(std::ostream& os, const Value& v) {
  return os << v.str();
}

/// Program state: canonical ordered map from variable name to value.
/// Two states are equal iff their encodings are equal.
struct State {
  std::map<std::string, Value> vars;

  const Value& get(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end())
      throw std::runtime_error("undefined variable: " + name);
    return it->second;
  }
  void set(const std::string& name, Value v) { vars[name] = std::move(v); }
  bool has(const std::string& name) const { return vars.count(name) != 0; }

  bool operator==(const State& o) const { return vars == o.vars; }
  bool operator<(const State& o) const { return vars < o.vars; }

  std::string str() const {
    std::ostringstream os;
    os << '{';
    bool first = true;
    for (const auto& [k, v] : vars) {
      if (!first) os << ", ";
      first = false;
      os << k << '=' << v.str();
    }
    os << '}';
    return os.str();
  }
};

inline std::ostream& operator<<(std::ostream& os, const State& s) {
  return os << s.str();
}

}  // namespace kantorel
