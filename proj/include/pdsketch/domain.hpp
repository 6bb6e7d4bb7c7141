#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdsketch/ast.hpp"
#include "pdsketch/common.hpp"

namespace pds {

// Resolved value type of a predicate or slot port. Bool is the scalar score
// type used by the soft logic; everything else is a fixed-size vector.
struct ValueType {
  enum class Kind { Bool, IntVec, FloatVec };
  Kind kind = Kind::Bool;
  int dim = 1;              // -1 = unspecified (resolved at binding time)
  std::string alias;        // declared name ("pose"), informational

  bool is_bool() const { return kind == Kind::Bool; }

  bool compatible(const ValueType& o) const {
    if (kind != o.kind) return false;
    if (kind == Kind::Bool) return true;
    return dim < 0 || o.dim < 0 || dim == o.dim;
  }

  std::string str() const {
    switch (kind) {
      case Kind::Bool: return "bool";
      case Kind::IntVec:
        return (alias.empty() ? std::string("vector[int64") +
                                    (dim >= 0 ? ", " + std::to_string(dim) : "") + "]"
                              : alias);
      case Kind::FloatVec:
        return (alias.empty() ? std::string("vector[float32") +
                                    (dim >= 0 ? ", " + std::to_string(dim) : "") + "]"
                              : alias);
    }
    return "?";
  }

  static ValueType boolean() { return {}; }
  static ValueType floats(int d, std::string alias = "") {
    ValueType t;
    t.kind = Kind::FloatVec;
    t.dim = d;
    t.alias = std::move(alias);
    return t;
  }
  static ValueType ints(int d, std::string alias = "") {
    ValueType t;
    t.kind = Kind::IntVec;
    t.dim = d;
    t.alias = std::move(alias);
    return t;
  }
};

struct Predicate {
  std::string name;
  std::vector<std::string> param_names;
  std::vector<int> param_types;  // object type ids
  ValueType ret;
  bool is_input = true;
  int derived_index = -1;  // into Domain::derived for derived predicates

  int arity() const { return int(param_types.size()); }
};

// One port of a slot signature. A variadic port is fed by a foreach group:
// an ordered list of (condition score, payload) pairs.
struct SlotPort {
  ValueType type;
  bool variadic = false;

  std::string str() const { return variadic ? "set[" + type.str() + "]" : type.str(); }
};

struct SlotSig {
  std::string canonical;  // "derived::<pred>::<name>" or "action::<action>::<name>"
  std::vector<SlotPort> inputs;
  ValueType output;

  std::string str() const {
    std::string s = "(";
    for (size_t i = 0; i < inputs.size(); ++i) {
      if (i) s += ", ";
      s += inputs[i].str();
    }
    return s + ") -> " + output.str();
  }
};

struct DerivedDefn {
  int pred_id = -1;
  Expr body;  // desugared, slot names canonicalized
};

struct ActionSchema {
  std::string name;
  std::vector<std::string> param_names;
  std::vector<int> param_types;
  Expr precondition;
  Expr effect;  // desugared, slot names canonicalized
};

struct Domain {
  std::string name;

  std::vector<std::string> object_types;  // [0] is always "object"
  std::map<std::string, int> object_type_ids;

  std::map<std::string, ValueType> value_types;  // named value-type aliases

  std::vector<Predicate> predicates;
  std::map<std::string, int> predicate_ids;

  std::vector<DerivedDefn> derived;  // definition order == topological order
  std::vector<ActionSchema> actions;

  std::map<std::string, SlotSig> slots;  // canonical name -> signature

  const Predicate& pred(int id) const { return predicates[size_t(id)]; }
  const Predicate* find_pred(const std::string& n) const {
    auto it = predicate_ids.find(n);
    return it == predicate_ids.end() ? nullptr : &predicates[size_t(it->second)];
  }
  int pred_id(const std::string& n) const {
    auto it = predicate_ids.find(n);
    if (it == predicate_ids.end()) throw EvalError("unknown predicate " + n);
    return it->second;
  }
  // true if an object of type `t` can bind a parameter of type `want`
  bool type_matches(int t, int want) const { return want == 0 || t == want; }
};

struct Universe {
  // (name, object type id), insertion-ordered; names unique
  std::vector<std::pair<std::string, int>> objects;
  std::map<std::string, int> index;

  int add(const std::string& name, int type_id) {
    if (index.count(name)) throw EvalError("duplicate object name " + name);
    index[name] = int(objects.size());
    objects.push_back({name, type_id});
    return int(objects.size()) - 1;
  }
  int size() const { return int(objects.size()); }
  const std::string& name_of(int i) const { return objects[size_t(i)].first; }
  int type_of(int i) const { return objects[size_t(i)].second; }
  int find(const std::string& name) const {
    auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
  }
  std::vector<int> of_type(const Domain& d, int type_id) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (d.type_matches(type_of(i), type_id)) out.push_back(i);
    return out;
  }
};

struct GroundedAction {
  int schema_index = -1;
  std::string name;             // schema name
  std::vector<int> args;        // universe object indices
  std::string display;          // "name(arg1, arg2)"

  bool operator==(const GroundedAction& o) const {
    return schema_index == o.schema_index && args == o.args;
  }
};

inline std::string action_display(const Universe& u, const std::string& name,
                                  const std::vector<int>& args) {
  std::string s = name + "(";
  for (size_t i = 0; i < args.size(); ++i) {
    if (i) s += ", ";
    s += u.name_of(args[i]);
  }
  return s + ")";
}

// All type-correct instantiations, in schema order x odometer order over each
// parameter's instances (universe order, last parameter fastest). Repeated
// objects are allowed.
inline std::vector<GroundedAction> ground_actions(const Domain& domain,
                                                  const Universe& universe) {
  std::vector<GroundedAction> out;
  for (size_t si = 0; si < domain.actions.size(); ++si) {
    const ActionSchema& schema = domain.actions[si];
    std::vector<std::vector<int>> candidates;
    bool empty = false;
    for (int t : schema.param_types) {
      candidates.push_back(universe.of_type(domain, t));
      if (candidates.back().empty()) empty = true;
    }
    if (empty) continue;
    std::vector<size_t> idx(candidates.size(), 0);
    while (true) {
      GroundedAction ga;
      ga.schema_index = int(si);
      ga.name = schema.name;
      for (size_t k = 0; k < idx.size(); ++k) ga.args.push_back(candidates[k][idx[k]]);
      ga.display = action_display(universe, ga.name, ga.args);
      out.push_back(std::move(ga));
      if (candidates.empty()) break;
      size_t k = candidates.size();
      while (k > 0) {
        --k;
        if (++idx[k] < candidates[k].size()) break;
        idx[k] = 0;
        if (k == 0) goto next_schema;
      }
    }
  next_schema:;
  }
  return out;
}

}  // namespace pds
