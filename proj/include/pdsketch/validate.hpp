#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdsketch/ast.hpp"
#include "pdsketch/common.hpp"
#include "pdsketch/domain.hpp"

namespace pds {

namespace detail {

// Result of typing an expression: a plain value, a conditioned value (from
// `when`), or a foreach group feeding a variadic slot port.
struct ExprType {
  ValueType vt;
  bool is_group = false;
  bool conditioned = false;

  static ExprType value(ValueType v) { return {v, false, false}; }
  static ExprType boolean() { return {ValueType::boolean(), false, false}; }
};

class Validator {
 public:
  explicit Validator(const DomainAST& ast) : ast_(ast) {}

  Domain run() {
    dom_.name = ast_.name;
    dom_.object_types.push_back("object");
    dom_.object_type_ids["object"] = 0;

    collect_types();
    collect_predicates();

    for (const auto& dd : ast_.derived_defs) process_derived(dd);
    for (const auto& ad : ast_.action_defs) process_action(ad);

    if (!errors_.empty()) throw ValidationError(errors_);
    return std::move(dom_);
  }

  // Type-checks a goal/standalone Boolean expression against a finished
  // domain; returns the slot-canonicalized copy.
  static Expr check_goal(const Domain& dom, const Expr& goal) {
    DomainAST empty;
    Validator v(empty);
    v.dom_ = dom;
    Expr out = goal;
    std::map<std::string, int> env;
    ValueType want = ValueType::boolean();
    ExprType t = v.check_expr(out, env, &want, "goal");
    if (t.is_group || !t.vt.is_bool())
      v.errors_.push_back("goal expression must be Boolean");
    if (!v.errors_.empty()) throw ValidationError(v.errors_);
    return out;
  }

 private:
  const DomainAST& ast_;
  Domain dom_;
  std::vector<std::string> errors_;

  void err(const std::string& msg) { errors_.push_back(msg); }
  void err(const std::string& msg, SourcePos pos) { errors_.push_back(pos.str() + ": " + msg); }

  // --- declarations ----------------------------------------------------------

  void collect_types() {
    for (const auto& td : ast_.type_defs) {
      for (const auto& name : td.names) {
        if (dom_.object_type_ids.count(name) || dom_.value_types.count(name) ||
            name == "bool" || name == "int64" || name == "float32" || name == "vector") {
          err("type '" + name + "' redeclared", td.pos);
          continue;
        }
        switch (td.base.kind) {
          case BaseType::Kind::Named:
            if (td.base.name == "object") {
              dom_.object_type_ids[name] = int(dom_.object_types.size());
              dom_.object_types.push_back(name);
            } else {
              err("base type of '" + name + "' must be 'object' or a primitive/vector type",
                  td.pos);
            }
            break;
          case BaseType::Kind::Bool:
            dom_.value_types[name] = ValueType::boolean();
            break;
          case BaseType::Kind::Int64:
            dom_.value_types[name] = ValueType::ints(1, name);
            break;
          case BaseType::Kind::Float32:
            dom_.value_types[name] = ValueType::floats(1, name);
            break;
          case BaseType::Kind::Vector:
            if (td.base.elem == BaseType::Prim::Bool) {
              err("vector[bool] value types are not supported", td.pos);
            } else if (td.base.elem == BaseType::Prim::Int64) {
              dom_.value_types[name] = ValueType::ints(td.base.dim, name);
            } else {
              dom_.value_types[name] = ValueType::floats(td.base.dim, name);
            }
            break;
        }
      }
    }
  }

  ValueType resolve_value_type(const BaseType& bt, SourcePos pos) {
    switch (bt.kind) {
      case BaseType::Kind::Bool: return ValueType::boolean();
      case BaseType::Kind::Int64: return ValueType::ints(1);
      case BaseType::Kind::Float32: return ValueType::floats(1);
      case BaseType::Kind::Vector:
        if (bt.elem == BaseType::Prim::Bool) {
          err("vector[bool] return types are not supported", pos);
          return ValueType::boolean();
        }
        return bt.elem == BaseType::Prim::Int64 ? ValueType::ints(bt.dim)
                                                : ValueType::floats(bt.dim);
      case BaseType::Kind::Named: {
        auto it = dom_.value_types.find(bt.name);
        if (it != dom_.value_types.end()) return it->second;
        err("unknown value type '" + bt.name + "'", pos);
        return ValueType::boolean();
      }
    }
    return ValueType::boolean();
  }

  int object_type_id(const std::string& name, SourcePos pos) {
    auto it = dom_.object_type_ids.find(name);
    if (it == dom_.object_type_ids.end()) {
      err("undeclared object type '" + name + "'", pos);
      return 0;
    }
    return it->second;
  }

  Predicate build_signature(const PredicateDef& pd, bool is_input) {
    Predicate p;
    p.name = pd.name;
    p.is_input = is_input;
    p.ret = resolve_value_type(pd.return_type(), pd.pos);
    for (const auto& tv : pd.params) {
      p.param_names.push_back(tv.name);
      p.param_types.push_back(tv.type.empty() ? -1 : object_type_id(tv.type, pd.pos));
    }
    return p;
  }

  void register_pred(Predicate p, SourcePos pos) {
    if (dom_.predicate_ids.count(p.name)) {
      err("predicate '" + p.name + "' redeclared", pos);
      return;
    }
    dom_.predicate_ids[p.name] = int(dom_.predicates.size());
    dom_.predicates.push_back(std::move(p));
  }

  void collect_predicates() {
    for (const auto& pd : ast_.predicate_defs)
      register_pred(build_signature(pd, /*is_input=*/true), pd.pos);
  }

  // --- parameter type inference ------------------------------------------------

  // Fills in -1 parameter types from the first constraining use in `e`.
  void infer_param_types(const Expr& e, std::map<std::string, int>& types) {
    switch (e.kind) {
      case ExprKind::PredicateCall: {
        const Predicate* p = dom_.find_pred(e.name);
        if (p) {
          for (size_t i = 0; i < e.children.size() && i < p->param_types.size(); ++i) {
            const Expr& a = e.children[i];
            if (a.kind == ExprKind::VariableRef) {
              auto it = types.find(a.name);
              if (it != types.end() && it->second < 0) it->second = p->param_types[i];
            }
          }
        }
        for (const auto& c : e.children) infer_param_types(c, types);
        break;
      }
      default:
        for (const auto& c : e.children) infer_param_types(c, types);
        break;
    }
  }

  // --- expressions ---------------------------------------------------------

  std::string slot_site_;  // "derived::is-red" / "action::forward"

  void check_call_args(const Expr& e, const Predicate& p,
                       const std::map<std::string, int>& env) {
    if (int(e.children.size()) != p.arity()) {
      err("predicate '" + p.name + "' expects " + std::to_string(p.arity()) +
              " argument(s), got " + std::to_string(e.children.size()),
          e.pos);
      return;
    }
    for (size_t i = 0; i < e.children.size(); ++i) {
      const Expr& a = e.children[i];
      if (a.kind == ExprKind::VariableRef) {
        auto it = env.find(a.name);
        if (it == env.end()) {
          err("unbound variable '" + a.name + "'", a.pos);
        } else if (!dom_.type_matches(it->second, p.param_types[i])) {
          err("argument " + std::to_string(i + 1) + " of '" + p.name + "': variable '" +
                  a.name + "' has type '" + dom_.object_types[size_t(it->second)] +
                  "', expected '" + dom_.object_types[size_t(p.param_types[i])] + "'",
              a.pos);
        }
      } else if (a.kind == ExprKind::Constant && a.const_kind == Expr::ConstKind::Object) {
        // object constants resolve against the universe at evaluation time
      } else {
        err("arguments of '" + p.name + "' must be variables or object constants", a.pos);
      }
    }
  }

  ExprType check_expr(Expr& e, std::map<std::string, int>& env, const ValueType* expected,
                      const std::string& where) {
    switch (e.kind) {
      case ExprKind::And:
      case ExprKind::Or:
      case ExprKind::Implies:
      case ExprKind::Not: {
        ValueType b = ValueType::boolean();
        for (auto& c : e.children) {
          ExprType t = check_expr(c, env, &b, where);
          if (t.is_group || t.conditioned || !t.vt.is_bool())
            err("logical connective expects Boolean operands", c.pos);
        }
        return ExprType::boolean();
      }
      case ExprKind::Forall:
      case ExprKind::Exists: {
        int tid = bind_var(e, env);
        ValueType b = ValueType::boolean();
        ExprType t = check_expr(e.children[0], env, &b, where);
        if (t.is_group || t.conditioned || !t.vt.is_bool())
          err("quantifier body must be Boolean", e.pos);
        unbind_var(e, env, tid);
        return ExprType::boolean();
      }
      case ExprKind::Foreach: {
        int tid = bind_var(e, env);
        ExprType t = check_expr(e.children[0], env, expected, where);
        unbind_var(e, env, tid);
        if (t.is_group) {
          err("nested foreach groups are not supported", e.pos);
          return t;
        }
        return {t.vt, true, t.conditioned};
      }
      case ExprKind::When: {
        ValueType b = ValueType::boolean();
        ExprType ct = check_expr(e.children[0], env, &b, where);
        if (ct.is_group || !ct.vt.is_bool()) err("'when' condition must be Boolean", e.pos);
        ExprType t = check_expr(e.children[1], env, expected, where);
        if (t.is_group) err("'when' body cannot be a foreach group", e.pos);
        return {t.vt, false, true};
      }
      case ExprKind::Assign:
        err("'assign' is only allowed inside action effects", e.pos);
        return ExprType::boolean();
      case ExprKind::PredicateCall: {
        if (e.name.find("::") != std::string::npos) {
          err("sugar form '" + e.name + "' survived desugaring", e.pos);
          return ExprType::boolean();
        }
        const Predicate* p = dom_.find_pred(e.name);
        if (!p) {
          err("unknown predicate '" + e.name + "' (derived predicates may only reference "
              "earlier definitions)",
              e.pos);
          return ExprType::boolean();
        }
        check_call_args(e, *p, env);
        return ExprType::value(p->ret);
      }
      case ExprKind::SlotCall:
        return check_slot_call(e, env, expected, where);
      case ExprKind::VariableRef:
        err("variable '" + e.name + "' cannot be used as an expression", e.pos);
        return ExprType::boolean();
      case ExprKind::Constant:
        switch (e.const_kind) {
          case Expr::ConstKind::True:
          case Expr::ConstKind::False:
            return ExprType::boolean();
          case Expr::ConstKind::Int:
            return ExprType::value(ValueType::ints(1));
          case Expr::ConstKind::Float:
            return ExprType::value(ValueType::floats(1));
          case Expr::ConstKind::Blank:
            err("'?\?' argument survived desugaring", e.pos);
            return ExprType::boolean();
          case Expr::ConstKind::Object:
            err("object constant '" + e.name + "' cannot be used as an expression", e.pos);
            return ExprType::boolean();
        }
        return ExprType::boolean();
    }
    return ExprType::boolean();
  }

  ExprType check_slot_call(Expr& e, std::map<std::string, int>& env, const ValueType* expected,
                           const std::string& where) {
    if (e.name.empty()) {
      err("slot call must carry a name, e.g. (??f ...)", e.pos);
      e.name = "anon";
    }
    std::string canonical =
        e.name.find("::") != std::string::npos ? e.name : slot_site_ + "::" + e.name;

    SlotSig sig;
    sig.canonical = canonical;
    for (auto& c : e.children) {
      ExprType t = check_expr(c, env, nullptr, where);
      SlotPort port;
      port.type = t.vt;
      port.variadic = t.is_group || t.conditioned;
      sig.inputs.push_back(port);
    }

    ValueType out;
    bool have_out = false;
    for (const auto& kw : e.kwargs) {
      if (kw.key == "return_type" && kw.kind == Kwarg::Kind::Type) {
        out = resolve_value_type(kw.type_val, e.pos);
        have_out = true;
      }
    }
    if (!have_out && expected) {
      out = *expected;
      have_out = true;
    }
    if (!have_out) {
      err("cannot infer output type of slot '??" + e.name + "'", e.pos);
      out = ValueType::boolean();
    }
    sig.output = out;

    auto it = dom_.slots.find(canonical);
    if (it == dom_.slots.end()) {
      dom_.slots[canonical] = sig;
    } else {
      if (!unify_sig(it->second, sig))
        err("slot '" + canonical + "' used with inconsistent signatures: " +
                it->second.str() + " vs " + sig.str(),
            e.pos);
    }
    e.name = canonical;
    return ExprType::value(out);
  }

  static bool unify_vt(ValueType& a, const ValueType& b) {
    if (!a.compatible(b)) return false;
    if (a.dim < 0) a.dim = b.dim;
    return true;
  }

  static bool unify_sig(SlotSig& into, const SlotSig& other) {
    if (into.inputs.size() != other.inputs.size()) return false;
    for (size_t i = 0; i < into.inputs.size(); ++i) {
      if (into.inputs[i].variadic != other.inputs[i].variadic) return false;
      if (!unify_vt(into.inputs[i].type, other.inputs[i].type)) return false;
    }
    return unify_vt(into.output, other.output);
  }

  int bind_var(const Expr& e, std::map<std::string, int>& env) {
    int tid = 0;
    if (e.bound.type.empty()) {
      err("bound variable '" + e.bound.name + "' needs a type", e.pos);
    } else if (dom_.value_types.count(e.bound.type)) {
      err("bound variable '" + e.bound.name + "' must have an object type", e.pos);
    } else {
      tid = object_type_id(e.bound.type, e.pos);
    }
    auto it = env.find(e.bound.name);
    shadow_stack_.push_back(it == env.end() ? std::pair<std::string, int>{e.bound.name, -2}
                                            : std::pair<std::string, int>{e.bound.name, it->second});
    env[e.bound.name] = tid;
    return tid;
  }

  void unbind_var(const Expr& e, std::map<std::string, int>& env, int) {
    auto saved = shadow_stack_.back();
    shadow_stack_.pop_back();
    if (saved.second == -2)
      env.erase(e.bound.name);
    else
      env[e.bound.name] = saved.second;
  }

  std::vector<std::pair<std::string, int>> shadow_stack_;

  // --- effects ---------------------------------------------------------------

  void check_effect(Expr& e, std::map<std::string, int>& env) {
    switch (e.kind) {
      case ExprKind::And:
        for (auto& c : e.children) check_effect(c, env);
        return;
      case ExprKind::Foreach: {
        int tid = bind_var(e, env);
        check_effect(e.children[0], env);
        unbind_var(e, env, tid);
        return;
      }
      case ExprKind::When: {
        ValueType b = ValueType::boolean();
        ExprType ct = check_expr(e.children[0], env, &b, "effect condition");
        if (ct.is_group || !ct.vt.is_bool()) err("'when' condition must be Boolean", e.pos);
        check_effect(e.children[1], env);
        return;
      }
      case ExprKind::Assign: {
        Expr& target = e.children[0];
        if (target.kind != ExprKind::PredicateCall) {
          err("assign target must be a predicate call", e.pos);
          return;
        }
        const Predicate* p = dom_.find_pred(target.name);
        if (!p) {
          err("unknown predicate '" + target.name + "' in assign", target.pos);
          return;
        }
        if (!p->is_input) {
          err("cannot assign to derived predicate '" + p->name + "'", target.pos);
          return;
        }
        check_call_args(target, *p, env);
        ValueType want = p->ret;
        ExprType vt = check_expr(e.children[1], env, &want, "assign value");
        if (vt.is_group) {
          err("assign value cannot be a foreach group", e.pos);
        } else if (vt.conditioned) {
          err("assign value cannot be conditioned; use (when c (assign ...))", e.pos);
        } else if (!want.compatible(vt.vt)) {
          err("assign to '" + p->name + "' of type " + want.str() + " from incompatible " +
                  vt.vt.str(),
              e.pos);
        }
        return;
      }
      default:
        err("invalid effect expression (expected and/foreach/when/assign)", e.pos);
    }
  }

  // --- definitions -----------------------------------------------------------

  void process_derived(const DerivedDef& dd_in) {
    DerivedDef dd = dd_in;
    // untyped parameters: infer from the body
    std::map<std::string, int> inferred;
    bool has_untyped = false;
    for (const auto& tv : dd.signature.params)
      if (tv.type.empty()) {
        inferred[tv.name] = -1;
        has_untyped = true;
      }
    if (has_untyped) {
      infer_param_types(dd.body, inferred);
      for (auto& tv : dd.signature.params) {
        if (!tv.type.empty()) continue;
        int t = inferred[tv.name];
        if (t < 0)
          err("cannot infer type of parameter '" + tv.name + "' of '" + dd.signature.name + "'",
              dd.signature.pos);
        else
          tv.type = dom_.object_types[size_t(t)];
      }
    }

    Predicate sig = build_signature(dd.signature, /*is_input=*/false);
    std::map<std::string, int> env;
    for (size_t i = 0; i < sig.param_names.size(); ++i)
      env[sig.param_names[i]] = sig.param_types[i] < 0 ? 0 : sig.param_types[i];

    slot_site_ = "derived::" + sig.name;
    Expr body = dd.body;
    ValueType want = sig.ret;
    ExprType bt = check_expr(body, env, &want, "derived body");
    if (bt.is_group || bt.conditioned || !want.compatible(bt.vt))
      err("body of derived predicate '" + sig.name + "' has type " + bt.vt.str() +
              ", declared " + want.str(),
          dd.signature.pos);

    sig.derived_index = int(dom_.derived.size());
    register_pred(sig, dd.signature.pos);
    DerivedDefn defn;
    defn.pred_id = dom_.predicate_ids.count(sig.name) ? dom_.predicate_ids[sig.name] : -1;
    defn.body = std::move(body);
    dom_.derived.push_back(std::move(defn));
  }

  void process_action(const ActionDef& ad_in) {
    ActionDef ad = ad_in;
    std::map<std::string, int> inferred;
    bool has_untyped = false;
    for (const auto& tv : ad.params)
      if (tv.type.empty()) {
        inferred[tv.name] = -1;
        has_untyped = true;
      }
    if (has_untyped) {
      infer_param_types(ad.precondition, inferred);
      infer_param_types(ad.effect, inferred);
      for (auto& tv : ad.params) {
        if (!tv.type.empty()) continue;
        int t = inferred[tv.name];
        if (t < 0)
          err("cannot infer type of parameter '" + tv.name + "' of action '" + ad.name + "'",
              ad.pos);
        else
          tv.type = dom_.object_types[size_t(t)];
      }
    }

    ActionSchema schema;
    schema.name = ad.name;
    std::map<std::string, int> env;
    for (const auto& tv : ad.params) {
      int tid = tv.type.empty() ? 0 : object_type_id(tv.type, ad.pos);
      if (dom_.value_types.count(tv.type))
        err("action parameter '" + tv.name + "' must have an object type", ad.pos);
      schema.param_names.push_back(tv.name);
      schema.param_types.push_back(tid);
      env[tv.name] = tid;
    }

    slot_site_ = "action::" + ad.name;
    schema.precondition = ad.precondition;
    ValueType b = ValueType::boolean();
    ExprType pt = check_expr(schema.precondition, env, &b, "precondition");
    if (pt.is_group || pt.conditioned || !pt.vt.is_bool())
      err("precondition of action '" + ad.name + "' must be Boolean", ad.pos);

    schema.effect = ad.effect;
    check_effect(schema.effect, env);
    dom_.actions.push_back(std::move(schema));
  }
};

}  // namespace detail

// Type-checks a desugared AST and produces the runtime Domain. Collects every
// violation before throwing.
inline Domain validate(const DomainAST& ast) { return detail::Validator(ast).run(); }

inline Expr validate_goal(const Domain& dom, const Expr& goal) {
  return detail::Validator::check_goal(dom, goal);
}

}  // namespace pds
