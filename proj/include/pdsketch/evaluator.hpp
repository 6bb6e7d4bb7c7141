#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdsketch/ast.hpp"
#include "pdsketch/runtime.hpp"
#include "pdsketch/state.hpp"

namespace pds {

class UnknownObjectConstant : public Error {
 public:
  explicit UnknownObjectConstant(const std::string& name)
      : Error("unknown object constant '" + name + "'") {}
};

class NonBooleanGoal : public Error {
 public:
  NonBooleanGoal() : Error("goal expression must evaluate to a Boolean score") {}
};

struct Binding {
  std::vector<std::pair<std::string, int>> vars;  // innermost last

  int lookup(const std::string& name) const {
    for (auto it = vars.rbegin(); it != vars.rend(); ++it)
      if (it->first == name) return it->second;
    return -1;
  }
  void push(const std::string& name, int obj) { vars.push_back({name, obj}); }
  void pop() { vars.pop_back(); }
};

// Result of evaluating one expression: a value node, a conditioned value
// (from `when`), or a foreach group.
struct EvalResult {
  NodeId value = -1;
  NodeId cond = -1;  // -1 = unconditioned
  bool is_group = false;
  std::vector<std::pair<NodeId, NodeId>> group;  // (cond, payload)
};

// Evaluates expressions over one factored state on one tape, with the Gödel
// t-norm semantics: not p = 1-p, and = min, or = max, forall = min, exists =
// max, implies(p,q) = max(1-p, q). Derived predicates are memoized per state.
// Create one evaluator per (tape, state) pair; single-threaded.
class Evaluator {
 public:
  Evaluator(Tape& tape, const Runtime& rt, const FactoredState& state)
      : tape_(tape), rt_(rt), dom_(rt.domain()), state_(state) {}

  Tape& tape() { return tape_; }
  const FactoredState& state() const { return state_; }
  const Domain& domain() const { return dom_; }

  NodeId eval_scalar(const Expr& e, Binding& binding) {
    EvalResult r = eval(e, binding);
    if (r.is_group || r.cond >= 0 || r.value < 0)
      throw EvalError("expected a plain value, got a group/conditioned result");
    return r.value;
  }

  EvalResult eval(const Expr& e, Binding& binding) {
    switch (e.kind) {
      case ExprKind::And: {
        NodeId acc = -1;
        for (const auto& c : e.children) {
          NodeId v = eval_scalar(c, binding);
          acc = acc < 0 ? v : tape_.minimum(acc, v);
        }
        return value(acc < 0 ? tape_.scalar(1.0) : acc);
      }
      case ExprKind::Or: {
        NodeId acc = -1;
        for (const auto& c : e.children) {
          NodeId v = eval_scalar(c, binding);
          acc = acc < 0 ? v : tape_.maximum(acc, v);
        }
        return value(acc < 0 ? tape_.scalar(0.0) : acc);
      }
      case ExprKind::Not:
        return value(tape_.one_minus_scalar(eval_scalar(e.children[0], binding)));
      case ExprKind::Implies: {
        NodeId p = eval_scalar(e.children[0], binding);
        NodeId q = eval_scalar(e.children[1], binding);
        return value(tape_.maximum(tape_.one_minus_scalar(p), q));
      }
      case ExprKind::Forall:
      case ExprKind::Exists: {
        bool is_forall = e.kind == ExprKind::Forall;
        NodeId acc = -1;
        for (int obj : instances_of(e.bound.type)) {
          binding.push(e.bound.name, obj);
          NodeId v = eval_scalar(e.children[0], binding);
          binding.pop();
          if (acc < 0)
            acc = v;
          else
            acc = is_forall ? tape_.minimum(acc, v) : tape_.maximum(acc, v);
        }
        // empty-domain identities: forall -> 1, exists -> 0
        if (acc < 0) acc = tape_.scalar(is_forall ? 1.0 : 0.0);
        return value(acc);
      }
      case ExprKind::Foreach: {
        EvalResult out;
        out.is_group = true;
        for (int obj : instances_of(e.bound.type)) {
          binding.push(e.bound.name, obj);
          EvalResult r = eval(e.children[0], binding);
          binding.pop();
          if (r.is_group) throw EvalError("nested foreach groups are not supported");
          out.group.push_back({r.cond, r.value});
        }
        return out;
      }
      case ExprKind::When: {
        NodeId c = eval_scalar(e.children[0], binding);
        EvalResult r = eval(e.children[1], binding);
        if (r.is_group) throw EvalError("'when' body cannot be a foreach group");
        if (r.cond >= 0) c = tape_.minimum(c, r.cond);
        EvalResult out;
        out.value = r.value;
        out.cond = c;
        return out;
      }
      case ExprKind::PredicateCall:
        return value(eval_predicate(e, binding));
      case ExprKind::SlotCall:
        return value(eval_slot(e, binding));
      case ExprKind::Constant:
        switch (e.const_kind) {
          case Expr::ConstKind::True: return value(tape_.scalar(1.0));
          case Expr::ConstKind::False: return value(tape_.scalar(0.0));
          case Expr::ConstKind::Int: return value(tape_.scalar(double(e.int_val)));
          case Expr::ConstKind::Float: return value(tape_.scalar(e.float_val));
          default:
            throw EvalError("cannot evaluate constant '" + e.name + "' as an expression");
        }
      case ExprKind::Assign:
        throw EvalError("assign is not an expression");
      case ExprKind::VariableRef:
        throw EvalError("variable '" + e.name + "' is not an expression");
    }
    throw EvalError("unreachable");
  }

  // Resolves a call's arguments to universe object indices.
  std::vector<int> resolve_args(const Expr& call, Binding& binding) {
    std::vector<int> args;
    for (const auto& a : call.children) {
      if (a.kind == ExprKind::VariableRef) {
        int obj = binding.lookup(a.name);
        if (obj < 0) throw EvalError("unbound variable " + a.name);
        args.push_back(obj);
      } else if (a.kind == ExprKind::Constant && a.const_kind == Expr::ConstKind::Object) {
        int obj = state_.universe->find(a.name);
        if (obj < 0) throw UnknownObjectConstant(a.name);
        args.push_back(obj);
      } else {
        throw EvalError("call arguments must be variables or object constants");
      }
    }
    return args;
  }

  NodeId eval_predicate(const Expr& e, Binding& binding) {
    int pid = dom_.pred_id(e.name);
    const Predicate& p = dom_.pred(pid);
    std::vector<int> args = resolve_args(e, binding);

    if (p.is_input) {
      const StateEntry& entry = state_.entry(pid, args);
      return entry_node(entry);
    }

    auto key = std::make_pair(pid, args);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    const DerivedDefn& defn = dom_.derived[size_t(p.derived_index)];
    Binding inner;
    for (size_t i = 0; i < p.param_names.size(); ++i) inner.push(p.param_names[i], args[i]);
    NodeId v = eval_scalar_or_vector(defn.body, inner);
    memo_[key] = v;
    return v;
  }

  NodeId eval_slot(const Expr& e, Binding& binding) {
    const SlotFn& fn = rt_.slot_fn(e.name);
    SlotArgs args;
    for (const auto& c : e.children) {
      EvalResult r = eval(c, binding);
      SlotArgs::Port port;
      if (r.is_group) {
        port.variadic = true;
        port.group = r.group;
      } else if (r.cond >= 0) {
        port.variadic = true;
        port.group = {{r.cond, r.value}};
      } else {
        port.fixed = r.value;
      }
      args.ports.push_back(std::move(port));
    }
    return fn(tape_, args);
  }

  // Lazily attaches an entry to this tape; entries attached to another
  // tape are re-leafed from their stored values.
  NodeId entry_node(const StateEntry& entry) {
    NodeId own = entry.node_on(tape_);
    if (own >= 0) return own;
    auto it = attached_.find(&entry);
    if (it != attached_.end()) return it->second;
    NodeId id = tape_.constant_floats(entry.value);
    attached_[&entry] = id;
    return id;
  }

  std::vector<int> instances_of(const std::string& type_name) {
    auto it = dom_.object_type_ids.find(type_name);
    if (it == dom_.object_type_ids.end()) throw EvalError("unknown type " + type_name);
    return state_.universe->of_type(dom_, it->second);
  }

 private:
  NodeId eval_scalar_or_vector(const Expr& e, Binding& binding) {
    EvalResult r = eval(e, binding);
    if (r.is_group || r.cond >= 0)
      throw EvalError("derived body must evaluate to a plain value");
    return r.value;
  }

  static EvalResult value(NodeId v) {
    EvalResult r;
    r.value = v;
    return r;
  }

  Tape& tape_;
  const Runtime& rt_;
  const Domain& dom_;
  const FactoredState& state_;
  std::map<std::pair<int, std::vector<int>>, NodeId> memo_;
  std::map<const StateEntry*, NodeId> attached_;
};

// Scalar goal score; the goal is satisfied iff the score exceeds 0.5.
inline NodeId eval_goal_node(Evaluator& ev, const Expr& goal) {
  Binding binding;
  EvalResult r = ev.eval(goal, binding);
  if (r.is_group || r.cond >= 0 || r.value < 0) throw NonBooleanGoal();
  if (ev.tape().size(r.value) != 1) throw NonBooleanGoal();
  return r.value;
}

inline double eval_goal(Tape& tape, const Runtime& rt, const FactoredState& state,
                        const Expr& goal) {
  Evaluator ev(tape, rt, state);
  return tape.scalar_value(eval_goal_node(ev, goal));
}

// --- transition application ---------------------------------------------------

class AssignToDerived : public Error {
 public:
  explicit AssignToDerived(const std::string& name)
      : Error("cannot assign to derived predicate " + name) {}
};

namespace detail {

struct PendingWrite {
  int pred_id;
  std::vector<int> args;
  NodeId value;       // right-hand side, evaluated on the pre-state
  NodeId cond = -1;   // soft condition, -1 = unconditional
  bool is_true_const = false;
  bool is_false_const = false;
};

inline void collect_writes(Evaluator& ev, const Expr& effect, Binding& binding,
                           NodeId cond, std::vector<PendingWrite>& out) {
  Tape& tape = ev.tape();
  switch (effect.kind) {
    case ExprKind::And:
      for (const auto& c : effect.children) collect_writes(ev, c, binding, cond, out);
      return;
    case ExprKind::Foreach:
      for (int obj : ev.instances_of(effect.bound.type)) {
        binding.push(effect.bound.name, obj);
        collect_writes(ev, effect.children[0], binding, cond, out);
        binding.pop();
      }
      return;
    case ExprKind::When: {
      NodeId c = ev.eval_scalar(effect.children[0], binding);
      if (cond >= 0) c = tape.minimum(cond, c);
      collect_writes(ev, effect.children[1], binding, c, out);
      return;
    }
    case ExprKind::Assign: {
      const Expr& target = effect.children[0];
      const Domain& dom = ev.domain();
      int pid = dom.pred_id(target.name);
      const Predicate& p = dom.pred(pid);
      if (!p.is_input) throw AssignToDerived(p.name);
      PendingWrite w;
      w.pred_id = pid;
      w.args = ev.resolve_args(target, binding);
      w.cond = cond;
      const Expr& rhs = effect.children[1];
      w.is_true_const = rhs.is_const(Expr::ConstKind::True);
      w.is_false_const = rhs.is_const(Expr::ConstKind::False);
      w.value = ev.eval_scalar(rhs, binding);
      out.push_back(std::move(w));
      return;
    }
    default:
      throw EvalError("invalid effect expression");
  }
}

}  // namespace detail

// Applies a grounded action: right-hand sides evaluate against the pre-state;
// a conditional write with score c blends c*new + (1-c)*old elementwise, and
// constant Boolean effects soften to max(old, c) / min(old, 1-c). Entries not
// written share their table with the pre-state (frame assumption).
inline FactoredState apply_action(Evaluator& ev, const ActionSchema& schema,
                                  const std::vector<int>& args) {
  Tape& tape = ev.tape();
  Binding binding;
  for (size_t i = 0; i < schema.param_names.size(); ++i)
    binding.push(schema.param_names[i], args[i]);

  std::vector<detail::PendingWrite> writes;
  detail::collect_writes(ev, schema.effect, binding, -1, writes);

  std::map<std::pair<int, std::vector<int>>, bool> seen;
  for (const auto& w : writes) {
    auto key = std::make_pair(w.pred_id, w.args);
    if (seen.count(key))
      throw EvalError("two effects of action '" + schema.name +
                      "' write the same entry of '" + ev.domain().pred(w.pred_id).name + "'");
    seen[key] = true;
  }

  const FactoredState& pre = ev.state();
  FactoredState post;
  post.universe = pre.universe;
  post.tables = pre.tables;

  std::map<int, std::shared_ptr<StateTable>> touched;
  for (const auto& w : writes) {
    auto it = touched.find(w.pred_id);
    if (it == touched.end()) {
      auto copy = std::make_shared<StateTable>(*pre.tables[size_t(w.pred_id)]);
      it = touched.emplace(w.pred_id, copy).first;
      post.tables[size_t(w.pred_id)] = copy;
    }
    auto eit = it->second->find(w.args);
    if (eit == it->second->end())
      throw EvalError("state table for '" + ev.domain().pred(w.pred_id).name +
                      "' is missing the written entry");
    // read the old value through the pre-state entry: its address is stable,
    // so the evaluator's attachment cache stays valid
    NodeId old_node = ev.entry_node(pre.entry(w.pred_id, w.args));

    NodeId next;
    if (w.cond < 0) {
      next = w.value;
    } else if (w.is_true_const) {
      next = tape.maximum(old_node, w.cond);
    } else if (w.is_false_const) {
      next = tape.minimum(old_node, tape.one_minus_scalar(w.cond));
    } else {
      next = tape.blend(w.cond, w.value, old_node);
    }

    StateEntry ne;
    ne.attach(tape, next);
    const auto& v = tape.value(next);
    ne.value.assign(v.begin(), v.end());
    eit->second = std::move(ne);
  }
  return post;
}

inline FactoredState apply_action(Tape& tape, const Runtime& rt, const FactoredState& state,
                                  const GroundedAction& action) {
  Evaluator ev(tape, rt, state);
  const ActionSchema& schema = rt.domain().actions[size_t(action.schema_index)];
  return apply_action(ev, schema, action.args);
}

}  // namespace pds
