#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdsketch/compile.hpp"
#include "pdsketch/evaluator.hpp"
#include "pdsketch/quantize.hpp"

namespace pds {

constexpr int kHffInfinity = 1000000000;

// Relaxed operator: positive preconditions, negative literals (checked once
// against the layer-0 closure), add effects. Axioms realize derived-predicate
// rules and are never counted by the heuristic.
struct GroundOp {
  std::string name;
  bool axiom = false;
  std::vector<int> pre;
  std::vector<int> neg_pre;
  std::vector<int> add;
};

struct GoalDisjunct {
  std::vector<int> pos;
  std::vector<int> neg;
};

// Grounded delete-free task. Operators only add propositions; reachability
// accumulates supersets of values.
class RelaxedTask {
 public:
  int prop(const std::string& name) {
    auto it = prop_ids_.find(name);
    if (it != prop_ids_.end()) return it->second;
    int id = int(prop_names_.size());
    prop_ids_[name] = id;
    prop_names_.push_back(name);
    return id;
  }
  int find_prop(const std::string& name) const {
    auto it = prop_ids_.find(name);
    return it == prop_ids_.end() ? -1 : it->second;
  }
  const std::string& prop_name(int id) const { return prop_names_[size_t(id)]; }
  int num_props() const { return int(prop_names_.size()); }

  void add_op(GroundOp op) { ops_.push_back(std::move(op)); }
  const std::vector<GroundOp>& ops() const { return ops_; }

  std::vector<GoalDisjunct> goal;

  struct Result {
    int value = kHffInfinity;
    bool reachable = false;
    std::vector<std::string> marked_ops;  // non-axiom, deterministic order
  };

  // Layered forward chaining to a fixpoint, then backtrace marking one best
  // supporter per proposition. The heuristic value is the number of distinct
  // marked non-axiom operators. Negative literals are evaluated once against
  // the layer-0 closure and stay fixed, which keeps reachability monotone.
  Result hff(const std::vector<int>& init_props) const {
    const int np = num_props();
    std::vector<int> layer(size_t(np), -1);
    std::vector<int> supporter(size_t(np), -1);

    // consumer index built lazily once
    build_index();

    // layer-0 closure: axioms over the initial propositions; axiom negative
    // literals are checked against the plain initial set
    std::vector<char> in_init(size_t(np), 0);
    for (int p : init_props)
      if (p >= 0 && p < np) in_init[size_t(p)] = 1;

    std::vector<int> frontier;
    for (int p = 0; p < np; ++p)
      if (in_init[size_t(p)]) {
        layer[size_t(p)] = 0;
        frontier.push_back(p);
      }

    std::vector<int> counter(ops_.size());
    std::vector<char> fired(ops_.size(), 0);
    for (size_t o = 0; o < ops_.size(); ++o) counter[o] = int(ops_[o].pre.size());

    // axiom closure at layer 0
    {
      std::vector<int> queue = frontier;
      std::vector<int> ax_counter(ops_.size());
      for (size_t o = 0; o < ops_.size(); ++o) ax_counter[o] = int(ops_[o].pre.size());
      std::vector<char> ax_fired(ops_.size(), 0);
      size_t qi = 0;
      auto neg_ok_init = [&](const GroundOp& op) {
        for (int p : op.neg_pre)
          if (in_init[size_t(p)]) return false;
        return true;
      };
      // zero-precondition axioms
      for (size_t o = 0; o < ops_.size(); ++o) {
        if (!ops_[o].axiom || ax_counter[o] != 0) continue;
        if (!neg_ok_init(ops_[o])) continue;
        ax_fired[o] = 1;
        for (int p : ops_[o].add)
          if (layer[size_t(p)] < 0) {
            layer[size_t(p)] = 0;
            supporter[size_t(p)] = int(o);
            queue.push_back(p);
          }
      }
      while (qi < queue.size()) {
        int p = queue[qi++];
        for (int o : consumers_[size_t(p)]) {
          if (!ops_[size_t(o)].axiom || ax_fired[size_t(o)]) continue;
          if (--ax_counter[size_t(o)] != 0) continue;
          if (!neg_ok_init(ops_[size_t(o)])) continue;
          ax_fired[size_t(o)] = 1;
          for (int q : ops_[size_t(o)].add)
            if (layer[size_t(q)] < 0) {
              layer[size_t(q)] = 0;
              supporter[size_t(q)] = o;
              queue.push_back(q);
            }
        }
      }
    }

    std::vector<char> closure0(size_t(np), 0);
    std::vector<int> achieved;
    for (int p = 0; p < np; ++p)
      if (layer[size_t(p)] == 0) {
        closure0[size_t(p)] = 1;
        achieved.push_back(p);
      }

    auto enabled = [&](const GroundOp& op) {
      for (int p : op.neg_pre)
        if (closure0[size_t(p)]) return false;
      return true;
    };

    // static supporter preference: fewer preconditions outside the closure,
    // then lexicographic by name
    auto difficulty = [&](int o) {
      int d = 0;
      for (int p : ops_[size_t(o)].pre)
        if (!closure0[size_t(p)]) ++d;
      return d;
    };

    auto goal_layer = [&]() -> int {
      for (size_t d = 0; d < goal.size(); ++d) {
        bool ok = true;
        for (int p : goal[d].pos) ok = ok && layer[size_t(p)] >= 0;
        for (int p : goal[d].neg) ok = ok && !closure0[size_t(p)];
        if (ok) return int(d);
      }
      return -1;
    };

    // initialize counters from the closure
    std::vector<int> pending;
    for (size_t o = 0; o < ops_.size(); ++o) {
      for (int p : ops_[o].pre)
        if (closure0[size_t(p)]) --counter[o];
      if (counter[o] == 0 && enabled(ops_[o])) pending.push_back(int(o));
    }

    int satisfied = goal_layer();
    int current_layer = 0;
    while (satisfied < 0 && !pending.empty()) {
      ++current_layer;
      std::vector<int> fires;
      fires.swap(pending);
      std::sort(fires.begin(), fires.end());
      std::vector<int> new_props;
      for (int o : fires) {
        if (fired[size_t(o)]) continue;
        fired[size_t(o)] = 1;
        for (int p : ops_[size_t(o)].add) {
          if (layer[size_t(p)] < 0) {
            layer[size_t(p)] = current_layer;
            supporter[size_t(p)] = o;
            new_props.push_back(p);
          } else if (layer[size_t(p)] == current_layer) {
            // first achiever tie at this layer: fewest unachieved
            // preconditions wins, then name order
            int cur = supporter[size_t(p)];
            int dn = difficulty(o), dc = difficulty(cur);
            if (dn < dc || (dn == dc && ops_[size_t(o)].name < ops_[size_t(cur)].name))
              supporter[size_t(p)] = o;
          }
        }
      }
      for (int p : new_props) {
        for (int o : consumers_[size_t(p)]) {
          if (fired[size_t(o)]) continue;
          if (--counter[size_t(o)] == 0 && enabled(ops_[size_t(o)])) pending.push_back(o);
        }
      }
      satisfied = goal_layer();
    }

    Result result;
    if (satisfied < 0) return result;  // unreachable: infinity
    result.reachable = true;

    std::vector<char> prop_marked(size_t(np), 0);
    std::vector<char> op_marked(ops_.size(), 0);
    std::vector<int> stack;
    for (int p : goal[size_t(satisfied)].pos) stack.push_back(p);
    while (!stack.empty()) {
      int p = stack.back();
      stack.pop_back();
      if (prop_marked[size_t(p)]) continue;
      prop_marked[size_t(p)] = 1;
      int o = supporter[size_t(p)];
      if (o < 0) continue;  // initial proposition
      if (op_marked[size_t(o)]) continue;
      op_marked[size_t(o)] = 1;
      for (int q : ops_[size_t(o)].pre) stack.push_back(q);
    }

    int count = 0;
    for (size_t o = 0; o < ops_.size(); ++o)
      if (op_marked[o] && !ops_[o].axiom) {
        ++count;
        result.marked_ops.push_back(ops_[o].name);
      }
    result.value = count;
    return result;
  }

  // Reachable proposition set under the delete relaxation (sorted ids).
  std::vector<int> reachable(const std::vector<int>& init_props) const {
    build_index();
    const int np = num_props();
    std::vector<char> in(size_t(np), 0);
    std::vector<int> queue;
    for (int p : init_props)
      if (p >= 0 && p < np && !in[size_t(p)]) {
        in[size_t(p)] = 1;
        queue.push_back(p);
      }
    std::vector<char> in_init = in;
    std::vector<int> counter(ops_.size());
    std::vector<char> fired(ops_.size(), 0);
    for (size_t o = 0; o < ops_.size(); ++o) counter[o] = int(ops_[o].pre.size());
    auto neg_ok = [&](const GroundOp& op) {
      for (int p : op.neg_pre)
        if (in_init[size_t(p)]) return false;
      return true;
    };
    auto try_fire = [&](size_t o) {
      if (fired[o] || counter[o] != 0 || !neg_ok(ops_[o])) return;
      fired[o] = 1;
      for (int p : ops_[o].add)
        if (!in[size_t(p)]) {
          in[size_t(p)] = 1;
          queue.push_back(p);
        }
    };
    for (size_t o = 0; o < ops_.size(); ++o)
      if (ops_[o].pre.empty()) try_fire(o);
    size_t qi = 0;
    while (qi < queue.size()) {
      int p = queue[qi++];
      if (counter.empty()) break;
      for (int o : consumers_[size_t(p)]) {
        if (fired[size_t(o)]) continue;
        if (--counter[size_t(o)] == 0) try_fire(size_t(o));
      }
    }
    std::vector<int> out;
    for (int p = 0; p < np; ++p)
      if (in[size_t(p)]) out.push_back(p);
    return out;
  }

 private:
  void build_index() const {
    if (consumers_.size() == prop_names_.size() && index_ops_ == ops_.size()) return;
    consumers_.assign(prop_names_.size(), {});
    for (size_t o = 0; o < ops_.size(); ++o)
      for (int p : ops_[o].pre) consumers_[size_t(p)].push_back(int(o));
    index_ops_ = ops_.size();
  }

  std::map<std::string, int> prop_ids_;
  std::vector<std::string> prop_names_;
  std::vector<GroundOp> ops_;
  mutable std::vector<std::vector<int>> consumers_;
  mutable size_t index_ops_ = 0;
};

// --- grounding ---------------------------------------------------------------

namespace detail {

inline std::string inst_name(const Domain& dom, const Universe& u, int pred,
                             const std::vector<int>& args, int code) {
  std::string s = dom.pred(pred).name;
  if (code >= 0) s += "@" + std::to_string(code);
  s += "(";
  for (size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + u.name_of(args[i]);
  return s + ")";
}

// Negation-normal-form DNF expansion of a Boolean formula over predicate
// atoms. `prop_of` interns the proposition for an atom instance.
struct DnfBuilder {
  const Domain& dom;
  const Universe& universe;
  std::function<int(int, const std::vector<int>&)> prop_of;
  size_t cap = 20000;

  std::vector<GoalDisjunct> run(const Expr& e, Binding& binding, bool positive) {
    switch (e.kind) {
      case ExprKind::Not:
        return run(e.children[0], binding, !positive);
      case ExprKind::And:
      case ExprKind::Or: {
        bool conj = (e.kind == ExprKind::And) == positive;
        std::vector<std::vector<GoalDisjunct>> parts;
        for (const auto& c : e.children) parts.push_back(run(c, binding, positive));
        return conj ? combine(parts) : concat(parts);
      }
      case ExprKind::Implies: {
        // implies(p, q) == or(not p, q)
        std::vector<std::vector<GoalDisjunct>> parts;
        parts.push_back(run(e.children[0], binding, !positive));
        parts.push_back(run(e.children[1], binding, positive));
        return positive ? concat(parts) : combine(parts);
      }
      case ExprKind::Forall:
      case ExprKind::Exists: {
        bool conj = (e.kind == ExprKind::Forall) == positive;
        auto tid = dom.object_type_ids.find(e.bound.type);
        if (tid == dom.object_type_ids.end()) throw EvalError("unknown type " + e.bound.type);
        std::vector<std::vector<GoalDisjunct>> parts;
        for (int obj : universe.of_type(dom, tid->second)) {
          binding.push(e.bound.name, obj);
          parts.push_back(run(e.children[0], binding, positive));
          binding.pop();
        }
        if (parts.empty()) {
          // empty domain: forall -> true, exists -> false (flip when negated)
          bool truth = (e.kind == ExprKind::Forall) == positive;
          return truth ? std::vector<GoalDisjunct>{GoalDisjunct{}}
                       : std::vector<GoalDisjunct>{};
        }
        return conj ? combine(parts) : concat(parts);
      }
      case ExprKind::PredicateCall: {
        int pid = dom.pred_id(e.name);
        std::vector<int> args;
        for (const auto& a : e.children) {
          if (a.kind == ExprKind::VariableRef) {
            int obj = binding.lookup(a.name);
            if (obj < 0) throw EvalError("unbound variable " + a.name);
            args.push_back(obj);
          } else if (a.kind == ExprKind::Constant &&
                     a.const_kind == Expr::ConstKind::Object) {
            int obj = universe.find(a.name);
            if (obj < 0) throw UnknownObjectConstant(a.name);
            args.push_back(obj);
          } else {
            throw EvalError("atom arguments must be variables or object constants");
          }
        }
        GoalDisjunct d;
        int prop = prop_of(pid, args);
        (positive ? d.pos : d.neg).push_back(prop);
        return {d};
      }
      case ExprKind::Constant:
        if (e.is_const(Expr::ConstKind::True))
          return positive ? std::vector<GoalDisjunct>{GoalDisjunct{}}
                          : std::vector<GoalDisjunct>{};
        if (e.is_const(Expr::ConstKind::False))
          return positive ? std::vector<GoalDisjunct>{}
                          : std::vector<GoalDisjunct>{GoalDisjunct{}};
        throw EvalError("cannot compile constant in goal formula");
      default:
        throw EvalError("cannot compile this expression into a relaxed goal");
    }
  }

  std::vector<GoalDisjunct> concat(const std::vector<std::vector<GoalDisjunct>>& parts) {
    std::vector<GoalDisjunct> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    if (out.size() > cap) throw EvalError("DNF expansion too large");
    return out;
  }

  std::vector<GoalDisjunct> combine(const std::vector<std::vector<GoalDisjunct>>& parts) {
    std::vector<GoalDisjunct> acc = {GoalDisjunct{}};
    for (const auto& p : parts) {
      std::vector<GoalDisjunct> next;
      for (const auto& a : acc) {
        for (const auto& b : p) {
          GoalDisjunct d = a;
          d.pos.insert(d.pos.end(), b.pos.begin(), b.pos.end());
          d.neg.insert(d.neg.end(), b.neg.begin(), b.neg.end());
          next.push_back(std::move(d));
          if (next.size() > cap) throw EvalError("DNF expansion too large");
        }
      }
      acc = std::move(next);
    }
    return acc;
  }
};

// Collects the input-predicate instances a Boolean expression reads,
// expanding derived bodies and quantifiers over the universe.
struct ReadCollector {
  const Domain& dom;
  const Universe& universe;
  std::set<std::pair<int, std::vector<int>>> reads;
  std::set<std::pair<int, std::vector<int>>> visiting;

  void walk(const Expr& e, Binding& binding) {
    switch (e.kind) {
      case ExprKind::PredicateCall: {
        int pid = dom.pred_id(e.name);
        std::vector<int> args;
        for (const auto& a : e.children) {
          if (a.kind == ExprKind::VariableRef) {
            args.push_back(binding.lookup(a.name));
          } else if (a.kind == ExprKind::Constant &&
                     a.const_kind == Expr::ConstKind::Object) {
            args.push_back(universe.find(a.name));
          }
        }
        const Predicate& p = dom.pred(pid);
        if (p.is_input) {
          reads.insert({pid, args});
          return;
        }
        auto key = std::make_pair(pid, args);
        if (visiting.count(key)) return;
        visiting.insert(key);
        Binding inner;
        for (size_t i = 0; i < p.param_names.size(); ++i)
          inner.push(p.param_names[i], args[i]);
        walk(dom.derived[size_t(p.derived_index)].body, inner);
        return;
      }
      case ExprKind::Forall:
      case ExprKind::Exists:
      case ExprKind::Foreach: {
        auto tid = dom.object_type_ids.find(e.bound.type);
        for (int obj : universe.of_type(dom, tid->second)) {
          binding.push(e.bound.name, obj);
          walk(e.children[0], binding);
          binding.pop();
        }
        return;
      }
      default:
        for (const auto& c : e.children) walk(c, binding);
        return;
    }
  }
};

}  // namespace detail

// A compiled domain grounded against one universe and one goal; per-state
// initial propositions are rebuilt on every heuristic call.
class GroundedHeuristic {
 public:
  GroundedHeuristic(const Runtime& rt, const CompiledDomain& cd, const Universe& universe,
                    const Expr& goal)
      : rt_(&rt), cd_(&cd), universe_(&universe) {
    if (cd.mode == CompiledDomain::Mode::Ao)
      ground_ao(goal);
    else
      ground_opt(goal);
  }

  const RelaxedTask& task() const { return task_; }

  // hFF value for a latent state (quantize, then chain).
  int operator()(const FactoredState& state) const {
    std::vector<int> init = cd_->mode == CompiledDomain::Mode::Ao
                                ? init_props_ao(state)
                                : init_props_opt(state);
    return task_.hff(init).value;
  }

  // hFF from an explicit discrete snapshot (AO tasks).
  int hff_discrete(const DiscreteState& ds) const {
    std::vector<int> init;
    for (const auto& [inst, code] : ds.codes) {
      auto it = code_props_.find({inst.first, inst.second, code});
      if (it != code_props_.end()) init.push_back(it->second);
    }
    for (const auto& inst : ds.bools) {
      auto it = bool_props_.find(inst);
      if (it != bool_props_.end()) init.push_back(it->second);
    }
    return task_.hff(init).value;
  }

 private:
  const Runtime* rt_;
  const CompiledDomain* cd_;
  const Universe* universe_;
  RelaxedTask task_;

  // AO: instance/code -> proposition
  std::map<std::tuple<int, std::vector<int>, int>, int> code_props_;
  std::map<std::pair<int, std::vector<int>>, int> bool_props_;

  // OPT: dynamic propositions evaluated per state through the soft semantics
  struct DynamicProp {
    int prop;
    Expr expr;  // closed expression (object constants inline)
  };
  std::vector<DynamicProp> dynamic_;
  std::vector<std::pair<std::pair<int, std::vector<int>>, int>> opt_bool_inputs_;
  std::map<std::pair<int, std::vector<int>>, int> opt_props_;  // non-bool instance -> p-opt

  const Domain& dom() const { return rt_->domain(); }

  int intern_code_prop(int pid, const std::vector<int>& args, int code) {
    auto key = std::make_tuple(pid, args, code);
    auto it = code_props_.find(key);
    if (it != code_props_.end()) return it->second;
    int p = task_.prop(detail::inst_name(dom(), *universe_, pid, args, code));
    code_props_[key] = p;
    return p;
  }
  int intern_bool_prop(int pid, const std::vector<int>& args) {
    auto key = std::make_pair(pid, args);
    auto it = bool_props_.find(key);
    if (it != bool_props_.end()) return it->second;
    int p = task_.prop(detail::inst_name(dom(), *universe_, pid, args, -1));
    bool_props_[key] = p;
    return p;
  }

  // --- AO -----------------------------------------------------------------

  // Grounds one rule literal; exists-literals synthesize an auxiliary
  // proposition achieved by one axiom per candidate object.
  void ground_literal(const RuleLiteral& lit, const std::vector<int>& head,
                      std::vector<int>& pre, std::vector<int>& neg) {
    if (!lit.exists) {
      const Atom& a = lit.atoms[0];
      std::vector<int> args;
      for (int v : a.args) args.push_back(head[size_t(v)]);
      int p = a.code < 0 ? intern_bool_prop(a.pred, args)
                         : intern_code_prop(a.pred, args, a.code);
      (lit.positive ? pre : neg).push_back(p);
      return;
    }
    // auxiliary proposition named by the grounded literal content
    std::string name = "ex[";
    for (const auto& a : lit.atoms) {
      name += dom().pred(a.pred).name;
      if (a.code >= 0) name += "@" + std::to_string(a.code);
      name += "(";
      for (int v : a.args)
        name += v == kFreshVar ? std::string("_") : universe_->name_of(head[size_t(v)]);
      name += ")";
    }
    name += "]";
    int aux = task_.find_prop(name);
    if (aux < 0) {
      aux = task_.prop(name);
      for (int obj : universe_->of_type(dom(), lit.exists_type)) {
        GroundOp ax;
        ax.axiom = true;
        ax.name = name + "/" + universe_->name_of(obj);
        for (const auto& a : lit.atoms) {
          std::vector<int> args;
          for (int v : a.args)
            args.push_back(v == kFreshVar ? obj : head[size_t(v)]);
          ax.pre.push_back(a.code < 0 ? intern_bool_prop(a.pred, args)
                                      : intern_code_prop(a.pred, args, a.code));
        }
        ax.add.push_back(aux);
        task_.add_op(std::move(ax));
      }
    }
    (lit.positive ? pre : neg).push_back(aux);
  }

  std::vector<std::vector<int>> head_assignments(const std::vector<int>& head_types) {
    std::vector<std::vector<int>> out;
    std::vector<std::vector<int>> cand;
    for (int t : head_types) {
      cand.push_back(universe_->of_type(dom(), t));
      if (cand.back().empty()) return out;
    }
    std::vector<size_t> idx(cand.size(), 0);
    while (true) {
      std::vector<int> h;
      for (size_t k = 0; k < idx.size(); ++k) h.push_back(cand[k][idx[k]]);
      out.push_back(std::move(h));
      size_t k = cand.size();
      bool done = cand.empty();
      while (k > 0) {
        --k;
        if (++idx[k] < cand[k].size()) break;
        idx[k] = 0;
        if (k == 0) done = true;
      }
      if (done) break;
    }
    return out;
  }

  std::vector<GoalDisjunct> formula_dnf(const Expr& e) {
    detail::DnfBuilder b{dom(), *universe_,
                         [&](int pid, const std::vector<int>& args) {
                           return intern_bool_prop(pid, args);
                         }};
    Binding binding;
    return b.run(e, binding, true);
  }

  std::vector<GoalDisjunct> formula_dnf_bound(const Expr& e, Binding& binding) {
    detail::DnfBuilder b{dom(), *universe_,
                         [&](int pid, const std::vector<int>& args) {
                           return intern_bool_prop(pid, args);
                         }};
    return b.run(e, binding, true);
  }

  void ground_ao(const Expr& goal) {
    // derived rules become axioms
    for (const auto& d : cd_->derived) {
      const Predicate& p = dom().pred(d.pred_id);
      if (d.exact) {
        const Expr& body = dom().derived[size_t(p.derived_index)].body;
        for (const auto& head : head_assignments(p.param_types)) {
          Binding binding;
          for (size_t i = 0; i < p.param_names.size(); ++i)
            binding.push(p.param_names[i], head[i]);
          int target = intern_bool_prop(d.pred_id, head);
          auto dnf = formula_dnf_bound(body, binding);
          int k = 0;
          for (const auto& disjunct : dnf) {
            GroundOp ax;
            ax.axiom = true;
            ax.name = "axiom:" + detail::inst_name(dom(), *universe_, d.pred_id, head, -1) +
                      "#" + std::to_string(k++);
            ax.pre = disjunct.pos;
            ax.neg_pre = disjunct.neg;
            ax.add.push_back(target);
            task_.add_op(std::move(ax));
          }
        }
        continue;
      }
      for (const auto& rule : d.rules) {
        for (const auto& head : head_assignments(rule.head_types)) {
          int target = rule.target_code < 0
                           ? intern_bool_prop(d.pred_id, head)
                           : intern_code_prop(d.pred_id, head, rule.target_code);
          for (size_t ci = 0; ci < rule.clauses.size(); ++ci) {
            GroundOp ax;
            ax.axiom = true;
            ax.name = "axiom:" +
                      detail::inst_name(dom(), *universe_, d.pred_id, head, rule.target_code) +
                      "#" + std::to_string(ci);
            for (const auto& lit : rule.clauses[ci].lits)
              ground_literal(lit, head, ax.pre, ax.neg_pre);
            ax.add.push_back(target);
            task_.add_op(std::move(ax));
          }
        }
      }
    }

    // action rules become operators; the schema precondition multiplies in
    for (const auto& ca : cd_->actions) {
      const ActionSchema& schema = dom().actions[size_t(ca.action_index)];
      std::vector<EffectTarget> targets = effect_targets(dom(), schema);
      const EffectTarget& tgt = targets[size_t(ca.target_index)];

      if (ca.exact) {
        if (!tgt.value_is_true()) continue;  // set-false adds nothing when relaxed
        for (const auto& head : head_assignments(tgt.head_types)) {
          Binding binding;
          for (size_t i = 0; i < tgt.head_names.size(); ++i)
            binding.push(tgt.head_names[i], head[i]);
          // conditions and precondition, all slot-free here
          Expr all = Expr::make(ExprKind::And);
          all.children.push_back(schema.precondition);
          for (const Expr* c : tgt.conditions) all.children.push_back(*c);
          auto dnf = formula_dnf_bound(all, binding);
          std::vector<int> inst;
          for (int hidx : tgt.target_args) inst.push_back(head[size_t(hidx)]);
          int target = intern_bool_prop(tgt.target_pred, inst);
          int k = 0;
          for (const auto& disjunct : dnf) {
            GroundOp op;
            op.name = action_display(*universe_, schema.name,
                                     std::vector<int>(head.begin(),
                                                      head.begin() + tgt.n_params)) +
                      "#" + dom().pred(tgt.target_pred).name + "#" + std::to_string(k++);
            op.pre = disjunct.pos;
            op.neg_pre = disjunct.neg;
            op.add.push_back(target);
            task_.add_op(std::move(op));
          }
        }
        continue;
      }

      for (const auto& rule : ca.rules) {
        for (const auto& head : head_assignments(rule.head_types)) {
          std::vector<int> inst;
          for (int hidx : tgt.target_args) inst.push_back(head[size_t(hidx)]);
          int target = rule.target_code < 0
                           ? intern_bool_prop(tgt.target_pred, inst)
                           : intern_code_prop(tgt.target_pred, inst, rule.target_code);
          for (size_t ci = 0; ci < rule.clauses.size(); ++ci) {
            GroundOp op;
            op.name = action_display(*universe_, schema.name,
                                     std::vector<int>(head.begin(),
                                                      head.begin() + tgt.n_params)) +
                      "#" + dom().pred(tgt.target_pred).name + "@" +
                      std::to_string(rule.target_code) + "#" + std::to_string(ci);
            for (const auto& lit : rule.clauses[ci].lits)
              ground_literal(lit, head, op.pre, op.neg_pre);
            op.add.push_back(target);
            task_.add_op(std::move(op));
          }
        }
      }
    }

    task_.goal = formula_dnf(goal);
  }

  std::vector<int> init_props_ao(const FactoredState& state) const {
    DiscreteState ds = quantize_inputs(dom(), state, cd_->codebooks);
    std::vector<int> init;
    for (const auto& [inst, code] : ds.codes) {
      auto it = code_props_.find({inst.first, inst.second, code});
      if (it != code_props_.end()) init.push_back(it->second);
    }
    for (const auto& inst : ds.bools) {
      auto it = bool_props_.find(inst);
      if (it != bool_props_.end()) init.push_back(it->second);
    }
    return init;
  }

  // --- OPT -----------------------------------------------------------------

  int opt_prop(int pid, const std::vector<int>& args) {
    auto key = std::make_pair(pid, args);
    auto it = opt_props_.find(key);
    if (it != opt_props_.end()) return it->second;
    std::string name = dom().pred(pid).name + "-opt(";
    for (size_t i = 0; i < args.size(); ++i)
      name += (i ? "," : "") + universe_->name_of(args[i]);
    name += ")";
    int p = task_.prop(name);
    opt_props_[key] = p;
    return p;
  }

  // Proposition for a Boolean test: true at layer 0 when the soft evaluation
  // of the instance exceeds 0.5, and achievable whenever any input instance
  // it reads becomes optimistic.
  int dynamic_bool_prop(const Expr& closed, const std::string& name) {
    int existing = task_.find_prop(name);
    if (existing >= 0) return existing;
    int p = task_.prop(name);
    dynamic_.push_back({p, closed});

    detail::ReadCollector rc{dom(), *universe_};
    Binding binding;
    rc.walk(closed, binding);
    int k = 0;
    for (const auto& [pid, args] : rc.reads) {
      if (dom().pred(pid).ret.is_bool()) continue;  // Booleans pass through
      GroundOp ax;
      ax.axiom = true;
      ax.name = "axiom:" + name + "#" + std::to_string(k++);
      ax.pre.push_back(opt_prop(pid, args));
      ax.add.push_back(p);
      task_.add_op(std::move(ax));
    }
    return p;
  }

  Expr close_atom(int pid, const std::vector<int>& args) const {
    Expr call = Expr::make(ExprKind::PredicateCall);
    call.name = dom().pred(pid).name;
    for (int a : args) call.children.push_back(Expr::object_const(universe_->name_of(a)));
    return call;
  }

  Expr close_expr(const Expr& e, const std::vector<std::string>& params,
                  const std::vector<int>& objects) const {
    Expr out = e;
    if (out.kind == ExprKind::VariableRef) {
      for (size_t i = 0; i < params.size(); ++i)
        if (params[i] == out.name)
          return Expr::object_const(universe_->name_of(objects[i]));
      return out;
    }
    for (auto& c : out.children) c = close_expr(c, params, objects);
    return out;
  }

  void ground_opt(const Expr& goal) {
    // operators: one per grounded action target instance; the gating
    // conditions (and the schema precondition) each become one dynamic prop
    for (size_t ai = 0; ai < dom().actions.size(); ++ai) {
      const ActionSchema& schema = dom().actions[size_t(ai)];
      std::vector<EffectTarget> targets = effect_targets(dom(), schema);
      for (size_t ti = 0; ti < targets.size(); ++ti) {
        const EffectTarget& tgt = targets[ti];
        for (const auto& head : head_assignments(tgt.head_types)) {
          GroundOp op;
          op.name = action_display(*universe_, schema.name,
                                   std::vector<int>(head.begin(),
                                                    head.begin() + tgt.n_params)) +
                    "#" + dom().pred(tgt.target_pred).name + "#" + std::to_string(ti);
          for (size_t i = size_t(tgt.n_params); i < head.size(); ++i)
            op.name += "/" + universe_->name_of(head[i]);
          std::vector<int> inst;
          for (int hidx : tgt.target_args) inst.push_back(head[size_t(hidx)]);

          // gating conditions + precondition
          std::vector<const Expr*> gates = tgt.conditions;
          if (!(schema.precondition.kind == ExprKind::And &&
                schema.precondition.children.empty()))
            gates.push_back(&schema.precondition);
          for (size_t gi = 0; gi < gates.size(); ++gi) {
            Expr closed = close_expr(*gates[gi], tgt.head_names, head);
            std::string name = "cond:" + op.name + "#" + std::to_string(gi);
            op.pre.push_back(dynamic_bool_prop(closed, name));
          }

          const Predicate& p = dom().pred(tgt.target_pred);
          if (p.ret.is_bool()) {
            if (tgt.value_is_false()) continue;  // relaxed: set-false adds nothing
            op.add.push_back(intern_bool_prop(tgt.target_pred, inst));
          } else {
            op.add.push_back(opt_prop(tgt.target_pred, inst));
          }
          task_.add_op(std::move(op));
        }
      }
    }

    // goal atoms become dynamic props (derived) or threshold props (inputs)
    detail::DnfBuilder b{dom(), *universe_,
                         [&](int pid, const std::vector<int>& args) {
                           const Predicate& p = dom().pred(pid);
                           if (p.is_input && p.ret.is_bool())
                             return intern_bool_prop(pid, args);
                           std::string name =
                               detail::inst_name(dom(), *universe_, pid, args, -1);
                           return dynamic_bool_prop(close_atom(pid, args), name);
                         }};
    Binding binding;
    task_.goal = b.run(goal, binding, true);
  }

  std::vector<int> init_props_opt(const FactoredState& state) const {
    std::vector<int> init;
    Tape tape;
    Evaluator ev(tape, *rt_, state);
    for (const auto& d : dynamic_) {
      Binding binding;
      EvalResult r = ev.eval(d.expr, binding);
      if (tape.scalar_value(r.value) > 0.5) init.push_back(d.prop);
    }
    // Boolean input propositions read their thresholded table entries
    for (const auto& [inst, prop] : bool_props_) {
      if (!dom().pred(inst.first).is_input) continue;
      const StateTable* t = state.table(inst.first);
      if (!t) continue;
      auto it = t->find(inst.second);
      if (it != t->end() && it->second.value[0] > 0.5f) init.push_back(prop);
    }
    return init;
  }
};

}  // namespace pds
