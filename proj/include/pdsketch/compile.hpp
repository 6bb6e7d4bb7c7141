#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdsketch/dataset.hpp"
#include "pdsketch/evaluator.hpp"
#include "pdsketch/foil.hpp"
#include "pdsketch/quantize.hpp"
#include "pdsketch/trainer.hpp"

namespace pds {

class MissingRule : public Error {
 public:
  explicit MissingRule(const std::string& what) : Error("missing rule for " + what) {}
};

// One assignable target of an action effect: the written predicate, how its
// arguments map onto the head variables (action parameters followed by the
// enclosing foreach variables), and the soft conditions guarding the write.
struct EffectTarget {
  int target_pred = -1;
  std::vector<int> target_args;         // indices into head variables
  std::vector<int> head_types;          // action params, then foreach vars
  std::vector<std::string> head_names;  // variable names aligned with head_types
  int n_params = 0;
  std::vector<const Expr*> conditions;  // `when` conditions on the path
  const Expr* value = nullptr;

  bool value_is_true() const { return value && value->is_const(Expr::ConstKind::True); }
  bool value_is_false() const { return value && value->is_const(Expr::ConstKind::False); }
};

namespace detail {

inline bool expr_has_slot(const Expr& e) {
  if (e.kind == ExprKind::SlotCall) return true;
  for (const auto& c : e.children)
    if (expr_has_slot(c)) return true;
  return false;
}

inline void collect_targets(const Domain& dom, const ActionSchema& schema, const Expr& e,
                            std::vector<std::string>& foreach_vars,
                            std::vector<int>& foreach_types,
                            std::vector<const Expr*>& conditions,
                            std::vector<EffectTarget>& out) {
  switch (e.kind) {
    case ExprKind::And:
      for (const auto& c : e.children)
        collect_targets(dom, schema, c, foreach_vars, foreach_types, conditions, out);
      return;
    case ExprKind::Foreach: {
      foreach_vars.push_back(e.bound.name);
      foreach_types.push_back(dom.object_type_ids.at(e.bound.type));
      collect_targets(dom, schema, e.children[0], foreach_vars, foreach_types, conditions, out);
      foreach_vars.pop_back();
      foreach_types.pop_back();
      return;
    }
    case ExprKind::When: {
      conditions.push_back(&e.children[0]);
      collect_targets(dom, schema, e.children[1], foreach_vars, foreach_types, conditions, out);
      conditions.pop_back();
      return;
    }
    case ExprKind::Assign: {
      EffectTarget t;
      t.target_pred = dom.pred_id(e.children[0].name);
      t.n_params = int(schema.param_names.size());
      t.head_types = schema.param_types;
      t.head_types.insert(t.head_types.end(), foreach_types.begin(), foreach_types.end());
      t.head_names = schema.param_names;
      t.head_names.insert(t.head_names.end(), foreach_vars.begin(), foreach_vars.end());
      for (const auto& arg : e.children[0].children) {
        int idx = -1;
        for (size_t i = 0; i < schema.param_names.size(); ++i)
          if (arg.kind == ExprKind::VariableRef && arg.name == schema.param_names[i])
            idx = int(i);
        for (size_t i = 0; i < foreach_vars.size(); ++i)
          if (arg.kind == ExprKind::VariableRef && arg.name == foreach_vars[i])
            idx = int(schema.param_names.size() + i);
        if (idx < 0) throw EvalError("assign target argument is not a variable in scope");
        t.target_args.push_back(idx);
      }
      t.conditions = conditions;
      t.value = &e.children[1];
      out.push_back(std::move(t));
      return;
    }
    default:
      throw EvalError("invalid effect expression during compilation");
  }
}

}  // namespace detail

inline std::vector<EffectTarget> effect_targets(const Domain& dom, const ActionSchema& schema) {
  std::vector<EffectTarget> out;
  std::vector<std::string> fv;
  std::vector<int> ft;
  std::vector<const Expr*> conds;
  detail::collect_targets(dom, schema, schema.effect, fv, ft, conds, out);
  return out;
}

// --- compiled domain -------------------------------------------------------------

struct CompiledDerived {
  int pred_id = -1;
  bool exact = false;                // slot-free body compiled by formula
  std::vector<FirstOrderRule> rules; // learned rules otherwise (per code / bool)
  std::vector<int> inseparable;      // target values that got optimistic clauses
};

struct CompiledAction {
  int action_index = -1;
  int target_index = -1;             // into effect_targets(action)
  bool exact = false;                // Boolean constant under slot-free conditions
  std::vector<FirstOrderRule> rules;
  std::vector<int> inseparable;
};

struct CompiledDomain {
  enum class Mode { Opt, Ao };
  Mode mode = Mode::Opt;
  std::string domain_name;
  CodebookSet codebooks;                  // AO only
  std::vector<CompiledDerived> derived;   // AO only, in definition order
  std::vector<CompiledAction> actions;    // AO only
};

// Optimistic compilation needs no learned content: every non-Boolean state
// variable becomes a "-opt" Boolean at grounding time.
inline CompiledDomain compile_opt(const Domain& dom) {
  CompiledDomain cd;
  cd.mode = CompiledDomain::Mode::Opt;
  cd.domain_name = dom.name;
  return cd;
}

// Assembly step of the And-Or compilation: validates that every derived
// predicate and every action effect target carries rules (or an exact
// formula). This is what the pipeline below produces.
inline CompiledDomain assemble_ao(const Domain& dom, CodebookSet codebooks,
                                  std::vector<CompiledDerived> derived,
                                  std::vector<CompiledAction> actions) {
  CompiledDomain cd;
  cd.mode = CompiledDomain::Mode::Ao;
  cd.domain_name = dom.name;
  cd.codebooks = std::move(codebooks);
  cd.derived = std::move(derived);
  cd.actions = std::move(actions);

  std::set<int> have;
  for (const auto& d : cd.derived) have.insert(d.pred_id);
  for (const auto& defn : dom.derived)
    if (!have.count(defn.pred_id)) throw MissingRule(dom.pred(defn.pred_id).name);
  for (size_t ai = 0; ai < dom.actions.size(); ++ai) {
    size_t targets = effect_targets(dom, dom.actions[ai]).size();
    for (size_t ti = 0; ti < targets; ++ti) {
      bool found = false;
      for (const auto& a : cd.actions)
        found = found || (a.action_index == int(ai) && a.target_index == int(ti));
      if (!found)
        throw MissingRule("action " + dom.actions[ai].name + " target " + std::to_string(ti));
    }
  }
  for (const auto& p : dom.predicates) {
    if (p.ret.is_bool()) continue;
    if (!cd.codebooks.count(p.name)) throw MissingCodebook(p.name);
  }
  return cd;
}

// Exact And-Or compilation for fully symbolic domains (no slots, Boolean
// effects only): formulas compile directly, nothing is learned.
inline CompiledDomain compile_ao_symbolic(const Domain& dom) {
  std::vector<CompiledDerived> derived;
  for (const auto& defn : dom.derived) {
    if (detail::expr_has_slot(defn.body))
      throw MissingRule(dom.pred(defn.pred_id).name + " (contains slots; compile from data)");
    CompiledDerived d;
    d.pred_id = defn.pred_id;
    d.exact = true;
    derived.push_back(std::move(d));
  }
  std::vector<CompiledAction> actions;
  for (size_t ai = 0; ai < dom.actions.size(); ++ai) {
    std::vector<EffectTarget> targets = effect_targets(dom, dom.actions[ai]);
    for (size_t ti = 0; ti < targets.size(); ++ti) {
      const EffectTarget& tgt = targets[ti];
      bool exact = tgt.value_is_true() || tgt.value_is_false();
      for (const Expr* c : tgt.conditions) exact = exact && !detail::expr_has_slot(*c);
      if (!exact)
        throw MissingRule("action " + dom.actions[ai].name +
                          " (learned content; compile from data)");
      CompiledAction a;
      a.action_index = int(ai);
      a.target_index = int(ti);
      a.exact = true;
      actions.push_back(std::move(a));
    }
  }
  return assemble_ao(dom, {}, std::move(derived), std::move(actions));
}

// --- the data-driven AO pipeline --------------------------------------------------

struct AoConfig {
  int bins = 128;           // requested codes per predicate, clamped to distinct
  int max_states = 12000;   // sample states for rule extraction
  int kmeans_states = 1500; // subset used to initialize the codebooks
  bool finetune = false;    // optional straight-through codebook pass
  uint64_t seed = 0;
  FoilConfig foil;
};

struct AoReport {
  std::vector<std::string> warnings;  // inseparable targets, clamped bins
};

namespace detail {

// Evaluates one derived predicate instance on a detached state.
inline std::vector<float> eval_derived_values(const Runtime& rt, const FactoredState& s,
                                              const Predicate& p,
                                              const std::vector<int>& args) {
  Tape tape;
  Evaluator ev(tape, rt, s);
  Expr call = Expr::make(ExprKind::PredicateCall);
  call.name = p.name;
  for (int a : args) call.children.push_back(Expr::object_const(s.universe->name_of(a)));
  Binding b;
  EvalResult r = ev.eval(call, b);
  const auto& v = tape.value(r.value);
  return std::vector<float>(v.begin(), v.end());
}

inline void add_optimistic_clauses(const Domain& dom, std::vector<FirstOrderRule>& rules,
                                   const std::vector<int>& inseparable, int pred,
                                   const std::vector<int>& head_types) {
  bool boolean = dom.pred(pred).ret.is_bool();
  for (int value : inseparable) {
    FirstOrderRule r;
    r.target_pred = pred;
    r.target_code = boolean ? -1 : value;
    r.head_types = head_types;
    r.clauses.push_back(RuleClause{});  // empty body: optimistically reachable
    rules.push_back(std::move(r));
  }
}

}  // namespace detail

// Encoded, detached sample states drawn from the head of a dataset.
struct AoSamples {
  struct Item {
    FactoredState state;
    const Universe* universe;
  };
  std::vector<std::unique_ptr<Universe>> universes;
  std::vector<Item> items;
};

// Strided over the whole dataset so rare configurations stay represented.
inline AoSamples collect_samples(const Runtime& rt, const std::vector<Episode>& episodes,
                                 int max_states) {
  AoSamples out;
  size_t total = 0;
  for (const auto& ep : episodes) total += ep.states.size();
  size_t stride = std::max<size_t>(1, total / size_t(std::max(1, max_states)));

  size_t index = 0;
  for (const auto& ep : episodes) {
    if (int(out.items.size()) >= max_states) break;
    auto uni = std::make_unique<Universe>(ep.universe);
    bool used = false;
    for (const auto& raw : ep.states) {
      if (index++ % stride != 0) continue;
      if (int(out.items.size()) >= max_states) break;
      Tape tape;
      RawState r = raw;
      r.universe = *uni;
      FactoredState enc = rt.encode_state(tape, r);
      FactoredState det = enc.detached(tape);
      det.universe = uni.get();
      out.items.push_back({std::move(det), uni.get()});
      used = true;
    }
    if (used) out.universes.push_back(std::move(uni));
  }
  if (out.items.empty()) throw EmptyInput();
  return out;
}

// Codebooks over every non-Boolean predicate: inputs read from the tables,
// derived values evaluated through the networks. Requested bins clamp to the
// number of distinct feature vectors.
inline CodebookSet fit_codebooks(const Runtime& rt, const AoSamples& samples,
                                 const AoConfig& cfg, AoReport* report = nullptr) {
  const Domain& dom = rt.domain();
  size_t limit = std::min(samples.items.size(), size_t(std::max(1, cfg.kmeans_states)));
  CodebookSet codebooks;
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    const Predicate& p = dom.predicates[pid];
    if (p.ret.is_bool()) continue;
    std::vector<std::vector<float>> features;
    for (size_t si = 0; si < limit; ++si) {
      const auto& s = samples.items[si];
      if (p.is_input) {
        const StateTable* t = s.state.table(int(pid));
        if (!t) continue;
        for (const auto& [args, entry] : *t) features.push_back(entry.value);
      } else {
        for (const auto& args : all_arg_tuples(dom, *s.universe, p))
          features.push_back(detail::eval_derived_values(rt, s.state, p, args));
      }
    }
    if (features.empty()) throw EmptyInput();
    std::vector<std::vector<float>> distinct;
    for (const auto& f : features)
      if (std::find(distinct.begin(), distinct.end(), f) == distinct.end())
        distinct.push_back(f);
    int k = std::min(cfg.bins, int(distinct.size()));
    if (k < cfg.bins && report)
      report->warnings.push_back("codebook " + p.name + ": clamped bins to " +
                                 std::to_string(k));
    Codebook cb = fit_codebook(p.name, features, k, cfg.seed);
    if (cfg.finetune) finetune_codebook(cb, features);
    codebooks[p.name] = cb;
  }
  return codebooks;
}

// Codebooks straight from a dataset (duplicate-detection use).
inline CodebookSet fit_codebooks_from_data(const Runtime& rt,
                                           const std::vector<Episode>& episodes,
                                           const AoConfig& cfg) {
  AoSamples samples = collect_samples(rt, episodes, cfg.max_states);
  return fit_codebooks(rt, samples, cfg);
}

// Fits codebooks over the encoded dataset, extracts first-order rules for
// every derived predicate and action effect target (exact formula compilation
// where nothing was learned), and assembles the relaxed domain.
inline CompiledDomain compile_ao_from_data(const Runtime& rt,
                                           const std::vector<Episode>& episodes,
                                           const AoConfig& cfg, AoReport* report = nullptr) {
  const Domain& dom = rt.domain();

  AoSamples sample_set = collect_samples(rt, episodes, cfg.max_states);
  const auto& samples = sample_set.items;
  CodebookSet codebooks = fit_codebooks(rt, sample_set, cfg, report);

  // fully quantized snapshots for rule extraction
  std::vector<DiscreteState> discrete;
  discrete.reserve(samples.size());
  for (const auto& s : samples) discrete.push_back(quantize_state(rt, s.state, codebooks));

  CodeCounts counts;
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    const Predicate& p = dom.predicates[pid];
    counts[int(pid)] = p.ret.is_bool() ? -1 : codebooks.at(p.name).size();
  }

  // derived predicates, in definition order; rule bodies may reference inputs
  // and earlier derived predicates only
  std::vector<CompiledDerived> derived_out;
  std::set<int> available;
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid)
    if (dom.predicates[pid].is_input) available.insert(int(pid));

  for (const auto& defn : dom.derived) {
    const Predicate& p = dom.pred(defn.pred_id);
    CompiledDerived cdp;
    cdp.pred_id = defn.pred_id;
    if (!detail::expr_has_slot(defn.body)) {
      cdp.exact = true;
    } else {
      CodeCounts visible;
      for (int pid : available) visible[pid] = counts.at(pid);
      std::vector<RuleLiteral> candidates =
          candidate_literals(dom, p.param_types, visible);
      std::vector<FoilSample> fs;
      for (size_t si = 0; si < samples.size(); ++si) {
        for (const auto& args : all_arg_tuples(dom, *samples[si].universe, p)) {
          FoilSample one;
          one.state = &discrete[si];
          one.universe = samples[si].universe;
          one.head = args;
          auto inst = std::make_pair(defn.pred_id, args);
          one.label = p.ret.is_bool() ? (discrete[si].bools.count(inst) ? 1 : 0)
                                      : discrete[si].codes.at(inst);
          fs.push_back(std::move(one));
        }
      }
      FoilOutcome outcome =
          extract_rules(dom, defn.pred_id, p.param_types, candidates, fs, cfg.foil);
      cdp.rules = std::move(outcome.rules);
      cdp.inseparable = outcome.inseparable_values;
      detail::add_optimistic_clauses(dom, cdp.rules, cdp.inseparable, defn.pred_id, p.param_types);
      if (!cdp.inseparable.empty() && report)
        report->warnings.push_back("derived " + p.name + ": " +
                                   std::to_string(cdp.inseparable.size()) +
                                   " value(s) fell back to optimistic clauses");
    }
    derived_out.push_back(std::move(cdp));
    available.insert(defn.pred_id);
  }

  // action effect targets: labels come from the model's own predictions
  std::vector<CompiledAction> actions_out;
  for (size_t ai = 0; ai < dom.actions.size(); ++ai) {
    const ActionSchema& schema = dom.actions[ai];
    std::vector<EffectTarget> targets = effect_targets(dom, schema);

    // predicted next states per sample, one per action-parameter grounding
    for (size_t ti = 0; ti < targets.size(); ++ti) {
      const EffectTarget& tgt = targets[ti];
      const Predicate& p = dom.pred(tgt.target_pred);
      CompiledAction ca;
      ca.action_index = int(ai);
      ca.target_index = int(ti);

      bool exact = (tgt.value_is_true() || tgt.value_is_false());
      for (const Expr* c : tgt.conditions) exact = exact && !detail::expr_has_slot(*c);
      if (exact) {
        ca.exact = true;
        actions_out.push_back(std::move(ca));
        continue;
      }

      CodeCounts visible = counts;  // action rules see the full current state
      std::vector<RuleLiteral> candidates =
          candidate_literals(dom, tgt.head_types, visible);

      std::vector<FoilSample> fs;
      std::vector<DiscreteState> predicted_store;
      predicted_store.reserve(samples.size() * 2);
      for (size_t si = 0; si < samples.size(); ++si) {
        const Universe& u = *samples[si].universe;
        std::vector<std::vector<int>> param_groundings;
        {
          std::vector<std::vector<int>> cand;
          bool empty = false;
          for (int t : schema.param_types) {
            cand.push_back(u.of_type(dom, t));
            if (cand.back().empty()) empty = true;
          }
          if (empty) continue;
          std::vector<size_t> idx(cand.size(), 0);
          while (true) {
            std::vector<int> g;
            for (size_t k = 0; k < idx.size(); ++k) g.push_back(cand[k][idx[k]]);
            param_groundings.push_back(g);
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
        }
        for (const auto& params : param_groundings) {
          Tape tape;
          Evaluator ev(tape, rt, samples[si].state);
          FactoredState predicted = apply_action(ev, schema, params);
          // quantize only the target predicate of the predicted state
          std::vector<int> foreach_types(tgt.head_types.begin() + tgt.n_params,
                                         tgt.head_types.end());
          std::vector<std::vector<int>> fvals;
          {
            std::vector<std::vector<int>> cand;
            bool empty = false;
            for (int t : foreach_types) {
              cand.push_back(u.of_type(dom, t));
              if (cand.back().empty()) empty = true;
            }
            if (empty) continue;
            std::vector<size_t> idx(cand.size(), 0);
            while (true) {
              std::vector<int> g;
              for (size_t k = 0; k < idx.size(); ++k) g.push_back(cand[k][idx[k]]);
              fvals.push_back(g);
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
          }
          for (const auto& fv : fvals) {
            std::vector<int> head = params;
            head.insert(head.end(), fv.begin(), fv.end());
            std::vector<int> target_inst;
            for (int hidx : tgt.target_args) target_inst.push_back(head[size_t(hidx)]);
            const StateEntry& entry = predicted.entry(tgt.target_pred, target_inst);
            std::vector<float> value = entry.value;
            if (entry.node_on(tape) >= 0) {
              const auto& v = tape.value(entry.node);
              value.assign(v.begin(), v.end());
            }
            FoilSample one;
            one.state = &discrete[si];
            one.universe = samples[si].universe;
            one.head = head;
            one.label = p.ret.is_bool() ? (value[0] > 0.5f ? 1 : 0)
                                        : codebooks.at(p.name).assign(value);
            fs.push_back(std::move(one));
          }
        }
      }
      FoilOutcome outcome =
          extract_rules(dom, tgt.target_pred, tgt.head_types, candidates, fs, cfg.foil);
      ca.rules = std::move(outcome.rules);
      ca.inseparable = outcome.inseparable_values;
      detail::add_optimistic_clauses(dom, ca.rules, ca.inseparable, tgt.target_pred,
                                     tgt.head_types);
      if (!ca.inseparable.empty() && report)
        report->warnings.push_back("action " + schema.name + " target " + p.name + ": " +
                                   std::to_string(ca.inseparable.size()) +
                                   " value(s) fell back to optimistic clauses");
      actions_out.push_back(std::move(ca));
    }
  }

  return assemble_ao(dom, std::move(codebooks), std::move(derived_out),
                     std::move(actions_out));
}

// --- serialization ------------------------------------------------------------

namespace detail {

inline std::string rule_var(int i) { return "?v" + std::to_string(i); }

inline std::string atom_text(const Domain& dom, const Atom& atom,
                             const std::vector<int>& head_types) {
  std::string s = "(" + dom.pred(atom.pred).name;
  if (atom.code >= 0) s += "@" + std::to_string(atom.code);
  for (int a : atom.args) {
    if (a == kFreshVar) {
      s += " _t0";
    } else {
      s += " " + rule_var(a) + " - " + dom.object_types[size_t(head_types[size_t(a)])];
    }
  }
  return s + ")";
}

inline std::string literal_text(const Domain& dom, const RuleLiteral& lit,
                                const std::vector<int>& head_types) {
  std::string inner;
  if (!lit.exists) {
    inner = atom_text(dom, lit.atoms[0], head_types);
  } else {
    inner = "(exists (_t0 - " + dom.object_types[size_t(lit.exists_type)] + ") ";
    if (lit.atoms.size() == 1) {
      inner += atom_text(dom, lit.atoms[0], head_types);
    } else {
      inner += "(and";
      for (const auto& a : lit.atoms) inner += " " + atom_text(dom, a, head_types);
      inner += ")";
    }
    inner += ")";
  }
  return lit.positive ? inner : "(not " + inner + ")";
}

inline std::string clause_text(const Domain& dom, const RuleClause& clause,
                               const std::vector<int>& head_types) {
  if (clause.lits.empty()) return "(and )";
  if (clause.lits.size() == 1) return literal_text(dom, clause.lits[0], head_types);
  std::string s = "(and";
  for (const auto& lit : clause.lits) s += " " + literal_text(dom, lit, head_types);
  return s + ")";
}

inline std::string rules_text(const Domain& dom, const std::vector<FirstOrderRule>& rules,
                              const std::string& indent) {
  // group by target code, SAS style
  std::string out;
  for (const auto& rule : rules) {
    out += indent;
    if (rule.target_code >= 0) out += std::to_string(rule.target_code) + " <- ";
    if (rule.clauses.size() == 1) {
      out += clause_text(dom, rule.clauses[0], rule.head_types);
    } else {
      out += "(or";
      for (const auto& c : rule.clauses) out += "\n" + indent + "  " + clause_text(dom, c, rule.head_types);
      out += ")";
    }
    out += "\n";
  }
  return out;
}

}  // namespace detail

inline std::string head_signature(const Domain& dom, int pred,
                                  const std::vector<int>& target_args,
                                  const std::vector<int>& head_types) {
  std::string s = "(" + dom.pred(pred).name;
  for (int a : target_args)
    s += " " + detail::rule_var(a) + " - " + dom.object_types[size_t(head_types[size_t(a)])];
  return s + ")";
}

// Text form of a compiled domain; diffable and byte-stable.
inline std::string compiled_to_text(const Domain& dom, const CompiledDomain& cd) {
  std::string out = "(compiled " + cd.domain_name + " " +
                    (cd.mode == CompiledDomain::Mode::Opt ? "opt" : "ao") + ")\n";
  if (cd.mode == CompiledDomain::Mode::Opt) {
    for (const auto& p : dom.predicates) {
      if (!p.is_input || p.ret.is_bool()) continue;
      out += "(proposition " + p.name + "-opt";
      for (size_t i = 0; i < p.param_names.size(); ++i)
        out += " " + p.param_names[i] + " - " + dom.object_types[size_t(p.param_types[i])];
      out += ")\n";
    }
    for (size_t ai = 0; ai < dom.actions.size(); ++ai) {
      const ActionSchema& schema = dom.actions[ai];
      out += "(action " + schema.name;
      for (const auto& t : effect_targets(dom, schema)) {
        out += " (writes " + dom.pred(t.target_pred).name +
               (dom.pred(t.target_pred).ret.is_bool() ? "" : "-opt") + ")";
      }
      out += ")\n";
    }
    return out;
  }

  for (const auto& [pred, cb] : cd.codebooks) {
    out += "(codebook " + pred + " bins=" + std::to_string(cb.size()) +
           " dim=" + std::to_string(cb.dim) + "\n";
    for (const auto& c : cb.centroids) {
      out += "  (";
      for (size_t i = 0; i < c.size(); ++i)
        out += (i ? " " : "") + format_float(double(c[size_t(i)]));
      out += ")\n";
    }
    out += ")\n";
  }
  for (const auto& d : cd.derived) {
    const Predicate& p = dom.pred(d.pred_id);
    out += "(derived (" + p.name;
    for (size_t i = 0; i < p.param_names.size(); ++i)
      out += " " + detail::rule_var(int(i)) + " - " + dom.object_types[size_t(p.param_types[i])];
    out += ")";
    if (d.exact) {
      out += " <- (exact " + print_expr(dom.derived[size_t(p.derived_index)].body) + ")\n";
    } else if (p.ret.is_bool()) {
      out += " <-\n" + detail::rules_text(dom, d.rules, "  ");
    } else {
      out += " <- (SAS\n" + detail::rules_text(dom, d.rules, "  ") + ")\n";
    }
    out += ")\n";
  }
  for (const auto& a : cd.actions) {
    const ActionSchema& schema = dom.actions[size_t(a.action_index)];
    std::vector<EffectTarget> targets = effect_targets(dom, schema);
    const EffectTarget& tgt = targets[size_t(a.target_index)];
    out += "(action " + schema.name + " " +
           head_signature(dom, tgt.target_pred, tgt.target_args, tgt.head_types);
    if (a.exact) {
      out += " <- (exact";
      for (const Expr* c : tgt.conditions) out += " " + print_expr(*c);
      out += " -> " + std::string(tgt.value_is_true() ? "true" : "false") + ")\n";
    } else if (dom.pred(tgt.target_pred).ret.is_bool()) {
      out += " <-\n" + detail::rules_text(dom, a.rules, "  ");
    } else {
      out += " <- (SAS\n" + detail::rules_text(dom, a.rules, "  ") + ")\n";
    }
    out += ")\n";
  }
  return out;
}

}  // namespace pds
