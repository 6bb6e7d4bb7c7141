#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdsketch/evaluator.hpp"
#include "pdsketch/kmeans.hpp"
#include "pdsketch/runtime.hpp"

namespace pds {

class MissingCodebook : public Error {
 public:
  explicit MissingCodebook(const std::string& pred)
      : Error("no codebook for predicate " + pred) {}
};

using CodebookSet = std::map<std::string, Codebook>;  // predicate name -> codebook

// Discrete snapshot of a state: one code per non-Boolean predicate instance
// (SAS-style mutual exclusion) plus the set of true Boolean propositions.
struct DiscreteState {
  std::map<std::pair<int, std::vector<int>>, int> codes;
  std::set<std::pair<int, std::vector<int>>> bools;

  bool operator==(const DiscreteState& o) const {
    return codes == o.codes && bools == o.bools;
  }

  std::string key() const {
    std::string out;
    for (const auto& [inst, code] : codes) {
      out += std::to_string(inst.first);
      for (int a : inst.second) out += "," + std::to_string(a);
      out += "=" + std::to_string(code) + ";";
    }
    out += "|";
    for (const auto& inst : bools) {
      out += std::to_string(inst.first);
      for (int a : inst.second) out += "," + std::to_string(a);
      out += ";";
    }
    return out;
  }
};

namespace detail {

inline std::vector<float> to_floats(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace detail

// Quantizes the input-predicate tables only: code propositions for vector
// values, thresholded propositions for Boolean ones. Deterministic and
// idempotent (quantizing a quantized state's values again picks the same
// centroids exactly).
inline DiscreteState quantize_inputs(const Domain& dom, const FactoredState& state,
                                     const CodebookSet& codebooks) {
  DiscreteState out;
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    const Predicate& p = dom.predicates[pid];
    if (!p.is_input) continue;
    const StateTable* table = state.table(int(pid));
    if (!table) continue;
    for (const auto& [args, entry] : *table) {
      if (p.ret.is_bool()) {
        if (entry.value[0] > 0.5f) out.bools.insert({int(pid), args});
      } else {
        auto cb = codebooks.find(p.name);
        if (cb == codebooks.end()) throw MissingCodebook(p.name);
        out.codes[{int(pid), args}] = cb->second.assign(entry.value);
      }
    }
  }
  return out;
}

// Full quantization: inputs plus every derived predicate instance, evaluated
// through the trained networks (Booleans thresholded at 0.5, vectors through
// their codebooks). Used when generating rule-extraction samples.
inline DiscreteState quantize_state(const Runtime& rt, const FactoredState& state,
                                    const CodebookSet& codebooks) {
  const Domain& dom = rt.domain();
  DiscreteState out = quantize_inputs(dom, state, codebooks);
  Tape tape;
  Evaluator ev(tape, rt, state);
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    const Predicate& p = dom.predicates[pid];
    if (p.is_input) continue;
    for (const auto& args : all_arg_tuples(dom, *state.universe, p)) {
      Expr call = Expr::make(ExprKind::PredicateCall);
      call.name = p.name;
      for (int a : args) call.children.push_back(Expr::object_const(state.universe->name_of(a)));
      Binding binding;
      EvalResult r = ev.eval(call, binding);
      if (p.ret.is_bool()) {
        if (tape.scalar_value(r.value) > 0.5) out.bools.insert({int(pid), args});
      } else {
        auto cb = codebooks.find(p.name);
        if (cb == codebooks.end()) throw MissingCodebook(p.name);
        out.codes[{int(pid), args}] =
            cb->second.assign(detail::to_floats(tape.value(r.value)));
      }
    }
  }
  return out;
}

// Duplicate-detection key for search: codebook quantization when available,
// 1e-4 rounding as the fallback.
inline std::string dedup_key(const Domain& dom, const FactoredState& state,
                             const CodebookSet* codebooks) {
  if (codebooks) return quantize_inputs(dom, state, *codebooks).key();
  std::string out;
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    const Predicate& p = dom.predicates[pid];
    if (!p.is_input) continue;
    const StateTable* table = state.table(int(pid));
    if (!table) continue;
    out += p.name + ":";
    for (const auto& [args, entry] : *table) {
      for (int a : args) out += std::to_string(a) + ",";
      out += "=";
      if (p.ret.is_bool()) {
        out += entry.value[0] > 0.5f ? "1" : "0";
      } else {
        for (float v : entry.value) {
          double r = std::round(double(v) * 1e4) / 1e4;
          out += format_float(r) + ",";
        }
      }
      out += ";";
    }
  }
  return out;
}

}  // namespace pds
