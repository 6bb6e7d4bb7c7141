#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pdsketch/autodiff.hpp"
#include "pdsketch/domain.hpp"

namespace pds {

// Raw (pre-encoder) observation: per input predicate, per argument tuple,
// a flat float vector (ints stored as floats).
struct RawState {
  Universe universe;
  // predicate name -> argument tuple -> raw values
  std::map<std::string, std::map<std::vector<int>, std::vector<float>>> values;
};

// One table cell of a factored state. `value` is the detached float32 copy;
// `node` is the live tape node when the state is attached to the tape whose
// id is `tape_id`. Evaluation against any other tape re-leafs the value.
struct StateEntry {
  std::vector<float> value;
  NodeId node = -1;
  uint64_t tape_id = 0;

  void attach(const Tape& tape, NodeId id) {
    node = id;
    tape_id = tape.id();
  }
  NodeId node_on(const Tape& tape) const {
    return node >= 0 && tape_id == tape.id() ? node : -1;
  }
};

using StateTable = std::map<std::vector<int>, StateEntry>;

// Object-centric latent state: the universe plus one value table per input
// predicate. Tables are shared copy-on-write so that applying an action
// reuses every untouched table.
struct FactoredState {
  const Universe* universe = nullptr;
  std::vector<std::shared_ptr<const StateTable>> tables;  // indexed by predicate id

  const StateTable* table(int pred_id) const {
    if (pred_id < 0 || size_t(pred_id) >= tables.size()) return nullptr;
    return tables[size_t(pred_id)].get();
  }

  const StateEntry& entry(int pred_id, const std::vector<int>& args) const {
    const StateTable* t = table(pred_id);
    if (!t) throw EvalError("no table for predicate id " + std::to_string(pred_id));
    auto it = t->find(args);
    if (it == t->end()) throw EvalError("missing state entry");
    return it->second;
  }

  // Detached deep copy: values only, no tape nodes.
  FactoredState detached(const Tape& tape) const {
    FactoredState out;
    out.universe = universe;
    out.tables.resize(tables.size());
    for (size_t p = 0; p < tables.size(); ++p) {
      if (!tables[p]) continue;
      auto nt = std::make_shared<StateTable>();
      for (const auto& [args, e] : *tables[p]) {
        StateEntry ne;
        if (e.node_on(tape) >= 0) {
          const auto& v = tape.value(e.node);
          ne.value.assign(v.begin(), v.end());
        } else {
          ne.value = e.value;
        }
        (*nt)[args] = std::move(ne);
      }
      out.tables[p] = std::move(nt);
    }
    return out;
  }
};

// Enumerates all type-correct argument tuples of a predicate.
inline std::vector<std::vector<int>> all_arg_tuples(const Domain& dom, const Universe& u,
                                                    const Predicate& p) {
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> cand;
  for (int t : p.param_types) {
    cand.push_back(u.of_type(dom, t));
    if (cand.back().empty()) return out;
  }
  std::vector<size_t> idx(cand.size(), 0);
  while (true) {
    std::vector<int> tuple;
    for (size_t k = 0; k < idx.size(); ++k) tuple.push_back(cand[k][idx[k]]);
    out.push_back(std::move(tuple));
    if (cand.empty()) break;
    size_t k = cand.size();
    bool done = false;
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

}  // namespace pds
