#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pdsketch/autodiff.hpp"
#include "pdsketch/domain.hpp"
#include "pdsketch/state.hpp"

namespace pds {

class UnknownSlot : public Error {
 public:
  explicit UnknownSlot(const std::string& name) : Error("unknown slot " + name) {}
};

class UnboundSlot : public Error {
 public:
  explicit UnboundSlot(const std::string& name) : Error("unbound slot " + name) {}
};

class SignatureMismatch : public Error {
 public:
  explicit SignatureMismatch(const std::string& msg) : Error("signature mismatch: " + msg) {}
};

// Arguments to one slot invocation, one entry per signature port. A fixed
// port carries a single node; a variadic port carries (condition, payload)
// pairs where condition -1 means an unconditioned weight of one.
struct SlotArgs {
  struct Port {
    bool variadic = false;
    NodeId fixed = -1;
    std::vector<std::pair<NodeId, NodeId>> group;  // (condition, payload)
  };
  std::vector<Port> ports;
};

using SlotFn = std::function<NodeId(Tape&, const SlotArgs&)>;
using EncodeFn = std::function<NodeId(Tape&, const std::vector<float>&)>;

// Resolved slot signature: every port mapped to its latent dimension
// (Boolean = 1).
struct ResolvedSig {
  std::vector<int> input_dims;
  std::vector<bool> input_variadic;
  int output_dim = 1;
  bool output_bool = false;
};

// Per-value-type encoding configuration. Int-valued types can be one-hot
// encoded into the latent space; float types pass through (optionally via a
// dimension-preserving trainable MLP configured per input predicate).
struct EncodingConfig {
  std::map<std::string, int> onehot;     // value-type alias -> cardinality
  std::map<std::string, int> fill_dims;  // alias -> dim for unspecified vector types
};

// Binds a validated Domain to slot implementations and per-input-predicate
// encoders. Binding happens single-threaded; afterwards the runtime is
// read-only and shared freely.
class Runtime {
 public:
  Runtime(const Domain& domain, EncodingConfig enc = {})
      : domain_(&domain), enc_(std::move(enc)) {
    for (const auto& p : domain.predicates) {
      if (!p.is_input) continue;
      encoders_[p.name] = default_encoder(p.ret);
    }
  }

  const Domain& domain() const { return *domain_; }
  const EncodingConfig& encoding() const { return enc_; }

  int latent_dim(const ValueType& vt) const {
    if (vt.is_bool()) return 1;
    int d = vt.dim;
    if (d < 0) {
      auto it = enc_.fill_dims.find(vt.alias);
      if (it == enc_.fill_dims.end())
        throw ConfigError("value type " + vt.str() +
                          " has no declared dimension; configure one");
      d = it->second;
    }
    if (vt.kind == ValueType::Kind::IntVec) {
      auto it = enc_.onehot.find(vt.alias);
      if (it != enc_.onehot.end()) return d * it->second;
    }
    return d;
  }

  // Resolution is lazy: a domain with unspecified vector dimensions can
  // still be inspected; the ConfigError surfaces at binding time.
  const ResolvedSig& resolved_sig(const std::string& canonical) const {
    auto it = resolved_.find(canonical);
    if (it != resolved_.end()) return it->second;
    auto sit = domain_->slots.find(canonical);
    if (sit == domain_->slots.end()) throw UnknownSlot(canonical);
    return resolved_[canonical] = resolve(sit->second);
  }

  void bind_slot(const std::string& canonical, SlotFn fn, const std::vector<int>& input_dims,
                 int output_dim) {
    const ResolvedSig& sig = resolved_sig(canonical);
    if (input_dims != sig.input_dims)
      throw SignatureMismatch("slot " + canonical + " input dims differ");
    if (output_dim != sig.output_dim)
      throw SignatureMismatch("slot " + canonical + " output dim differs");
    impls_[canonical] = std::move(fn);
  }

  // Unchecked binding, for hand-written groundings in tests and oracles.
  void bind_raw(const std::string& canonical, SlotFn fn) {
    resolved_sig(canonical);  // throws UnknownSlot for typos
    impls_[canonical] = std::move(fn);
  }

  void bind_encoder(const std::string& input_pred, EncodeFn fn) {
    if (!domain_->find_pred(input_pred)) throw UnknownSlot(input_pred);
    encoders_[input_pred] = std::move(fn);
  }

  const SlotFn& slot_fn(const std::string& canonical) const {
    auto it = impls_.find(canonical);
    if (it == impls_.end() || !it->second) throw UnboundSlot(canonical);
    return it->second;
  }

  // Canonical names of slots still lacking an implementation.
  std::vector<std::string> check_complete() const {
    std::vector<std::string> out;
    for (const auto& [canonical, sig] : domain_->slots)
      if (!impls_.count(canonical)) out.push_back(canonical);
    return out;
  }

  // Encodes a raw observation into the latent factored state on `tape`.
  FactoredState encode_state(Tape& tape, const RawState& raw) const {
    FactoredState state;
    state.universe = &raw.universe;
    state.tables.resize(domain_->predicates.size());
    for (size_t pid = 0; pid < domain_->predicates.size(); ++pid) {
      const Predicate& p = domain_->predicates[pid];
      if (!p.is_input) continue;
      auto table = std::make_shared<StateTable>();
      auto raw_it = raw.values.find(p.name);
      for (const auto& args : all_arg_tuples(*domain_, raw.universe, p)) {
        const std::vector<float>* rv = nullptr;
        if (raw_it != raw.values.end()) {
          auto it = raw_it->second.find(args);
          if (it != raw_it->second.end()) rv = &it->second;
        }
        if (!rv)
          throw EvalError("observation missing value for " + p.name +
                          " over its argument tuple");
        StateEntry e;
        e.attach(tape, encoders_.at(p.name)(tape, *rv));
        const auto& v = tape.value(e.node);
        e.value.assign(v.begin(), v.end());
        (*table)[args] = std::move(e);
      }
      state.tables[pid] = std::move(table);
    }
    return state;
  }

 private:
  const Domain* domain_;
  EncodingConfig enc_;
  mutable std::map<std::string, ResolvedSig> resolved_;
  std::map<std::string, SlotFn> impls_;
  std::map<std::string, EncodeFn> encoders_;

  ResolvedSig resolve(const SlotSig& sig) const {
    ResolvedSig r;
    for (const auto& port : sig.inputs) {
      r.input_dims.push_back(latent_dim(port.type));
      r.input_variadic.push_back(port.variadic);
    }
    r.output_bool = sig.output.is_bool();
    r.output_dim = latent_dim(sig.output);
    return r;
  }

  EncodeFn default_encoder(const ValueType& vt) const {
    if (vt.kind == ValueType::Kind::IntVec) {
      auto it = enc_.onehot.find(vt.alias);
      if (it != enc_.onehot.end()) {
        int c = it->second;
        return [c](Tape& tape, const std::vector<float>& raw) {
          std::vector<double> out(raw.size() * size_t(c), 0.0);
          for (size_t i = 0; i < raw.size(); ++i) {
            int v = int(std::lround(raw[i]));
            if (v < 0) v = 0;
            if (v >= c) v = c - 1;
            out[i * size_t(c) + size_t(v)] = 1.0;
          }
          return tape.leaf(out);
        };
      }
    }
    return [](Tape& tape, const std::vector<float>& raw) {
      return tape.constant_floats(raw);
    };
  }
};

}  // namespace pds
