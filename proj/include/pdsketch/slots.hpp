#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pdsketch/autodiff.hpp"
#include "pdsketch/runtime.hpp"

namespace pds {

// Architecture settings for slot modules and encoders. Plain key-value text:
//
//   seed 0
//   hidden 64,64            default head widths
//   set-hidden 64           element-net widths for variadic ports
//   set-dim 64              pooled embedding size per variadic port
//   onehot direction 4      one-hot cardinality for an int value type
//   dim image 11            dimension for an unspecified vector type
//   slot-hidden derived::is-red::f 32
//   encoder-mlp item-image  trainable dimension-preserving encoder
struct ArchConfig {
  uint64_t seed = 0;
  std::vector<int> hidden = {64, 64};
  std::vector<int> set_hidden = {64};
  int set_dim = 64;
  std::map<std::string, std::vector<int>> slot_hidden;
  std::set<std::string> mlp_encoders;
  EncodingConfig encoding;

  const std::vector<int>& hidden_for(const std::string& canonical) const {
    auto it = slot_hidden.find(canonical);
    return it == slot_hidden.end() ? hidden : it->second;
  }
};

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(int(std::strtol(cur.c_str(), nullptr, 10)));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

inline ArchConfig parse_arch_config(const std::string& text) {
  ArchConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& why) {
      throw ConfigError("arch config line " + std::to_string(lineno) + ": " + why);
    };
    if (key == "seed") {
      uint64_t v;
      if (!(ls >> v)) fail("seed expects an integer");
      cfg.seed = v;
    } else if (key == "hidden" || key == "set-hidden") {
      std::string v;
      if (!(ls >> v)) fail(key + " expects a width list");
      (key == "hidden" ? cfg.hidden : cfg.set_hidden) = parse_int_list(v);
    } else if (key == "set-dim") {
      if (!(ls >> cfg.set_dim)) fail("set-dim expects an integer");
    } else if (key == "onehot") {
      std::string alias;
      int c;
      if (!(ls >> alias >> c)) fail("onehot expects: alias cardinality");
      cfg.encoding.onehot[alias] = c;
    } else if (key == "dim") {
      std::string alias;
      int d;
      if (!(ls >> alias >> d)) fail("dim expects: alias dimension");
      cfg.encoding.fill_dims[alias] = d;
    } else if (key == "slot-hidden") {
      std::string name, v;
      if (!(ls >> name >> v)) fail("slot-hidden expects: canonical-name width-list");
      cfg.slot_hidden[name] = parse_int_list(v);
    } else if (key == "encoder-mlp") {
      std::string name;
      if (!(ls >> name)) fail("encoder-mlp expects a predicate name");
      cfg.mlp_encoders.insert(name);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  return cfg;
}

namespace detail {

// uniform He-style init; the stream is derived from the store seed and the
// tensor name, so initialization does not depend on creation order
inline void init_tensor(ParamTensor& t, uint64_t seed, bool is_bias) {
  Rng rng(seed ^ fnv1a64(t.name));
  if (is_bias) {
    std::fill(t.value.begin(), t.value.end(), 0.f);
    return;
  }
  int fan_in = t.shape.size() == 2 ? t.shape[1] : int(t.value.size());
  double s = std::sqrt(6.0 / std::max(1, fan_in));
  for (auto& v : t.value) v = float(rng.uniform(-s, s));
}

struct LayerStack {
  std::vector<std::pair<ParamTensor*, ParamTensor*>> layers;  // (W, b)

  NodeId run(Tape& tape, NodeId x, bool relu_hidden = true) const {
    for (size_t l = 0; l < layers.size(); ++l) {
      NodeId wx = tape.matvec(tape.param(*layers[l].first), x);
      x = tape.add(wx, tape.param(*layers[l].second));
      if (relu_hidden && l + 1 < layers.size()) x = tape.relu(x);
    }
    return x;
  }
};

inline LayerStack make_layers(ParamStore& store, const std::string& prefix, int in_dim,
                              const std::vector<int>& hidden, int out_dim) {
  LayerStack stack;
  std::vector<int> dims;
  dims.push_back(in_dim);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(out_dim);
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    std::string wname = prefix + "/W" + std::to_string(l);
    std::string bname = prefix + "/b" + std::to_string(l);
    if (!store.tensors.count(wname)) {
      ParamTensor& w = store.create(wname, {dims[l + 1], dims[l]});
      init_tensor(w, store.seed, false);
      ParamTensor& b = store.create(bname, {dims[l + 1]});
      init_tensor(b, store.seed, true);
    }
    stack.layers.push_back({&store.at(wname), &store.at(bname)});
  }
  return stack;
}

// Condition-weighted sum pool over a variadic port. Contributions are summed
// in lexicographic order of their values, which makes the pool exactly
// permutation-invariant.
inline NodeId pool_group(Tape& tape, const LayerStack& elem,
                         const std::vector<std::pair<NodeId, NodeId>>& group, int set_dim) {
  std::vector<NodeId> contribs;
  for (const auto& [cond, payload] : group) {
    NodeId e = elem.run(tape, payload);
    if (cond >= 0) e = tape.mul(cond, e);
    contribs.push_back(e);
  }
  std::vector<size_t> order(contribs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return tape.value(contribs[a]) < tape.value(contribs[b]);
  });
  NodeId acc = tape.leaf(std::vector<double>(size_t(set_dim), 0.0));
  for (size_t i : order) acc = tape.add(acc, contribs[i]);
  return acc;
}

}  // namespace detail

namespace detail {

// Boolean slots reachable from conditional-effect conditions, transitively
// through derived bodies. They start with a positive output bias: a gate that
// collapses to zero starves the gated value network of gradient and saturates
// beyond recovery.
inline void collect_condition_slots(const Domain& dom, const Expr& e,
                                    std::set<std::string>& out, bool in_condition) {
  switch (e.kind) {
    case ExprKind::SlotCall:
      if (in_condition) out.insert(e.name);
      for (const auto& c : e.children) collect_condition_slots(dom, c, out, in_condition);
      return;
    case ExprKind::When:
      collect_condition_slots(dom, e.children[0], out, true);
      collect_condition_slots(dom, e.children[1], out, in_condition);
      return;
    case ExprKind::PredicateCall: {
      if (in_condition) {
        const Predicate* p = dom.find_pred(e.name);
        if (p && !p->is_input)
          collect_condition_slots(dom, dom.derived[size_t(p->derived_index)].body, out,
                                  true);
      }
      for (const auto& c : e.children) collect_condition_slots(dom, c, out, in_condition);
      return;
    }
    default:
      for (const auto& c : e.children) collect_condition_slots(dom, c, out, in_condition);
      return;
  }
}

}  // namespace detail

// Builds one neural module per slot (and per configured encoder), creates its
// tensors in `store`, and binds everything into the runtime. The same module
// instance serves every grounding of its definition site (parameter tying).
inline void instantiate(Runtime& rt, ParamStore& store, const ArchConfig& cfg) {
  store.seed = cfg.seed;
  const Domain& dom = rt.domain();

  std::set<std::string> gate_slots;
  for (const auto& a : dom.actions)
    detail::collect_condition_slots(dom, a.effect, gate_slots, false);

  for (const auto& [canonical, sig] : dom.slots) {
    const ResolvedSig& rs = rt.resolved_sig(canonical);

    std::vector<detail::LayerStack> elem_nets(rs.input_dims.size());
    int head_in = 0;
    for (size_t k = 0; k < rs.input_dims.size(); ++k) {
      if (rs.input_variadic[k]) {
        elem_nets[k] = detail::make_layers(store, canonical + "/set" + std::to_string(k),
                                           rs.input_dims[k], cfg.set_hidden, cfg.set_dim);
        head_in += cfg.set_dim;
      } else {
        head_in += rs.input_dims[k];
      }
    }
    if (head_in == 0) head_in = 1;  // zero-argument slots see a constant input

    detail::LayerStack head = detail::make_layers(store, canonical, head_in,
                                                  cfg.hidden_for(canonical), rs.output_dim);
    if (rs.output_bool) {
      // effect gates start open (a collapsed gate starves its value network
      // of gradient); plain classifiers start conservative, so input
      // combinations the data never supervises default to "false"
      ParamTensor& out_bias = *head.layers.back().second;
      if (out_bias.value.size() == 1 && out_bias.value[0] == 0.f)
        out_bias.value[0] = gate_slots.count(canonical) ? 2.f : -2.f;
    }

    bool squash = rs.output_bool;
    int set_dim = cfg.set_dim;
    ResolvedSig sig_copy = rs;
    SlotFn fn = [elem_nets, head, squash, set_dim, sig_copy, canonical](
                    Tape& tape, const SlotArgs& args) -> NodeId {
      if (args.ports.size() != sig_copy.input_dims.size())
        throw ShapeMismatch("slot " + canonical + ": expected " +
                            std::to_string(sig_copy.input_dims.size()) + " ports, got " +
                            std::to_string(args.ports.size()));
      std::vector<NodeId> parts;
      for (size_t k = 0; k < args.ports.size(); ++k) {
        const auto& port = args.ports[k];
        if (sig_copy.input_variadic[k]) {
          if (!port.variadic)
            throw ShapeMismatch("slot " + canonical + ": port " + std::to_string(k) +
                                " expects a foreach group");
          for (const auto& [c, payload] : port.group)
            if (int(tape.size(payload)) != sig_copy.input_dims[k])
              throw ShapeMismatch("slot " + canonical + ": group payload dim " +
                                  std::to_string(tape.size(payload)) + ", expected " +
                                  std::to_string(sig_copy.input_dims[k]));
          parts.push_back(detail::pool_group(tape, elem_nets[k], port.group, set_dim));
        } else {
          if (port.variadic || port.fixed < 0)
            throw ShapeMismatch("slot " + canonical + ": port " + std::to_string(k) +
                                " expects a single value");
          if (int(tape.size(port.fixed)) != sig_copy.input_dims[k])
            throw ShapeMismatch("slot " + canonical + ": input dim " +
                                std::to_string(tape.size(port.fixed)) + ", expected " +
                                std::to_string(sig_copy.input_dims[k]));
          parts.push_back(port.fixed);
        }
      }
      if (parts.empty()) parts.push_back(tape.scalar(1.0));
      NodeId x = parts.size() == 1 ? parts[0] : tape.concat(parts);
      NodeId out = head.run(tape, x);
      if (squash) out = tape.sigmoid(out);
      return out;
    };
    rt.bind_slot(canonical, std::move(fn), rs.input_dims, rs.output_dim);
  }

  // trainable dimension-preserving encoders
  for (const auto& pred_name : cfg.mlp_encoders) {
    const Predicate* p = dom.find_pred(pred_name);
    if (!p || !p->is_input)
      throw ConfigError("encoder-mlp: '" + pred_name + "' is not an input predicate");
    int d = rt.latent_dim(p->ret);
    detail::LayerStack net =
        detail::make_layers(store, "encoder::" + pred_name, d, cfg.hidden, d);
    bool is_int = p->ret.kind == ValueType::Kind::IntVec;
    int onehot_c = 0;
    auto oh = cfg.encoding.onehot.find(p->ret.alias);
    if (is_int && oh != cfg.encoding.onehot.end()) onehot_c = oh->second;
    rt.bind_encoder(pred_name, [net, onehot_c](Tape& tape, const std::vector<float>& raw) {
      NodeId x;
      if (onehot_c > 0) {
        std::vector<double> v(raw.size() * size_t(onehot_c), 0.0);
        for (size_t i = 0; i < raw.size(); ++i) {
          int b = int(std::lround(raw[i]));
          b = std::max(0, std::min(onehot_c - 1, b));
          v[i * size_t(onehot_c) + size_t(b)] = 1.0;
        }
        x = tape.leaf(v);
      } else {
        x = tape.constant_floats(raw);
      }
      return net.run(tape, x);
    });
  }
}

}  // namespace pds
