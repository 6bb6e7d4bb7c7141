#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pdsketch/common.hpp"

namespace pds {

class NonScalarRoot : public Error {
 public:
  NonScalarRoot() : Error("backward requires a scalar root node") {}
};

// Named parameter tensor. Values are stored in float32; the tape widens to
// double for computation.
struct ParamTensor {
  std::string name;
  std::vector<int> shape;  // [n] or [rows, cols]
  std::vector<float> value;
  std::vector<float> grad;

  size_t numel() const { return value.size(); }
  int rows() const { return shape.size() == 2 ? shape[0] : int(value.size()); }
  int cols() const { return shape.size() == 2 ? shape[1] : 0; }

  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.f); }
};

struct ParamStore {
  std::map<std::string, ParamTensor> tensors;  // ordered: deterministic iteration
  uint64_t seed = 0;

  ParamTensor& at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw EvalError("unknown parameter tensor " + name);
    return it->second;
  }
  const ParamTensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw EvalError("unknown parameter tensor " + name);
    return it->second;
  }
  ParamTensor& create(const std::string& name, std::vector<int> shape) {
    if (tensors.count(name)) throw EvalError("parameter tensor " + name + " already exists");
    ParamTensor t;
    t.name = name;
    t.shape = std::move(shape);
    size_t n = 1;
    for (int d : t.shape) n *= size_t(d);
    t.value.assign(n, 0.f);
    t.grad.assign(n, 0.f);
    auto [it, ok] = tensors.emplace(name, std::move(t));
    return it->second;
  }
  void zero_grads() {
    for (auto& [k, t] : tensors) t.zero_grad();
  }
};

using NodeId = int32_t;

enum class OpKind : uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,      // elementwise, or scalar * vector broadcast
  MatVec,
  Concat,
  Relu,
  Sigmoid,
  Min,      // scalar
  Max,      // scalar
  Sum,
  Mean,
  Bce,      // summed over elements; predictions clamped to [1e-7, 1-1e-7]
  L1,       // summed over elements
};

// Reverse-mode tape. Construction order is a topological order, so backward
// is a single reverse sweep. One backward per tape; clear() recycles storage.
// Each graph generation carries a unique id so node handles cached elsewhere
// (e.g. in factored states) can be recognized as foreign and re-leafed.
class Tape {
 public:
  static constexpr double kBceEps = 1e-7;

  Tape() : id_(next_id()) {}

  uint64_t id() const { return id_; }

  NodeId leaf(const std::vector<double>& v, bool requires_grad = false) {
    Node n;
    n.op = OpKind::Leaf;
    n.val = v;
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }
  NodeId scalar(double v) { return leaf({v}); }
  NodeId constant_floats(const std::vector<float>& v) {
    std::vector<double> d(v.begin(), v.end());
    return leaf(d);
  }

  // Leaf backed by a parameter tensor; gradients flow back via
  // flush_param_grads (caller serializes writes across tapes).
  NodeId param(ParamTensor& t) {
    Node n;
    n.op = OpKind::Leaf;
    n.val.assign(t.value.begin(), t.value.end());
    n.requires_grad = true;
    if (t.shape.size() == 2) {
      n.rows = t.shape[0];
      n.cols = t.shape[1];
    }
    NodeId id = push(std::move(n));
    param_refs_.push_back({id, &t});
    return id;
  }

  const std::vector<double>& value(NodeId id) const { return nodes_[size_t(id)].val; }
  double scalar_value(NodeId id) const {
    const auto& v = nodes_[size_t(id)].val;
    if (v.size() != 1) throw ShapeMismatch("expected scalar node");
    return v[0];
  }
  const std::vector<double>& grad(NodeId id) const { return nodes_[size_t(id)].grad; }
  size_t size(NodeId id) const { return nodes_[size_t(id)].val.size(); }
  size_t node_count() const { return nodes_.size(); }

  // Smallest distance to a min/max/relu/l1 kink seen while building; used by
  // grad_check to detect nondifferentiable points.
  double kink_gap() const { return kink_gap_; }

  NodeId add(NodeId a, NodeId b) {
    check_same(a, b, "add");
    Node n = binary(OpKind::Add, a, b);
    n.val.resize(size(a));
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = at(a)[i] + at(b)[i];
    return push(std::move(n));
  }

  NodeId sub(NodeId a, NodeId b) {
    check_same(a, b, "sub");
    Node n = binary(OpKind::Sub, a, b);
    n.val.resize(size(a));
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = at(a)[i] - at(b)[i];
    return push(std::move(n));
  }

  NodeId mul(NodeId a, NodeId b) {
    size_t na = size(a), nb = size(b);
    if (na != nb && na != 1 && nb != 1)
      throw ShapeMismatch("mul: sizes " + std::to_string(na) + " vs " + std::to_string(nb));
    Node n = binary(OpKind::Mul, a, b);
    n.val.resize(std::max(na, nb));
    for (size_t i = 0; i < n.val.size(); ++i)
      n.val[i] = at(a)[na == 1 ? 0 : i] * at(b)[nb == 1 ? 0 : i];
    return push(std::move(n));
  }

  NodeId matvec(NodeId w, NodeId x) {
    const Node& wn = nodes_[size_t(w)];
    if (wn.rows <= 0 || wn.cols <= 0) throw ShapeMismatch("matvec: first input is not a matrix");
    if (size_t(wn.cols) != size(x))
      throw ShapeMismatch("matvec: " + std::to_string(wn.rows) + "x" +
                          std::to_string(wn.cols) + " times vector of size " +
                          std::to_string(size(x)));
    Node n = binary(OpKind::MatVec, w, x);
    n.val.resize(size_t(wn.rows));
    for (int i = 0; i < wn.rows; ++i) {
      double acc = 0;
      const double* row = wn.val.data() + size_t(i) * size_t(wn.cols);
      const double* xv = at(x).data();
      for (int j = 0; j < wn.cols; ++j) acc += row[j] * xv[j];
      n.val[size_t(i)] = acc;
    }
    return push(std::move(n));
  }

  NodeId concat(const std::vector<NodeId>& parts) {
    Node n;
    n.op = OpKind::Concat;
    n.in = parts;
    for (NodeId p : parts) {
      n.requires_grad = n.requires_grad || nodes_[size_t(p)].requires_grad;
      n.val.insert(n.val.end(), at(p).begin(), at(p).end());
    }
    return push(std::move(n));
  }

  NodeId relu(NodeId a) {
    Node n = unary(OpKind::Relu, a);
    n.val.resize(size(a));
    for (size_t i = 0; i < n.val.size(); ++i) {
      double x = at(a)[i];
      note_kink(std::fabs(x));
      n.val[i] = x > 0 ? x : 0;
    }
    return push(std::move(n));
  }

  NodeId sigmoid(NodeId a) {
    Node n = unary(OpKind::Sigmoid, a);
    n.val.resize(size(a));
    for (size_t i = 0; i < n.val.size(); ++i) n.val[i] = 1.0 / (1.0 + std::exp(-at(a)[i]));
    return push(std::move(n));
  }

  // Ties route the gradient to the FIRST argument (a), so quantifier folds
  // deterministically prefer earlier operands.
  NodeId minimum(NodeId a, NodeId b) { return extremum(OpKind::Min, a, b); }
  NodeId maximum(NodeId a, NodeId b) { return extremum(OpKind::Max, a, b); }

  NodeId sum(NodeId a) {
    Node n = unary(OpKind::Sum, a);
    double acc = 0;
    for (double v : at(a)) acc += v;
    n.val = {acc};
    return push(std::move(n));
  }

  NodeId mean(NodeId a) {
    if (size(a) == 0) throw ShapeMismatch("mean of empty vector");
    Node n = unary(OpKind::Mean, a);
    double acc = 0;
    for (double v : at(a)) acc += v;
    n.val = {acc / double(size(a))};
    return push(std::move(n));
  }

  NodeId bce(NodeId prediction, NodeId target) {
    check_same(prediction, target, "bce");
    Node n = binary(OpKind::Bce, prediction, target);
    double acc = 0;
    for (size_t i = 0; i < size(prediction); ++i) {
      double p = clamp01(at(prediction)[i]);
      double t = at(target)[i];
      acc += -(t * std::log(p) + (1 - t) * std::log(1 - p));
    }
    n.val = {acc};
    return push(std::move(n));
  }

  NodeId l1(NodeId prediction, NodeId target) {
    check_same(prediction, target, "l1");
    Node n = binary(OpKind::L1, prediction, target);
    double acc = 0;
    for (size_t i = 0; i < size(prediction); ++i) {
      double d = at(prediction)[i] - at(target)[i];
      note_kink(std::fabs(d));
      acc += std::fabs(d);
    }
    n.val = {acc};
    return push(std::move(n));
  }

  // --- conveniences built from the primitive ops ---

  NodeId scale(NodeId a, double c) { return mul(a, scalar(c)); }
  NodeId one_minus(NodeId a) {
    std::vector<double> ones(size(a), 1.0);
    return sub(leaf(ones), a);
  }
  // c*a + (1-c)*b with scalar c
  NodeId blend(NodeId c, NodeId a, NodeId b) {
    return add(mul(c, a), mul(one_minus_scalar(c), b));
  }
  NodeId one_minus_scalar(NodeId c) { return sub(scalar(1.0), c); }

  void backward(NodeId root) {
    if (size(root) != 1) throw NonScalarRoot();
    for (auto& n : nodes_) n.grad.clear();
    nodes_[size_t(root)].grad.assign(1, 1.0);
    for (NodeId id = root; id >= 0; --id) {
      Node& n = nodes_[size_t(id)];
      if (n.grad.empty() || !n.requires_grad) continue;
      propagate(n);
    }
  }

  // Adds this tape's parameter-leaf gradients into the backing tensors.
  // Callers serialize this across tapes (deterministic reduction order).
  void flush_param_grads() {
    for (auto& [id, tensor] : param_refs_) {
      const Node& n = nodes_[size_t(id)];
      if (n.grad.empty()) continue;
      for (size_t i = 0; i < n.grad.size(); ++i) tensor->grad[i] += float(n.grad[i]);
    }
  }

  void clear() {
    nodes_.clear();
    param_refs_.clear();
    kink_gap_ = 1e300;
    id_ = next_id();
  }

 private:
  static uint64_t next_id() {
    static std::atomic<uint64_t> counter{0};
    return ++counter;
  }

  uint64_t id_;

  struct Node {
    OpKind op = OpKind::Leaf;
    std::vector<double> val;
    std::vector<double> grad;
    std::vector<NodeId> in;
    bool requires_grad = false;
    int rows = 0, cols = 0;
    int aux = -1;  // Min/Max: index of the chosen input
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<NodeId, ParamTensor*>> param_refs_;
  double kink_gap_ = 1e300;

  static double clamp01(double p) {
    return p < kBceEps ? kBceEps : (p > 1 - kBceEps ? 1 - kBceEps : p);
  }

  const std::vector<double>& at(NodeId id) const { return nodes_[size_t(id)].val; }

  void note_kink(double gap) {
    if (gap < kink_gap_) kink_gap_ = gap;
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
  }

  Node unary(OpKind op, NodeId a) {
    Node n;
    n.op = op;
    n.in = {a};
    n.requires_grad = nodes_[size_t(a)].requires_grad;
    return n;
  }
  Node binary(OpKind op, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.in = {a, b};
    n.requires_grad = nodes_[size_t(a)].requires_grad || nodes_[size_t(b)].requires_grad;
    return n;
  }

  void check_same(NodeId a, NodeId b, const char* what) const {
    if (size(a) != size(b))
      throw ShapeMismatch(std::string(what) + ": sizes " + std::to_string(size(a)) + " vs " +
                          std::to_string(size(b)));
  }

  NodeId extremum(OpKind op, NodeId a, NodeId b) {
    if (size(a) != 1 || size(b) != 1) throw ShapeMismatch("min/max expect scalars");
    double av = at(a)[0], bv = at(b)[0];
    note_kink(std::fabs(av - bv));
    Node n = binary(op, a, b);
    bool pick_a = op == OpKind::Min ? av <= bv : av >= bv;
    n.aux = pick_a ? 0 : 1;
    n.val = {pick_a ? av : bv};
    return push(std::move(n));
  }

  std::vector<double>& grad_buf(NodeId id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.empty()) n.grad.assign(n.val.size(), 0.0);
    return n.grad;
  }

  void add_grad(NodeId id, size_t i, double g) {
    Node& n = nodes_[size_t(id)];
    if (!n.requires_grad) return;
    grad_buf(id)[i] += g;
  }

  void propagate(Node& n) {
    switch (n.op) {
      case OpKind::Leaf:
        return;
      case OpKind::Add:
        for (size_t i = 0; i < n.grad.size(); ++i) {
          add_grad(n.in[0], i, n.grad[i]);
          add_grad(n.in[1], i, n.grad[i]);
        }
        return;
      case OpKind::Sub:
        for (size_t i = 0; i < n.grad.size(); ++i) {
          add_grad(n.in[0], i, n.grad[i]);
          add_grad(n.in[1], i, -n.grad[i]);
        }
        return;
      case OpKind::Mul: {
        size_t na = size(n.in[0]), nb = size(n.in[1]);
        for (size_t i = 0; i < n.grad.size(); ++i) {
          double av = at(n.in[0])[na == 1 ? 0 : i];
          double bv = at(n.in[1])[nb == 1 ? 0 : i];
          add_grad(n.in[0], na == 1 ? 0 : i, n.grad[i] * bv);
          add_grad(n.in[1], nb == 1 ? 0 : i, n.grad[i] * av);
        }
        return;
      }
      case OpKind::MatVec: {
        const Node& wn = nodes_[size_t(n.in[0])];
        size_t cols = size_t(wn.cols);
        for (size_t i = 0; i < n.grad.size(); ++i) {
          double g = n.grad[i];
          if (g == 0) continue;
          const double* xv = at(n.in[1]).data();
          for (size_t j = 0; j < cols; ++j) {
            add_grad(n.in[0], i * cols + j, g * xv[j]);
            add_grad(n.in[1], j, g * wn.val[i * cols + j]);
          }
        }
        return;
      }
      case OpKind::Concat: {
        size_t off = 0;
        for (NodeId p : n.in) {
          size_t np = size(p);
          for (size_t i = 0; i < np; ++i) add_grad(p, i, n.grad[off + i]);
          off += np;
        }
        return;
      }
      case OpKind::Relu:
        for (size_t i = 0; i < n.grad.size(); ++i)
          if (at(n.in[0])[i] > 0) add_grad(n.in[0], i, n.grad[i]);
        return;
      case OpKind::Sigmoid:
        for (size_t i = 0; i < n.grad.size(); ++i) {
          double s = n.val[i];
          add_grad(n.in[0], i, n.grad[i] * s * (1 - s));
        }
        return;
      case OpKind::Min:
      case OpKind::Max:
        add_grad(n.in[size_t(n.aux)], 0, n.grad[0]);
        return;
      case OpKind::Sum:
        for (size_t i = 0; i < size(n.in[0]); ++i) add_grad(n.in[0], i, n.grad[0]);
        return;
      case OpKind::Mean: {
        double inv = 1.0 / double(size(n.in[0]));
        for (size_t i = 0; i < size(n.in[0]); ++i) add_grad(n.in[0], i, n.grad[0] * inv);
        return;
      }
      case OpKind::Bce: {
        for (size_t i = 0; i < size(n.in[0]); ++i) {
          double p = at(n.in[0])[i];
          double pc = clamp01(p);
          double t = at(n.in[1])[i];
          if (p == pc) add_grad(n.in[0], i, n.grad[0] * (pc - t) / (pc * (1 - pc)));
          add_grad(n.in[1], i, n.grad[0] * (std::log(1 - pc) - std::log(pc)));
        }
        return;
      }
      case OpKind::L1: {
        for (size_t i = 0; i < size(n.in[0]); ++i) {
          double d = at(n.in[0])[i] - at(n.in[1])[i];
          double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
          add_grad(n.in[0], i, n.grad[0] * s);
          add_grad(n.in[1], i, -n.grad[0] * s);
        }
        return;
      }
    }
  }
};

// --- grad_check ---------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0;
  int checked = 0;
  int flagged_nondifferentiable = 0;
  int failures = 0;
  bool pass = true;
  std::string worst;  // "tensor[idx]: analytic vs numeric"
};

// Central finite differences against the analytic gradient. Elements whose
// perturbed evaluations pass near a min/max/relu/l1 kink are reported but
// excluded from the failure count.
inline GradCheckReport grad_check(const std::function<NodeId(Tape&, ParamStore&)>& build,
                                  ParamStore& params, double eps = 1e-4,
                                  double tol = 1e-4) {
  GradCheckReport report;

  Tape tape;
  NodeId root = build(tape, params);
  tape.backward(root);
  params.zero_grads();
  tape.flush_param_grads();

  std::map<std::string, std::vector<float>> analytic;
  for (auto& [name, t] : params.tensors) analytic[name] = t.grad;

  for (auto& [name, t] : params.tensors) {
    for (size_t i = 0; i < t.value.size(); ++i) {
      float saved = t.value[i];
      t.value[i] = float(double(saved) + eps);
      double hi_x = double(t.value[i]);
      Tape tp;
      double hi = tp.scalar_value(build(tp, params));
      double gap = tp.kink_gap();

      t.value[i] = float(double(saved) - eps);
      double lo_x = double(t.value[i]);
      Tape tm;
      double lo = tm.scalar_value(build(tm, params));
      gap = std::min(gap, tm.kink_gap());
      t.value[i] = saved;

      double numeric = (hi - lo) / (hi_x - lo_x);
      double a = double(analytic[name][i]);
      double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1.0});
      ++report.checked;
      bool near_kink = gap < 10 * eps;
      if (near_kink && rel > tol) {
        ++report.flagged_nondifferentiable;
        continue;
      }
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = name + "[" + std::to_string(i) + "]: analytic " + format_float(a) +
                       " vs numeric " + format_float(numeric);
      }
      if (rel > tol) ++report.failures;
    }
  }
  report.pass = report.failures == 0;
  return report;
}

}  // namespace pds
