#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pdsketch/dataset.hpp"
#include "pdsketch/evaluator.hpp"
#include "pdsketch/runtime.hpp"
#include "pdsketch/validate.hpp"

namespace pds {

class GoalParseError : public Error {
 public:
  explicit GoalParseError(const std::string& msg) : Error("goal: " + msg) {}
};

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 16;
  int epochs = 10;
  double lambda_goal = 1.0;
  double lambda_trans = 1.0;
  double lambda_look = 1.0;
  uint64_t seed = 0;
  std::string optimizer = "adam";  // "adam" | "sgd"
  double clip_norm = 10.0;
  double heldout_fraction = 0.1;
  // Epochs during which direct effect-gate slots stay frozen at their
  // positive initialization and the lookahead term stays off, so the gated
  // value networks receive clean gradient before the gates can collapse
  // toward "never fire".
  int gate_warmup_epochs = 5;

  void check() const {
    if (lambda_goal <= 0) throw ConfigError("lambda_goal must be positive");
    if (lambda_trans < 0 || lambda_look < 0) throw ConfigError("loss weights must be >= 0");
  }
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0;      // mean per-episode training loss
  double goal_acc = 0;  // held-out goal classification accuracy at 0.5
  double trans_l1 = 0;  // held-out mean per-entry transition L1
};

namespace detail {

inline const ActionSchema& schema_by_name(const Domain& dom, const std::string& name) {
  for (const auto& a : dom.actions)
    if (a.name == name) return a;
  throw EvalError("unknown action '" + name + "'");
}

inline std::vector<int> resolve_action_args(const Universe& u,
                                            const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const auto& n : names) {
    int idx = u.find(n);
    if (idx < 0) throw EvalError("unknown action argument object '" + n + "'");
    out.push_back(idx);
  }
  return out;
}

// Sum of |pred - next| over every input predicate entry.
inline NodeId transition_l1(Tape& tape, const Domain& dom, Evaluator& pred_ev,
                            const FactoredState& predicted, const FactoredState& observed,
                            int* entry_count = nullptr) {
  NodeId acc = tape.scalar(0.0);
  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    if (!dom.predicates[pid].is_input) continue;
    const StateTable* pt = predicted.table(int(pid));
    const StateTable* ot = observed.table(int(pid));
    if (!pt || !ot) continue;
    for (const auto& [args, entry] : *pt) {
      NodeId a = pred_ev.entry_node(entry);
      NodeId b = pred_ev.entry_node(ot->at(args));
      acc = tape.add(acc, tape.l1(a, b));
      if (entry_count) ++*entry_count;
    }
  }
  return acc;
}

}  // namespace detail

// The training objective on one episode:
//   lambda_goal * sum_i BCE(eval(g, E(s_i)), succ_i)
// + lambda_trans * sum_i L1(T(E(s_i), a_i), E(s_{i+1}))
// + lambda_look * sum_i BCE(eval(g, T(E(s_i), a_i)), succ_{i+1})
// The lookahead term scores the predicted next state against the next
// success flag, coupling the transition model and the goal evaluator.
inline NodeId episode_loss(Tape& tape, const Runtime& rt, const Episode& ep,
                           const TrainConfig& cfg) {
  const Domain& dom = rt.domain();
  Expr goal;
  try {
    goal = validate_goal(dom, ep.goal);
  } catch (const Error& e) {
    throw GoalParseError(e.what());
  }

  std::vector<FactoredState> encoded;
  for (const auto& raw : ep.states) encoded.push_back(rt.encode_state(tape, raw));

  NodeId loss = tape.scalar(0.0);
  std::vector<Evaluator> evals;
  evals.reserve(encoded.size());
  for (const auto& s : encoded) evals.emplace_back(tape, rt, s);

  if (cfg.lambda_goal > 0) {
    NodeId acc = tape.scalar(0.0);
    for (size_t i = 0; i < encoded.size(); ++i) {
      NodeId score = eval_goal_node(evals[i], goal);
      acc = tape.add(acc, tape.bce(score, tape.scalar(double(ep.succ[i]))));
    }
    loss = tape.add(loss, tape.scale(acc, cfg.lambda_goal));
  }

  if ((cfg.lambda_trans > 0 || cfg.lambda_look > 0) && !ep.actions.empty()) {
    NodeId trans_acc = tape.scalar(0.0);
    NodeId look_acc = tape.scalar(0.0);
    for (size_t i = 0; i < ep.actions.size(); ++i) {
      const ActionSchema& schema = detail::schema_by_name(dom, ep.actions[i].first);
      std::vector<int> args = detail::resolve_action_args(ep.universe, ep.actions[i].second);
      FactoredState predicted = apply_action(evals[i], schema, args);
      if (cfg.lambda_trans > 0) {
        Evaluator pe(tape, rt, predicted);
        trans_acc = tape.add(trans_acc,
                             detail::transition_l1(tape, dom, pe, predicted, encoded[i + 1]));
      }
      if (cfg.lambda_look > 0) {
        Evaluator pe(tape, rt, predicted);
        NodeId score = eval_goal_node(pe, goal);
        look_acc =
            tape.add(look_acc, tape.bce(score, tape.scalar(double(ep.succ[i + 1]))));
      }
    }
    if (cfg.lambda_trans > 0) loss = tape.add(loss, tape.scale(trans_acc, cfg.lambda_trans));
    if (cfg.lambda_look > 0) loss = tape.add(loss, tape.scale(look_acc, cfg.lambda_look));
  }
  return loss;
}

// --- optimization --------------------------------------------------------------

class Optimizer {
 public:
  Optimizer(std::string kind, double lr) : kind_(std::move(kind)), lr_(lr) {
    if (kind_ != "adam" && kind_ != "sgd") throw ConfigError("unknown optimizer " + kind_);
  }

  void step(ParamStore& store) {
    ++t_;
    for (auto& [name, tensor] : store.tensors) {
      if (kind_ == "sgd") {
        for (size_t i = 0; i < tensor.value.size(); ++i)
          tensor.value[i] -= float(lr_ * double(tensor.grad[i]));
        continue;
      }
      auto& m = m_[name];
      auto& v = v_[name];
      m.resize(tensor.value.size(), 0.0);
      v.resize(tensor.value.size(), 0.0);
      double bc1 = 1.0 - std::pow(kBeta1, double(t_));
      double bc2 = 1.0 - std::pow(kBeta2, double(t_));
      for (size_t i = 0; i < tensor.value.size(); ++i) {
        double g = double(tensor.grad[i]);
        m[i] = kBeta1 * m[i] + (1 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1 - kBeta2) * g * g;
        double update = lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
        tensor.value[i] -= float(update);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::string kind_;
  double lr_;
  int64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

namespace detail {

inline void collect_gate_prefixes(const Expr& e, std::set<std::string>& out) {
  if (e.kind == ExprKind::When && e.children[0].kind == ExprKind::SlotCall)
    out.insert(e.children[0].name + "/");
  for (const auto& c : e.children) collect_gate_prefixes(c, out);
}

inline void zero_gate_grads(ParamStore& store, const std::set<std::string>& prefixes) {
  for (auto& [name, t] : store.tensors)
    for (const auto& p : prefixes)
      if (name.compare(0, p.size(), p) == 0) {
        t.zero_grad();
        break;
      }
}

}  // namespace detail

inline void clip_gradients(ParamStore& store, double max_norm) {
  if (max_norm <= 0) return;
  double sq = 0;
  for (const auto& [name, t] : store.tensors)
    for (float g : t.grad) sq += double(g) * double(g);
  double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  float scale = float(max_norm / norm);
  for (auto& [name, t] : store.tensors)
    for (auto& g : t.grad) g *= scale;
}

// --- evaluation helpers ----------------------------------------------------------

struct EvalStats {
  int goal_correct = 0, goal_total = 0;
  double l1_sum = 0;
  int l1_entries = 0;

  double goal_acc() const { return goal_total ? double(goal_correct) / goal_total : 0.0; }
  double mean_l1() const { return l1_entries ? l1_sum / l1_entries : 0.0; }
};

inline void evaluate_episode(const Runtime& rt, const Episode& ep, EvalStats& stats) {
  const Domain& dom = rt.domain();
  Tape tape;
  Expr goal = validate_goal(dom, ep.goal);
  std::vector<FactoredState> encoded;
  for (const auto& raw : ep.states) encoded.push_back(rt.encode_state(tape, raw));
  for (size_t i = 0; i < encoded.size(); ++i) {
    Evaluator ev(tape, rt, encoded[i]);
    double score = tape.scalar_value(eval_goal_node(ev, goal));
    stats.goal_correct += int((score > 0.5) == (ep.succ[i] == 1));
    ++stats.goal_total;
  }
  for (size_t i = 0; i < ep.actions.size(); ++i) {
    Evaluator ev(tape, rt, encoded[i]);
    const ActionSchema& schema = detail::schema_by_name(dom, ep.actions[i].first);
    std::vector<int> args = detail::resolve_action_args(ep.universe, ep.actions[i].second);
    FactoredState predicted = apply_action(ev, schema, args);
    Evaluator pe(tape, rt, predicted);
    int entries = 0;
    NodeId l1 = detail::transition_l1(tape, dom, pe, predicted, encoded[i + 1], &entries);
    stats.l1_sum += tape.scalar_value(l1);
    stats.l1_entries += entries;
  }
}

// Deterministic mini-batch training. The held-out split (last fraction of a
// seeded shuffle) feeds the per-epoch metrics; gradients within a batch are
// flushed in ascending episode order.
inline std::vector<EpochMetrics> train(const Runtime& rt, ParamStore& params,
                                       const std::vector<Episode>& dataset,
                                       const TrainConfig& cfg) {
  cfg.check();
  if (dataset.empty()) throw EvalError("empty dataset");

  Rng rng(cfg.seed);
  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  size_t heldout = size_t(double(dataset.size()) * cfg.heldout_fraction);
  std::vector<size_t> train_idx(order.begin(), order.end() - long(heldout));
  std::vector<size_t> held_idx(order.end() - long(heldout), order.end());
  if (train_idx.empty()) {
    train_idx = held_idx;  // tiny datasets train and evaluate on everything
  }
  if (held_idx.empty()) held_idx = train_idx;

  std::set<std::string> gate_prefixes;
  for (const auto& a : rt.domain().actions)
    detail::collect_gate_prefixes(a.effect, gate_prefixes);

  std::vector<EpochMetrics> history;
  Optimizer opt(cfg.optimizer, cfg.lr);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = train_idx.size(); i > 1; --i)
      std::swap(train_idx[i - 1], train_idx[rng.below(i)]);

    double loss_sum = 0;
    size_t done = 0;
    while (done < train_idx.size()) {
      size_t batch_end = std::min(done + size_t(cfg.batch_size), train_idx.size());
      std::vector<size_t> batch(train_idx.begin() + long(done),
                                train_idx.begin() + long(batch_end));
      std::sort(batch.begin(), batch.end(), [&](size_t a, size_t b) {
        return dataset[a].id < dataset[b].id;
      });
      bool warmup = epoch < cfg.gate_warmup_epochs;
      TrainConfig step_cfg = cfg;
      if (warmup) step_cfg.lambda_look = 0;
      params.zero_grads();
      for (size_t idx : batch) {
        Tape tape;
        NodeId loss = episode_loss(tape, rt, dataset[idx], step_cfg);
        loss_sum += tape.scalar_value(loss);
        tape.backward(loss);
        tape.flush_param_grads();
      }
      if (warmup) detail::zero_gate_grads(params, gate_prefixes);
      clip_gradients(params, cfg.clip_norm);
      opt.step(params);
      done = batch_end;
    }

    EvalStats stats;
    for (size_t idx : held_idx) evaluate_episode(rt, dataset[idx], stats);
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / double(train_idx.size());
    m.goal_acc = stats.goal_acc();
    m.trans_l1 = stats.mean_l1();
    history.push_back(m);
  }
  return history;
}

inline std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,loss,goal_acc,trans_l1\n";
  for (const auto& m : history)
    out += std::to_string(m.epoch) + "," + format_float(m.loss) + "," +
           format_float(m.goal_acc) + "," + format_float(m.trans_l1) + "\n";
  return out;
}

}  // namespace pds
