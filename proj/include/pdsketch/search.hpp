#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "pdsketch/evaluator.hpp"
#include "pdsketch/quantize.hpp"
#include "pdsketch/relaxed.hpp"

namespace pds {

struct SearchLimits {
  int64_t max_nodes = 1000000;  // expansions
  double max_seconds = 1e18;
  double weight = 1.0;  // f = g + weight * h
};

struct SearchStats {
  int64_t expanded = 0;
  int64_t generated = 0;
  double wall_ms = 0;
};

enum class SearchStatus { Solved, Unsolvable, LimitExceeded };

struct PlanResult {
  SearchStatus status = SearchStatus::Unsolvable;
  std::vector<GroundedAction> plan;
  SearchStats stats;

  bool solved() const { return status == SearchStatus::Solved; }
  std::string plan_text() const {
    std::string out;
    for (const auto& a : plan) out += a.display + "\n";
    return out;
  }
};

using HeuristicFn = std::function<double(const FactoredState&)>;

// 0 when the state satisfies the goal, otherwise 1.
inline HeuristicFn blind_heuristic(const Runtime& rt, const Expr& goal) {
  return [&rt, goal](const FactoredState& s) {
    Tape tape;
    return eval_goal(tape, rt, s, goal) > 0.5 ? 0.0 : 1.0;
  };
}

// Best-first search on f = g + w*h over latent states with unit action costs.
// Duplicate detection hashes the quantized tables (1e-4 rounding without
// codebooks); ties break on lower h, then FIFO. The goal test runs on
// expansion with eval_goal > 0.5. The heuristic only guides: states it deems
// unreachable sort behind every finite-h state instead of being pruned, so a
// lossy discretization cannot cost completeness.
inline PlanResult astar(const Runtime& rt, const FactoredState& s0, const Expr& goal,
                        const HeuristicFn& heuristic, const SearchLimits& limits = {},
                        const CodebookSet* dedup_codebooks = nullptr) {
  const Domain& dom = rt.domain();
  auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  PlanResult result;
  std::vector<GroundedAction> actions = ground_actions(dom, *s0.universe);

  struct NodeRec {
    FactoredState state;
    int parent = -1;
    int action = -1;  // index into `actions`
    double g = 0, h = 0;
  };
  std::vector<NodeRec> nodes;

  struct OpenEntry {
    double f, h;
    int64_t seq;
    int node;
    bool operator>(const OpenEntry& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return seq > o.seq;
    }
  };
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<OpenEntry>> open;
  std::map<std::string, double> best_g;

  auto push = [&](NodeRec rec, int64_t& seq) {
    double h = heuristic(rec.state);
    rec.h = h;
    std::string key = dedup_key(dom, rec.state, dedup_codebooks);
    auto it = best_g.find(key);
    if (it != best_g.end() && it->second <= rec.g) return;
    best_g[key] = rec.g;
    nodes.push_back(std::move(rec));
    open.push({nodes.back().g + limits.weight * h, h, seq++, int(nodes.size()) - 1});
    ++result.stats.generated;
  };

  int64_t seq = 0;
  {
    NodeRec root;
    root.state = s0;
    root.g = 0;
    push(std::move(root), seq);
  }

  while (!open.empty()) {
    OpenEntry top = open.top();
    open.pop();
    // copy: pushing children may reallocate the node pool
    const FactoredState cur_state = nodes[size_t(top.node)].state;
    const double parent_g = nodes[size_t(top.node)].g;
    {
      std::string key = dedup_key(dom, cur_state, dedup_codebooks);
      auto it = best_g.find(key);
      if (it != best_g.end() && it->second < parent_g) continue;  // stale entry
    }

    if (result.stats.expanded >= limits.max_nodes || elapsed() > limits.max_seconds) {
      result.status = SearchStatus::LimitExceeded;
      result.stats.wall_ms = elapsed() * 1000;
      return result;
    }
    ++result.stats.expanded;

    Tape tape;
    Evaluator ev(tape, rt, cur_state);
    if (tape.scalar_value(eval_goal_node(ev, goal)) > 0.5) {
      // reconstruct
      std::vector<GroundedAction> plan;
      int cur = top.node;
      while (nodes[size_t(cur)].parent >= 0) {
        plan.push_back(actions[size_t(nodes[size_t(cur)].action)]);
        cur = nodes[size_t(cur)].parent;
      }
      std::reverse(plan.begin(), plan.end());
      result.status = SearchStatus::Solved;
      result.plan = std::move(plan);
      result.stats.wall_ms = elapsed() * 1000;
      return result;
    }

    int parent_idx = top.node;
    for (size_t ai = 0; ai < actions.size(); ++ai) {
      const ActionSchema& schema = dom.actions[size_t(actions[ai].schema_index)];
      bool applicable = true;
      if (!(schema.precondition.kind == ExprKind::And &&
            schema.precondition.children.empty())) {
        Binding b;
        for (size_t i = 0; i < schema.param_names.size(); ++i)
          b.push(schema.param_names[i], actions[ai].args[i]);
        applicable = tape.scalar_value(ev.eval_scalar(schema.precondition, b)) > 0.5;
      }
      if (!applicable) continue;
      FactoredState next = apply_action(ev, schema, actions[ai].args);
      NodeRec child;
      child.state = next.detached(tape);
      child.state.universe = cur_state.universe;
      child.parent = parent_idx;
      child.action = int(ai);
      child.g = parent_g + 1;
      push(std::move(child), seq);
    }
  }

  result.status = SearchStatus::Unsolvable;
  result.stats.wall_ms = elapsed() * 1000;
  return result;
}

// hFF over a compiled relaxed domain, as a search heuristic.
inline HeuristicFn hff_heuristic(const GroundedHeuristic& gh) {
  return [&gh](const FactoredState& s) { return double(gh(s)); };
}

}  // namespace pds
