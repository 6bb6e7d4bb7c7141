#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pdsketch/common.hpp"
#include "pdsketch/state.hpp"

namespace pds::grid {

constexpr int kNumColors = 6;
inline const char* color_name(int c) {
  static const char* names[] = {"red", "green", "blue", "purple", "yellow", "grey"};
  return names[c];
}

enum class Shape { Key = 0, Ball = 1, Box = 2, Door = 3 };
constexpr int kNumShapes = 4;
inline const char* shape_name(Shape s) {
  static const char* names[] = {"key", "ball", "box", "door"};
  return names[int(s)];
}

enum Action { kLturn = 0, kRturn, kForward, kPickup, kToggle, kNumActions };
inline const char* action_name(int a) {
  static const char* names[] = {"lturn", "rturn", "forward", "pickup", "toggle"};
  return names[a];
}

struct GridConfig {
  int size = 7;  // interior cells per side; walls surround them
  int n_doors = 4;
  int n_objects = 4;
  uint64_t seed = 0;
};

struct GridItem {
  int x = 0, y = 0;  // (-1, -1) while held
  int color = 0;
  Shape shape = Shape::Key;
  bool open = false;  // doors only

  bool held() const { return x == -1 && y == -1; }
};

// Directions: 0=E, 1=S, 2=W, 3=N (x right, y down).
inline int dir_dx(int d) { return d == 0 ? 1 : d == 2 ? -1 : 0; }
inline int dir_dy(int d) { return d == 1 ? 1 : d == 3 ? -1 : 0; }

struct GridState {
  int size = 7;
  int ax = 0, ay = 0, dir = 0;
  std::vector<GridItem> items;  // doors first, then movable objects

  std::string key() const {
    std::string k = std::to_string(ax) + "," + std::to_string(ay) + "," + std::to_string(dir);
    for (const auto& it : items)
      k += ";" + std::to_string(it.x) + "," + std::to_string(it.y) + "," +
           std::to_string(int(it.open));
    return k;
  }
  bool operator==(const GridState& o) const { return key() == o.key(); }
};

struct GridGoal {
  enum class Verb { Goto, Pickup, Open };
  Verb verb = Verb::Goto;
  int color = 0;
  Shape shape = Shape::Key;

  std::string text() const {
    std::string color_pred = std::string("is-") + color_name(color);
    std::string shape_pred = std::string("is-") + shape_name(shape);
    switch (verb) {
      case Verb::Goto:
        return "(exists (?o - item) (and (robot-facing agent ?o) (" + color_pred +
               " ?o) (" + shape_pred + " ?o)))";
      case Verb::Pickup:
        return "(exists (?o - item) (and (robot-holding agent ?o) (" + color_pred +
               " ?o) (" + shape_pred + " ?o)))";
      case Verb::Open:
        return "(exists (?o - item) (and (" + color_pred + " ?o) (is-door ?o) (is-open ?o)))";
    }
    return "";
  }
};

namespace detail {

inline bool in_interior(const GridState& s, int x, int y) {
  return x >= 1 && x <= s.size && y >= 1 && y <= s.size;
}
inline bool on_border(const GridState& s, int x, int y) {
  bool edge = x == 0 || x == s.size + 1 || y == 0 || y == s.size + 1;
  bool corner = (x == 0 || x == s.size + 1) && (y == 0 || y == s.size + 1);
  return edge && !corner;
}

inline int item_at(const GridState& s, int x, int y) {
  for (size_t i = 0; i < s.items.size(); ++i)
    if (!s.items[i].held() && s.items[i].x == x && s.items[i].y == y) return int(i);
  return -1;
}

// Walls and every item block movement, except open doors.
inline bool blocked(const GridState& s, int x, int y) {
  int idx = item_at(s, x, y);
  if (idx >= 0) {
    const GridItem& it = s.items[size_t(idx)];
    return !(it.shape == Shape::Door && it.open);
  }
  return !in_interior(s, x, y);
}

}  // namespace detail

// Deterministic ground-truth dynamics; inapplicable actions are no-ops.
inline GridState step(const GridState& s, int action) {
  GridState n = s;
  switch (action) {
    case kLturn:
      n.dir = (s.dir + 3) % 4;
      break;
    case kRturn:
      n.dir = (s.dir + 1) % 4;
      break;
    case kForward: {
      int tx = s.ax + dir_dx(s.dir), ty = s.ay + dir_dy(s.dir);
      if (!detail::blocked(s, tx, ty)) {
        n.ax = tx;
        n.ay = ty;
      }
      break;
    }
    case kPickup: {
      bool holding = false;
      for (const auto& it : s.items) holding = holding || it.held();
      if (holding) break;
      int idx = detail::item_at(s, s.ax + dir_dx(s.dir), s.ay + dir_dy(s.dir));
      if (idx >= 0 && s.items[size_t(idx)].shape != Shape::Door) {
        n.items[size_t(idx)].x = -1;
        n.items[size_t(idx)].y = -1;
      }
      break;
    }
    case kToggle: {
      int idx = detail::item_at(s, s.ax + dir_dx(s.dir), s.ay + dir_dy(s.dir));
      if (idx >= 0 && s.items[size_t(idx)].shape == Shape::Door)
        n.items[size_t(idx)].open = !s.items[size_t(idx)].open;
      break;
    }
    default:
      throw EvalError("unknown grid action " + std::to_string(action));
  }
  return n;
}

inline int eval_success(const GridState& s, const GridGoal& g) {
  for (const auto& it : s.items) {
    if (it.color != g.color || it.shape != g.shape) continue;
    switch (g.verb) {
      case GridGoal::Verb::Goto:
        if (!it.held() && it.x == s.ax + dir_dx(s.dir) && it.y == s.ay + dir_dy(s.dir))
          return 1;
        break;
      case GridGoal::Verb::Pickup:
        if (it.held()) return 1;
        break;
      case GridGoal::Verb::Open:
        if (it.open) return 1;
        break;
    }
  }
  return 0;
}

// Randomized solvable layout: agent at the center, doors on the wall ring,
// objects on interior cells.
inline GridState reset(const GridConfig& cfg, Rng& rng) {
  int interior = cfg.size * cfg.size - 1;  // minus the agent cell
  if (cfg.n_objects > interior) throw ConfigError("grid too small for the object count");
  int border = 4 * cfg.size;
  if (cfg.n_doors > border) throw ConfigError("grid too small for the door count");

  GridState s;
  s.size = cfg.size;
  s.ax = s.ay = (cfg.size + 2) / 2;
  s.dir = int(rng.below(4));

  std::vector<std::pair<int, int>> border_cells;
  for (int x = 1; x <= cfg.size; ++x) {
    border_cells.push_back({x, 0});
    border_cells.push_back({x, cfg.size + 1});
  }
  for (int y = 1; y <= cfg.size; ++y) {
    border_cells.push_back({0, y});
    border_cells.push_back({cfg.size + 1, y});
  }
  for (int i = 0; i < cfg.n_doors; ++i) {
    size_t pick = rng.below(border_cells.size());
    GridItem door;
    door.x = border_cells[pick].first;
    door.y = border_cells[pick].second;
    border_cells.erase(border_cells.begin() + long(pick));
    door.color = int(rng.below(kNumColors));
    door.shape = Shape::Door;
    door.open = false;
    s.items.push_back(door);
  }

  std::vector<std::pair<int, int>> interior_cells;
  for (int x = 1; x <= cfg.size; ++x)
    for (int y = 1; y <= cfg.size; ++y)
      if (!(x == s.ax && y == s.ay)) interior_cells.push_back({x, y});
  for (int i = 0; i < cfg.n_objects; ++i) {
    size_t pick = rng.below(interior_cells.size());
    GridItem obj;
    obj.x = interior_cells[pick].first;
    obj.y = interior_cells[pick].second;
    interior_cells.erase(interior_cells.begin() + long(pick));
    obj.color = int(rng.below(kNumColors));
    obj.shape = Shape(rng.below(3));  // key, ball, box
    s.items.push_back(obj);
  }
  return s;
}

// Uniform over (verb, color, shape) combos achievable in this layout.
inline GridGoal sample_goal(const GridState& s, Rng& rng) {
  std::vector<GridGoal> combos;
  std::map<std::pair<int, int>, bool> seen;
  for (const auto& it : s.items) {
    auto key = std::make_pair(it.color, int(it.shape));
    if (seen[key]) continue;
    seen[key] = true;
    combos.push_back({GridGoal::Verb::Goto, it.color, it.shape});
    if (it.shape != Shape::Door)
      combos.push_back({GridGoal::Verb::Pickup, it.color, it.shape});
    else
      combos.push_back({GridGoal::Verb::Open, it.color, it.shape});
  }
  return combos[rng.below(combos.size())];
}

// Breadth-first search over ground-truth dynamics; optimal action sequence or
// nullopt within the depth bound.
inline std::optional<std::vector<int>> bfs_solve(const GridState& s0, const GridGoal& goal,
                                                 int max_depth = 64) {
  if (eval_success(s0, goal)) return std::vector<int>{};
  std::map<std::string, std::pair<std::string, int>> parent;  // key -> (prev key, action)
  std::deque<std::pair<GridState, int>> queue;
  queue.push_back({s0, 0});
  parent[s0.key()] = {"", -1};
  while (!queue.empty()) {
    auto [s, depth] = queue.front();
    queue.pop_front();
    if (depth >= max_depth) continue;
    for (int a = 0; a < kNumActions; ++a) {
      GridState n = step(s, a);
      std::string k = n.key();
      if (parent.count(k)) continue;
      parent[k] = {s.key(), a};
      if (eval_success(n, goal)) {
        std::vector<int> plan;
        std::string cur = k;
        while (parent[cur].second >= 0) {
          plan.push_back(parent[cur].second);
          cur = parent[cur].first;
        }
        std::reverse(plan.begin(), plan.end());
        return plan;
      }
      queue.push_back({n, depth + 1});
    }
  }
  return std::nullopt;
}

// --- observations ---------------------------------------------------------

// Raw observation keys emitted for every state. The factored predicates feed
// the structured domains; the concatenated robot-state/item-state vectors
// feed the structure-free one.
inline RawState observe(const GridState& s, const Universe& universe) {
  RawState raw;
  raw.universe = universe;
  raw.values["robot-pose"][{0}] = {float(s.ax), float(s.ay)};
  raw.values["robot-direction"][{0}] = {float(s.dir)};
  std::vector<float> rstate = {float(s.ax), float(s.ay), 0, 0, 0, 0};
  rstate[size_t(2 + s.dir)] = 1.f;
  raw.values["robot-state"][{0}] = rstate;

  for (size_t i = 0; i < s.items.size(); ++i) {
    const GridItem& it = s.items[i];
    int obj = int(i) + 1;
    raw.values["item-pose"][{obj}] = {float(it.x), float(it.y)};
    std::vector<float> image(11, 0.f);
    image[size_t(it.color)] = 1.f;
    image[size_t(6 + int(it.shape))] = 1.f;
    image[10] = it.open ? 1.f : 0.f;
    raw.values["item-image"][{obj}] = image;
    std::vector<float> istate = {float(it.x), float(it.y)};
    istate.insert(istate.end(), image.begin(), image.end());
    raw.values["item-state"][{obj}] = istate;
  }
  return raw;
}

// Universe layout shared by every grid episode: the agent plus one object per
// item, doors first.
inline Universe make_universe(const Domain& dom, const GridState& s) {
  Universe u;
  u.add("agent", dom.object_type_ids.at("robot"));
  for (size_t i = 0; i < s.items.size(); ++i)
    u.add("item" + std::to_string(i), dom.object_type_ids.at("item"));
  return u;
}

// --- demonstrations ---------------------------------------------------------

struct GridEpisode {
  GridGoal goal;
  std::vector<GridState> states;  // length = actions + 1
  std::vector<int> actions;
  std::vector<int> succ;
};

class Unsolvable : public Error {
 public:
  Unsolvable() : Error("grid task is unsolvable") {}
};

// success=true: optimal action sequence from grid search. success=false:
// approach a wrong object, then five steps of random walk. succ flags are
// computed honestly from eval_success either way.
inline GridEpisode generate_demo(const GridConfig& cfg, Rng& rng, bool want_success,
                                 int max_tries = 50) {
  for (int attempt = 0; attempt < max_tries; ++attempt) {
    GridState s0 = reset(cfg, rng);
    GridGoal goal = sample_goal(s0, rng);
    GridEpisode ep;
    ep.goal = goal;
    ep.states.push_back(s0);
    if (want_success) {
      auto plan = bfs_solve(s0, goal);
      if (!plan) continue;
      for (int a : *plan) {
        ep.actions.push_back(a);
        ep.states.push_back(step(ep.states.back(), a));
      }
    } else {
      std::vector<size_t> wrong;
      for (size_t i = 0; i < s0.items.size(); ++i)
        if (s0.items[i].color != goal.color || s0.items[i].shape != goal.shape)
          wrong.push_back(i);
      if (wrong.empty()) continue;
      size_t target = wrong[rng.below(wrong.size())];
      GridGoal approach{GridGoal::Verb::Goto, s0.items[target].color,
                        s0.items[target].shape};
      auto plan = bfs_solve(s0, approach);
      if (!plan) continue;
      for (int a : *plan) {
        ep.actions.push_back(a);
        ep.states.push_back(step(ep.states.back(), a));
      }
      for (int k = 0; k < 5; ++k) {
        int a = int(rng.below(kNumActions));
        ep.actions.push_back(a);
        ep.states.push_back(step(ep.states.back(), a));
      }
    }
    for (const auto& s : ep.states) ep.succ.push_back(eval_success(s, goal));
    return ep;
  }
  throw Unsolvable();
}

// --- rendering ----------------------------------------------------------------

// Glyphs: agent ">v<^" by direction, K/O/B for key/ball/box, D/d for
// closed/open doors, '#' walls, '.' floor.
inline std::string render(const GridState& s) {
  int n = s.size + 2;
  std::vector<std::string> rows(size_t(n), std::string(size_t(n), '#'));
  for (int y = 1; y <= s.size; ++y)
    for (int x = 1; x <= s.size; ++x) rows[size_t(y)][size_t(x)] = '.';
  for (const auto& it : s.items) {
    if (it.held()) continue;
    char g = it.shape == Shape::Key    ? 'K'
             : it.shape == Shape::Ball ? 'O'
             : it.shape == Shape::Box  ? 'B'
                                       : (it.open ? 'd' : 'D');
    rows[size_t(it.y)][size_t(it.x)] = g;
  }
  rows[size_t(s.ay)][size_t(s.ax)] = ">v<^"[size_t(s.dir)];
  std::string out;
  for (const auto& r : rows) out += r + "\n";
  for (size_t i = 0; i < s.items.size(); ++i) {
    const auto& it = s.items[i];
    out += "item" + std::to_string(i) + ": " + color_name(it.color) + " " +
           shape_name(it.shape) + (it.held() ? " (held)" : "") +
           (it.shape == Shape::Door ? (it.open ? " (open)" : " (closed)") : "") + "\n";
  }
  return out;
}

}  // namespace pds::grid
