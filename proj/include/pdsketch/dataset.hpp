#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdsketch/domain.hpp"
#include "pdsketch/gridworld.hpp"
#include "pdsketch/parser.hpp"
#include "pdsketch/state.hpp"

namespace pds {

// One trajectory: raw observations, executed actions, a goal, and per-state
// success flags. |states| == |succ| == |actions| + 1; the universe is
// constant across the episode.
struct Episode {
  int64_t id = 0;
  Universe universe;
  std::vector<RawState> states;
  std::vector<std::pair<std::string, std::vector<std::string>>> actions;
  std::string goal_text;
  Expr goal;
  std::vector<int> succ;
};

namespace detail {

inline nlohmann::json episode_to_json(const Episode& ep, const Domain& dom) {
  nlohmann::json j;
  j["id"] = ep.id;
  j["goal"] = ep.goal_text;
  j["succ"] = ep.succ;
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& [name, args] : ep.actions) {
    nlohmann::json a;
    a["name"] = name;
    a["args"] = args;
    actions.push_back(a);
  }
  j["actions"] = actions;
  nlohmann::json states = nlohmann::json::array();
  for (const auto& raw : ep.states) {
    nlohmann::json objects = nlohmann::json::array();
    for (int i = 0; i < ep.universe.size(); ++i) {
      nlohmann::json obj;
      obj["name"] = ep.universe.name_of(i);
      obj["type"] = dom.object_types[size_t(ep.universe.type_of(i))];
      for (const auto& [pred, table] : raw.values) {
        auto it = table.find({i});
        if (it != table.end()) obj[pred] = it->second;
      }
      objects.push_back(obj);
    }
    nlohmann::json s;
    s["objects"] = objects;
    states.push_back(s);
  }
  j["states"] = states;
  return j;
}

}  // namespace detail

inline void save_dataset(const std::string& path, const std::vector<Episode>& episodes,
                         const Domain& dom) {
  std::string out;
  for (const auto& ep : episodes) {
    out += detail::episode_to_json(ep, dom).dump();
    out += "\n";
  }
  write_file(path, out);
}

// Line-delimited JSON episodes. Object records may carry predicate keys the
// domain does not declare (datasets are shared across domain variants); those
// are skipped. Missing values for declared input predicates are schema
// errors, reported with the line number and episode id.
inline std::vector<Episode> load_dataset(const std::string& path, const Domain& dom) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Episode> episodes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw SchemaError("line " + std::to_string(lineno) + ": " + why);
    };
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("invalid JSON: ") + e.what());
    }

    Episode ep;
    ep.id = j.value("id", int64_t(lineno));
    std::string ep_tag = "episode " + std::to_string(ep.id);
    if (!j.contains("states") || !j.contains("succ") || !j.contains("actions") ||
        !j.contains("goal"))
      fail(ep_tag + ": missing one of states/actions/goal/succ");

    ep.goal_text = j["goal"].get<std::string>();
    try {
      ep.goal = parse_expr_text(ep.goal_text);
    } catch (const Error& e) {
      fail(ep_tag + ": goal does not parse: " + e.what());
    }
    for (const auto& f : j["succ"]) ep.succ.push_back(f.get<int>());

    for (const auto& a : j["actions"]) {
      std::vector<std::string> args;
      for (const auto& s : a["args"]) args.push_back(s.get<std::string>());
      ep.actions.push_back({a["name"].get<std::string>(), args});
    }

    bool first_state = true;
    for (const auto& js : j["states"]) {
      RawState raw;
      if (!js.contains("objects")) fail(ep_tag + ": state missing objects");
      int idx = 0;
      for (const auto& obj : js["objects"]) {
        std::string name = obj["name"].get<std::string>();
        std::string type = obj["type"].get<std::string>();
        auto tid = dom.object_type_ids.find(type);
        if (tid == dom.object_type_ids.end())
          fail(ep_tag + ": unknown object type '" + type + "'");
        if (first_state) {
          ep.universe.add(name, tid->second);
        } else {
          if (idx >= ep.universe.size() || ep.universe.name_of(idx) != name)
            fail(ep_tag + ": universe changes across states");
        }
        for (auto it = obj.begin(); it != obj.end(); ++it) {
          if (it.key() == "name" || it.key() == "type") continue;
          const Predicate* p = dom.find_pred(it.key());
          if (!p || !p->is_input) continue;  // other domain variants' keys
          std::vector<float> vals;
          for (const auto& v : it.value()) vals.push_back(v.get<float>());
          raw.values[it.key()][{idx}] = std::move(vals);
        }
        ++idx;
      }
      raw.universe = ep.universe;
      ep.states.push_back(std::move(raw));
      first_state = false;
    }

    if (ep.states.size() != ep.succ.size())
      fail(ep_tag + ": |states| != |succ| (" + std::to_string(ep.states.size()) + " vs " +
           std::to_string(ep.succ.size()) + ")");
    if (ep.states.size() != ep.actions.size() + 1)
      fail(ep_tag + ": |states| != |actions| + 1");

    // declared unary input predicates must be present for every object
    for (const auto& p : dom.predicates) {
      if (!p.is_input || p.arity() != 1) continue;
      for (const auto& raw : ep.states) {
        for (const auto& args : all_arg_tuples(dom, ep.universe, p)) {
          auto t = raw.values.find(p.name);
          if (t == raw.values.end() || !t->second.count(args))
            fail(ep_tag + ": missing value for input predicate '" + p.name + "'");
        }
      }
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

// Converts a simulator trace into a dataset episode.
inline Episode episode_from_grid(const Domain& dom, const grid::GridEpisode& gep, int64_t id) {
  Episode ep;
  ep.id = id;
  ep.universe = grid::make_universe(dom, gep.states[0]);
  for (const auto& s : gep.states) ep.states.push_back(grid::observe(s, ep.universe));
  for (int a : gep.actions)
    ep.actions.push_back({grid::action_name(a), {"agent"}});
  ep.goal_text = gep.goal.text();
  ep.goal = parse_expr_text(ep.goal_text);
  ep.succ = gep.succ;
  return ep;
}

}  // namespace pds
