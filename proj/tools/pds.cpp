// pds: command-line driver for the PDSketch toolkit.
//
// Subcommands: validate, gen-data, train, compile, plan, bench.
// Exit codes: 0 ok, 1 input error, 2 limit exceeded, 3 unsolvable.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

#include "pdsketch/compile.hpp"
#include "pdsketch/dataset.hpp"
#include "pdsketch/desugar.hpp"
#include "pdsketch/gridworld.hpp"
#include "pdsketch/params_io.hpp"
#include "pdsketch/parser.hpp"
#include "pdsketch/relaxed.hpp"
#include "pdsketch/search.hpp"
#include "pdsketch/slots.hpp"
#include "pdsketch/trainer.hpp"
#include "pdsketch/validate.hpp"

using namespace pds;

namespace {

struct Manifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_ms = 0;

  void write(const std::string& out_path) const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    auto files = [&](const std::vector<std::string>& paths) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& p : paths) {
        nlohmann::json f;
        f["path"] = p;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx",
                      (unsigned long long)fnv1a64(read_file(p)));
        f["fnv1a64"] = buf;
        arr.push_back(f);
      }
      return arr;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    j["wall_ms"] = wall_ms;
    write_file(out_path + ".manifest.json", j.dump(2) + "\n");
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     start)
        .count();
  }
};

Domain load_domain_file(const std::string& path) {
  return validate(desugar(parse_domain(read_file(path))));
}

ArchConfig load_arch(const std::string& path) {
  if (path.empty()) return ArchConfig{};
  return parse_arch_config(read_file(path));
}

// minimal type context for exporting grid observations
Domain grid_export_domain() {
  return validate(desugar(
      parse_domain("(define domain (domain grid-export) (:types robot item - object))")));
}

struct LoadedModel {
  Domain domain;
  ArchConfig arch;
  std::unique_ptr<Runtime> rt;
  ParamStore params;

  LoadedModel(const std::string& domain_path, const std::string& arch_path,
              const std::string& params_path) {
    domain = load_domain_file(domain_path);
    arch = load_arch(arch_path);
    rt = std::make_unique<Runtime>(domain, arch.encoding);
    instantiate(*rt, params, arch);
    if (!params_path.empty()) load_params_into(params, params_path);
  }
};

int run_validate(const std::string& domain_path) {
  DomainAST ast = parse_domain(read_file(domain_path));
  Domain dom = validate(desugar(ast));
  Runtime rt(dom);
  std::cout << "domain " << dom.name << ": " << dom.predicates.size() << " predicates ("
            << dom.derived.size() << " derived), " << dom.actions.size() << " actions\n";
  std::cout << "slots:\n";
  for (const auto& [canonical, sig] : dom.slots)
    std::cout << "  " << canonical << " : " << sig.str() << "\n";
  auto unbound = rt.check_complete();
  std::cout << unbound.size() << " unbound slot(s)\n";
  return 0;
}

grid::GridConfig grid_config_from(int size, int doors, int objects, uint64_t seed) {
  grid::GridConfig cfg;
  cfg.size = size;
  cfg.n_doors = doors;
  cfg.n_objects = objects;
  cfg.seed = seed;
  return cfg;
}

int run_gen_data(const grid::GridConfig& cfg, const std::string& out, int n_success,
                 int n_fail, Manifest& manifest) {
  Domain dom = grid_export_domain();
  Rng rng(cfg.seed);
  std::vector<Episode> episodes;
  int64_t id = 0;
  for (int i = 0; i < n_success; ++i)
    episodes.push_back(episode_from_grid(dom, grid::generate_demo(cfg, rng, true), id++));
  for (int i = 0; i < n_fail; ++i)
    episodes.push_back(episode_from_grid(dom, grid::generate_demo(cfg, rng, false), id++));
  save_dataset(out, episodes, dom);
  manifest.outputs.push_back(out);
  std::cout << "wrote " << episodes.size() << " episodes to " << out << "\n";
  return 0;
}

int run_train(const std::string& domain_path, const std::string& arch_path,
              const std::string& dataset_path, const std::string& resume_path,
              const std::string& out, const std::string& metrics_path, TrainConfig tc,
              Manifest& manifest) {
  LoadedModel model(domain_path, arch_path, resume_path);
  auto episodes = load_dataset(dataset_path, model.domain);
  auto history = train(*model.rt, model.params, episodes, tc);
  save_params(model.params, out);
  std::string mpath = metrics_path.empty() ? out + ".metrics.csv" : metrics_path;
  write_file(mpath, metrics_csv(history));
  manifest.inputs.push_back(dataset_path);
  manifest.outputs.push_back(out);
  manifest.outputs.push_back(mpath);
  if (!history.empty()) {
    const auto& last = history.back();
    std::cout << "final epoch " << last.epoch << ": loss " << format_float(last.loss)
              << ", goal_acc " << format_float(last.goal_acc) << ", trans_l1 "
              << format_float(last.trans_l1) << "\n";
  }
  return 0;
}

int run_compile(const std::string& domain_path, const std::string& arch_path,
                const std::string& params_path, const std::string& dataset_path,
                const std::string& mode, const std::string& out, AoConfig ao_cfg,
                Manifest& manifest) {
  LoadedModel model(domain_path, arch_path, params_path);
  CompiledDomain cd;
  AoReport report;
  if (mode == "opt") {
    cd = compile_opt(model.domain);
  } else {
    auto episodes = load_dataset(dataset_path, model.domain);
    cd = compile_ao_from_data(*model.rt, episodes, ao_cfg, &report);
    manifest.inputs.push_back(dataset_path);
  }
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  write_file(out, compiled_to_text(model.domain, cd));
  manifest.outputs.push_back(out);
  std::cout << "wrote " << mode << " compilation to " << out << "\n";
  return 0;
}

struct TaskSetup {
  grid::GridState sim;
  grid::GridGoal grid_goal;
  Universe universe;
  RawState raw;
  Expr goal;
  std::string goal_text;
};

TaskSetup make_grid_task(const Domain& dom, const grid::GridConfig& cfg, uint64_t task_seed,
                         const std::string& goal_text) {
  TaskSetup t;
  Rng rng(task_seed);
  t.sim = grid::reset(cfg, rng);
  t.grid_goal = grid::sample_goal(t.sim, rng);
  t.goal_text = goal_text.empty() ? t.grid_goal.text() : goal_text;
  t.universe = grid::make_universe(dom, t.sim);
  t.raw = grid::observe(t.sim, t.universe);
  t.goal = validate_goal(dom, parse_expr_text(t.goal_text));
  return t;
}

// Task-independent heuristic artifacts: compiled once, grounded per task.
struct HeuristicKit {
  LoadedModel* model = nullptr;
  std::map<std::string, CompiledDomain> compiled;  // per heuristic kind
  std::unique_ptr<CodebookSet> dedup;              // quantized duplicate detection

  void prepare(const std::vector<std::string>& kinds, LoadedModel& m,
               const std::string& dataset_path, const AoConfig& ao_cfg) {
    model = &m;
    std::vector<Episode> episodes;
    bool loaded = false;
    auto need_data = [&]() -> std::vector<Episode>& {
      if (!loaded) {
        episodes = load_dataset(dataset_path, m.domain);
        loaded = true;
      }
      return episodes;
    };
    for (const auto& kind : kinds) {
      if (kind == "hff-opt") {
        compiled.emplace(kind, compile_opt(m.domain));
      } else if (kind == "hff-ao") {
        compiled.emplace(kind, compile_ao_from_data(*m.rt, need_data(), ao_cfg));
        if (!dedup)
          dedup = std::make_unique<CodebookSet>(compiled.at(kind).codebooks);
      } else if (kind != "blind") {
        throw ConfigError("--heuristic must be blind, hff-opt or hff-ao");
      }
    }
    if (!dedup && !dataset_path.empty())
      dedup = std::make_unique<CodebookSet>(
          fit_codebooks_from_data(*m.rt, need_data(), ao_cfg));
  }

  // grounded heuristic for one task; keep the returned object alive while
  // the returned function is in use
  std::unique_ptr<GroundedHeuristic> ground(const std::string& kind,
                                            const Universe& universe,
                                            const Expr& goal) const {
    if (kind == "blind") return nullptr;
    return std::make_unique<GroundedHeuristic>(*model->rt, compiled.at(kind), universe,
                                               goal);
  }

  HeuristicFn fn(const std::string& kind, const GroundedHeuristic* gh,
                 const Expr& goal) const {
    if (kind == "blind") return blind_heuristic(*model->rt, goal);
    return [gh](const FactoredState& s) { return double((*gh)(s)); };
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PDSketch toolkit: parse, learn, compile, and plan"};
  app.require_subcommand(1);

  std::string domain_path, arch_path, params_path, dataset_path, out_path, metrics_path;
  std::string goal_text, heuristic = "blind", mode = "ao", resume_path;
  int size = 7, doors = 4, objects = 4;
  int n_success = 1000, n_fail = 1000;
  uint64_t seed = 0, task_seed = 0;
  int max_nodes = 200000;
  double max_seconds = 600, weight = 1.0;
  int tasks = 20;
  std::string heuristics_csv = "blind,hff-opt,hff-ao";

  TrainConfig tc;
  AoConfig ao_cfg;

  auto* v = app.add_subcommand("validate", "parse and validate a .pds domain file");
  v->add_option("--domain", domain_path)->required();

  auto* g = app.add_subcommand("gen-data", "generate grid-world demonstrations");
  g->add_option("--out", out_path)->required();
  g->add_option("--n-success", n_success);
  g->add_option("--n-fail", n_fail);
  g->add_option("--size", size);
  g->add_option("--doors", doors);
  g->add_option("--objects", objects);
  g->add_option("--seed", seed);

  auto* t = app.add_subcommand("train", "fit slot parameters on a dataset");
  t->add_option("--domain", domain_path)->required();
  t->add_option("--dataset", dataset_path)->required();
  t->add_option("--arch", arch_path);
  t->add_option("--out", out_path)->required();
  t->add_option("--metrics", metrics_path);
  t->add_option("--resume", resume_path);
  t->add_option("--epochs", tc.epochs);
  t->add_option("--lr", tc.lr);
  t->add_option("--batch", tc.batch_size);
  t->add_option("--lambda-goal", tc.lambda_goal);
  t->add_option("--lambda-trans", tc.lambda_trans);
  t->add_option("--lambda-look", tc.lambda_look);
  t->add_option("--seed", tc.seed);
  t->add_option("--optimizer", tc.optimizer);

  auto* c = app.add_subcommand("compile", "discretize the model into a relaxed domain");
  c->add_option("--domain", domain_path)->required();
  c->add_option("--params", params_path);
  c->add_option("--arch", arch_path);
  c->add_option("--dataset", dataset_path);
  c->add_option("--mode", mode)->check(CLI::IsMember({"opt", "ao"}));
  c->add_option("--out", out_path)->required();
  c->add_option("--bins", ao_cfg.bins);
  c->add_option("--max-states", ao_cfg.max_states);
  c->add_option("--seed", ao_cfg.seed);
  c->add_flag("--finetune", ao_cfg.finetune);

  auto* p = app.add_subcommand("plan", "plan one grid task with a learned model");
  p->add_option("--domain", domain_path)->required();
  p->add_option("--params", params_path);
  p->add_option("--arch", arch_path);
  p->add_option("--dataset", dataset_path);
  p->add_option("--goal", goal_text);
  p->add_option("--heuristic", heuristic)
      ->check(CLI::IsMember({"blind", "hff-opt", "hff-ao"}));
  p->add_option("--size", size);
  p->add_option("--doors", doors);
  p->add_option("--objects", objects);
  p->add_option("--task-seed", task_seed);
  p->add_option("--seed", ao_cfg.seed);
  p->add_option("--max-nodes", max_nodes);
  p->add_option("--max-seconds", max_seconds);
  p->add_option("--weight", weight);
  p->add_option("--out", out_path);

  auto* b = app.add_subcommand("bench", "run a task suite across heuristics");
  b->add_option("--domain", domain_path)->required();
  b->add_option("--params", params_path);
  b->add_option("--arch", arch_path);
  b->add_option("--dataset", dataset_path);
  b->add_option("--tasks", tasks);
  b->add_option("--heuristics", heuristics_csv);
  b->add_option("--size", size);
  b->add_option("--doors", doors);
  b->add_option("--objects", objects);
  b->add_option("--seed", seed);
  b->add_option("--max-nodes", max_nodes);
  b->add_option("--max-seconds", max_seconds);
  b->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  Timer timer;
  try {
    if (v->parsed()) return run_validate(domain_path);

    if (g->parsed()) {
      Manifest m;
      m.command = "gen-data";
      m.config = {{"size", std::to_string(size)},
                  {"doors", std::to_string(doors)},
                  {"objects", std::to_string(objects)},
                  {"n_success", std::to_string(n_success)},
                  {"n_fail", std::to_string(n_fail)},
                  {"seed", std::to_string(seed)}};
      int rc = run_gen_data(grid_config_from(size, doors, objects, seed), out_path,
                            n_success, n_fail, m);
      m.wall_ms = timer.ms();
      m.write(out_path);
      return rc;
    }

    if (t->parsed()) {
      Manifest m;
      m.command = "train";
      m.config = {{"domain", domain_path},
                  {"epochs", std::to_string(tc.epochs)},
                  {"lr", format_float(tc.lr)},
                  {"batch", std::to_string(tc.batch_size)},
                  {"lambda_goal", format_float(tc.lambda_goal)},
                  {"lambda_trans", format_float(tc.lambda_trans)},
                  {"lambda_look", format_float(tc.lambda_look)},
                  {"seed", std::to_string(tc.seed)},
                  {"optimizer", tc.optimizer}};
      m.inputs.push_back(domain_path);
      int rc = run_train(domain_path, arch_path, dataset_path, resume_path, out_path,
                         metrics_path, tc, m);
      m.wall_ms = timer.ms();
      m.write(out_path);
      return rc;
    }

    if (c->parsed()) {
      Manifest m;
      m.command = "compile";
      m.config = {{"domain", domain_path},
                  {"mode", mode},
                  {"bins", std::to_string(ao_cfg.bins)},
                  {"max_states", std::to_string(ao_cfg.max_states)},
                  {"seed", std::to_string(ao_cfg.seed)}};
      m.inputs.push_back(domain_path);
      int rc = run_compile(domain_path, arch_path, params_path, dataset_path, mode,
                           out_path, ao_cfg, m);
      m.wall_ms = timer.ms();
      m.write(out_path);
      return rc;
    }

    if (p->parsed()) {
      LoadedModel model(domain_path, arch_path, params_path);
      TaskSetup task = make_grid_task(
          model.domain, grid_config_from(size, doors, objects, task_seed), task_seed,
          goal_text);
      HeuristicKit kit;
      kit.prepare({heuristic}, model, dataset_path, ao_cfg);
      auto grounded = kit.ground(heuristic, task.universe, task.goal);
      Tape tape;
      FactoredState s0 = model.rt->encode_state(tape, task.raw);
      SearchLimits limits;
      limits.max_nodes = max_nodes;
      limits.max_seconds = max_seconds;
      limits.weight = weight;
      PlanResult res = astar(*model.rt, s0, task.goal,
                             kit.fn(heuristic, grounded.get(), task.goal), limits,
                             kit.dedup.get());

      std::cout << task.goal_text << "\n";
      std::cout << res.plan_text();
      std::cout << "task,solved,plan_len,expanded,generated,wall_ms,heuristic\n";
      std::cout << task_seed << "," << (res.solved() ? 1 : 0) << "," << res.plan.size()
                << "," << res.stats.expanded << "," << res.stats.generated << ","
                << format_float(res.stats.wall_ms) << "," << heuristic << "\n";
      if (!out_path.empty()) {
        write_file(out_path, task.goal_text + "\n" + res.plan_text());
        Manifest m;
        m.command = "plan";
        m.config = {{"heuristic", heuristic}, {"task_seed", std::to_string(task_seed)}};
        m.inputs.push_back(domain_path);
        m.outputs.push_back(out_path);
        m.wall_ms = timer.ms();
        m.write(out_path);
      }
      if (res.status == SearchStatus::LimitExceeded) return 2;
      if (res.status == SearchStatus::Unsolvable) return 3;
      return 0;
    }

    if (b->parsed()) {
      LoadedModel model(domain_path, arch_path, params_path);
      std::vector<std::string> kinds;
      std::string cur;
      for (char ch : heuristics_csv + ",") {
        if (ch == ',') {
          if (!cur.empty()) kinds.push_back(cur);
          cur.clear();
        } else {
          cur += ch;
        }
      }
      HeuristicKit kit;
      kit.prepare(kinds, model, dataset_path, ao_cfg);
      std::string csv =
          "task,heuristic,solved,sim_success,plan_len,expanded,generated,wall_ms\n";
      for (int ti = 0; ti < tasks; ++ti) {
        uint64_t ts = seed + uint64_t(ti);
        TaskSetup task = make_grid_task(model.domain,
                                        grid_config_from(size, doors, objects, ts), ts, "");
        for (const auto& kind : kinds) {
          auto grounded = kit.ground(kind, task.universe, task.goal);
          Tape tape;
          FactoredState s0 = model.rt->encode_state(tape, task.raw);
          SearchLimits limits;
          limits.max_nodes = max_nodes;
          limits.max_seconds = max_seconds;
          PlanResult res = astar(*model.rt, s0, task.goal,
                                 kit.fn(kind, grounded.get(), task.goal), limits,
                                 kit.dedup.get());
          int sim_success = 0;
          if (res.solved()) {
            grid::GridState state = task.sim;
            for (const auto& ga : res.plan)
              for (int a = 0; a < grid::kNumActions; ++a)
                if (ga.name == grid::action_name(a)) state = grid::step(state, a);
            sim_success = grid::eval_success(state, task.grid_goal);
          }
          csv += std::to_string(ts) + "," + kind + "," + (res.solved() ? "1" : "0") + "," +
                 std::to_string(sim_success) + "," + std::to_string(res.plan.size()) +
                 "," + std::to_string(res.stats.expanded) + "," +
                 std::to_string(res.stats.generated) + "," +
                 format_float(res.stats.wall_ms) + "\n";
          write_file(out_path, csv);  // partial results survive limit hits
        }
      }
      Manifest m;
      m.command = "bench";
      m.config = {{"tasks", std::to_string(tasks)},
                  {"heuristics", heuristics_csv},
                  {"seed", std::to_string(seed)}};
      m.inputs.push_back(domain_path);
      m.outputs.push_back(out_path);
      m.wall_ms = timer.ms();
      m.write(out_path);
      std::cout << "wrote " << out_path << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
