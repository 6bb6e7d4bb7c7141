#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "pdsketch/desugar.hpp"
#include "pdsketch/slots.hpp"
#include "pdsketch/trainer.hpp"
#include "pdsketch/validate.hpp"

using namespace pds;

namespace {

Domain load_domain(const std::string& path) {
  return validate(desugar(parse_domain(read_file(path))));
}

// symbolic one-object world: a single Boolean predicate flipped by an action
Domain switch_domain() {
  return validate(desugar(parse_domain(
      "(define domain (domain switch)"
      " (:types item - object)"
      " (:predicates (is-on ?o - item))"
      " (:action turn-on :parameters (?o - item) :precondition (and )"
      "  :effect (is-on ?o)))")));
}

Episode switch_episode(float start, float end, std::vector<int> succ, bool with_action) {
  Episode ep;
  ep.id = 1;
  ep.universe.add("a", 1);
  RawState s0;
  s0.universe = ep.universe;
  s0.values["is-on"][{0}] = {start};
  ep.states.push_back(s0);
  if (with_action) {
    RawState s1;
    s1.universe = ep.universe;
    s1.values["is-on"][{0}] = {end};
    ep.states.push_back(s1);
    ep.actions.push_back({"turn-on", {"a"}});
  }
  ep.goal_text = "(is-on a)";
  ep.goal = parse_expr_text(ep.goal_text);
  ep.succ = std::move(succ);
  return ep;
}

}  // namespace

TEST_CASE("minimal one-step episode file loads") {
  std::string path = "/tmp/pds_minimal.jsonl";
  write_file(path,
             R"json({"id":7,"states":[{"objects":[{"name":"a","type":"item","is-on":[0]}]},)json"
             R"json({"objects":[{"name":"a","type":"item","is-on":[1]}]}],)json"
             R"json("actions":[{"name":"turn-on","args":["a"]}],"goal":"(is-on a)","succ":[0,1]})json"
             "\n");
  Domain dom = switch_domain();
  auto eps = load_dataset(path, dom);
  REQUIRE(eps.size() == 1);
  CHECK(eps[0].id == 7);
  CHECK(eps[0].states.size() == 2);
  CHECK(eps[0].actions.size() == 1);
  CHECK(eps[0].succ == std::vector<int>{0, 1});
  CHECK(eps[0].goal.kind == ExprKind::PredicateCall);
}

TEST_CASE("succ length mismatch is a schema error naming the episode") {
  std::string path = "/tmp/pds_badsucc.jsonl";
  write_file(path,
             R"json({"id":42,"states":[{"objects":[{"name":"a","type":"item","is-on":[0]}]}],)json"
             R"json("actions":[],"goal":"(is-on a)","succ":[0,1]})json"
             "\n");
  Domain dom = switch_domain();
  try {
    load_dataset(path, dom);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("42") != std::string::npos);
  }
}

TEST_CASE("generated grid dataset round-trips through save and load") {
  Domain dom = load_domain(testing::domain_file("babyai-abs"));
  grid::GridConfig cfg;
  Rng rng(5);
  std::vector<Episode> eps;
  for (int i = 0; i < 20; ++i)
    eps.push_back(episode_from_grid(dom, grid::generate_demo(cfg, rng, i % 2 == 0), i));
  std::string path = "/tmp/pds_grid_roundtrip.jsonl";
  save_dataset(path, eps, dom);
  auto loaded = load_dataset(path, dom);
  REQUIRE(loaded.size() == 20);
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].states.size() == eps[i].states.size());
    CHECK(loaded[i].succ == eps[i].succ);
    CHECK(loaded[i].goal_text == eps[i].goal_text);
    CHECK(loaded[i].universe.size() == 9);
  }
  // the same dataset also serves the structure-free domain
  Domain base = load_domain(testing::domain_file("babyai-base"));
  auto base_eps = load_dataset(path, base);
  CHECK(base_eps.size() == 20);
  CHECK(base_eps[0].states[0].values.count("robot-state") == 1);
}

TEST_CASE("perfect model on a satisfied-goal episode: loss is clamp epsilon") {
  Domain dom = switch_domain();
  Runtime rt(dom);  // no slots to bind
  Episode ep = switch_episode(0.f, 1.f, {0, 1}, true);
  TrainConfig cfg;
  Tape tape;
  NodeId loss = episode_loss(tape, rt, ep, cfg);
  CHECK(tape.scalar_value(loss) < 1e-5);
}

TEST_CASE("half-confidence goal eval at a success state costs ln 2") {
  Domain dom = switch_domain();
  Runtime rt(dom);
  Episode ep = switch_episode(0.5f, 0.f, {1}, false);
  TrainConfig cfg;
  Tape tape;
  NodeId loss = episode_loss(tape, rt, ep, cfg);
  CHECK(tape.scalar_value(loss) == doctest::Approx(0.6931471805599453));
}

TEST_CASE("with the identity encoder the transition term is next-observation L1") {
  Domain dom = switch_domain();
  Runtime rt(dom);
  // imperfect transition: model says 1.0, observation says 0.25
  Episode ep = switch_episode(0.f, 0.25f, {0, 0}, true);
  TrainConfig cfg;
  cfg.lambda_goal = 1e-12;  // isolate the transition term (must stay positive)
  cfg.lambda_look = 0;
  Tape tape;
  NodeId loss = episode_loss(tape, rt, ep, cfg);
  CHECK(tape.scalar_value(loss) == doctest::Approx(0.75).epsilon(1e-6));
}

namespace {

// learnable toy: is-hot = f(feat); goal (is-hot a); label = feat[0] > feat[1]
Domain toy_domain() {
  return validate(desugar(parse_domain(
      "(define domain (domain toy)"
      " (:types item - object  feat - vector[float32, 2])"
      " (:predicates (feature [return_type=feat] ?o - item))"
      " (:derived (is-hot ?o - item) (??f (feature ?o))))")));
}

std::vector<Episode> toy_dataset(int n, Rng& rng) {
  std::vector<Episode> out;
  for (int i = 0; i < n; ++i) {
    Episode ep;
    ep.id = i;
    ep.universe.add("a", 1);
    RawState s;
    s.universe = ep.universe;
    float x = float(rng.uniform(-1, 1)), y = float(rng.uniform(-1, 1));
    s.values["feature"][{0}] = {x, y};
    ep.states.push_back(s);
    ep.goal_text = "(is-hot a)";
    ep.goal = parse_expr_text(ep.goal_text);
    ep.succ = {x > y ? 1 : 0};
    out.push_back(ep);
  }
  return out;
}

}  // namespace

TEST_CASE("loss strictly decreases over 50 optimizer steps on a toy set") {
  Domain dom = toy_domain();
  Runtime rt(dom);
  ParamStore ps;
  ArchConfig arch;
  arch.hidden = {8};
  arch.seed = 2;
  instantiate(rt, ps, arch);

  Rng rng(3);
  auto data = toy_dataset(5, rng);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 5;
  cfg.lr = 0.02;
  cfg.heldout_fraction = 0;
  auto history = train(rt, ps, data, cfg);
  REQUIRE(history.size() == 50);
  for (size_t i = 1; i < history.size(); ++i) CHECK(history[i].loss < history[i - 1].loss);
  CHECK(history.back().goal_acc == 1.0);
}

TEST_CASE("zero epochs: parameters unchanged, empty history") {
  Domain dom = toy_domain();
  Runtime rt(dom);
  ParamStore ps;
  ArchConfig arch;
  arch.hidden = {8};
  instantiate(rt, ps, arch);
  auto before = ps.at("derived::is-hot::f/W0").value;
  Rng rng(3);
  auto data = toy_dataset(3, rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  auto history = train(rt, ps, data, cfg);
  CHECK(history.empty());
  CHECK(ps.at("derived::is-hot::f/W0").value == before);
}

TEST_CASE("training is deterministic and batch-order invariant") {
  Rng rng(3);
  auto data = toy_dataset(6, rng);

  auto run = [&](const std::vector<Episode>& dataset) {
    Domain dom = toy_domain();
    Runtime rt(dom);
    ParamStore ps;
    ArchConfig arch;
    arch.hidden = {8};
    arch.seed = 4;
    instantiate(rt, ps, arch);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = int(dataset.size());  // one batch per epoch
    cfg.heldout_fraction = 0;
    train(rt, ps, dataset, cfg);
    return ps.at("derived::is-hot::f/W0").value;
  };

  auto base = run(data);
  CHECK(run(data) == base);  // bitwise reproducible

  // permuting episode order within the single batch changes nothing:
  // gradients are flushed in ascending episode id order
  std::vector<Episode> shuffled = {data[4], data[0], data[5], data[2], data[1], data[3]};
  CHECK(run(shuffled) == base);
}

TEST_CASE("full episode loss gradient matches finite differences at 1e-3") {
  Domain dom = toy_domain();
  Rng rng(3);
  auto data = toy_dataset(1, rng);

  Runtime rt(dom);
  ParamStore ps;
  ArchConfig arch;
  arch.hidden = {6};
  arch.seed = 9;
  instantiate(rt, ps, arch);

  TrainConfig cfg;
  auto build = [&](Tape& tape, ParamStore&) { return episode_loss(tape, rt, data[0], cfg); };
  GradCheckReport rep = grad_check(build, ps, 1e-4, 1e-3);
  INFO(rep.worst);
  CHECK(rep.pass);
}

TEST_CASE("lambda_trans=0 still reaches high goal accuracy on the toy set") {
  Domain dom = toy_domain();
  Runtime rt(dom);
  ParamStore ps;
  ArchConfig arch;
  arch.hidden = {8};
  arch.seed = 6;
  instantiate(rt, ps, arch);
  Rng rng(8);
  auto data = toy_dataset(40, rng);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 8;
  cfg.lr = 0.02;
  cfg.lambda_trans = 0;
  cfg.lambda_look = 0;
  cfg.heldout_fraction = 0.1;
  auto history = train(rt, ps, data, cfg);
  CHECK(history.back().goal_acc >= 0.9);
}

TEST_CASE("training rejects invalid configs and empty datasets") {
  Domain dom = toy_domain();
  Runtime rt(dom);
  ParamStore ps;
  instantiate(rt, ps, ArchConfig{});
  TrainConfig bad;
  bad.lambda_goal = 0;
  Rng rng(1);
  auto data = toy_dataset(2, rng);
  CHECK_THROWS_AS(train(rt, ps, data, bad), ConfigError);
  TrainConfig ok;
  CHECK_THROWS_AS(train(rt, ps, {}, ok), EvalError);
}

TEST_CASE("metrics csv shape") {
  std::vector<EpochMetrics> h = {{0, 1.5, 0.5, 0.25}, {1, 1.0, 0.75, 0.125}};
  std::string csv = metrics_csv(h);
  CHECK(csv.find("epoch,loss,goal_acc,trans_l1\n") == 0);
  CHECK(csv.find("\n1,1,0.75,0.125\n") != std::string::npos);
}
