#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "pdsketch/desugar.hpp"
#include "pdsketch/evaluator.hpp"
#include "pdsketch/parser.hpp"
#include "pdsketch/validate.hpp"

using namespace pds;

namespace {

// Boolean-table domain: three input predicates, no slots.
Domain bool_domain() {
  return validate(desugar(parse_domain(
      "(define domain (domain bools)"
      " (:types robot item - object)"
      " (:predicates (is-red ?o - item) (is-box ?o - item)"
      "              (robot-holding ?r - robot ?o - item)))")));
}

struct BoolWorld {
  Domain dom = bool_domain();
  Universe universe;
  RawState raw;

  BoolWorld(int n_items) {
    universe.add("agent", dom.object_type_ids.at("robot"));
    for (int i = 0; i < n_items; ++i)
      universe.add("item" + std::to_string(i), dom.object_type_ids.at("item"));
    raw.universe = universe;
    for (int i = 1; i <= n_items; ++i) {
      raw.values["is-red"][{i}] = {0.f};
      raw.values["is-box"][{i}] = {0.f};
      raw.values["robot-holding"][{0, i}] = {0.f};
    }
  }
  void set(const std::string& pred, std::vector<int> args, float v) {
    raw.values[pred][args] = {v};
  }
};

double eval_text(const Domain& dom, Runtime& rt, const RawState& raw, const std::string& text) {
  Tape tape;
  FactoredState s = rt.encode_state(tape, raw);
  Expr goal = validate_goal(dom, parse_expr_text(text));
  return eval_goal(tape, rt, s, goal);
}

}  // namespace

TEST_CASE("goedel connectives on table scores") {
  BoolWorld w(3);
  w.set("is-red", {0 + 1}, 0.3f);
  Runtime rt(w.dom);
  CHECK(eval_text(w.dom, rt, w.raw, "(not (is-red item0))") == doctest::Approx(0.7));

  w.set("is-red", {1}, 0.4f);
  w.set("is-red", {2}, 0.7f);
  w.set("is-red", {3}, 1.0f);
  CHECK(eval_text(w.dom, rt, w.raw, "(forall (?o - item) (is-red ?o))") ==

        doctest::Approx(0.4));
  CHECK(eval_text(w.dom, rt, w.raw, "(exists (?o - item) (is-red ?o))") == doctest::Approx(1.0));

  // implies(p, q) = max(1-p, q)
  w.set("is-box", {1}, 0.25f);
  CHECK(eval_text(w.dom, rt, w.raw, "(implies (is-red item0) (is-box item0))") ==
        doctest::Approx(std::max(1 - 0.4, 0.25)));
}

TEST_CASE("empty-domain quantifier identities") {
  BoolWorld w(0);
  Runtime rt(w.dom);
  CHECK(eval_text(w.dom, rt, w.raw, "(exists (?o - item) (is-red ?o))") == 0.0);
  CHECK(eval_text(w.dom, rt, w.raw, "(forall (?o - item) (is-red ?o))") == 1.0);
}

TEST_CASE("empty conjunction goal is satisfied") {
  BoolWorld w(1);
  Runtime rt(w.dom);
  CHECK(eval_text(w.dom, rt, w.raw, "(and )") == 1.0);
}

TEST_CASE("pick-up-a-red-box goal: hand min/max fold") {
  BoolWorld w(2);
  // held object: is-red 0.9, is-box 0.8, holding 0.95 -> min 0.8
  w.set("is-red", {1}, 0.9f);
  w.set("is-box", {1}, 0.8f);
  w.set("robot-holding", {0, 1}, 0.95f);
  w.set("is-red", {2}, 0.2f);
  Runtime rt(w.dom);
  std::string goal =
      "(exists (?o - item) (and (is-red ?o) (is-box ?o) (robot-holding agent ?o)))";
  double v = eval_text(w.dom, rt, w.raw, goal);
  CHECK(v == doctest::Approx(0.8));
  CHECK(v > 0.5);

  // nothing held: all holding scores <= 0.1 -> goal unsatisfied
  w.set("robot-holding", {0, 1}, 0.1f);
  double v2 = eval_text(w.dom, rt, w.raw, goal);
  CHECK(v2 <= doctest::Approx(0.1));
  CHECK(v2 < 0.5);
}

TEST_CASE("goedel properties hold exactly on randomized tables") {
  BoolWorld w(4);
  Runtime rt(w.dom);
  Rng rng(123);
  for (int round = 0; round < 200; ++round) {
    for (int i = 1; i <= 4; ++i) {
      w.set("is-red", {i}, float(rng.uniform()));
      w.set("is-box", {i}, float(rng.uniform()));
    }
    // De Morgan: not(and(p, q)) == or(not p, not q), exactly
    double lhs = eval_text(w.dom, rt, w.raw,
                           "(not (and (is-red item0) (is-box item1)))");
    double rhs = eval_text(w.dom, rt, w.raw,
                           "(or (not (is-red item0)) (not (is-box item1)))");
    CHECK(lhs == rhs);

    // quantifier-fold equivalence: forall == explicit min fold
    double q = eval_text(w.dom, rt, w.raw, "(forall (?o - item) (is-red ?o))");
    double fold = 1.0;
    for (int i = 1; i <= 4; ++i) fold = std::min(fold, double(w.raw.values["is-red"][{i}][0]));
    CHECK(q == fold);
  }
}

TEST_CASE("unknown object constants raise at evaluation time") {
  BoolWorld w(1);
  Runtime rt(w.dom);
  CHECK_THROWS_AS(eval_text(w.dom, rt, w.raw, "(is-red nosuch)"), UnknownObjectConstant);
}

// --- transitions ----------------------------------------------------------

namespace {

// Vector-valued domain with conditional effects driven by a Boolean table.
struct BlendWorld {
  Domain dom = validate(desugar(parse_domain(
      "(define domain (domain blend)"
      " (:types item - object  wet - vector[float32, 2])"
      " (:predicates (wetness [return_type=wet] ?o - item) (in-bowl ?o - item)"
      "              (marked ?o - item))"
      " (:action dunk :parameters (?o - item) :precondition (and )"
      "  :effect (when (in-bowl ?o) (assign (wetness ?o) (??h (wetness ?o)))))"
      " (:action dry :parameters (?o - item) :precondition (and )"
      "  :effect (assign (wetness ?o) (??h (wetness ?o))))"
      " (:action mark :parameters (?o - item) :precondition (and )"
      "  :effect (when (in-bowl ?o) (marked ?o)))"
      " (:action unmark :parameters (?o - item) :precondition (and )"
      "  :effect (when (in-bowl ?o) (not (marked ?o))))"
      ")")));
  Universe universe;
  RawState raw;
  Runtime rt{dom};

  explicit BlendWorld(float cond_score) {
    universe.add("a", dom.object_type_ids.at("item"));
    universe.add("b", dom.object_type_ids.at("item"));
    raw.universe = universe;
    raw.values["wetness"][{0}] = {1.f, 2.f};
    raw.values["wetness"][{1}] = {5.f, 6.f};
    raw.values["in-bowl"][{0}] = {cond_score};
    raw.values["in-bowl"][{1}] = {0.f};
    raw.values["marked"][{0}] = {0.25f};
    raw.values["marked"][{1}] = {0.f};
    // the learned "wet" value is a constant target here
    rt.bind_raw("action::dunk::h", [](Tape& tape, const SlotArgs&) {
      return tape.leaf({10.0, 20.0});
    });
    rt.bind_raw("action::dry::h", [](Tape& tape, const SlotArgs&) {
      return tape.leaf({10.0, 20.0});
    });
  }

  GroundedAction ga(const std::string& name, int obj) {
    for (auto& g : ground_actions(dom, universe))
      if (g.name == name && g.args[0] == obj) return g;
    throw std::runtime_error("no grounding");
  }
};

}  // namespace

TEST_CASE("conditional blend endpoints are exact") {
  {
    BlendWorld w(1.0f);  // condition certainly true -> exactly the new value
    Tape tape;
    FactoredState s = w.rt.encode_state(tape, w.raw);
    FactoredState next = apply_action(tape, w.rt, s, w.ga("dunk", 0));
    CHECK(next.entry(w.dom.pred_id("wetness"), {0}).value == std::vector<float>{10, 20});
  }
  {
    BlendWorld w(0.0f);  // condition certainly false -> exactly the old value
    Tape tape;
    FactoredState s = w.rt.encode_state(tape, w.raw);
    FactoredState next = apply_action(tape, w.rt, s, w.ga("dunk", 0));
    CHECK(next.entry(w.dom.pred_id("wetness"), {0}).value == std::vector<float>{1, 2});
  }
  {
    BlendWorld w(0.25f);  // soft blend c*new + (1-c)*old
    Tape tape;
    FactoredState s = w.rt.encode_state(tape, w.raw);
    FactoredState next = apply_action(tape, w.rt, s, w.ga("dunk", 0));
    auto v = next.entry(w.dom.pred_id("wetness"), {0}).value;
    CHECK(v[0] == doctest::Approx(0.25 * 10 + 0.75 * 1));
    CHECK(v[1] == doctest::Approx(0.25 * 20 + 0.75 * 2));
  }
}

TEST_CASE("boolean conditional effects blend via max/min") {
  BlendWorld w(0.6f);
  Tape tape;
  FactoredState s = w.rt.encode_state(tape, w.raw);
  int marked = w.dom.pred_id("marked");

  FactoredState t1 = apply_action(tape, w.rt, s, w.ga("mark", 0));
  CHECK(t1.entry(marked, {0}).value[0] == doctest::Approx(0.6));  // max(0.25, 0.6)

  FactoredState t2 = apply_action(tape, w.rt, s, w.ga("unmark", 0));
  CHECK(t2.entry(marked, {0}).value[0] == doctest::Approx(0.25));  // min(0.25, 1-0.6)

  // values stay inside [0, 1]
  FactoredState t3 = apply_action(tape, w.rt, t1, w.ga("mark", 0));
  CHECK(t3.entry(marked, {0}).value[0] <= 1.0);
}

TEST_CASE("frame assumption: untouched tables are shared, touched entries replaced") {
  BlendWorld w(1.0f);
  Tape tape;
  FactoredState s = w.rt.encode_state(tape, w.raw);
  FactoredState next = apply_action(tape, w.rt, s, w.ga("dunk", 0));

  int wet = w.dom.pred_id("wetness");
  int bowl = w.dom.pred_id("in-bowl");
  int marked = w.dom.pred_id("marked");

  // predicates absent from the effect share the very same table object
  CHECK(next.tables[size_t(bowl)].get() == s.tables[size_t(bowl)].get());
  CHECK(next.tables[size_t(marked)].get() == s.tables[size_t(marked)].get());

  // the untouched entry of the written predicate keeps its node
  CHECK(next.entry(wet, {1}).node == s.entry(wet, {1}).node);
  CHECK(next.entry(wet, {0}).node != s.entry(wet, {0}).node);
}

TEST_CASE("right-hand sides read the pre-state") {
  // dry overwrites unconditionally; chaining two applications still reads
  // each pre-state, not the half-updated one
  BlendWorld w(1.0f);
  Tape tape;
  FactoredState s = w.rt.encode_state(tape, w.raw);
  bool saw_old = false;
  w.rt.bind_raw("action::dry::h", [&](Tape& t, const SlotArgs& args) {
    auto v = t.value(args.ports[0].fixed);
    saw_old = (v == std::vector<double>{1.0, 2.0});
    return t.leaf({7.0, 8.0});
  });
  FactoredState next = apply_action(tape, w.rt, s, w.ga("dry", 0));
  CHECK(saw_old);
  CHECK(next.entry(w.dom.pred_id("wetness"), {0}).value == std::vector<float>{7, 8});
}

TEST_CASE("two effects writing one entry are rejected") {
  Domain dom = validate(desugar(parse_domain(
      "(define domain (domain clash)"
      " (:types item - object  v - vector[float32, 1])"
      " (:predicates (x [return_type=v] ?o - item))"
      " (:action boom :parameters (?o - item) :precondition (and )"
      "  :effect (and (assign (x ?o) (??f)) (assign (x ?o) (??g)))))")));
  Runtime rt(dom);
  rt.bind_raw("action::boom::f", [](Tape& t, const SlotArgs&) { return t.leaf({1.0}); });
  rt.bind_raw("action::boom::g", [](Tape& t, const SlotArgs&) { return t.leaf({2.0}); });
  Universe u;
  u.add("a", dom.object_type_ids.at("item"));
  RawState raw;
  raw.universe = u;
  raw.values["x"][{0}] = {0.f};
  Tape tape;
  FactoredState s = rt.encode_state(tape, raw);
  auto gas = ground_actions(dom, u);
  CHECK_THROWS_AS(apply_action(tape, rt, s, gas[0]), EvalError);
}

TEST_CASE("assigning to a derived predicate is caught at validation already") {
  BoolWorld w(1);
  // goals evaluating derived predicates with unbound slots raise UnboundSlot
  Domain dom = validate(desugar(parse_domain(
      "(define domain (domain ub)"
      " (:types item - object  f - vector[float32, 2])"
      " (:predicates (feat [return_type=f] ?o - item))"
      " (:derived (is-red ?o - item) (??f (feat ?o))))")));
  Runtime rt(dom);
  Universe u;
  u.add("a", dom.object_type_ids.at("item"));
  RawState raw;
  raw.universe = u;
  raw.values["feat"][{0}] = {0.f, 0.f};
  Tape tape;
  FactoredState s = rt.encode_state(tape, raw);
  Expr goal = validate_goal(dom, parse_expr_text("(is-red a)"));
  CHECK_THROWS_AS(eval_goal(tape, rt, s, goal), UnboundSlot);
}

TEST_CASE("derived predicates are memoized per state") {
  Domain dom = validate(desugar(parse_domain(
      "(define domain (domain memo)"
      " (:types item - object  f - vector[float32, 2])"
      " (:predicates (feat [return_type=f] ?o - item))"
      " (:derived (is-red ?o - item) (??f (feat ?o))))")));
  Runtime rt(dom);
  int calls = 0;
  rt.bind_raw("derived::is-red::f", [&](Tape& t, const SlotArgs&) {
    ++calls;
    return t.scalar(0.9);
  });
  Universe u;
  u.add("a", dom.object_type_ids.at("item"));
  RawState raw;
  raw.universe = u;
  raw.values["feat"][{0}] = {0.f, 0.f};
  Tape tape;
  FactoredState s = rt.encode_state(tape, raw);
  Evaluator ev(tape, rt, s);
  Expr goal = validate_goal(dom, parse_expr_text("(and (is-red a) (is-red a) (is-red a))"));
  Binding b;
  ev.eval(goal, b);
  CHECK(calls == 1);
}

TEST_CASE("object renaming leaves goal evaluation exactly unchanged") {
  Rng rng(99);
  for (int round = 0; round < 20; ++round) {
    BoolWorld w(4);
    for (int i = 1; i <= 4; ++i) {
      w.set("is-red", {i}, float(rng.uniform()));
      w.set("is-box", {i}, float(rng.uniform()));
      w.set("robot-holding", {0, i}, float(rng.uniform()));
    }
    Runtime rt(w.dom);
    std::string goal =
        "(exists (?o - item) (and (is-red ?o) (is-box ?o) (robot-holding agent ?o)))";
    double before = eval_text(w.dom, rt, w.raw, goal);

    // permute item order and names consistently
    BoolWorld p(0);
    p.universe = Universe{};
    p.universe.add("agent", w.dom.object_type_ids.at("robot"));
    std::vector<int> perm = {3, 1, 4, 2};
    for (int k = 0; k < 4; ++k)
      p.universe.add("renamed" + std::to_string(k), w.dom.object_type_ids.at("item"));
    p.raw.universe = p.universe;
    for (int k = 0; k < 4; ++k) {
      p.raw.values["is-red"][{k + 1}] = w.raw.values["is-red"][{perm[size_t(k)]}];
      p.raw.values["is-box"][{k + 1}] = w.raw.values["is-box"][{perm[size_t(k)]}];
      p.raw.values["robot-holding"][{0, k + 1}] =
          w.raw.values["robot-holding"][{0, perm[size_t(k)]}];
    }
    Runtime rt2(p.dom);
    double after = eval_text(p.dom, rt2, p.raw, goal);
    CHECK(before == after);
  }
}

TEST_CASE("goal gradients match finite differences away from ties") {
  // d(eval)/d(table entry) via a parameter-backed table
  Domain dom = bool_domain();
  ParamStore ps;
  ParamTensor& red = ps.create("red", {1});
  ParamTensor& box = ps.create("box", {1});
  red.value[0] = 0.62f;
  box.value[0] = 0.31f;

  auto build = [&](Tape& tape, ParamStore& p) {
    Universe u;
    u.add("agent", dom.object_type_ids.at("robot"));
    u.add("a", dom.object_type_ids.at("item"));
    FactoredState s;
    s.universe = &u;
    s.tables.resize(dom.predicates.size());
    auto mk = [&](const std::string& name, NodeId node) {
      auto t = std::make_shared<StateTable>();
      StateEntry e;
      e.attach(tape, node);
      (*t)[{1}] = e;
      s.tables[size_t(dom.pred_id(name))] = t;
    };
    mk("is-red", tape.param(p.at("red")));
    mk("is-box", tape.param(p.at("box")));
    auto t = std::make_shared<StateTable>();
    StateEntry e;
    e.attach(tape, tape.scalar(0.9));
    (*t)[{0, 1}] = e;
    s.tables[size_t(dom.pred_id("robot-holding"))] = t;

    Runtime rt(dom);
    Expr goal = validate_goal(
        dom, parse_expr_text("(exists (?o - item) (and (is-red ?o) (is-box ?o)"
                             " (robot-holding agent ?o)))"));
    Evaluator ev(tape, rt, s);
    return eval_goal_node(ev, goal);
  };
  GradCheckReport rep = grad_check(build, ps, 1e-4, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass);
}
