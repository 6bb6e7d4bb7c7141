#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "pdsketch/autodiff.hpp"
#include "pdsketch/params_io.hpp"

using namespace pds;

TEST_CASE("min forward and subgradient route to the first argument") {
  Tape tape;
  NodeId a = tape.leaf({0.2}, true);
  NodeId b = tape.leaf({0.9}, true);
  NodeId m = tape.minimum(a, b);
  CHECK(tape.scalar_value(m) == doctest::Approx(0.2));
  tape.backward(m);
  CHECK(tape.grad(a)[0] == 1.0);
  CHECK(tape.grad(b).empty());  // no gradient accumulated

  Tape t2;
  NodeId x = t2.leaf({0.5}, true);
  NodeId y = t2.leaf({0.5}, true);
  NodeId m2 = t2.minimum(x, y);
  t2.backward(m2);
  CHECK(t2.grad(x)[0] == 1.0);  // tie routes to the first argument
  CHECK(t2.grad(y).empty());
}

TEST_CASE("bce at p=0.5 equals ln 2") {
  Tape tape;
  NodeId p = tape.leaf({0.5}, true);
  NodeId t = tape.scalar(1.0);
  NodeId loss = tape.bce(p, t);
  CHECK(tape.scalar_value(loss) == doctest::Approx(0.6931471805599453));
}

TEST_CASE("l1 of identical vectors is zero with zero gradient") {
  Tape tape;
  NodeId v = tape.leaf({0.1, -0.4, 2.0}, true);
  NodeId w = tape.leaf({0.1, -0.4, 2.0}, true);
  NodeId loss = tape.l1(v, w);
  CHECK(tape.scalar_value(loss) == 0.0);
  tape.backward(loss);
  for (double g : tape.grad(v)) CHECK(g == 0.0);
}

TEST_CASE("product rule") {
  Tape tape;
  NodeId x = tape.leaf({2.0}, true);
  NodeId y = tape.leaf({3.0}, true);
  NodeId r = tape.mul(x, y);
  tape.backward(r);
  CHECK(tape.grad(x)[0] == 3.0);
  CHECK(tape.grad(y)[0] == 2.0);
}

TEST_CASE("min against a constant: active vs inactive branch") {
  {
    Tape tape;
    NodeId x = tape.leaf({0.3}, true);
    NodeId m = tape.minimum(x, tape.scalar(0.5));
    tape.backward(m);
    CHECK(tape.grad(x)[0] == 1.0);
  }
  {
    Tape tape;
    NodeId x = tape.leaf({0.7}, true);
    NodeId m = tape.minimum(x, tape.scalar(0.5));
    tape.backward(m);
    CHECK(tape.grad(x).empty());
  }
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape tape;
  NodeId v = tape.leaf({1.0, 2.0}, true);
  CHECK_THROWS_AS(tape.backward(v), NonScalarRoot);
}

TEST_CASE("shape mismatches are rejected") {
  Tape tape;
  NodeId a = tape.leaf({1.0, 2.0});
  NodeId b = tape.leaf({1.0, 2.0, 3.0});
  CHECK_THROWS_AS(tape.add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(tape.minimum(a, b), ShapeMismatch);
}

TEST_CASE("two-layer network matches finite differences") {
  ParamStore ps;
  Rng rng(7);
  ParamTensor& w1 = ps.create("W1", {4, 3});
  ParamTensor& b1 = ps.create("b1", {4});
  ParamTensor& w2 = ps.create("W2", {1, 4});
  for (auto& v : w1.value) v = float(rng.uniform(-1, 1));
  for (auto& v : b1.value) v = float(rng.uniform(-0.5, 0.5));
  for (auto& v : w2.value) v = float(rng.uniform(-1, 1));

  auto build = [](Tape& tape, ParamStore& p) {
    NodeId x = tape.leaf({0.3, -0.2, 0.8});
    NodeId h = tape.sigmoid(tape.add(tape.matvec(tape.param(p.at("W1")), x),
                                     tape.param(p.at("b1"))));
    return tape.sum(tape.matvec(tape.param(p.at("W2")), h));
  };
  GradCheckReport rep = grad_check(build, ps, 1e-4, 1e-4);
  INFO(rep.worst);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("100 random graphs match finite differences at 1e-4") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    testing::RandomGraph g = testing::make_random_graph(seed);
    GradCheckReport rep = grad_check(g.build, g.params, 1e-4, 1e-4);
    INFO("seed " << seed << ": " << rep.worst);
    CHECK(rep.pass);
  }
}

TEST_CASE("grad_check flags evaluation at a nondifferentiable point") {
  ParamStore ps;
  ParamTensor& t = ps.create("x", {1});
  t.value[0] = 0.5f;
  auto build = [](Tape& tape, ParamStore& p) {
    NodeId x = tape.param(p.at("x"));
    return tape.minimum(x, tape.scalar(0.5));  // exactly at the tie
  };
  GradCheckReport rep = grad_check(build, ps, 1e-4, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.flagged_nondifferentiable == 1);
}

TEST_CASE("constant function has all-zero gradients and passes") {
  ParamStore ps;
  ps.create("x", {3}).value = {1.f, 2.f, 3.f};
  auto build = [](Tape& tape, ParamStore&) { return tape.scalar(4.0); };
  GradCheckReport rep = grad_check(build, ps, 1e-4, 1e-4);
  CHECK(rep.pass);
  CHECK(rep.max_rel_err == 0.0);
}

TEST_CASE("linearity of gradients") {
  auto run = [](double a, double b) {
    Tape tape;
    NodeId x = tape.leaf({0.4, -0.7}, true);
    NodeId f = tape.sum(tape.sigmoid(x));
    NodeId g = tape.sum(tape.mul(x, x));
    NodeId root = tape.add(tape.scale(f, a), tape.scale(g, b));
    tape.backward(root);
    return std::vector<double>(tape.grad(x));
  };
  auto gf = run(1, 0);
  auto gg = run(0, 1);
  auto gc = run(2.5, -1.5);
  for (size_t i = 0; i < gc.size(); ++i)
    CHECK(gc[i] == doctest::Approx(2.5 * gf[i] - 1.5 * gg[i]).epsilon(1e-12));
}

TEST_CASE("min/max duality holds in forward and backward") {
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Tape t1;
    NodeId x1 = t1.leaf({a}, true), y1 = t1.leaf({b}, true);
    NodeId m1 = t1.maximum(x1, y1);
    t1.backward(m1);

    Tape t2;
    NodeId x2 = t2.leaf({a}, true), y2 = t2.leaf({b}, true);
    NodeId m2 = t2.scale(t2.minimum(t2.scale(x2, -1), t2.scale(y2, -1)), -1);
    CHECK(t1.scalar_value(m1) == t2.scalar_value(m2));
    t2.backward(m2);
    auto g = [](const std::vector<double>& v) { return v.empty() ? 0.0 : v[0]; };
    CHECK(g(t1.grad(x1)) == g(t2.grad(x2)));
    CHECK(g(t1.grad(y1)) == g(t2.grad(y2)));
  }
}

TEST_CASE("evaluating the same subgraph twice doubles parameter gradients") {
  ParamStore ps;
  ps.create("v", {2}).value = {0.3f, -0.6f};
  Tape t1;
  t1.backward(t1.sum(t1.sigmoid(t1.param(ps.at("v")))));
  ps.zero_grads();
  t1.flush_param_grads();
  std::vector<float> g1 = ps.at("v").grad;

  Tape t2;
  NodeId n = t2.param(ps.at("v"));
  t2.backward(t2.add(t2.sum(t2.sigmoid(n)), t2.sum(t2.sigmoid(n))));
  ps.zero_grads();
  t2.flush_param_grads();
  for (size_t i = 0; i < g1.size(); ++i)
    CHECK(ps.at("v").grad[i] == doctest::Approx(2 * g1[i]).epsilon(1e-12));
}

TEST_CASE("parameter file round-trip is bit-exact") {
  ParamStore ps;
  Rng rng(3);
  ParamTensor& a = ps.create("slot/W0", {3, 2});
  ParamTensor& b = ps.create("slot/b0", {3});
  for (auto& v : a.value) v = float(rng.uniform(-1, 1));
  for (auto& v : b.value) v = float(rng.uniform(-1, 1));

  std::string path = "/tmp/pds_params_test.bin";
  save_params(ps, path);
  ParamStore loaded = load_params(path);
  REQUIRE(loaded.tensors.size() == 2);
  CHECK(loaded.at("slot/W0").value == a.value);
  CHECK(loaded.at("slot/b0").value == b.value);
  CHECK(loaded.at("slot/W0").shape == a.shape);

  ParamStore fresh;
  fresh.create("slot/W0", {3, 2});
  fresh.create("slot/b0", {3});
  load_params_into(fresh, path);
  CHECK(fresh.at("slot/W0").value == a.value);

  // stores with unmatched tensors are rejected with names listed
  ParamStore extra;
  extra.create("slot/W0", {3, 2});
  extra.create("slot/b0", {3});
  extra.create("other/W0", {1, 1});
  try {
    load_params_into(extra, path);
    FAIL("expected MissingSlot");
  } catch (const MissingSlot& e) {
    CHECK(std::string(e.what()).find("other/W0") != std::string::npos);
  }

  // truncated or corrupt files never load partially
  std::string data = read_file(path);
  write_file(path, data.substr(0, data.size() - 3));
  CHECK_THROWS_AS(load_params(path), FormatVersionMismatch);
  write_file(path, "JUNK" + data.substr(4));
  CHECK_THROWS_AS(load_params(path), FormatVersionMismatch);
}
