#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pdsketch/autodiff.hpp"
#include "pdsketch/common.hpp"
#include "pdsketch/runtime.hpp"

namespace pds::testing {

inline std::string source_dir() { return PDS_SOURCE_DIR; }
inline std::string corpus(const std::string& name) {
  return source_dir() + "/tests/corpus/" + name + ".pds";
}
inline std::string domain_file(const std::string& name) {
  return source_dir() + "/domains/" + name + ".pds";
}

// Randomized scalar-rooted computation graph over a fresh ParamStore; used to
// exercise backward against central finite differences.
struct RandomGraph {
  ParamStore params;
  std::function<NodeId(Tape&, ParamStore&)> build;
};

inline RandomGraph make_random_graph(uint64_t seed) {
  RandomGraph g;
  Rng rng(seed);
  int n_vec = rng.range(2, 4);
  int dim = rng.range(2, 5);
  for (int i = 0; i < n_vec; ++i) {
    ParamTensor& t = g.params.create("v" + std::to_string(i), {dim});
    for (auto& v : t.value) v = float(rng.uniform(-1.5, 1.5));
  }
  ParamTensor& w = g.params.create("w", {rng.range(2, 4), dim});
  for (auto& v : w.value) v = float(rng.uniform(-1.0, 1.0));

  int n_ops = rng.range(4, 10);
  uint64_t opseed = rng.next_u64();
  int vecs = n_vec;
  int d = dim;

  g.build = [n_ops, opseed, vecs, d](Tape& tape, ParamStore& ps) -> NodeId {
    Rng r(opseed);
    std::vector<NodeId> pool;
    for (int i = 0; i < vecs; ++i) pool.push_back(tape.param(ps.at("v" + std::to_string(i))));
    NodeId w_node = tape.param(ps.at("w"));

    auto pick_same = [&](NodeId a) {
      std::vector<NodeId> same;
      for (NodeId n : pool)
        if (tape.size(n) == tape.size(a)) same.push_back(n);
      return same[r.below(same.size())];
    };

    for (int i = 0; i < n_ops; ++i) {
      NodeId a = pool[r.below(pool.size())];
      switch (r.below(8)) {
        case 0: pool.push_back(tape.add(a, pick_same(a))); break;
        case 1: pool.push_back(tape.sub(a, pick_same(a))); break;
        case 2: pool.push_back(tape.mul(a, pick_same(a))); break;
        case 3: pool.push_back(tape.relu(a)); break;
        case 4: pool.push_back(tape.sigmoid(a)); break;
        case 5:
          if (int(tape.size(a)) == d) pool.push_back(tape.matvec(w_node, a));
          break;
        case 6: pool.push_back(tape.scale(a, r.uniform(-2, 2))); break;
        case 7: pool.push_back(tape.concat({a, pick_same(a)})); break;
      }
    }

    // collapse the pool into one scalar
    NodeId root = tape.scalar(0.0);
    for (NodeId n : pool) {
      NodeId s = tape.size(n) == 1 ? n : tape.sum(n);
      switch (r.below(3)) {
        case 0: root = tape.add(root, s); break;
        case 1: root = tape.minimum(root, s); break;
        case 2: root = tape.maximum(root, s); break;
      }
    }
    // pass through a loss against a pseudo target
    NodeId p = tape.sigmoid(root);
    NodeId t = tape.scalar(r.below(2) ? 1.0 : 0.0);
    return tape.bce(p, t);
  };
  return g;
}

// Binds exact grid-world groundings into the structured BabyAI domain
// (identity encoders for poses/images, one-hot directions). With these the
// latent transition model reproduces the simulator bit-for-bit, which makes
// search results comparable against the breadth-first oracle.
inline void bind_babyai_ground_truth(Runtime& rt) {
  auto scalar_of = [](Tape& t, bool b) { return t.scalar(b ? 1.0 : 0.0); };

  rt.bind_raw("derived::item-feature::f", [](Tape& t, const SlotArgs& a) {
    std::vector<double> out = t.value(a.ports[0].fixed);
    out.resize(16, 0.0);
    return t.leaf(out);
  });
  const char* colors[] = {"red", "green", "blue", "purple", "yellow", "grey"};
  for (int c = 0; c < 6; ++c) {
    rt.bind_raw(std::string("derived::is-") + colors[c] + "::f",
                [c, scalar_of](Tape& t, const SlotArgs& a) {
                  return scalar_of(t, t.value(a.ports[0].fixed)[size_t(c)] > 0.5);
                });
  }
  const char* shapes[] = {"key", "ball", "box", "door"};
  for (int s = 0; s < 4; ++s) {
    rt.bind_raw(std::string("derived::is-") + shapes[s] + "::f",
                [s, scalar_of](Tape& t, const SlotArgs& a) {
                  return scalar_of(t, t.value(a.ports[0].fixed)[size_t(6 + s)] > 0.5);
                });
  }
  rt.bind_raw("derived::is-open::f", [scalar_of](Tape& t, const SlotArgs& a) {
    return scalar_of(t, t.value(a.ports[0].fixed)[10] > 0.5);
  });
  rt.bind_raw("derived::robot-holding::f", [scalar_of](Tape& t, const SlotArgs& a) {
    const auto& pose = t.value(a.ports[0].fixed);
    return scalar_of(t, pose[0] == -1.0 && pose[1] == -1.0);
  });
  rt.bind_raw("derived::robot-facing::f", [scalar_of](Tape& t, const SlotArgs& a) {
    const auto& rp = t.value(a.ports[0].fixed);
    const auto& dir = t.value(a.ports[1].fixed);  // one-hot of 4
    const auto& ip = t.value(a.ports[2].fixed);
    int d = 0;
    for (int k = 0; k < 4; ++k)
      if (dir[size_t(k)] > 0.5) d = k;
    double fx = rp[0] + (d == 0 ? 1 : d == 2 ? -1 : 0);
    double fy = rp[1] + (d == 1 ? 1 : d == 3 ? -1 : 0);
    return scalar_of(t, ip[0] == fx && ip[1] == fy);
  });
  rt.bind_raw("derived::can-pickup::f", [scalar_of](Tape& t, const SlotArgs& a) {
    return scalar_of(t, t.value(a.ports[0].fixed)[9] < 0.5);  // doors stay put
  });
  rt.bind_raw("derived::can-toggle::f", [scalar_of](Tape& t, const SlotArgs& a) {
    return scalar_of(t, t.value(a.ports[0].fixed)[9] > 0.5);
  });

  auto rotate = [](int shift) {
    return [shift](Tape& t, const SlotArgs& a) {
      const auto& dir = t.value(a.ports[0].fixed);
      std::vector<double> out(4, 0.0);
      for (int k = 0; k < 4; ++k)
        if (dir[size_t(k)] > 0.5) out[size_t((k + shift) % 4)] = 1.0;
      return t.leaf(out);
    };
  };
  rt.bind_raw("action::lturn::f", rotate(3));
  rt.bind_raw("action::rturn::f", rotate(1));

  // forward condition: the faced cell admits the agent
  rt.bind_raw("action::forward::f", [scalar_of](Tape& t, const SlotArgs& a) {
    const auto& rp = t.value(a.ports[0].fixed);
    const auto& dir = t.value(a.ports[1].fixed);
    int d = 0;
    for (int k = 0; k < 4; ++k)
      if (dir[size_t(k)] > 0.5) d = k;
    double fx = rp[0] + (d == 0 ? 1 : d == 2 ? -1 : 0);
    double fy = rp[1] + (d == 1 ? 1 : d == 3 ? -1 : 0);
    bool inside = fx >= 1 && fx <= 7 && fy >= 1 && fy <= 7;
    bool blocker = false, open_door = false;
    for (const auto& [cond, payload] : a.ports[2].group) {
      if (t.value(cond)[0] <= 0.5) continue;
      const auto& f = t.value(payload);
      bool door = f[9] > 0.5;
      bool open = f[10] > 0.5;
      if (door && open)
        open_door = true;
      else
        blocker = true;
    }
    return scalar_of(t, inside ? !blocker : open_door);
  });
  rt.bind_raw("action::forward::g", [](Tape& t, const SlotArgs& a) {
    const auto& rp = t.value(a.ports[0].fixed);
    const auto& dir = t.value(a.ports[1].fixed);
    int d = 0;
    for (int k = 0; k < 4; ++k)
      if (dir[size_t(k)] > 0.5) d = k;
    return t.leaf({rp[0] + (d == 0 ? 1 : d == 2 ? -1 : 0),
                   rp[1] + (d == 1 ? 1 : d == 3 ? -1 : 0)});
  });
  rt.bind_raw("action::pickup::f",
              [](Tape& t, const SlotArgs&) { return t.leaf({-1.0, -1.0}); });
  rt.bind_raw("action::toggle::f", [](Tape& t, const SlotArgs& a) {
    std::vector<double> img = t.value(a.ports[0].fixed);
    img[10] = img[10] > 0.5 ? 0.0 : 1.0;
    return t.leaf(img);
  });
}

inline EncodingConfig babyai_encoding() {
  EncodingConfig enc;
  enc.onehot["direction"] = 4;
  return enc;
}

}  // namespace pds::testing
