#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pdsketch/domain.hpp"
#include "pdsketch/quantize.hpp"

namespace pds {

// --- rule language -------------------------------------------------------------
// Restricted to the forms the compiler needs: conjunctions of (possibly
// negated) propositions over head variables, plus one level of existential
// quantification over a single fresh variable.

constexpr int kFreshVar = -1;

struct Atom {
  int pred = -1;
  int code = -1;          // -1 = Boolean proposition
  std::vector<int> args;  // head variable indices, or kFreshVar
};

struct RuleLiteral {
  bool positive = true;
  bool exists = false;
  int exists_type = -1;         // object type of the fresh variable
  std::vector<Atom> atoms;      // single atom unless exists
};

struct RuleClause {
  std::vector<RuleLiteral> lits;  // conjunction
};

struct FirstOrderRule {
  int target_pred = -1;
  int target_code = -1;  // -1 for Boolean targets
  std::vector<int> head_types;
  std::vector<RuleClause> clauses;  // disjunction
};

namespace detail {

inline bool atom_true(const Atom& atom, const DiscreteState& ds,
                      const std::vector<int>& head, int fresh) {
  std::vector<int> args;
  args.reserve(atom.args.size());
  for (int a : atom.args) args.push_back(a == kFreshVar ? fresh : head[size_t(a)]);
  if (atom.code < 0) return ds.bools.count({atom.pred, args}) > 0;
  auto it = ds.codes.find({atom.pred, args});
  return it != ds.codes.end() && it->second == atom.code;
}

}  // namespace detail

inline bool literal_true(const Domain& dom, const RuleLiteral& lit, const DiscreteState& ds,
                         const Universe& universe, const std::vector<int>& head) {
  bool truth;
  if (!lit.exists) {
    truth = detail::atom_true(lit.atoms[0], ds, head, -1);
  } else {
    truth = false;
    for (int obj : universe.of_type(dom, lit.exists_type)) {
      bool all = true;
      for (const auto& a : lit.atoms) all = all && detail::atom_true(a, ds, head, obj);
      if (all) {
        truth = true;
        break;
      }
    }
  }
  return lit.positive == truth;
}

inline bool clause_true(const Domain& dom, const RuleClause& clause, const DiscreteState& ds,
                        const Universe& universe, const std::vector<int>& head) {
  for (const auto& lit : clause.lits)
    if (!literal_true(dom, lit, ds, universe, head)) return false;
  return true;
}

inline bool rule_true(const Domain& dom, const FirstOrderRule& rule, const DiscreteState& ds,
                      const Universe& universe, const std::vector<int>& head) {
  for (const auto& clause : rule.clauses)
    if (clause_true(dom, clause, ds, universe, head)) return true;
  return false;
}

// --- candidate literal generation ----------------------------------------------

// Number of codes per quantized predicate, or -1 for Boolean predicates.
using CodeCounts = std::map<int, int>;

// Deterministic candidate pool over the head variables: every type-correct
// atom with every code, both polarities, plus exists-literals pairing a
// binary Boolean relation over (head var, fresh var) with a unary proposition
// on the fresh var, as well as plain unary exists.
inline std::vector<RuleLiteral> candidate_literals(const Domain& dom,
                                                   const std::vector<int>& head_types,
                                                   const CodeCounts& codes) {
  std::vector<RuleLiteral> out;
  auto add_both = [&](RuleLiteral lit) {
    lit.positive = true;
    out.push_back(lit);
    lit.positive = false;
    out.push_back(std::move(lit));
  };

  auto assignments = [&](const Predicate& p) {
    std::vector<std::vector<int>> results;
    std::vector<int> cur(size_t(p.arity()), 0);
    std::vector<std::vector<int>> options;
    for (int t : p.param_types) {
      std::vector<int> opt;
      for (size_t h = 0; h < head_types.size(); ++h)
        if (dom.type_matches(head_types[h], t)) opt.push_back(int(h));
      options.push_back(opt);
      if (opt.empty()) return results;
    }
    std::vector<size_t> idx(options.size(), 0);
    while (true) {
      std::vector<int> a;
      for (size_t k = 0; k < idx.size(); ++k) a.push_back(options[k][idx[k]]);
      results.push_back(a);
      size_t k = options.size();
      bool done = options.empty();
      while (k > 0) {
        --k;
        if (++idx[k] < options[k].size()) break;
        idx[k] = 0;
        if (k == 0) done = true;
      }
      if (done) break;
    }
    return results;
  };

  for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
    const Predicate& p = dom.predicates[pid];
    auto it = codes.find(int(pid));
    if (it == codes.end()) continue;
    for (const auto& args : assignments(p)) {
      int n = it->second;
      for (int code = (n < 0 ? -1 : 0); code < std::max(0, n); ++code) {
        RuleLiteral lit;
        lit.atoms.push_back({int(pid), n < 0 ? -1 : code, args});
        add_both(lit);
        if (n < 0) break;
      }
    }
  }

  // exists-literals over one fresh variable
  for (size_t rid = 0; rid < dom.predicates.size(); ++rid) {
    const Predicate& rel = dom.predicates[rid];
    if (!codes.count(int(rid)) || !rel.ret.is_bool() || rel.arity() != 2) continue;
    for (int side = 0; side < 2; ++side) {
      int head_side = side == 0 ? 0 : 1;
      int fresh_side = 1 - head_side;
      int fresh_type = rel.param_types[size_t(fresh_side)];
      for (size_t h = 0; h < head_types.size(); ++h) {
        if (!dom.type_matches(head_types[h], rel.param_types[size_t(head_side)])) continue;
        for (size_t uid = 0; uid < dom.predicates.size(); ++uid) {
          const Predicate& unary = dom.predicates[uid];
          auto uit = codes.find(int(uid));
          if (uit == codes.end() || unary.arity() != 1) continue;
          if (!dom.type_matches(fresh_type, unary.param_types[0]) &&
              !dom.type_matches(unary.param_types[0], fresh_type))
            continue;
          int n = uit->second;
          for (int code = (n < 0 ? -1 : 0); code < std::max(0, n); ++code) {
            RuleLiteral lit;
            lit.exists = true;
            lit.exists_type = unary.param_types[0] == 0 ? fresh_type : unary.param_types[0];
            Atom r;
            r.pred = int(rid);
            r.args = side == 0 ? std::vector<int>{int(h), kFreshVar}
                               : std::vector<int>{kFreshVar, int(h)};
            lit.atoms.push_back(r);
            lit.atoms.push_back({int(uid), n < 0 ? -1 : code, {kFreshVar}});
            add_both(lit);
            if (n < 0) break;
          }
        }
      }
    }
  }

  // plain unary exists
  for (size_t uid = 0; uid < dom.predicates.size(); ++uid) {
    const Predicate& unary = dom.predicates[uid];
    auto uit = codes.find(int(uid));
    if (uit == codes.end() || unary.arity() != 1) continue;
    int n = uit->second;
    for (int code = (n < 0 ? -1 : 0); code < std::max(0, n); ++code) {
      RuleLiteral lit;
      lit.exists = true;
      lit.exists_type = unary.param_types[0];
      lit.atoms.push_back({int(uid), n < 0 ? -1 : code, {kFreshVar}});
      add_both(lit);
      if (n < 0) break;
    }
  }
  return out;
}

// --- FOIL ---------------------------------------------------------------------

class Inseparable : public Error {
 public:
  explicit Inseparable(const std::string& what)
      : Error("FOIL could not separate remaining positives for " + what) {}
};

struct FoilSample {
  const DiscreteState* state = nullptr;
  const Universe* universe = nullptr;
  std::vector<int> head;
  int label = 0;  // target code, or 0/1 for Boolean targets
};

struct FoilConfig {
  double min_precision = 0.95;
  int max_clause_len = 16;
  int max_clauses = 512;
  // A target value counts as inseparable (triggering the optimistic
  // fallback) only when less than this fraction of its positives could be
  // covered; small residues are accepted as noise.
  double min_recall = 0.9;
};

struct FoilOutcome {
  std::vector<FirstOrderRule> rules;      // one per target value that has positives
  std::vector<int> inseparable_values;    // target values left uncovered
};

namespace detail {

class Bitset {
 public:
  explicit Bitset(size_t n = 0) : n_(n), words_((n + 63) / 64, 0) {}
  void set(size_t i) { words_[i >> 6] |= uint64_t(1) << (i & 63); }
  bool get(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1; }
  size_t count_and(const Bitset& o) const {
    size_t c = 0;
    for (size_t w = 0; w < words_.size(); ++w)
      c += size_t(__builtin_popcountll(words_[w] & o.words_[w]));
    return c;
  }
  void and_with(const Bitset& o) {
    for (size_t w = 0; w < words_.size(); ++w) words_[w] &= o.words_[w];
  }
  void and_not(const Bitset& o) {
    for (size_t w = 0; w < words_.size(); ++w) words_[w] &= ~o.words_[w];
  }
  size_t count() const {
    size_t c = 0;
    for (uint64_t w : words_) c += size_t(__builtin_popcountll(w));
    return c;
  }
  bool any() const {
    for (uint64_t w : words_)
      if (w) return true;
    return false;
  }
  size_t size() const { return n_; }

 private:
  size_t n_;
  std::vector<uint64_t> words_;
};

inline double foil_gain(size_t t, size_t p0, size_t n0, size_t p1, size_t n1) {
  if (t == 0 || p1 == 0) return 0;
  double before = std::log2(double(p0) / double(p0 + n0));
  double after = std::log2(double(p1) / double(p1 + n1));
  return double(t) * (after - before);
}

}  // namespace detail

namespace detail {

// Dense per-state view: instance keys are perfect-hashed into flat arrays so
// literal-bank construction avoids tree lookups.
struct FlatView {
  const Universe* universe = nullptr;
  std::vector<size_t> pred_offset;  // per predicate, into codes/bools
  std::vector<size_t> pred_stride;  // U^arity
  size_t total = 0;
  int u_size = 0;

  void init(const Domain& dom, const Universe& u) {
    universe = &u;
    u_size = u.size();
    pred_offset.assign(dom.predicates.size(), size_t(-1));
    pred_stride.assign(dom.predicates.size(), 0);
    total = 0;
    for (size_t pid = 0; pid < dom.predicates.size(); ++pid) {
      size_t stride = 1;
      for (int k = 0; k < dom.predicates[pid].arity(); ++k) stride *= size_t(u_size);
      pred_offset[pid] = total;
      pred_stride[pid] = stride;
      total += stride;
    }
  }

  size_t key(int pid, const int* args, int arity) const {
    size_t k = pred_offset[size_t(pid)];
    size_t mul = 1;
    for (int i = arity - 1; i >= 0; --i) {
      k += size_t(args[i]) * mul;
      mul *= size_t(u_size);
    }
    return k;
  }
};

struct FlatState {
  std::vector<int32_t> codes;  // -2 = absent
  std::vector<uint8_t> bools;

  void load(const Domain& dom, const FlatView& view, const DiscreteState& ds) {
    codes.assign(view.total, -2);
    bools.assign(view.total, 0);
    for (const auto& [inst, code] : ds.codes)
      codes[view.key(inst.first, inst.second.data(), int(inst.second.size()))] =
          int32_t(code);
    for (const auto& inst : ds.bools)
      bools[view.key(inst.first, inst.second.data(), int(inst.second.size()))] = 1;
  }
};

inline bool atom_true_flat(const Atom& atom, const FlatView& view, const FlatState& fs,
                           const std::vector<int>& head, int fresh) {
  int args[4];
  for (size_t i = 0; i < atom.args.size(); ++i)
    args[i] = atom.args[i] == kFreshVar ? fresh : head[size_t(atom.args[i])];
  size_t k = view.key(atom.pred, args, int(atom.args.size()));
  return atom.code < 0 ? fs.bools[k] != 0 : fs.codes[k] == atom.code;
}

inline bool literal_true_flat(const Domain& dom, const RuleLiteral& lit,
                              const FlatView& view, const FlatState& fs,
                              const std::vector<int>& head) {
  bool truth;
  if (!lit.exists) {
    truth = atom_true_flat(lit.atoms[0], view, fs, head, -1);
  } else {
    truth = false;
    for (int obj : view.universe->of_type(dom, lit.exists_type)) {
      bool all = true;
      for (const auto& a : lit.atoms) all = all && atom_true_flat(a, view, fs, head, obj);
      if (all) {
        truth = true;
        break;
      }
    }
  }
  return lit.positive == truth;
}

}  // namespace detail

// Greedy FOIL clause induction per target value over precomputed literal
// truth tables. Deterministic: fixed candidate order, first-wins gain ties.
inline FoilOutcome extract_rules(const Domain& dom, int target_pred,
                                 const std::vector<int>& head_types,
                                 const std::vector<RuleLiteral>& candidates,
                                 const std::vector<FoilSample>& samples,
                                 const FoilConfig& cfg = {}) {
  FoilOutcome out;
  if (samples.empty()) return out;

  // flatten each distinct state once
  std::map<const Universe*, detail::FlatView> views;
  std::map<const DiscreteState*, detail::FlatState> flats;
  for (const auto& s : samples) {
    auto vit = views.find(s.universe);
    if (vit == views.end()) {
      vit = views.emplace(s.universe, detail::FlatView{}).first;
      vit->second.init(dom, *s.universe);
    }
    auto fit = flats.find(s.state);
    if (fit == flats.end()) flats[s.state].load(dom, vit->second, *s.state);
  }

  const size_t n = samples.size();
  std::vector<detail::Bitset> truth(candidates.size(), detail::Bitset(n));
  for (size_t i = 0; i < n; ++i) {
    const detail::FlatView& view = views.at(samples[i].universe);
    const detail::FlatState& fs = flats.at(samples[i].state);
    for (size_t c = 0; c < candidates.size(); ++c)
      if (detail::literal_true_flat(dom, candidates[c], view, fs, samples[i].head))
        truth[c].set(i);
  }

  std::vector<int> values;
  for (const auto& s : samples)
    if (std::find(values.begin(), values.end(), s.label) == values.end())
      values.push_back(s.label);
  std::sort(values.begin(), values.end());

  for (int value : values) {
    bool boolean_target = dom.pred(target_pred).ret.is_bool();
    if (boolean_target && value == 0) continue;  // Boolean rules define the positives

    detail::Bitset pos(n), neg(n);
    for (size_t i = 0; i < n; ++i)
      (samples[i].label == value ? pos : neg).set(i);

    FirstOrderRule rule;
    rule.target_pred = target_pred;
    rule.target_code = boolean_target ? -1 : value;
    rule.head_types = head_types;

    detail::Bitset uncovered = pos;
    bool separable = true;
    while (uncovered.any() && int(rule.clauses.size()) < cfg.max_clauses) {
      RuleClause clause;
      detail::Bitset covered(n);
      for (size_t i = 0; i < n; ++i) covered.set(i);
      size_t cur_p = uncovered.count_and(covered);
      size_t cur_n = neg.count_and(covered);

      while (cur_n > 0 && int(clause.lits.size()) < cfg.max_clause_len) {
        double best_gain = 1e-9;
        int best = -1;
        size_t best_p = 0, best_n = 0;
        // fallback for zero-gain plateaus (e.g. xor): strictly shrink the
        // covered negatives while keeping some positives
        int fb = -1;
        size_t fb_p = 0, fb_n = cur_n;
        for (size_t c = 0; c < candidates.size(); ++c) {
          detail::Bitset with = covered;
          with.and_with(truth[c]);
          size_t p1 = uncovered.count_and(with);
          size_t n1 = neg.count_and(with);
          double g = detail::foil_gain(p1, cur_p, cur_n, p1, n1);
          if (g > best_gain) {
            best_gain = g;
            best = int(c);
            best_p = p1;
            best_n = n1;
          }
          // plateau fallback considers only positive plain atoms; negated or
          // existential literals rarely purify and waste clause budget
          if (candidates[c].positive && !candidates[c].exists && p1 > 0 && n1 < fb_n) {
            fb = int(c);
            fb_p = p1;
            fb_n = n1;
          }
        }
        if (best < 0 && fb >= 0) {
          best = fb;
          best_p = fb_p;
          best_n = fb_n;
        }
        if (best < 0) break;
        clause.lits.push_back(candidates[size_t(best)]);
        covered.and_with(truth[size_t(best)]);
        cur_p = best_p;
        cur_n = best_n;
      }

      double precision = cur_p + cur_n == 0 ? 0 : double(cur_p) / double(cur_p + cur_n);
      if (cur_p == 0) {
        separable = false;
        break;
      }
      if (cur_n > 0 && precision < cfg.min_precision) {
        // drop this clause attempt's positives as an inseparable residue and
        // keep covering the rest
        separable = false;
        detail::Bitset failed = uncovered;
        failed.and_with(covered);
        uncovered.and_not(failed);
        continue;
      }
      rule.clauses.push_back(std::move(clause));
      uncovered.and_not(covered);
    }

    if (!separable || uncovered.any()) {
      size_t total_pos = pos.count();
      double recall =
          total_pos == 0 ? 1.0 : double(total_pos - uncovered.count()) / double(total_pos);
      if (recall < cfg.min_recall) {
        out.inseparable_values.push_back(value);
        if (rule.clauses.empty()) continue;  // nothing usable for this value
      }
    }
    out.rules.push_back(std::move(rule));
  }
  return out;
}

}  // namespace pds
