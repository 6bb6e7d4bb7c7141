#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdsketch/ast.hpp"
#include "pdsketch/common.hpp"

namespace pds {

namespace detail {

struct PredInfo {
  std::vector<std::string> param_types;
  bool is_bool = true;
};

class Desugarer {
 public:
  explicit Desugarer(const DomainAST& ast) {
    for (const auto& pd : ast.predicate_defs) register_pred(pd);
    for (const auto& dd : ast.derived_defs) register_pred(dd.signature);
  }

  Expr run(const Expr& e, bool in_effect) {
    fresh_counter_ = 0;
    return rewrite(e, in_effect);
  }

 private:
  std::map<std::string, PredInfo> preds_;
  int fresh_counter_ = 0;

  void register_pred(const PredicateDef& pd) {
    PredInfo info;
    for (const auto& p : pd.params) info.param_types.push_back(p.type);
    info.is_bool = pd.return_type().kind == BaseType::Kind::Bool;
    preds_[pd.name] = info;
  }

  const PredInfo& lookup(const std::string& name, const Expr& at) {
    auto it = preds_.find(name);
    if (it == preds_.end())
      throw DesugarError("unknown predicate '" + name + "' at " + at.pos.str());
    return it->second;
  }

  std::string fresh_var() { return "?__b" + std::to_string(fresh_counter_++); }

  // (p ?? ...) -> (foreach (?__bN - T) (p ?__bN ...)), one foreach per blank,
  // leftmost blank outermost.
  Expr expand_blank_args(Expr call) {
    int blank_at = -1;
    for (size_t i = 0; i < call.children.size(); ++i) {
      if (call.children[i].is_const(Expr::ConstKind::Blank)) {
        blank_at = int(i);
        break;
      }
    }
    if (blank_at < 0) return call;
    const PredInfo& info = lookup(call.name, call);
    if (size_t(blank_at) >= info.param_types.size() ||
        info.param_types[size_t(blank_at)].empty())
      throw DesugarError("cannot infer type for '?\?' argument of '" + call.name + "' at " +
                         call.pos.str());
    std::string var = fresh_var();
    Expr inner = call;
    inner.children[size_t(blank_at)] = Expr::variable(var);
    Expr fe = Expr::make(ExprKind::Foreach);
    fe.pos = call.pos;
    fe.bound = {var, info.param_types[size_t(blank_at)]};
    fe.children.push_back(expand_blank_args(std::move(inner)));
    return fe;
  }

  Expr rewrite(const Expr& e, bool in_effect) {
    switch (e.kind) {
      case ExprKind::PredicateCall: {
        // p::assign / p::cond-assign / p::cond-select
        auto sep = e.name.find("::");
        if (sep != std::string::npos) {
          std::string base = e.name.substr(0, sep);
          std::string suffix = e.name.substr(sep + 2);
          const PredInfo& info = lookup(base, e);
          size_t arity = info.param_types.size();
          Expr call = Expr::make(ExprKind::PredicateCall);
          call.pos = e.pos;
          call.name = base;
          if (suffix == "assign") {
            if (e.children.size() != arity + 1)
              throw DesugarError("'" + e.name + "' expects " + std::to_string(arity) +
                                 " argument(s) plus a value at " + e.pos.str());
            for (size_t i = 0; i < arity; ++i) call.children.push_back(e.children[i]);
            Expr assign = Expr::make(ExprKind::Assign);
            assign.pos = e.pos;
            assign.children.push_back(std::move(call));
            assign.children.push_back(e.children[arity]);
            return rewrite(assign, in_effect);
          }
          if (suffix == "cond-assign") {
            if (e.children.size() != arity + 2)
              throw DesugarError("'" + e.name + "' expects " + std::to_string(arity) +
                                 " argument(s), a condition and a value at " + e.pos.str());
            for (size_t i = 0; i < arity; ++i) call.children.push_back(e.children[i]);
            Expr assign = Expr::make(ExprKind::Assign);
            assign.pos = e.pos;
            assign.children.push_back(std::move(call));
            assign.children.push_back(e.children[arity + 1]);
            Expr when = Expr::make(ExprKind::When);
            when.pos = e.pos;
            when.children.push_back(e.children[arity]);
            when.children.push_back(std::move(assign));
            return rewrite(when, in_effect);
          }
          if (suffix == "cond-select") {
            if (e.children.size() != arity + 1)
              throw DesugarError("'" + e.name + "' expects " + std::to_string(arity) +
                                 " argument(s) plus a condition at " + e.pos.str());
            for (size_t i = 0; i < arity; ++i) call.children.push_back(e.children[i]);
            Expr when = Expr::make(ExprKind::When);
            when.pos = e.pos;
            when.children.push_back(e.children[arity]);
            when.children.push_back(std::move(call));
            return rewrite(when, in_effect);
          }
          throw DesugarError("unknown '::' form '" + e.name + "' at " + e.pos.str());
        }

        lookup(e.name, e);  // unknown predicates surface here
        Expr out = expand_blank_args(e);
        if (out.kind != ExprKind::PredicateCall) return rewrite(out, in_effect);

        // rewrite argument subexpressions (arguments are never effects)
        for (auto& c : out.children) c = rewrite(c, false);

        // a bare Boolean predicate in an effect sets the entry to true
        if (in_effect && preds_.at(out.name).is_bool) {
          Expr assign = Expr::make(ExprKind::Assign);
          assign.pos = out.pos;
          assign.children.push_back(std::move(out));
          assign.children.push_back(Expr::bool_const(true));
          return assign;
        }
        return out;
      }
      case ExprKind::Not: {
        // (not (p args)) in an effect clears the entry
        if (in_effect && e.children[0].kind == ExprKind::PredicateCall &&
            e.children[0].name.find("::") == std::string::npos) {
          const PredInfo& info = lookup(e.children[0].name, e.children[0]);
          if (info.is_bool) {
            Expr call = rewrite(e.children[0], false);
            Expr assign = Expr::make(ExprKind::Assign);
            assign.pos = e.pos;
            assign.children.push_back(std::move(call));
            assign.children.push_back(Expr::bool_const(false));
            return assign;
          }
        }
        Expr out = e;
        out.children[0] = rewrite(e.children[0], false);
        return out;
      }
      case ExprKind::And: {
        Expr out = e;
        for (auto& c : out.children) c = rewrite(c, in_effect);
        return out;
      }
      case ExprKind::Or:
      case ExprKind::Implies: {
        Expr out = e;
        for (auto& c : out.children) c = rewrite(c, false);
        return out;
      }
      case ExprKind::Forall:
      case ExprKind::Exists: {
        Expr out = e;
        out.children[0] = rewrite(e.children[0], false);
        return out;
      }
      case ExprKind::Foreach: {
        Expr out = e;
        out.children[0] = rewrite(e.children[0], in_effect);
        return out;
      }
      case ExprKind::When: {
        Expr out = e;
        out.children[0] = rewrite(e.children[0], false);
        out.children[1] = rewrite(e.children[1], in_effect);
        return out;
      }
      case ExprKind::Assign: {
        Expr out = e;
        out.children[0] = rewrite(e.children[0], false);
        out.children[1] = rewrite(e.children[1], false);
        return out;
      }
      case ExprKind::SlotCall: {
        Expr out = e;
        for (auto& c : out.children) c = rewrite(c, false);
        return out;
      }
      default:
        return e;
    }
  }
};

}  // namespace detail

// Rewrites all sugar forms away: p::assign, p::cond-assign, p::cond-select,
// "(p ??)" arguments, and bare Boolean predicates in effects.
inline DomainAST desugar(const DomainAST& ast) {
  detail::Desugarer d(ast);
  DomainAST out = ast;
  for (auto& dd : out.derived_defs) dd.body = d.run(dd.body, false);
  for (auto& ad : out.action_defs) {
    ad.precondition = d.run(ad.precondition, false);
    ad.effect = d.run(ad.effect, true);
  }
  return out;
}

inline Expr desugar_expr(const DomainAST& ast, const Expr& e, bool in_effect = false) {
  detail::Desugarer d(ast);
  return d.run(e, in_effect);
}

}  // namespace pds
