#pragma once

#include <string>
#include <vector>

#include "pdsketch/common.hpp"

namespace pds {

// base-type: type-name | "bool" | "int64" | "float32" | vector[prim, dim?]
struct BaseType {
  enum class Kind { Named, Bool, Int64, Float32, Vector };
  enum class Prim { Bool, Int64, Float32 };

  Kind kind = Kind::Named;
  std::string name;               // Kind::Named
  Prim elem = Prim::Float32;      // Kind::Vector
  int dim = -1;                   // Kind::Vector; -1 = unspecified

  static BaseType named(std::string n) {
    BaseType t;
    t.kind = Kind::Named;
    t.name = std::move(n);
    return t;
  }
  static BaseType vector_of(Prim p, int d) {
    BaseType t;
    t.kind = Kind::Vector;
    t.elem = p;
    t.dim = d;
    return t;
  }

  bool operator==(const BaseType& o) const {
    return kind == o.kind && name == o.name &&
           (kind != Kind::Vector || (elem == o.elem && dim == o.dim));
  }

  std::string str() const {
    switch (kind) {
      case Kind::Named: return name;
      case Kind::Bool: return "bool";
      case Kind::Int64: return "int64";
      case Kind::Float32: return "float32";
      case Kind::Vector: {
        std::string e = elem == Prim::Bool ? "bool" : elem == Prim::Int64 ? "int64" : "float32";
        if (dim < 0) return "vector[" + e + "]";
        return "vector[" + e + ", " + std::to_string(dim) + "]";
      }
    }
    return "?";
  }
};

struct Kwarg {
  enum class Kind { String, Int, Float, Bool, Type };
  std::string key;
  Kind kind = Kind::String;
  std::string str_val;
  int64_t int_val = 0;
  double float_val = 0;
  bool bool_val = false;
  BaseType type_val;

  std::string value_str() const {
    switch (kind) {
      case Kind::String: return "\"" + str_val + "\"";
      case Kind::Int: return std::to_string(int_val);
      case Kind::Float: return format_float(float_val);
      case Kind::Bool: return bool_val ? "true" : "false";
      case Kind::Type: return type_val.str();
    }
    return "?";
  }
};

struct TypedVar {
  std::string name;  // includes the leading "?"
  std::string type;  // type name
};

enum class ExprKind {
  And,
  Or,
  Not,
  Implies,
  Forall,
  Exists,
  Foreach,
  When,
  Assign,
  PredicateCall,
  SlotCall,
  VariableRef,
  Constant,
};

struct Expr {
  ExprKind kind = ExprKind::Constant;

  // PredicateCall / SlotCall: callee name (slot name may be empty for bare "??")
  std::string name;
  std::vector<Kwarg> kwargs;  // SlotCall only

  TypedVar bound;  // Forall / Exists / Foreach

  // VariableRef: name holds the variable (with "?").
  // Constant:
  enum class ConstKind { True, False, Int, Float, Object, Blank };
  ConstKind const_kind = ConstKind::Object;
  int64_t int_val = 0;
  double float_val = 0;

  std::vector<Expr> children;
  SourcePos pos;

  static Expr make(ExprKind k) {
    Expr e;
    e.kind = k;
    return e;
  }
  static Expr variable(std::string v) {
    Expr e;
    e.kind = ExprKind::VariableRef;
    e.name = std::move(v);
    return e;
  }
  static Expr object_const(std::string v) {
    Expr e;
    e.kind = ExprKind::Constant;
    e.const_kind = ConstKind::Object;
    e.name = std::move(v);
    return e;
  }
  static Expr bool_const(bool b) {
    Expr e;
    e.kind = ExprKind::Constant;
    e.const_kind = b ? ConstKind::True : ConstKind::False;
    return e;
  }
  bool is_const(ConstKind k) const { return kind == ExprKind::Constant && const_kind == k; }
};

struct PredicateDef {
  std::string name;
  std::vector<Kwarg> kwargs;
  std::vector<TypedVar> params;
  SourcePos pos;

  // return_type kwarg, or bool when absent (the PDDL default)
  BaseType return_type() const {
    for (const auto& kw : kwargs)
      if (kw.key == "return_type" && kw.kind == Kwarg::Kind::Type) return kw.type_val;
    BaseType t;
    t.kind = BaseType::Kind::Bool;
    return t;
  }
};

struct TypeDef {
  std::vector<std::string> names;
  BaseType base;
  SourcePos pos;
};

struct DerivedDef {
  PredicateDef signature;
  Expr body;
};

struct ActionDef {
  std::string name;
  std::vector<Kwarg> kwargs;
  std::vector<TypedVar> params;
  Expr precondition;
  Expr effect;
  SourcePos pos;
};

struct DomainAST {
  std::string name;
  std::vector<TypeDef> type_defs;
  std::vector<PredicateDef> predicate_defs;
  std::vector<DerivedDef> derived_defs;
  std::vector<ActionDef> action_defs;
};

// ---------------------------------------------------------------------------
// Canonical printer. parse(print(parse(s))) must equal parse(s).

namespace detail {

inline void print_kwargs(std::string& out, const std::vector<Kwarg>& kwargs) {
  if (kwargs.empty()) return;
  out += " [";
  for (size_t i = 0; i < kwargs.size(); ++i) {
    if (i) out += ", ";
    out += kwargs[i].key + "=" + kwargs[i].value_str();
  }
  out += "]";
}

inline void print_params(std::string& out, const std::vector<TypedVar>& params) {
  for (const auto& p : params) {
    out += " " + p.name;
    if (!p.type.empty()) out += " - " + p.type;
  }
}

}  // namespace detail

inline std::string print_expr(const Expr& e) {
  std::string out;
  switch (e.kind) {
    case ExprKind::And:
    case ExprKind::Or: {
      out = e.kind == ExprKind::And ? "(and" : "(or";
      for (const auto& c : e.children) out += " " + print_expr(c);
      out += e.children.empty() ? " )" : ")";
      break;
    }
    case ExprKind::Not:
      out = "(not " + print_expr(e.children[0]) + ")";
      break;
    case ExprKind::Implies:
      out = "(implies " + print_expr(e.children[0]) + " " + print_expr(e.children[1]) + ")";
      break;
    case ExprKind::Forall:
    case ExprKind::Exists:
    case ExprKind::Foreach: {
      const char* kw = e.kind == ExprKind::Forall ? "forall"
                       : e.kind == ExprKind::Exists ? "exists"
                                                    : "foreach";
      out = std::string("(") + kw + " (" + e.bound.name;
      if (!e.bound.type.empty()) out += " - " + e.bound.type;
      out += ") " + print_expr(e.children[0]) + ")";
      break;
    }
    case ExprKind::When:
      out = "(when " + print_expr(e.children[0]) + " " + print_expr(e.children[1]) + ")";
      break;
    case ExprKind::Assign:
      out = "(assign " + print_expr(e.children[0]) + " " + print_expr(e.children[1]) + ")";
      break;
    case ExprKind::PredicateCall: {
      out = "(" + e.name;
      for (const auto& c : e.children) out += " " + print_expr(c);
      out += ")";
      break;
    }
    case ExprKind::SlotCall: {
      out = "(??" + e.name;
      detail::print_kwargs(out, e.kwargs);
      for (const auto& c : e.children) out += " " + print_expr(c);
      out += ")";
      break;
    }
    case ExprKind::VariableRef:
      out = e.name;
      break;
    case ExprKind::Constant:
      switch (e.const_kind) {
        case Expr::ConstKind::True: out = "true"; break;
        case Expr::ConstKind::False: out = "false"; break;
        case Expr::ConstKind::Int: out = std::to_string(e.int_val); break;
        case Expr::ConstKind::Float: out = format_float(e.float_val); break;
        case Expr::ConstKind::Object: out = e.name; break;
        case Expr::ConstKind::Blank: out = "??"; break;
      }
      break;
  }
  return out;
}

inline std::string print_domain(const DomainAST& ast) {
  std::string out = "(define domain\n  (domain " + ast.name + ")\n";
  for (const auto& td : ast.type_defs) {
    out += "  (:types";
    for (const auto& n : td.names) out += " " + n;
    out += " - " + td.base.str() + ")\n";
  }
  if (!ast.predicate_defs.empty()) {
    out += "  (:predicates\n";
    for (const auto& pd : ast.predicate_defs) {
      out += "    (" + pd.name;
      detail::print_kwargs(out, pd.kwargs);
      detail::print_params(out, pd.params);
      out += ")\n";
    }
    out += "  )\n";
  }
  for (const auto& dd : ast.derived_defs) {
    out += "  (:derived (" + dd.signature.name;
    detail::print_kwargs(out, dd.signature.kwargs);
    detail::print_params(out, dd.signature.params);
    out += ")\n    " + print_expr(dd.body) + ")\n";
  }
  for (const auto& ad : ast.action_defs) {
    out += "  (:action " + ad.name;
    detail::print_kwargs(out, ad.kwargs);
    out += "\n   :parameters (";
    for (size_t i = 0; i < ad.params.size(); ++i) {
      if (i) out += " ";
      out += ad.params[i].name;
      if (!ad.params[i].type.empty()) out += " - " + ad.params[i].type;
    }
    out += ")\n   :precondition " + print_expr(ad.precondition);
    out += "\n   :effect " + print_expr(ad.effect) + ")\n";
  }
  out += ")\n";
  return out;
}

}  // namespace pds
