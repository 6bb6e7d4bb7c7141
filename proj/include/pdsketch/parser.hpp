#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "pdsketch/ast.hpp"
#include "pdsketch/token.hpp"

namespace pds {

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  DomainAST parse_domain() {
    DomainAST ast;
    expect(TokenKind::LParen);
    expect_symbol("define");
    expect_symbol("domain");
    if (!at(TokenKind::LParen)) fail("missing domain-name-def");
    expect(TokenKind::LParen);
    expect_symbol("domain");
    ast.name = expect(TokenKind::Symbol).text;
    expect(TokenKind::RParen);
    while (!at(TokenKind::RParen)) {
      expect(TokenKind::LParen);
      Token kw = expect(TokenKind::Keyword);
      std::string k = lower(kw.text);
      if (k == ":types") {
        parse_types(ast);
      } else if (k == ":predicates") {
        parse_predicates(ast);
      } else if (k == ":derived") {
        parse_derived(ast);
      } else if (k == ":action") {
        parse_action(ast);
      } else {
        fail("unknown content block " + kw.text, kw.pos);
      }
    }
    expect(TokenKind::RParen);
    if (!at(TokenKind::Eof)) fail("trailing tokens after domain definition");
    return ast;
  }

  Expr parse_single_expr() {
    Expr e = parse_expr();
    if (!at(TokenKind::Eof)) fail("trailing tokens after expression");
    return e;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;

  const Token& peek(size_t ahead = 0) const {
    size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  bool at(TokenKind k) const { return peek().kind == k; }
  Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, peek().pos); }
  [[noreturn]] void fail(const std::string& msg, SourcePos p) const {
    throw ParseError(msg, p);
  }

  Token expect(TokenKind k) {
    if (!at(k)) fail("unexpected token '" + peek().text + "'");
    return next();
  }
  Token expect_symbol(const std::string& s) {
    if (!at(TokenKind::Symbol) || lower(peek().text) != s)
      fail("expected '" + s + "', got '" + peek().text + "'");
    return next();
  }

  // --- types ---------------------------------------------------------------

  BaseType parse_base_type() {
    Token t = expect(TokenKind::Symbol);
    std::string name = t.text;
    std::string low = lower(name);
    if (low == "vector") {
      expect(TokenKind::LBracket);
      Token prim = expect(TokenKind::Symbol);
      std::string p = lower(prim.text);
      BaseType::Prim elem;
      if (p == "bool")
        elem = BaseType::Prim::Bool;
      else if (p == "int64")
        elem = BaseType::Prim::Int64;
      else if (p == "float32")
        elem = BaseType::Prim::Float32;
      else
        fail("unknown vector element type " + prim.text, prim.pos);
      int dim = -1;
      if (at(TokenKind::Int)) dim = int(std::strtol(next().text.c_str(), nullptr, 10));
      expect(TokenKind::RBracket);
      return BaseType::vector_of(elem, dim);
    }
    BaseType t2;
    if (low == "bool")
      t2.kind = BaseType::Kind::Bool;
    else if (low == "int64")
      t2.kind = BaseType::Kind::Int64;
    else if (low == "float32")
      t2.kind = BaseType::Kind::Float32;
    else
      return BaseType::named(name);
    return t2;
  }

  void parse_types(DomainAST& ast) {
    // one or more "name+ - base" groups until ")"
    while (!at(TokenKind::RParen)) {
      TypeDef td;
      td.pos = peek().pos;
      while (at(TokenKind::Symbol)) td.names.push_back(next().text);
      if (td.names.empty()) fail("expected type name");
      expect(TokenKind::Dash);
      td.base = parse_base_type();
      ast.type_defs.push_back(std::move(td));
    }
    expect(TokenKind::RParen);
  }

  // --- kwargs ----------------------------------------------------------------

  std::vector<Kwarg> parse_kwargs_opt() {
    std::vector<Kwarg> out;
    if (!at(TokenKind::LBracket)) return out;
    next();
    while (!at(TokenKind::RBracket)) {
      Kwarg kw;
      kw.key = expect(TokenKind::Symbol).text;
      expect(TokenKind::Equals);
      const Token& v = peek();
      switch (v.kind) {
        case TokenKind::String:
          kw.kind = Kwarg::Kind::String;
          kw.str_val = v.text.substr(1, v.text.size() - 2);
          next();
          break;
        case TokenKind::Int:
          kw.kind = Kwarg::Kind::Int;
          kw.int_val = std::strtoll(v.text.c_str(), nullptr, 10);
          next();
          break;
        case TokenKind::Float:
          kw.kind = Kwarg::Kind::Float;
          kw.float_val = std::strtod(v.text.c_str(), nullptr);
          next();
          break;
        case TokenKind::Symbol: {
          std::string low = lower(v.text);
          if (low == "true" || low == "false") {
            kw.kind = Kwarg::Kind::Bool;
            kw.bool_val = low == "true";
            next();
          } else {
            kw.kind = Kwarg::Kind::Type;
            kw.type_val = parse_base_type();
          }
          break;
        }
        default:
          fail("malformed kwarg value");
      }
      out.push_back(std::move(kw));
    }
    expect(TokenKind::RBracket);
    return out;
  }

  // --- typed variable lists --------------------------------------------------

  // variable+ ("-" type)? groups; an omitted type is recorded as "" and
  // inferred during validation (some listings leave parameters untyped).
  std::vector<TypedVar> parse_variable_list(TokenKind terminator) {
    std::vector<TypedVar> out;
    while (!at(terminator)) {
      std::vector<std::string> group;
      while (at(TokenKind::Variable)) group.push_back(next().text);
      if (group.empty()) fail("expected variable");
      std::string type;
      if (at(TokenKind::Dash)) {
        next();
        type = expect(TokenKind::Symbol).text;
      }
      for (auto& g : group) out.push_back({std::move(g), type});
    }
    return out;
  }

  PredicateDef parse_predicate_signature() {
    PredicateDef pd;
    expect(TokenKind::LParen);
    pd.pos = peek().pos;
    pd.name = expect(TokenKind::Symbol).text;
    pd.kwargs = parse_kwargs_opt();
    pd.params = parse_variable_list(TokenKind::RParen);
    expect(TokenKind::RParen);
    return pd;
  }

  void parse_predicates(DomainAST& ast) {
    while (!at(TokenKind::RParen)) ast.predicate_defs.push_back(parse_predicate_signature());
    expect(TokenKind::RParen);
  }

  void parse_derived(DomainAST& ast) {
    DerivedDef dd;
    dd.signature = parse_predicate_signature();
    dd.body = parse_expr();
    expect(TokenKind::RParen);
    ast.derived_defs.push_back(std::move(dd));
  }

  void parse_action(DomainAST& ast) {
    ActionDef ad;
    ad.pos = peek().pos;
    ad.name = expect(TokenKind::Symbol).text;
    ad.kwargs = parse_kwargs_opt();
    bool have_params = false, have_pre = false, have_eff = false;
    while (at(TokenKind::Keyword)) {
      Token kw = next();
      std::string k = lower(kw.text);
      if (k == ":parameters" || k == ":parameter") {
        expect(TokenKind::LParen);
        ad.params = parse_variable_list(TokenKind::RParen);
        expect(TokenKind::RParen);
        have_params = true;
      } else if (k == ":precondition") {
        ad.precondition = parse_expr();
        have_pre = true;
      } else if (k == ":effect") {
        ad.effect = parse_expr();
        have_eff = true;
      } else {
        fail("unknown action clause " + kw.text, kw.pos);
      }
    }
    if (!have_params) fail("action " + ad.name + " missing :parameters", ad.pos);
    if (!have_pre) fail("action " + ad.name + " missing :precondition", ad.pos);
    if (!have_eff) fail("action " + ad.name + " missing :effect", ad.pos);
    expect(TokenKind::RParen);
    ast.action_defs.push_back(std::move(ad));
  }

  // --- expressions -----------------------------------------------------------

  TypedVar parse_quantifier_binding() {
    expect(TokenKind::LParen);
    TypedVar tv;
    tv.name = expect(TokenKind::Variable).text;
    if (at(TokenKind::Dash)) {
      next();
      tv.type = expect(TokenKind::Symbol).text;
    }
    expect(TokenKind::RParen);
    return tv;
  }

  Expr parse_expr() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Variable: {
        Expr e = Expr::variable(t.text);
        e.pos = t.pos;
        next();
        return e;
      }
      case TokenKind::Int: {
        Expr e = Expr::make(ExprKind::Constant);
        e.const_kind = Expr::ConstKind::Int;
        e.int_val = std::strtoll(t.text.c_str(), nullptr, 10);
        e.pos = t.pos;
        next();
        return e;
      }
      case TokenKind::Float: {
        Expr e = Expr::make(ExprKind::Constant);
        e.const_kind = Expr::ConstKind::Float;
        e.float_val = std::strtod(t.text.c_str(), nullptr);
        e.pos = t.pos;
        next();
        return e;
      }
      case TokenKind::Symbol: {
        Expr e;
        std::string low = lower(t.text);
        if (low == "true")
          e = Expr::bool_const(true);
        else if (low == "false")
          e = Expr::bool_const(false);
        else
          e = Expr::object_const(t.text);
        e.pos = t.pos;
        next();
        return e;
      }
      case TokenKind::Slot: {
        // bare "??" argument sugar
        if (t.text != "??") fail("slot call must be parenthesized");
        Expr e = Expr::make(ExprKind::Constant);
        e.const_kind = Expr::ConstKind::Blank;
        e.pos = t.pos;
        next();
        return e;
      }
      case TokenKind::LParen:
        break;
      default:
        fail("unexpected token '" + t.text + "' in expression");
    }

    SourcePos open_pos = peek().pos;
    next();  // "("
    const Token& head = peek();

    if (head.kind == TokenKind::Slot) {
      Expr e = Expr::make(ExprKind::SlotCall);
      e.pos = head.pos;
      e.name = head.text.substr(2);
      next();
      e.kwargs = parse_kwargs_opt();
      while (!at(TokenKind::RParen)) e.children.push_back(parse_expr());
      expect(TokenKind::RParen);
      return e;
    }
    if (head.kind != TokenKind::Symbol) fail("expected operator or predicate name");

    std::string low = lower(head.text);
    SourcePos head_pos = head.pos;
    next();

    auto finish_nary = [&](ExprKind k, int min_arity, int max_arity) {
      Expr e = Expr::make(k);
      e.pos = head_pos;
      while (!at(TokenKind::RParen)) e.children.push_back(parse_expr());
      expect(TokenKind::RParen);
      int n = int(e.children.size());
      if (n < min_arity || (max_arity >= 0 && n > max_arity))
        fail("wrong arity for '" + low + "'", head_pos);
      return e;
    };

    if (low == "and") return finish_nary(ExprKind::And, 0, -1);
    if (low == "or") return finish_nary(ExprKind::Or, 0, -1);
    if (low == "not") return finish_nary(ExprKind::Not, 1, 1);
    if (low == "implies") return finish_nary(ExprKind::Implies, 2, 2);
    if (low == "when") return finish_nary(ExprKind::When, 2, 2);
    if (low == "assign") return finish_nary(ExprKind::Assign, 2, 2);
    if (low == "forall" || low == "exists" || low == "foreach") {
      Expr e = Expr::make(low == "forall"  ? ExprKind::Forall
                          : low == "exists" ? ExprKind::Exists
                                            : ExprKind::Foreach);
      e.pos = head_pos;
      e.bound = parse_quantifier_binding();
      e.children.push_back(parse_expr());
      expect(TokenKind::RParen);
      return e;
    }

    Expr e = Expr::make(ExprKind::PredicateCall);
    e.pos = head_pos;
    e.name = head.text;
    while (!at(TokenKind::RParen)) e.children.push_back(parse_expr());
    if (at(TokenKind::Eof)) fail("unclosed paren", open_pos);
    expect(TokenKind::RParen);
    return e;
  }
};

}  // namespace detail

inline DomainAST parse_domain(const std::string& source) {
  detail::Parser p(tokenize(source));
  return p.parse_domain();
}

inline Expr parse_expr_text(const std::string& source) {
  detail::Parser p(tokenize(source));
  return p.parse_single_expr();
}

}  // namespace pds
