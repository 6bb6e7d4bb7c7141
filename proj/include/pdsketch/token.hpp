#pragma once

#include <string>
#include <vector>

#include "pdsketch/common.hpp"

namespace pds {

enum class TokenKind {
  LParen,
  RParen,
  Symbol,
  Variable,  // leading "?"
  Slot,      // leading "??"
  Keyword,   // leading ":"
  String,
  Int,
  Float,
  Dash,
  LBracket,
  RBracket,
  Equals,
  Eof,
};

struct Token {
  TokenKind kind = TokenKind::Eof;
  std::string text;    // exact source slice (quotes included for strings)
  std::string trivia;  // whitespace/comments/commas preceding this token
  SourcePos pos;
};

namespace detail {

inline bool is_symbol_char(char c) {
  if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9'))
    return true;
  switch (c) {
    case '-':
    case '_':
    case ':':
    case '#':
    case '.':
    case '+':
    case '*':
    case '/':
    case '<':
    case '>':
    case '!':
    case '@':
      return true;
    default:
      return c < 0;  // UTF-8 continuation bytes
  }
}

}  // namespace detail

// Commas count as trivia, like whitespace: the grammar writes
// vector[float32, 64] but has no comma token.
inline std::vector<Token> tokenize(const std::string& source) {
  std::vector<Token> out;
  size_t i = 0;
  int line = 1, col = 1;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (source[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };

  std::string trivia;
  while (true) {
    // trivia: whitespace, commas, ";" comments to end of line
    size_t tstart = i;
    while (i < source.size()) {
      char c = source[i];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == ',') {
        advance(1);
      } else if (c == ';') {
        while (i < source.size() && source[i] != '\n') advance(1);
      } else {
        break;
      }
    }
    trivia = source.substr(tstart, i - tstart);

    if (i >= source.size()) {
      out.push_back({TokenKind::Eof, "", trivia, {line, col}});
      return out;
    }

    Token tok;
    tok.trivia = trivia;
    tok.pos = {line, col};
    char c = source[i];
    size_t start = i;

    auto finish = [&](TokenKind kind) {
      tok.kind = kind;
      tok.text = source.substr(start, i - start);
      out.push_back(tok);
    };

    if (c == '(') {
      advance(1);
      finish(TokenKind::LParen);
    } else if (c == ')') {
      advance(1);
      finish(TokenKind::RParen);
    } else if (c == '[') {
      advance(1);
      finish(TokenKind::LBracket);
    } else if (c == ']') {
      advance(1);
      finish(TokenKind::RBracket);
    } else if (c == '=') {
      advance(1);
      finish(TokenKind::Equals);
    } else if (c == '"') {
      advance(1);
      while (i < source.size() && source[i] != '"') advance(1);
      if (i >= source.size()) throw LexError("unterminated string", tok.pos);
      advance(1);
      finish(TokenKind::String);
    } else if (c == '?') {
      advance(1);
      bool slot = i < source.size() && source[i] == '?';
      if (slot) advance(1);
      while (i < source.size() && detail::is_symbol_char(source[i]) && source[i] != '?')
        advance(1);
      finish(slot ? TokenKind::Slot : TokenKind::Variable);
    } else if (c == ':') {
      advance(1);
      while (i < source.size() && detail::is_symbol_char(source[i])) advance(1);
      if (i - start == 1) throw LexError("bare ':'", tok.pos);
      finish(TokenKind::Keyword);
    } else if (c == '-' || (c >= '0' && c <= '9') ||
               (c == '.' && i + 1 < source.size() && source[i + 1] >= '0' &&
                source[i + 1] <= '9')) {
      // "-" directly followed by a digit or dot starts a number; a lone "-" is
      // the dash of typed variables / type defs.
      bool numeric = c != '-' || (i + 1 < source.size() &&
                                  ((source[i + 1] >= '0' && source[i + 1] <= '9') ||
                                   source[i + 1] == '.'));
      if (!numeric) {
        advance(1);
        if (i < source.size() && detail::is_symbol_char(source[i])) {
          // symbol starting with '-', e.g. "-foo"; continue as symbol
          while (i < source.size() && detail::is_symbol_char(source[i])) advance(1);
          finish(TokenKind::Symbol);
        } else {
          finish(TokenKind::Dash);
        }
        continue;
      }
      advance(1);
      bool is_float = c == '.';
      while (i < source.size()) {
        char d = source[i];
        if (d >= '0' && d <= '9') {
          advance(1);
        } else if (d == '.' && !is_float) {
          is_float = true;
          advance(1);
        } else if ((d == 'e' || d == 'E') && i + 1 < source.size() &&
                   ((source[i + 1] >= '0' && source[i + 1] <= '9') ||
                    source[i + 1] == '-' || source[i + 1] == '+')) {
          is_float = true;
          advance(2);
        } else {
          break;
        }
      }
      if (i < source.size() && detail::is_symbol_char(source[i]) && source[i] != '-') {
        // digit-leading symbols are illegal
        throw LexError("malformed number", tok.pos);
      }
      finish(is_float ? TokenKind::Float : TokenKind::Int);
    } else if (detail::is_symbol_char(c)) {
      advance(1);
      while (i < source.size() && detail::is_symbol_char(source[i])) advance(1);
      finish(TokenKind::Symbol);
    } else {
      throw LexError(std::string("illegal character '") + c + "'", tok.pos);
    }
  }
}

// Rebuilds the exact source from a token stream (round-trip check).
inline std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    out += t.trivia;
    out += t.text;
  }
  return out;
}

}  // namespace pds
