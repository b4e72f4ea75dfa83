#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bspot/program.hpp"

namespace bspot {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::uint32_t line, std::uint32_t column, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(line) + ":" +
                           std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  std::uint32_t line() const { return line_; }
  std::uint32_t column() const { return column_; }

 private:
  std::uint32_t line_, column_;
};

namespace detail {

// Statement grammar, one statement per line ('#' starts a comment):
//   <var> := <expr>
//   store(<expr>, <expr>)
//   goto <expr>
//   if <expr> then goto <int> else goto <int>
//   output(<expr>)
//   assert(<expr>)
//   halt
// Expressions use C precedence over + - * / % & | ^ << >> == != < <= > >=
// with unary - ~ !, plus load(<expr>) and get_input("<name>").
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Program parse() {
    Program p;
    while (!at_end()) {
      skip_blank();
      if (at_end()) break;
      parse_statement(p);
      std::uint32_t line = line_;
      skip_spaces_and_comment();
      if (!at_end() && !consume_newline())
        fail("trailing characters after statement");
      p.stmts.back().line = line;
    }
    return p;
  }

 private:
  static constexpr int kMaxDepth = 256;

  void parse_statement(Program& p) {
    std::string_view word = peek_word();
    if (word == "halt") {
      take_word();
      p.halt();
    } else if (word == "goto") {
      take_word();
      p.jump(parse_expr(p));
    } else if (word == "output") {
      take_word();
      expect('(');
      std::uint32_t e = parse_expr(p);
      expect(')');
      p.output(e);
    } else if (word == "assert") {
      take_word();
      expect('(');
      std::uint32_t e = parse_expr(p);
      expect(')');
      p.assertion(e);
    } else if (word == "store") {
      take_word();
      expect('(');
      std::uint32_t addr = parse_expr(p);
      expect(',');
      std::uint32_t val = parse_expr(p);
      expect(')');
      p.store(addr, val);
    } else if (word == "if") {
      take_word();
      std::uint32_t cond = parse_expr(p);
      expect_word("then");
      expect_word("goto");
      std::uint32_t t = parse_target();
      expect_word("else");
      expect_word("goto");
      std::uint32_t f = parse_target();
      p.cond_jump(cond, t, f);
    } else if (!word.empty() && is_ident_start(word[0])) {
      if (is_keyword(word)) fail("'" + std::string(word) + "' is reserved");
      take_word();
      skip_spaces();
      if (!(match(':') && match('='))) fail("expected ':=' after variable name");
      p.assign(word, parse_expr(p));
    } else {
      fail("expected a statement");
    }
  }

  std::uint32_t parse_target() {
    skip_spaces();
    std::uint64_t v = 0;
    std::uint32_t start_col = col_;
    if (at_end() || !std::isdigit(static_cast<unsigned char>(cur())))
      fail("expected a statement index");
    while (!at_end() && std::isdigit(static_cast<unsigned char>(cur()))) {
      v = v * 10 + static_cast<std::uint64_t>(cur() - '0');
      if (v > 0xFFFFFFFFu) fail_at(line_, start_col, "statement index too large");
      advance();
    }
    return static_cast<std::uint32_t>(v);
  }

  // Precedence climbing, lowest first: | ^ & (==/!=) (< <= > >=) (<< >>) (+ -) (* / %)
  std::uint32_t parse_expr(Program& p) { return parse_binary(p, 0, 0); }

  std::optional<BinOp> peek_op(int level) {
    skip_spaces();
    auto two = [&](char a, char b) { return cur() == a && peek(1) == b; };
    switch (level) {
      case 0: if (cur() == '|' ) return BinOp::BitOr; break;
      case 1: if (cur() == '^') return BinOp::BitXor; break;
      case 2: if (cur() == '&') return BinOp::BitAnd; break;
      case 3:
        if (two('=', '=')) return BinOp::Eq;
        if (two('!', '=')) return BinOp::Ne;
        break;
      case 4:
        if (two('<', '=')) return BinOp::Le;
        if (two('>', '=')) return BinOp::Ge;
        if (cur() == '<' && peek(1) != '<') return BinOp::Lt;
        if (cur() == '>' && peek(1) != '>') return BinOp::Gt;
        break;
      case 5:
        if (two('<', '<')) return BinOp::Shl;
        if (two('>', '>')) return BinOp::Shr;
        break;
      case 6:
        if (cur() == '+') return BinOp::Add;
        if (cur() == '-') return BinOp::Sub;
        break;
      case 7:
        if (cur() == '*') return BinOp::Mul;
        if (cur() == '/') return BinOp::Div;
        if (cur() == '%') return BinOp::Mod;
        break;
    }
    return std::nullopt;
  }

  static int op_width(BinOp op) {
    switch (op) {
      case BinOp::Eq: case BinOp::Ne: case BinOp::Le: case BinOp::Ge:
      case BinOp::Shl: case BinOp::Shr:
        return 2;
      default:
        return 1;
    }
  }

  std::uint32_t parse_binary(Program& p, int level, int depth) {
    if (depth > kMaxDepth) fail("expression too deeply nested");
    if (level == 8) return parse_unary(p, depth);
    std::uint32_t lhs = parse_binary(p, level + 1, depth + 1);
    while (auto op = peek_op(level)) {
      for (int i = 0; i < op_width(*op); ++i) advance();
      std::uint32_t rhs = parse_binary(p, level + 1, depth + 1);
      lhs = p.ebin(*op, lhs, rhs);
    }
    return lhs;
  }

  std::uint32_t parse_unary(Program& p, int depth) {
    if (depth > kMaxDepth) fail("expression too deeply nested");
    skip_spaces();
    if (match('-')) return p.eun(UnOp::Neg, parse_unary(p, depth + 1));
    if (match('~')) return p.eun(UnOp::BitNot, parse_unary(p, depth + 1));
    if (cur() == '!' && peek(1) != '=') {
      advance();
      return p.eun(UnOp::LogicalNot, parse_unary(p, depth + 1));
    }
    return parse_primary(p, depth);
  }

  std::uint32_t parse_primary(Program& p, int depth) {
    skip_spaces();
    if (match('(')) {
      std::uint32_t e = parse_binary(p, 0, depth + 1);
      expect(')');
      return e;
    }
    if (!at_end() && std::isdigit(static_cast<unsigned char>(cur())))
      return p.econst(parse_int());
    std::string_view word = peek_word();
    if (word == "load") {
      take_word();
      expect('(');
      std::uint32_t addr = parse_binary(p, 0, depth + 1);
      expect(')');
      return p.eload(addr);
    }
    if (word == "get_input") {
      take_word();
      expect('(');
      std::string name = parse_string();
      expect(')');
      return p.einput(name);
    }
    if (!word.empty() && is_ident_start(word[0])) {
      if (is_keyword(word)) fail("'" + std::string(word) + "' is reserved");
      take_word();
      return p.evar(word);
    }
    fail("expected an expression");
  }

  std::int64_t parse_int() {
    std::uint32_t start_col = col_;
    std::uint64_t v = 0;
    if (cur() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance();
      advance();
      if (at_end() || !std::isxdigit(static_cast<unsigned char>(cur())))
        fail("expected hex digits after 0x");
      while (!at_end() && std::isxdigit(static_cast<unsigned char>(cur()))) {
        int d = hex_value(cur());
        if (v > (0xFFFFFFFFFFFFFFFFull - static_cast<std::uint64_t>(d)) / 16)
          fail_at(line_, start_col, "integer literal out of range");
        v = v * 16 + static_cast<std::uint64_t>(d);
        advance();
      }
    } else {
      while (!at_end() && std::isdigit(static_cast<unsigned char>(cur()))) {
        std::uint64_t d = static_cast<std::uint64_t>(cur() - '0');
        if (v > (0x7FFFFFFFFFFFFFFFull - d) / 10)
          fail_at(line_, start_col, "integer literal out of range");
        v = v * 10 + d;
        advance();
      }
    }
    if (!at_end() && is_ident_start(cur())) fail("malformed integer literal");
    return static_cast<std::int64_t>(v);
  }

  std::string parse_string() {
    skip_spaces();
    if (!match('"')) fail("expected a quoted source name");
    std::string out;
    while (!at_end() && cur() != '"' && cur() != '\n') {
      out.push_back(cur());
      advance();
    }
    if (!match('"')) fail("unterminated string");
    return out;
  }

  // --- lexing helpers ----------------------------------------------------

  static bool is_ident_start(char c) {
    return c == '_' || std::isalpha(static_cast<unsigned char>(c));
  }
  static bool is_ident_char(char c) {
    return c == '_' || std::isalnum(static_cast<unsigned char>(c));
  }
  static bool is_keyword(std::string_view w) {
    return w == "if" || w == "then" || w == "else" || w == "goto" ||
           w == "output" || w == "assert" || w == "halt" || w == "store" ||
           w == "load" || w == "get_input";
  }
  static int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return c - 'A' + 10;
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char cur() const { return at_end() ? '\0' : text_[pos_]; }
  char peek(std::size_t n) const {
    return pos_ + n < text_.size() ? text_[pos_ + n] : '\0';
  }

  void advance() {
    if (at_end()) return;
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  bool match(char c) {
    skip_spaces();
    if (cur() != c) return false;
    advance();
    return true;
  }

  void expect(char c) {
    if (!match(c)) fail(std::string("expected '") + c + "'");
  }

  void expect_word(std::string_view w) {
    if (peek_word() != w) fail("expected '" + std::string(w) + "'");
    take_word();
  }

  std::string_view peek_word() {
    skip_spaces();
    if (at_end() || !is_ident_start(cur())) return {};
    std::size_t end = pos_;
    while (end < text_.size() && is_ident_char(text_[end])) ++end;
    return text_.substr(pos_, end - pos_);
  }

  void take_word() {
    while (!at_end() && is_ident_char(cur())) advance();
  }

  void skip_spaces() {
    while (!at_end() && (cur() == ' ' || cur() == '\t' || cur() == '\r')) advance();
  }

  void skip_spaces_and_comment() {
    skip_spaces();
    if (cur() == '#')
      while (!at_end() && cur() != '\n') advance();
  }

  bool consume_newline() {
    if (cur() != '\n') return false;
    advance();
    return true;
  }

  // Skip blank and comment-only lines between statements.
  void skip_blank() {
    for (;;) {
      skip_spaces_and_comment();
      if (!at_end() && cur() == '\n') {
        advance();
        continue;
      }
      return;
    }
  }

  [[noreturn]] void fail(const std::string& msg) { fail_at(line_, col_, msg); }
  [[noreturn]] void fail_at(std::uint32_t line, std::uint32_t col, const std::string& msg) {
    throw ParseError(line, col, msg);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1, col_ = 1;
};

}  // namespace detail

inline Program parse_program(std::string_view text) {
  return detail::Parser(text).parse();
}

}  // namespace bspot
