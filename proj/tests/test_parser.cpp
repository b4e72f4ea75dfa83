#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <string>

#include "bspot/interpreter.hpp"
#include "bspot/parser.hpp"
#include "support.hpp"

using bspot::ParseError;
using bspot::parse_program;
using bspot::Program;
using bspot::Stmt;
using testsupport::one_input;
using testsupport::run_expr;

namespace {

ParseError capture(const std::string& text) {
  try {
    parse_program(text);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a parse error for: " << text);
  return ParseError(0, 0, "unreachable");
}

}  // namespace

TEST_CASE("operator precedence matches C") {
  CHECK(run_expr("1 + 2 * 3") == 7);
  CHECK(run_expr("2 * (3 + 4)") == 14);
  CHECK(run_expr("2 << 1 + 1") == 8);        // shift binds looser than +
  CHECK(run_expr("1 << 3 == 8") == 1);       // shift binds tighter than ==
  CHECK(run_expr("1 << 2 < 9") == 1);        // shift binds tighter than <
  CHECK(run_expr("4 & 2 == 2") == 0);        // == binds tighter than &
  CHECK(run_expr("1 | 2 ^ 3 & 4") == 3);     // & over ^ over |
  CHECK(run_expr("1 < 2 == 1") == 1);
}

TEST_CASE("binary operators associate left") {
  CHECK(run_expr("10 - 2 - 3") == 5);
  CHECK(run_expr("100 / 10 / 5") == 2);
  CHECK(run_expr("1 << 2 << 3") == 32);
}

TEST_CASE("unary operators bind tightest and chain") {
  CHECK(run_expr("-2 * 3") == -6);
  CHECK(run_expr("--5") == 5);
  CHECK(run_expr("~5 & 0xFF") == 250);
  CHECK(run_expr("!3 | !0") == 1);
  CHECK(run_expr("-(2 + 3)") == -5);
}

TEST_CASE("integer literals cover decimal and hex") {
  CHECK(run_expr("0") == 0);
  CHECK(run_expr("0xff + 0xFF") == 510);
  CHECK(run_expr("9223372036854775807") == INT64_MAX);
  // Hex admits the full unsigned range and is reinterpreted as two's complement.
  CHECK(run_expr("0xFFFFFFFFFFFFFFFF") == -1);
  CHECK(run_expr("0x8000000000000000") == INT64_MIN);
}

TEST_CASE("comments and blank lines do not consume statement indices") {
  const std::string text =
      "# header\n"
      "\n"
      "x := get_input(\"in\")\n"
      "  # indented comment\n"
      "if x then goto 3 else goto 2   # trailing comment\n"
      "output(x)\n"
      "halt\n";
  Program p = parse_program(text);
  REQUIRE(p.stmts.size() == 4);
  CHECK(p.stmts[0].kind == Stmt::Kind::Assign);
  CHECK(p.stmts[1].kind == Stmt::Kind::CondGoto);
  CHECK(p.stmts[1].target_true == 3);
  CHECK(p.stmts[1].target_false == 2);
  CHECK(p.stmts[0].line == 3);
  CHECK(p.stmts[1].line == 5);
  CHECK(p.stmts[2].line == 6);
  CHECK(p.stmts[3].line == 7);

  // Zero byte falls through to the output; nonzero jumps straight to halt.
  CHECK(bspot::run_plain(p, one_input({0})).output == std::vector<std::uint8_t>{0});
  CHECK(bspot::run_plain(p, one_input({5})).output.empty());
}

TEST_CASE("goto accepts a full expression target") {
  Program p = parse_program("goto 1 + 1\nhalt\nhalt\n");
  REQUIRE(p.stmts.size() == 3);
  CHECK(bspot::run_plain(p, {}).status == bspot::RunStatus::Halted);
}

TEST_CASE("store and load round a byte through memory") {
  Program p = parse_program("store(3, 300)\nx := load(3)\noutput(x)\nhalt\n");
  CHECK(bspot::run_plain(p, {}).output == std::vector<std::uint8_t>{44});  // 300 mod 256
}

TEST_CASE("empty and comment-only inputs parse to empty programs") {
  CHECK(parse_program("").stmts.empty());
  CHECK(parse_program("\n\n").stmts.empty());
  CHECK(parse_program("# just a comment\n  # another\n").stmts.empty());
}

TEST_CASE("parse errors carry the offending line and column") {
  const ParseError e = capture("a := $\n");
  CHECK(e.line() == 1);
  CHECK(e.column() == 6);
  CHECK(std::string(e.what()).find("expected an expression") != std::string::npos);

  const ParseError e2 = capture("x := 1\nwhat\n");
  CHECK(e2.line() == 2);
  CHECK(std::string(e2.what()).find(":=") != std::string::npos);
}

TEST_CASE("reserved words cannot be variables") {
  CHECK(std::string(capture("load := 1\n").what()).find("reserved") != std::string::npos);
  CHECK(std::string(capture("x := then\n").what()).find("reserved") != std::string::npos);
  CHECK(std::string(capture("get_input := 2\n").what()).find("reserved") != std::string::npos);
}

TEST_CASE("trailing characters after a statement are rejected") {
  const ParseError e = capture("halt halt\n");
  CHECK(e.line() == 1);
  CHECK(std::string(e.what()).find("trailing characters") != std::string::npos);
}

TEST_CASE("malformed literals are rejected") {
  CHECK(std::string(capture("x := 9223372036854775808\n").what()).find("out of range") !=
        std::string::npos);
  CHECK(std::string(capture("x := 0x10000000000000000\n").what()).find("out of range") !=
        std::string::npos);
  CHECK(std::string(capture("x := 12ab\n").what()).find("malformed") != std::string::npos);
  CHECK(std::string(capture("x := 0x\n").what()).find("hex digits") != std::string::npos);
}

TEST_CASE("jump targets must be plain indices within 32 bits") {
  CHECK(std::string(capture("if 1 then goto 99999999999 else goto 0\n").what())
            .find("too large") != std::string::npos);
  CHECK(std::string(capture("if 1 then goto x else goto 0\n").what())
            .find("statement index") != std::string::npos);
  CHECK(std::string(capture("if 1 then goto 0\nhalt\n").what()).find("expected 'else'") !=
        std::string::npos);
}

TEST_CASE("unterminated strings are rejected") {
  CHECK(std::string(capture("x := get_input(\"in\n").what()).find("unterminated") !=
        std::string::npos);
  CHECK(std::string(capture("x := get_input(\"in").what()).find("unterminated") !=
        std::string::npos);
}

TEST_CASE("pathologically nested expressions fail cleanly") {
  std::string text = "x := ";
  for (int i = 0; i < 300; ++i) text += '(';
  text += '1';
  for (int i = 0; i < 300; ++i) text += ')';
  text += '\n';
  CHECK(std::string(capture(text).what()).find("deeply nested") != std::string::npos);
}

TEST_CASE("all bundled samples parse") {
  for (const testsupport::SampleCase& c : testsupport::corpus())
    CHECK_NOTHROW(testsupport::load_sample(c.name));
}
