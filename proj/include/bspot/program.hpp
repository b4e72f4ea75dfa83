#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bspot {

enum class BinOp : std::uint8_t {
  Add, Sub, Mul, Div, Mod,
  BitAnd, BitOr, BitXor, Shl, Shr,
  Eq, Ne, Lt, Le, Gt, Ge,
};

enum class UnOp : std::uint8_t { Neg, BitNot, LogicalNot };

// Expressions live in a flat pool inside Program; children are pool indices.
struct Expr {
  enum class Kind : std::uint8_t { Const, Var, Load, Binop, Unop, GetInput };

  Kind kind = Kind::Const;
  std::int64_t value = 0;   // Const
  std::uint32_t slot = 0;   // Var: index into variables; GetInput: index into input_sources
  BinOp bin = BinOp::Add;
  UnOp un = UnOp::Neg;
  std::uint32_t lhs = 0, rhs = 0;  // expr pool indices (Load/Unop use lhs only)
};

struct Stmt {
  enum class Kind : std::uint8_t { Assign, Store, Goto, CondGoto, Output, Assert, Halt };

  Kind kind = Kind::Halt;
  std::uint32_t var = 0;             // Assign target slot
  std::uint32_t e1 = 0, e2 = 0;      // Assign/Goto/CondGoto/Output/Assert: e1; Store: e1 = addr, e2 = value
  std::uint32_t target_true = 0;     // CondGoto
  std::uint32_t target_false = 0;    // CondGoto
  std::uint32_t line = 0;            // 1-based source line, 0 if synthetic
};

struct Program {
  std::vector<Expr> exprs;
  std::vector<Stmt> stmts;
  std::vector<std::string> variables;      // interned variable names
  std::vector<std::string> input_sources;  // interned get_input source names

  std::uint32_t add_expr(Expr e) {
    exprs.push_back(e);
    return static_cast<std::uint32_t>(exprs.size() - 1);
  }

  std::uint32_t intern_variable(std::string_view name) {
    return intern(variables, name);
  }

  std::uint32_t intern_source(std::string_view name) {
    return intern(input_sources, name);
  }

  // Builders used by the parser and by tests that assemble programs directly.
  std::uint32_t econst(std::int64_t v) {
    Expr e;
    e.kind = Expr::Kind::Const;
    e.value = v;
    return add_expr(e);
  }
  std::uint32_t evar(std::string_view name) {
    Expr e;
    e.kind = Expr::Kind::Var;
    e.slot = intern_variable(name);
    return add_expr(e);
  }
  std::uint32_t eload(std::uint32_t addr) {
    Expr e;
    e.kind = Expr::Kind::Load;
    e.lhs = addr;
    return add_expr(e);
  }
  std::uint32_t ebin(BinOp op, std::uint32_t l, std::uint32_t r) {
    Expr e;
    e.kind = Expr::Kind::Binop;
    e.bin = op;
    e.lhs = l;
    e.rhs = r;
    return add_expr(e);
  }
  std::uint32_t eun(UnOp op, std::uint32_t operand) {
    Expr e;
    e.kind = Expr::Kind::Unop;
    e.un = op;
    e.lhs = operand;
    return add_expr(e);
  }
  std::uint32_t einput(std::string_view source) {
    Expr e;
    e.kind = Expr::Kind::GetInput;
    e.slot = intern_source(source);
    return add_expr(e);
  }

  void assign(std::string_view var, std::uint32_t e) {
    Stmt s;
    s.kind = Stmt::Kind::Assign;
    s.var = intern_variable(var);
    s.e1 = e;
    stmts.push_back(s);
  }
  void store(std::uint32_t addr, std::uint32_t value) {
    Stmt s;
    s.kind = Stmt::Kind::Store;
    s.e1 = addr;
    s.e2 = value;
    stmts.push_back(s);
  }
  void jump(std::uint32_t target_expr) {
    Stmt s;
    s.kind = Stmt::Kind::Goto;
    s.e1 = target_expr;
    stmts.push_back(s);
  }
  void cond_jump(std::uint32_t cond, std::uint32_t if_true, std::uint32_t if_false) {
    Stmt s;
    s.kind = Stmt::Kind::CondGoto;
    s.e1 = cond;
    s.target_true = if_true;
    s.target_false = if_false;
    stmts.push_back(s);
  }
  void output(std::uint32_t e) {
    Stmt s;
    s.kind = Stmt::Kind::Output;
    s.e1 = e;
    stmts.push_back(s);
  }
  void assertion(std::uint32_t e) {
    Stmt s;
    s.kind = Stmt::Kind::Assert;
    s.e1 = e;
    stmts.push_back(s);
  }
  void halt() {
    Stmt s;
    s.kind = Stmt::Kind::Halt;
    stmts.push_back(s);
  }

 private:
  static std::uint32_t intern(std::vector<std::string>& pool, std::string_view name) {
    for (std::uint32_t i = 0; i < pool.size(); ++i)
      if (pool[i] == name) return i;
    pool.emplace_back(name);
    return static_cast<std::uint32_t>(pool.size() - 1);
  }
};

}  // namespace bspot
