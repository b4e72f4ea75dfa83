#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "bspot/program.hpp"
#include "bspot/trace.hpp"

namespace bspot {

// How tainted branch conditions feed forward into later labels.
//   Accumulate: every tainted condition (and tainted goto target, assert
//   condition, divisor) is unioned into a running path label that is folded
//   into every label created afterwards. Conservative; never leaves scope.
//   Off: conditions are still marked affects_cf, but nothing is folded.
enum class CfPolicy : std::uint8_t { Accumulate, Off };

struct RunConfig {
  CfPolicy cf_policy = CfPolicy::Accumulate;
  std::uint64_t step_limit = 10'000'000;
  std::map<std::string, std::vector<std::uint8_t>> inputs;  // source name -> bytes
};

struct RunResult {
  TraceArtifact trace;
  std::string diagnostic;  // human-readable reason for abnormal statuses
};

// Lean result for uninstrumented runs (mutation testing, oracles).
struct PlainRun {
  std::vector<std::uint8_t> output;
  RunStatus status = RunStatus::Halted;
  std::string diagnostic;

  friend bool operator==(const PlainRun& a, const PlainRun& b) {
    return a.output == b.output && a.status == b.status;
  }
};

namespace detail {

struct Abort {
  RunStatus status;
  std::string message;
};

// Taint plumbing for an instrumented run. The untainted variant below has the
// same surface and compiles the label machinery away entirely, which keeps
// value semantics shared by construction between traced and plain execution.
struct TaintedExec {
  using Label = TaintLabel;

  TraceArtifact* trace;
  CfPolicy policy;
  TaintLabel cf = kUntainted;

  static constexpr Label untainted() { return kUntainted; }

  Label canonical(std::uint32_t source, std::uint64_t offset) {
    trace->sources[source].read[offset] = true;
    return fold(trace->labels.create_canonical({source, offset}));
  }
  Label unite(Label a, Label b) { return trace->labels.union_of(a, b); }
  Label fold(Label l) {
    if (policy == CfPolicy::Accumulate && cf != kUntainted)
      return trace->labels.union_of(l, cf);
    return l;
  }
  void branch(Label cond) {
    if (cond == kUntainted) return;
    trace->labels.mark_affects_cf(cond);
    if (policy == CfPolicy::Accumulate) cf = trace->labels.union_of(cf, cond);
  }
  void emit(std::uint8_t byte, Label l) {
    OutputEvent e;
    e.position = trace->events.size();
    e.label = l;
    e.byte = byte;
    trace->events.push_back(e);
  }
};

struct PlainExec {
  struct Label {};

  std::vector<std::uint8_t>* output;

  static constexpr Label untainted() { return {}; }
  Label canonical(std::uint32_t, std::uint64_t) { return {}; }
  Label unite(Label, Label) { return {}; }
  Label fold(Label l) { return l; }
  void branch(Label) {}
  void emit(std::uint8_t byte, Label) { output->push_back(byte); }
};

inline std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
inline std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

template <class Exec>
class Machine {
 public:
  Machine(const Program& p, Exec& exec,
          const std::map<std::string, std::vector<std::uint8_t>>& inputs,
          std::uint64_t step_limit)
      : prog_(p), exec_(exec), step_limit_(step_limit) {
    env_.resize(p.variables.size());
    // Sources are indexed by sorted name order; program slots resolve lazily.
    std::uint32_t idx = 0;
    for (const auto& [name, bytes] : inputs) {
      runtime_sources_.push_back({&bytes, 0, idx++});
      (void)name;
    }
    slot_to_source_.assign(p.input_sources.size(), kUnbound);
    std::uint32_t s = 0;
    for (const auto& [name, bytes] : inputs) {
      (void)bytes;
      for (std::uint32_t slot = 0; slot < p.input_sources.size(); ++slot)
        if (p.input_sources[slot] == name) slot_to_source_[slot] = s;
      ++s;
    }
  }

  RunStatus run(std::string& diagnostic) {
    if (step_limit_ == 0)
      throw std::invalid_argument("step limit must be positive");
    try {
      loop();
      return RunStatus::Halted;
    } catch (const Abort& a) {
      diagnostic = a.message;
      return a.status;
    }
  }

 private:
  static constexpr std::uint32_t kUnbound = 0xFFFFFFFFu;

  using Label = typename Exec::Label;

  struct ValueL {
    std::int64_t v;
    Label l;
  };
  struct Binding {
    std::int64_t v = 0;
    Label l{};
    bool bound = false;
  };
  struct Cell {
    std::uint8_t v = 0;
    Label l{};
  };
  struct RtSource {
    const std::vector<std::uint8_t>* bytes;
    std::uint64_t cursor;
    std::uint32_t index;
  };

  void loop() {
    std::uint64_t pc = 0;
    std::uint64_t steps = 0;
    for (;;) {
      if (++steps > step_limit_)
        throw Abort{RunStatus::StepLimit, "step limit exceeded"};
      if (pc >= prog_.stmts.size())
        throw Abort{RunStatus::RuntimeError, "fell off the end of the program"};
      const Stmt& st = prog_.stmts[pc];
      line_ = st.line;
      switch (st.kind) {
        case Stmt::Kind::Assign: {
          ValueL v = eval(st.e1);
          env_[st.var] = {v.v, exec_.fold(v.l), true};
          ++pc;
          break;
        }
        case Stmt::Kind::Store: {
          ValueL addr = eval(st.e1);
          ValueL val = eval(st.e2);
          Cell& cell = mem_[static_cast<std::uint64_t>(addr.v)];
          cell.v = static_cast<std::uint8_t>(val.v & 0xFF);
          cell.l = exec_.fold(exec_.unite(val.l, addr.l));
          ++pc;
          break;
        }
        case Stmt::Kind::Goto: {
          ValueL t = eval(st.e1);
          exec_.branch(t.l);
          pc = check_target(t.v);
          break;
        }
        case Stmt::Kind::CondGoto: {
          ValueL c = eval(st.e1);
          exec_.branch(c.l);
          pc = check_target(c.v != 0 ? st.target_true : st.target_false);
          break;
        }
        case Stmt::Kind::Output: {
          ValueL v = eval(st.e1);
          exec_.emit(static_cast<std::uint8_t>(v.v & 0xFF), v.l);
          ++pc;
          break;
        }
        case Stmt::Kind::Assert: {
          ValueL c = eval(st.e1);
          exec_.branch(c.l);
          if (c.v == 0)
            throw Abort{RunStatus::AssertFailed, at_line("assertion failed")};
          ++pc;
          break;
        }
        case Stmt::Kind::Halt:
          return;
      }
    }
  }

  std::uint64_t check_target(std::int64_t t) const {
    if (t < 0 || static_cast<std::uint64_t>(t) >= prog_.stmts.size())
      throw Abort{RunStatus::RuntimeError,
                  at_line("goto target " + std::to_string(t) + " out of range")};
    return static_cast<std::uint64_t>(t);
  }

  ValueL eval(std::uint32_t ei) {
    const Expr& e = prog_.exprs[ei];
    switch (e.kind) {
      case Expr::Kind::Const:
        return {e.value, Exec::untainted()};
      case Expr::Kind::Var: {
        const Binding& b = env_[e.slot];
        if (!b.bound)
          throw Abort{RunStatus::RuntimeError,
                      at_line("use of unbound variable '" + prog_.variables[e.slot] + "'")};
        return {b.v, b.l};
      }
      case Expr::Kind::Load: {
        ValueL addr = eval(e.lhs);
        auto it = mem_.find(static_cast<std::uint64_t>(addr.v));
        Cell cell = it == mem_.end() ? Cell{} : it->second;
        return {static_cast<std::int64_t>(cell.v), exec_.unite(cell.l, addr.l)};
      }
      case Expr::Kind::Binop: {
        ValueL a = eval(e.lhs);
        ValueL b = eval(e.rhs);
        if (e.bin == BinOp::Div || e.bin == BinOp::Mod) {
          // A tainted divisor decides whether the run dies here, so it is
          // treated like a branch condition before the zero check.
          exec_.branch(b.l);
          if (b.v == 0)
            throw Abort{RunStatus::RuntimeError, at_line("division by zero")};
        }
        std::int64_t v = apply_binop(e.bin, a.v, b.v);
        return {v, exec_.fold(exec_.unite(a.l, b.l))};
      }
      case Expr::Kind::Unop: {
        ValueL a = eval(e.lhs);
        std::int64_t v = a.v;
        switch (e.un) {
          case UnOp::Neg: v = wrap_sub(0, v); break;
          case UnOp::BitNot: v = ~v; break;
          case UnOp::LogicalNot: v = v == 0 ? 1 : 0; break;
        }
        return {v, exec_.fold(a.l)};
      }
      case Expr::Kind::GetInput: {
        std::uint32_t s = slot_to_source_[e.slot];
        if (s == kUnbound)
          throw Abort{RunStatus::RuntimeError,
                      at_line("input source '" + prog_.input_sources[e.slot] + "' is not bound")};
        RtSource& src = runtime_sources_[s];
        if (src.cursor >= src.bytes->size())
          throw Abort{RunStatus::RuntimeError,
                      at_line("input '" + prog_.input_sources[e.slot] + "' exhausted")};
        std::uint8_t byte = (*src.bytes)[src.cursor];
        Label l = exec_.canonical(src.index, src.cursor);
        ++src.cursor;
        return {static_cast<std::int64_t>(byte), l};
      }
    }
    throw Abort{RunStatus::RuntimeError, "corrupt expression"};
  }

  std::int64_t apply_binop(BinOp op, std::int64_t a, std::int64_t b) {
    switch (op) {
      case BinOp::Add: return wrap_add(a, b);
      case BinOp::Sub: return wrap_sub(a, b);
      case BinOp::Mul: return wrap_mul(a, b);
      case BinOp::Div:
      case BinOp::Mod: {
        if (a == std::numeric_limits<std::int64_t>::min() && b == -1)
          return op == BinOp::Div ? a : 0;
        return op == BinOp::Div ? a / b : a % b;
      }
      case BinOp::BitAnd: return a & b;
      case BinOp::BitOr: return a | b;
      case BinOp::BitXor: return a ^ b;
      case BinOp::Shl:
        return static_cast<std::int64_t>(static_cast<std::uint64_t>(a)
                                         << (static_cast<std::uint64_t>(b) & 63));
      case BinOp::Shr: return a >> (static_cast<std::uint64_t>(b) & 63);
      case BinOp::Eq: return a == b;
      case BinOp::Ne: return a != b;
      case BinOp::Lt: return a < b;
      case BinOp::Le: return a <= b;
      case BinOp::Gt: return a > b;
      case BinOp::Ge: return a >= b;
    }
    throw Abort{RunStatus::RuntimeError, "corrupt operator"};
  }

  std::string at_line(const std::string& msg) const {
    return line_ ? "line " + std::to_string(line_) + ": " + msg : msg;
  }

  const Program& prog_;
  Exec& exec_;
  std::uint64_t step_limit_;
  std::uint32_t line_ = 0;
  std::vector<Binding> env_;
  std::unordered_map<std::uint64_t, Cell> mem_;
  std::vector<RtSource> runtime_sources_;
  std::vector<std::uint32_t> slot_to_source_;
};

}  // namespace detail

// Executes p under full taint instrumentation. Every input byte consumed gets
// a canonical label; unions are built per the propagation rules; tainted
// branch conditions are marked affects_cf and, under Accumulate, folded into
// every label created afterwards. Abnormal terminations still return a
// complete, valid TraceArtifact with the matching status.
inline RunResult run(const Program& p, const RunConfig& cfg) {
  RunResult result;
  result.trace.sources.reserve(cfg.inputs.size());
  for (const auto& [name, bytes] : cfg.inputs) {
    SourceInfo src;
    src.name = name;
    src.read.assign(bytes.size(), false);
    result.trace.sources.push_back(std::move(src));
  }
  detail::TaintedExec exec{&result.trace, cfg.cf_policy};
  detail::Machine<detail::TaintedExec> m(p, exec, cfg.inputs, cfg.step_limit);
  result.trace.status = m.run(result.diagnostic);
  return result;
}

// Same value semantics, no labels. Used for mutation re-runs and oracles.
inline PlainRun run_plain(const Program& p,
                          const std::map<std::string, std::vector<std::uint8_t>>& inputs,
                          std::uint64_t step_limit = 10'000'000) {
  PlainRun result;
  detail::PlainExec exec{&result.output};
  detail::Machine<detail::PlainExec> m(p, exec, inputs, step_limit);
  result.status = m.run(result.diagnostic);
  return result;
}

}  // namespace bspot
