#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bspot/label_store.hpp"

namespace bspot {

enum class RunStatus : std::uint8_t {
  Halted = 1,       // reached a halt statement
  AssertFailed = 2, // an assert condition evaluated to zero
  StepLimit = 3,    // exceeded the configured step budget
  RuntimeError = 4, // division by zero, bad jump target, exhausted input, ...
};

inline const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Halted: return "halted";
    case RunStatus::AssertFailed: return "assert-failed";
    case RunStatus::StepLimit: return "step-limit";
    case RunStatus::RuntimeError: return "runtime-error";
  }
  return "unknown";
}

// A declared input stream plus the per-byte record of what was consumed.
struct SourceInfo {
  std::string name;
  std::vector<bool> read;  // one bit per declared byte

  std::uint64_t length() const { return read.size(); }
  std::uint64_t read_count() const {
    std::uint64_t n = 0;
    for (bool b : read) n += b;
    return n;
  }

  friend bool operator==(const SourceInfo&, const SourceInfo&) = default;
};

struct OutputEvent {
  std::uint64_t position = 0;  // index in the output byte stream
  TaintLabel label = kUntainted;
  std::uint8_t byte = 0;

  friend bool operator==(const OutputEvent&, const OutputEvent&) = default;
};

// Everything one execution leaves behind: the provenance table, the declared
// sources with their read sets, the labeled output stream, and how the run
// ended. This is the unit the .bspt format serializes.
struct TraceArtifact {
  LabelStore labels;
  std::vector<SourceInfo> sources;
  std::vector<OutputEvent> events;
  RunStatus status = RunStatus::Halted;

  std::vector<std::uint8_t> output_bytes() const {
    std::vector<std::uint8_t> out;
    out.reserve(events.size());
    for (const OutputEvent& e : events) out.push_back(e.byte);
    return out;
  }

  friend bool operator==(const TraceArtifact&, const TraceArtifact&) = default;
};

}  // namespace bspot
