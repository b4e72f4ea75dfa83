#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bspot/analyzer.hpp"
#include "bspot/interpreter.hpp"
#include "bspot/rng.hpp"

namespace bspot {

enum class MutationMode : std::uint8_t { Exhaustive, Sampled };

inline const char* to_string(MutationMode m) {
  return m == MutationMode::Exhaustive ? "exhaustive" : "sampled";
}

struct MutationHit {
  std::string source;
  std::uint64_t offset = 0;
  std::uint8_t value = 0;  // the mutated byte value that changed the output
  friend bool operator==(const MutationHit&, const MutationHit&) = default;
};

struct ByteRef {
  std::string source;
  std::uint64_t offset = 0;
  friend bool operator==(const ByteRef&, const ByteRef&) = default;
};

struct ValidationReport {
  std::uint64_t seed = 0;
  MutationMode mode = MutationMode::Exhaustive;
  std::uint32_t samples_per_byte = 8;
  std::uint64_t blind_bytes_tested = 0;
  std::uint64_t outside_bytes_sampled = 0;
  // Type I: a byte we claimed blind whose mutation changed output or status.
  std::vector<MutationHit> type1_violations;
  // Type II: a sampled non-blind byte where none of the tried values mattered.
  std::vector<ByteRef> type2_candidates;

  double fp_rate() const {
    if (blind_bytes_tested == 0) return 0.0;
    std::set<std::pair<std::string, std::uint64_t>> bytes;
    for (const MutationHit& v : type1_violations) bytes.insert({v.source, v.offset});
    return static_cast<double>(bytes.size()) / static_cast<double>(blind_bytes_tested);
  }
  double fn_bound() const {
    if (outside_bytes_sampled == 0) return 0.0;
    return static_cast<double>(type2_candidates.size()) /
           static_cast<double>(outside_bytes_sampled);
  }
};

namespace detail {

inline void check_report_matches_inputs(
    const BlindSpotReport& report,
    const std::map<std::string, std::vector<std::uint8_t>>& inputs) {
  if (report.sources.size() != inputs.size())
    throw std::invalid_argument("report and inputs disagree on source count");
  std::size_t i = 0;
  for (const auto& [name, bytes] : inputs) {
    const SourceBlindSpots& s = report.sources[i++];
    if (s.name != name)
      throw std::invalid_argument("report source '" + s.name +
                                  "' does not match input '" + name + "'");
    if (s.length != bytes.size())
      throw std::invalid_argument("report length for '" + name +
                                  "' does not match the input file");
  }
}

// k distinct byte values != original, drawn as next() % 256 with duplicates
// and the original skipped (part of the documented sampling contract).
inline std::vector<std::uint8_t> draw_values(Xorshift64Star& rng, std::uint8_t original,
                                             std::uint32_t k) {
  std::vector<std::uint8_t> out;
  bool seen[256] = {false};
  seen[original] = true;
  const std::uint32_t want = std::min<std::uint32_t>(k, 255);
  while (out.size() < want) {
    std::uint8_t v = static_cast<std::uint8_t>(rng.below(256));
    if (seen[v]) continue;
    seen[v] = true;
    out.push_back(v);
  }
  return out;
}

}  // namespace detail

// Re-runs the program with single-byte mutations to check the classification
// the analyzer produced for exactly these inputs. Inside blind spots any
// change of output or final status is a Type I violation (exhaustive mode
// tries all 255 other values). Outside, n = min(256, count) read bytes are
// sampled and probed with samples_per_byte values each; bytes where nothing
// changed are Type II candidates (missed blind spots, bounded by fn_bound).
// Crashing mutated runs count as "output differs", never as harness errors.
//
// RNG consumption order is part of the contract: Type I value draws first
// (sampled mode only), sources in report order, offsets ascending; then the
// Type II offset selection (Fisher-Yates prefix over the sorted candidate
// list); then Type II value draws in selected-offset order.
inline ValidationReport validate(
    const Program& p, const std::map<std::string, std::vector<std::uint8_t>>& inputs,
    const BlindSpotReport& report, MutationMode mode, std::uint64_t seed,
    std::uint32_t samples_per_byte = 8, std::uint64_t step_limit = 10'000'000) {
  detail::check_report_matches_inputs(report, inputs);

  ValidationReport out;
  out.seed = seed;
  out.mode = mode;
  out.samples_per_byte = samples_per_byte;

  Xorshift64Star rng(seed);
  const PlainRun baseline = run_plain(p, inputs, step_limit);

  std::map<std::string, std::vector<std::uint8_t>> work = inputs;

  auto differs = [&](const std::string& source, std::uint64_t offset,
                     std::uint8_t value) {
    std::vector<std::uint8_t>& bytes = work[source];
    const std::uint8_t saved = bytes[offset];
    bytes[offset] = value;
    const PlainRun mutated = run_plain(p, work, step_limit);
    bytes[offset] = saved;
    return !(mutated == baseline);
  };

  for (const SourceBlindSpots& s : report.sources) {
    const std::vector<std::uint8_t>& bytes = inputs.at(s.name);
    for (const Range& r : s.blind) {
      for (std::uint64_t off = r.start; off < r.end; ++off) {
        ++out.blind_bytes_tested;
        const std::uint8_t original = bytes[off];
        if (mode == MutationMode::Exhaustive) {
          for (int v = 0; v < 256; ++v) {
            if (v == original) continue;
            if (differs(s.name, off, static_cast<std::uint8_t>(v)))
              out.type1_violations.push_back({s.name, off, static_cast<std::uint8_t>(v)});
          }
        } else {
          for (std::uint8_t v : detail::draw_values(rng, original, samples_per_byte))
            if (differs(s.name, off, v))
              out.type1_violations.push_back({s.name, off, v});
        }
      }
    }
  }

  // Candidate bytes for Type II: read and not classified blind.
  std::vector<ByteRef> candidates;
  {
    std::size_t i = 0;
    for (const auto& [name, bytes] : inputs) {
      (void)bytes;
      const SourceBlindSpots& s = report.sources[i++];
      for (std::uint64_t off = 0; off < s.length; ++off) {
        const bool read = !ranges_contain(s.not_read, off);
        if (read && !ranges_contain(s.blind, off)) candidates.push_back({name, off});
      }
    }
  }
  const std::size_t n = std::min<std::size_t>(256, candidates.size());
  if (n < candidates.size()) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(n);
    std::sort(candidates.begin(), candidates.end(),
              [](const ByteRef& a, const ByteRef& b) {
                return a.source != b.source ? a.source < b.source : a.offset < b.offset;
              });
  }
  out.outside_bytes_sampled = candidates.size();

  for (const ByteRef& c : candidates) {
    const std::uint8_t original = inputs.at(c.source)[c.offset];
    bool any_change = false;
    for (std::uint8_t v : detail::draw_values(rng, original, samples_per_byte)) {
      if (differs(c.source, c.offset, v)) {
        any_change = true;
        break;
      }
    }
    if (!any_change) out.type2_candidates.push_back(c);
  }

  return out;
}

// Ground truth by brute force: a byte is oracle-blind iff every one of its
// 255 single-byte mutations leaves output and status untouched. Quadratic in
// the input size, so it refuses inputs past the byte budget.
inline std::set<SourceOffset> oracle_blind_spots(
    const Program& p, const std::map<std::string, std::vector<std::uint8_t>>& inputs,
    std::uint64_t budget = 256, std::uint64_t step_limit = 10'000'000) {
  std::uint64_t total = 0;
  for (const auto& [name, bytes] : inputs) {
    (void)name;
    total += bytes.size();
  }
  if (total > budget)
    throw std::invalid_argument("oracle budget exceeded: " + std::to_string(total) +
                                " input bytes > " + std::to_string(budget));

  const PlainRun baseline = run_plain(p, inputs, step_limit);
  std::map<std::string, std::vector<std::uint8_t>> work = inputs;

  std::set<SourceOffset> blind;
  std::uint32_t source_index = 0;
  for (auto& [name, bytes] : work) {
    (void)name;
    for (std::uint64_t off = 0; off < bytes.size(); ++off) {
      const std::uint8_t original = bytes[off];
      bool all_same = true;
      for (int v = 0; v < 256 && all_same; ++v) {
        if (v == original) continue;
        bytes[off] = static_cast<std::uint8_t>(v);
        if (!(run_plain(p, work, step_limit) == baseline)) all_same = false;
      }
      bytes[off] = original;
      if (all_same) blind.insert({source_index, off});
    }
    ++source_index;
  }
  return blind;
}

inline nlohmann::json validation_to_json(const ValidationReport& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["mode"] = to_string(r.mode);
  j["samples_per_byte"] = r.samples_per_byte;
  j["blind_bytes_tested"] = r.blind_bytes_tested;
  j["outside_bytes_sampled"] = r.outside_bytes_sampled;
  j["fp_rate"] = r.fp_rate();
  j["fn_bound"] = r.fn_bound();
  j["type1_violations"] = nlohmann::json::array();
  for (const MutationHit& v : r.type1_violations)
    j["type1_violations"].push_back(
        {{"source", v.source}, {"offset", v.offset}, {"value", v.value}});
  j["type2_candidates"] = nlohmann::json::array();
  for (const ByteRef& c : r.type2_candidates)
    j["type2_candidates"].push_back({{"source", c.source}, {"offset", c.offset}});
  return j;
}

}  // namespace bspot
