#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "bspot/trace.hpp"

namespace bspot {

// Half-open byte interval [start, end) inside one source.
struct Range {
  std::uint64_t start = 0, end = 0;
  friend constexpr auto operator<=>(const Range&, const Range&) = default;
};

// Instrumentation for the linear sweep: each label is inspected once, and
// each removal walks at most the label's parent edges.
struct SweepCounters {
  std::uint64_t inspections = 0;
  std::uint64_t parent_removals = 0;
  friend bool operator==(const SweepCounters&, const SweepCounters&) = default;
};

struct SourceBlindSpots {
  std::string name;
  std::uint64_t length = 0;
  std::uint64_t read_count = 0;
  std::vector<Range> blind;          // not_read union not_in_output, merged
  std::vector<Range> not_read;       // declared but never consumed
  std::vector<Range> not_in_output;  // consumed, but no output or branch ever depended on it
  friend bool operator==(const SourceBlindSpots&, const SourceBlindSpots&) = default;
};

struct BlindSpotReport {
  std::vector<SourceBlindSpots> sources;
  SweepCounters counters;
  std::uint64_t total_declared = 0;
  std::uint64_t total_read = 0;
  std::uint64_t total_not_read = 0;
  std::uint64_t total_not_in_output = 0;
  std::uint64_t total_blind = 0;
  friend bool operator==(const BlindSpotReport&, const BlindSpotReport&) = default;
};

inline std::uint64_t range_bytes(const std::vector<Range>& ranges) {
  std::uint64_t n = 0;
  for (const Range& r : ranges) n += r.end - r.start;
  return n;
}

inline bool ranges_contain(const std::vector<Range>& ranges, std::uint64_t off) {
  for (const Range& r : ranges)
    if (off >= r.start && off < r.end) return true;
  return false;
}

// Collapses a sorted offset set into maximal half-open intervals:
// {1,2,3,7} -> [1,4) [7,8).
inline std::vector<Range> merge_offsets(const std::set<std::uint64_t>& offsets) {
  std::vector<Range> out;
  for (std::uint64_t off : offsets) {
    if (!out.empty() && out.back().end == off)
      ++out.back().end;
    else
      out.push_back({off, off + 1});
  }
  return out;
}

inline std::map<std::uint32_t, std::vector<Range>> merge_ranges(
    const std::set<SourceOffset>& offsets) {
  std::map<std::uint32_t, std::set<std::uint64_t>> by_source;
  for (const SourceOffset& so : offsets) by_source[so.source].insert(so.offset);
  std::map<std::uint32_t, std::vector<Range>> out;
  for (auto& [src, offs] : by_source) out.emplace(src, merge_offsets(offs));
  return out;
}

namespace detail {

inline std::vector<Range> ranges_from_flags(const std::vector<bool>& flag) {
  std::vector<Range> out;
  for (std::uint64_t i = 0; i < flag.size(); ++i) {
    if (!flag[i]) continue;
    if (!out.empty() && out.back().end == i)
      ++out.back().end;
    else
      out.push_back({i, i + 1});
  }
  return out;
}

}  // namespace detail

// Enumerates the input bytes the program provably never let reach output or
// control flow. Starts from the set of labels that never decided a branch,
// then removes, in one descending pass, every label that was written to
// output or that a removed descendant points back to; the canonical labels
// left standing name the not-in-output bytes. Unread bytes are blind by
// definition. Linear in the label count.
inline BlindSpotReport blind_spots(const TraceArtifact& t) {
  const std::uint32_t n = t.labels.count();
  std::vector<bool> in_b(static_cast<std::size_t>(n) + 1, false);
  for (TaintLabel l = 1; l <= n; ++l) in_b[l] = !t.labels.record(l).affects_cf;

  std::vector<bool> in_omega(static_cast<std::size_t>(n) + 1, false);
  for (const OutputEvent& e : t.events)
    if (e.label != kUntainted) in_omega[e.label] = true;

  BlindSpotReport report;
  for (TaintLabel l = n; l >= 1; --l) {
    ++report.counters.inspections;
    if (!in_b[l] || in_omega[l]) {
      in_b[l] = false;
      const LabelRecord& rec = t.labels.record(l);
      if (rec.kind == LabelRecord::Kind::Union) {
        in_b[rec.parent_a] = false;
        in_b[rec.parent_b] = false;
        report.counters.parent_removals += 2;
      }
    }
  }

  // Per-offset view: an offset is not-in-output only if every canonical label
  // born from it survived the sweep.
  std::vector<std::vector<bool>> has_canon(t.sources.size());
  std::vector<std::vector<bool>> excluded(t.sources.size());
  for (std::size_t s = 0; s < t.sources.size(); ++s) {
    has_canon[s].assign(t.sources[s].length(), false);
    excluded[s].assign(t.sources[s].length(), false);
  }
  for (TaintLabel l = 1; l <= n; ++l) {
    const LabelRecord& rec = t.labels.record(l);
    if (rec.kind != LabelRecord::Kind::Canonical) continue;
    has_canon[rec.source.source][rec.source.offset] = true;
    if (!in_b[l]) excluded[rec.source.source][rec.source.offset] = true;
  }

  for (std::size_t s = 0; s < t.sources.size(); ++s) {
    const SourceInfo& src = t.sources[s];
    SourceBlindSpots out;
    out.name = src.name;
    out.length = src.length();
    out.read_count = src.read_count();
    std::vector<bool> nr(src.length()), nio(src.length()), blind(src.length());
    for (std::uint64_t i = 0; i < src.length(); ++i) {
      nr[i] = !src.read[i];
      nio[i] = src.read[i] && has_canon[s][i] && !excluded[s][i];
      blind[i] = nr[i] || nio[i];
    }
    out.not_read = detail::ranges_from_flags(nr);
    out.not_in_output = detail::ranges_from_flags(nio);
    out.blind = detail::ranges_from_flags(blind);
    report.total_declared += out.length;
    report.total_read += out.read_count;
    report.total_not_read += range_bytes(out.not_read);
    report.total_not_in_output += range_bytes(out.not_in_output);
    report.total_blind += range_bytes(out.blind);
    report.sources.push_back(std::move(out));
  }
  return report;
}

// For every output event, the set of input bytes in its label's ancestry.
// Memoized across events; iterative so deep union chains cannot overflow
// the stack.
inline std::vector<std::set<SourceOffset>> source_sink_map(const TraceArtifact& t) {
  std::unordered_map<TaintLabel, std::set<SourceOffset>> memo;
  auto compute = [&](TaintLabel root) -> const std::set<SourceOffset>& {
    std::vector<TaintLabel> stack{root};
    while (!stack.empty()) {
      TaintLabel l = stack.back();
      if (memo.count(l)) {
        stack.pop_back();
        continue;
      }
      const LabelRecord& rec = t.labels.record(l);
      if (rec.kind == LabelRecord::Kind::Canonical) {
        memo[l] = {rec.source};
        stack.pop_back();
        continue;
      }
      auto a = memo.find(rec.parent_a);
      auto b = memo.find(rec.parent_b);
      if (a == memo.end()) {
        stack.push_back(rec.parent_a);
        continue;
      }
      if (b == memo.end()) {
        stack.push_back(rec.parent_b);
        continue;
      }
      std::set<SourceOffset> merged = a->second;
      merged.insert(b->second.begin(), b->second.end());
      memo[l] = std::move(merged);
      stack.pop_back();
    }
    return memo[root];
  };

  std::vector<std::set<SourceOffset>> out;
  out.reserve(t.events.size());
  for (const OutputEvent& e : t.events) {
    if (e.label == kUntainted)
      out.emplace_back();
    else
      out.push_back(compute(e.label));
  }
  return out;
}

// --- serialization -------------------------------------------------------

inline nlohmann::json ranges_to_json(const std::vector<Range>& ranges) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Range& r : ranges) arr.push_back({r.start, r.end});
  return arr;
}

inline std::vector<Range> ranges_from_json(const nlohmann::json& arr) {
  std::vector<Range> out;
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2)
      throw std::invalid_argument("range must be a [start, end) pair");
    Range r{pair[0].get<std::uint64_t>(), pair[1].get<std::uint64_t>()};
    if (r.end < r.start) throw std::invalid_argument("range end before start");
    out.push_back(r);
  }
  return out;
}

inline nlohmann::json report_to_json(const BlindSpotReport& report) {
  nlohmann::json j;
  j["totals"] = {
      {"declared", report.total_declared},
      {"read", report.total_read},
      {"not_read", report.total_not_read},
      {"not_in_output", report.total_not_in_output},
      {"blind", report.total_blind},
  };
  j["counters"] = {
      {"inspections", report.counters.inspections},
      {"parent_removals", report.counters.parent_removals},
  };
  j["sources"] = nlohmann::json::array();
  for (const SourceBlindSpots& s : report.sources) {
    j["sources"].push_back({
        {"name", s.name},
        {"length", s.length},
        {"read", s.read_count},
        {"ranges", ranges_to_json(s.blind)},
        {"not_read", ranges_to_json(s.not_read)},
        {"not_in_output", ranges_to_json(s.not_in_output)},
    });
  }
  return j;
}

inline BlindSpotReport report_from_json(const nlohmann::json& j) {
  BlindSpotReport report;
  if (j.contains("counters")) {
    report.counters.inspections = j["counters"].value("inspections", std::uint64_t{0});
    report.counters.parent_removals = j["counters"].value("parent_removals", std::uint64_t{0});
  }
  for (const auto& sj : j.at("sources")) {
    SourceBlindSpots s;
    s.name = sj.at("name").get<std::string>();
    s.length = sj.at("length").get<std::uint64_t>();
    s.read_count = sj.value("read", std::uint64_t{0});
    s.blind = ranges_from_json(sj.at("ranges"));
    if (sj.contains("not_read")) s.not_read = ranges_from_json(sj["not_read"]);
    if (sj.contains("not_in_output")) s.not_in_output = ranges_from_json(sj["not_in_output"]);
    for (const Range& r : s.blind)
      if (r.end > s.length) throw std::invalid_argument("range past declared source length");
    report.total_declared += s.length;
    report.total_read += s.read_count;
    report.total_not_read += range_bytes(s.not_read);
    report.total_not_in_output += range_bytes(s.not_in_output);
    report.total_blind += range_bytes(s.blind);
    report.sources.push_back(std::move(s));
  }
  return report;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// One row per category-homogeneous range: source,start,end,length,category.
inline void report_to_csv(const BlindSpotReport& report, std::ostream& os) {
  os << "source,start,end,length,category\n";
  for (const SourceBlindSpots& s : report.sources) {
    for (const Range& r : s.not_read)
      os << csv_field(s.name) << ',' << r.start << ',' << r.end << ','
         << (r.end - r.start) << ",not_read\n";
    for (const Range& r : s.not_in_output)
      os << csv_field(s.name) << ',' << r.start << ',' << r.end << ','
         << (r.end - r.start) << ",not_in_output\n";
  }
}

}  // namespace bspot
