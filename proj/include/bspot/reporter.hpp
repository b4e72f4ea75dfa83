#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bspot/analyzer.hpp"

namespace bspot {

// One analyzed input file: its raw bytes plus the blind-spot ranges found in
// it. Corpus statistics are per single-source runs.
struct CorpusEntry {
  std::vector<std::uint8_t> input;
  std::vector<Range> blind;
};

struct SequenceStats {
  std::uint64_t blind_count = 0;       // ranges this sequence starts/precedes
  std::uint64_t corpus_frequency = 0;  // overlapping occurrences corpus-wide
  friend bool operator==(const SequenceStats&, const SequenceStats&) = default;
};

struct PositionBucket {
  std::uint64_t count = 0;
  std::uint64_t size_sum = 0;
  std::uint64_t size_sq_sum = 0;

  double mean() const { return count ? static_cast<double>(size_sum) / count : 0.0; }
  double stddev() const {  // population
    if (count == 0) return 0.0;
    const double m = mean();
    const double var = static_cast<double>(size_sq_sum) / count - m * m;
    return var > 0 ? std::sqrt(var) : 0.0;
  }
  friend bool operator==(const PositionBucket&, const PositionBucket&) = default;
};

// Aggregate view of where blind spots sit and what bytes surround them.
// Sequences are byte strings up to kMaxSeq long. All tallies are additive,
// so merging per-entry statistics is commutative and associative.
struct CorpusStats {
  static constexpr std::size_t kMaxSeq = 7;

  std::map<std::string, SequenceStats, std::less<>> prefixes;
  std::map<std::string, SequenceStats, std::less<>> preceding;
  std::map<std::pair<std::string, std::string>, SequenceStats> pairs;
  std::vector<std::uint64_t> size_histogram;  // bucket i = sizes in [2^i, 2^(i+1))
  std::array<PositionBucket, 10> position{};  // bucket = floor(10*start/len), clamped
  std::uint64_t total_inputs = 0;
  std::uint64_t total_ranges = 0;
  std::uint64_t total_blind_bytes = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

inline void merge_stats(CorpusStats& into, const CorpusStats& from) {
  for (const auto& [k, v] : from.prefixes) {
    SequenceStats& s = into.prefixes[k];
    s.blind_count += v.blind_count;
    s.corpus_frequency += v.corpus_frequency;
  }
  for (const auto& [k, v] : from.preceding) {
    SequenceStats& s = into.preceding[k];
    s.blind_count += v.blind_count;
    s.corpus_frequency += v.corpus_frequency;
  }
  for (const auto& [k, v] : from.pairs) {
    SequenceStats& s = into.pairs[k];
    s.blind_count += v.blind_count;
    s.corpus_frequency += v.corpus_frequency;
  }
  if (from.size_histogram.size() > into.size_histogram.size())
    into.size_histogram.resize(from.size_histogram.size(), 0);
  for (std::size_t i = 0; i < from.size_histogram.size(); ++i)
    into.size_histogram[i] += from.size_histogram[i];
  for (std::size_t i = 0; i < 10; ++i) {
    into.position[i].count += from.position[i].count;
    into.position[i].size_sum += from.position[i].size_sum;
    into.position[i].size_sq_sum += from.position[i].size_sq_sum;
  }
  into.total_inputs += from.total_inputs;
  into.total_ranges += from.total_ranges;
  into.total_blind_bytes += from.total_blind_bytes;
}

namespace detail {

inline CorpusStats tally_entry(const CorpusEntry& e) {
  CorpusStats s;
  s.total_inputs = 1;
  const std::string_view input(reinterpret_cast<const char*>(e.input.data()),
                               e.input.size());
  for (const Range& r : e.blind) {
    if (r.end > e.input.size())
      throw std::invalid_argument("blind range past the end of the input");
    if (r.end <= r.start) continue;
    const std::uint64_t len = r.end - r.start;
    ++s.total_ranges;
    s.total_blind_bytes += len;

    const std::size_t bucket = static_cast<std::size_t>(std::bit_width(len) - 1);
    if (bucket >= s.size_histogram.size()) s.size_histogram.resize(bucket + 1, 0);
    ++s.size_histogram[bucket];

    std::size_t decile =
        static_cast<std::size_t>(10 * r.start / e.input.size());
    if (decile > 9) decile = 9;
    PositionBucket& pb = s.position[decile];
    ++pb.count;
    pb.size_sum += len;
    pb.size_sq_sum += len * len;

    const std::uint64_t max_prefix = std::min<std::uint64_t>(CorpusStats::kMaxSeq, len);
    const std::uint64_t max_pre = std::min<std::uint64_t>(CorpusStats::kMaxSeq, r.start);
    for (std::uint64_t j = 1; j <= max_prefix; ++j)
      ++s.prefixes[std::string(input.substr(r.start, j))].blind_count;
    for (std::uint64_t j = 1; j <= max_pre; ++j)
      ++s.preceding[std::string(input.substr(r.start - j, j))].blind_count;
    for (std::uint64_t a = 1; a <= max_pre; ++a)
      for (std::uint64_t b = 1; b <= max_prefix; ++b)
        ++s.pairs[{std::string(input.substr(r.start - a, a)),
                   std::string(input.substr(r.start, b))}]
              .blind_count;
  }
  return s;
}

// Counts overlapping occurrences of every sequence of interest in one pass
// per input. Pair frequency is the frequency of the concatenated bytes
// (preceding immediately followed by prefix is one contiguous string).
inline void count_frequencies(CorpusStats& s,
                              const std::vector<const std::vector<std::uint8_t>*>& inputs) {
  std::map<std::string, std::uint64_t, std::less<>> freq;
  for (const auto& [k, v] : s.prefixes) freq.emplace(k, 0);
  for (const auto& [k, v] : s.preceding) freq.emplace(k, 0);
  for (const auto& [k, v] : s.pairs) freq.emplace(k.first + k.second, 0);

  std::vector<std::size_t> lengths;
  for (const auto& [k, v] : freq)
    if (lengths.empty() || lengths.back() != k.size()) lengths.push_back(k.size());
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());

  for (const std::vector<std::uint8_t>* bytes : inputs) {
    const std::string_view text(reinterpret_cast<const char*>(bytes->data()),
                                bytes->size());
    for (std::size_t len : lengths) {
      if (len == 0 || len > text.size()) continue;
      for (std::size_t pos = 0; pos + len <= text.size(); ++pos) {
        auto it = freq.find(text.substr(pos, len));
        if (it != freq.end()) ++it->second;
      }
    }
  }

  for (auto& [k, v] : s.prefixes) v.corpus_frequency = freq.at(k);
  for (auto& [k, v] : s.preceding) v.corpus_frequency = freq.at(k);
  for (auto& [k, v] : s.pairs) v.corpus_frequency = freq.at(k.first + k.second);
}

}  // namespace detail

inline CorpusStats corpus_stats(const std::vector<CorpusEntry>& entries) {
  CorpusStats merged;
  std::vector<const std::vector<std::uint8_t>*> inputs;
  inputs.reserve(entries.size());
  for (const CorpusEntry& e : entries) {
    merge_stats(merged, detail::tally_entry(e));
    inputs.push_back(&e.input);
  }
  detail::count_frequencies(merged, inputs);
  return merged;
}

// Overload taking analyzer reports directly; entries must be single-source
// and sized to their input.
inline CorpusStats corpus_stats(
    const std::vector<std::pair<std::vector<std::uint8_t>, BlindSpotReport>>& entries) {
  std::vector<CorpusEntry> plain;
  plain.reserve(entries.size());
  for (const auto& [input, report] : entries) {
    if (report.sources.size() != 1)
      throw std::invalid_argument("corpus entries must have exactly one source");
    if (report.sources[0].length != input.size())
      throw std::invalid_argument("report length does not match its input");
    plain.push_back({input, report.sources[0].blind});
  }
  return corpus_stats(plain);
}

// Renders bytes as ASCII where printable; everything else (plus backslash
// and '|', which pair rendering uses as a separator) becomes \xNN.
inline std::string escape_bytes(std::string_view bytes) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : bytes) {
    if (c >= 0x20 && c <= 0x7E && c != '\\' && c != '|') {
      out.push_back(static_cast<char>(c));
    } else {
      out += "\\x";
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

enum class StatsTable : std::uint8_t { Prefixes, Preceding, Pairs };

struct StatsRow {
  std::string preceding;  // empty except for the pairs table
  std::string sequence;
  std::uint64_t blind_count = 0;
  std::uint64_t corpus_frequency = 0;
  friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

// Rows ranked by blind count descending; ties break lexicographically on the
// raw byte sequence (pairs compare (preceding, sequence)).
inline std::vector<StatsRow> top_k(const CorpusStats& s, StatsTable table, std::size_t k) {
  std::vector<StatsRow> rows;
  switch (table) {
    case StatsTable::Prefixes:
      for (const auto& [seq, st] : s.prefixes)
        rows.push_back({"", seq, st.blind_count, st.corpus_frequency});
      break;
    case StatsTable::Preceding:
      for (const auto& [seq, st] : s.preceding)
        rows.push_back({"", seq, st.blind_count, st.corpus_frequency});
      break;
    case StatsTable::Pairs:
      for (const auto& [key, st] : s.pairs)
        rows.push_back({key.first, key.second, st.blind_count, st.corpus_frequency});
      break;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const StatsRow& a, const StatsRow& b) {
    if (a.blind_count != b.blind_count) return a.blind_count > b.blind_count;
    if (a.preceding != b.preceding) return a.preceding < b.preceding;
    return a.sequence < b.sequence;
  });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

namespace detail {

inline std::string size_bucket_label(std::size_t i) {
  const std::uint64_t lo = 1ull << i;
  const std::uint64_t hi = (1ull << (i + 1)) - 1;
  return std::to_string(lo) + "-" + std::to_string(hi);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

// Four CSVs: prefixes, preceding, sizes-histogram, position-histogram.
// Sequence tables carry the full ranking (top_k with no cutoff); with no
// data each file is just its header row.
inline void emit_csv(const CorpusStats& s, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::trunc);
    if (!os) throw std::runtime_error(std::string("cannot write ") + name);
    return os;
  };

  {
    std::ofstream os = open("prefixes.csv");
    os << "sequence,blind_count,corpus_frequency\n";
    for (const StatsRow& r : top_k(s, StatsTable::Prefixes, SIZE_MAX))
      os << '"' << escape_bytes(r.sequence) << "\"," << r.blind_count << ','
         << r.corpus_frequency << '\n';
  }
  {
    std::ofstream os = open("preceding.csv");
    os << "sequence,blind_count,corpus_frequency\n";
    for (const StatsRow& r : top_k(s, StatsTable::Preceding, SIZE_MAX))
      os << '"' << escape_bytes(r.sequence) << "\"," << r.blind_count << ','
         << r.corpus_frequency << '\n';
  }
  {
    std::ofstream os = open("sizes_histogram.csv");
    os << "bucket,count\n";
    for (std::size_t i = 0; i < s.size_histogram.size(); ++i)
      os << detail::size_bucket_label(i) << ',' << s.size_histogram[i] << '\n';
  }
  {
    std::ofstream os = open("position_histogram.csv");
    os << "decile,count,mean_size,stddev_size\n";
    if (s.total_ranges > 0)
      for (std::size_t i = 0; i < 10; ++i)
        os << i * 10 << "%-" << (i + 1) * 10 << "%," << s.position[i].count << ','
           << detail::format_double(s.position[i].mean()) << ','
           << detail::format_double(s.position[i].stddev()) << '\n';
  }
}

inline nlohmann::json stats_to_json(const CorpusStats& s, std::size_t top = 20) {
  nlohmann::json j;
  j["totals"] = {
      {"inputs", s.total_inputs},
      {"ranges", s.total_ranges},
      {"blind_bytes", s.total_blind_bytes},
      {"unique_prefixes", s.prefixes.size()},
      {"unique_preceding", s.preceding.size()},
      {"unique_pairs", s.pairs.size()},
  };
  auto rows_json = [&](StatsTable table) {
    nlohmann::json arr = nlohmann::json::array();
    for (const StatsRow& r : top_k(s, table, top)) {
      nlohmann::json row;
      if (table == StatsTable::Pairs) {
        row["preceding"] = escape_bytes(r.preceding);
        row["prefix"] = escape_bytes(r.sequence);
        row["display"] = escape_bytes(r.preceding) + "|" + escape_bytes(r.sequence);
      } else {
        row["sequence"] = escape_bytes(r.sequence);
      }
      row["blind_count"] = r.blind_count;
      row["corpus_frequency"] = r.corpus_frequency;
      arr.push_back(row);
    }
    return arr;
  };
  j["top_prefixes"] = rows_json(StatsTable::Prefixes);
  j["top_preceding"] = rows_json(StatsTable::Preceding);
  j["top_pairs"] = rows_json(StatsTable::Pairs);
  j["size_histogram"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.size_histogram.size(); ++i)
    j["size_histogram"].push_back(
        {{"bucket", detail::size_bucket_label(i)}, {"count", s.size_histogram[i]}});
  j["position_histogram"] = nlohmann::json::array();
  if (s.total_ranges > 0)
    for (std::size_t i = 0; i < 10; ++i)
      j["position_histogram"].push_back({{"decile", i},
                                         {"count", s.position[i].count},
                                         {"mean_size", s.position[i].mean()},
                                         {"stddev_size", s.position[i].stddev()}});
  return j;
}

}  // namespace bspot
