// Shared test plumbing: sample loading, deterministic random generators for
// traces/programs/inputs, and a brute-force reference implementation of the
// blind-spot classification that the analyzer tests compare against.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bspot/bspot.hpp"

namespace testsupport {

inline std::string samples_dir() { return BSPOT_SAMPLES_DIR; }
inline std::string cli_path() { return BSPOT_CLI_PATH; }

inline std::string read_file_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
}

inline bspot::Program load_sample(const std::string& name) {
  return bspot::parse_program(read_file_text(samples_dir() + "/" + name + ".spl"));
}

inline std::map<std::string, std::vector<std::uint8_t>> one_input(
    std::vector<std::uint8_t> bytes) {
  std::map<std::string, std::vector<std::uint8_t>> m;
  m.emplace("in", std::move(bytes));
  return m;
}

inline std::vector<std::uint8_t> random_bytes(bspot::Xorshift64Star& rng, std::size_t len) {
  std::vector<std::uint8_t> out(len);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng.below(256));
  return out;
}

// Runs `x := <expr>` and reconstructs the full 64-bit value of x from eight
// one-byte outputs, so arithmetic tests are not limited by output truncation.
inline std::int64_t run_expr(const std::string& expr,
                             std::map<std::string, std::vector<std::uint8_t>> inputs = {}) {
  std::string text = "x := " + expr + "\n";
  for (int k = 0; k < 8; ++k)
    text += "output(x >> " + std::to_string(8 * k) + ")\n";
  text += "halt\n";
  const bspot::PlainRun r = bspot::run_plain(bspot::parse_program(text), inputs);
  if (r.status != bspot::RunStatus::Halted)
    throw std::runtime_error("expression run did not halt: " + r.diagnostic);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t{r.output[k]} << (8 * k);
  return static_cast<std::int64_t>(v);
}

// The six bundled sample programs plus their crafted demo inputs.
struct SampleCase {
  const char* name;
  std::vector<std::vector<std::uint8_t>> crafted;
};

inline const std::vector<SampleCase>& corpus() {
  static const std::vector<SampleCase> c = {
      {"copy_through", {{65, 66, 67, 68, 69, 70}}},
      {"skip_field", {{88, 89, 90}}},
      {"checksum_guard", {{1, 2, 3, 4, 10, 99, 98}}},
      {"comment_kv", {{35, 97, 10, 120, 61, 121, 10, 0}}},
      {"length_prefixed", {{2, 65, 66, 120, 121, 0}}},
      {"sum_threshold", {{40, 12}, {10, 12}}},
  };
  return c;
}

// ---- reference blind-spot classification ---------------------------------
//
// Independent of the analyzer's linear sweep: exclusion is computed as the
// union of full source closures of every output label and every label marked
// affects_cf, using LabelStore::sources() directly.

inline std::set<bspot::SourceOffset> excluded_offsets(const bspot::TraceArtifact& t) {
  std::set<bspot::SourceOffset> out;
  auto add = [&](bspot::TaintLabel l) {
    if (l == bspot::kUntainted) return;
    const std::set<bspot::SourceOffset> s = t.labels.sources(l);
    out.insert(s.begin(), s.end());
  };
  for (const bspot::OutputEvent& e : t.events) add(e.label);
  for (bspot::TaintLabel l = 1; l <= t.labels.count(); ++l)
    if (t.labels.record(l).affects_cf) add(l);
  return out;
}

struct ExpectedSpots {
  std::vector<bspot::Range> not_read, not_in_output, blind;
};

inline ExpectedSpots expected_spots(const bspot::TraceArtifact& t, std::uint32_t source) {
  const std::set<bspot::SourceOffset> excl = excluded_offsets(t);
  const bspot::SourceInfo& src = t.sources[source];
  std::vector<bool> has_canon(src.length(), false);
  for (bspot::TaintLabel l = 1; l <= t.labels.count(); ++l) {
    const bspot::LabelRecord& rec = t.labels.record(l);
    if (rec.kind == bspot::LabelRecord::Kind::Canonical && rec.source.source == source &&
        rec.source.offset < src.length())
      has_canon[rec.source.offset] = true;
  }
  std::set<std::uint64_t> nr, nio, blind;
  for (std::uint64_t i = 0; i < src.length(); ++i) {
    const bool read = src.read[i];
    const bool ex = excl.count({source, i}) > 0;
    if (!read) nr.insert(i);
    if (read && has_canon[i] && !ex) nio.insert(i);
    if (!read || (read && has_canon[i] && !ex)) blind.insert(i);
  }
  return {bspot::merge_offsets(nr), bspot::merge_offsets(nio), bspot::merge_offsets(blind)};
}

// ---- random artifact generator --------------------------------------------
//
// Valid by construction: union parents are strictly smaller distinct ids,
// every canonical's offset fits its source and has the read bit set, events
// reference labels <= count. Exercises empty sources, unread-but-declared
// bytes, and read-without-canonical offsets.

inline bspot::TraceArtifact random_trace(bspot::Xorshift64Star& rng) {
  bspot::TraceArtifact t;
  const std::uint32_t nsources = 1 + static_cast<std::uint32_t>(rng.below(3));
  for (std::uint32_t s = 0; s < nsources; ++s) {
    bspot::SourceInfo src;
    src.name = "src" + std::to_string(s);
    const std::uint64_t len = s == 0 ? 1 + rng.below(40) : rng.below(41);
    src.read.assign(len, false);
    t.sources.push_back(std::move(src));
  }
  std::vector<std::uint32_t> nonempty;
  for (std::uint32_t s = 0; s < nsources; ++s)
    if (t.sources[s].length() > 0) nonempty.push_back(s);

  const std::uint32_t nlabels = static_cast<std::uint32_t>(rng.below(201));
  std::vector<bspot::LabelRecord> recs;
  recs.reserve(nlabels);
  for (std::uint32_t id = 1; id <= nlabels; ++id) {
    bspot::LabelRecord rec;
    rec.affects_cf = rng.below(8) == 0;
    const bool make_union = id >= 3 && rng.below(2) == 0;
    if (make_union) {
      rec.kind = bspot::LabelRecord::Kind::Union;
      const auto a = static_cast<bspot::TaintLabel>(1 + rng.below(id - 1));
      auto b = static_cast<bspot::TaintLabel>(1 + rng.below(id - 2));
      if (b >= a) ++b;
      rec.parent_a = std::min(a, b);
      rec.parent_b = std::max(a, b);
    } else {
      rec.kind = bspot::LabelRecord::Kind::Canonical;
      const std::uint32_t s = nonempty[rng.below(nonempty.size())];
      const std::uint64_t off = rng.below(t.sources[s].length());
      rec.source = {s, off};
      t.sources[s].read[off] = true;
    }
    recs.push_back(rec);
  }
  t.labels = bspot::LabelStore::adopt(std::move(recs));

  // A few read-but-never-labeled offsets (reads whose labels were discarded
  // are not representable, but read bits without canonicals are legal).
  for (std::uint32_t s = 0; s < nsources; ++s)
    if (t.sources[s].length() > 0 && rng.below(4) == 0)
      t.sources[s].read[rng.below(t.sources[s].length())] = true;

  const std::uint64_t nevents = rng.below(31);
  for (std::uint64_t i = 0; i < nevents; ++i) {
    bspot::OutputEvent e;
    e.position = rng.next();
    e.label = static_cast<bspot::TaintLabel>(rng.below(std::uint64_t{nlabels} + 1));
    e.byte = static_cast<std::uint8_t>(rng.below(256));
    t.events.push_back(e);
  }
  t.status = static_cast<bspot::RunStatus>(1 + rng.below(4));
  return t;
}

// ---- random program generator ----------------------------------------------
//
// Terminates by construction: conditional jumps only ever target statements
// strictly after themselves, everything else falls through, and the last
// statement is halt. All four variables are bound up front.

inline bspot::Program random_program(bspot::Xorshift64Star& rng) {
  bspot::Program p;
  const char* vars[4] = {"v0", "v1", "v2", "v3"};
  for (const char* v : vars) p.assign(v, p.econst(static_cast<std::int64_t>(rng.below(10))));

  const std::uint32_t body = 4 + static_cast<std::uint32_t>(rng.below(12));
  const std::uint32_t halt_index = 4 + body;
  for (std::uint32_t i = 4; i < halt_index; ++i) {
    const char* a = vars[rng.below(4)];
    const char* b = vars[rng.below(4)];
    switch (rng.below(8)) {
      case 0:
      case 1:
        p.assign(a, p.einput("in"));
        break;
      case 2:
        p.assign(a, p.ebin(bspot::BinOp::Add, p.evar(b), p.evar(vars[rng.below(4)])));
        break;
      case 3:
        p.assign(a, p.ebin(bspot::BinOp::Mul, p.evar(b),
                           p.econst(1 + static_cast<std::int64_t>(rng.below(5)))));
        break;
      case 4:
        p.output(p.evar(a));
        break;
      case 5:
        p.output(p.einput("in"));
        break;
      case 6: {
        const std::uint32_t t = i + 1 + static_cast<std::uint32_t>(rng.below(halt_index - i));
        const std::uint32_t f = i + 1 + static_cast<std::uint32_t>(rng.below(halt_index - i));
        p.cond_jump(p.ebin(bspot::BinOp::Lt, p.evar(a),
                           p.econst(static_cast<std::int64_t>(rng.below(64)))),
                    t, f);
        break;
      }
      default:
        p.assign(a, p.ebin(bspot::BinOp::BitXor, p.evar(b), p.einput("in")));
        break;
    }
  }
  p.halt();
  return p;
}

}  // namespace testsupport
