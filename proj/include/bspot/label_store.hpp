#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace bspot {

// Taint labels are dense 32-bit ids. Label 0 is reserved for "untainted" and
// never has a record; the n-th record in the store belongs to label n.
using TaintLabel = std::uint32_t;

inline constexpr TaintLabel kUntainted = 0;

// Fatal misuse of the taint machinery: unknown label ids, id overflow.
class AnalysisError : public std::runtime_error {
 public:
  explicit AnalysisError(const std::string& what) : std::runtime_error(what) {}
};

// One tracked input byte: which declared source it came from and where.
struct SourceOffset {
  std::uint32_t source = 0;
  std::uint64_t offset = 0;
  friend constexpr auto operator<=>(const SourceOffset&, const SourceOffset&) = default;
};

struct LabelRecord {
  enum class Kind : std::uint8_t { Canonical = 1, Union = 2 };

  Kind kind = Kind::Canonical;
  // Set once the label has been observed deciding a branch (or anything else
  // that conditionally changes control flow); never cleared.
  bool affects_cf = false;
  SourceOffset source;                       // Kind::Canonical only
  TaintLabel parent_a = 0, parent_b = 0;     // Kind::Union only, parent_a < parent_b

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

// Append-only provenance table. Canonical records map a label to the input
// byte it was born from; union records point at exactly two older labels, so
// the table is a DAG by construction (parents always have smaller ids).
//
// Union creation normalizes its arguments: union(a, a) = a, union with 0
// returns the other side, operands are ordered (min, max) and deduplicated,
// so re-unioning the same pair never grows the table.
class LabelStore {
 public:
  LabelStore() = default;
  explicit LabelStore(std::uint32_t max_labels) : max_labels_(max_labels) {}

  // Rebuilds a store from records that already satisfy the invariants
  // (deserialized traces, generators). The dedup cache is reconstructed.
  static LabelStore adopt(std::vector<LabelRecord> records) {
    LabelStore s;
    s.records_ = std::move(records);
    for (std::uint32_t i = 0; i < s.records_.size(); ++i) {
      const LabelRecord& r = s.records_[i];
      if (r.kind == LabelRecord::Kind::Union)
        s.union_cache_.emplace(pair_key(r.parent_a, r.parent_b), i + 1);
    }
    return s;
  }

  std::uint32_t count() const { return static_cast<std::uint32_t>(records_.size()); }

  bool contains(TaintLabel l) const { return l >= 1 && l <= records_.size(); }

  const LabelRecord& record(TaintLabel l) const {
    check_known(l);
    return records_[l - 1];
  }

  const std::vector<LabelRecord>& records() const { return records_; }

  TaintLabel create_canonical(SourceOffset src) {
    LabelRecord rec;
    rec.kind = LabelRecord::Kind::Canonical;
    rec.source = src;
    return append(rec);
  }

  TaintLabel union_of(TaintLabel a, TaintLabel b) {
    if (a != kUntainted) check_known(a);
    if (b != kUntainted) check_known(b);
    if (a == b) return a;
    if (a == kUntainted) return b;
    if (b == kUntainted) return a;
    if (a > b) std::swap(a, b);
    const std::uint64_t key = pair_key(a, b);
    if (auto it = union_cache_.find(key); it != union_cache_.end()) return it->second;
    LabelRecord rec;
    rec.kind = LabelRecord::Kind::Union;
    rec.parent_a = a;
    rec.parent_b = b;
    TaintLabel id = append(rec);
    union_cache_.emplace(key, id);
    return id;
  }

  TaintLabel union_many(std::span<const TaintLabel> labels) {
    TaintLabel acc = kUntainted;
    for (TaintLabel l : labels) acc = union_of(acc, l);
    return acc;
  }

  void mark_affects_cf(TaintLabel l) {
    if (l == kUntainted) return;
    check_known(l);
    records_[l - 1].affects_cf = true;
  }

  bool affects_cf(TaintLabel l) const {
    if (l == kUntainted) return false;
    check_known(l);
    return records_[l - 1].affects_cf;
  }

  // Source closure: the set of input bytes reachable from l through the DAG.
  std::set<SourceOffset> sources(TaintLabel l) const {
    std::set<SourceOffset> out;
    if (l == kUntainted) return out;
    check_known(l);
    std::vector<TaintLabel> stack{l};
    std::unordered_set<TaintLabel> seen{l};
    while (!stack.empty()) {
      TaintLabel v = stack.back();
      stack.pop_back();
      const LabelRecord& r = records_[v - 1];
      if (r.kind == LabelRecord::Kind::Canonical) {
        out.insert(r.source);
      } else {
        if (seen.insert(r.parent_a).second) stack.push_back(r.parent_a);
        if (seen.insert(r.parent_b).second) stack.push_back(r.parent_b);
      }
    }
    return out;
  }

  // Equality is over provenance content; the dedup cache is derived state.
  friend bool operator==(const LabelStore& x, const LabelStore& y) {
    return x.records_ == y.records_;
  }

 private:
  static std::uint64_t pair_key(TaintLabel a, TaintLabel b) {
    return (std::uint64_t{a} << 32) | b;
  }

  void check_known(TaintLabel l) const {
    if (!contains(l))
      throw AnalysisError("unknown taint label " + std::to_string(l));
  }

  TaintLabel append(const LabelRecord& rec) {
    if (records_.size() >= max_labels_)
      throw AnalysisError("taint label space exhausted (" +
                          std::to_string(max_labels_) + " labels)");
    records_.push_back(rec);
    return static_cast<TaintLabel>(records_.size());
  }

  std::vector<LabelRecord> records_;
  std::unordered_map<std::uint64_t, TaintLabel> union_cache_;
  std::uint32_t max_labels_ = 0xFFFFFFFFu;
};

}  // namespace bspot
