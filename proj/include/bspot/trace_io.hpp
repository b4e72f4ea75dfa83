#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bspot/trace.hpp"

namespace bspot {

// .bspt layout, all integers little-endian. Fixed 56-byte header:
//
//   offset  size  field
//        0     4  magic "BSPT" (42 53 50 54)
//        4     4  version, u32 = 1
//        8     8  label_count, u64
//       16     4  source_count, u32
//       20     8  output_count, u64
//       28     8  source_table_offset, u64 (always 56)
//       36     8  label_table_offset, u64
//       44     8  output_events_offset, u64
//       52     1  run status, u8 (1 halted, 2 assert-failed, 3 step-limit, 4 runtime-error)
//       53     3  pad, zero
//
// Source table entry: name_len u16, name bytes, length u64, read-set bitmap
// of ceil(length/8) bytes (bit i of byte i/8 set <=> offset i was read;
// trailing bits zero).
//
// Label record, 16 bytes, records for ids 1..label_count in order:
//   kind u8 (1 canonical, 2 union), flags u8 (bit 0 = affects_cf),
//   source_id u16, field_a u64, field_b u32 (reserved, zero).
//   Canonical: field_a = byte offset. Union: field_a = parent_a | parent_b<<32,
//   source_id zero, 0 < parent_a < parent_b < id.
//
// Output event, 16 bytes: position u64, label u32, byte u8, pad u8[3].
//
// Total size = 56 + sum(source entries) + 16*label_count + 16*output_count.

class FormatError : public std::runtime_error {
 public:
  enum class Kind : std::uint8_t {
    BadMagic,
    UnsupportedVersion,
    BadStatus,
    BadSectionBounds,
    Truncated,
    BadLabelRecord,
    BadSourceEntry,
    BadOutputEvent,
    Io,
  };

  FormatError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline constexpr std::uint8_t kMagic[4] = {0x42, 0x53, 0x50, 0x54};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint64_t kHeaderSize = 56;
inline constexpr std::uint64_t kLabelRecordSize = 16;
inline constexpr std::uint64_t kOutputEventSize = 16;

struct ByteWriter {
  std::ostream& os;
  std::uint64_t written = 0;

  void bytes(const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    written += n;
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void le(std::uint64_t v, int n) {
    std::uint8_t buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(buf, static_cast<std::size_t>(n));
  }
};

struct ByteReader {
  std::span<const std::uint8_t> data;
  std::uint64_t pos = 0;

  std::uint64_t remaining() const { return data.size() - pos; }
  const std::uint8_t* take(std::uint64_t n) {
    if (n > remaining())
      throw FormatError(FormatError::Kind::Truncated, "trace file truncated");
    const std::uint8_t* p = data.data() + pos;
    pos += n;
    return p;
  }
  std::uint8_t u8() { return *take(1); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::uint64_t le(int n) {
    const std::uint8_t* p = take(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{p[i]} << (8 * i);
    return v;
  }
};

inline std::uint64_t source_entry_size(const SourceInfo& s) {
  return 2 + s.name.size() + 8 + (s.length() + 7) / 8;
}

}  // namespace detail

inline std::uint64_t trace_file_size(const TraceArtifact& t) {
  std::uint64_t n = detail::kHeaderSize;
  for (const SourceInfo& s : t.sources) n += detail::source_entry_size(s);
  n += detail::kLabelRecordSize * t.labels.count();
  n += detail::kOutputEventSize * t.events.size();
  return n;
}

inline std::uint64_t write_trace(const TraceArtifact& t, std::ostream& os) {
  if (t.sources.size() > 0xFFFF)
    throw FormatError(FormatError::Kind::BadSourceEntry,
                      "too many sources to encode (max 65535)");
  for (const SourceInfo& s : t.sources)
    if (s.name.size() > 0xFFFF)
      throw FormatError(FormatError::Kind::BadSourceEntry,
                        "source name too long to encode (max 65535 bytes)");

  detail::ByteWriter w{os};
  std::uint64_t source_table_size = 0;
  for (const SourceInfo& s : t.sources) source_table_size += detail::source_entry_size(s);
  const std::uint64_t label_table_offset = detail::kHeaderSize + source_table_size;
  const std::uint64_t output_events_offset =
      label_table_offset + detail::kLabelRecordSize * t.labels.count();

  w.bytes(detail::kMagic, 4);
  w.u32(detail::kVersion);
  w.u64(t.labels.count());
  w.u32(static_cast<std::uint32_t>(t.sources.size()));
  w.u64(t.events.size());
  w.u64(detail::kHeaderSize);
  w.u64(label_table_offset);
  w.u64(output_events_offset);
  w.u8(static_cast<std::uint8_t>(t.status));
  w.u8(0);
  w.u8(0);
  w.u8(0);

  for (const SourceInfo& s : t.sources) {
    w.u16(static_cast<std::uint16_t>(s.name.size()));
    w.bytes(s.name.data(), s.name.size());
    w.u64(s.length());
    std::vector<std::uint8_t> bitmap((s.length() + 7) / 8, 0);
    for (std::uint64_t i = 0; i < s.length(); ++i)
      if (s.read[i]) bitmap[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    w.bytes(bitmap.data(), bitmap.size());
  }

  for (TaintLabel id = 1; id <= t.labels.count(); ++id) {
    const LabelRecord& r = t.labels.record(id);
    w.u8(static_cast<std::uint8_t>(r.kind));
    w.u8(r.affects_cf ? 1 : 0);
    if (r.kind == LabelRecord::Kind::Canonical) {
      if (r.source.source > 0xFFFF)
        throw FormatError(FormatError::Kind::BadLabelRecord,
                          "canonical source index too large to encode");
      w.u16(static_cast<std::uint16_t>(r.source.source));
      w.u64(r.source.offset);
    } else {
      w.u16(0);
      w.u64(std::uint64_t{r.parent_a} | (std::uint64_t{r.parent_b} << 32));
    }
    w.u32(0);
  }

  for (const OutputEvent& e : t.events) {
    w.u64(e.position);
    w.u32(e.label);
    w.u8(e.byte);
    w.u8(0);
    w.u8(0);
    w.u8(0);
  }

  if (!os)
    throw FormatError(FormatError::Kind::Io, "failed to write trace stream");
  return w.written;
}

inline TraceArtifact read_trace(std::span<const std::uint8_t> data) {
  using Kind = FormatError::Kind;
  detail::ByteReader r{data};

  if (data.size() < detail::kHeaderSize)
    throw FormatError(Kind::Truncated, "file smaller than fixed header");
  const std::uint8_t* magic = r.take(4);
  if (std::memcmp(magic, detail::kMagic, 4) != 0)
    throw FormatError(Kind::BadMagic, "bad magic bytes");
  const std::uint32_t version = r.u32();
  if (version != detail::kVersion)
    throw FormatError(Kind::UnsupportedVersion,
                      "unsupported version " + std::to_string(version));
  const std::uint64_t label_count = r.u64();
  const std::uint32_t source_count = r.u32();
  const std::uint64_t output_count = r.u64();
  const std::uint64_t source_table_offset = r.u64();
  const std::uint64_t label_table_offset = r.u64();
  const std::uint64_t output_events_offset = r.u64();
  const std::uint8_t status = r.u8();
  r.take(3);  // pad

  if (status < 1 || status > 4)
    throw FormatError(Kind::BadStatus, "unknown run status " + std::to_string(status));
  if (label_count > 0xFFFFFFFFull)
    throw FormatError(Kind::BadSectionBounds, "label count exceeds 32-bit id space");
  if (source_table_offset != detail::kHeaderSize)
    throw FormatError(Kind::BadSectionBounds, "source table offset must be 56");
  if (label_table_offset < source_table_offset || output_events_offset < label_table_offset)
    throw FormatError(Kind::BadSectionBounds, "section offsets out of order");
  if (label_count > (output_events_offset - label_table_offset) / detail::kLabelRecordSize ||
      label_table_offset + label_count * detail::kLabelRecordSize != output_events_offset)
    throw FormatError(Kind::BadSectionBounds, "label table does not fill its section");
  if (output_count > (UINT64_MAX - output_events_offset) / detail::kOutputEventSize)
    throw FormatError(Kind::BadSectionBounds, "output event count overflows");
  const std::uint64_t expected_size =
      output_events_offset + output_count * detail::kOutputEventSize;
  if (expected_size > data.size())
    throw FormatError(Kind::Truncated, "file shorter than its sections");
  if (expected_size < data.size())
    throw FormatError(Kind::BadSectionBounds, "trailing bytes after output events");

  TraceArtifact t;
  t.status = static_cast<RunStatus>(status);

  t.sources.reserve(source_count);
  for (std::uint32_t i = 0; i < source_count; ++i) {
    if (r.pos >= label_table_offset)
      throw FormatError(Kind::BadSectionBounds, "source table overruns its section");
    const std::uint16_t name_len = r.u16();
    const std::uint8_t* name = r.take(name_len);
    const std::uint64_t length = r.u64();
    const std::uint64_t bitmap_len = length / 8 + (length % 8 != 0);
    if (r.pos > label_table_offset || bitmap_len > label_table_offset - r.pos)
      throw FormatError(Kind::BadSectionBounds, "source table overruns its section");
    const std::uint8_t* bitmap = r.take(bitmap_len);
    if (length % 8 != 0 && bitmap_len > 0) {
      const std::uint8_t mask = static_cast<std::uint8_t>(0xFFu << (length % 8));
      if (bitmap[bitmap_len - 1] & mask)
        throw FormatError(Kind::BadSourceEntry,
                          "read-set bitmap has bits beyond the declared length");
    }
    SourceInfo s;
    s.name.assign(reinterpret_cast<const char*>(name), name_len);
    s.read.assign(length, false);
    for (std::uint64_t b = 0; b < length; ++b)
      if (bitmap[b / 8] & (1u << (b % 8))) s.read[b] = true;
    t.sources.push_back(std::move(s));
  }
  if (r.pos != label_table_offset)
    throw FormatError(Kind::BadSectionBounds, "source table does not fill its section");

  std::vector<LabelRecord> records;
  records.reserve(label_count);
  for (std::uint64_t id = 1; id <= label_count; ++id) {
    const std::uint8_t kind = r.u8();
    const std::uint8_t flags = r.u8();
    const std::uint16_t source_id = r.u16();
    const std::uint64_t field_a = r.u64();
    const std::uint32_t field_b = r.u32();
    auto bad = [&](const std::string& what) {
      throw FormatError(Kind::BadLabelRecord,
                        "label " + std::to_string(id) + ": " + what);
    };
    if (kind != 1 && kind != 2) bad("unknown kind " + std::to_string(kind));
    if (flags & ~1u) bad("reserved flag bits set");
    if (field_b != 0) bad("reserved field not zero");
    LabelRecord rec;
    rec.affects_cf = (flags & 1) != 0;
    if (kind == 1) {
      rec.kind = LabelRecord::Kind::Canonical;
      if (source_id >= t.sources.size()) bad("source index out of range");
      if (field_a >= t.sources[source_id].length()) bad("offset past declared source length");
      rec.source = {source_id, field_a};
    } else {
      rec.kind = LabelRecord::Kind::Union;
      if (source_id != 0) bad("union record with nonzero source index");
      const TaintLabel pa = static_cast<TaintLabel>(field_a & 0xFFFFFFFFu);
      const TaintLabel pb = static_cast<TaintLabel>(field_a >> 32);
      if (pa == 0) bad("union parent is the untainted label");
      if (pa >= pb) bad("union parents not in (smaller, larger) order");
      if (pb >= id) bad("union parent id not smaller than the label itself");
      rec.parent_a = pa;
      rec.parent_b = pb;
    }
    records.push_back(rec);
  }
  t.labels = LabelStore::adopt(std::move(records));

  t.events.reserve(output_count);
  for (std::uint64_t i = 0; i < output_count; ++i) {
    OutputEvent e;
    e.position = r.u64();
    e.label = r.u32();
    e.byte = r.u8();
    const std::uint8_t p0 = r.u8(), p1 = r.u8(), p2 = r.u8();
    if (p0 || p1 || p2)
      throw FormatError(Kind::BadOutputEvent,
                        "output event " + std::to_string(i) + ": reserved pad not zero");
    if (e.label > t.labels.count())
      throw FormatError(Kind::BadOutputEvent,
                        "output event " + std::to_string(i) + ": label out of range");
    t.events.push_back(e);
  }

  return t;
}

inline std::uint64_t write_trace_file(const TraceArtifact& t, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw FormatError(FormatError::Kind::Io, "cannot open " + path.string() + " for writing");
  std::uint64_t n = write_trace(t, os);
  os.flush();
  if (!os)
    throw FormatError(FormatError::Kind::Io, "failed writing " + path.string());
  return n;
}

inline TraceArtifact read_trace_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  if (is.bad())
    throw FormatError(FormatError::Kind::Io, "failed reading " + path.string());
  return read_trace(data);
}

}  // namespace bspot
