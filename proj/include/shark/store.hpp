// Mixed-precision embedding store. Each row carries a precision tier, a
// 32-bit scale and a quantized payload; tier assignment follows the row's
// priority score against the (t8, t16) thresholds. The on-disk format is
// bit-exact and little-endian:
//
//   magic "SHRK" | version u16 | table count u32
//   per table: id u32 | n_rows u64 | dim u16 | t8 f64 | t16 f64
//              then n_rows x [extra word (7 bytes) || payload]
//   optional:  tag "WSCR" | per table n_rows x f64 priority scores
//
// The extra word is: precision u8 | dimension u16 | scale f32 (7 bytes).
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "shark/errors.hpp"
#include "shark/priority.hpp"
#include "shark/quantizer.hpp"

namespace shark {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

// 7-byte per-row metadata record.
struct ExtraWord {
  std::uint8_t precision = 0;
  std::uint16_t dimension = 0;
  float scale = 0.0f;

  static constexpr std::size_t kBytes = 7;

  void encode(std::uint8_t out[kBytes]) const {
    out[0] = precision;
    std::memcpy(out + 1, &dimension, 2);
    std::memcpy(out + 3, &scale, 4);
  }

  // `offset` is the word's position in the file, used in error messages.
  static ExtraWord decode(const std::uint8_t in[kBytes], std::uint64_t offset) {
    ExtraWord word;
    word.precision = in[0];
    std::memcpy(&word.dimension, in + 1, 2);
    std::memcpy(&word.scale, in + 3, 4);
    if (word.precision > 2) {
      throw FormatError("invalid precision tag " + std::to_string(word.precision) +
                        " at offset " + std::to_string(offset));
    }
    if (!std::isfinite(word.scale) || word.scale < 0.0f) {
      throw FormatError("invalid scale at offset " + std::to_string(offset + 3));
    }
    return word;
  }
};

struct TableMemory {
  std::uint32_t table_id = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t extra_word_bytes = 0;
  std::uint64_t baseline_bytes = 0;  // 4 * dim * n_rows, no extra words
};

struct MemoryReport {
  std::vector<TableMemory> tables;
  std::uint64_t payload_bytes = 0;
  std::uint64_t extra_word_bytes = 0;
  std::uint64_t baseline_bytes = 0;

  // (payload + extra words) / fp32 baseline; 0 for an empty store.
  double ratio() const {
    if (baseline_bytes == 0) return 0.0;
    return static_cast<double>(payload_bytes + extra_word_bytes) /
           static_cast<double>(baseline_bytes);
  }

  // payload only / fp32 baseline; 0 for an empty store.
  double payload_ratio() const {
    if (baseline_bytes == 0) return 0.0;
    return static_cast<double>(payload_bytes) / static_cast<double>(baseline_bytes);
  }
};

// One embedding table with per-row tiers. Rows start all-zero at the tier a
// zero priority score maps to under the table's thresholds.
class MixedTable {
 public:
  struct Row {
    Tier tier;
    float scale;
    std::vector<std::uint8_t> payload;
  };

  MixedTable(std::uint32_t id, std::uint64_t n_rows, std::uint16_t dim, double t8,
             double t16, ScalePolicy policy = ScalePolicy::kSymmetric)
      : id_(id), dim_(dim), t8_(t8), t16_(t16), policy_(policy) {
    check_thresholds(t8, t16);
    if (dim == 0) throw ConfigError("table dim must be >= 1");
    const Tier initial = tier_for_score(0.0, t8, t16);
    rows_.resize(n_rows, Row{initial, 0.0f,
                             std::vector<std::uint8_t>(dim * tier_value_bytes(initial), 0)});
  }

  std::uint32_t id() const { return id_; }
  std::uint64_t n_rows() const { return rows_.size(); }
  std::uint16_t dim() const { return dim_; }
  double t8() const { return t8_; }
  double t16() const { return t16_; }
  ScalePolicy policy() const { return policy_; }
  Tier row_tier(std::uint64_t row) const { return at(row).tier; }
  float row_scale(std::uint64_t row) const { return at(row).scale; }

  void set_thresholds(double t8, double t16) {
    check_thresholds(t8, t16);
    t8_ = t8;
    t16_ = t16;
  }

  std::vector<double> lookup(std::uint64_t row) const {
    const Row& r = at(row);
    return dequantize_row(r.payload, r.tier, r.scale, dim_);
  }

  void lookup_into(std::uint64_t row, std::span<double> out) const {
    const Row& r = at(row);
    const auto values = dequantize_row(r.payload, r.tier, r.scale, dim_);
    std::memcpy(out.data(), values.data(), dim_ * sizeof(double));
  }

  // Quantize-on-write: recomputes the scale for the row's current tier and
  // stores the quantized payload.
  void write(std::uint64_t row, std::span<const double> values, RoundingMode& rounding) {
    Row& r = at(row);
    if (values.size() != dim_) {
      throw ValidationError("write: got " + std::to_string(values.size()) +
                            " values for table " + std::to_string(id_) + " with dim " +
                            std::to_string(dim_));
    }
    r.scale = compute_scale(values, r.tier, policy_);
    r.payload = quantize_row(values, r.tier, r.scale, rounding);
  }

  // Moves every row to the tier its score demands. Migrations re-quantize the
  // row's current dequantized values with nearest rounding (deterministic).
  // Returns the number of migrated rows; a second call migrates none.
  std::size_t retier(std::span<const double> scores) {
    if (scores.size() != rows_.size()) {
      throw ValidationError("retier: score slice covers " + std::to_string(scores.size()) +
                            " rows, table has " + std::to_string(rows_.size()));
    }
    RoundingMode nearest = RoundingMode::nearest();
    std::size_t migrated = 0;
    for (std::uint64_t i = 0; i < rows_.size(); ++i) {
      const Tier target = tier_for_score(scores[i], t8_, t16_);
      Row& r = rows_[i];
      if (r.tier == target) continue;
      const auto values = dequantize_row(r.payload, r.tier, r.scale, dim_);
      r.tier = target;
      r.scale = compute_scale(values, target, policy_);
      r.payload = quantize_row(values, target, r.scale, nearest);
      ++migrated;
    }
    return migrated;
  }

  TierCounts tier_histogram() const {
    TierCounts counts;
    for (const Row& r : rows_) {
      switch (r.tier) {
        case Tier::kInt8: ++counts.int8; break;
        case Tier::kFp16: ++counts.fp16; break;
        case Tier::kFp32: ++counts.fp32; break;
      }
    }
    return counts;
  }

  TableMemory memory() const {
    TableMemory m;
    m.table_id = id_;
    for (const Row& r : rows_) m.payload_bytes += r.payload.size();
    m.extra_word_bytes = ExtraWord::kBytes * rows_.size();
    m.baseline_bytes = 4ull * dim_ * rows_.size();
    return m;
  }

  // Drops all rows (used when a feature field is pruned away).
  void clear() { rows_.clear(); }

  const Row& raw_row(std::uint64_t row) const { return at(row); }

  void set_raw_row(std::uint64_t row, Row value) {
    if (value.payload.size() != dim_ * tier_value_bytes(value.tier)) {
      throw ValidationError("set_raw_row: payload length does not match tier/dim");
    }
    at(row) = std::move(value);
  }

 private:
  const Row& at(std::uint64_t row) const {
    if (row >= rows_.size()) {
      throw LookupError("row " + std::to_string(row) + " out of range for table " +
                        std::to_string(id_) + " with " + std::to_string(rows_.size()) +
                        " rows");
    }
    return rows_[row];
  }
  Row& at(std::uint64_t row) {
    return const_cast<Row&>(static_cast<const MixedTable*>(this)->at(row));
  }

  std::uint32_t id_;
  std::uint16_t dim_;
  double t8_;
  double t16_;
  ScalePolicy policy_;
  std::vector<Row> rows_;
};

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  template <typename T>
  void scalar(T v) {
    bytes(&v, sizeof(T));
  }
  const std::vector<std::uint8_t>& buffer() const { return buffer_; }

 private:
  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t offset() const { return offset_; }
  std::uint64_t remaining() const { return data_.size() - offset_; }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError("unexpected end of file at offset " + std::to_string(offset_) +
                        ": need " + std::to_string(n) + " bytes for " + what);
    }
    const std::uint8_t* p = data_.data() + offset_;
    offset_ += n;
    return p;
  }

  template <typename T>
  T scalar(const char* what) {
    T v;
    std::memcpy(&v, take(sizeof(T), what), sizeof(T));
    return v;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::uint64_t offset_ = 0;
};

}  // namespace detail

inline constexpr char kStoreMagic[4] = {'S', 'H', 'R', 'K'};
inline constexpr char kScoreSectionTag[4] = {'W', 'S', 'C', 'R'};
inline constexpr std::uint16_t kStoreVersion = 1;

// A set of mixed-precision tables, one per feature field.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  std::size_t add_table(std::uint64_t n_rows, std::uint16_t dim, double t8, double t16,
                        ScalePolicy policy = ScalePolicy::kSymmetric) {
    tables_.emplace_back(static_cast<std::uint32_t>(tables_.size()), n_rows, dim, t8, t16,
                         policy);
    return tables_.size() - 1;
  }

  std::size_t n_tables() const { return tables_.size(); }
  MixedTable& table(std::size_t i) { return tables_.at(i); }
  const MixedTable& table(std::size_t i) const { return tables_.at(i); }

  std::vector<std::size_t> rows_per_table() const {
    std::vector<std::size_t> out;
    out.reserve(tables_.size());
    for (const auto& t : tables_) out.push_back(t.n_rows());
    return out;
  }

  std::size_t retier(const PriorityTracker& tracker) {
    if (tracker.n_tables() < tables_.size()) {
      throw ValidationError("retier: tracker covers fewer tables than the store");
    }
    std::size_t migrated = 0;
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      migrated += tables_[i].retier(tracker.table_scores(i).first(tables_[i].n_rows()));
    }
    return migrated;
  }

  void set_thresholds(double t8, double t16) {
    for (auto& t : tables_) t.set_thresholds(t8, t16);
  }

  TierCounts tier_histogram() const {
    TierCounts counts;
    for (const auto& t : tables_) {
      const TierCounts c = t.tier_histogram();
      counts.int8 += c.int8;
      counts.fp16 += c.fp16;
      counts.fp32 += c.fp32;
    }
    return counts;
  }

  MemoryReport memory_report() const {
    MemoryReport report;
    for (const auto& t : tables_) {
      const TableMemory m = t.memory();
      report.tables.push_back(m);
      report.payload_bytes += m.payload_bytes;
      report.extra_word_bytes += m.extra_word_bytes;
      report.baseline_bytes += m.baseline_bytes;
    }
    return report;
  }

  std::vector<std::uint8_t> serialize(const PriorityTracker* scores = nullptr) const {
    detail::ByteWriter w;
    w.bytes(kStoreMagic, 4);
    w.scalar<std::uint16_t>(kStoreVersion);
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(tables_.size()));
    for (const auto& t : tables_) {
      w.scalar<std::uint32_t>(t.id());
      w.scalar<std::uint64_t>(t.n_rows());
      w.scalar<std::uint16_t>(t.dim());
      w.scalar<double>(t.t8());
      w.scalar<double>(t.t16());
      for (std::uint64_t i = 0; i < t.n_rows(); ++i) {
        const MixedTable::Row& row = t.raw_row(i);
        ExtraWord word{static_cast<std::uint8_t>(row.tier), t.dim(), row.scale};
        std::uint8_t bytes[ExtraWord::kBytes];
        word.encode(bytes);
        w.bytes(bytes, ExtraWord::kBytes);
        w.bytes(row.payload.data(), row.payload.size());
      }
    }
    if (scores != nullptr) {
      w.bytes(kScoreSectionTag, 4);
      for (std::size_t i = 0; i < tables_.size(); ++i) {
        const auto table_scores = scores->table_scores(i);
        for (std::uint64_t r = 0; r < tables_[i].n_rows(); ++r) {
          w.scalar<double>(table_scores[r]);
        }
      }
    }
    return w.buffer();
  }

  // Parses the byte image. If `scores_out` is non-null and the file has a
  // score section, the per-table scores are copied there.
  static EmbeddingStore deserialize(std::span<const std::uint8_t> data,
                                    std::vector<std::vector<double>>* scores_out = nullptr,
                                    ScalePolicy policy = ScalePolicy::kSymmetric) {
    detail::ByteReader r(data);
    const std::uint8_t* magic = r.take(4, "magic");
    if (std::memcmp(magic, kStoreMagic, 4) != 0) {
      throw FormatError("bad magic at offset 0: not a SHRK store file");
    }
    const auto version = r.scalar<std::uint16_t>("version");
    if (version != kStoreVersion) {
      throw FormatError("unsupported version " + std::to_string(version) + " at offset 4");
    }
    const auto n_tables = r.scalar<std::uint32_t>("table count");
    EmbeddingStore store;
    for (std::uint32_t t = 0; t < n_tables; ++t) {
      const auto id = r.scalar<std::uint32_t>("table id");
      if (id != t) {
        throw FormatError("table id " + std::to_string(id) + " out of order at offset " +
                          std::to_string(r.offset() - 4));
      }
      const auto n_rows = r.scalar<std::uint64_t>("row count");
      const auto dim = r.scalar<std::uint16_t>("dim");
      if (dim == 0) {
        throw FormatError("zero dim at offset " + std::to_string(r.offset() - 2));
      }
      const auto t8 = r.scalar<double>("t8");
      const auto t16 = r.scalar<double>("t16");
      if (!(t8 <= t16)) {
        throw FormatError("thresholds t8 > t16 at offset " + std::to_string(r.offset() - 16));
      }
      store.tables_.emplace_back(id, n_rows, dim, t8, t16, policy);
      MixedTable& table = store.tables_.back();
      for (std::uint64_t i = 0; i < n_rows; ++i) {
        const std::uint64_t word_offset = r.offset();
        const ExtraWord word =
            ExtraWord::decode(r.take(ExtraWord::kBytes, "extra word"), word_offset);
        if (word.dimension != dim) {
          throw FormatError("extra word dimension " + std::to_string(word.dimension) +
                            " does not match table dim " + std::to_string(dim) +
                            " at offset " + std::to_string(word_offset + 1));
        }
        const auto tier = static_cast<Tier>(word.precision);
        const std::size_t payload_len = dim * tier_value_bytes(tier);
        const std::uint8_t* payload = r.take(payload_len, "row payload");
        table.set_raw_row(i, MixedTable::Row{tier, word.scale,
                                             std::vector<std::uint8_t>(payload,
                                                                       payload + payload_len)});
      }
    }
    const bool want_scores = r.remaining() > 0;
    if (want_scores) {
      const std::uint64_t tag_offset = r.offset();
      const std::uint8_t* tag = r.take(4, "section tag");
      if (std::memcmp(tag, kScoreSectionTag, 4) != 0) {
        throw FormatError("unknown trailing section at offset " + std::to_string(tag_offset));
      }
      for (auto& table : store.tables_) {
        std::vector<double> scores(table.n_rows());
        for (double& s : scores) s = r.scalar<double>("priority score");
        if (scores_out != nullptr) scores_out->push_back(std::move(scores));
      }
      if (r.remaining() != 0) {
        throw FormatError("trailing bytes after score section at offset " +
                          std::to_string(r.offset()));
      }
    }
    return store;
  }

  void save(const std::string& path, const PriorityTracker* scores = nullptr) const {
    const auto buffer = serialize(scores);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size()));
    if (!out) throw IoError("short write to " + path);
  }

  static EmbeddingStore load(const std::string& path,
                             std::vector<std::vector<double>>* scores_out = nullptr,
                             ScalePolicy policy = ScalePolicy::kSymmetric) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buffer(static_cast<std::size_t>(size));
    in.read(reinterpret_cast<char*>(buffer.data()), size);
    if (!in) throw IoError("short read from " + path);
    return deserialize(buffer, scores_out, policy);
  }

 private:
  std::vector<MixedTable> tables_;
};

}  // namespace shark
