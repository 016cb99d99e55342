// Frequency-based per-row priority scores with exponential decay and
// positive-sample weighting. Scores drive the precision tier each embedding
// row is stored at.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shark/errors.hpp"
#include "shark/quantizer.hpp"

namespace shark {

// Access counts for one row within one batch.
struct RowAccess {
  std::uint64_t row = 0;
  std::int64_t positive = 0;  // occurrences in positive-label samples
  std::int64_t negative = 0;  // occurrences in negative-label samples
};

// Per-table access lists for one batch. Outer index = table id.
using BatchAccess = std::vector<std::vector<RowAccess>>;

struct TierCounts {
  std::size_t int8 = 0;
  std::size_t fp16 = 0;
  std::size_t fp32 = 0;

  std::size_t total() const { return int8 + fp16 + fp32; }
};

inline void check_thresholds(double t8, double t16) {
  if (!(t8 <= t16)) {
    throw ConfigError("tier thresholds require t8 <= t16, got t8=" + std::to_string(t8) +
                      " t16=" + std::to_string(t16));
  }
}

// Score -> precision bucket: w < t8 is int8, t8 <= w < t16 is fp16,
// w >= t16 is fp32. Callers validate t8 <= t16 once up front.
inline Tier tier_for_score(double w, double t8, double t16) {
  if (w < t8) return Tier::kInt8;
  if (w < t16) return Tier::kFp16;
  return Tier::kFp32;
}

// One score w_r per embedding row, updated once per batch:
//   w <- (1 - beta) * w + beta * (c_pos * alpha + c_neg)
// Only rows listed in the batch are touched by default; with
// decay_untouched, unlisted rows decay by (1 - beta) as well.
class PriorityTracker {
 public:
  PriorityTracker(std::vector<std::size_t> rows_per_table, double alpha = 2.0,
                  double beta = 0.99, bool decay_untouched = false)
      : alpha_(alpha), beta_(beta), decay_untouched_(decay_untouched) {
    if (!(alpha > 0.0)) throw ConfigError("priority alpha must be > 0");
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("priority beta must be in (0, 1)");
    scores_.reserve(rows_per_table.size());
    for (std::size_t n : rows_per_table) scores_.emplace_back(n, 0.0);
  }

  std::size_t n_tables() const { return scores_.size(); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  void update_batch(const BatchAccess& access) {
    if (access.size() > scores_.size()) {
      throw ValidationError("update_batch: access covers more tables than tracked");
    }
    if (decay_untouched_) {
      for (auto& table : scores_) {
        for (double& w : table) w *= 1.0 - beta_;
      }
    }
    for (std::size_t t = 0; t < access.size(); ++t) {
      auto& table = scores_[t];
      for (const RowAccess& a : access[t]) {
        if (a.positive < 0 || a.negative < 0) {
          throw ValidationError("update_batch: negative access count for table " +
                                std::to_string(t) + " row " + std::to_string(a.row));
        }
        if (a.row >= table.size()) {
          throw LookupError("update_batch: row " + std::to_string(a.row) +
                            " out of range for table " + std::to_string(t));
        }
        const double counts = static_cast<double>(a.positive) * alpha_ +
                              static_cast<double>(a.negative);
        double& w = table[a.row];
        if (decay_untouched_) {
          w += beta_ * counts;  // (1 - beta) factor already applied above
        } else {
          w = (1.0 - beta_) * w + beta_ * counts;
        }
      }
    }
  }

  double score(std::size_t table, std::size_t row) const {
    check_ids(table, row);
    return scores_[table][row];
  }

  std::span<const double> table_scores(std::size_t table) const {
    if (table >= scores_.size()) {
      throw LookupError("table " + std::to_string(table) + " out of range");
    }
    return scores_[table];
  }

  void set_table_scores(std::size_t table, std::vector<double> scores) {
    if (table >= scores_.size() || scores.size() != scores_[table].size()) {
      throw ValidationError("set_table_scores: table/row shape mismatch");
    }
    scores_[table] = std::move(scores);
  }

  TierCounts tier_histogram(double t8, double t16) const {
    check_thresholds(t8, t16);
    TierCounts counts;
    for (const auto& table : scores_) {
      for (double w : table) {
        switch (tier_for_score(w, t8, t16)) {
          case Tier::kInt8: ++counts.int8; break;
          case Tier::kFp16: ++counts.fp16; break;
          case Tier::kFp32: ++counts.fp32; break;
        }
      }
    }
    return counts;
  }

 private:
  void check_ids(std::size_t table, std::size_t row) const {
    if (table >= scores_.size()) {
      throw LookupError("table " + std::to_string(table) + " out of range");
    }
    if (row >= scores_[table].size()) {
      throw LookupError("row " + std::to_string(row) + " out of range for table " +
                        std::to_string(table));
    }
  }

  double alpha_;
  double beta_;
  bool decay_untouched_;
  std::vector<std::vector<double>> scores_;
};

}  // namespace shark
