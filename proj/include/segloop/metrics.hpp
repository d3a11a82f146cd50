// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace segloop {

/// Per-scan evaluation bookkeeping.
struct EvalRecord {
  std::uint64_t scan_index = 0;
  double travel_m = 0.0;                    // cumulative along trajectory
  double distance_since_detection = 0.0;    // meters without a true detection
  bool closure = false;                     // verification returned a closure
  enum class Outcome { kNone, kTruePositive, kFalsePositive };
  Outcome outcome = Outcome::kNone;
  std::size_t consensus = 0;
  double seg_ms = 0.0;
  double desc_ms = 0.0;
  double match_ms = 0.0;
  double verify_ms = 0.0;
  std::size_t seg_runs = 0;   // segmentation executions in this scan
  std::size_t desc_runs = 0;  // description executions in this scan

  double total_ms() const { return seg_ms + desc_ms + match_ms + verify_ms; }
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;  // sweep from strictest to loosest threshold
  double auc = 0.0;
  std::size_t operating_index = 0;  // point nearest FPR = 0.2
};

/// Threshold sweep over (score, label) pairs; predict match when
/// score >= threshold. Throws when only one label is present.
RocResult roc_curve(const std::vector<std::pair<double, bool>>& scores);

/// Eq.-style localization probability: P(x) = (sum of the full lengths of
/// maximal no-detection stretches of length >= x) / total distance,
/// evaluated on the integer meter grid x = 0..total. detection_per_meter[i]
/// states whether a true detection occurred during meter i.
std::vector<double> localization_probability(
    const std::vector<bool>& detection_per_meter);

struct TimingRow {
  std::string stage;
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample standard deviation
};

/// Per-stage timing summary (segmentation, description, matching,
/// geometric verification, total). Requires at least 2 records.
std::vector<TimingRow> timing_report(const std::vector<EvalRecord>& records);

// Tab-separated artifact writers (headers documented in docs/formats.md).
void write_roc_tsv(const std::string& path, const RocResult& roc);
void write_localization_tsv(const std::string& path,
                            const std::vector<double>& p_of_x);
void write_timing_tsv(const std::string& path,
                      const std::vector<TimingRow>& rows);
void write_records_tsv(const std::string& path,
                       const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_records_tsv(const std::string& path);

}  // namespace segloop
