// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace segloop {

namespace {

constexpr double kOperatingFpr = 0.2;

void require_stream(const std::ofstream& out, const std::string& path) {
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
}

std::pair<double, double> mean_and_sample_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

const char* outcome_name(EvalRecord::Outcome outcome) {
  switch (outcome) {
    case EvalRecord::Outcome::kNone:
      return "none";
    case EvalRecord::Outcome::kTruePositive:
      return "true_positive";
    case EvalRecord::Outcome::kFalsePositive:
      return "false_positive";
  }
  return "none";
}

EvalRecord::Outcome outcome_from_name(const std::string& name) {
  if (name == "none") return EvalRecord::Outcome::kNone;
  if (name == "true_positive") return EvalRecord::Outcome::kTruePositive;
  if (name == "false_positive") return EvalRecord::Outcome::kFalsePositive;
  throw std::runtime_error("unknown outcome value: " + name);
}

}  // namespace

RocResult roc_curve(const std::vector<std::pair<double, bool>>& scores) {
  std::size_t positives = 0, negatives = 0;
  for (const auto& [w, label] : scores) (label ? positives : negatives) += 1;
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("roc_curve: need both labels");
  }

  std::vector<std::pair<double, bool>> sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocResult roc;
  roc.points.push_back(
      RocPoint{0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == threshold) {
      (sorted[i].second ? tp : fp) += 1;
      ++i;
    }
    roc.points.push_back(
        RocPoint{static_cast<double>(fp) / static_cast<double>(negatives),
                 static_cast<double>(tp) / static_cast<double>(positives),
                 threshold});
  }

  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const RocPoint& a = roc.points[i - 1];
    const RocPoint& b = roc.points[i];
    roc.auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }

  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < roc.points.size(); ++i) {
    const double gap = std::abs(roc.points[i].fpr - kOperatingFpr);
    if (gap < best_gap) {
      best_gap = gap;
      roc.operating_index = i;
    }
  }
  return roc;
}

std::vector<double> localization_probability(
    const std::vector<bool>& detection_per_meter) {
  const std::size_t total = detection_per_meter.size();
  if (total == 0) {
    throw std::invalid_argument(
        "localization_probability: total distance must be > 0");
  }

  // Maximal runs of meters without a detection.
  std::vector<std::size_t> stretches;
  std::size_t run = 0;
  for (bool detected : detection_per_meter) {
    if (detected) {
      if (run > 0) stretches.push_back(run);
      run = 0;
    } else {
      ++run;
    }
  }
  if (run > 0) stretches.push_back(run);

  std::vector<double> p(total + 1, 0.0);
  for (std::size_t x = 0; x <= total; ++x) {
    std::size_t numer = 0;
    for (std::size_t s : stretches) {
      if (s >= x) numer += s;
    }
    p[x] = static_cast<double>(numer) / static_cast<double>(total);
  }
  return p;
}

std::vector<TimingRow> timing_report(const std::vector<EvalRecord>& records) {
  if (records.size() < 2) {
    throw std::invalid_argument("timing_report: need at least 2 records");
  }
  const struct {
    const char* name;
    double (*get)(const EvalRecord&);
  } stages[] = {
      {"segmentation", [](const EvalRecord& r) { return r.seg_ms; }},
      {"description", [](const EvalRecord& r) { return r.desc_ms; }},
      {"matching", [](const EvalRecord& r) { return r.match_ms; }},
      {"geometric_verification",
       [](const EvalRecord& r) { return r.verify_ms; }},
      {"total", [](const EvalRecord& r) { return r.total_ms(); }},
  };
  std::vector<TimingRow> rows;
  std::vector<double> xs(records.size());
  for (const auto& stage : stages) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      xs[i] = stage.get(records[i]);
    }
    const auto [mean, sd] = mean_and_sample_std(xs);
    rows.push_back(TimingRow{stage.name, mean, sd});
  }
  return rows;
}

void write_roc_tsv(const std::string& path, const RocResult& roc) {
  std::ofstream out(path, std::ios::trunc);
  require_stream(out, path);
  out << "fpr\ttpr\tthreshold\toperating_point\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < roc.points.size(); ++i) {
    const RocPoint& p = roc.points[i];
    out << p.fpr << '\t' << p.tpr << '\t' << p.threshold << '\t'
        << (i == roc.operating_index ? 1 : 0) << '\n';
  }
  out << "# auc\t" << roc.auc << '\n';
  require_stream(out, path);
}

void write_localization_tsv(const std::string& path,
                            const std::vector<double>& p_of_x) {
  std::ofstream out(path, std::ios::trunc);
  require_stream(out, path);
  out << "x_meters\tprobability\n";
  out << std::setprecision(17);
  for (std::size_t x = 0; x < p_of_x.size(); ++x) {
    out << x << '\t' << p_of_x[x] << '\n';
  }
  require_stream(out, path);
}

void write_timing_tsv(const std::string& path,
                      const std::vector<TimingRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  require_stream(out, path);
  out << "stage\tmean_ms\tstd_ms\n";
  out << std::setprecision(17);
  for (const TimingRow& row : rows) {
    out << row.stage << '\t' << row.mean_ms << '\t' << row.std_ms << '\n';
  }
  require_stream(out, path);
}

void write_records_tsv(const std::string& path,
                       const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  require_stream(out, path);
  out << "scan_index\ttravel_m\tdistance_since_detection\tclosure\toutcome\t"
         "consensus\tseg_ms\tdesc_ms\tmatch_ms\tverify_ms\tseg_runs\t"
         "desc_runs\n";
  out << std::setprecision(17);
  for (const EvalRecord& r : records) {
    out << r.scan_index << '\t' << r.travel_m << '\t'
        << r.distance_since_detection << '\t' << (r.closure ? 1 : 0) << '\t'
        << outcome_name(r.outcome) << '\t' << r.consensus << '\t' << r.seg_ms
        << '\t' << r.desc_ms << '\t' << r.match_ms << '\t' << r.verify_ms
        << '\t' << r.seg_runs << '\t' << r.desc_runs << '\n';
  }
  require_stream(out, path);
}

std::vector<EvalRecord> load_records_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty records file " + path);
  }
  std::vector<EvalRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    EvalRecord r;
    int closure = 0;
    std::string outcome;
    if (!(row >> r.scan_index >> r.travel_m >> r.distance_since_detection >>
          closure >> outcome >> r.consensus >> r.seg_ms >> r.desc_ms >>
          r.match_ms >> r.verify_ms >> r.seg_runs >> r.desc_runs)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed record row");
    }
    r.closure = closure != 0;
    r.outcome = outcome_from_name(outcome);
    records.push_back(r);
  }
  return records;
}

}  // namespace segloop
