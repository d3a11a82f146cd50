// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "segloop/cloud_ops.hpp"
#include "segloop/descriptors.hpp"
#include "segloop/rng.hpp"

namespace segloop {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string(stage) + " stage: " + e.what());
  }
}

// Seed domains so the descriptor, verification and training streams never
// alias each other.
constexpr std::uint64_t kDescriptorDomain = 1;
constexpr std::uint64_t kVerifyDomain = 2;
constexpr std::uint64_t kTrainingDomain = 3;

struct SegmentedScan {
  std::vector<Segment> described;
  std::vector<Segment> kept;  // after filter_incomplete
  double seg_ms = 0.0;
  double desc_ms = 0.0;
};

/// Shared by online processing and training-pair generation: segmentation
/// and description run exactly once per scan, and every consumer works from
/// this result.
SegmentedScan segment_and_describe(const PipelineConfig& config,
                                   const PointCloud& scan, const Pose& pose,
                                   std::uint64_t scan_index) {
  SegmentedScan result;
  const Point3 center = from_eigen(pose.translation);

  const auto seg_start = Clock::now();
  std::vector<Segment> segments = run_stage("segmentation", [&] {
    PointCloud local =
        extract_cylindrical_neighborhood(scan, center, config.radius);
    local = voxel_grid_filter(local, config.voxel_leaf,
                              config.min_points_per_voxel);
    local = remove_ground(local, config.segmentation);
    return euclidean_segmenter(local, config.segmentation, scan_index);
  });
  result.seg_ms = ms_since(seg_start);

  const auto desc_start = Clock::now();
  run_stage("description", [&] {
    const std::uint64_t scan_seed =
        mix_seed(mix_seed(config.seed, kDescriptorDomain), scan_index);
    result.described.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
      result.described.push_back(
          describe(segments[i], config.esf_samples, mix_seed(scan_seed, i)));
    }
    result.kept = filter_incomplete(result.described, center, config.radius,
                                    config.boundary);
    return 0;
  });
  result.desc_ms = ms_since(desc_start);
  return result;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("PipelineConfig: radius must be > 0");
  }
  if (!(boundary > 0.0) || !(boundary < radius)) {
    throw std::invalid_argument("PipelineConfig: need 0 < boundary < radius");
  }
  if (!(voxel_leaf > 0.0)) {
    throw std::invalid_argument("PipelineConfig: voxel_leaf must be > 0");
  }
  if (min_points_per_voxel == 0) {
    throw std::invalid_argument(
        "PipelineConfig: min_points_per_voxel must be >= 1");
  }
  segmentation.validate();
  if (esf_samples == 0) {
    throw std::invalid_argument("PipelineConfig: esf_samples must be >= 1");
  }
  if (knn == 0) {
    throw std::invalid_argument("PipelineConfig: knn must be >= 1");
  }
  if (classifier == ClassifierMode::kL2 && !(l2_threshold > 0.0)) {
    throw std::invalid_argument("PipelineConfig: l2_threshold must be > 0");
  }
  verify.validate();
  if (!(scan_spacing > 0.0)) {
    throw std::invalid_argument("PipelineConfig: scan_spacing must be > 0");
  }
  if (exclusion_window < 0.0) {
    throw std::invalid_argument(
        "PipelineConfig: exclusion_window must be >= 0");
  }
  if (!(duplicate_distance > 0.0)) {
    throw std::invalid_argument(
        "PipelineConfig: duplicate_distance must be > 0");
  }
  if (!(detection_gate_translation > 0.0) ||
      !(detection_gate_rotation_deg > 0.0)) {
    throw std::invalid_argument("PipelineConfig: detection gates must be > 0");
  }
  if (!(correspondence_gate > 0.0)) {
    throw std::invalid_argument(
        "PipelineConfig: correspondence_gate must be > 0");
  }
  if (negative_ratio == 0) {
    throw std::invalid_argument("PipelineConfig: negative_ratio must be >= 1");
  }
  if (!(revisit_radius > 0.0)) {
    throw std::invalid_argument("PipelineConfig: revisit_radius must be > 0");
  }
}

double rotation_angle(const Eigen::Matrix3d& rotation) {
  const double c = std::clamp(0.5 * (rotation.trace() - 1.0), -1.0, 1.0);
  return std::acos(c);
}

Pipeline::Pipeline(const PipelineConfig& config, const ForestModel* model)
    : config_(config), model_(model) {
  config_.validate();
  if (config_.classifier == ClassifierMode::kForest && model_ == nullptr) {
    throw std::invalid_argument(
        "Pipeline: forest classifier requires a model");
  }
  TargetMapParams map_params;
  map_params.duplicate_distance = config_.duplicate_distance;
  map_params.boundary_b = config_.boundary;
  map_ = TargetMap(map_params);
}

void Pipeline::set_target_map(TargetMap map) {
  map_ = std::move(map);
  index_ = FeatureIndex::build(map_.all_segments());
  index_built_ = true;
  index_size_at_build_ = map_.size();
}

void Pipeline::rebuild_index_if_needed() {
  const std::size_t size = map_.size();
  if (index_built_ && index_size_at_build_ > 0) {
    const std::size_t diff = size > index_size_at_build_
                                 ? size - index_size_at_build_
                                 : index_size_at_build_ - size;
    if (diff * 10 <= index_size_at_build_) return;
  } else if (index_built_ && size == 0) {
    return;
  }
  index_ = FeatureIndex::build(map_.all_segments());
  index_built_ = true;
  index_size_at_build_ = size;
}

std::optional<std::uint64_t> Pipeline::exclusion_cutoff(
    double travel_m) const {
  const double cutoff_travel = travel_m - config_.exclusion_window;
  std::optional<std::uint64_t> cutoff;
  for (const auto& [index, travel] : scan_travel_) {
    if (travel <= cutoff_travel) {
      cutoff = index;
    } else {
      break;  // travels are non-decreasing
    }
  }
  return cutoff;
}

ScanOutput Pipeline::process_scan(const PointCloud& scan, const Pose& pose,
                                  std::uint64_t scan_index, double travel_m) {
  if (!pose.is_valid()) {
    throw std::invalid_argument("process_scan: invalid pose");
  }
  if (any_scan_ && travel_m + 1e-9 < last_travel_) {
    throw std::invalid_argument(
        "process_scan: travel must be non-decreasing");
  }
  if (!scan_travel_.empty() && scan_index <= scan_travel_.back().first) {
    throw std::invalid_argument(
        "process_scan: scan_index must be strictly increasing");
  }

  ScanOutput out;
  out.record.scan_index = scan_index;
  out.record.travel_m = travel_m;

  SegmentedScan segmented =
      segment_and_describe(config_, scan, pose, scan_index);
  out.record.seg_ms = segmented.seg_ms;
  out.record.desc_ms = segmented.desc_ms;
  out.record.seg_runs = 1;
  out.record.desc_runs = 1;
  out.segments_described = segmented.described.size();
  out.segments_kept = segmented.kept.size();

  const auto match_start = Clock::now();
  std::vector<CandidateMatch> candidates = run_stage("matching", [&] {
    std::optional<std::uint64_t> cutoff;
    if (config_.mode == PipelineMode::kLoopClosure) {
      map_.insert_segments(segmented.kept, scan_index);
      cutoff = exclusion_cutoff(travel_m);
      rebuild_index_if_needed();
    } else {
      if (!index_built_) {
        throw std::invalid_argument(
            "localization mode requires a target map (set_target_map)");
      }
      cutoff = std::numeric_limits<std::uint64_t>::max();
    }

    std::vector<CandidateMatch> found;
    if (cutoff && !index_.empty()) {
      Classifier classifier;
      if (config_.classifier == ClassifierMode::kL2) {
        classifier = L2Classifier{config_.l2_threshold};
      } else {
        classifier = ForestClassifier{model_, config_.w_threshold};
      }
      for (const Segment& src : segmented.kept) {
        const auto neighbors =
            retrieve_candidates(index_, src, config_.knn, *cutoff);
        auto matches = classify_candidates(index_, src, neighbors, classifier);
        found.insert(found.end(), matches.begin(), matches.end());
      }
    }
    return found;
  });
  out.record.match_ms = ms_since(match_start);

  const auto verify_start = Clock::now();
  out.closure = run_stage("geometric verification", [&] {
    VerifyParams vp = config_.verify;
    vp.seed = mix_seed(mix_seed(config_.seed, kVerifyDomain), scan_index);
    return ransac_verify(candidates, vp);
  });
  out.record.verify_ms = ms_since(verify_start);
  if (out.closure) {
    out.closure->source_scan_index = scan_index;
    out.record.closure = true;
    out.record.consensus = out.closure->consensus_size;
  }

  if (config_.mode == PipelineMode::kLoopClosure) {
    // Map maintenance: newest-wins duplicate removal runs after matching so
    // the still-indexed older views stay retrievable during this scan.
    map_.remove_duplicates();
    scan_travel_.emplace_back(scan_index, travel_m);
  }
  last_travel_ = travel_m;
  any_scan_ = true;
  return out;
}

SequenceResult run_sequence(Pipeline& pipeline, const Trajectory& trajectory,
                            const ScanProvider& scans,
                            const DetectionGate& gate) {
  const auto& entries = trajectory.entries();
  if (entries.empty()) {
    throw std::invalid_argument("run_sequence: empty trajectory");
  }
  const PipelineConfig& config = pipeline.config();

  DetectionGate effective_gate = gate;
  if (!effective_gate) {
    const double max_t = config.detection_gate_translation;
    const double max_r =
        config.detection_gate_rotation_deg * std::numbers::pi / 180.0;
    effective_gate = [max_t, max_r](const LoopClosure& closure,
                                    std::size_t) {
      return closure.transform.translation.norm() <= max_t &&
             rotation_angle(closure.transform.rotation) <= max_r;
    };
  }

  SequenceResult result;
  double travel = 0.0;
  double last_admitted_travel = 0.0;
  bool first = true;
  double last_detection_travel = 0.0;
  std::vector<double> detection_travels;

  for (std::size_t pos = 0; pos < entries.size(); ++pos) {
    const auto& [scan_index, pose] = entries[pos];
    if (pos > 0) {
      travel +=
          (pose.translation - entries[pos - 1].second.translation).norm();
    }
    if (!first && travel - last_admitted_travel + 1e-9 < config.scan_spacing) {
      continue;
    }
    first = false;
    last_admitted_travel = travel;

    const PointCloud scan = scans(pos);
    ScanOutput out = pipeline.process_scan(
        scan, pose, static_cast<std::uint64_t>(scan_index), travel);
    out.record.distance_since_detection = travel - last_detection_travel;
    if (out.closure) {
      const bool correct = effective_gate(*out.closure, pos);
      if (correct) {
        out.record.outcome = EvalRecord::Outcome::kTruePositive;
        ++result.true_positives;
        last_detection_travel = travel;
        detection_travels.push_back(travel);
      } else {
        out.record.outcome = EvalRecord::Outcome::kFalsePositive;
        ++result.false_positives;
      }
      result.closures.push_back(*out.closure);
    }
    result.records.push_back(out.record);
  }

  result.total_travel = travel;
  const auto meters = static_cast<std::size_t>(std::ceil(travel));
  result.detection_per_meter.assign(std::max<std::size_t>(meters, 1), false);
  for (const double at_travel : detection_travels) {
    auto meter = static_cast<std::size_t>(std::floor(at_travel));
    if (meter >= result.detection_per_meter.size()) {
      meter = result.detection_per_meter.size() - 1;
    }
    result.detection_per_meter[meter] = true;
  }
  return result;
}

TrainingSet generate_training_pairs(const PipelineConfig& config,
                                    const Trajectory& trajectory,
                                    const ScanProvider& scans) {
  config.validate();
  const auto& entries = trajectory.entries();
  if (entries.empty()) {
    throw std::invalid_argument("generate_training_pairs: empty trajectory");
  }

  // Admitted scans with cumulative travel.
  struct Admitted {
    std::size_t pos;
    std::uint64_t scan_index;
    Pose pose;
    double travel;
  };
  std::vector<Admitted> admitted;
  double travel = 0.0;
  double last_admitted_travel = 0.0;
  for (std::size_t pos = 0; pos < entries.size(); ++pos) {
    if (pos > 0) {
      travel +=
          (entries[pos].second.translation - entries[pos - 1].second.translation)
              .norm();
    }
    if (!admitted.empty() &&
        travel - last_admitted_travel + 1e-9 < config.scan_spacing) {
      continue;
    }
    last_admitted_travel = travel;
    admitted.push_back(Admitted{pos,
                                static_cast<std::uint64_t>(entries[pos].first),
                                entries[pos].second, travel});
  }

  // First admitted scan that re-enters previously visited space.
  std::size_t revisit_start = admitted.size();
  for (std::size_t j = 0; j < admitted.size() && revisit_start == admitted.size();
       ++j) {
    for (std::size_t i = 0; i < j; ++i) {
      if (admitted[j].travel - admitted[i].travel < config.exclusion_window) {
        break;
      }
      const double dx = admitted[j].pose.translation.x() -
                        admitted[i].pose.translation.x();
      const double dy = admitted[j].pose.translation.y() -
                        admitted[i].pose.translation.y();
      if (std::hypot(dx, dy) <= config.revisit_radius) {
        revisit_start = j;
        break;
      }
    }
  }
  if (revisit_start == admitted.size()) {
    throw std::runtime_error(
        "generate_training_pairs: sequence contains no revisit");
  }

  // First traversal populates the target map.
  TargetMapParams map_params;
  map_params.duplicate_distance = config.duplicate_distance;
  map_params.boundary_b = config.boundary;
  TargetMap map(map_params);
  for (std::size_t j = 0; j < revisit_start; ++j) {
    const Admitted& a = admitted[j];
    const SegmentedScan segmented =
        segment_and_describe(config, scans(a.pos), a.pose, a.scan_index);
    map.insert_segments(segmented.kept, a.scan_index);
    map.remove_duplicates();
  }
  if (map.empty()) {
    throw std::runtime_error(
        "generate_training_pairs: first traversal produced no segments");
  }
  const FeatureIndex index = FeatureIndex::build(map.all_segments());

  // Revisit scans produce labelled pairs.
  TrainingSet positives, negatives;
  const double gate_sq = config.correspondence_gate * config.correspondence_gate;
  for (std::size_t j = revisit_start; j < admitted.size(); ++j) {
    const Admitted& a = admitted[j];
    const SegmentedScan segmented =
        segment_and_describe(config, scans(a.pos), a.pose, a.scan_index);
    for (const Segment& src : segmented.kept) {
      const auto neighbors = retrieve_candidates(index, src, config.knn);
      for (const auto& nb : neighbors) {
        const FeatureIndex::Entry& tgt = index.entry(nb.entry_pos);
        const bool match =
            squared_norm(src.centroid, tgt.centroid) <= gate_sq;
        const PairFeature pair =
            build_pair_feature(*src.feature, tgt.feature);
        (match ? positives : negatives).add(pair, match);
      }
    }
  }
  if (positives.size() == 0) {
    throw std::runtime_error(
        "generate_training_pairs: no positive pairs found");
  }

  // Seeded negative subsampling to the configured ratio.
  const std::size_t keep =
      std::min(negatives.size(), positives.size() * config.negative_ratio);
  std::vector<std::uint32_t> order(negatives.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<std::uint32_t>(i);
  }
  SeededRng rng(mix_seed(config.seed, kTrainingDomain));
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.bounded(order.size() - i));
    std::swap(order[i], order[j]);
  }

  TrainingSet set;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    set.add(positives.features[i], true);
  }
  for (std::size_t i = 0; i < keep; ++i) {
    set.add(negatives.features[order[i]], false);
  }
  return set;
}

}  // namespace segloop
