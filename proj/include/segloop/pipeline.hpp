// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "segloop/forest.hpp"
#include "segloop/geomverify.hpp"
#include "segloop/matching.hpp"
#include "segloop/metrics.hpp"
#include "segloop/segmentation.hpp"
#include "segloop/target_map.hpp"
#include "segloop/types.hpp"

namespace segloop {

enum class PipelineMode { kLoopClosure, kLocalization };
enum class ClassifierMode { kL2, kForest };

struct PipelineConfig {
  double radius = 60.0;    // local cloud radius R
  double boundary = 3.0;   // incomplete-segment boundary thickness b
  double voxel_leaf = 0.1;
  std::size_t min_points_per_voxel = 1;
  SegmentationParams segmentation;
  std::size_t esf_samples = 20000;
  std::size_t knn = 200;
  ClassifierMode classifier = ClassifierMode::kForest;
  double l2_threshold = 0.0024;
  double w_threshold = 0.5;
  VerifyParams verify;
  double scan_spacing = 1.0;        // admission gate [m]
  double exclusion_window = 50.0;   // matching blackout behind the robot [m]
  double duplicate_distance = 1.0;
  PipelineMode mode = PipelineMode::kLoopClosure;
  std::uint64_t seed = 0;

  // Evaluation: a closure is a true detection when its transform error
  // against ground truth stays inside these gates.
  double detection_gate_translation = 2.0;
  double detection_gate_rotation_deg = 5.0;

  // Training-pair generation.
  double correspondence_gate = 1.0;
  std::size_t negative_ratio = 50;
  double revisit_radius = 30.0;

  void validate() const;
};

struct ScanOutput {
  std::optional<LoopClosure> closure;
  EvalRecord record;
  std::size_t segments_described = 0;
  std::size_t segments_kept = 0;  // after the incomplete-segment filter
};

/// Full place-recognition pipeline. Loop-closure mode builds the target map
/// online; localization mode matches against a fixed map provided through
/// set_target_map. Scans must arrive in trajectory order with a
/// non-decreasing cumulative travel distance.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& config,
                    const ForestModel* model = nullptr);

  const PipelineConfig& config() const { return config_; }
  const TargetMap& target_map() const { return map_; }

  /// Installs the localization target map and builds its index once.
  void set_target_map(TargetMap map);

  ScanOutput process_scan(const PointCloud& scan, const Pose& pose,
                          std::uint64_t scan_index, double travel_m);

 private:
  void rebuild_index_if_needed();
  // Largest creation index still eligible at the given travel, or nullopt
  // when the whole map lies inside the exclusion window.
  std::optional<std::uint64_t> exclusion_cutoff(double travel_m) const;

  PipelineConfig config_;
  const ForestModel* model_ = nullptr;
  TargetMap map_;
  FeatureIndex index_;
  bool index_built_ = false;
  std::size_t index_size_at_build_ = 0;
  double last_travel_ = 0.0;
  bool any_scan_ = false;
  std::vector<std::pair<std::uint64_t, double>> scan_travel_;
};

using ScanProvider = std::function<PointCloud(std::size_t)>;
/// Returns true when the closure counts as a correct detection.
using DetectionGate =
    std::function<bool(const LoopClosure&, std::size_t trajectory_pos)>;

struct SequenceResult {
  std::vector<EvalRecord> records;  // one per admitted scan
  std::vector<LoopClosure> closures;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::vector<bool> detection_per_meter;
  double total_travel = 0.0;
};

/// Feeds a pose-ordered sequence through the pipeline. Travel is the path
/// integral of the trajectory positions; a scan is admitted once at least
/// scan_spacing meters have accumulated since the last admitted scan. The
/// default gate compares each closure transform against identity using the
/// configured detection gates (ground-truth-aligned scans).
SequenceResult run_sequence(Pipeline& pipeline, const Trajectory& trajectory,
                            const ScanProvider& scans,
                            const DetectionGate& gate = {});

/// Builds a forest training set from a sequence containing a revisit: the
/// first traversal populates a target map; once the trajectory re-enters
/// previously visited space (after exclusion_window meters of travel,
/// within revisit_radius), each source segment retrieves knn neighbors and
/// pairs are labelled by the correspondence gate on ground-truth centroids.
/// Negatives are subsampled (seeded) to negative_ratio per positive.
/// Throws when the sequence has no revisit or yields no positives.
TrainingSet generate_training_pairs(const PipelineConfig& config,
                                    const Trajectory& trajectory,
                                    const ScanProvider& scans);

/// Rotation angle (radians) of a rotation matrix; helper for gates.
double rotation_angle(const Eigen::Matrix3d& rotation);

}  // namespace segloop
