// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <doctest.h>
#include <Eigen/Geometry>

#include "segloop/forest.hpp"
#include "segloop/pipeline.hpp"
#include "segloop/rng.hpp"
#include "segloop/synthetic.hpp"

namespace {

using namespace segloop;
using synthetic::ScanParams;
using synthetic::World;
using synthetic::WorldParams;

WorldParams small_world_params() {
  WorldParams params;
  params.object_count = 14;
  params.loop_side = 20.0;
  params.revisit_overlap = 10.0;
  params.placement_margin = 8.0;
  params.path_clearance = 2.5;
  return params;
}

ScanParams small_scan_params() {
  ScanParams scan;
  scan.radius = 15.0;
  scan.surface_spacing = 0.1;
  scan.noise_sigma = 0.02;
  return scan;
}

/// Pipeline settings scaled down to the small test world: a 15 m sensor
/// radius, lighter descriptors and a loose L2 gate (geometric verification
/// does the real filtering).
PipelineConfig quick_config() {
  PipelineConfig config;
  config.radius = 15.0;
  config.boundary = 2.0;
  config.segmentation.min_segment_points = 50;
  config.segmentation.ground_removal = GroundRemoval::kNone;
  config.esf_samples = 1200;
  config.knn = 30;
  config.classifier = ClassifierMode::kL2;
  config.l2_threshold = 0.08;
  config.scan_spacing = 2.0;
  config.exclusion_window = 50.0;
  config.seed = 5;
  return config;
}

PointCloud sample_cloud(const World& world, const Pose& pose,
                        std::uint64_t seed) {
  return world
      .sample_scan(Point3{pose.translation.x(), pose.translation.y(),
                          pose.translation.z()},
                   small_scan_params(), seed)
      .cloud;
}

/// Loop sequence with simulated odometry drift: the believed poses (and the
/// clouds expressed in the believed world frame) drift away from ground
/// truth by a translation that ramps in over travels [20, 60] and then stays
/// constant. Revisited objects therefore re-enter the map offset from their
/// first-pass views -- beyond duplicate_distance, exactly like a real drifting
/// platform -- and a correct loop closure must recover `-drift`.
struct DriftedRun {
  World world;
  Trajectory true_traj;
  Trajectory drifted_traj;
  std::vector<Eigen::Vector3d> drift_of_pos;
  std::uint64_t scan_salt = 0;

  static DriftedRun make(std::uint64_t world_seed,
                         const Eigen::Vector3d& drift_max) {
    DriftedRun run{World::generate(small_world_params(), world_seed),
                   Trajectory{},
                   Trajectory{},
                   {},
                   world_seed ^ 0xabcull};
    run.true_traj = run.world.trajectory(1.0);
    double travel = 0.0;
    const auto& entries = run.true_traj.entries();
    for (std::size_t pos = 0; pos < entries.size(); ++pos) {
      if (pos > 0) {
        travel += (entries[pos].second.translation -
                   entries[pos - 1].second.translation)
                      .norm();
      }
      const double ramp = std::clamp((travel - 20.0) / 40.0, 0.0, 1.0);
      run.drift_of_pos.push_back(ramp * drift_max);
      Pose believed = entries[pos].second;
      believed.translation += run.drift_of_pos.back();
      run.drifted_traj.append(entries[pos].first, believed);
    }
    return run;
  }

  ScanProvider provider() const {
    return [this](std::size_t pos) {
      const Pose& true_pose = true_traj.entries()[pos].second;
      PointCloud cloud =
          sample_cloud(world, true_pose, mix_seed(scan_salt, pos));
      const Eigen::Vector3d& d = drift_of_pos[pos];
      for (Point3& p : cloud.points) {
        p.x += d.x();
        p.y += d.y();
        p.z += d.z();
      }
      return cloud;
    };
  }

  /// True detection: the closure recovers the drift correction at that pose.
  DetectionGate gate(double max_translation = 0.5,
                     double max_rotation_deg = 5.0) const {
    return [this, max_translation, max_rotation_deg](const LoopClosure& c,
                                                     std::size_t pos) {
      return (c.transform.translation + drift_of_pos[pos]).norm() <=
                 max_translation &&
             rotation_angle(c.transform.rotation) <=
                 max_rotation_deg * std::numbers::pi / 180.0;
    };
  }
};

Trajectory prefix_trajectory(const Trajectory& traj, std::size_t count) {
  Trajectory out;
  const auto& entries = traj.entries();
  for (std::size_t i = 0; i < std::min(count, entries.size()); ++i) {
    out.append(entries[i].first, entries[i].second);
  }
  return out;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config validation rejects each bad field") {
    CHECK_NOTHROW(PipelineConfig{}.validate());
    CHECK_NOTHROW(quick_config().validate());

    auto expect_invalid = [](PipelineConfig config) {
      CHECK_THROWS_AS(config.validate(), std::invalid_argument);
    };
    PipelineConfig c = quick_config();
    c.radius = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.boundary = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.boundary = c.radius;
    expect_invalid(c);
    c = quick_config();
    c.voxel_leaf = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.min_points_per_voxel = 0;
    expect_invalid(c);
    c = quick_config();
    c.segmentation.min_segment_points = 0;
    expect_invalid(c);
    c = quick_config();
    c.esf_samples = 0;
    expect_invalid(c);
    c = quick_config();
    c.knn = 0;
    expect_invalid(c);
    c = quick_config();
    c.l2_threshold = 0.0;  // classifier is kL2 in quick_config
    expect_invalid(c);
    c = quick_config();
    c.verify.min_cluster_size = 2;
    expect_invalid(c);
    c = quick_config();
    c.scan_spacing = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.exclusion_window = -1.0;
    expect_invalid(c);
    c = quick_config();
    c.duplicate_distance = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.detection_gate_translation = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.detection_gate_rotation_deg = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.correspondence_gate = 0.0;
    expect_invalid(c);
    c = quick_config();
    c.negative_ratio = 0;
    expect_invalid(c);
    c = quick_config();
    c.revisit_radius = 0.0;
    expect_invalid(c);

    // The forest classifier needs a model at construction time.
    PipelineConfig forest_config = quick_config();
    forest_config.classifier = ClassifierMode::kForest;
    CHECK_THROWS_AS(Pipeline(forest_config, nullptr), std::invalid_argument);
    CHECK_NOTHROW(Pipeline{quick_config()});
  }

  TEST_CASE("process_scan rejects bad poses and out-of-order input") {
    const World world = World::generate(small_world_params(), 55);
    const Trajectory traj = world.trajectory(1.0);
    const Pose pose = traj.at(0);
    const PointCloud cloud = sample_cloud(world, pose, 1);

    Pipeline pipeline(quick_config());

    Pose skewed = pose;
    skewed.rotation *= 2.0;
    CHECK_THROWS_AS(pipeline.process_scan(cloud, skewed, 0, 0.0),
                    std::invalid_argument);

    CHECK_NOTHROW(pipeline.process_scan(cloud, pose, 5, 10.0));
    // Scan indices must increase strictly.
    CHECK_THROWS_AS(pipeline.process_scan(cloud, pose, 5, 11.0),
                    std::invalid_argument);
    // Travel must not decrease.
    CHECK_THROWS_AS(pipeline.process_scan(cloud, pose, 6, 9.0),
                    std::invalid_argument);

    // Localization mode without an installed map fails in the matching
    // stage, wrapped with the stage name.
    PipelineConfig loc = quick_config();
    loc.mode = PipelineMode::kLocalization;
    Pipeline localizer(loc);
    CHECK_THROWS_WITH_AS(localizer.process_scan(cloud, pose, 0, 0.0),
                         doctest::Contains("matching stage"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(localizer.process_scan(cloud, pose, 0, 0.0),
                         doctest::Contains("requires a target map"),
                         std::runtime_error);
  }

  TEST_CASE("cold start fills the map without producing a closure") {
    const World world = World::generate(small_world_params(), 55);
    const Pose pose = world.trajectory(1.0).at(0);
    const PointCloud cloud = sample_cloud(world, pose, 1);

    Pipeline pipeline(quick_config());
    const ScanOutput out = pipeline.process_scan(cloud, pose, 0, 0.0);

    CHECK_FALSE(out.closure.has_value());
    CHECK(out.record.scan_index == 0);
    CHECK(out.record.travel_m == 0.0);
    CHECK_FALSE(out.record.closure);
    CHECK(out.record.consensus == 0);
    CHECK(out.record.seg_runs == 1);
    CHECK(out.record.desc_runs == 1);
    CHECK(out.record.seg_ms > 0.0);
    CHECK(out.record.desc_ms > 0.0);
    REQUIRE(out.segments_described >= 3);
    CHECK(out.segments_kept <= out.segments_described);
    REQUIRE(out.segments_kept >= 1);

    // Every kept segment landed in the map with this scan's index.
    CHECK(pipeline.target_map().size() == out.segments_kept);
    for (const auto& [id, seg] : pipeline.target_map().segments()) {
      CHECK(seg.creation_index == 0);
      CHECK(seg.feature.has_value());
    }
  }

  TEST_CASE("revisiting the same spot updates the map instead of growing it") {
    const World world = World::generate(small_world_params(), 55);
    const Pose pose = world.trajectory(1.0).at(0);

    Pipeline pipeline(quick_config());
    const ScanOutput first =
        pipeline.process_scan(sample_cloud(world, pose, 1), pose, 0, 0.0);
    const std::size_t size_after_first = pipeline.target_map().size();
    REQUIRE(size_after_first == first.segments_kept);

    // Same viewpoint, fresh sampling: the new views of the same objects land
    // within duplicate_distance, so newest-wins removal keeps the map size.
    const ScanOutput second =
        pipeline.process_scan(sample_cloud(world, pose, 2), pose, 1, 2.0);
    CHECK(pipeline.target_map().size() == second.segments_kept);
    for (const auto& [id, seg] : pipeline.target_map().segments()) {
      CHECK(seg.creation_index == 1);  // all survivors are the newest views
    }
  }

  TEST_CASE("drifted loop run closes the loop honestly") {
    const DriftedRun run = DriftedRun::make(77, Eigen::Vector3d(1.0, -1.0, 0.0));
    Pipeline pipeline(quick_config());
    const SequenceResult res =
        run_sequence(pipeline, run.drifted_traj, run.provider(), run.gate());

    // At least one true closure, no false ones.
    CHECK(res.true_positives >= 1);
    CHECK(res.false_positives == 0);
    REQUIRE(res.closures.size() == res.true_positives);

    // Single-segmentation invariant: each admitted scan ran segmentation and
    // description exactly once.
    for (const EvalRecord& r : res.records) {
      CHECK(r.seg_runs == 1);
      CHECK(r.desc_runs == 1);
    }

    // Admission arithmetic: first scan at travel 0, then >= scan_spacing
    // between consecutive admissions, scan indices strictly increasing.
    REQUIRE(!res.records.empty());
    CHECK(res.records.front().travel_m == 0.0);
    for (std::size_t i = 1; i < res.records.size(); ++i) {
      CHECK(res.records[i].travel_m - res.records[i - 1].travel_m >=
            2.0 - 1e-9);
      CHECK(res.records[i].scan_index > res.records[i - 1].scan_index);
    }

    // Closure transforms recover the planted drift.
    std::unordered_map<std::uint64_t, double> travel_of_scan;
    for (const EvalRecord& r : res.records) {
      travel_of_scan[r.scan_index] = r.travel_m;
    }
    for (const LoopClosure& c : res.closures) {
      CHECK(c.consensus_size >= 4);
      CHECK(c.inliers.size() == c.consensus_size);
      const double closure_travel = travel_of_scan.at(c.source_scan_index);

      // No self-matching: every inlier's target segment was created at
      // least exclusion_window meters of travel before the closure scan.
      for (const CandidateMatch& inlier : c.inliers) {
        const auto& segments = pipeline.target_map().segments();
        const auto it = segments.find(inlier.target_id);
        REQUIRE(it != segments.end());
        const double created_travel =
            travel_of_scan.at(it->second.creation_index);
        CHECK(closure_travel - created_travel >=
              pipeline.config().exclusion_window - 1e-6);
      }
    }

    // Detection bookkeeping: true positives mark their meter; the
    // per-record no-detection distance resets after each true positive.
    REQUIRE(res.detection_per_meter.size() ==
            static_cast<std::size_t>(std::ceil(res.total_travel)));
    double last_detection_travel = 0.0;
    for (const EvalRecord& r : res.records) {
      CHECK(r.distance_since_detection ==
            doctest::Approx(r.travel_m - last_detection_travel)
                .epsilon(1e-12));
      if (r.outcome == EvalRecord::Outcome::kTruePositive) {
        last_detection_travel = r.travel_m;
        const auto meter = static_cast<std::size_t>(std::floor(r.travel_m));
        CHECK(res.detection_per_meter[std::min(
            meter, res.detection_per_meter.size() - 1)]);
      }
    }
  }

  TEST_CASE("no closure fires before the exclusion window opens") {
    // Only the first 26 m of the loop: total travel stays below the 50 m
    // exclusion window, so no target is ever eligible.
    const World world = World::generate(small_world_params(), 101);
    const Trajectory full = world.trajectory(1.0);
    const Trajectory prefix = prefix_trajectory(full, 26);

    ScanProvider scans = [&](std::size_t pos) {
      return sample_cloud(world, full.entries()[pos].second,
                          mix_seed(0x5eed, pos));
    };
    Pipeline pipeline(quick_config());
    const SequenceResult res = run_sequence(pipeline, prefix, scans);

    CHECK(res.closures.empty());
    CHECK(res.true_positives == 0);
    CHECK(res.false_positives == 0);
    CHECK(res.records.size() == 13);  // 26 m at 2 m spacing
    CHECK(pipeline.target_map().size() > 0);
    for (bool detected : res.detection_per_meter) CHECK_FALSE(detected);
  }

  TEST_CASE("training pairs: ground-truth loop yields labelled, capped set") {
    const World world = World::generate(small_world_params(), 911);
    const Trajectory traj = world.trajectory(1.0);
    ScanProvider scans = [&](std::size_t pos) {
      return sample_cloud(world, traj.entries()[pos].second,
                          mix_seed(0xfeed911, pos));
    };

    const PipelineConfig config = quick_config();
    const TrainingSet set = generate_training_pairs(config, traj, scans);

    std::size_t positives = 0;
    for (bool label : set.labels) positives += label ? 1 : 0;
    const std::size_t negatives = set.size() - positives;
    REQUIRE(positives >= 10);
    CHECK(negatives >= positives);  // revisit retrieval is negative-heavy
    CHECK(negatives <= positives * config.negative_ratio);
    REQUIRE(set.features.size() == set.labels.size());
    CHECK(set.features.front().size() == kPairFeatureDim);

    // Deterministic for fixed config and scans.
    const TrainingSet again = generate_training_pairs(config, traj, scans);
    REQUIRE(again.size() == set.size());
    CHECK(again.labels == set.labels);
    for (std::size_t i = 0; i < set.size(); ++i) {
      CHECK(again.features[i] == set.features[i]);
    }

    // A tighter ratio caps the negatives harder.
    PipelineConfig tight = config;
    tight.negative_ratio = 1;
    const TrainingSet capped = generate_training_pairs(tight, traj, scans);
    std::size_t capped_pos = 0;
    for (bool label : capped.labels) capped_pos += label ? 1 : 0;
    CHECK(capped_pos == positives);
    CHECK(capped.size() - capped_pos <= capped_pos);

    // A sequence that never re-enters visited space has no pairs to offer.
    const Trajectory prefix = prefix_trajectory(traj, 26);
    CHECK_THROWS_WITH_AS(generate_training_pairs(config, prefix, scans),
                         doctest::Contains("no revisit"), std::runtime_error);
  }

  TEST_CASE("forest trained on generated pairs closes loops") {
    // Train on one world, evaluate on a different drifted world: the
    // classifier must carry over, not memorize.
    const World train_world = World::generate(small_world_params(), 911);
    const Trajectory train_traj = train_world.trajectory(1.0);
    ScanProvider train_scans = [&](std::size_t pos) {
      return sample_cloud(train_world, train_traj.entries()[pos].second,
                          mix_seed(0xfeed911, pos));
    };
    const TrainingSet set =
        generate_training_pairs(quick_config(), train_traj, train_scans);
    ForestParams forest_params;
    forest_params.n_trees = 15;
    const ForestModel model = train(set, forest_params, 99);

    const DriftedRun run = DriftedRun::make(77, Eigen::Vector3d(1.0, -1.0, 0.0));
    PipelineConfig config = quick_config();
    config.classifier = ClassifierMode::kForest;
    config.w_threshold = 0.5;
    Pipeline pipeline(config, &model);
    const SequenceResult res =
        run_sequence(pipeline, run.drifted_traj, run.provider(), run.gate());

    CHECK(res.true_positives >= 1);
    CHECK(res.false_positives == 0);
    for (const EvalRecord& r : res.records) {
      CHECK(r.seg_runs == 1);
      CHECK(r.desc_runs == 1);
    }
  }

  TEST_CASE("localization mode matches a fixed map and recovers an offset") {
    // Build a target map by driving the loop once with ground-truth poses.
    const World world = World::generate(small_world_params(), 101);
    const Trajectory traj = world.trajectory(1.0);
    ScanProvider scans = [&](std::size_t pos) {
      return sample_cloud(world, traj.entries()[pos].second,
                          mix_seed(0x1ee7, pos));
    };
    Pipeline builder(quick_config());
    run_sequence(builder, traj, scans);
    const TargetMap map = builder.target_map();
    REQUIRE(map.size() >= 8);

    PipelineConfig loc = quick_config();
    loc.mode = PipelineMode::kLocalization;
    Pipeline localizer(loc);
    localizer.set_target_map(map);

    // Feed a scan whose believed pose (and world-frame cloud) are offset
    // from ground truth; the closure must recover the correction.
    const Eigen::Vector3d offset(0.6, -0.4, 0.0);
    const Pose true_pose = traj.at(40);  // a spot with >= 4 mapped objects in view
    PointCloud cloud = sample_cloud(world, true_pose, 0x10c);
    for (Point3& p : cloud.points) {
      p.x += offset.x();
      p.y += offset.y();
      p.z += offset.z();
    }
    Pose believed = true_pose;
    believed.translation += offset;

    const ScanOutput out = localizer.process_scan(cloud, believed, 0, 0.0);
    REQUIRE(out.closure.has_value());
    CHECK(out.closure->source_scan_index == 0);
    CHECK(out.closure->consensus_size >= 4);
    CHECK((out.closure->transform.translation + offset).norm() <= 0.2);
    CHECK(rotation_angle(out.closure->transform.rotation) <=
          1.0 * std::numbers::pi / 180.0);

    // The fixed map is never modified in localization mode.
    CHECK(localizer.target_map().size() == map.size());

    // An empty fixed map is usable and simply never matches.
    Pipeline empty_localizer(loc);
    empty_localizer.set_target_map(TargetMap{});
    const ScanOutput none = empty_localizer.process_scan(cloud, believed, 0, 0.0);
    CHECK_FALSE(none.closure.has_value());
  }

  TEST_CASE("rotation_angle measures the geodesic rotation distance") {
    CHECK(rotation_angle(Eigen::Matrix3d::Identity()) == 0.0);
    const Eigen::Matrix3d yaw90 =
        Eigen::AngleAxisd(0.5 * std::numbers::pi, Eigen::Vector3d::UnitZ())
            .toRotationMatrix();
    CHECK(rotation_angle(yaw90) ==
          doctest::Approx(0.5 * std::numbers::pi).epsilon(1e-12));
    const Eigen::Matrix3d tilt =
        Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0,
                          Eigen::Vector3d(1.0, 2.0, -1.0).normalized())
            .toRotationMatrix();
    CHECK(rotation_angle(tilt) ==
          doctest::Approx(10.0 * std::numbers::pi / 180.0).epsilon(1e-12));
  }
}
