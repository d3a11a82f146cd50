// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segloop/segment.hpp"
#include "segloop/types.hpp"

namespace segloop {

enum class GroundRemoval {
  kMinHeight,
  kVoxelStatistics,
  kNone,
};

GroundRemoval ground_removal_from_string(const std::string& name);
std::string to_string(GroundRemoval strategy);

struct SegmentationParams {
  double cluster_distance = 0.2;
  std::size_t min_segment_points = 100;
  std::size_t max_segment_points = 15000;
  GroundRemoval ground_removal = GroundRemoval::kMinHeight;
  double ground_height = 0.0;

  void validate() const;
};

/// Strips ground points. Min-height drops every point with z <=
/// ground_height. Voxel-statistics builds vertical columns on a 0.5 m
/// horizontal grid, flags columns whose z-variance is below 0.01 m^2 and
/// whose mean z sits within 0.3 m of the column minimum, merges flagged
/// columns by 4-connectivity, and removes the members of merged regions
/// spanning at least 8 columns (small flat patches such as object tops
/// survive).
PointCloud remove_ground(const PointCloud& cloud,
                         const SegmentationParams& params);

/// Connected components under dist(p, q) <= cluster_distance ("Cluster-All").
/// Components outside [min_segment_points, max_segment_points] are dropped.
/// Segment ids count up from 0 in ascending order of each component's first
/// point index, so output is deterministic for a fixed input order.
std::vector<Segment> euclidean_segmenter(const PointCloud& cloud,
                                         const SegmentationParams& params,
                                         std::uint64_t creation_index = 0);

/// Smoothness-constrained region growing. Normals come from a local plane
/// fit over neighbors within normal_radius; points with fewer than 3
/// neighborhood points get no normal and stay unsegmented. Seeds are
/// processed in ascending curvature (lambda3 / trace) order; a neighbor
/// joins a region when its normal deviates from the expanding point's
/// normal by less than smoothness_threshold, and becomes a new seed when
/// its curvature is below curvature_threshold. Size bounds as above.
std::vector<Segment> region_growing_segmenter(const PointCloud& cloud,
                                              double normal_radius,
                                              double smoothness_threshold,
                                              double curvature_threshold,
                                              const SegmentationParams& params,
                                              std::uint64_t creation_index = 0);

}  // namespace segloop
