// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "segloop/types.hpp"

namespace segloop {

/// Replaces each occupied voxel by the centroid of its member points.
/// Voxels holding fewer than `min_points_per_voxel` points are dropped.
/// Voxel keys are floor(coord / leaf) per axis, so a point exactly on a
/// boundary lands in the higher-index voxel. Output order follows the
/// first input point seen in each voxel.
PointCloud voxel_grid_filter(const PointCloud& cloud, double leaf,
                             std::size_t min_points_per_voxel = 1);

/// Keeps every k-th point for k = round(1 / keep_ratio). Stride-based so
/// runs are reproducible without seed plumbing.
PointCloud uniform_downsample(const PointCloud& cloud, double keep_ratio);

/// Points whose horizontal (x, y) distance to `center` is <= radius. The
/// cylinder axis is vertical; z is unconstrained.
PointCloud extract_cylindrical_neighborhood(const PointCloud& cloud,
                                            const Point3& center,
                                            double radius);

/// Applies p -> R*p + t to every point.
PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose);

/// Centroid (arithmetic mean). Throws on an empty cloud.
Point3 centroid_of(const PointCloud& cloud);

}  // namespace segloop
