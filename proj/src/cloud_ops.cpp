// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/cloud_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "segloop/simd/kernels.hpp"

namespace segloop {

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    // 64-bit mix of the three coordinates; collisions only cost speed.
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

std::int64_t floor_index(double v, double leaf) {
  return static_cast<std::int64_t>(std::floor(v / leaf));
}

}  // namespace

PointCloud voxel_grid_filter(const PointCloud& cloud, double leaf,
                             std::size_t min_points_per_voxel) {
  if (!(leaf > 0.0)) {
    throw std::invalid_argument("voxel_grid_filter: leaf must be > 0");
  }
  if (min_points_per_voxel == 0) {
    throw std::invalid_argument(
        "voxel_grid_filter: min_points_per_voxel must be >= 1");
  }

  struct Accum {
    double sx = 0.0, sy = 0.0, sz = 0.0;
    std::size_t count = 0;
    std::size_t order = 0;  // index of first point seen in this voxel
  };

  std::unordered_map<VoxelKey, Accum, VoxelKeyHash> cells;
  cells.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    VoxelKey key{floor_index(p.x, leaf), floor_index(p.y, leaf),
                 floor_index(p.z, leaf)};
    auto [it, inserted] = cells.try_emplace(key);
    Accum& a = it->second;
    if (inserted) a.order = i;
    a.sx += p.x;
    a.sy += p.y;
    a.sz += p.z;
    ++a.count;
  }

  std::vector<const Accum*> kept;
  kept.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    if (acc.count >= min_points_per_voxel) kept.push_back(&acc);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Accum* a, const Accum* b) { return a->order < b->order; });

  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(kept.size());
  for (const Accum* a : kept) {
    const double inv = 1.0 / static_cast<double>(a->count);
    out.points.push_back(Point3{a->sx * inv, a->sy * inv, a->sz * inv});
  }
  return out;
}

PointCloud uniform_downsample(const PointCloud& cloud, double keep_ratio) {
  if (!(keep_ratio > 0.0) || keep_ratio > 1.0) {
    throw std::invalid_argument(
        "uniform_downsample: keep_ratio must be in (0, 1]");
  }
  const auto stride =
      static_cast<std::size_t>(std::llround(1.0 / keep_ratio));
  PointCloud out;
  out.frame_id = cloud.frame_id;
  if (stride <= 1) {
    out.points = cloud.points;
    return out;
  }
  out.points.reserve(cloud.size() / stride + 1);
  for (std::size_t i = 0; i < cloud.size(); i += stride) {
    out.points.push_back(cloud.points[i]);
  }
  return out;
}

PointCloud extract_cylindrical_neighborhood(const PointCloud& cloud,
                                            const Point3& center,
                                            double radius) {
  if (!(radius >= 0.0)) {
    throw std::invalid_argument(
        "extract_cylindrical_neighborhood: radius must be >= 0");
  }
  const double r2 = radius * radius;
  std::vector<double> d2(cloud.size());
  if (!cloud.empty()) {
    simd::horizontal_sq_dists(cloud.xyz_data(), cloud.size(), center.x,
                              center.y, d2.data());
  }
  PointCloud out;
  out.frame_id = cloud.frame_id;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (d2[i] <= r2) out.points.push_back(cloud.points[i]);
  }
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.resize(cloud.size());
  if (cloud.empty()) return out;
  double rot[9];
  double trans[3] = {pose.translation.x(), pose.translation.y(),
                     pose.translation.z()};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rot[3 * r + c] = pose.rotation(r, c);
  }
  simd::transform_points(cloud.xyz_data(), cloud.size(), rot, trans,
                         out.xyz_data());
  return out;
}

Point3 centroid_of(const PointCloud& cloud) {
  if (cloud.empty()) {
    throw std::invalid_argument("centroid_of: empty cloud");
  }
  double sum[3];
  simd::sum_points(cloud.xyz_data(), cloud.size(), sum);
  const double inv = 1.0 / static_cast<double>(cloud.size());
  return Point3{sum[0] * inv, sum[1] * inv, sum[2] * inv};
}

}  // namespace segloop
