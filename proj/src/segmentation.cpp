// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include <Eigen/Dense>

namespace segloop {

namespace {

// Voxel-statistics ground removal constants. The source material fixes the
// mechanism (vertical means and variances, 4-connected merging) but not the
// thresholds; these are tuned on labelled synthetic scenes.
constexpr double kColumnCell = 0.5;          // horizontal column size [m]
constexpr double kMaxGroundVariance = 0.01;  // z-variance cap [m^2]
constexpr double kMaxMeanAboveMin = 0.3;     // mean-z above column min [m]
constexpr std::size_t kMinGroundColumns = 8; // merged-region size gate

struct CellKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

std::int64_t cell_of(double v, double h) {
  return static_cast<std::int64_t>(std::floor(v / h));
}

/// Hash grid over point indices; cells sized so that any pair within
/// `cell` of each other lies in adjacent cells.
class PointGrid {
 public:
  PointGrid(const PointCloud& cloud, double cell) : cloud_(cloud), h_(cell) {
    cells_.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      cells_[key_of(cloud.points[i])].push_back(static_cast<std::uint32_t>(i));
    }
  }

  template <typename Fn>
  void for_each_candidate(const Point3& p, Fn&& fn) const {
    const CellKey c = key_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
          if (it == cells_.end()) continue;
          for (std::uint32_t idx : it->second) fn(idx);
        }
      }
    }
  }

 private:
  CellKey key_of(const Point3& p) const {
    return CellKey{cell_of(p.x, h_), cell_of(p.y, h_), cell_of(p.z, h_)};
  }

  const PointCloud& cloud_;
  double h_;
  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellKeyHash> cells_;
};

Segment make_segment(const PointCloud& cloud,
                     std::vector<std::uint32_t>& member_indices,
                     std::uint64_t id, std::uint64_t creation_index) {
  std::sort(member_indices.begin(), member_indices.end());
  Segment seg;
  seg.id = id;
  seg.creation_index = creation_index;
  seg.points.frame_id = cloud.frame_id;
  seg.points.points.reserve(member_indices.size());
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (std::uint32_t idx : member_indices) {
    const Point3& p = cloud.points[idx];
    seg.points.points.push_back(p);
    sx += p.x;
    sy += p.y;
    sz += p.z;
  }
  const double inv = 1.0 / static_cast<double>(member_indices.size());
  seg.centroid = Point3{sx * inv, sy * inv, sz * inv};
  return seg;
}

std::vector<Segment> size_filtered_segments(
    const PointCloud& cloud,
    std::vector<std::vector<std::uint32_t>>& components,
    const SegmentationParams& params, std::uint64_t creation_index) {
  std::vector<Segment> segments;
  std::uint64_t next_id = 0;
  for (auto& comp : components) {
    if (comp.size() < params.min_segment_points ||
        comp.size() > params.max_segment_points) {
      continue;
    }
    segments.push_back(make_segment(cloud, comp, next_id++, creation_index));
  }
  return segments;
}

}  // namespace

GroundRemoval ground_removal_from_string(const std::string& name) {
  if (name == "min-height") return GroundRemoval::kMinHeight;
  if (name == "voxel-statistics") return GroundRemoval::kVoxelStatistics;
  if (name == "none") return GroundRemoval::kNone;
  throw std::invalid_argument("unknown ground_removal strategy: " + name);
}

std::string to_string(GroundRemoval strategy) {
  switch (strategy) {
    case GroundRemoval::kMinHeight:
      return "min-height";
    case GroundRemoval::kVoxelStatistics:
      return "voxel-statistics";
    case GroundRemoval::kNone:
      return "none";
  }
  throw std::invalid_argument("invalid GroundRemoval value");
}

void SegmentationParams::validate() const {
  if (!(cluster_distance > 0.0)) {
    throw std::invalid_argument("cluster_distance must be > 0");
  }
  if (min_segment_points == 0 || min_segment_points > max_segment_points) {
    throw std::invalid_argument(
        "segment point bounds require 0 < min <= max");
  }
}

PointCloud remove_ground(const PointCloud& cloud,
                         const SegmentationParams& params) {
  params.validate();
  if (params.ground_removal == GroundRemoval::kNone) return cloud;

  PointCloud out;
  out.frame_id = cloud.frame_id;

  if (params.ground_removal == GroundRemoval::kMinHeight) {
    for (const Point3& p : cloud.points) {
      if (p.z > params.ground_height) out.points.push_back(p);
    }
    return out;
  }

  // Voxel-statistics strategy.
  struct Column {
    double sum = 0.0, sumsq = 0.0, min = 0.0;
    std::size_t count = 0;
    bool candidate = false;
    bool remove = false;
  };
  struct ColKey {
    std::int64_t x = 0, y = 0;
    bool operator==(const ColKey&) const = default;
  };
  struct ColKeyHash {
    std::size_t operator()(const ColKey& k) const {
      return CellKeyHash{}(CellKey{k.x, k.y, 0});
    }
  };

  std::unordered_map<ColKey, Column, ColKeyHash> columns;
  for (const Point3& p : cloud.points) {
    ColKey key{cell_of(p.x, kColumnCell), cell_of(p.y, kColumnCell)};
    auto [it, inserted] = columns.try_emplace(key);
    Column& c = it->second;
    if (inserted || p.z < c.min) c.min = p.z;
    c.sum += p.z;
    c.sumsq += p.z * p.z;
    ++c.count;
  }
  for (auto& [key, c] : columns) {
    const double n = static_cast<double>(c.count);
    const double mean = c.sum / n;
    const double var = std::max(0.0, c.sumsq / n - mean * mean);
    c.candidate = var < kMaxGroundVariance && mean - c.min < kMaxMeanAboveMin;
  }

  // Merge candidate columns by 4-connectivity; regions spanning at least
  // kMinGroundColumns columns are treated as ground.
  std::unordered_map<ColKey, bool, ColKeyHash> visited;
  for (auto& [start_key, start_col] : columns) {
    if (!start_col.candidate || visited[start_key]) continue;
    std::vector<ColKey> region;
    std::deque<ColKey> frontier{start_key};
    visited[start_key] = true;
    while (!frontier.empty()) {
      ColKey key = frontier.front();
      frontier.pop_front();
      region.push_back(key);
      const ColKey neighbors[4] = {{key.x + 1, key.y},
                                   {key.x - 1, key.y},
                                   {key.x, key.y + 1},
                                   {key.x, key.y - 1}};
      for (const ColKey& nk : neighbors) {
        auto it = columns.find(nk);
        if (it == columns.end() || !it->second.candidate || visited[nk]) {
          continue;
        }
        visited[nk] = true;
        frontier.push_back(nk);
      }
    }
    if (region.size() >= kMinGroundColumns) {
      for (const ColKey& key : region) columns.at(key).remove = true;
    }
  }

  for (const Point3& p : cloud.points) {
    ColKey key{cell_of(p.x, kColumnCell), cell_of(p.y, kColumnCell)};
    if (!columns.at(key).remove) out.points.push_back(p);
  }
  return out;
}

std::vector<Segment> euclidean_segmenter(const PointCloud& cloud,
                                         const SegmentationParams& params,
                                         std::uint64_t creation_index) {
  params.validate();
  const double d2 = params.cluster_distance * params.cluster_distance;
  const PointGrid grid(cloud, params.cluster_distance);

  std::vector<bool> visited(cloud.size(), false);
  std::vector<std::vector<std::uint32_t>> components;
  std::deque<std::uint32_t> frontier;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (visited[i]) continue;
    visited[i] = true;
    frontier.assign(1, static_cast<std::uint32_t>(i));
    std::vector<std::uint32_t> comp;
    while (!frontier.empty()) {
      const std::uint32_t p = frontier.front();
      frontier.pop_front();
      comp.push_back(p);
      grid.for_each_candidate(cloud.points[p], [&](std::uint32_t q) {
        if (visited[q]) return;
        if (squared_norm(cloud.points[p], cloud.points[q]) <= d2) {
          visited[q] = true;
          frontier.push_back(q);
        }
      });
    }
    components.push_back(std::move(comp));
  }
  return size_filtered_segments(cloud, components, params, creation_index);
}

std::vector<Segment> region_growing_segmenter(const PointCloud& cloud,
                                              double normal_radius,
                                              double smoothness_threshold,
                                              double curvature_threshold,
                                              const SegmentationParams& params,
                                              std::uint64_t creation_index) {
  params.validate();
  if (!(normal_radius > 0.0)) {
    throw std::invalid_argument("normal_radius must be > 0");
  }
  if (!(smoothness_threshold > 0.0)) {
    throw std::invalid_argument("smoothness_threshold must be > 0");
  }
  if (curvature_threshold < 0.0) {
    throw std::invalid_argument("curvature_threshold must be >= 0");
  }

  const std::size_t n = cloud.size();
  const double r2 = normal_radius * normal_radius;
  const PointGrid grid(cloud, normal_radius);

  std::vector<Eigen::Vector3d> normals(n);
  std::vector<double> curvature(n, 0.0);
  std::vector<bool> has_normal(n, false);
  std::vector<std::uint32_t> neighborhood;
  for (std::size_t i = 0; i < n; ++i) {
    neighborhood.clear();
    grid.for_each_candidate(cloud.points[i], [&](std::uint32_t q) {
      if (squared_norm(cloud.points[i], cloud.points[q]) <= r2) {
        neighborhood.push_back(q);
      }
    });
    if (neighborhood.size() < 3) continue;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::uint32_t q : neighborhood) mean += to_eigen(cloud.points[q]);
    mean /= static_cast<double>(neighborhood.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::uint32_t q : neighborhood) {
      const Eigen::Vector3d d = to_eigen(cloud.points[q]) - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(neighborhood.size());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
    const double trace = evals.sum();
    if (!(trace > 0.0)) continue;  // coincident neighborhood, no plane
    normals[i] = solver.eigenvectors().col(0);
    curvature[i] = std::max(0.0, evals(0)) / trace;
    has_normal[i] = true;
  }

  std::vector<std::uint32_t> seed_order;
  seed_order.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (has_normal[i]) seed_order.push_back(static_cast<std::uint32_t>(i));
  }
  std::sort(seed_order.begin(), seed_order.end(),
            [&](std::uint32_t a, std::uint32_t b) {
              if (curvature[a] != curvature[b]) {
                return curvature[a] < curvature[b];
              }
              return a < b;
            });

  const double cos_threshold = std::cos(smoothness_threshold);
  std::vector<bool> assigned(n, false);
  std::vector<std::vector<std::uint32_t>> components;
  for (std::uint32_t start : seed_order) {
    if (assigned[start]) continue;
    assigned[start] = true;
    std::vector<std::uint32_t> comp{start};
    std::deque<std::uint32_t> seeds{start};
    while (!seeds.empty()) {
      const std::uint32_t p = seeds.front();
      seeds.pop_front();
      grid.for_each_candidate(cloud.points[p], [&](std::uint32_t q) {
        if (assigned[q] || !has_normal[q]) return;
        if (squared_norm(cloud.points[p], cloud.points[q]) > r2) return;
        // Orientation-free normal deviation test.
        const double c = std::abs(normals[p].dot(normals[q]));
        if (c <= cos_threshold) return;
        assigned[q] = true;
        comp.push_back(q);
        if (curvature[q] < curvature_threshold) seeds.push_back(q);
      });
    }
    components.push_back(std::move(comp));
  }
  return size_filtered_segments(cloud, components, params, creation_index);
}

}  // namespace segloop
