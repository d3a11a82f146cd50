// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/target_map.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "segloop/cloud_ops.hpp"

namespace segloop {

namespace {

constexpr char kMapMagic[] = "SEGMAP1\n";
constexpr std::size_t kMapMagicLen = 8;
constexpr std::uint32_t kMapVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "map IO assumes a little-endian host");

struct GridKey {
  std::int64_t x = 0, y = 0, z = 0;
  bool operator==(const GridKey&) const = default;
};

struct GridKeyHash {
  std::size_t operator()(const GridKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

GridKey key_of(const Point3& p, double cell) {
  return GridKey{static_cast<std::int64_t>(std::floor(p.x / cell)),
                 static_cast<std::int64_t>(std::floor(p.y / cell)),
                 static_cast<std::int64_t>(std::floor(p.z / cell))};
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != sizeof(T)) {
    throw std::runtime_error("TargetMap::load: truncated file " + path);
  }
  return value;
}

}  // namespace

std::vector<Segment> filter_incomplete(const std::vector<Segment>& segments,
                                       const Point3& center, double radius,
                                       double boundary) {
  if (!(boundary > 0.0) || !(boundary < radius)) {
    throw std::invalid_argument("filter_incomplete: need 0 < b < R");
  }
  const double inner_sq = (radius - boundary) * (radius - boundary);
  const double outer_sq = radius * radius;
  std::vector<Segment> kept;
  for (const Segment& seg : segments) {
    bool boundary_hit = false;
    for (const Point3& p : seg.points.points) {
      const double dx = p.x - center.x;
      const double dy = p.y - center.y;
      const double d2 = dx * dx + dy * dy;
      if (d2 > inner_sq && d2 <= outer_sq) {
        boundary_hit = true;
        break;
      }
    }
    if (!boundary_hit) kept.push_back(seg);
  }
  return kept;
}

std::vector<std::uint64_t> TargetMap::insert_segments(
    const std::vector<Segment>& segments, std::uint64_t scan_index) {
  for (const Segment& seg : segments) {
    if (!seg.feature) {
      throw std::invalid_argument(
          "TargetMap::insert_segments: segment without feature");
    }
  }
  std::vector<std::uint64_t> assigned;
  assigned.reserve(segments.size());
  for (const Segment& seg : segments) {
    Segment copy = seg;
    copy.id = next_id_++;
    copy.creation_index = scan_index;
    assigned.push_back(copy.id);
    segments_.emplace(copy.id, std::move(copy));
  }
  return assigned;
}

std::size_t TargetMap::remove_duplicates() {
  if (segments_.empty()) return 0;
  const double cell = params_.duplicate_distance;
  const double dd_sq = cell * cell;

  // Newest first: creation_index descending, then id descending (ids are
  // monotonic, so a larger id within a scan is the fresher insertion).
  std::vector<const Segment*> order;
  order.reserve(segments_.size());
  for (const auto& [id, seg] : segments_) order.push_back(&seg);
  std::sort(order.begin(), order.end(), [](const Segment* a, const Segment* b) {
    if (a->creation_index != b->creation_index) {
      return a->creation_index > b->creation_index;
    }
    return a->id > b->id;
  });

  std::unordered_map<GridKey, std::vector<const Segment*>, GridKeyHash> grid;
  std::vector<std::uint64_t> removed;
  for (const Segment* seg : order) {
    const GridKey k = key_of(seg->centroid, cell);
    bool duplicate = false;
    for (std::int64_t dx = -1; dx <= 1 && !duplicate; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !duplicate; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && !duplicate; ++dz) {
          const auto it = grid.find(GridKey{k.x + dx, k.y + dy, k.z + dz});
          if (it == grid.end()) continue;
          for (const Segment* survivor : it->second) {
            if (squared_norm(survivor->centroid, seg->centroid) <= dd_sq) {
              duplicate = true;
              break;
            }
          }
        }
      }
    }
    if (duplicate) {
      removed.push_back(seg->id);
    } else {
      grid[k].push_back(seg);
    }
  }
  for (std::uint64_t id : removed) segments_.erase(id);
  return removed.size();
}

void TargetMap::update_poses(const Trajectory& old_traj,
                             const Trajectory& new_traj) {
  for (auto& [id, seg] : segments_) {
    if (!old_traj.contains(seg.creation_index) ||
        !new_traj.contains(seg.creation_index)) {
      throw std::invalid_argument(
          "TargetMap::update_poses: trajectory missing creation index " +
          std::to_string(seg.creation_index));
    }
  }
  for (auto& [id, seg] : segments_) {
    const Pose& old_pose = old_traj.at(seg.creation_index);
    const Pose& new_pose = new_traj.at(seg.creation_index);
    if (old_pose.bitwise_equal(new_pose)) continue;
    const Pose correction = new_pose.compose(old_pose.inverse());
    seg.points = transform_cloud(seg.points, correction);
    seg.centroid = correction.apply(seg.centroid);
  }
  remove_duplicates();
}

std::vector<Segment> TargetMap::all_segments() const {
  std::vector<Segment> out;
  out.reserve(segments_.size());
  for (const auto& [id, seg] : segments_) out.push_back(seg);
  return out;
}

void TargetMap::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("TargetMap::save: cannot open " + path);
  }
  out.write(kMapMagic, kMapMagicLen);
  write_pod(out, kMapVersion);
  write_pod(out, next_id_);
  write_pod(out, params_.duplicate_distance);
  write_pod(out, params_.boundary_b);
  write_pod(out, static_cast<std::uint64_t>(segments_.size()));
  for (const auto& [id, seg] : segments_) {
    write_pod(out, seg.id);
    write_pod(out, seg.creation_index);
    write_pod(out, seg.centroid.x);
    write_pod(out, seg.centroid.y);
    write_pod(out, seg.centroid.z);
    write_pod(out, static_cast<std::uint8_t>(seg.feature ? 1 : 0));
    if (seg.feature) {
      out.write(reinterpret_cast<const char*>(seg.feature->eigen.data()),
                sizeof(double) * kEigenFeatureDim);
      out.write(reinterpret_cast<const char*>(seg.feature->esf.data()),
                sizeof(double) * kEsfFeatureDim);
    }
    write_pod(out, static_cast<std::uint64_t>(seg.points.size()));
    if (!seg.points.empty()) {
      out.write(reinterpret_cast<const char*>(seg.points.xyz_data()),
                static_cast<std::streamsize>(3 * seg.points.size() *
                                             sizeof(double)));
    }
  }
  if (!out) {
    throw std::runtime_error("TargetMap::save: write failed for " + path);
  }
}

TargetMap TargetMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("TargetMap::load: cannot open " + path);
  }
  char head[kMapMagicLen] = {};
  in.read(head, kMapMagicLen);
  if (in.gcount() != static_cast<std::streamsize>(kMapMagicLen) ||
      std::memcmp(head, kMapMagic, kMapMagicLen) != 0) {
    throw std::runtime_error("TargetMap::load: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kMapVersion) {
    throw std::runtime_error("TargetMap::load: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  TargetMap map;
  map.next_id_ = read_pod<std::uint64_t>(in, path);
  map.params_.duplicate_distance = read_pod<double>(in, path);
  map.params_.boundary_b = read_pod<double>(in, path);
  const auto count = read_pod<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    Segment seg;
    seg.id = read_pod<std::uint64_t>(in, path);
    seg.creation_index = read_pod<std::uint64_t>(in, path);
    seg.centroid.x = read_pod<double>(in, path);
    seg.centroid.y = read_pod<double>(in, path);
    seg.centroid.z = read_pod<double>(in, path);
    const auto has_feature = read_pod<std::uint8_t>(in, path);
    if (has_feature) {
      FeatureVector f;
      in.read(reinterpret_cast<char*>(f.eigen.data()),
              sizeof(double) * kEigenFeatureDim);
      in.read(reinterpret_cast<char*>(f.esf.data()),
              sizeof(double) * kEsfFeatureDim);
      if (!in) {
        throw std::runtime_error("TargetMap::load: truncated file " + path);
      }
      seg.feature = f;
    }
    const auto n_points = read_pod<std::uint64_t>(in, path);
    seg.points.points.resize(n_points);
    if (n_points > 0) {
      const auto bytes =
          static_cast<std::streamsize>(3 * n_points * sizeof(double));
      in.read(reinterpret_cast<char*>(seg.points.xyz_data()), bytes);
      if (in.gcount() != bytes) {
        throw std::runtime_error("TargetMap::load: truncated file " + path);
      }
    }
    if (!map.segments_.emplace(seg.id, std::move(seg)).second) {
      throw std::runtime_error("TargetMap::load: duplicate segment id in " +
                               path);
    }
  }
  return map;
}

}  // namespace segloop
