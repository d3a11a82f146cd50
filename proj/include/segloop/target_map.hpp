// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "segloop/segment.hpp"
#include "segloop/types.hpp"

namespace segloop {

/// Drops every segment that has at least one point whose horizontal
/// distance to `center` falls in (R - b, R]: such segments touch the
/// observation boundary and are likely cut off. Throws unless 0 < b < R.
std::vector<Segment> filter_incomplete(const std::vector<Segment>& segments,
                                       const Point3& center, double radius,
                                       double boundary);

struct TargetMapParams {
  double duplicate_distance = 1.0;
  double boundary_b = 3.0;
};

/// Incremental target segment map. Inserted segments get fresh monotonic
/// ids; duplicate removal keeps the newest view of a place; pose updates
/// re-express every segment through the correction new_pose * old_pose^-1
/// of its creation pose.
class TargetMap {
 public:
  TargetMap() = default;
  explicit TargetMap(const TargetMapParams& params) : params_(params) {}

  const TargetMapParams& params() const { return params_; }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const std::map<std::uint64_t, Segment>& segments() const {
    return segments_;
  }

  /// Adds described segments with creation_index = scan_index, assigning
  /// fresh ids (the input ids are ignored). Returns the assigned ids.
  /// Throws if a segment lacks a feature.
  std::vector<std::uint64_t> insert_segments(
      const std::vector<Segment>& segments, std::uint64_t scan_index);

  /// Newest-to-oldest duplicate sweep: every surviving segment removes all
  /// older segments whose centroid lies within duplicate_distance.
  /// Returns the number of removed segments. Idempotent.
  std::size_t remove_duplicates();

  /// Re-expresses each segment via new_traj(creation) * old_traj(creation)^-1
  /// and then removes duplicates. Bit-exact no-op for segments whose pose
  /// did not change. Throws if either trajectory misses a creation index.
  void update_poses(const Trajectory& old_traj, const Trajectory& new_traj);

  std::vector<Segment> all_segments() const;

  // Versioned binary persistence ("SEGMAP1\n").
  void save(const std::string& path) const;
  static TargetMap load(const std::string& path);

 private:
  TargetMapParams params_;
  std::map<std::uint64_t, Segment> segments_;
  std::uint64_t next_id_ = 0;
};

}  // namespace segloop
