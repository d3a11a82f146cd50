// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "segloop/types.hpp"

namespace segloop::synthetic {

struct Object {
  enum class Kind { kBox, kCylinder, kSphere, kEllipsoid };
  Kind kind = Kind::kBox;
  Point3 center{};
  double dims[3] = {1.0, 1.0, 1.0};  // box w/d/h, cylinder r/r/h, radii
  double yaw = 0.0;
};

struct WorldParams {
  std::size_t object_count = 40;
  double loop_side = 75.0;       // square loop edge length [m]
  double revisit_overlap = 20.0; // extra travel past the loop start [m]
  double min_dim = 0.8;
  double max_dim = 3.5;
  double placement_margin = 24.0;  // objects scatter this far around the loop
  double path_clearance = 3.0;     // keep objects off the trajectory
  bool with_ground = false;
  double ground_tilt_x = 0.0;  // dz per meter of x
  double ground_tilt_y = 0.0;
  double sensor_height = 1.5;
};

struct ScanParams {
  double radius = 60.0;         // sensor visibility radius [m]
  // Mean spacing between surface samples [m]. Random sampling needs a
  // comfortable margin below the 0.2 m clustering threshold, or surfaces
  // fragment into sub-minimum clusters.
  double surface_spacing = 0.1;
  double noise_sigma = 0.02;    // isotropic Gaussian noise [m]
  double ground_spacing = 0.35; // ground sample spacing (with_ground only)
};

/// A scan plus per-point provenance: object index, or -1 for ground.
struct LabeledScan {
  PointCloud cloud;
  std::vector<int> labels;
};

/// Randomized world of simple solids scattered around a square loop
/// trajectory. Scans resample every visible surface (seeded), so repeated
/// visits see the same objects through different point sets.
class World {
 public:
  static World generate(const WorldParams& params, std::uint64_t seed);

  const WorldParams& params() const { return params_; }
  const std::vector<Object>& objects() const { return objects_; }
  double ground_z(double x, double y) const;

  /// Poses spaced `spacing` meters along the square loop (counterclockwise
  /// from the origin corner, then `revisit_overlap` meters beyond the
  /// start). Rotation aligns +x with the direction of travel.
  Trajectory trajectory(double spacing) const;

  LabeledScan sample_scan(const Point3& sensor, const ScanParams& scan,
                          std::uint64_t seed) const;

 private:
  WorldParams params_;
  std::vector<Object> objects_;
};

}  // namespace segloop::synthetic
