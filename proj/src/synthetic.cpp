// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "segloop/rng.hpp"

namespace segloop::synthetic {

namespace {

constexpr std::size_t kPlacementAttempts = 2000;

double horizontal_extent(const Object& obj) {
  switch (obj.kind) {
    case Object::Kind::kBox:
      return 0.5 * std::hypot(obj.dims[0], obj.dims[1]);
    case Object::Kind::kCylinder:
    case Object::Kind::kSphere:
      return obj.dims[0];
    case Object::Kind::kEllipsoid:
      return std::max(obj.dims[0], obj.dims[1]);
  }
  return 0.0;
}

double ring_distance(double x, double y, double side) {
  if (x >= 0.0 && x <= side && y >= 0.0 && y <= side) {
    return std::min(std::min(x, side - x), std::min(y, side - y));
  }
  const double dx = std::max({0.0, -x, x - side});
  const double dy = std::max({0.0, -y, y - side});
  return std::hypot(dx, dy);
}

Eigen::Matrix3d yaw_rotation(double yaw) {
  Eigen::Matrix3d r;
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Eigen::Vector3d unit_direction(SeededRng& rng) {
  for (;;) {
    const Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

std::size_t sample_count_for(double area, double spacing) {
  const double raw = area / (spacing * spacing);
  return static_cast<std::size_t>(std::max(1.0, std::round(raw)));
}

class ScanAccumulator {
 public:
  ScanAccumulator(LabeledScan& scan, const Point3& sensor, double radius,
                  double noise_sigma, SeededRng& rng)
      : scan_(scan),
        sensor_(sensor),
        radius_sq_(radius * radius),
        sigma_(noise_sigma),
        rng_(rng) {}

  void add(const Eigen::Vector3d& p, int label) {
    Point3 q{p.x() + rng_.normal() * sigma_, p.y() + rng_.normal() * sigma_,
             p.z() + rng_.normal() * sigma_};
    const double dx = q.x - sensor_.x;
    const double dy = q.y - sensor_.y;
    if (dx * dx + dy * dy > radius_sq_) return;  // beyond sensor range
    scan_.cloud.points.push_back(q);
    scan_.labels.push_back(label);
  }

 private:
  LabeledScan& scan_;
  Point3 sensor_;
  double radius_sq_;
  double sigma_;
  SeededRng& rng_;
};

void sample_box(const Object& obj, double spacing, SeededRng& rng,
                ScanAccumulator& acc, int label) {
  const double w = obj.dims[0], d = obj.dims[1], h = obj.dims[2];
  const Eigen::Matrix3d rot = yaw_rotation(obj.yaw);
  const Eigen::Vector3d center = to_eigen(obj.center);
  // (axis, sign, extent-u, extent-v, area)
  const struct {
    int axis;
    double sign;
  } faces[6] = {{0, 1.0}, {0, -1.0}, {1, 1.0}, {1, -1.0}, {2, 1.0}, {2, -1.0}};
  const double half[3] = {0.5 * w, 0.5 * d, 0.5 * h};
  for (const auto& face : faces) {
    const int u_axis = (face.axis + 1) % 3;
    const int v_axis = (face.axis + 2) % 3;
    const double area = 4.0 * half[u_axis] * half[v_axis];
    const std::size_t n = sample_count_for(area, spacing);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Vector3d local;
      local[face.axis] = face.sign * half[face.axis];
      local[u_axis] = (2.0 * rng.uniform01() - 1.0) * half[u_axis];
      local[v_axis] = (2.0 * rng.uniform01() - 1.0) * half[v_axis];
      acc.add(center + rot * local, label);
    }
  }
}

void sample_cylinder(const Object& obj, double spacing, SeededRng& rng,
                     ScanAccumulator& acc, int label) {
  const double r = obj.dims[0], h = obj.dims[2];
  const Eigen::Vector3d center = to_eigen(obj.center);
  const double two_pi = 2.0 * std::numbers::pi;
  const std::size_t lateral = sample_count_for(two_pi * r * h, spacing);
  for (std::size_t i = 0; i < lateral; ++i) {
    const double a = two_pi * rng.uniform01();
    const double z = (rng.uniform01() - 0.5) * h;
    acc.add(center + Eigen::Vector3d(r * std::cos(a), r * std::sin(a), z),
            label);
  }
  const std::size_t cap = sample_count_for(std::numbers::pi * r * r, spacing);
  for (double sign : {-1.0, 1.0}) {
    for (std::size_t i = 0; i < cap; ++i) {
      const double a = two_pi * rng.uniform01();
      const double rr = r * std::sqrt(rng.uniform01());
      acc.add(center + Eigen::Vector3d(rr * std::cos(a), rr * std::sin(a),
                                       sign * 0.5 * h),
              label);
    }
  }
}

void sample_sphere(const Object& obj, double spacing, SeededRng& rng,
                   ScanAccumulator& acc, int label) {
  const double r = obj.dims[0];
  const Eigen::Vector3d center = to_eigen(obj.center);
  const std::size_t n =
      sample_count_for(4.0 * std::numbers::pi * r * r, spacing);
  for (std::size_t i = 0; i < n; ++i) {
    acc.add(center + r * unit_direction(rng), label);
  }
}

void sample_ellipsoid(const Object& obj, double spacing, SeededRng& rng,
                      ScanAccumulator& acc, int label) {
  const double a = obj.dims[0], b = obj.dims[1], c = obj.dims[2];
  const Eigen::Matrix3d rot = yaw_rotation(obj.yaw);
  const Eigen::Vector3d center = to_eigen(obj.center);
  // Approximate area via the Thomsen formula; sampling by scaled sphere
  // directions is slightly denser at the poles, which is harmless here.
  const double p = 1.6075;
  const double ap = std::pow(a, p), bp = std::pow(b, p), cp = std::pow(c, p);
  const double area = 4.0 * std::numbers::pi *
                      std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / p);
  const std::size_t n = sample_count_for(area, spacing);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d dir = unit_direction(rng);
    const Eigen::Vector3d local(a * dir.x(), b * dir.y(), c * dir.z());
    acc.add(center + rot * local, label);
  }
}

}  // namespace

double World::ground_z(double x, double y) const {
  return params_.ground_tilt_x * x + params_.ground_tilt_y * y;
}

World World::generate(const WorldParams& params, std::uint64_t seed) {
  if (!(params.loop_side > 0.0) || !(params.min_dim > 0.0) ||
      !(params.max_dim >= params.min_dim)) {
    throw std::invalid_argument("World::generate: invalid parameters");
  }
  World world;
  world.params_ = params;
  SeededRng rng(seed);

  const double lo = -params.placement_margin;
  const double hi = params.loop_side + params.placement_margin;
  for (std::size_t i = 0; i < params.object_count; ++i) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kPlacementAttempts && !placed;
         ++attempt) {
      Object obj;
      obj.kind = static_cast<Object::Kind>(rng.bounded(4));
      const double s = rng.uniform(params.min_dim, params.max_dim);
      switch (obj.kind) {
        case Object::Kind::kBox:
          obj.dims[0] = s;
          obj.dims[1] = s * rng.uniform(0.6, 1.4);
          obj.dims[2] = s * rng.uniform(0.6, 1.4);
          break;
        case Object::Kind::kCylinder:
          obj.dims[0] = obj.dims[1] = 0.5 * s;
          obj.dims[2] = s * rng.uniform(1.0, 2.0);
          break;
        case Object::Kind::kSphere:
          obj.dims[0] = obj.dims[1] = obj.dims[2] = 0.5 * s;
          break;
        case Object::Kind::kEllipsoid:
          obj.dims[0] = 0.5 * s;
          obj.dims[1] = 0.5 * s * rng.uniform(0.5, 1.0);
          obj.dims[2] = 0.5 * s * rng.uniform(0.5, 1.5);
          break;
      }
      obj.yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double x = rng.uniform(lo, hi);
      const double y = rng.uniform(lo, hi);
      const double reach = horizontal_extent(obj);
      if (ring_distance(x, y, params.loop_side) <
          params.path_clearance + reach) {
        continue;
      }
      bool overlaps = false;
      for (const Object& other : world.objects_) {
        const double min_gap = reach + horizontal_extent(other) + 0.5;
        const double dx = x - other.center.x;
        const double dy = y - other.center.y;
        if (dx * dx + dy * dy < min_gap * min_gap) {
          overlaps = true;
          break;
        }
      }
      if (overlaps) continue;
      const double half_height =
          obj.kind == Object::Kind::kSphere
              ? obj.dims[0]
              : (obj.kind == Object::Kind::kEllipsoid ? obj.dims[2]
                                                      : 0.5 * obj.dims[2]);
      obj.center = Point3{x, y, world.ground_z(x, y) + half_height};
      world.objects_.push_back(obj);
      placed = true;
    }
    if (!placed) {
      throw std::runtime_error(
          "World::generate: could not place all objects; loosen parameters");
    }
  }
  return world;
}

Trajectory World::trajectory(double spacing) const {
  if (!(spacing > 0.0)) {
    throw std::invalid_argument("World::trajectory: spacing must be > 0");
  }
  const double side = params_.loop_side;
  const double total = 4.0 * side + params_.revisit_overlap;
  Trajectory traj;
  std::uint64_t index = 0;
  for (double t = 0.0; t <= total + 1e-9; t += spacing) {
    double x = 0.0, y = 0.0, heading = 0.0;
    double u = std::min(t, total);
    if (u >= 4.0 * side) {
      x = u - 4.0 * side;
      y = 0.0;
      heading = 0.0;
    } else if (u < side) {
      x = u;
      y = 0.0;
      heading = 0.0;
    } else if (u < 2.0 * side) {
      x = side;
      y = u - side;
      heading = 0.5 * std::numbers::pi;
    } else if (u < 3.0 * side) {
      x = side - (u - 2.0 * side);
      y = side;
      heading = std::numbers::pi;
    } else {
      x = 0.0;
      y = side - (u - 3.0 * side);
      heading = -0.5 * std::numbers::pi;
    }
    Pose pose;
    pose.rotation = yaw_rotation(heading);
    pose.translation =
        Eigen::Vector3d(x, y, ground_z(x, y) + params_.sensor_height);
    traj.append(index++, pose);
  }
  return traj;
}

LabeledScan World::sample_scan(const Point3& sensor, const ScanParams& scan,
                               std::uint64_t seed) const {
  if (!(scan.radius > 0.0) || !(scan.surface_spacing > 0.0)) {
    throw std::invalid_argument("World::sample_scan: invalid scan parameters");
  }
  LabeledScan out;
  SeededRng rng(seed);
  ScanAccumulator acc(out, sensor, scan.radius, scan.noise_sigma, rng);

  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const Object& obj = objects_[i];
    const double dx = obj.center.x - sensor.x;
    const double dy = obj.center.y - sensor.y;
    const double cull = scan.radius + horizontal_extent(obj);
    if (dx * dx + dy * dy > cull * cull) continue;
    const int label = static_cast<int>(i);
    switch (obj.kind) {
      case Object::Kind::kBox:
        sample_box(obj, scan.surface_spacing, rng, acc, label);
        break;
      case Object::Kind::kCylinder:
        sample_cylinder(obj, scan.surface_spacing, rng, acc, label);
        break;
      case Object::Kind::kSphere:
        sample_sphere(obj, scan.surface_spacing, rng, acc, label);
        break;
      case Object::Kind::kEllipsoid:
        sample_ellipsoid(obj, scan.surface_spacing, rng, acc, label);
        break;
    }
  }

  if (params_.with_ground) {
    const double step = scan.ground_spacing;
    const double r = scan.radius;
    const double x0 = std::floor((sensor.x - r) / step) * step;
    const double y0 = std::floor((sensor.y - r) / step) * step;
    for (double gx = x0; gx <= sensor.x + r; gx += step) {
      for (double gy = y0; gy <= sensor.y + r; gy += step) {
        const double jx = gx + (rng.uniform01() - 0.5) * step;
        const double jy = gy + (rng.uniform01() - 0.5) * step;
        acc.add(Eigen::Vector3d(jx, jy, ground_z(jx, jy)), -1);
      }
    }
  }
  return out;
}

}  // namespace segloop::synthetic
