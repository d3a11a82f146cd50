// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>  // determinant() used by Pose::is_valid

namespace segloop {

/// A 3D point in meters. Coordinates are expected to be finite; file
/// ingestion rejects NaN/Inf so downstream code never sees them.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

static_assert(sizeof(Point3) == 3 * sizeof(double),
              "Point3 must pack as three contiguous doubles");

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

inline Eigen::Vector3d to_eigen(const Point3& p) { return {p.x, p.y, p.z}; }
inline Point3 from_eigen(const Eigen::Vector3d& v) {
  return {v.x(), v.y(), v.z()};
}

inline double squared_norm(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt(squared_norm(a, b));
}

/// An ordered list of points. Iteration order is stable: operations that
/// filter a cloud preserve the relative order of surviving points.
struct PointCloud {
  std::vector<Point3> points;
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /// Raw xyz view for the SIMD kernels (x0 y0 z0 x1 y1 z1 ...).
  const double* xyz_data() const {
    return reinterpret_cast<const double*>(points.data());
  }
  double* xyz_data() { return reinterpret_cast<double*>(points.data()); }
};

/// Rigid transform: p -> R*p + t with R orthonormal, det(R) = +1.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Max deviation of R*R^T from identity, used by validity checks.
  double orthonormality_error() const {
    const Eigen::Matrix3d d =
        rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
    return d.cwiseAbs().maxCoeff();
  }

  bool is_valid(double tol = 1e-9) const {
    return rotation.allFinite() && translation.allFinite() &&
           orthonormality_error() <= tol && rotation.determinant() > 0.0;
  }

  Point3 apply(const Point3& p) const {
    return from_eigen(rotation * to_eigen(p) + translation);
  }

  Pose inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// Composition: (*this) after `other`, i.e. result(p) = this(other(p)).
  Pose compose(const Pose& other) const {
    Pose out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
  }

  bool bitwise_equal(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

/// Ordered sequence of (scan_index, Pose) with strictly increasing indices.
class Trajectory {
 public:
  Trajectory() = default;

  void append(std::int64_t scan_index, Pose pose) {
    if (!entries_.empty() && scan_index <= entries_.back().first) {
      throw std::invalid_argument(
          "Trajectory: scan_index must be strictly increasing");
    }
    entries_.emplace_back(scan_index, std::move(pose));
  }

  bool contains(std::int64_t scan_index) const {
    return find(scan_index) != nullptr;
  }

  const Pose* find(std::int64_t scan_index) const {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), scan_index,
        [](const auto& e, std::int64_t idx) { return e.first < idx; });
    if (it == entries_.end() || it->first != scan_index) return nullptr;
    return &it->second;
  }

  const Pose& at(std::int64_t scan_index) const {
    const Pose* p = find(scan_index);
    if (!p) {
      throw std::invalid_argument("Trajectory: no pose for scan index " +
                                  std::to_string(scan_index));
    }
    return *p;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<std::pair<std::int64_t, Pose>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::int64_t, Pose>> entries_;
};

}  // namespace segloop
