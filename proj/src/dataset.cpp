// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/dataset.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "segloop/cloud_io.hpp"

namespace segloop {

namespace {

constexpr double kMaxOrthonormalityError = 1e-6;
// Rows cleaner than this are kept bit-exact (no projection), so writing and
// re-reading a valid trajectory is the identity.
constexpr double kProjectionTrigger = 1e-9;

PointCloud load_kitti_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open scan file: " + path);
  }
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  if (bytes % (4 * sizeof(float)) != 0) {
    throw std::runtime_error(path +
                             ": size is not a multiple of 16 bytes "
                             "(expected float32 x y z intensity records)");
  }
  const std::size_t count = bytes / (4 * sizeof(float));
  std::vector<float> raw(count * 4);
  if (count > 0 &&
      !in.read(reinterpret_cast<char*>(raw.data()),
               static_cast<std::streamsize>(bytes))) {
    throw std::runtime_error(path + ": short read");
  }
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Point3 p{static_cast<double>(raw[4 * i]),
                   static_cast<double>(raw[4 * i + 1]),
                   static_cast<double>(raw[4 * i + 2])};
    if (!is_finite(p)) {
      throw std::runtime_error(path + ": non-finite point at record " +
                               std::to_string(i));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace

PointCloud SequenceDataset::load_scan(std::size_t pos) const {
  if (pos >= scan_paths.size()) {
    throw std::invalid_argument("load_scan: index " + std::to_string(pos) +
                                " out of range (" +
                                std::to_string(scan_paths.size()) + " scans)");
  }
  const std::string& path = scan_paths[pos];
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0) {
    return load_kitti_bin(path);
  }
  return load_cloud(path);
}

Pose parse_pose_row(const std::string& line) {
  std::istringstream in(line);
  std::array<double, 12> v{};
  for (double& x : v) {
    if (!(in >> x)) {
      throw std::runtime_error("expected 12 reals (row-major [R|t])");
    }
  }
  std::string extra;
  if (in >> extra) {
    throw std::runtime_error("trailing fields after 12 reals");
  }

  Pose pose;
  pose.rotation << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  pose.translation << v[3], v[7], v[11];
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) {
    throw std::runtime_error("non-finite pose entries");
  }
  const double err = pose.orthonormality_error();
  if (err > kMaxOrthonormalityError) {
    std::ostringstream msg;
    msg << "rotation not orthonormal (error " << err << " > "
        << kMaxOrthonormalityError << ")";
    throw std::runtime_error(msg.str());
  }
  if (pose.rotation.determinant() < 0.0) {
    throw std::runtime_error("rotation block is a reflection (det < 0)");
  }
  if (err > kProjectionTrigger) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(
        pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Eigen::Matrix3d u = svd.matrixU();
      u.col(2) *= -1.0;
      r = u * svd.matrixV().transpose();
    }
    pose.rotation = r;
  }
  return pose;
}

Trajectory load_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open pose file: " + path);
  }
  Trajectory trajectory;
  std::string line;
  std::size_t line_no = 0;
  std::int64_t index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    bool blank = true;
    for (const char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') {
        blank = false;
        break;
      }
    }
    if (blank) continue;
    try {
      trajectory.append(index++, parse_pose_row(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(line_no) +
                               ": " + e.what());
    }
  }
  return trajectory;
}

void save_pose_file(const std::string& path, const Trajectory& trajectory) {
  const auto& entries = trajectory.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != static_cast<std::int64_t>(i)) {
      throw std::invalid_argument(
          "save_pose_file: trajectory indices must be 0..n-1");
    }
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write pose file: " + path);
  }
  out << std::setprecision(17);
  for (const auto& [index, pose] : entries) {
    const Eigen::Matrix3d& r = pose.rotation;
    const Eigen::Vector3d& t = pose.translation;
    for (int row = 0; row < 3; ++row) {
      out << r(row, 0) << ' ' << r(row, 1) << ' ' << r(row, 2) << ' '
          << t(row);
      out << (row == 2 ? '\n' : ' ');
    }
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path);
  }
}

SequenceDataset load_sequence(const std::string& scan_dir,
                              const std::string& pose_file) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(scan_dir)) {
    throw std::runtime_error("not a directory: " + scan_dir);
  }
  SequenceDataset dataset;
  for (const auto& entry : fs::directory_iterator(scan_dir)) {
    if (entry.is_regular_file()) {
      dataset.scan_paths.push_back(entry.path().string());
    }
  }
  std::sort(dataset.scan_paths.begin(), dataset.scan_paths.end());
  dataset.poses = load_pose_file(pose_file);
  if (dataset.poses.size() != dataset.scan_paths.size()) {
    throw std::runtime_error(
        "scan/pose count mismatch: " + std::to_string(dataset.scan_paths.size()) +
        " scans vs " + std::to_string(dataset.poses.size()) + " poses");
  }
  return dataset;
}

}  // namespace segloop
