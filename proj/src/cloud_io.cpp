// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/cloud_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace segloop {

namespace {

constexpr char kMagic[] = "SEGPC1\n";
constexpr std::size_t kMagicLen = 7;

static_assert(std::endian::native == std::endian::little,
              "cloud IO assumes a little-endian host");

PointCloud load_ascii(const std::string& path, std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream row(line);
    double x, y, z;
    if (!(row >> x >> y >> z)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 3 coordinates");
    }
    double extra;
    if (row >> extra) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": trailing fields after x y z");
    }
    const Point3 p{x, y, z};
    if (!is_finite(p)) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": non-finite coordinate");
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

}  // namespace

void save_cloud(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("save_cloud: cannot open " + path);
  }
  out.write(kMagic, kMagicLen);
  const auto count = static_cast<std::uint64_t>(cloud.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  if (!cloud.empty()) {
    out.write(reinterpret_cast<const char*>(cloud.xyz_data()),
              static_cast<std::streamsize>(3 * cloud.size() * sizeof(double)));
  }
  if (!out) {
    throw std::runtime_error("save_cloud: write failed for " + path);
  }
}

PointCloud load_cloud(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_cloud: cannot open " + path);
  }
  char head[kMagicLen] = {};
  in.read(head, kMagicLen);
  const auto got = in.gcount();
  if (got == static_cast<std::streamsize>(kMagicLen) &&
      std::memcmp(head, kMagic, kMagicLen) == 0) {
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (in.gcount() != sizeof(count)) {
      throw std::runtime_error("load_cloud: truncated header in " + path);
    }
    PointCloud cloud;
    cloud.points.resize(count);
    if (count > 0) {
      const auto bytes =
          static_cast<std::streamsize>(3 * count * sizeof(double));
      in.read(reinterpret_cast<char*>(cloud.xyz_data()), bytes);
      if (in.gcount() != bytes) {
        throw std::runtime_error("load_cloud: truncated payload in " + path);
      }
    }
    for (const Point3& p : cloud.points) {
      if (!is_finite(p)) {
        throw std::runtime_error("load_cloud: non-finite point in " + path);
      }
    }
    return cloud;
  }
  // Not the binary magic: reread as ASCII.
  in.clear();
  in.seekg(0);
  return load_ascii(path, in);
}

}  // namespace segloop
