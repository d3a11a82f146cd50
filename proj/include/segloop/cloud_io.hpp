// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "segloop/types.hpp"

namespace segloop {

// Binary cloud format, little-endian:
//   "SEGPC1\n"  magic
//   u64         point count
//   f64 x, y, z per point
// Loading also accepts whitespace-separated ASCII "x y z" rows (one point
// per line, '#' comments allowed); the magic distinguishes the two.

void save_cloud(const std::string& path, const PointCloud& cloud);
PointCloud load_cloud(const std::string& path);

}  // namespace segloop
