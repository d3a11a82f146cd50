// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "segloop/types.hpp"

namespace segloop {

inline constexpr std::size_t kEigenFeatureDim = 7;
inline constexpr std::size_t kEsfFeatureDim = 640;
inline constexpr std::size_t kEsfBlockCount = 10;
inline constexpr std::size_t kEsfBinsPerBlock = 64;

/// Per-segment descriptor: 7 eigenvalue-based measures plus a 640-bin
/// ensemble-of-shape-functions histogram (10 blocks of 64 bins, each block
/// unit mass or all-zero).
struct FeatureVector {
  std::array<double, kEigenFeatureDim> eigen{};
  std::array<double, kEsfFeatureDim> esf{};
};

/// A point cluster produced by segmentation.
struct Segment {
  std::uint64_t id = 0;
  PointCloud points;
  Point3 centroid{};
  std::uint64_t creation_index = 0;
  std::optional<FeatureVector> feature;
};

}  // namespace segloop
