// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segloop/segment.hpp"

namespace segloop {

/// Raw entry counts per ESF block before unit-mass normalization, plus the
/// distance normalizer used. Lets callers (tests, diagnostics) reconstruct
/// mass-weighted combinations and un-normalized distances.
struct EsfSampleStats {
  std::array<std::size_t, kEsfBlockCount> block_counts{};
  double diameter = 0.0;
};

/// Seven eigenvalue measures of the segment's point covariance, with
/// eigenvalues normalized to sum 1: [linearity, planarity, scattering,
/// omnivariance, anisotropy, eigenentropy, change-of-curvature].
/// Degenerate covariances collapse to the hierarchical limit
/// [1, 0, 0, 0, 1, 0, 0...] without ever producing NaN.
std::array<double, kEigenFeatureDim> eigenvalue_features(const Segment& seg);

/// Ensemble-of-shape-functions histogram: D2 (pair distance), D3 (triplet
/// area) and A3 (triplet angles), each split into {in, out, mixed} classes
/// by tracing the connecting lines through a 64^3 occupancy voxelization of
/// the segment's bounding cube, plus a tenth block holding the per-pair
/// in-occupancy ratio. The cube is axis-aligned in the segment's covariance
/// eigenbasis so the voxelization — and with it every trace class — moves
/// rigidly with the segment. Distances are normalized by the diagonal of
/// that canonical cube's bounding box (the diameter of its circumscribing
/// sphere), also rigid-motion invariant. Every 64-bin block is normalized
/// to unit mass (all-zero blocks are legal when a class never occurs).
std::array<double, kEsfFeatureDim> esf_features(const Segment& seg,
                                                std::size_t sample_count,
                                                std::uint64_t rng_seed,
                                                EsfSampleStats* stats = nullptr);

/// Returns a copy of the segment with feature populated.
Segment describe(const Segment& seg, std::size_t sample_count,
                 std::uint64_t rng_seed);

// FeatureVector serialization ("SEGFV1\n" + u64 count + per-record
// 7 + 640 little-endian float64).
void save_features(const std::string& path,
                   const std::vector<FeatureVector>& features);
std::vector<FeatureVector> load_features(const std::string& path);

}  // namespace segloop
