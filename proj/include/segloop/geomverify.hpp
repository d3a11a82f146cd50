// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "segloop/matching.hpp"
#include "segloop/types.hpp"

namespace segloop {

struct LoopClosure {
  Pose transform;  // target <- source
  std::vector<CandidateMatch> inliers;
  std::size_t consensus_size = 0;
  std::uint64_t source_scan_index = 0;
};

struct VerifyParams {
  double resolution = 0.4;
  std::size_t min_cluster_size = 4;
  std::size_t max_iterations = 400;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Least-squares rigid transform mapping sources onto targets (rotation
/// from the SVD of the centered cross-covariance with det +1 correction).
/// Throws on fewer than 3 pairs or a collinear/degenerate source
/// configuration.
Pose estimate_rigid_transform(
    const std::vector<std::pair<Point3, Point3>>& pairs);

/// RANSAC over candidate centroids: repeatedly samples 3 candidates with
/// pairwise-distinct source and target ids, fits a transform, and counts
/// greedy one-to-one inliers (residual <= resolution, best residual first).
/// The best consensus is refit on its full inlier set until the
/// fit/select fixed point, so the returned transform, inlier list and
/// residual bound are mutually consistent. Returns nullopt when no
/// consensus reaches min_cluster_size.
std::optional<LoopClosure> ransac_verify(
    const std::vector<CandidateMatch>& candidates, const VerifyParams& params);

}  // namespace segloop
