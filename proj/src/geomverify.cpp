// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/geomverify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include <Eigen/Dense>

#include "segloop/rng.hpp"

namespace segloop {

namespace {

constexpr double kEarlyExitConfidence = 0.999;
constexpr std::size_t kSampleAttemptsPerIteration = 100;
constexpr std::size_t kMaxPolishRounds = 10;

double residual(const Pose& pose, const CandidateMatch& m) {
  return distance(pose.apply(m.source_centroid), m.target_centroid);
}

/// Greedy one-to-one inlier selection: candidates within `resolution`,
/// best residual first, each source and target id used at most once.
/// Ties broken by (source_id, target_id) for determinism.
std::vector<std::size_t> select_inliers(
    const std::vector<CandidateMatch>& candidates, const Pose& pose,
    double resolution) {
  struct Scored {
    double res;
    std::size_t index;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double r = residual(pose, candidates[i]);
    if (r <= resolution) scored.push_back(Scored{r, i});
  }
  std::sort(scored.begin(), scored.end(), [&](const Scored& a,
                                              const Scored& b) {
    if (a.res != b.res) return a.res < b.res;
    const CandidateMatch& ca = candidates[a.index];
    const CandidateMatch& cb = candidates[b.index];
    if (ca.source_id != cb.source_id) return ca.source_id < cb.source_id;
    return ca.target_id < cb.target_id;
  });

  std::unordered_set<std::uint64_t> used_sources, used_targets;
  std::vector<std::size_t> inliers;
  for (const Scored& s : scored) {
    const CandidateMatch& m = candidates[s.index];
    if (used_sources.contains(m.source_id) ||
        used_targets.contains(m.target_id)) {
      continue;
    }
    used_sources.insert(m.source_id);
    used_targets.insert(m.target_id);
    inliers.push_back(s.index);
  }
  std::sort(inliers.begin(), inliers.end());
  return inliers;
}

std::vector<std::pair<Point3, Point3>> centroid_pairs(
    const std::vector<CandidateMatch>& candidates,
    const std::vector<std::size_t>& indices) {
  std::vector<std::pair<Point3, Point3>> pairs;
  pairs.reserve(indices.size());
  for (std::size_t i : indices) {
    pairs.emplace_back(candidates[i].source_centroid,
                       candidates[i].target_centroid);
  }
  return pairs;
}

}  // namespace

void VerifyParams::validate() const {
  if (!(resolution > 0.0)) {
    throw std::invalid_argument("VerifyParams: resolution must be > 0");
  }
  if (min_cluster_size < 3) {
    throw std::invalid_argument("VerifyParams: min_cluster_size must be >= 3");
  }
  if (max_iterations == 0) {
    throw std::invalid_argument("VerifyParams: max_iterations must be >= 1");
  }
}

Pose estimate_rigid_transform(
    const std::vector<std::pair<Point3, Point3>>& pairs) {
  if (pairs.size() < 3) {
    throw std::invalid_argument(
        "estimate_rigid_transform: need at least 3 correspondences");
  }
  const auto n = static_cast<double>(pairs.size());
  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d tgt_mean = Eigen::Vector3d::Zero();
  for (const auto& [s, g] : pairs) {
    src_mean += to_eigen(s);
    tgt_mean += to_eigen(g);
  }
  src_mean /= n;
  tgt_mean /= n;

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (const auto& [s, g] : pairs) {
    cross += (to_eigen(s) - src_mean) * (to_eigen(g) - tgt_mean).transpose();
  }
  cross /= n;

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  // Rank < 2 means the correspondences cannot pin down a rotation.
  if (!(sigma(0) > 0.0) || sigma(1) < 1e-9 * sigma(0)) {
    throw std::invalid_argument(
        "estimate_rigid_transform: degenerate (collinear or coincident) "
        "configuration");
  }
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  Pose pose;
  pose.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  pose.translation = tgt_mean - pose.rotation * src_mean;
  return pose;
}

std::optional<LoopClosure> ransac_verify(
    const std::vector<CandidateMatch>& candidates,
    const VerifyParams& params) {
  params.validate();
  const std::size_t n = candidates.size();
  if (n < 3) return std::nullopt;
  {
    std::unordered_set<std::uint64_t> sources, targets;
    for (const CandidateMatch& m : candidates) {
      sources.insert(m.source_id);
      targets.insert(m.target_id);
    }
    if (sources.size() < 3 || targets.size() < 3) return std::nullopt;
  }

  SeededRng rng(params.seed);
  std::vector<std::size_t> best_inliers;

  for (std::size_t it = 0; it < params.max_iterations; ++it) {
    // Draw 3 candidates with pairwise-distinct source and target ids.
    std::size_t sample[3] = {0, 0, 0};
    bool sampled = false;
    for (std::size_t attempt = 0;
         attempt < kSampleAttemptsPerIteration && !sampled; ++attempt) {
      sample[0] = static_cast<std::size_t>(rng.bounded(n));
      sample[1] = static_cast<std::size_t>(rng.bounded(n));
      sample[2] = static_cast<std::size_t>(rng.bounded(n));
      const CandidateMatch& a = candidates[sample[0]];
      const CandidateMatch& b = candidates[sample[1]];
      const CandidateMatch& c = candidates[sample[2]];
      sampled = a.source_id != b.source_id && a.source_id != c.source_id &&
                b.source_id != c.source_id && a.target_id != b.target_id &&
                a.target_id != c.target_id && b.target_id != c.target_id;
    }
    if (!sampled) continue;

    Pose hypothesis;
    try {
      hypothesis = estimate_rigid_transform(
          centroid_pairs(candidates, {sample[0], sample[1], sample[2]}));
    } catch (const std::invalid_argument&) {
      continue;  // degenerate minimal sample
    }

    std::vector<std::size_t> inliers =
        select_inliers(candidates, hypothesis, params.resolution);
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      // Standard adaptive stopping rule.
      const double w =
          static_cast<double>(best_inliers.size()) / static_cast<double>(n);
      const double p_good = w * w * w;
      if (p_good >= 1.0) break;
      const double needed =
          std::log(1.0 - kEarlyExitConfidence) / std::log(1.0 - p_good);
      if (static_cast<double>(it + 1) >= needed) break;
    }
  }

  if (best_inliers.size() < params.min_cluster_size) return std::nullopt;

  // Refit on the full inlier set and reselect until the fit/select fixed
  // point, so the returned (transform, inliers) pair is self-consistent and
  // every returned residual honors the bound. A cycling refinement (not
  // observed in practice) is rejected rather than returned inconsistently.
  std::vector<std::size_t> current = std::move(best_inliers);
  Pose refined;
  bool consistent = false;
  for (std::size_t round = 0; round < kMaxPolishRounds; ++round) {
    try {
      refined = estimate_rigid_transform(centroid_pairs(candidates, current));
    } catch (const std::invalid_argument&) {
      return std::nullopt;  // inlier set collapsed to a degenerate config
    }
    std::vector<std::size_t> reselected =
        select_inliers(candidates, refined, params.resolution);
    if (reselected == current) {
      consistent = true;
      break;
    }
    current = std::move(reselected);
    if (current.size() < params.min_cluster_size) return std::nullopt;
  }
  if (!consistent) return std::nullopt;

  LoopClosure closure;
  closure.transform = refined;
  closure.consensus_size = current.size();
  closure.inliers.reserve(current.size());
  for (std::size_t i : current) closure.inliers.push_back(candidates[i]);
  return closure;
}

}  // namespace segloop
