// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "segloop/forest.hpp"
#include "segloop/segment.hpp"

namespace segloop {

/// k-d tree over the 7-dim eigen block of described segments. Queries are
/// exact (equal to exhaustive search, ties at equal distance broken by
/// lower segment id) and leave the index untouched. Entries keep a copy of
/// the full feature vector and centroid so candidate classification and
/// geometric verification need no back-reference into the target map.
class FeatureIndex {
 public:
  struct Entry {
    std::uint64_t id = 0;
    std::uint64_t creation_index = 0;
    Point3 centroid{};
    FeatureVector feature;
  };

  struct Neighbor {
    std::size_t entry_pos = 0;
    std::uint64_t target_id = 0;
    double distance = 0.0;
  };

  FeatureIndex() = default;

  /// Builds the index. Throws if any target lacks a feature.
  static FeatureIndex build(const std::vector<Segment>& targets);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Entry& entry(std::size_t pos) const { return entries_.at(pos); }

  /// Exact k nearest entries to `eigen`, ascending (distance, id). Entries
  /// with creation_index > max_creation_index are ignored, which implements
  /// the "recently observed segments are excluded" window at query time.
  std::vector<Neighbor> query(
      const std::array<double, kEigenFeatureDim>& eigen, std::size_t k,
      std::uint64_t max_creation_index =
          std::numeric_limits<std::uint64_t>::max()) const;

 private:
  struct Node {
    std::uint32_t entry = 0;
    std::int32_t axis = -1;  // -1 for an empty slot
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build_nodes(std::vector<std::uint32_t>& order,
                           std::size_t begin, std::size_t end,
                           std::size_t depth);

  std::vector<Entry> entries_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

/// min(k, eligible entries) nearest targets of an already-described source
/// segment. Throws if the source has no feature or k == 0.
std::vector<FeatureIndex::Neighbor> retrieve_candidates(
    const FeatureIndex& index, const Segment& source, std::size_t k,
    std::uint64_t max_creation_index =
        std::numeric_limits<std::uint64_t>::max());

struct CandidateMatch {
  std::uint64_t source_id = 0;
  std::uint64_t target_id = 0;
  double score = 0.0;
  Point3 source_centroid{};
  Point3 target_centroid{};
};

/// Keeps neighbors whose plain eigen-space L2 distance is <= threshold;
/// score is the affine margin 1 - d/threshold clamped to [0, 1].
struct L2Classifier {
  double threshold = 0.0024;
};

/// Keeps neighbors whose forest score w is >= w_threshold.
struct ForestClassifier {
  const ForestModel* model = nullptr;
  double w_threshold = 0.5;
};

using Classifier = std::variant<L2Classifier, ForestClassifier>;

std::vector<CandidateMatch> classify_candidates(
    const FeatureIndex& index, const Segment& source,
    const std::vector<FeatureIndex::Neighbor>& neighbors,
    const Classifier& classifier);

}  // namespace segloop
