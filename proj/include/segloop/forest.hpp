// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "segloop/segment.hpp"

namespace segloop {

inline constexpr std::size_t kPairFeatureDim = 31;

/// Pairwise classifier input: entries 0..6 are |f_i - f_j| over the eigen
/// block, 7..13 the source eigen block, 14..20 the target eigen block, and
/// 21..30 the ten per-block ESF histogram intersections.
using PairFeature = std::array<double, kPairFeatureDim>;

PairFeature build_pair_feature(const FeatureVector& f_i,
                               const FeatureVector& f_j);

struct TrainingSet {
  std::vector<PairFeature> features;
  std::vector<bool> labels;  // true = match

  std::size_t size() const { return features.size(); }
  void add(const PairFeature& f, bool label) {
    features.push_back(f);
    labels.push_back(label);
  }
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double leaf_value = 0.0;  // match-vote fraction, leaves only
  std::uint32_t left = 0;   // pre-order child indices, internal only
  std::uint32_t right = 0;
};

using Tree = std::vector<TreeNode>;

struct ForestModel {
  std::uint32_t feature_count = kPairFeatureDim;
  std::uint64_t seed = 0;
  std::vector<Tree> trees;
  std::array<double, kPairFeatureDim> importances{};
};

struct ForestParams {
  std::size_t n_trees = 25;
  std::size_t max_depth = 20;
  std::size_t min_leaf = 5;
};

/// Trains a bagged forest of Gini-split binary trees. Each tree draws a
/// bootstrap (n samples with replacement) from a per-tree substream of
/// `seed`; each node evaluates 6 randomly chosen features. Fully
/// deterministic for a fixed (set, params, seed).
ForestModel train(const TrainingSet& set, const ForestParams& params,
                  std::uint64_t seed);

/// Mean leaf match-vote fraction over all trees.
double score(const ForestModel& model, const PairFeature& pair);

/// Normalized total Gini decrease per feature. All-zero for a model that
/// never split (e.g. max_depth 0).
std::array<double, kPairFeatureDim> feature_importances(
    const ForestModel& model);

// Model file: "SEGRF1\n", u32 version, u32 feature_count, u64 seed,
// u32 tree count, importances, then each tree as u32 node count followed
// by pre-order nodes (i32 feature, f64 threshold, f64 leaf_value,
// u32 left, u32 right). Little-endian throughout.
void save_model(const ForestModel& model, const std::string& path);
ForestModel load_model(const std::string& path);

}  // namespace segloop
