// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/matching.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "segloop/simd/kernels.hpp"

namespace segloop {

namespace {

double eigen_sq_dist(const std::array<double, kEigenFeatureDim>& a,
                     const std::array<double, kEigenFeatureDim>& b) {
  return simd::squared_l2(a.data(), b.data(), kEigenFeatureDim);
}

// Worst candidate on top: larger distance first, then larger id.
struct HeapEntry {
  double sq_dist;
  std::uint64_t id;
  std::size_t pos;
};

struct WorseFirst {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const {
    if (a.sq_dist != b.sq_dist) return a.sq_dist < b.sq_dist;
    return a.id < b.id;
  }
};

}  // namespace

FeatureIndex FeatureIndex::build(const std::vector<Segment>& targets) {
  FeatureIndex index;
  index.entries_.reserve(targets.size());
  for (const Segment& seg : targets) {
    if (!seg.feature) {
      throw std::invalid_argument(
          "FeatureIndex::build: segment " + std::to_string(seg.id) +
          " has no feature");
    }
    Entry e;
    e.id = seg.id;
    e.creation_index = seg.creation_index;
    e.centroid = seg.centroid;
    e.feature = *seg.feature;
    index.entries_.push_back(std::move(e));
  }
  if (index.entries_.empty()) return index;

  std::vector<std::uint32_t> order(index.entries_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = static_cast<std::uint32_t>(i);
  }
  index.nodes_.reserve(index.entries_.size());
  index.root_ = index.build_nodes(order, 0, order.size(), 0);
  return index;
}

std::int32_t FeatureIndex::build_nodes(std::vector<std::uint32_t>& order,
                                       std::size_t begin, std::size_t end,
                                       std::size_t depth) {
  if (begin >= end) return -1;
  const auto axis = static_cast<std::int32_t>(depth % kEigenFeatureDim);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + static_cast<std::ptrdiff_t>(begin),
                   order.begin() + static_cast<std::ptrdiff_t>(mid),
                   order.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double va = entries_[a].feature.eigen[
                         static_cast<std::size_t>(axis)];
                     const double vb = entries_[b].feature.eigen[
                         static_cast<std::size_t>(axis)];
                     if (va != vb) return va < vb;
                     return entries_[a].id < entries_[b].id;
                   });
  const auto node_index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{order[mid], axis, -1, -1});
  const std::int32_t left = build_nodes(order, begin, mid, depth + 1);
  const std::int32_t right = build_nodes(order, mid + 1, end, depth + 1);
  nodes_[static_cast<std::size_t>(node_index)].left = left;
  nodes_[static_cast<std::size_t>(node_index)].right = right;
  return node_index;
}

std::vector<FeatureIndex::Neighbor> FeatureIndex::query(
    const std::array<double, kEigenFeatureDim>& eigen, std::size_t k,
    std::uint64_t max_creation_index) const {
  std::vector<Neighbor> result;
  if (k == 0 || entries_.empty()) return result;

  std::priority_queue<HeapEntry, std::vector<HeapEntry>, WorseFirst> best;
  const auto worse_than_top = [&](double sq_dist, std::uint64_t id) {
    const HeapEntry& top = best.top();
    if (sq_dist != top.sq_dist) return sq_dist > top.sq_dist;
    return id > top.id;
  };

  // Iterative depth-first traversal with branch pruning.
  std::vector<std::int32_t> stack;
  stack.push_back(root_);
  while (!stack.empty()) {
    const std::int32_t ni = stack.back();
    stack.pop_back();
    if (ni < 0) continue;
    const Node& node = nodes_[static_cast<std::size_t>(ni)];
    const Entry& e = entries_[node.entry];

    const auto axis = static_cast<std::size_t>(node.axis);
    const double delta = eigen[axis] - e.feature.eigen[axis];
    const double axis_sq = delta * delta;

    if (e.creation_index <= max_creation_index) {
      const double sq = eigen_sq_dist(eigen, e.feature.eigen);
      if (best.size() < k) {
        best.push(HeapEntry{sq, e.id, node.entry});
      } else if (!worse_than_top(sq, e.id)) {
        best.pop();
        best.push(HeapEntry{sq, e.id, node.entry});
      }
    }

    const std::int32_t near = delta <= 0.0 ? node.left : node.right;
    const std::int32_t far = delta <= 0.0 ? node.right : node.left;
    // The far branch can still hold equal-distance lower ids, so prune only
    // on a strictly worse axis distance.
    if (best.size() < k || axis_sq <= best.top().sq_dist) {
      stack.push_back(far);
    }
    stack.push_back(near);
  }

  result.reserve(best.size());
  while (!best.empty()) {
    const HeapEntry& top = best.top();
    result.push_back(Neighbor{top.pos, top.id, std::sqrt(top.sq_dist)});
    best.pop();
  }
  std::reverse(result.begin(), result.end());
  return result;
}

std::vector<FeatureIndex::Neighbor> retrieve_candidates(
    const FeatureIndex& index, const Segment& source, std::size_t k,
    std::uint64_t max_creation_index) {
  if (!source.feature) {
    throw std::invalid_argument("retrieve_candidates: source has no feature");
  }
  if (k == 0) {
    throw std::invalid_argument("retrieve_candidates: k must be >= 1");
  }
  return index.query(source.feature->eigen, k, max_creation_index);
}

std::vector<CandidateMatch> classify_candidates(
    const FeatureIndex& index, const Segment& source,
    const std::vector<FeatureIndex::Neighbor>& neighbors,
    const Classifier& classifier) {
  if (!source.feature) {
    throw std::invalid_argument("classify_candidates: source has no feature");
  }
  if (const auto* forest = std::get_if<ForestClassifier>(&classifier)) {
    if (forest->model == nullptr) {
      throw std::invalid_argument("classify_candidates: missing forest model");
    }
  }

  std::vector<CandidateMatch> matches;
  for (const FeatureIndex::Neighbor& nb : neighbors) {
    const FeatureIndex::Entry& target = index.entry(nb.entry_pos);
    double w = 0.0;
    bool keep = false;
    if (const auto* l2 = std::get_if<L2Classifier>(&classifier)) {
      if (!(l2->threshold > 0.0)) {
        throw std::invalid_argument(
            "classify_candidates: L2 threshold must be > 0");
      }
      keep = nb.distance <= l2->threshold;
      if (keep) {
        w = std::clamp(1.0 - nb.distance / l2->threshold, 0.0, 1.0);
      }
    } else {
      const auto& forest = std::get<ForestClassifier>(classifier);
      const PairFeature pair =
          build_pair_feature(*source.feature, target.feature);
      w = score(*forest.model, pair);
      keep = w >= forest.w_threshold;
    }
    if (!keep) continue;
    CandidateMatch m;
    m.source_id = source.id;
    m.target_id = target.id;
    m.score = w;
    m.source_centroid = source.centroid;
    m.target_centroid = target.centroid;
    matches.push_back(m);
  }
  return matches;
}

}  // namespace segloop
