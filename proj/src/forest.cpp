// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "segloop/rng.hpp"
#include "segloop/simd/kernels.hpp"

namespace segloop {

namespace {

constexpr std::size_t kFeaturesPerNode = 6;  // ceil(sqrt(31))

constexpr char kModelMagic[] = "SEGRF1\n";
constexpr std::size_t kModelMagicLen = 7;
constexpr std::uint32_t kModelVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "model IO assumes a little-endian host");

double gini(std::size_t pos, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(pos) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double decrease = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& set, const ForestParams& params,
              SeededRng& rng, std::array<double, kPairFeatureDim>& importance)
      : set_(set), params_(params), rng_(rng), importance_(importance) {}

  Tree build(std::vector<std::uint32_t> sample_indices) {
    tree_.clear();
    grow(std::move(sample_indices), 0);
    return std::move(tree_);
  }

 private:
  std::uint32_t grow(std::vector<std::uint32_t> samples, std::size_t depth) {
    const auto node_index = static_cast<std::uint32_t>(tree_.size());
    tree_.emplace_back();

    std::size_t pos = 0;
    for (std::uint32_t s : samples) pos += set_.labels[s] ? 1 : 0;
    const std::size_t total = samples.size();
    const double leaf_value =
        total == 0 ? 0.0
                   : static_cast<double>(pos) / static_cast<double>(total);

    const bool pure = pos == 0 || pos == total;
    SplitChoice split;
    if (!pure && depth < params_.max_depth &&
        total >= 2 * params_.min_leaf) {
      split = best_split(samples, pos);
    }
    if (!split.found) {
      tree_[node_index].feature = -1;
      tree_[node_index].leaf_value = leaf_value;
      return node_index;
    }

    importance_[split.feature] +=
        split.decrease * static_cast<double>(total);

    auto mid = std::stable_partition(
        samples.begin(), samples.end(), [&](std::uint32_t s) {
          return set_.features[s][split.feature] <= split.threshold;
        });
    std::vector<std::uint32_t> left_samples(samples.begin(), mid);
    std::vector<std::uint32_t> right_samples(mid, samples.end());
    samples.clear();
    samples.shrink_to_fit();

    tree_[node_index].feature = static_cast<std::int32_t>(split.feature);
    tree_[node_index].threshold = split.threshold;
    const std::uint32_t left = grow(std::move(left_samples), depth + 1);
    const std::uint32_t right = grow(std::move(right_samples), depth + 1);
    tree_[node_index].left = left;
    tree_[node_index].right = right;
    return node_index;
  }

  SplitChoice best_split(const std::vector<std::uint32_t>& samples,
                         std::size_t pos_total) {
    // Distinct random feature subset, evaluated in ascending index order so
    // Gini ties resolve to the lowest feature.
    std::array<std::size_t, kFeaturesPerNode> features{};
    std::size_t chosen = 0;
    while (chosen < kFeaturesPerNode) {
      const auto f =
          static_cast<std::size_t>(rng_.bounded(kPairFeatureDim));
      bool seen = false;
      for (std::size_t i = 0; i < chosen; ++i) seen |= features[i] == f;
      if (!seen) features[chosen++] = f;
    }
    std::sort(features.begin(), features.end());

    const std::size_t total = samples.size();
    const double parent = gini(pos_total, total);

    SplitChoice best;
    std::vector<std::pair<double, bool>> column(total);
    for (std::size_t f : features) {
      for (std::size_t i = 0; i < total; ++i) {
        column[i] = {set_.features[samples[i]][f], set_.labels[samples[i]]};
      }
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      std::size_t left_pos = 0;
      for (std::size_t i = 0; i + 1 < total; ++i) {
        left_pos += column[i].second ? 1 : 0;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t left_n = i + 1;
        const std::size_t right_n = total - left_n;
        if (left_n < params_.min_leaf || right_n < params_.min_leaf) continue;
        const double decrease =
            parent -
            (static_cast<double>(left_n) / static_cast<double>(total)) *
                gini(left_pos, left_n) -
            (static_cast<double>(right_n) / static_cast<double>(total)) *
                gini(pos_total - left_pos, right_n);
        if (decrease > best.decrease) {
          double thr = 0.5 * (column[i].first + column[i + 1].first);
          // Midpoint can collapse onto the upper value in floating point;
          // fall back to the lower value so `x <= thr` keeps it left.
          if (thr >= column[i + 1].first) thr = column[i].first;
          best.found = true;
          best.feature = f;
          best.threshold = thr;
          best.decrease = decrease;
        }
      }
    }
    return best;
  }

  const TrainingSet& set_;
  const ForestParams& params_;
  SeededRng& rng_;
  std::array<double, kPairFeatureDim>& importance_;
  Tree tree_;
};

void validate_model(const ForestModel& model, const std::string& context) {
  if (model.feature_count != kPairFeatureDim) {
    throw std::runtime_error(context + ": incompatible feature_count " +
                             std::to_string(model.feature_count) +
                             " (expected " +
                             std::to_string(kPairFeatureDim) + ")");
  }
  for (const Tree& tree : model.trees) {
    if (tree.empty()) {
      throw std::runtime_error(context + ": empty tree");
    }
    for (const TreeNode& node : tree) {
      if (node.feature >= 0) {
        if (static_cast<std::size_t>(node.feature) >= kPairFeatureDim) {
          throw std::runtime_error(context + ": feature index out of range");
        }
        if (node.left >= tree.size() || node.right >= tree.size()) {
          throw std::runtime_error(context + ": child index out of range");
        }
      } else if (node.leaf_value < 0.0 || node.leaf_value > 1.0) {
        throw std::runtime_error(context + ": leaf value outside [0, 1]");
      }
    }
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != sizeof(T)) {
    throw std::runtime_error("load_model: truncated file " + path);
  }
  return value;
}

}  // namespace

PairFeature build_pair_feature(const FeatureVector& f_i,
                               const FeatureVector& f_j) {
  PairFeature pair{};
  for (std::size_t d = 0; d < kEigenFeatureDim; ++d) {
    pair[d] = std::abs(f_i.eigen[d] - f_j.eigen[d]);
    pair[kEigenFeatureDim + d] = f_i.eigen[d];
    pair[2 * kEigenFeatureDim + d] = f_j.eigen[d];
  }
  for (std::size_t b = 0; b < kEsfBlockCount; ++b) {
    pair[3 * kEigenFeatureDim + b] = simd::histogram_intersection(
        f_i.esf.data() + b * kEsfBinsPerBlock,
        f_j.esf.data() + b * kEsfBinsPerBlock, kEsfBinsPerBlock);
  }
  return pair;
}

ForestModel train(const TrainingSet& set, const ForestParams& params,
                  std::uint64_t seed) {
  if (set.features.size() != set.labels.size()) {
    throw std::invalid_argument("train: features/labels size mismatch");
  }
  if (set.size() == 0) {
    throw std::invalid_argument("train: empty training set");
  }
  if (params.n_trees == 0) {
    throw std::invalid_argument("train: n_trees must be >= 1");
  }
  if (params.min_leaf == 0) {
    throw std::invalid_argument("train: min_leaf must be >= 1");
  }
  bool any_pos = false, any_neg = false;
  for (bool label : set.labels) (label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg) {
    throw std::invalid_argument("train: need both labels in the training set");
  }

  ForestModel model;
  model.seed = seed;
  model.trees.reserve(params.n_trees);
  std::array<double, kPairFeatureDim> importance{};

  const std::size_t n = set.size();
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    SeededRng rng(mix_seed(seed, t));
    std::vector<std::uint32_t> bootstrap(n);
    for (std::size_t i = 0; i < n; ++i) {
      bootstrap[i] = static_cast<std::uint32_t>(rng.bounded(n));
    }
    TreeBuilder builder(set, params, rng, importance);
    model.trees.push_back(builder.build(std::move(bootstrap)));
  }

  double total = 0.0;
  for (double v : importance) total += v;
  if (total > 0.0) {
    for (std::size_t f = 0; f < kPairFeatureDim; ++f) {
      model.importances[f] = importance[f] / total;
    }
  }
  return model;
}

double score(const ForestModel& model, const PairFeature& pair) {
  if (model.trees.empty()) {
    throw std::invalid_argument("score: model has no trees");
  }
  double sum = 0.0;
  for (const Tree& tree : model.trees) {
    std::uint32_t node = 0;
    while (tree[node].feature >= 0) {
      const TreeNode& n = tree[node];
      node = pair[static_cast<std::size_t>(n.feature)] <= n.threshold
                 ? n.left
                 : n.right;
    }
    sum += tree[node].leaf_value;
  }
  return sum / static_cast<double>(model.trees.size());
}

std::array<double, kPairFeatureDim> feature_importances(
    const ForestModel& model) {
  return model.importances;
}

void save_model(const ForestModel& model, const std::string& path) {
  validate_model(model, "save_model");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("save_model: cannot open " + path);
  }
  out.write(kModelMagic, kModelMagicLen);
  write_pod(out, kModelVersion);
  write_pod(out, model.feature_count);
  write_pod(out, model.seed);
  write_pod(out, static_cast<std::uint32_t>(model.trees.size()));
  out.write(reinterpret_cast<const char*>(model.importances.data()),
            sizeof(double) * kPairFeatureDim);
  for (const Tree& tree : model.trees) {
    write_pod(out, static_cast<std::uint32_t>(tree.size()));
    for (const TreeNode& node : tree) {
      write_pod(out, node.feature);
      write_pod(out, node.threshold);
      write_pod(out, node.leaf_value);
      write_pod(out, node.left);
      write_pod(out, node.right);
    }
  }
  if (!out) {
    throw std::runtime_error("save_model: write failed for " + path);
  }
}

ForestModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_model: cannot open " + path);
  }
  char head[kModelMagicLen] = {};
  in.read(head, kModelMagicLen);
  if (in.gcount() != static_cast<std::streamsize>(kModelMagicLen) ||
      std::memcmp(head, kModelMagic, kModelMagicLen) != 0) {
    throw std::runtime_error("load_model: bad magic in " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kModelVersion) {
    throw std::runtime_error("load_model: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  ForestModel model;
  model.feature_count = read_pod<std::uint32_t>(in, path);
  if (model.feature_count != kPairFeatureDim) {
    throw std::runtime_error("load_model: incompatible feature_count " +
                             std::to_string(model.feature_count) + " in " +
                             path);
  }
  model.seed = read_pod<std::uint64_t>(in, path);
  const auto n_trees = read_pod<std::uint32_t>(in, path);
  in.read(reinterpret_cast<char*>(model.importances.data()),
          sizeof(double) * kPairFeatureDim);
  if (in.gcount() !=
      static_cast<std::streamsize>(sizeof(double) * kPairFeatureDim)) {
    throw std::runtime_error("load_model: truncated file " + path);
  }
  model.trees.resize(n_trees);
  for (Tree& tree : model.trees) {
    const auto node_count = read_pod<std::uint32_t>(in, path);
    tree.resize(node_count);
    for (TreeNode& node : tree) {
      node.feature = read_pod<std::int32_t>(in, path);
      node.threshold = read_pod<double>(in, path);
      node.leaf_value = read_pod<double>(in, path);
      node.left = read_pod<std::uint32_t>(in, path);
      node.right = read_pod<std::uint32_t>(in, path);
    }
  }
  validate_model(model, "load_model");
  return model;
}

}  // namespace segloop
