// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/config.hpp"

#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "segloop/segmentation.hpp"

namespace segloop {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& value) {
  std::size_t used = 0;
  const double v = std::stod(value, &used);
  if (used != value.size()) {
    throw std::invalid_argument("trailing characters after number");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& value) {
  if (!value.empty() && value[0] == '-') {
    throw std::invalid_argument("value must be non-negative");
  }
  std::size_t used = 0;
  const std::uint64_t v = std::stoull(value, &used);
  if (used != value.size()) {
    throw std::invalid_argument("trailing characters after number");
  }
  return v;
}

std::size_t parse_size(const std::string& value) {
  return static_cast<std::size_t>(parse_u64(value));
}

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SEGLOOP_DOUBLE_KEY(name, field)                                   \
  Key {                                                                   \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_double(v); }, \
        [](const RunConfig& c) { return format_double(c.field); }         \
  }
#define SEGLOOP_SIZE_KEY(name, field)                                     \
  Key {                                                                   \
    name, [](RunConfig& c, const std::string& v) { c.field = parse_size(v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }        \
  }

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = {
      // Local cloud extraction.
      SEGLOOP_DOUBLE_KEY("radius", pipeline.radius),
      SEGLOOP_DOUBLE_KEY("boundary", pipeline.boundary),
      SEGLOOP_DOUBLE_KEY("voxel_leaf", pipeline.voxel_leaf),
      SEGLOOP_SIZE_KEY("min_points_per_voxel", pipeline.min_points_per_voxel),
      // Segmentation.
      SEGLOOP_DOUBLE_KEY("cluster_distance",
                         pipeline.segmentation.cluster_distance),
      SEGLOOP_SIZE_KEY("min_segment_points",
                       pipeline.segmentation.min_segment_points),
      SEGLOOP_SIZE_KEY("max_segment_points",
                       pipeline.segmentation.max_segment_points),
      Key{"ground_removal",
          [](RunConfig& c, const std::string& v) {
            c.pipeline.segmentation.ground_removal =
                ground_removal_from_string(v);
          },
          [](const RunConfig& c) {
            return to_string(c.pipeline.segmentation.ground_removal);
          }},
      SEGLOOP_DOUBLE_KEY("ground_height", pipeline.segmentation.ground_height),
      // Description.
      SEGLOOP_SIZE_KEY("esf_samples", pipeline.esf_samples),
      // Matching.
      SEGLOOP_SIZE_KEY("knn", pipeline.knn),
      Key{"classifier",
          [](RunConfig& c, const std::string& v) {
            c.pipeline.classifier = classifier_mode_from_string(v);
          },
          [](const RunConfig& c) { return to_string(c.pipeline.classifier); }},
      SEGLOOP_DOUBLE_KEY("l2_threshold", pipeline.l2_threshold),
      SEGLOOP_DOUBLE_KEY("w_threshold", pipeline.w_threshold),
      // Geometric verification.
      SEGLOOP_DOUBLE_KEY("resolution", pipeline.verify.resolution),
      SEGLOOP_SIZE_KEY("min_cluster_size", pipeline.verify.min_cluster_size),
      SEGLOOP_SIZE_KEY("max_iterations", pipeline.verify.max_iterations),
      // Pipeline.
      SEGLOOP_DOUBLE_KEY("scan_spacing", pipeline.scan_spacing),
      SEGLOOP_DOUBLE_KEY("exclusion_window", pipeline.exclusion_window),
      SEGLOOP_DOUBLE_KEY("duplicate_distance", pipeline.duplicate_distance),
      Key{"mode",
          [](RunConfig& c, const std::string& v) {
            c.pipeline.mode = pipeline_mode_from_string(v);
          },
          [](const RunConfig& c) { return to_string(c.pipeline.mode); }},
      Key{"seed",
          [](RunConfig& c, const std::string& v) {
            c.pipeline.seed = parse_u64(v);
          },
          [](const RunConfig& c) { return std::to_string(c.pipeline.seed); }},
      // Evaluation gates.
      SEGLOOP_DOUBLE_KEY("detection_gate_translation",
                         pipeline.detection_gate_translation),
      SEGLOOP_DOUBLE_KEY("detection_gate_rotation_deg",
                         pipeline.detection_gate_rotation_deg),
      // Training-pair generation.
      SEGLOOP_DOUBLE_KEY("correspondence_gate", pipeline.correspondence_gate),
      SEGLOOP_SIZE_KEY("negative_ratio", pipeline.negative_ratio),
      SEGLOOP_DOUBLE_KEY("revisit_radius", pipeline.revisit_radius),
      // Forest training.
      SEGLOOP_SIZE_KEY("n_trees", forest.n_trees),
      SEGLOOP_SIZE_KEY("max_depth", forest.max_depth),
      SEGLOOP_SIZE_KEY("min_leaf", forest.min_leaf),
  };
  return keys;
}

#undef SEGLOOP_DOUBLE_KEY
#undef SEGLOOP_SIZE_KEY

const Key* find_key(const std::string& name) {
  for (const Key& k : key_table()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

}  // namespace

PipelineMode pipeline_mode_from_string(const std::string& name) {
  if (name == "loop-closure") return PipelineMode::kLoopClosure;
  if (name == "localization") return PipelineMode::kLocalization;
  throw std::invalid_argument("unknown mode: " + name);
}

std::string to_string(PipelineMode mode) {
  switch (mode) {
    case PipelineMode::kLoopClosure:
      return "loop-closure";
    case PipelineMode::kLocalization:
      return "localization";
  }
  throw std::invalid_argument("invalid PipelineMode value");
}

ClassifierMode classifier_mode_from_string(const std::string& name) {
  if (name == "l2") return ClassifierMode::kL2;
  if (name == "forest") return ClassifierMode::kForest;
  throw std::invalid_argument("unknown classifier: " + name);
}

std::string to_string(ClassifierMode mode) {
  switch (mode) {
    case ClassifierMode::kL2:
      return "l2";
    case ClassifierMode::kForest:
      return "forest";
  }
  throw std::invalid_argument("invalid ClassifierMode value");
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    const std::string key_name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key_name.empty() || value.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": empty key or value");
    }
    const Key* key = find_key(key_name);
    if (!key) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": unknown key '" + key_name + "'");
    }
    try {
      key->set(config, value);
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": key '" + key_name + "': " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string config_to_string(const RunConfig& config) {
  std::ostringstream out;
  for (const Key& k : key_table()) {
    out << k.name << " = " << k.get(config) << "\n";
  }
  return out.str();
}

}  // namespace segloop
