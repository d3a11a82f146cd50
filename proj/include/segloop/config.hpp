// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "segloop/forest.hpp"
#include "segloop/pipeline.hpp"

namespace segloop {

/// Everything a run needs: pipeline parameters plus forest training
/// parameters. Defaults are the standard operating point; see README for
/// which values are tuned rather than standard.
struct RunConfig {
  PipelineConfig pipeline;
  ForestParams forest;
};

PipelineMode pipeline_mode_from_string(const std::string& name);
std::string to_string(PipelineMode mode);
ClassifierMode classifier_mode_from_string(const std::string& name);
std::string to_string(ClassifierMode mode);

/// Parses a flat `key = value` config. `#` starts a comment, blank lines
/// are skipped, later assignments override earlier ones. Unknown keys and
/// malformed values throw std::runtime_error naming the line, so a typo
/// can never silently fall back to a default.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Serializes every key. parse_config(config_to_string(c)) reproduces c
/// exactly (doubles are written with round-trip precision).
std::string config_to_string(const RunConfig& config);

}  // namespace segloop
