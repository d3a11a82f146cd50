// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "segloop/types.hpp"

namespace segloop {

/// A pose-annotated scan sequence on disk. Scans stay on disk and are
/// loaded per index; poses are parsed eagerly so validation errors surface
/// at load time.
struct SequenceDataset {
  std::vector<std::string> scan_paths;  // lexicographic order
  Trajectory poses;                     // scan_index = position in order

  std::size_t size() const { return scan_paths.size(); }
  PointCloud load_scan(std::size_t pos) const;
};

/// Parses one pose row: 12 whitespace-separated reals, row-major [R|t].
/// The rotation block must be orthonormal within 1e-6; rows between that
/// bound and machine accuracy are re-orthonormalized by projecting onto
/// the nearest rotation (SVD), while already-clean rows are kept bit-exact
/// so a written trajectory reads back unchanged.
Pose parse_pose_row(const std::string& line);

/// One pose per line; scan_index = line position (0-based). Errors carry
/// the 1-based line number.
Trajectory load_pose_file(const std::string& path);

/// Writes poses in the same 12-real row format with round-trip precision.
/// Requires trajectory indices 0..n-1 (the row position encodes the index).
void save_pose_file(const std::string& path, const Trajectory& trajectory);

/// Scans are every regular file in scan_dir (sorted by name): ".bin" files
/// parse as float32 x y z intensity quadruples, anything else goes through
/// load_cloud. Throws when the scan and pose counts differ.
SequenceDataset load_sequence(const std::string& scan_dir,
                              const std::string& pose_file);

}  // namespace segloop
