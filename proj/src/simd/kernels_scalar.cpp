// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Compiled without FMA contraction so that the AVX2
// variants, which mirror the operation order lane by lane, can be checked
// for bit-identical results on the map-style kernels.

#include "segloop/simd/kernels.hpp"

#include <algorithm>

namespace segloop::simd::detail {
namespace {

void transform_points_scalar(const double* in, std::size_t n,
                             const double* rot, const double* trans,
                             double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[3 * i + 0];
    const double y = in[3 * i + 1];
    const double z = in[3 * i + 2];
    out[3 * i + 0] = ((x * rot[0] + y * rot[1]) + z * rot[2]) + trans[0];
    out[3 * i + 1] = ((x * rot[3] + y * rot[4]) + z * rot[5]) + trans[1];
    out[3 * i + 2] = ((x * rot[6] + y * rot[7]) + z * rot[8]) + trans[2];
  }
}

void horizontal_sq_dists_scalar(const double* xyz, std::size_t n, double cx,
                                double cy, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xyz[3 * i + 0] - cx;
    const double dy = xyz[3 * i + 1] - cy;
    out[i] = dx * dx + dy * dy;
  }
}

void sum_points_scalar(const double* xyz, std::size_t n, double* out) {
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xyz[3 * i + 0];
    sy += xyz[3 * i + 1];
    sz += xyz[3 * i + 2];
  }
  out[0] = sx;
  out[1] = sy;
  out[2] = sz;
}

void minmax_points_scalar(const double* xyz, std::size_t n, double* mn,
                          double* mx) {
  mn[0] = mx[0] = xyz[0];
  mn[1] = mx[1] = xyz[1];
  mn[2] = mx[2] = xyz[2];
  for (std::size_t i = 1; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = xyz[3 * i + c];
      mn[c] = std::min(mn[c], v);
      mx[c] = std::max(mx[c], v);
    }
  }
}

double histogram_intersection_scalar(const double* a, const double* b,
                                     std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::min(a[i], b[i]);
  }
  return acc;
}

double squared_l2_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      transform_points_scalar, horizontal_sq_dists_scalar, sum_points_scalar,
      minmax_points_scalar,    histogram_intersection_scalar,
      squared_l2_scalar,
  };
  return table;
}

}  // namespace segloop::simd::detail
