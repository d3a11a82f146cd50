// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

namespace segloop::simd {

/// Kernel backends. `kScalar` is the reference implementation every other
/// backend must agree with: map-style kernels bit-exactly, reductions to
/// 1e-12 relative (their accumulation order differs).
enum class Backend {
  kScalar,
  kAvx2,
};

/// Backend selected for this process. Defaults to the best one the CPU
/// supports; the SEGLOOP_SIMD environment variable ("scalar", "avx2",
/// "auto") overrides it before first use.
Backend active_backend();

/// Forces a backend, primarily for equivalence tests. Throws
/// std::runtime_error if the CPU cannot run it.
void force_backend(Backend backend);

/// True if the running CPU supports the backend.
bool backend_supported(Backend backend);

std::string backend_name(Backend backend);

// Point kernels operate on interleaved xyz buffers (x0 y0 z0 x1 y1 z1 ...)
// of `n` points. `in` and `out` may alias only if identical.

/// out_i = R * p_i + t. `rot` is row-major 3x3.
void transform_points(const double* xyz_in, std::size_t n,
                      const double rot[9], const double trans[3],
                      double* xyz_out);

/// out_i = (x_i - cx)^2 + (y_i - cy)^2 (horizontal squared distance).
void horizontal_sq_dists(const double* xyz, std::size_t n, double cx,
                         double cy, double* out);

/// Componentwise sum of all points into out[3]. Empty input gives zeros.
void sum_points(const double* xyz, std::size_t n, double out[3]);

/// Axis-aligned bounds. n must be >= 1.
void minmax_points(const double* xyz, std::size_t n, double mn[3],
                   double mx[3]);

// Vector kernels over plain double arrays.

/// sum_i min(a_i, b_i) — histogram intersection for unit-mass histograms.
double histogram_intersection(const double* a, const double* b,
                              std::size_t n);

/// sum_i (a_i - b_i)^2.
double squared_l2(const double* a, const double* b, std::size_t n);

namespace detail {

// Per-backend entry points, exposed so the equivalence tests can pin each
// side explicitly instead of going through the dispatch table.
struct KernelTable {
  void (*transform_points)(const double*, std::size_t, const double*,
                           const double*, double*);
  void (*horizontal_sq_dists)(const double*, std::size_t, double, double,
                              double*);
  void (*sum_points)(const double*, std::size_t, double*);
  void (*minmax_points)(const double*, std::size_t, double*, double*);
  double (*histogram_intersection)(const double*, const double*, std::size_t);
  double (*squared_l2)(const double*, const double*, std::size_t);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();  // valid only if backend_supported(kAvx2)
const KernelTable& table_for(Backend backend);

}  // namespace detail

}  // namespace segloop::simd
