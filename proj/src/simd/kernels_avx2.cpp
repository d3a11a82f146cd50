// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 kernels. Map-style kernels replicate the scalar operation order per
// lane (mul/add intrinsics, no FMA) so results are bit-identical to the
// reference; reduction kernels use four-lane accumulators and are checked
// to 1e-12 relative instead.

#include "segloop/simd/kernels.hpp"

#ifdef SEGLOOP_HAVE_AVX2

#include <immintrin.h>

#include <algorithm>

namespace segloop::simd::detail {
namespace {

// Deinterleaves points i..i+3 of an xyz stream into X/Y/Z lanes. Reads 13
// doubles starting at base, so callers must keep one extra point past the
// block (the main loops run while i + 4 < n).
inline void load_xyz4(const double* base, __m256d& x, __m256d& y,
                      __m256d& z) {
  const __m256d r0 = _mm256_loadu_pd(base + 0);   // x0 y0 z0 x1
  const __m256d r1 = _mm256_loadu_pd(base + 3);   // x1 y1 z1 x2
  const __m256d r2 = _mm256_loadu_pd(base + 6);   // x2 y2 z2 x3
  const __m256d r3 = _mm256_loadu_pd(base + 9);   // x3 y3 z3 --
  const __m256d t0 = _mm256_unpacklo_pd(r0, r1);  // x0 x1 | z0 z1
  const __m256d t1 = _mm256_unpackhi_pd(r0, r1);  // y0 y1 | -- --
  const __m256d t2 = _mm256_unpacklo_pd(r2, r3);  // x2 x3 | z2 z3
  const __m256d t3 = _mm256_unpackhi_pd(r2, r3);  // y2 y3 | -- --
  x = _mm256_permute2f128_pd(t0, t2, 0x20);
  y = _mm256_permute2f128_pd(t1, t3, 0x20);
  z = _mm256_permute2f128_pd(t0, t2, 0x31);
}

inline void store_xyz4(double* base, __m256d x, __m256d y, __m256d z) {
  const __m256d xy = _mm256_unpacklo_pd(x, y);    // x0 y0 | x2 y2
  const __m256d zx = _mm256_shuffle_pd(z, x, 0xA);  // z0 x1 | z2 x3
  const __m256d yz = _mm256_shuffle_pd(y, z, 0xF);  // y1 z1 | y3 z3
  _mm256_storeu_pd(base + 0, _mm256_permute2f128_pd(xy, zx, 0x20));
  _mm256_storeu_pd(base + 4, _mm256_permute2f128_pd(yz, xy, 0x30));
  _mm256_storeu_pd(base + 8, _mm256_permute2f128_pd(zx, yz, 0x31));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void transform_points_avx2(const double* in, std::size_t n, const double* rot,
                           const double* trans, double* out) {
  std::size_t i = 0;
  if (n >= 5) {
    const __m256d r00 = _mm256_set1_pd(rot[0]), r01 = _mm256_set1_pd(rot[1]),
                  r02 = _mm256_set1_pd(rot[2]), r10 = _mm256_set1_pd(rot[3]),
                  r11 = _mm256_set1_pd(rot[4]), r12 = _mm256_set1_pd(rot[5]),
                  r20 = _mm256_set1_pd(rot[6]), r21 = _mm256_set1_pd(rot[7]),
                  r22 = _mm256_set1_pd(rot[8]);
    const __m256d tx = _mm256_set1_pd(trans[0]),
                  ty = _mm256_set1_pd(trans[1]),
                  tz = _mm256_set1_pd(trans[2]);
    for (; i + 4 < n; i += 4) {
      __m256d x, y, z;
      load_xyz4(in + 3 * i, x, y, z);
      const __m256d ox = _mm256_add_pd(
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(x, r00),
                                      _mm256_mul_pd(y, r01)),
                        _mm256_mul_pd(z, r02)),
          tx);
      const __m256d oy = _mm256_add_pd(
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(x, r10),
                                      _mm256_mul_pd(y, r11)),
                        _mm256_mul_pd(z, r12)),
          ty);
      const __m256d oz = _mm256_add_pd(
          _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(x, r20),
                                      _mm256_mul_pd(y, r21)),
                        _mm256_mul_pd(z, r22)),
          tz);
      store_xyz4(out + 3 * i, ox, oy, oz);
    }
  }
  for (; i < n; ++i) {
    const double x = in[3 * i + 0];
    const double y = in[3 * i + 1];
    const double z = in[3 * i + 2];
    out[3 * i + 0] = ((x * rot[0] + y * rot[1]) + z * rot[2]) + trans[0];
    out[3 * i + 1] = ((x * rot[3] + y * rot[4]) + z * rot[5]) + trans[1];
    out[3 * i + 2] = ((x * rot[6] + y * rot[7]) + z * rot[8]) + trans[2];
  }
}

void horizontal_sq_dists_avx2(const double* xyz, std::size_t n, double cx,
                              double cy, double* out) {
  std::size_t i = 0;
  if (n >= 5) {
    const __m256d vcx = _mm256_set1_pd(cx);
    const __m256d vcy = _mm256_set1_pd(cy);
    for (; i + 4 < n; i += 4) {
      __m256d x, y, z;
      load_xyz4(xyz + 3 * i, x, y, z);
      const __m256d dx = _mm256_sub_pd(x, vcx);
      const __m256d dy = _mm256_sub_pd(y, vcy);
      _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_mul_pd(dx, dx),
                                              _mm256_mul_pd(dy, dy)));
    }
  }
  for (; i < n; ++i) {
    const double dx = xyz[3 * i + 0] - cx;
    const double dy = xyz[3 * i + 1] - cy;
    out[i] = dx * dx + dy * dy;
  }
}

void sum_points_avx2(const double* xyz, std::size_t n, double* out) {
  __m256d ax = _mm256_setzero_pd();
  __m256d ay = _mm256_setzero_pd();
  __m256d az = _mm256_setzero_pd();
  std::size_t i = 0;
  if (n >= 5) {
    for (; i + 4 < n; i += 4) {
      __m256d x, y, z;
      load_xyz4(xyz + 3 * i, x, y, z);
      ax = _mm256_add_pd(ax, x);
      ay = _mm256_add_pd(ay, y);
      az = _mm256_add_pd(az, z);
    }
  }
  double sx = hsum(ax), sy = hsum(ay), sz = hsum(az);
  for (; i < n; ++i) {
    sx += xyz[3 * i + 0];
    sy += xyz[3 * i + 1];
    sz += xyz[3 * i + 2];
  }
  out[0] = sx;
  out[1] = sy;
  out[2] = sz;
}

void minmax_points_avx2(const double* xyz, std::size_t n, double* mn,
                        double* mx) {
  mn[0] = mx[0] = xyz[0];
  mn[1] = mx[1] = xyz[1];
  mn[2] = mx[2] = xyz[2];
  std::size_t i = 1;
  if (n >= 6) {
    __m256d mnx = _mm256_set1_pd(xyz[0]), mxx = mnx;
    __m256d mny = _mm256_set1_pd(xyz[1]), mxy = mny;
    __m256d mnz = _mm256_set1_pd(xyz[2]), mxz = mnz;
    for (; i + 4 < n; i += 4) {
      __m256d x, y, z;
      load_xyz4(xyz + 3 * i, x, y, z);
      mnx = _mm256_min_pd(mnx, x);
      mxx = _mm256_max_pd(mxx, x);
      mny = _mm256_min_pd(mny, y);
      mxy = _mm256_max_pd(mxy, y);
      mnz = _mm256_min_pd(mnz, z);
      mxz = _mm256_max_pd(mxz, z);
    }
    alignas(32) double b[4];
    const auto reduce = [&b](__m256d v, bool take_min) {
      _mm256_store_pd(b, v);
      return take_min ? std::min(std::min(b[0], b[1]), std::min(b[2], b[3]))
                      : std::max(std::max(b[0], b[1]), std::max(b[2], b[3]));
    };
    mn[0] = std::min(mn[0], reduce(mnx, true));
    mx[0] = std::max(mx[0], reduce(mxx, false));
    mn[1] = std::min(mn[1], reduce(mny, true));
    mx[1] = std::max(mx[1], reduce(mxy, false));
    mn[2] = std::min(mn[2], reduce(mnz, true));
    mx[2] = std::max(mx[2], reduce(mxz, false));
  }
  for (; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = xyz[3 * i + c];
      mn[c] = std::min(mn[c], v);
      mx[c] = std::max(mx[c], v);
    }
  }
}

double histogram_intersection_avx2(const double* a, const double* b,
                                   std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(
        acc, _mm256_min_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    s += std::min(a[i], b[i]);
  }
  return s;
}

double squared_l2_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table = {
      transform_points_avx2, horizontal_sq_dists_avx2, sum_points_avx2,
      minmax_points_avx2,    histogram_intersection_avx2,
      squared_l2_avx2,
  };
  return table;
}

}  // namespace segloop::simd::detail

#else  // SEGLOOP_HAVE_AVX2

namespace segloop::simd::detail {

// Fallback so the dispatcher links on non-AVX2 builds; never selected at
// runtime because backend_supported(kAvx2) is false.
const KernelTable& avx2_table() { return scalar_table(); }

}  // namespace segloop::simd::detail

#endif  // SEGLOOP_HAVE_AVX2
