// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "segloop/simd/kernels.hpp"

namespace segloop::simd {
namespace {

bool cpu_has_avx2() {
#if defined(SEGLOOP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend env_or_default_backend() {
  const char* env = std::getenv("SEGLOOP_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::kScalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::kAvx2;
    // "auto" or anything unrecognized falls through to detection.
  }
  return cpu_has_avx2() ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{env_or_default_backend()};
  return slot;
}

}  // namespace

Backend active_backend() { return backend_slot().load(); }

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

void force_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw std::runtime_error("simd backend not supported on this CPU: " +
                             backend_name(backend));
  }
  backend_slot().store(backend);
}

std::string backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

namespace detail {
const KernelTable& table_for(Backend backend) {
  return backend == Backend::kAvx2 ? avx2_table() : scalar_table();
}
}  // namespace detail

namespace {
const detail::KernelTable& active_table() {
  return detail::table_for(active_backend());
}
}  // namespace

void transform_points(const double* xyz_in, std::size_t n, const double rot[9],
                      const double trans[3], double* xyz_out) {
  active_table().transform_points(xyz_in, n, rot, trans, xyz_out);
}

void horizontal_sq_dists(const double* xyz, std::size_t n, double cx,
                         double cy, double* out) {
  active_table().horizontal_sq_dists(xyz, n, cx, cy, out);
}

void sum_points(const double* xyz, std::size_t n, double out[3]) {
  if (n == 0) {
    out[0] = out[1] = out[2] = 0.0;
    return;
  }
  active_table().sum_points(xyz, n, out);
}

void minmax_points(const double* xyz, std::size_t n, double mn[3],
                   double mx[3]) {
  if (n == 0) {
    throw std::invalid_argument("minmax_points: empty input");
  }
  active_table().minmax_points(xyz, n, mn, mx);
}

double histogram_intersection(const double* a, const double* b,
                              std::size_t n) {
  return active_table().histogram_intersection(a, b, n);
}

double squared_l2(const double* a, const double* b, std::size_t n) {
  return active_table().squared_l2(a, b, n);
}

}  // namespace segloop::simd
