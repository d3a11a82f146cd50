// Copyright (c) 2026 The segloop authors
// SPDX-License-Identifier: Apache-2.0

#include "segloop/descriptors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "segloop/rng.hpp"
#include "segloop/simd/kernels.hpp"

namespace segloop {

namespace {

constexpr int kGrid = 64;
constexpr std::size_t kMaxDegenerateRetries = 5;

// Block layout inside the 640-entry vector.
enum EsfBlock : std::size_t {
  kD2In = 0,
  kD2Out,
  kD2Mixed,
  kD2Ratio,
  kD3In,
  kD3Out,
  kD3Mixed,
  kA3In,
  kA3Out,
  kA3Mixed,
};

enum class TraceClass { kIn, kOut, kMixed };

struct OccupancyGrid {
  std::vector<std::uint64_t> bits;
  double origin[3];
  double voxel;

  OccupancyGrid() : bits(kGrid * kGrid * kGrid / 64, 0) {}

  static std::size_t flat(int x, int y, int z) {
    return (static_cast<std::size_t>(x) * kGrid + static_cast<std::size_t>(y)) *
               kGrid +
           static_cast<std::size_t>(z);
  }

  void set(int x, int y, int z) {
    const std::size_t f = flat(x, y, z);
    bits[f >> 6] |= (1ull << (f & 63));
  }

  bool test(int x, int y, int z) const {
    const std::size_t f = flat(x, y, z);
    return (bits[f >> 6] >> (f & 63)) & 1ull;
  }

  int axis_index(double v, int axis) const {
    const int idx = static_cast<int>(std::floor((v - origin[axis]) / voxel));
    return std::clamp(idx, 0, kGrid - 1);
  }
};

struct TraceResult {
  std::size_t occupied = 0;
  std::size_t total = 0;
};

/// Walks the voxels strictly between the two endpoint voxels of segment
/// a -> b and counts how many are occupied.
TraceResult trace_line(const OccupancyGrid& grid, const Point3& a,
                       const Point3& b) {
  TraceResult result;
  int va[3] = {grid.axis_index(a.x, 0), grid.axis_index(a.y, 1),
               grid.axis_index(a.z, 2)};
  const int vb[3] = {grid.axis_index(b.x, 0), grid.axis_index(b.y, 1),
                     grid.axis_index(b.z, 2)};
  if (va[0] == vb[0] && va[1] == vb[1] && va[2] == vb[2]) return result;

  const double pa[3] = {a.x, a.y, a.z};
  const double pb[3] = {b.x, b.y, b.z};
  double t_max[3], t_delta[3];
  int step[3];
  for (int i = 0; i < 3; ++i) {
    const double dir = pb[i] - pa[i];
    if (dir > 0.0) {
      step[i] = 1;
      const double boundary = grid.origin[i] + (va[i] + 1) * grid.voxel;
      t_max[i] = (boundary - pa[i]) / dir;
      t_delta[i] = grid.voxel / dir;
    } else if (dir < 0.0) {
      step[i] = -1;
      const double boundary = grid.origin[i] + va[i] * grid.voxel;
      t_max[i] = (boundary - pa[i]) / dir;
      t_delta[i] = grid.voxel / -dir;
    } else {
      step[i] = 0;
      t_max[i] = std::numeric_limits<double>::infinity();
      t_delta[i] = std::numeric_limits<double>::infinity();
    }
  }

  // Worst case crosses every slab once per axis; the guard only matters
  // under floating-point edge cases.
  for (int guard = 0; guard < 3 * kGrid + 8; ++guard) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    va[axis] += step[axis];
    t_max[axis] += t_delta[axis];
    if (va[axis] < 0 || va[axis] >= kGrid) break;
    if (va[0] == vb[0] && va[1] == vb[1] && va[2] == vb[2]) break;
    ++result.total;
    if (grid.test(va[0], va[1], va[2])) ++result.occupied;
  }
  return result;
}

TraceClass classify(std::size_t occupied, std::size_t total) {
  if (total == 0 || occupied == total) return TraceClass::kIn;
  if (occupied == 0) return TraceClass::kOut;
  return TraceClass::kMixed;
}

std::size_t block_for(EsfBlock family_in, TraceClass cls) {
  return static_cast<std::size_t>(family_in) + static_cast<std::size_t>(cls);
}

void add_entry(std::array<double, kEsfFeatureDim>& hist,
               std::array<std::size_t, kEsfBlockCount>& counts,
               std::size_t block, double value) {
  if (!(value >= 0.0)) value = 0.0;
  auto bin = static_cast<std::size_t>(value * kGrid);
  if (bin >= kEsfBinsPerBlock) bin = kEsfBinsPerBlock - 1;
  hist[block * kEsfBinsPerBlock + bin] += 1.0;
  ++counts[block];
}

struct Triplet {
  std::size_t i, j, k;
};

Triplet draw_triplet(SeededRng& rng, std::size_t n) {
  Triplet t{};
  t.i = static_cast<std::size_t>(rng.bounded(n));
  do {
    t.j = static_cast<std::size_t>(rng.bounded(n));
  } while (t.j == t.i);
  do {
    t.k = static_cast<std::size_t>(rng.bounded(n));
  } while (t.k == t.i || t.k == t.j);
  return t;
}

double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
  const Eigen::Vector3d u = to_eigen(b) - to_eigen(a);
  const Eigen::Vector3d v = to_eigen(c) - to_eigen(a);
  return 0.5 * u.cross(v).norm();
}

double angle_at(const Point3& vertex, const Point3& p, const Point3& q) {
  const Eigen::Vector3d u = to_eigen(p) - to_eigen(vertex);
  const Eigen::Vector3d v = to_eigen(q) - to_eigen(vertex);
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::acos(c);
}

Eigen::Matrix3d centered_covariance(const std::vector<Point3>& pts,
                                    Eigen::Vector3d& mean) {
  mean = Eigen::Vector3d::Zero();
  for (const Point3& p : pts) mean += to_eigen(p);
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Point3& p : pts) {
    const Eigen::Vector3d d = to_eigen(p) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  return cov;
}

/// Re-expresses the segment in its covariance eigenbasis, centered on the
/// centroid. Any rigid motion of the input rotates the basis with it, so the
/// canonical coordinates — and everything voxelized from them — are
/// rigid-motion invariant (up to eigensolver round-off). Axis order and sign
/// are irrelevant downstream: permuting or mirroring the grid permutes or
/// mirrors the traces without changing any occupancy count.
std::vector<Point3> canonical_points(const std::vector<Point3>& pts) {
  Eigen::Vector3d mean;
  const Eigen::Matrix3d cov = centered_covariance(pts, mean);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Matrix3d basis = solver.eigenvectors();
  std::vector<Point3> canon(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    canon[i] = from_eigen(
        (basis.transpose() * (to_eigen(pts[i]) - mean)).eval());
  }
  return canon;
}

constexpr char kFeatureMagic[] = "SEGFV1\n";
constexpr std::size_t kFeatureMagicLen = 7;

static_assert(std::endian::native == std::endian::little,
              "feature IO assumes a little-endian host");

}  // namespace

std::array<double, kEigenFeatureDim> eigenvalue_features(const Segment& seg) {
  if (seg.points.empty()) {
    throw std::invalid_argument("eigenvalue_features: empty segment");
  }
  Eigen::Vector3d mean;
  const Eigen::Matrix3d cov = centered_covariance(seg.points.points, mean);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  // Ascending from the solver; we want l1 >= l2 >= l3 >= 0.
  double l1 = std::max(0.0, solver.eigenvalues()(2));
  double l2 = std::max(0.0, solver.eigenvalues()(1));
  double l3 = std::max(0.0, solver.eigenvalues()(0));
  const double sum = l1 + l2 + l3;
  if (!(sum > 0.0)) {
    // Coincident points: rank-0 limit matches the rank-1 hierarchy.
    return {1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  }
  l1 /= sum;
  l2 /= sum;
  l3 /= sum;

  const auto xlnx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  std::array<double, kEigenFeatureDim> f{};
  f[0] = (l1 - l2) / l1;
  f[1] = (l2 - l3) / l1;
  f[2] = l3 / l1;
  f[3] = std::cbrt(l1 * l2 * l3);
  f[4] = (l1 - l3) / l1;
  f[5] = -(xlnx(l1) + xlnx(l2) + xlnx(l3));
  f[6] = l3;  // eigenvalues already sum to 1
  return f;
}

std::array<double, kEsfFeatureDim> esf_features(const Segment& seg,
                                                std::size_t sample_count,
                                                std::uint64_t rng_seed,
                                                EsfSampleStats* stats) {
  const std::size_t n = seg.points.size();
  if (n < 3) {
    throw std::invalid_argument("esf_features: segment needs >= 3 points");
  }
  if (sample_count == 0) {
    throw std::invalid_argument("esf_features: sample_count must be >= 1");
  }

  std::array<double, kEsfFeatureDim> hist{};
  std::array<std::size_t, kEsfBlockCount> counts{};

  const std::vector<Point3> canon = canonical_points(seg.points.points);
  double mn[3], mx[3];
  simd::minmax_points(reinterpret_cast<const double*>(canon.data()), n, mn,
                      mx);
  const double ext[3] = {mx[0] - mn[0], mx[1] - mn[1], mx[2] - mn[2]};
  const double diameter =
      std::sqrt(ext[0] * ext[0] + ext[1] * ext[1] + ext[2] * ext[2]);
  if (!(diameter > 0.0)) {
    // All points coincide; the degenerate all-zero descriptor is legal.
    if (stats) {
      stats->block_counts = counts;
      stats->diameter = 0.0;
    }
    return hist;
  }

  OccupancyGrid grid;
  const double side = std::max({ext[0], ext[1], ext[2]}) * (1.0 + 1e-12);
  grid.voxel = side / kGrid;
  for (int i = 0; i < 3; ++i) {
    const double center = 0.5 * (mn[i] + mx[i]);
    grid.origin[i] = center - 0.5 * side;
  }
  for (const Point3& p : canon) {
    const int cx = grid.axis_index(p.x, 0);
    const int cy = grid.axis_index(p.y, 1);
    const int cz = grid.axis_index(p.z, 2);
    // One-voxel dilation stabilizes trace classes under re-voxelization.
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          const int x = cx + dx, y = cy + dy, z = cz + dz;
          if (x < 0 || x >= kGrid || y < 0 || y >= kGrid || z < 0 ||
              z >= kGrid) {
            continue;
          }
          grid.set(x, y, z);
        }
      }
    }
  }

  const double area_floor = 1e-12 * diameter * diameter;
  SeededRng rng(rng_seed);
  const std::vector<Point3>& pts = canon;
  for (std::size_t s = 0; s < sample_count; ++s) {
    const Triplet first = draw_triplet(rng, n);

    // D2 always uses the primary pair so the main stream stays aligned
    // across geometrically perturbed copies of a segment.
    {
      const Point3& a = pts[first.i];
      const Point3& b = pts[first.j];
      const double d = std::sqrt(squared_norm(a, b));
      const TraceResult tr = trace_line(grid, a, b);
      add_entry(hist, counts, block_for(kD2In, classify(tr.occupied, tr.total)),
                d / diameter);
      const double ratio =
          tr.total == 0
              ? 1.0
              : static_cast<double>(tr.occupied) / static_cast<double>(tr.total);
      add_entry(hist, counts, kD2Ratio, ratio);
    }

    // Degenerate triplets are resampled from a per-sample substream so the
    // primary stream consumption never depends on geometry.
    Triplet t = first;
    double area = triangle_area(pts[t.i], pts[t.j], pts[t.k]);
    if (area <= area_floor) {
      SeededRng retry_rng(mix_seed(rng_seed, 0xe5f00000ull + s));
      for (std::size_t r = 0; r < kMaxDegenerateRetries && area <= area_floor;
           ++r) {
        t = draw_triplet(retry_rng, n);
        area = triangle_area(pts[t.i], pts[t.j], pts[t.k]);
      }
    }

    const Point3& pi = pts[t.i];
    const Point3& pj = pts[t.j];
    const Point3& pk = pts[t.k];
    const TraceResult e_ij = trace_line(grid, pi, pj);
    const TraceResult e_jk = trace_line(grid, pj, pk);
    const TraceResult e_ki = trace_line(grid, pk, pi);

    const std::size_t occ3 = e_ij.occupied + e_jk.occupied + e_ki.occupied;
    const std::size_t tot3 = e_ij.total + e_jk.total + e_ki.total;
    add_entry(hist, counts, block_for(kD3In, classify(occ3, tot3)),
              std::sqrt(area) / diameter);

    // Each angle is classified by the trace of its opposite edge.
    add_entry(hist, counts,
              block_for(kA3In, classify(e_jk.occupied, e_jk.total)),
              angle_at(pi, pj, pk) / std::numbers::pi);
    add_entry(hist, counts,
              block_for(kA3In, classify(e_ki.occupied, e_ki.total)),
              angle_at(pj, pk, pi) / std::numbers::pi);
    add_entry(hist, counts,
              block_for(kA3In, classify(e_ij.occupied, e_ij.total)),
              angle_at(pk, pi, pj) / std::numbers::pi);
  }

  for (std::size_t b = 0; b < kEsfBlockCount; ++b) {
    double mass = 0.0;
    for (std::size_t k = 0; k < kEsfBinsPerBlock; ++k) {
      mass += hist[b * kEsfBinsPerBlock + k];
    }
    if (mass > 0.0) {
      for (std::size_t k = 0; k < kEsfBinsPerBlock; ++k) {
        hist[b * kEsfBinsPerBlock + k] /= mass;
      }
    }
  }
  if (stats) {
    stats->block_counts = counts;
    stats->diameter = diameter;
  }
  return hist;
}

Segment describe(const Segment& seg, std::size_t sample_count,
                 std::uint64_t rng_seed) {
  Segment out = seg;
  FeatureVector f;
  f.eigen = eigenvalue_features(seg);
  f.esf = esf_features(seg, sample_count, rng_seed);
  out.feature = f;
  return out;
}

void save_features(const std::string& path,
                   const std::vector<FeatureVector>& features) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("save_features: cannot open " + path);
  }
  out.write(kFeatureMagic, kFeatureMagicLen);
  const auto count = static_cast<std::uint64_t>(features.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const FeatureVector& f : features) {
    out.write(reinterpret_cast<const char*>(f.eigen.data()),
              sizeof(double) * kEigenFeatureDim);
    out.write(reinterpret_cast<const char*>(f.esf.data()),
              sizeof(double) * kEsfFeatureDim);
  }
  if (!out) {
    throw std::runtime_error("save_features: write failed for " + path);
  }
}

std::vector<FeatureVector> load_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_features: cannot open " + path);
  }
  char head[kFeatureMagicLen] = {};
  in.read(head, kFeatureMagicLen);
  if (in.gcount() != static_cast<std::streamsize>(kFeatureMagicLen) ||
      std::memcmp(head, kFeatureMagic, kFeatureMagicLen) != 0) {
    throw std::runtime_error("load_features: bad magic in " + path);
  }
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (in.gcount() != sizeof(count)) {
    throw std::runtime_error("load_features: truncated header in " + path);
  }
  std::vector<FeatureVector> features(count);
  for (FeatureVector& f : features) {
    in.read(reinterpret_cast<char*>(f.eigen.data()),
            sizeof(double) * kEigenFeatureDim);
    in.read(reinterpret_cast<char*>(f.esf.data()),
            sizeof(double) * kEsfFeatureDim);
    if (!in) {
      throw std::runtime_error("load_features: truncated payload in " + path);
    }
  }
  return features;
}

}  // namespace segloop
