// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace raylaplace {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Mat3 = Eigen::Matrix3d;

/// Axis-aligned scene box. Field and grid lookups work in normalized
/// coordinates u in [0,1]^3 relative to this box.
struct Aabb {
  Vec3 min_corner{-1.0, -1.0, -1.0};
  Vec3 max_corner{1.0, 1.0, 1.0};

  Aabb() = default;
  Aabb(const Vec3& lo, const Vec3& hi);

  Vec3 extent() const { return max_corner - min_corner; }
  Vec3 center() const { return 0.5 * (min_corner + max_corner); }
  Vec3 to_normalized(const Vec3& x) const;
  Vec3 to_world(const Vec3& u) const;

  /// Parametric entry/exit distances of the ray, clipped to t >= 0.
  std::optional<std::pair<double, double>> intersect(const Vec3& origin,
                                                     const Vec3& direction) const;

  bool operator==(const Aabb& other) const = default;
};

inline bool inside_unit_cube(const Vec3& u) {
  return u.x() >= 0.0 && u.x() <= 1.0 && u.y() >= 0.0 && u.y() <= 1.0 && u.z() >= 0.0 &&
         u.z() <= 1.0;
}

struct GridDims {
  std::uint32_t nx = 2, ny = 2, nz = 2;

  static GridDims cube(std::uint32_t n) { return {n, n, n}; }
  std::size_t count() const { return std::size_t(nx) * ny * nz; }
  std::size_t index(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return i + std::size_t(nx) * (j + std::size_t(ny) * k);
  }
  /// Normalized coordinate of vertex (i, j, k).
  Vec3 vertex_position(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return {double(i) / (nx - 1), double(j) / (ny - 1), double(k) / (nz - 1)};
  }
  bool operator==(const GridDims& other) const = default;
};

/// Dense vertex grid, x-fastest row-major.
template <class T>
struct Grid3 {
  GridDims dims;
  std::vector<T> data;

  Grid3() = default;
  Grid3(GridDims d, const T& fill) : dims(d), data(d.count(), fill) {}

  T& at(std::uint32_t i, std::uint32_t j, std::uint32_t k) { return data[dims.index(i, j, k)]; }
  const T& at(std::uint32_t i, std::uint32_t j, std::uint32_t k) const {
    return data[dims.index(i, j, k)];
  }
};

/// Row-major 2D image plane.
template <class T>
struct Plane {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<T> data;

  Plane() = default;
  Plane(std::uint32_t w, std::uint32_t h, const T& fill = T{})
      : width(w), height(h), data(std::size_t(w) * h, fill) {}

  T& at(std::uint32_t x, std::uint32_t y) { return data[std::size_t(y) * width + x]; }
  const T& at(std::uint32_t x, std::uint32_t y) const { return data[std::size_t(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

using ImageRGB = Plane<Vec3f>;
using PlaneF = Plane<float>;

/// splitmix64 finalizer; used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// Worker count: RAYLAPLACE_THREADS if set, else hardware concurrency.
unsigned worker_count();

/// Runs fn(begin, end) over contiguous chunks of [0, n) on worker threads.
/// Chunk boundaries depend on the worker count, so callers must write to
/// disjoint outputs if the result has to be thread-count independent.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace raylaplace
