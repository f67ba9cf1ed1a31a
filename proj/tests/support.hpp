// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

// Generators and small utilities shared by the test binaries.

#pragma once

#include "raylaplace/field.hpp"
#include "raylaplace/render.hpp"

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace raylaplace::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::uint32_t uniform_int(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
  return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
}

inline Vec3 uniform_vec(Rng& rng, double lo, double hi) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

inline Vec3 unit_vector(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

inline Aabb random_box(Rng& rng) {
  const Vec3 lo = uniform_vec(rng, -2.0, 0.0);
  return Aabb(lo, lo + uniform_vec(rng, 0.5, 3.0));
}

/// Random raw grids; densities straddle the softplus knee.
inline VoxelField random_field(Rng& rng, const Aabb& box, GridDims dims, double lo = -3.0,
                               double hi = 3.0) {
  VoxelField f(box, dims);
  for (float& v : f.raw_density.data) v = static_cast<float>(uniform(rng, lo, hi));
  for (Vec3f& c : f.raw_color.data) c = uniform_vec(rng, -2.0, 2.0).cast<float>();
  return f;
}

/// Ray from outside the box through a random interior point.
inline Ray ray_through(Rng& rng, const Aabb& box) {
  const Vec3 target = box.to_world(uniform_vec(rng, 0.1, 0.9));
  const Vec3 dir = unit_vector(rng);
  Ray r;
  r.origin = target - 2.0 * box.extent().norm() * dir;
  r.direction = dir;
  return r;
}

/// Smallest distance, in cell units, from u to an interior cell face of the grid.
inline double distance_to_cell_face(const GridDims& dims, const Vec3& u) {
  const std::uint32_t n[3] = {dims.nx, dims.ny, dims.nz};
  double best = 1e300;
  for (int a = 0; a < 3; ++a) {
    const double s = u[a] * double(n[a] - 1);
    best = std::min(best, std::abs(s - std::round(s)));
  }
  return best;
}

/// Fresh temporary directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("raylaplace_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace raylaplace::testing
