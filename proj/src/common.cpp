// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

namespace raylaplace {

Aabb::Aabb(const Vec3& lo, const Vec3& hi) : min_corner(lo), max_corner(hi) {
  if (!lo.allFinite() || !hi.allFinite() || !(hi.array() > lo.array()).all()) {
    throw std::invalid_argument("Aabb: max_corner must exceed min_corner on every axis");
  }
}

Vec3 Aabb::to_normalized(const Vec3& x) const {
  return ((x - min_corner).array() / extent().array()).matrix();
}

Vec3 Aabb::to_world(const Vec3& u) const {
  return min_corner + (u.array() * extent().array()).matrix();
}

std::optional<std::pair<double, double>> Aabb::intersect(const Vec3& origin,
                                                         const Vec3& direction) const {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (direction[a] == 0.0) {
      if (origin[a] < min_corner[a] || origin[a] > max_corner[a]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / direction[a];
    double near = (min_corner[a] - origin[a]) * inv;
    double far = (max_corner[a] - origin[a]) * inv;
    if (near > far) std::swap(near, far);
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return std::nullopt;
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RAYLAPLACE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) n = static_cast<unsigned>(v);
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(worker_count(), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto guarded = [&](std::size_t begin, std::size_t end) {
    try {
      fn(begin, end);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back([&guarded, begin, end] { guarded(begin, end); });
    }
    guarded(0, std::min(n, chunk));
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace raylaplace
