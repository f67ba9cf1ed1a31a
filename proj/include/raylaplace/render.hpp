// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/common.hpp"
#include "raylaplace/field.hpp"

#include <limits>
#include <span>

namespace raylaplace {

struct UncertaintyField;

/// Pinhole camera, OpenCV convention: +z forward, +x right, +y down.
struct Camera {
  Mat3 rotation = Mat3::Identity();  ///< world_from_camera
  Vec3 translation = Vec3::Zero();   ///< camera center in world
  double fx = 1.0, fy = 1.0;
  double cx = 0.5, cy = 0.5;
  std::uint32_t width = 1, height = 1;

  /// Throws std::invalid_argument if the rotation is not proper orthonormal
  /// (tolerance 1e-6) or the intrinsics are degenerate.
  void validate() const;
  const Vec3& center() const { return translation; }
};

/// Camera at `eye` looking at `target`; principal point at the image center.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
               std::uint32_t width, std::uint32_t height);

/// `count` cameras on a spherical cap of half-angle `cap_angle` (radians)
/// around `axis`, all at `distance` from `target` and looking at it.
/// Directions follow a Fibonacci spiral so the layout is deterministic.
std::vector<Camera> cap_rig(std::size_t count, const Vec3& target, const Vec3& axis,
                            double cap_angle, double distance, double focal,
                            std::uint32_t width, std::uint32_t height);

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction{0.0, 0.0, 1.0};
  double near = 0.0;
  double far = std::numeric_limits<double>::infinity();

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Ray through the center of pixel (px, py). Throws std::out_of_range for
/// pixels outside the image.
Ray generate_ray(const Camera& camera, std::uint32_t px, std::uint32_t py);

/// Restricts the ray to its intersection with the box; nullopt on a miss.
std::optional<Ray> clip_to_bounds(const Ray& ray, const Aabb& bounds);

enum class SampleMode { Midpoint, Jitter };

struct RaySamples {
  std::vector<double> t;      ///< ascending sample distances
  std::vector<double> delta;  ///< t[i+1] - t[i]; last is far - t.back()
  std::vector<Vec3> points;

  std::size_t size() const { return t.size(); }
};

/// n uniform bins over [near, far]; midpoint picks bin centers, jitter draws
/// uniformly within each bin from a generator seeded with `seed`.
RaySamples sample_stratified(const Ray& ray, std::uint32_t n, SampleMode mode,
                             std::uint64_t seed = 0);

struct CompositeResult {
  Vec3 rgb = Vec3::Zero();
  std::vector<double> weights;
  double opacity = 0.0;
  double depth = 0.0;
};

inline constexpr double kDepthOpacityFloor = 1e-10;

/// Emission-absorption compositing. rgb is blended over `background`.
/// Throws std::invalid_argument on length mismatch and std::domain_error on
/// negative density.
CompositeResult composite(std::span<const double> densities, std::span<const Vec3> colors,
                          std::span<const double> deltas, std::span<const double> t,
                          const Vec3& background = Vec3::Zero());

/// Renders one ray through the field.
CompositeResult render_ray(const VoxelField& field, const RaySamples& samples,
                           const Vec3& background = Vec3::Zero());

struct RenderOptions {
  std::uint32_t samples = 64;
  SampleMode mode = SampleMode::Midpoint;
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Zero();
  bool uncertainty_channel = true;  ///< composite log U when a field is given
  std::optional<double> threshold;  ///< on normalized log U, in [0,1]
};

struct ChannelImage {
  std::uint32_t width = 0, height = 0;
  ImageRGB rgb;
  PlaneF depth;
  PlaneF opacity;
  PlaneF log_uncertainty;   ///< sum_i w_i log U(x_i)
  PlaneF norm_uncertainty;  ///< sum_i w_i n(x_i) with n the normalized log U
  Plane<std::uint8_t> coverage;
};

/// Per pixel: ray, stratified samples, field queries, optional uncertainty
/// thresholding (density zeroed where normalized log U exceeds the
/// threshold), compositing. Throws std::invalid_argument when a threshold is
/// requested without an uncertainty field.
ChannelImage render_channels(const VoxelField& field, const Camera& camera,
                             const RenderOptions& options,
                             const UncertaintyField* uncertainty = nullptr);

}  // namespace raylaplace
