// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/common.hpp"
#include "raylaplace/field.hpp"
#include "raylaplace/render.hpp"
#include "raylaplace/uncertainty_field.hpp"

#include <span>

namespace raylaplace {

/// Vector displacements on an M^3 vertex lattice over the field's box.
/// Displacements are in normalized coordinates; the interpolated field is
/// added to a query point before the radiance field is evaluated.
struct DeformationGrid {
  Aabb bounds;
  Grid3<Vec3> theta;

  static DeformationGrid zeros(std::uint32_t resolution, const Aabb& bounds);

  std::uint32_t resolution() const { return theta.dims.nx; }
  std::size_t parameter_count() const { return 3 * theta.data.size(); }
  /// True when every displacement is exactly zero (the Laplace evaluation point).
  bool at_mode() const;
  /// Parameter k = 3 * vertex + axis.
  double& parameter(std::size_t k) { return theta.data[k / 3][int(k % 3)]; }
};

/// Interpolated displacement at a world point (normalized units); zero
/// outside the box.
Vec3 deform(const DeformationGrid& grid, const Vec3& x);

/// Field queried at the displaced point x + D(x).
FieldSample perturbed_query(const VoxelField& field, const DeformationGrid& grid, const Vec3& x);

/// Pixel color of the deformed field along fixed samples.
CompositeResult perturbed_render(const VoxelField& field, const DeformationGrid& grid,
                                 const RaySamples& samples,
                                 const Vec3& background = Vec3::Zero());

/// d C_c / d theta_{vertex, a} at theta = 0: row c (color), column a (axis).
struct VertexJacobian {
  std::uint32_t vertex;
  Mat3 d_color;
};

/// One entry of the squared ray Jacobian: sum over RGB of (dC_c/dtheta_k)^2.
struct SquaredJacobianEntry {
  std::uint32_t parameter;
  double value;
};

/// Signed Jacobian of the rendered color with respect to the deformation
/// vertices touched by the samples, sorted by vertex. Requires theta = 0.
std::vector<VertexJacobian> ray_jacobian(const VoxelField& field, const DeformationGrid& grid,
                                         const RaySamples& samples,
                                         const Vec3& background = Vec3::Zero());

/// Sparse squared Jacobian sorted by parameter; exact zeros are dropped.
std::vector<SquaredJacobianEntry> ray_jacobian_sq(const VoxelField& field,
                                                  const DeformationGrid& grid,
                                                  const RaySamples& samples,
                                                  const Vec3& background = Vec3::Zero());

struct UqConfig {
  std::uint32_t resolution = 64;
  std::optional<double> lambda;  ///< defaults to 1e-4 / M^3
  std::uint32_t batches = 1000;
  std::uint32_t rays_per_batch = 4096;
  std::uint32_t samples = 64;
  SampleMode mode = SampleMode::Jitter;
  std::uint64_t seed = 0;
  Vec3 background = Vec3::Zero();

  double lambda_value() const;
};

/// Accumulators for diag(-H) = (2/R) sum_r diag(J^T J) + 2 lambda.
struct HessianDiagonal {
  Aabb bounds;
  std::uint32_t resolution = 0;
  double lambda = 0.0;
  std::uint64_t ray_count = 0;
  std::vector<double> accum;  ///< 3 per vertex, >= 0

  static HessianDiagonal empty(std::uint32_t resolution, const Aabb& bounds, double lambda);
  double diagonal(std::size_t k) const;
};

/// Adds the squared Jacobians of the given rays in order; ray_count grows by
/// rays.size(). Rays without samples count but contribute nothing.
void accumulate_rays(HessianDiagonal& hess, const VoxelField& field, const DeformationGrid& grid,
                     std::span<const RaySamples> rays, const Vec3& background = Vec3::Zero());

struct PixelRef {
  std::uint32_t camera = 0, x = 0, y = 0;
};

/// Rays first .. first+count-1 of the training-ray sequence: pixels drawn
/// uniformly over the union of all camera pixels, samples stratified within
/// the box. Each ray depends only on (seed, index).
std::vector<RaySamples> draw_training_rays(std::span<const Camera> cameras, const Aabb& bounds,
                                           const UqConfig& config, std::uint64_t first,
                                           std::uint64_t count,
                                           std::vector<PixelRef>* pixels = nullptr);

/// Runs config.batches batches of config.rays_per_batch training rays.
/// Only the cameras and the field are read.
HessianDiagonal accumulate_hessian_diag(const VoxelField& field, const DeformationGrid& grid,
                                        std::span<const Camera> cameras, const UqConfig& config);

/// Diagonal Laplace posterior: var = 1 / diag(-H) per vertex and axis,
/// sigma_axis = sqrt(var), sigma = |(sigma_x, sigma_y, sigma_z)|.
UncertaintyField compute_uncertainty_field(const HessianDiagonal& hess);

/// Norm of the gradient of the photometric term of h at theta = 0 against
/// observed colors. The Laplace expansion assumes this is ~0.
double mode_gradient_norm(const VoxelField& field, const DeformationGrid& grid,
                          std::span<const RaySamples> rays, std::span<const Vec3> targets,
                          const Vec3& background = Vec3::Zero());

}  // namespace raylaplace
