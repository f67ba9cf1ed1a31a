// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/field.hpp"
#include "raylaplace/render.hpp"

#include <span>

namespace raylaplace {

struct TrainConfig {
  std::uint32_t iterations = 2000;
  double learning_rate = 0.1;
  std::uint32_t batch_rays = 4096;
  std::uint32_t samples = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Std of seeded Gaussian noise added to the raw grids before the first
  /// step; 0 keeps the init exactly.
  double init_noise = 0.0;
  Vec3 background = Vec3::Zero();

  void validate() const;
};

struct FitResult {
  VoxelField field;
  std::vector<double> loss_history;  ///< mean per-ray MSE of each batch
};

/// Adam on the raw grids, minimizing the mean squared pixel error over
/// random batches of training rays (pixels uniform over all images).
/// Throws std::invalid_argument for an empty image set or when image and
/// camera sizes disagree.
FitResult fit_field(std::span<const ImageRGB> images, std::span<const Camera> cameras,
                    const VoxelField& init, const TrainConfig& config);

/// Constant field used as the default training start.
VoxelField constant_field(const Aabb& bounds, std::uint32_t resolution, float raw_density = -2.0f,
                          const Vec3f& raw_color = Vec3f::Zero());

/// Renders the RGB channel of every camera.
std::vector<ImageRGB> render_images(const VoxelField& field, std::span<const Camera> cameras,
                                    const RenderOptions& options);

}  // namespace raylaplace
