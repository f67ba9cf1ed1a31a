// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/common.hpp"

#include <array>
#include <string>
#include <string_view>

namespace raylaplace {

/// Corner indices and weights of the trilinear interpolant at one point,
/// plus the derivative of each weight with respect to the normalized
/// coordinate. Cells are half-open: a point on a shared face belongs to the
/// cell on the + side, except on the upper boundary of the grid.
struct TrilinearStencil {
  std::array<std::uint32_t, 8> index{};
  std::array<double, 8> weight{};
  std::array<std::array<double, 3>, 8> dweight{};
};

/// Builds the stencil for u; u is clamped to [0,1]^3.
/// Throws std::domain_error for non-finite u.
TrilinearStencil make_stencil(const GridDims& dims, const Vec3& u);

template <class Value, class Gradient>
struct TrilinearSample {
  Value value;
  Gradient spatial_gradient;  ///< d value / d u; for vector values row = component.
};

using ScalarSample = TrilinearSample<double, Vec3>;
using VectorSample = TrilinearSample<Vec3, Mat3>;

ScalarSample trilinear_sample(const Grid3<float>& grid, const Vec3& u);
VectorSample trilinear_sample(const Grid3<Vec3f>& grid, const Vec3& u);

double softplus(double x);
double sigmoid(double x);
/// Inverse of softplus, floored at kEmptyRawDensity for non-positive input.
double inverse_softplus(double y);
double logit(double p);

/// Raw density whose softplus is exactly zero in double precision.
inline constexpr float kEmptyRawDensity = -1000.0f;

/// Explicit voxel radiance field. Density is softplus(raw), color is
/// sigmoid(raw), both applied after trilinear interpolation of the raw grids.
/// Color is view independent.
struct VoxelField {
  Aabb bounds;
  Grid3<float> raw_density;
  Grid3<Vec3f> raw_color;

  VoxelField() = default;
  VoxelField(const Aabb& box, GridDims dims, float density_fill = 0.0f,
             const Vec3f& color_fill = Vec3f::Zero());

  const GridDims& dims() const { return raw_density.dims; }
  bool operator==(const VoxelField& other) const;
};

struct FieldSample {
  double density = 0.0;
  Vec3 color = Vec3::Zero();
};

struct FieldSampleGrad {
  double density = 0.0;
  Vec3 color = Vec3::Zero();
  Vec3 d_density = Vec3::Zero();  ///< d density / d position
  Mat3 d_color = Mat3::Zero();    ///< row c: d color_c / d position
};

/// Query at a world point; outside the box returns zero density and black.
FieldSample query(const VoxelField& field, const Vec3& x);
/// As query, with analytic spatial gradients with respect to world position.
FieldSampleGrad query_with_gradient(const VoxelField& field, const Vec3& x);

/// Normalized-coordinate variants. Gradients are with respect to u.
FieldSample query_normalized(const VoxelField& field, const Vec3& u);
FieldSampleGrad query_normalized_with_gradient(const VoxelField& field, const Vec3& u);

// --- synthetic scenes -------------------------------------------------------

enum class SceneKind { Box, Sphere, TwoBlob, Floater };

SceneKind parse_scene_kind(std::string_view name);
std::string_view to_string(SceneKind kind);

/// Procedural scene description. Distances are in world units.
struct SceneSpec {
  SceneKind kind = SceneKind::Sphere;
  Aabb bounds;
  Vec3 center = Vec3::Zero();
  double radius = 0.5;             ///< sphere radius / box half extent
  double raw_density = 10.0;       ///< raw (pre-softplus) density inside shapes
  Vec3 color{0.8, 0.45, 0.2};
  double texture_amplitude = 0.0;  ///< solid sinusoidal color texture
  double texture_frequency = 6.0;  ///< radians per world unit
  double edge_width = -1.0;        ///< surface blur; <0 picks half a voxel

  // two-blob: occluded second blob
  Vec3 second_center{0.0, 0.0, -0.55};
  double second_radius = 0.35;
  Vec3 second_color{0.2, 0.5, 0.85};

  // floater: spurious blob injected next to the main object
  Vec3 floater_center{0.55, 0.55, 0.6};
  double floater_radius = 0.14;
  Vec3 floater_color{0.9, 0.9, 0.9};
  double floater_raw_density = 6.0;
};

/// Deterministic field for the given spec. Throws std::invalid_argument for
/// resolution < 2.
VoxelField make_synthetic_scene(const SceneSpec& spec, std::uint32_t resolution);

}  // namespace raylaplace
