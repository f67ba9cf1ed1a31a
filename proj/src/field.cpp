// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace raylaplace {

TrilinearStencil make_stencil(const GridDims& dims, const Vec3& u_in) {
  if (!u_in.allFinite()) throw std::domain_error("trilinear lookup at non-finite coordinate");
  const std::array<std::uint32_t, 3> n{dims.nx, dims.ny, dims.nz};
  std::array<std::uint32_t, 3> cell{};
  std::array<double, 3> frac{};
  std::array<double, 3> scale{};
  for (int a = 0; a < 3; ++a) {
    const double u = std::clamp(u_in[a], 0.0, 1.0);
    scale[a] = double(n[a] - 1);
    const double s = u * scale[a];
    const auto c = std::min(static_cast<std::uint32_t>(s), n[a] - 2);
    cell[a] = c;
    frac[a] = s - double(c);
  }

  TrilinearStencil st;
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const double wx = dx ? frac[0] : 1.0 - frac[0];
    const double wy = dy ? frac[1] : 1.0 - frac[1];
    const double wz = dz ? frac[2] : 1.0 - frac[2];
    const double sx = dx ? scale[0] : -scale[0];
    const double sy = dy ? scale[1] : -scale[1];
    const double sz = dz ? scale[2] : -scale[2];
    st.index[corner] =
        static_cast<std::uint32_t>(dims.index(cell[0] + dx, cell[1] + dy, cell[2] + dz));
    st.weight[corner] = wx * wy * wz;
    st.dweight[corner] = {sx * wy * wz, wx * sy * wz, wx * wy * sz};
  }
  return st;
}

ScalarSample trilinear_sample(const Grid3<float>& grid, const Vec3& u) {
  const TrilinearStencil st = make_stencil(grid.dims, u);
  ScalarSample out{0.0, Vec3::Zero()};
  for (int c = 0; c < 8; ++c) {
    const double v = grid.data[st.index[c]];
    out.value += st.weight[c] * v;
    for (int a = 0; a < 3; ++a) out.spatial_gradient[a] += st.dweight[c][a] * v;
  }
  return out;
}

VectorSample trilinear_sample(const Grid3<Vec3f>& grid, const Vec3& u) {
  const TrilinearStencil st = make_stencil(grid.dims, u);
  VectorSample out{Vec3::Zero(), Mat3::Zero()};
  for (int c = 0; c < 8; ++c) {
    const Vec3 v = grid.data[st.index[c]].cast<double>();
    out.value += st.weight[c] * v;
    for (int a = 0; a < 3; ++a) out.spatial_gradient.col(a) += st.dweight[c][a] * v;
  }
  return out;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) return kEmptyRawDensity;
  const double raw = y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
  return std::max(raw, double(kEmptyRawDensity));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

VoxelField::VoxelField(const Aabb& box, GridDims dims, float density_fill,
                       const Vec3f& color_fill)
    : bounds(box), raw_density(dims, density_fill), raw_color(dims, color_fill) {
  if (dims.nx < 2 || dims.ny < 2 || dims.nz < 2) {
    throw std::invalid_argument("VoxelField: resolution must be >= 2 on every axis");
  }
}

bool VoxelField::operator==(const VoxelField& other) const {
  return bounds == other.bounds && raw_density.dims == other.raw_density.dims &&
         raw_density.data == other.raw_density.data && raw_color.data == other.raw_color.data;
}

namespace {

// One code path for both query flavors so values agree bit-for-bit.
template <bool kGradient>
FieldSampleGrad evaluate(const VoxelField& field, const Vec3& u) {
  FieldSampleGrad out;
  if (!inside_unit_cube(u)) return out;
  const TrilinearStencil st = make_stencil(field.dims(), u);

  double raw_d = 0.0;
  Vec3 raw_c = Vec3::Zero();
  Vec3 g_d = Vec3::Zero();
  Mat3 g_c = Mat3::Zero();
  for (int c = 0; c < 8; ++c) {
    const double d = field.raw_density.data[st.index[c]];
    const Vec3 col = field.raw_color.data[st.index[c]].cast<double>();
    raw_d += st.weight[c] * d;
    raw_c += st.weight[c] * col;
    if constexpr (kGradient) {
      for (int a = 0; a < 3; ++a) {
        g_d[a] += st.dweight[c][a] * d;
        g_c.col(a) += st.dweight[c][a] * col;
      }
    }
  }

  out.density = softplus(raw_d);
  for (int k = 0; k < 3; ++k) out.color[k] = sigmoid(raw_c[k]);
  if constexpr (kGradient) {
    out.d_density = sigmoid(raw_d) * g_d;
    for (int k = 0; k < 3; ++k) {
      out.d_color.row(k) = out.color[k] * (1.0 - out.color[k]) * g_c.row(k);
    }
  }
  return out;
}

}  // namespace

FieldSample query_normalized(const VoxelField& field, const Vec3& u) {
  const FieldSampleGrad s = evaluate<false>(field, u);
  return {s.density, s.color};
}

FieldSampleGrad query_normalized_with_gradient(const VoxelField& field, const Vec3& u) {
  return evaluate<true>(field, u);
}

FieldSample query(const VoxelField& field, const Vec3& x) {
  return query_normalized(field, field.bounds.to_normalized(x));
}

FieldSampleGrad query_with_gradient(const VoxelField& field, const Vec3& x) {
  FieldSampleGrad s = evaluate<true>(field, field.bounds.to_normalized(x));
  // chain through u = (x - min) / extent
  const Vec3 inv_extent = field.bounds.extent().cwiseInverse();
  s.d_density = s.d_density.cwiseProduct(inv_extent);
  s.d_color = s.d_color * inv_extent.asDiagonal();
  return s;
}

// --- synthetic scenes -------------------------------------------------------

SceneKind parse_scene_kind(std::string_view name) {
  if (name == "box") return SceneKind::Box;
  if (name == "sphere") return SceneKind::Sphere;
  if (name == "two_blob" || name == "two-blob") return SceneKind::TwoBlob;
  if (name == "floater") return SceneKind::Floater;
  throw std::invalid_argument("unknown scene kind: " + std::string(name));
}

std::string_view to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::Box: return "box";
    case SceneKind::Sphere: return "sphere";
    case SceneKind::TwoBlob: return "two_blob";
    case SceneKind::Floater: return "floater";
  }
  return "unknown";
}

namespace {

struct Shape {
  enum class Form { Sphere, Box } form;
  Vec3 center;
  double size;  // radius or half extent
  double density;
  Vec3 color;

  double signed_distance(const Vec3& x) const {
    if (form == Form::Sphere) return (x - center).norm() - size;
    const Vec3 q = (x - center).cwiseAbs().array() - size;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
};

Vec3 textured(const Vec3& base, const Vec3& x, double amplitude, double frequency) {
  if (amplitude == 0.0) return base;
  const double t = 0.5 * (std::sin(frequency * x.x()) * std::cos(frequency * x.y()) +
                          std::sin(frequency * x.z() + 0.5));
  const Vec3 shift(t, -0.6 * t, 0.8 * t);
  return (base + amplitude * shift).cwiseMax(0.02).cwiseMin(0.98);
}

}  // namespace

VoxelField make_synthetic_scene(const SceneSpec& spec, std::uint32_t resolution) {
  if (resolution < 2) throw std::invalid_argument("synthetic scene: resolution must be >= 2");
  VoxelField field(spec.bounds, GridDims::cube(resolution));

  std::vector<Shape> shapes;
  const double main_density = softplus(spec.raw_density);
  if (spec.radius > 0.0) {
    const auto form = spec.kind == SceneKind::Box ? Shape::Form::Box : Shape::Form::Sphere;
    shapes.push_back({form, spec.center, spec.radius, main_density, spec.color});
  }
  if (spec.kind == SceneKind::TwoBlob && spec.second_radius > 0.0) {
    shapes.push_back({Shape::Form::Sphere, spec.second_center, spec.second_radius, main_density,
                      spec.second_color});
  }
  if (spec.kind == SceneKind::Floater && spec.floater_radius > 0.0) {
    shapes.push_back({Shape::Form::Sphere, spec.floater_center, spec.floater_radius,
                      softplus(spec.floater_raw_density), spec.floater_color});
  }

  const double voxel = spec.bounds.extent().minCoeff() / double(resolution - 1);
  const double width = spec.edge_width > 0.0 ? spec.edge_width : 0.5 * voxel;
  const GridDims dims = field.dims();
  for (std::uint32_t k = 0; k < dims.nz; ++k) {
    for (std::uint32_t j = 0; j < dims.ny; ++j) {
      for (std::uint32_t i = 0; i < dims.nx; ++i) {
        const Vec3 x = spec.bounds.to_world(dims.vertex_position(i, j, k));
        double density = 0.0;
        Vec3 color = spec.color;
        double nearest = std::numeric_limits<double>::infinity();
        for (const Shape& s : shapes) {
          const double sd = s.signed_distance(x);
          density = std::max(density, s.density * sigmoid(-sd / width));
          if (sd < nearest) {
            nearest = sd;
            color = s.color;
          }
        }
        color = textured(color, x, spec.texture_amplitude, spec.texture_frequency);
        field.raw_density.at(i, j, k) = static_cast<float>(inverse_softplus(density));
        Vec3f raw_c;
        for (int c = 0; c < 3; ++c) {
          raw_c[c] = static_cast<float>(logit(std::clamp(color[c], 1e-4, 1.0 - 1e-4)));
        }
        field.raw_color.at(i, j, k) = raw_c;
      }
    }
  }
  return field;
}

}  // namespace raylaplace
