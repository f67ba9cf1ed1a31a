// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/uq.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace raylaplace {

DeformationGrid DeformationGrid::zeros(std::uint32_t resolution, const Aabb& bounds) {
  if (resolution < 2) throw std::invalid_argument("deformation grid: resolution must be >= 2");
  DeformationGrid g;
  g.bounds = bounds;
  g.theta = Grid3<Vec3>(GridDims::cube(resolution), Vec3::Zero());
  return g;
}

bool DeformationGrid::at_mode() const {
  return std::all_of(theta.data.begin(), theta.data.end(),
                     [](const Vec3& v) { return v.x() == 0.0 && v.y() == 0.0 && v.z() == 0.0; });
}

namespace {

Vec3 deform_normalized(const DeformationGrid& grid, const Vec3& u) {
  if (!inside_unit_cube(u)) return Vec3::Zero();
  const TrilinearStencil st = make_stencil(grid.theta.dims, u);
  Vec3 d = Vec3::Zero();
  for (int c = 0; c < 8; ++c) d += st.weight[c] * grid.theta.data[st.index[c]];
  return d;
}

void require_same_box(const VoxelField& field, const DeformationGrid& grid) {
  if (!(field.bounds == grid.bounds)) {
    throw std::invalid_argument("deformation grid and field must share bounds");
  }
}

void require_mode(const DeformationGrid& grid) {
  if (!grid.at_mode()) {
    throw std::invalid_argument("ray Jacobians are evaluated at theta = 0 only");
  }
}

// Jacobian without the theta == 0 scan; callers check once.
std::vector<VertexJacobian> jacobian_at_mode(const VoxelField& field, const GridDims& deform_dims,
                                             const RaySamples& samples, const Vec3& background) {
  const std::size_t n = samples.size();
  std::vector<VertexJacobian> out;
  if (n == 0) return out;

  std::vector<FieldSampleGrad> fs(n);
  std::vector<Vec3> u(n);
  std::vector<double> tau(n);
  std::vector<Vec3> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = field.bounds.to_normalized(samples.points[i]);
    fs[i] = query_normalized_with_gradient(field, u[i]);
    tau[i] = fs[i].density;
    col[i] = fs[i].color;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!fs[i].d_density.allFinite() || !fs[i].d_color.allFinite()) {
      throw std::domain_error("non-finite field gradient");
    }
  }
  const CompositeResult comp = composite(tau, col, samples.delta, samples.t, background);

  // Transmittance after each sample, and the color arriving from behind it:
  // behind[i] = sum_{j>i} w_j c_j + T_final * background.
  std::vector<double> t_after(n);
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    transmittance *= std::exp(-tau[i] * samples.delta[i]);
    t_after[i] = transmittance;
  }
  std::vector<Vec3> behind(n);
  Vec3 acc = transmittance * background;
  for (std::size_t i = n; i-- > 0;) {
    behind[i] = acc;
    acc += comp.weights[i] * col[i];
  }

  struct Contribution {
    std::uint32_t vertex;
    Mat3 d_color;
  };
  std::vector<Contribution> parts;
  parts.reserve(8 * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!inside_unit_cube(u[i])) continue;
    // dC/dtau_i = delta_i * (T_{i+1} c_i - behind_i)
    const Vec3 d_tau = samples.delta[i] * (t_after[i] * col[i] - behind[i]);
    const Mat3 g = d_tau * fs[i].d_density.transpose() + comp.weights[i] * fs[i].d_color;
    if ((g.array() == 0.0).all()) continue;
    const TrilinearStencil st = make_stencil(deform_dims, u[i]);
    for (int c = 0; c < 8; ++c) {
      if (st.weight[c] == 0.0) continue;
      parts.push_back({st.index[c], st.weight[c] * g});
    }
  }
  std::stable_sort(parts.begin(), parts.end(),
                   [](const Contribution& a, const Contribution& b) { return a.vertex < b.vertex; });
  for (const Contribution& p : parts) {
    if (!out.empty() && out.back().vertex == p.vertex) {
      out.back().d_color += p.d_color;
    } else {
      out.push_back({p.vertex, p.d_color});
    }
  }
  return out;
}

std::vector<SquaredJacobianEntry> squared(const std::vector<VertexJacobian>& jac) {
  std::vector<SquaredJacobianEntry> out;
  out.reserve(3 * jac.size());
  for (const VertexJacobian& j : jac) {
    for (int a = 0; a < 3; ++a) {
      const double v = j.d_color.col(a).squaredNorm();
      if (v != 0.0) out.push_back({3 * j.vertex + std::uint32_t(a), v});
    }
  }
  return out;
}

}  // namespace

Vec3 deform(const DeformationGrid& grid, const Vec3& x) {
  return deform_normalized(grid, grid.bounds.to_normalized(x));
}

FieldSample perturbed_query(const VoxelField& field, const DeformationGrid& grid, const Vec3& x) {
  require_same_box(field, grid);
  const Vec3 u = field.bounds.to_normalized(x);
  return query_normalized(field, u + deform_normalized(grid, u));
}

CompositeResult perturbed_render(const VoxelField& field, const DeformationGrid& grid,
                                 const RaySamples& samples, const Vec3& background) {
  const std::size_t n = samples.size();
  std::vector<double> tau(n);
  std::vector<Vec3> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FieldSample s = perturbed_query(field, grid, samples.points[i]);
    tau[i] = s.density;
    col[i] = s.color;
  }
  return composite(tau, col, samples.delta, samples.t, background);
}

std::vector<VertexJacobian> ray_jacobian(const VoxelField& field, const DeformationGrid& grid,
                                         const RaySamples& samples, const Vec3& background) {
  require_same_box(field, grid);
  require_mode(grid);
  return jacobian_at_mode(field, grid.theta.dims, samples, background);
}

std::vector<SquaredJacobianEntry> ray_jacobian_sq(const VoxelField& field,
                                                  const DeformationGrid& grid,
                                                  const RaySamples& samples,
                                                  const Vec3& background) {
  return squared(ray_jacobian(field, grid, samples, background));
}

double UqConfig::lambda_value() const {
  if (lambda) return *lambda;
  const double m = resolution;
  return 1e-4 / (m * m * m);
}

HessianDiagonal HessianDiagonal::empty(std::uint32_t resolution, const Aabb& bounds,
                                       double lambda) {
  if (resolution < 2) throw std::invalid_argument("hessian: resolution must be >= 2");
  if (!(lambda > 0.0)) throw std::invalid_argument("hessian: lambda must be positive");
  HessianDiagonal h;
  h.bounds = bounds;
  h.resolution = resolution;
  h.lambda = lambda;
  h.accum.assign(3 * GridDims::cube(resolution).count(), 0.0);
  return h;
}

double HessianDiagonal::diagonal(std::size_t k) const {
  const double data = ray_count > 0 ? 2.0 / double(ray_count) * accum[k] : 0.0;
  return data + 2.0 * lambda;
}

void accumulate_rays(HessianDiagonal& hess, const VoxelField& field, const DeformationGrid& grid,
                     std::span<const RaySamples> rays, const Vec3& background) {
  require_same_box(field, grid);
  require_mode(grid);
  if (grid.resolution() != hess.resolution || !(grid.bounds == hess.bounds)) {
    throw std::invalid_argument("hessian and deformation grid disagree on layout");
  }
  constexpr std::size_t kBlock = 512;
  std::vector<std::vector<SquaredJacobianEntry>> block(kBlock);
  for (std::size_t start = 0; start < rays.size(); start += kBlock) {
    const std::size_t len = std::min(kBlock, rays.size() - start);
    parallel_for(len, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        block[i] = squared(jacobian_at_mode(field, grid.theta.dims, rays[start + i], background));
      }
    });
    // sequential merge in ray order keeps the sums independent of threading
    for (std::size_t i = 0; i < len; ++i) {
      for (const SquaredJacobianEntry& e : block[i]) hess.accum[e.parameter] += e.value;
    }
  }
  hess.ray_count += rays.size();
}

std::vector<RaySamples> draw_training_rays(std::span<const Camera> cameras, const Aabb& bounds,
                                           const UqConfig& config, std::uint64_t first,
                                           std::uint64_t count, std::vector<PixelRef>* pixels) {
  if (cameras.empty()) throw std::invalid_argument("training rays need at least one camera");
  std::vector<std::uint64_t> offsets(cameras.size() + 1, 0);
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    offsets[c + 1] = offsets[c] + std::uint64_t(cameras[c].width) * cameras[c].height;
  }
  const std::uint64_t total = offsets.back();

  std::vector<RaySamples> rays(count);
  if (pixels) pixels->assign(count, PixelRef{});
  parallel_for(count, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::uint64_t g = first + i;
      std::mt19937_64 rng(mix_seed(config.seed, g));
      const std::uint64_t flat = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
      const auto cam = static_cast<std::uint32_t>(
          std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
      const std::uint64_t local = flat - offsets[cam];
      const auto px = static_cast<std::uint32_t>(local % cameras[cam].width);
      const auto py = static_cast<std::uint32_t>(local / cameras[cam].width);
      if (pixels) (*pixels)[i] = {cam, px, py};
      const auto ray = clip_to_bounds(generate_ray(cameras[cam], px, py), bounds);
      if (!ray) continue;
      rays[i] = sample_stratified(*ray, config.samples, config.mode, rng());
    }
  });
  return rays;
}

HessianDiagonal accumulate_hessian_diag(const VoxelField& field, const DeformationGrid& grid,
                                        std::span<const Camera> cameras, const UqConfig& config) {
  if (cameras.empty()) throw std::invalid_argument("uncertainty estimation needs cameras");
  HessianDiagonal hess = HessianDiagonal::empty(config.resolution, field.bounds,
                                                config.lambda_value());
  if (grid.resolution() != config.resolution) {
    throw std::invalid_argument("deformation grid resolution differs from the config");
  }
  for (std::uint32_t b = 0; b < config.batches; ++b) {
    const std::uint64_t first = std::uint64_t(b) * config.rays_per_batch;
    const auto rays = draw_training_rays(cameras, field.bounds, config, first,
                                         config.rays_per_batch);
    accumulate_rays(hess, field, grid, rays, config.background);
  }
  return hess;
}

UncertaintyField compute_uncertainty_field(const HessianDiagonal& hess) {
  UncertaintyField uf;
  uf.bounds = hess.bounds;
  const GridDims dims = GridDims::cube(hess.resolution);
  uf.sigma_axes = Grid3<Vec3f>(dims, Vec3f::Zero());
  uf.sigma = Grid3<float>(dims, 0.0f);
  for (std::size_t v = 0; v < dims.count(); ++v) {
    Vec3 axes;
    for (int a = 0; a < 3; ++a) axes[a] = std::sqrt(1.0 / hess.diagonal(3 * v + a));
    uf.sigma_axes.data[v] = axes.cast<float>();
    uf.sigma.data[v] = static_cast<float>(axes.norm());
  }
  uf.update_log_range();
  return uf;
}

double mode_gradient_norm(const VoxelField& field, const DeformationGrid& grid,
                          std::span<const RaySamples> rays, std::span<const Vec3> targets,
                          const Vec3& background) {
  if (rays.size() != targets.size()) throw std::invalid_argument("one target per ray");
  require_same_box(field, grid);
  require_mode(grid);
  std::vector<double> grad(grid.parameter_count(), 0.0);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const Vec3 residual = render_ray(field, rays[r], background).rgb - targets[r];
    for (const VertexJacobian& j : jacobian_at_mode(field, grid.theta.dims, rays[r], background)) {
      const Vec3 g = j.d_color.transpose() * residual;
      for (int a = 0; a < 3; ++a) grad[3 * j.vertex + a] += g[a];
    }
  }
  double sq = 0.0;
  const double scale = rays.empty() ? 0.0 : 2.0 / double(rays.size());
  for (double g : grad) sq += (scale * g) * (scale * g);
  return std::sqrt(sq);
}

}  // namespace raylaplace
