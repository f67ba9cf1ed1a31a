// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/render.hpp"

#include "raylaplace/uncertainty_field.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>

namespace raylaplace {

void Camera::validate() const {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw std::invalid_argument("camera pose is not finite");
  }
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-6 || std::abs(rotation.determinant() - 1.0) > 1e-6) {
    throw std::invalid_argument("camera rotation is not a proper rotation");
  }
  if (!(fx > 0.0) || !(fy > 0.0) || width == 0 || height == 0) {
    throw std::invalid_argument("camera intrinsics are degenerate");
  }
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double focal,
               std::uint32_t width, std::uint32_t height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitX());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.translation = eye;
  cam.fx = cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.width = width;
  cam.height = height;
  return cam;
}

std::vector<Camera> cap_rig(std::size_t count, const Vec3& target, const Vec3& axis,
                            double cap_angle, double distance, double focal,
                            std::uint32_t width, std::uint32_t height) {
  const Vec3 a = axis.normalized();
  const Vec3 helper = std::abs(a.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 b1 = a.cross(helper).normalized();
  const Vec3 b2 = a.cross(b1);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double min_cos = std::cos(cap_angle);

  std::vector<Camera> rig;
  rig.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double cos_t = 1.0 - (1.0 - min_cos) * (double(i) + 0.5) / double(count);
    const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const double phi = golden * double(i);
    const Vec3 dir = cos_t * a + sin_t * (std::cos(phi) * b1 + std::sin(phi) * b2);
    const Vec3 up = std::abs(dir.dot(Vec3::UnitZ())) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
    rig.push_back(look_at(target + distance * dir, target, up, focal, width, height));
  }
  return rig;
}

Ray generate_ray(const Camera& camera, std::uint32_t px, std::uint32_t py) {
  if (px >= camera.width || py >= camera.height) {
    throw std::out_of_range("pixel outside the image");
  }
  const Vec3 local((px + 0.5 - camera.cx) / camera.fx, (py + 0.5 - camera.cy) / camera.fy, 1.0);
  Ray ray;
  ray.origin = camera.translation;
  ray.direction = (camera.rotation * local).normalized();
  return ray;
}

std::optional<Ray> clip_to_bounds(const Ray& ray, const Aabb& bounds) {
  const auto hit = bounds.intersect(ray.origin, ray.direction);
  if (!hit) return std::nullopt;
  Ray out = ray;
  out.near = std::max({hit->first, ray.near, 1e-6});
  out.far = std::min(hit->second, ray.far);
  if (!(out.far > out.near)) return std::nullopt;
  return out;
}

RaySamples sample_stratified(const Ray& ray, std::uint32_t n, SampleMode mode,
                             std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_stratified: n must be >= 1");
  RaySamples s;
  s.t.resize(n);
  s.delta.resize(n);
  s.points.resize(n);
  const double bin = (ray.far - ray.near) / double(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double offset = mode == SampleMode::Midpoint ? 0.5 : unit(rng);
    s.t[i] = ray.near + (double(i) + offset) * bin;
  }
  for (std::uint32_t i = 0; i + 1 < n; ++i) s.delta[i] = s.t[i + 1] - s.t[i];
  s.delta[n - 1] = ray.far - s.t[n - 1];
  for (std::uint32_t i = 0; i < n; ++i) s.points[i] = ray.at(s.t[i]);
  return s;
}

CompositeResult composite(std::span<const double> densities, std::span<const Vec3> colors,
                          std::span<const double> deltas, std::span<const double> t,
                          const Vec3& background) {
  const std::size_t n = densities.size();
  if (colors.size() != n || deltas.size() != n || t.size() != n) {
    throw std::invalid_argument("composite: input lengths differ");
  }
  CompositeResult out;
  out.weights.resize(n);
  double transmittance = 1.0;
  double depth_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (densities[i] < 0.0) throw std::domain_error("composite: negative density");
    const double optical = densities[i] * deltas[i];
    const double alpha = -std::expm1(-optical);
    const double w = transmittance * alpha;
    out.weights[i] = w;
    out.rgb += w * colors[i];
    out.opacity += w;
    depth_sum += w * t[i];
    transmittance *= std::exp(-optical);
  }
  out.rgb += (1.0 - out.opacity) * background;
  out.depth = depth_sum / std::max(out.opacity, kDepthOpacityFloor);
  return out;
}

CompositeResult render_ray(const VoxelField& field, const RaySamples& samples,
                           const Vec3& background) {
  const std::size_t n = samples.size();
  std::vector<double> tau(n);
  std::vector<Vec3> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FieldSample s = query(field, samples.points[i]);
    tau[i] = s.density;
    col[i] = s.color;
  }
  return composite(tau, col, samples.delta, samples.t, background);
}

ChannelImage render_channels(const VoxelField& field, const Camera& camera,
                             const RenderOptions& options, const UncertaintyField* uncertainty) {
  if (options.threshold && uncertainty == nullptr) {
    throw std::invalid_argument("render: a threshold needs an uncertainty field");
  }
  if (options.samples == 0) throw std::invalid_argument("render: samples must be >= 1");

  const std::uint32_t w = camera.width, h = camera.height;
  ChannelImage img;
  img.width = w;
  img.height = h;
  img.rgb = ImageRGB(w, h, Vec3f::Zero());
  img.depth = PlaneF(w, h, 0.0f);
  img.opacity = PlaneF(w, h, 0.0f);
  img.log_uncertainty = PlaneF(w, h, 0.0f);
  img.norm_uncertainty = PlaneF(w, h, 0.0f);
  img.coverage = Plane<std::uint8_t>(w, h, 1);

  const bool want_unc = uncertainty != nullptr && (options.uncertainty_channel || options.threshold);

  parallel_for(h, [&](std::size_t row_begin, std::size_t row_end) {
    std::vector<double> tau, tau_kept, log_u, norm_u;
    std::vector<Vec3> col;
    for (std::size_t y = row_begin; y < row_end; ++y) {
      for (std::uint32_t x = 0; x < w; ++x) {
        const auto py = static_cast<std::uint32_t>(y);
        const auto clipped = clip_to_bounds(generate_ray(camera, x, py), field.bounds);
        if (!clipped) {
          img.rgb.at(x, py) = options.background.cast<float>();
          continue;
        }
        const std::uint64_t pixel_seed = mix_seed(options.seed, std::uint64_t(py) * w + x);
        const RaySamples s = sample_stratified(*clipped, options.samples, options.mode, pixel_seed);
        const std::size_t n = s.size();
        tau.resize(n);
        col.resize(n);
        log_u.assign(n, 0.0);
        norm_u.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const FieldSample fs = query(field, s.points[i]);
          tau[i] = fs.density;
          col[i] = fs.color;
          if (want_unc) {
            log_u[i] = std::log(uncertainty_at(*uncertainty, s.points[i]));
            norm_u[i] = normalized_log_uncertainty(*uncertainty, s.points[i]);
          }
        }

        CompositeResult shown;
        if (options.threshold) {
          const double kappa = *options.threshold;
          tau_kept = tau;
          for (std::size_t i = 0; i < n; ++i) {
            if (norm_u[i] > kappa) tau_kept[i] = 0.0;
          }
          const CompositeResult original = composite(tau, col, s.delta, s.t, options.background);
          shown = composite(tau_kept, col, s.delta, s.t, options.background);
          if (original.opacity >= 0.5 && shown.opacity < 0.5) img.coverage.at(x, py) = 0;
        } else {
          shown = composite(tau, col, s.delta, s.t, options.background);
        }

        img.rgb.at(x, py) = shown.rgb.cast<float>();
        img.depth.at(x, py) = static_cast<float>(shown.depth);
        img.opacity.at(x, py) = static_cast<float>(shown.opacity);
        if (want_unc && options.uncertainty_channel) {
          double lu = 0.0, nu = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            lu += shown.weights[i] * log_u[i];
            nu += shown.weights[i] * norm_u[i];
          }
          img.log_uncertainty.at(x, py) = static_cast<float>(lu);
          img.norm_uncertainty.at(x, py) = static_cast<float>(nu);
        }
      }
    }
  });
  return img;
}

}  // namespace raylaplace
