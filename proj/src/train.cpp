// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace raylaplace {

void TrainConfig::validate() const {
  if (batch_rays == 0) throw std::invalid_argument("train: batch_rays must be >= 1");
  if (samples == 0) throw std::invalid_argument("train: samples must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("train: Adam moments must lie in [0,1)");
  }
}

VoxelField constant_field(const Aabb& bounds, std::uint32_t resolution, float raw_density,
                          const Vec3f& raw_color) {
  return VoxelField(bounds, GridDims::cube(resolution), raw_density, raw_color);
}

std::vector<ImageRGB> render_images(const VoxelField& field, std::span<const Camera> cameras,
                                    const RenderOptions& options) {
  RenderOptions opts = options;
  opts.uncertainty_channel = false;
  opts.threshold.reset();
  std::vector<ImageRGB> out;
  out.reserve(cameras.size());
  for (const Camera& cam : cameras) out.push_back(render_channels(field, cam, opts).rgb);
  return out;
}

namespace {

constexpr std::size_t kPartitions = 4;  // fixed so results do not depend on thread count
constexpr std::size_t kChannels = 4;    // density, r, g, b

struct SamplePoint {
  TrilinearStencil stencil;
  double raw_density;
  Vec3 color;
  double tau;
};

// Forward + backward for one ray; adds d loss / d raw into grad. Returns the
// ray's mean squared error.
double backprop_ray(const VoxelField& field, const RaySamples& s, const Vec3& target,
                    const Vec3& background, double loss_scale, std::vector<double>& grad,
                    std::vector<SamplePoint>& pts) {
  const std::size_t n = s.size();
  pts.resize(n);
  std::vector<double> tau(n), delta(s.delta);
  std::vector<Vec3> col(n);
  for (std::size_t i = 0; i < n; ++i) {
    SamplePoint& p = pts[i];
    const Vec3 u = field.bounds.to_normalized(s.points[i]);
    p.stencil = make_stencil(field.dims(), u);
    double rd = 0.0;
    Vec3 rc = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
      rd += p.stencil.weight[c] * field.raw_density.data[p.stencil.index[c]];
      rc += p.stencil.weight[c] * field.raw_color.data[p.stencil.index[c]].cast<double>();
    }
    p.raw_density = rd;
    p.tau = softplus(rd);
    for (int k = 0; k < 3; ++k) p.color[k] = sigmoid(rc[k]);
    tau[i] = p.tau;
    col[i] = p.color;
  }
  const CompositeResult comp = composite(tau, col, delta, s.t, background);
  const Vec3 residual = comp.rgb - target;
  const Vec3 d_rgb = loss_scale * 2.0 * residual;

  double transmittance = 1.0;
  std::vector<double> t_after(n);
  for (std::size_t i = 0; i < n; ++i) {
    transmittance *= std::exp(-tau[i] * delta[i]);
    t_after[i] = transmittance;
  }
  Vec3 behind = transmittance * background;
  for (std::size_t i = n; i-- > 0;) {
    const SamplePoint& p = pts[i];
    const double d_tau = delta[i] * (t_after[i] * p.color - behind).dot(d_rgb);
    const double d_raw_density = d_tau * sigmoid(p.raw_density);
    Vec3 d_raw_color;
    for (int k = 0; k < 3; ++k) {
      d_raw_color[k] = comp.weights[i] * d_rgb[k] * p.color[k] * (1.0 - p.color[k]);
    }
    behind += comp.weights[i] * p.color;
    if (d_raw_density == 0.0 && d_raw_color.isZero(0.0)) continue;
    for (int c = 0; c < 8; ++c) {
      const double w = p.stencil.weight[c];
      if (w == 0.0) continue;
      double* g = &grad[kChannels * p.stencil.index[c]];
      g[0] += w * d_raw_density;
      g[1] += w * d_raw_color[0];
      g[2] += w * d_raw_color[1];
      g[3] += w * d_raw_color[2];
    }
  }
  return residual.squaredNorm() / 3.0;
}

}  // namespace

FitResult fit_field(std::span<const ImageRGB> images, std::span<const Camera> cameras,
                    const VoxelField& init, const TrainConfig& config) {
  if (images.empty()) throw std::invalid_argument("train: empty image set");
  if (images.size() != cameras.size()) {
    throw std::invalid_argument("train: one camera per image required");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width != cameras[i].width || images[i].height != cameras[i].height) {
      throw std::invalid_argument("train: image size does not match camera intrinsics");
    }
  }
  config.validate();

  FitResult result{init, {}};
  if (config.iterations == 0) return result;
  VoxelField& field = result.field;

  std::mt19937_64 rng(mix_seed(config.seed, 0x5eed));
  if (config.init_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, config.init_noise);
    for (float& v : field.raw_density.data) v += static_cast<float>(noise(rng));
    for (Vec3f& v : field.raw_color.data) {
      for (int k = 0; k < 3; ++k) v[k] += static_cast<float>(noise(rng));
    }
  }

  std::vector<std::uint64_t> offsets(cameras.size() + 1, 0);
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    offsets[c + 1] = offsets[c] + std::uint64_t(cameras[c].width) * cameras[c].height;
  }
  const std::uint64_t total = offsets.back();

  const std::size_t params = kChannels * field.dims().count();
  std::vector<double> m(params, 0.0), v(params, 0.0), grad(params, 0.0);
  std::vector<std::vector<double>> part_grad(kPartitions, std::vector<double>(params, 0.0));
  std::vector<double> part_loss(kPartitions, 0.0);
  const double loss_scale = 1.0 / (3.0 * config.batch_rays);

  struct Pick {
    std::uint32_t cam, px, py;
    std::uint64_t seed;
  };
  std::vector<Pick> picks(config.batch_rays);
  result.loss_history.reserve(config.iterations);

  for (std::uint32_t it = 0; it < config.iterations; ++it) {
    std::uniform_int_distribution<std::uint64_t> pixel(0, total - 1);
    for (Pick& p : picks) {
      const std::uint64_t flat = pixel(rng);
      p.cam = static_cast<std::uint32_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) -
                                         offsets.begin() - 1);
      const std::uint64_t local = flat - offsets[p.cam];
      p.px = static_cast<std::uint32_t>(local % cameras[p.cam].width);
      p.py = static_cast<std::uint32_t>(local / cameras[p.cam].width);
      p.seed = rng();
    }

    parallel_for(kPartitions, [&](std::size_t pb, std::size_t pe) {
      std::vector<SamplePoint> scratch;
      for (std::size_t part = pb; part < pe; ++part) {
        std::vector<double>& g = part_grad[part];
        std::fill(g.begin(), g.end(), 0.0);
        double loss = 0.0;
        for (std::size_t r = part; r < picks.size(); r += kPartitions) {
          const Pick& p = picks[r];
          const Vec3 target = images[p.cam].at(p.px, p.py).cast<double>();
          const auto ray = clip_to_bounds(generate_ray(cameras[p.cam], p.px, p.py), field.bounds);
          if (!ray) {
            loss += (config.background - target).squaredNorm() / 3.0;
            continue;
          }
          const RaySamples s = sample_stratified(*ray, config.samples, SampleMode::Jitter, p.seed);
          loss += backprop_ray(field, s, target, config.background, loss_scale, g, scratch);
        }
        part_loss[part] = loss;
      }
    });

    double loss = 0.0;
    for (std::size_t part = 0; part < kPartitions; ++part) loss += part_loss[part];
    result.loss_history.push_back(loss / double(picks.size()));

    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& g : part_grad) {
      for (std::size_t k = 0; k < params; ++k) grad[k] += g[k];
    }

    const double step = it + 1.0;
    const double bc1 = 1.0 - std::pow(config.beta1, step);
    const double bc2 = 1.0 - std::pow(config.beta2, step);
    parallel_for(field.dims().count(), [&](std::size_t b, std::size_t e) {
      for (std::size_t vtx = b; vtx < e; ++vtx) {
        for (std::size_t ch = 0; ch < kChannels; ++ch) {
          const std::size_t k = kChannels * vtx + ch;
          if (grad[k] == 0.0 && m[k] == 0.0) continue;
          m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
          v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
          const double update =
              config.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + config.epsilon);
          if (ch == 0) {
            field.raw_density.data[vtx] -= static_cast<float>(update);
          } else {
            field.raw_color.data[vtx][int(ch - 1)] -= static_cast<float>(update);
          }
        }
      }
    });
  }
  return result;
}

}  // namespace raylaplace
