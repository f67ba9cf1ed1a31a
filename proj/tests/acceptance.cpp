// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance experiments. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Arguments select a subset by number.

#include "raylaplace/cli.hpp"
#include "raylaplace/eval.hpp"
#include "raylaplace/io.hpp"
#include "raylaplace/uq.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

using namespace raylaplace;
using namespace raylaplace::testing;

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

struct Trained {
  VoxelField gt;
  VoxelField field;
  std::vector<Camera> train_cams;
  std::vector<ImageRGB> train_images;
  double seconds = 0.0;
};

TrainConfig fit_config(std::uint64_t seed = 0, double init_noise = 0.0) {
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.batch_rays = 4096;
  cfg.samples = 64;
  cfg.seed = seed;
  cfg.init_noise = init_noise;
  return cfg;
}

Trained train_scene(const SceneSpec& spec, std::vector<Camera> cams, std::uint32_t resolution) {
  Timer timer;
  Trained t;
  t.gt = make_synthetic_scene(spec, 64);
  t.train_cams = std::move(cams);
  RenderOptions opts;
  opts.samples = 128;
  t.train_images = render_images(t.gt, t.train_cams, opts);
  t.field = fit_field(t.train_images, t.train_cams, constant_field(spec.bounds, resolution),
                      fit_config())
                .field;
  t.seconds = timer.seconds();
  return t;
}

UncertaintyField estimate(const VoxelField& field, std::span<const Camera> cams, std::uint32_t m,
                          std::uint32_t batches = 100) {
  UqConfig cfg;
  cfg.resolution = m;
  cfg.batches = batches;
  cfg.rays_per_batch = 1024;
  cfg.samples = 64;
  cfg.seed = 1;
  const HessianDiagonal hess =
      accumulate_hessian_diag(field, DeformationGrid::zeros(m, field.bounds), cams, cfg);
  return compute_uncertainty_field(hess);
}

// --- one-sided sphere, shared by criteria 5, 9 and 10 ------------------------

const Vec3 kSeenAxis = Vec3::UnitX();

SceneSpec textured_sphere() {
  SceneSpec spec;
  spec.kind = SceneKind::Sphere;
  spec.texture_amplitude = 0.3;
  return spec;
}

const Trained& one_sided_sphere() {
  static const Trained t = train_scene(
      textured_sphere(), cap_rig(24, Vec3::Zero(), kSeenAxis, 45.0 * kDeg, 3.5, 64, 64, 64), 32);
  return t;
}

// Mean sigma of vertices within one deformation cell of the sphere surface,
// split by the side facing the cameras. Returns far / near.
double occlusion_ratio(const UncertaintyField& u, const SceneSpec& spec, double* near_out = nullptr,
                       double* far_out = nullptr) {
  const GridDims d = u.sigma.dims;
  const double cell = u.bounds.extent().x() / double(d.nx - 1);
  double near = 0.0, far = 0.0;
  std::size_t n_near = 0, n_far = 0;
  for (std::uint32_t k = 0; k < d.nz; ++k) {
    for (std::uint32_t j = 0; j < d.ny; ++j) {
      for (std::uint32_t i = 0; i < d.nx; ++i) {
        const Vec3 p = u.bounds.to_world(d.vertex_position(i, j, k)) - spec.center;
        if (std::abs(p.norm() - spec.radius) > cell) continue;
        const double side = p.dot(kSeenAxis);
        if (side > 0.0) {
          near += u.sigma.at(i, j, k);
          ++n_near;
        } else if (side < 0.0) {
          far += u.sigma.at(i, j, k);
          ++n_far;
        }
      }
    }
  }
  near /= double(n_near);
  far /= double(n_far);
  if (near_out) *near_out = near;
  if (far_out) *far_out = far;
  return far / near;
}

// --- criteria -------------------------------------------------------------------

Outcome identity_at_mode() {
  SceneSpec spec = textured_sphere();
  const auto cams = cap_rig(12, Vec3::Zero(), Vec3::UnitZ(), M_PI, 3.5, 32, 32, 32);
  RenderOptions opts;
  opts.samples = 96;
  const auto images = render_images(make_synthetic_scene(spec, 48), cams, opts);
  TrainConfig cfg = fit_config();
  cfg.iterations = 100;
  const VoxelField field = fit_field(images, cams, constant_field(spec.bounds, 24), cfg).field;

  Timer timer;
  UqConfig ucfg;
  ucfg.samples = 64;
  ucfg.seed = 3;
  const auto rays = draw_training_rays(cams, field.bounds, ucfg, 0, 1000);
  const DeformationGrid g = DeformationGrid::zeros(16, field.bounds);
  double worst = 0.0;
  for (const RaySamples& s : rays) {
    const Vec3 a = perturbed_render(field, g, s).rgb;
    const Vec3 b = render_ray(field, s).rgb;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  const double secs = timer.seconds();
  return {worst < 1e-9 && secs < 5.0,
          "max|C0-C|=" + num(worst) + " over 1000 rays, " + num(secs, 3) + " s"};
}

Outcome jacobian_correctness() {
  Timer timer;
  Rng rng(2024);
  std::size_t instances = 0, entries = 0;
  double worst = 0.0;
  while (instances < 60) {
    const Aabb box = random_box(rng);
    const GridDims dims{uniform_int(rng, 2, 5), uniform_int(rng, 2, 5), uniform_int(rng, 2, 5)};
    const VoxelField field = random_field(rng, box, dims);
    const std::uint32_t m = uniform_int(rng, 2, 4);
    const Vec3 bg = uniform_vec(rng, 0, 1);
    const auto ray = clip_to_bounds(ray_through(rng, box), box);
    if (!ray) continue;
    const RaySamples s = sample_stratified(*ray, uniform_int(rng, 1, 4), SampleMode::Jitter, rng());
    bool smooth = true;
    for (const Vec3& x : s.points) {
      const Vec3 u = box.to_normalized(x);
      smooth &= distance_to_cell_face(dims, u) > 1e-3;
      smooth &= u.minCoeff() > 1e-3 && u.maxCoeff() < 1.0 - 1e-3;
    }
    if (!smooth) continue;
    ++instances;
    const auto fd = fd_ray_jacobian(field, m, s, bg, 1e-4);
    std::vector<double> analytic(fd.size(), 0.0);
    for (const auto& e : ray_jacobian_sq(field, DeformationGrid::zeros(m, box), s, bg)) {
      analytic[e.parameter] = e.value;
    }
    double scale = 0.0;
    for (const Vec3& c : fd) scale = std::max(scale, c.squaredNorm());
    for (std::size_t k = 0; k < fd.size(); ++k) {
      const double ref = fd[k].squaredNorm();
      // entries below 1e-7 of the largest are finite-difference noise
      const double denom = std::max(ref, 1e-7 * scale);
      if (denom == 0.0) continue;
      worst = std::max(worst, std::abs(analytic[k] - ref) / denom);
      ++entries;
    }
  }
  const double secs = timer.seconds();
  return {worst < 1e-3 && secs < 60.0,
          std::to_string(instances) + " instances, " + std::to_string(entries) +
              " entries, max rel err=" + num(worst) + ", " + num(secs, 3) + " s"};
}

Outcome hessian_oracle() {
  Timer timer;
  SceneSpec spec;
  spec.texture_amplitude = 0.3;
  const VoxelField field = make_synthetic_scene(spec, 12);
  UqConfig cfg;
  cfg.resolution = 4;
  cfg.samples = 24;
  cfg.seed = 9;
  const auto cams = cap_rig(4, Vec3::Zero(), Vec3::UnitZ(), 2.0, 3.0, 20, 16, 16);
  const auto rays = draw_training_rays(cams, field.bounds, cfg, 0, 256);
  HessianDiagonal hess = HessianDiagonal::empty(4, field.bounds, cfg.lambda_value());
  accumulate_rays(hess, field, DeformationGrid::zeros(4, field.bounds), rays);
  const ObjectiveOracle oracle(field, 4, rays, cfg.lambda_value());
  double worst = 0.0;
  std::size_t compared = 0;
  for (std::size_t k = 0; k < hess.accum.size(); ++k) {
    const double fd = oracle.second_difference(k, 1e-5);
    if (fd <= 1e-6) continue;
    ++compared;
    worst = std::max(worst, std::abs(hess.diagonal(k) - fd) / fd);
  }
  const double secs = timer.seconds();
  return {compared > 0 && worst < 1e-2 && secs < 60.0,
          std::to_string(compared) + " entries > 1e-6, max rel err=" + num(worst) + ", " +
              num(secs, 3) + " s"};
}

Outcome prior_only() {
  const double lambda = UqConfig{}.lambda_value();
  const UncertaintyField u =
      compute_uncertainty_field(HessianDiagonal::empty(64, Aabb(), lambda));
  const double exact = std::sqrt(3.0) / std::sqrt(2.0 * lambda);
  double worst = 0.0;
  for (float s : u.sigma.data) worst = std::max(worst, std::abs(double(s) - exact) / exact);
  const double ulp = std::ldexp(1.0, -23);
  return {worst <= ulp, "sigma=" + num(exact, 10) + ", max rel dev=" + num(worst) +
                            " (float32 ulp " + num(ulp) + ")"};
}

Outcome occlusion() {
  const Trained& t = one_sided_sphere();
  Timer timer;
  const UncertaintyField u = estimate(t.field, t.train_cams, 32);
  double near = 0.0, far = 0.0;
  const double ratio = occlusion_ratio(u, textured_sphere(), &near, &far);
  const double secs = t.seconds + timer.seconds();
  return {ratio >= 2.0 && secs < 300.0,
          "far/near sigma=" + num(ratio) + " (near " + num(near) + ", far " + num(far) +
              "; pinned 3.63), " + num(secs, 3) + " s"};
}

struct TwoBlobResult {
  double ause_ours = 0.0, ause_ensemble = 0.0, spearman = 0.0;
  int random_wins = 0;
  std::vector<double> ause_random;
  std::size_t pixels = 0;
  double seconds = 0.0;
};

const TwoBlobResult& two_blob() {
  static const TwoBlobResult r = [] {
    Timer timer;
    SceneSpec spec;
    spec.kind = SceneKind::TwoBlob;
    spec.texture_amplitude = 0.3;
    const Vec3 axis = Vec3::UnitZ();
    const Trained t =
        train_scene(spec, cap_rig(24, Vec3::Zero(), axis, 50.0 * kDeg, 3.5, 64, 64, 64), 32);
    const auto test_cams = cap_rig(5, Vec3::Zero(), axis, 100.0 * kDeg, 3.5 * 1.05, 64, 64, 64);
    const UncertaintyField u = estimate(t.field, t.train_cams, 32);

    std::vector<VoxelField> members;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      members.push_back(fit_field(t.train_images, t.train_cams,
                                  constant_field(spec.bounds, 32), fit_config(seed, 0.5))
                            .field);
    }
    RenderOptions opts;
    opts.samples = 64;
    const EnsembleResult ens = ensemble_depth_std(members, test_cams, opts);
    const PooledDepthEval pooled = pool_depth_uncertainty(t.field, u, t.gt, test_cams, opts, &ens);

    TwoBlobResult out;
    out.pixels = pooled.errors.size();
    out.ause_ours = sparsification(pooled.errors, pooled.scores).ause;
    out.ause_ensemble = sparsification(pooled.errors, pooled.ensemble_std).ause;
    out.spearman = rank_correlation(pooled.scores, pooled.ensemble_std).value_or(0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(mix_seed(seed, 77));
      std::vector<double> random(pooled.errors.size());
      for (double& v : random) v = uniform(rng, 0.0, 1.0);
      out.ause_random.push_back(sparsification(pooled.errors, random).ause);
      if (out.ause_ours < out.ause_random.back()) ++out.random_wins;
    }
    out.seconds = timer.seconds();
    return out;
  }();
  return r;
}

Outcome ause_separation() {
  const TwoBlobResult& r = two_blob();
  double mean_random = 0.0;
  for (double v : r.ause_random) mean_random += v / double(r.ause_random.size());
  const bool pass = r.random_wins >= 18 && r.ause_ours <= 1.25 * r.ause_ensemble && r.seconds < 900;
  return {pass, "AUSE ours=" + num(r.ause_ours) + ", ensemble=" + num(r.ause_ensemble) +
                    ", random mean=" + num(mean_random) + ", beats random " +
                    std::to_string(r.random_wins) + "/20, " + std::to_string(r.pixels) +
                    " pixels, " + num(r.seconds, 3) + " s"};
}

Outcome ensemble_correlation() {
  const TwoBlobResult& r = two_blob();
  return {r.spearman > 0.5, "spearman=" + num(r.spearman)};
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"raylaplace"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

constexpr double kPinnedFloaterBaseline = 39.73;
constexpr double kPinnedFloaterGain = 1.338;
constexpr double kPinnedFloaterKappa = 0.8;

Outcome floater_cleanup() {
  Timer timer;
  TempDir dir("acceptance_floater");
  const std::string root = dir.path().string();
  const std::string scene = root + "/scene/scene.json";
  const std::string field = root + "/field.vxf", unc = root + "/field.unc";
  if (run({"synth", "--scene", "floater", "--out-dir", root + "/scene", "--views", "16",
           "--cap-angle-deg", "50", "--test-cap-angle-deg", "100", "--test-views", "5"}) != 0 ||
      run({"train", "--scene", scene, "--init", root + "/scene/init_field.vxf", "--out", field,
           "--iterations", "300"}) != 0 ||
      run({"uq", "--field", field, "--scene", scene, "--out", unc, "--resolution", "32",
           "--batches", "50", "--rays-per-batch", "1024"}) != 0 ||
      run({"sweep", "--scene", scene, "--field", field, "--uncertainty", unc, "--out-dir",
           root + "/sweep"}) != 0) {
    return {false, "pipeline failed"};
  }
  const auto rows = nlohmann::json::parse(read_file(dir / "sweep/sweep.json"));
  const double base = rows[0]["psnr"].get<double>();
  double best_gain = -1e9, best_cov = 0.0, best_kappa = 0.0;
  bool monotone = true;
  double prev_cov = 2.0;
  // rows after the baseline run from kappa = 0.1 up to 1.0
  for (std::size_t i = rows.size() - 1; i >= 1; --i) {
    const double cov = rows[i]["coverage"].get<double>();
    monotone &= cov <= prev_cov + 1e-12;
    prev_cov = cov;
    const double gain = rows[i]["psnr"].get<double>() - base;
    if (cov >= 0.8 && gain > best_gain) {
      best_gain = gain;
      best_cov = cov;
      best_kappa = rows[i]["threshold"].get<double>();
    }
  }
  // pinned at the first verified run; the pipeline is seeded and
  // independent of the worker count
  const bool pinned = std::abs(base - kPinnedFloaterBaseline) < 0.1 &&
                      std::abs(best_gain - kPinnedFloaterGain) < 0.1 &&
                      std::abs(best_kappa - kPinnedFloaterKappa) < 1e-9;
  const double secs = timer.seconds();
  return {best_gain >= 0.5 && monotone && pinned && secs < 600.0,
          "baseline psnr=" + num(base) + ", best kappa=" + num(best_kappa) + " gain=" +
              num(best_gain) + " dB at coverage " + num(best_cov) +
              (monotone ? ", coverage monotone" : ", coverage NOT monotone") +
              (pinned ? ", matches pins" : ", differs from pins") + ", " + num(secs, 3) + " s"};
}

Outcome resolution_ablation() {
  const Trained& t = one_sided_sphere();
  std::vector<double> ratios;
  for (std::uint32_t m : {16u, 32u, 64u}) {
    ratios.push_back(occlusion_ratio(estimate(t.field, t.train_cams, m), textured_sphere()));
  }
  const double d1 = ratios[1] - ratios[0], d2 = ratios[2] - ratios[1];
  const bool monotone = (d1 >= 0.0 && d2 >= 0.0) || (d1 <= 0.0 && d2 <= 0.0);
  return {monotone && std::abs(d2) < std::abs(d1),
          "ratio M16=" + num(ratios[0]) + " M32=" + num(ratios[1]) + " M64=" + num(ratios[2])};
}

Outcome throughput() {
  const Trained& t = one_sided_sphere();
  Timer timer;
  const UncertaintyField u = estimate(t.field, t.train_cams, 64);
  const double secs = timer.seconds();
  return {secs < 120.0 && u.resolution() == 64,
          "M=64, 100 x 1024 rays, 64 samples: " + num(secs, 3) + " s on " +
              std::to_string(worker_count()) + " worker(s)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"identity at the mode", identity_at_mode},
      {"jacobian vs finite differences", jacobian_correctness},
      {"hessian diagonal vs second differences", hessian_oracle},
      {"prior-only closed form", prior_only},
      {"occlusion ratio", occlusion},
      {"AUSE separation", ause_separation},
      {"ensemble correlation", ensemble_correlation},
      {"floater clean-up", floater_cleanup},
      {"resolution ablation", resolution_ablation},
      {"uq throughput", throughput},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int id = int(c) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " "
              << criteria[c].first << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
