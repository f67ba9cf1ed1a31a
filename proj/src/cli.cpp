// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/cli.hpp"

#include "raylaplace/eval.hpp"
#include "raylaplace/io.hpp"
#include "raylaplace/service.hpp"
#include "raylaplace/train.hpp"
#include "raylaplace/uq.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <thread>

namespace raylaplace {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for bad flag combinations detected after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

Vec3 to_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) throw UsageError(std::string(what) + " needs 3 numbers");
  return {v[0], v[1], v[2]};
}

fs::path resolve(const std::string& p) { return p.empty() ? fs::path{} : fs::absolute(p); }

void write_echo(const fs::path& path, const json& echo) {
  write_file_atomic(path, echo.dump(2) + "\n");
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out += suffix;
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// --- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string scene = "sphere";
  std::string out_dir;
  std::uint32_t resolution = 64;
  std::uint32_t train_resolution = 32;
  std::uint32_t views = 24;
  std::uint32_t test_views = 5;
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  double focal = 0.0;
  double distance = 3.5;
  std::vector<double> axis{0.0, 0.0, 1.0};
  double cap_angle_deg = 180.0;
  std::vector<double> test_axis;
  double test_cap_angle_deg = -1.0;
  std::uint32_t samples = 128;
  double texture_amplitude = 0.0;
  float init_raw_density = -2.0f;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path dir = resolve(a.out_dir);
  SceneSpec spec;
  spec.kind = parse_scene_kind(a.scene);
  spec.texture_amplitude = a.texture_amplitude;
  const double focal = a.focal > 0.0 ? a.focal : double(a.width);
  const Vec3 axis = to_vec3(a.axis, "--axis");
  const Vec3 test_axis = a.test_axis.empty() ? axis : to_vec3(a.test_axis, "--test-axis");
  const double deg = std::numbers::pi / 180.0;
  const double test_cap = a.test_cap_angle_deg < 0.0 ? a.cap_angle_deg : a.test_cap_angle_deg;

  // The floater is an artifact of the reconstruction, not of the world: the
  // images show the clean object and only the training start carries it.
  SceneSpec clean = spec;
  if (spec.kind == SceneKind::Floater) clean.kind = SceneKind::Sphere;
  const VoxelField gt = make_synthetic_scene(clean, a.resolution);

  VoxelField init = constant_field(spec.bounds, a.train_resolution, a.init_raw_density);
  if (spec.kind == SceneKind::Floater) {
    SceneSpec only = spec;
    only.radius = 0.0;
    const VoxelField floater = make_synthetic_scene(only, a.train_resolution);
    for (std::size_t v = 0; v < init.raw_density.data.size(); ++v) {
      if (floater.raw_density.data[v] > init.raw_density.data[v]) {
        init.raw_density.data[v] = floater.raw_density.data[v];
        init.raw_color.data[v] = floater.raw_color.data[v];
      }
    }
  }

  auto train = cap_rig(a.views, spec.bounds.center(), axis, a.cap_angle_deg * deg, a.distance,
                       focal, a.width, a.height);
  // slightly farther out so a test view never coincides with a training view
  auto test = cap_rig(a.test_views, spec.bounds.center(), test_axis, test_cap * deg,
                      a.distance * 1.05, focal, a.width, a.height);

  fs::create_directories(dir / "images");
  SceneBundle bundle;
  bundle.bounds = spec.bounds;
  bundle.root = dir;
  RenderOptions opts;
  opts.samples = a.samples;
  std::uint32_t index = 0;
  for (const auto* rig : {&train, &test}) {
    for (const Camera& cam : *rig) {
      char name[32];
      std::snprintf(name, sizeof(name), "images/view_%03u.png", index);
      save_png(dir / name, render_channels(gt, cam, opts).rgb);
      bundle.cameras.push_back({cam, name});
      (rig == &train ? bundle.train : bundle.test).push_back(index++);
    }
  }
  save_scene(bundle, dir / "scene.json");
  save_field(dir / "gt_field.vxf", gt);
  save_field(dir / "init_field.vxf", init);

  write_echo(dir / "synth.config.json",
             {{"command", "synth"},
              {"scene", a.scene},
              {"out_dir", dir.string()},
              {"resolution", a.resolution},
              {"train_resolution", a.train_resolution},
              {"views", a.views},
              {"test_views", a.test_views},
              {"width", a.width},
              {"height", a.height},
              {"focal", focal},
              {"distance", a.distance},
              {"axis", a.axis},
              {"cap_angle_deg", a.cap_angle_deg},
              {"test_axis", std::vector<double>{test_axis.x(), test_axis.y(), test_axis.z()}},
              {"test_cap_angle_deg", test_cap},
              {"samples", a.samples},
              {"texture_amplitude", a.texture_amplitude},
              {"init_raw_density", a.init_raw_density}});
  out << "synth: wrote " << bundle.cameras.size() << " views to " << dir.string() << "\n";
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string scene, out, init;
  std::uint32_t resolution = 32;
  float init_raw_density = -2.0f;
  TrainConfig cfg;
};

json train_echo(const TrainConfig& c) {
  return {{"iterations", c.iterations}, {"learning_rate", c.learning_rate},
          {"batch_rays", c.batch_rays}, {"samples", c.samples},
          {"beta1", c.beta1},           {"beta2", c.beta2},
          {"epsilon", c.epsilon},       {"seed", c.seed},
          {"init_noise", c.init_noise}};
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const fs::path scene_path = resolve(a.scene), out_path = resolve(a.out);
  const fs::path init_path = resolve(a.init);
  const SceneBundle scene = load_scene(scene_path);
  const auto images = load_images(scene, scene.train);
  const auto cameras = scene.cameras_of(scene.train);
  const VoxelField init = init_path.empty()
                              ? constant_field(scene.bounds, a.resolution, a.init_raw_density)
                              : load_field(init_path);
  if (!(init.bounds == scene.bounds)) {
    throw InvariantViolation("initial field bounds differ from the scene box");
  }

  const auto start = std::chrono::steady_clock::now();
  const FitResult fit = fit_field(images, cameras, init, a.cfg);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_field(out_path, fit.field);

  json echo = {{"command", "train"},
               {"scene", scene_path.string()},
               {"out", out_path.string()},
               {"init", init_path.string()},
               {"resolution", fit.field.dims().nx},
               {"init_raw_density", a.init_raw_density},
               {"train", train_echo(a.cfg)}};
  write_echo(sibling(out_path, ".config.json"), echo);
  const double final_loss = fit.loss_history.empty() ? 0.0 : fit.loss_history.back();
  out << "train: iterations=" << a.cfg.iterations << " final_loss=" << final_loss
      << " wall_clock_s=" << fmt(secs) << "\n";
  return 0;
}

// --- uq ------------------------------------------------------------------------

struct UqArgs {
  std::string field, scene, out;
  UqConfig cfg;
  double lambda = -1.0;
  std::uint32_t mode_check_rays = 1024;
};

int cmd_uq(const UqArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path field_path = resolve(a.field), scene_path = resolve(a.scene);
  const fs::path out_path = resolve(a.out);
  UqConfig cfg = a.cfg;
  if (a.lambda >= 0.0) cfg.lambda = a.lambda;
  const VoxelField field = load_field(field_path);
  const SceneBundle scene = load_scene(scene_path);
  const auto cameras = scene.cameras_of(scene.train);
  const DeformationGrid grid = DeformationGrid::zeros(cfg.resolution, field.bounds);

  const auto start = std::chrono::steady_clock::now();
  const HessianDiagonal hess = accumulate_hessian_diag(field, grid, cameras, cfg);
  const UncertaintyField unc = compute_uncertainty_field(hess);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_uncertainty(out_path, unc);

  std::optional<double> mode_grad;
  if (a.mode_check_rays > 0) {
    const auto images = load_images(scene, scene.train);
    std::vector<PixelRef> pixels;
    const auto rays = draw_training_rays(cameras, field.bounds, cfg, 0, a.mode_check_rays, &pixels);
    std::vector<Vec3> targets;
    for (const PixelRef& p : pixels) targets.push_back(images[p.camera].at(p.x, p.y).cast<double>());
    mode_grad = mode_gradient_norm(field, grid, rays, targets, cfg.background);
    if (*mode_grad > 1e-3) {
      err << "warning: mode gradient norm " << *mode_grad
          << " exceeds 1e-3; the field may not be converged\n";
    }
  }

  write_echo(sibling(out_path, ".config.json"),
             {{"command", "uq"},
              {"field", field_path.string()},
              {"scene", scene_path.string()},
              {"out", out_path.string()},
              {"resolution", cfg.resolution},
              {"lambda", cfg.lambda_value()},
              {"batches", cfg.batches},
              {"rays_per_batch", cfg.rays_per_batch},
              {"samples", cfg.samples},
              {"seed", cfg.seed},
              {"mode_check_rays", a.mode_check_rays},
              {"mode_gradient_norm", mode_grad ? json(*mode_grad) : json(nullptr)}});
  out << "uq: wall_clock_s=" << fmt(secs) << " R=" << hess.ray_count << " M=" << cfg.resolution
      << " lambda=" << cfg.lambda_value() << " log_sigma_range=" << unc.log_min << ","
      << unc.log_max << "\n";
  return 0;
}

// --- shared view selection ---------------------------------------------------------

std::vector<std::uint32_t> split_of(const SceneBundle& scene, const std::string& split) {
  if (split == "train") return scene.train;
  if (split == "test") return scene.test.empty() ? scene.train : scene.test;
  throw UsageError("--split must be train or test");
}

std::optional<double> parse_threshold(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || std::isnan(v)) {
    throw UsageError("--threshold is not a number: " + text);
  }
  return v;
}

// --- render --------------------------------------------------------------------

struct RenderArgs {
  std::string field, uncertainty, scene, out_prefix, pose, threshold;
  int camera_index = -1;
  double fx = 0.0, fy = 0.0;
  std::uint32_t width = 64, height = 64;
  std::vector<std::string> channels{"rgb"};
  std::uint32_t samples = 64;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const fs::path field_path = resolve(a.field), unc_path = resolve(a.uncertainty);
  const fs::path scene_path = resolve(a.scene), prefix = resolve(a.out_prefix);
  const VoxelField field = load_field(field_path);
  std::optional<UncertaintyField> unc;
  if (!unc_path.empty()) unc = load_uncertainty(unc_path);

  Camera cam;
  if (!a.pose.empty()) {
    const auto pose = parse_pose(a.pose);
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) cam.rotation(r, k) = pose[4 * r + k];
      cam.translation[r] = pose[4 * r + 3];
    }
    cam.width = a.width;
    cam.height = a.height;
    cam.fx = a.fx > 0.0 ? a.fx : a.width;
    cam.fy = a.fy > 0.0 ? a.fy : cam.fx;
    cam.cx = 0.5 * a.width;
    cam.cy = 0.5 * a.height;
    try {
      cam.validate();
    } catch (const std::invalid_argument& e) {
      throw PoseValidityError(e.what());
    }
  } else {
    if (scene_path.empty()) throw UsageError("render needs --pose or --scene");
    const SceneBundle scene = load_scene(scene_path, false);
    const auto idx = a.camera_index >= 0 ? std::uint32_t(a.camera_index)
                                         : split_of(scene, "test").front();
    if (idx >= scene.cameras.size()) throw UsageError("--camera-index out of range");
    cam = scene.cameras[idx].camera;
  }

  RenderOptions opts;
  opts.samples = a.samples;
  opts.threshold = parse_threshold(a.threshold);
  bool want_unc = false;
  for (const std::string& c : a.channels) {
    if (c != "rgb" && c != "depth" && c != "unc" && c != "opacity") {
      throw UsageError("unknown channel " + c);
    }
    want_unc |= c == "unc";
  }
  if ((want_unc || opts.threshold) && !unc) throw UsageError("channel or threshold needs --uncertainty");
  opts.uncertainty_channel = want_unc;

  const ChannelImage img = render_channels(field, cam, opts, unc ? &*unc : nullptr);
  for (const std::string& c : a.channels) {
    if (c == "rgb") {
      save_png(sibling(prefix, "_rgb.png"), img.rgb);
    } else if (c == "depth") {
      const PlaneF planes[] = {img.depth};
      save_float_planes(sibling(prefix, "_depth.imgf"), planes);
    } else if (c == "opacity") {
      const PlaneF planes[] = {img.opacity};
      save_float_planes(sibling(prefix, "_opacity.imgf"), planes);
    } else {
      const PlaneF score = uncertainty_score(img);
      std::vector<std::uint8_t> rgb(3 * score.size());
      for (std::size_t i = 0; i < score.size(); ++i) {
        const auto v = viridis(score.data[i]);
        std::copy(v.begin(), v.end(), rgb.begin() + 3 * i);
      }
      write_file_atomic(sibling(prefix, "_unc.png"), encode_png_rgb8(img.width, img.height, rgb));
      const PlaneF planes[] = {img.log_uncertainty, img.norm_uncertainty};
      save_float_planes(sibling(prefix, "_unc.imgf"), planes);
    }
  }
  write_echo(sibling(prefix, ".config.json"),
             {{"command", "render"},
              {"field", field_path.string()},
              {"uncertainty", unc_path.string()},
              {"scene", scene_path.string()},
              {"camera_index", a.camera_index},
              {"pose", pose_of(cam)},
              {"fx", cam.fx},
              {"fy", cam.fy},
              {"width", cam.width},
              {"height", cam.height},
              {"channels", a.channels},
              {"threshold", a.threshold},
              {"samples", a.samples}});
  out << "render: wrote " << a.channels.size() << " channel(s) to " << prefix.string() << "_*\n";
  return 0;
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string scene, field, uncertainty, gt_field, report, split = "test", threshold;
  std::vector<std::string> ensemble;
  std::uint32_t samples = 64;
  double step = 0.01;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const fs::path scene_path = resolve(a.scene), field_path = resolve(a.field);
  const fs::path unc_path = resolve(a.uncertainty), gt_path = resolve(a.gt_field);
  const fs::path report_path = resolve(a.report);
  const SceneBundle scene = load_scene(scene_path);
  const VoxelField field = load_field(field_path);
  const UncertaintyField unc = load_uncertainty(unc_path);
  const VoxelField gt = load_field(gt_path);
  const auto views = split_of(scene, a.split);
  const auto cams = scene.cameras_of(views);
  const auto images = load_images(scene, views);

  RenderOptions opts;
  opts.samples = a.samples;
  std::vector<VoxelField> members;
  std::vector<std::string> member_paths;
  for (const std::string& p : a.ensemble) {
    member_paths.push_back(resolve(p).string());
    members.push_back(load_field(member_paths.back()));
  }
  if (members.size() == 1) throw UsageError("--ensemble needs at least two fields");
  std::optional<EnsembleResult> ens;
  if (!members.empty()) ens = ensemble_depth_std(members, cams, opts);

  const PooledDepthEval pooled =
      pool_depth_uncertainty(field, unc, gt, cams, opts, ens ? &*ens : nullptr, images);

  MetricsReport report;
  double mean_psnr = 0.0;
  for (double p : pooled.psnr) mean_psnr += p;
  report.psnr = mean_psnr / double(pooled.psnr.size());
  if (pooled.errors.size() >= 2) {
    report.curves = sparsification(pooled.errors, pooled.scores, a.step);
    report.ause = report.curves->ause;
    if (ens) {
      report.extra.emplace_back("ause_ensemble",
                                sparsification(pooled.errors, pooled.ensemble_std, a.step).ause);
    }
  }
  if (ens && pooled.scores.size() >= 3) {
    report.spearman = rank_correlation(pooled.scores, pooled.ensemble_std);
  }
  if (const auto th = parse_threshold(a.threshold)) {
    const double levels[] = {*th};
    const auto rows = threshold_sweep(field, unc, images, cams, levels, opts);
    report.coverage = rows[1].coverage;
    report.extra.emplace_back("psnr_thresholded", rows[1].psnr);
  }
  report.extra.emplace_back("views", double(views.size()));
  report.extra.emplace_back("pixels", double(pooled.errors.size()));

  write_file_atomic(report_path, report.to_json().dump(2) + "\n");
  fs::path text_path = report_path;
  text_path.replace_extension(".txt");
  if (text_path == report_path) text_path += ".txt";
  write_file_atomic(text_path, report.to_text());
  write_echo(sibling(report_path, ".config.json"),
             {{"command", "eval"},
              {"scene", scene_path.string()},
              {"field", field_path.string()},
              {"uncertainty", unc_path.string()},
              {"gt_field", gt_path.string()},
              {"ensemble", member_paths},
              {"split", a.split},
              {"threshold", a.threshold},
              {"samples", a.samples},
              {"step", a.step}});
  out << report.to_text();
  return 0;
}

// --- sweep ---------------------------------------------------------------------

struct SweepArgs {
  std::string scene, field, uncertainty, out_dir, split = "test";
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint32_t samples = 64;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const fs::path scene_path = resolve(a.scene), field_path = resolve(a.field);
  const fs::path unc_path = resolve(a.uncertainty), dir = resolve(a.out_dir);
  const SceneBundle scene = load_scene(scene_path);
  const VoxelField field = load_field(field_path);
  const UncertaintyField unc = load_uncertainty(unc_path);
  const auto views = split_of(scene, a.split);
  const auto cams = scene.cameras_of(views);
  const auto images = load_images(scene, views);

  RenderOptions opts;
  opts.samples = a.samples;
  const auto rows = threshold_sweep(field, unc, images, cams, a.thresholds, opts, true);

  fs::create_directories(dir);
  json table = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const SweepRow& row = rows[r];
    const std::string name = row.threshold ? "sweep_" + std::to_string(r - 1) : "sweep_none";
    save_png(dir / (name + ".png"), row.renders.front().rgb);
    table.push_back({{"threshold", row.threshold ? json(*row.threshold) : json(nullptr)},
                     {"coverage", row.coverage},
                     {"psnr", row.psnr},
                     {"render", name + ".png"}});
    out << "threshold=" << (row.threshold ? fmt(*row.threshold) : std::string("none"))
        << " coverage=" << fmt(row.coverage) << " psnr=" << fmt(row.psnr) << "\n";
  }
  write_file_atomic(dir / "sweep.json", table.dump(2) + "\n");
  write_echo(dir / "sweep.config.json",
             {{"command", "sweep"},
              {"scene", scene_path.string()},
              {"field", field_path.string()},
              {"uncertainty", unc_path.string()},
              {"split", a.split},
              {"thresholds", a.thresholds},
              {"samples", a.samples}});
  return 0;
}

// --- serve ---------------------------------------------------------------------

struct ServeArgs {
  std::string field, uncertainty, scene, host = "127.0.0.1";
  int port = 8080;
  std::uint32_t samples = 64;
};

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path field_path = resolve(a.field), unc_path = resolve(a.uncertainty);
  const fs::path scene_path = resolve(a.scene);
  RenderService service(a.samples);
  HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  out << json{{"command", "serve"},
              {"field", field_path.string()},
              {"uncertainty", unc_path.string()},
              {"scene", scene_path.string()},
              {"host", a.host},
              {"port", port},
              {"samples", a.samples}}
             .dump()
      << "\n"
      << "serve: listening on http://" << a.host << ":" << port << "\n"
      << std::flush;

  std::exception_ptr load_error;
  std::jthread loader([&] {
    try {
      VoxelField field = load_field(field_path);
      UncertaintyField unc = load_uncertainty(unc_path);
      Camera cam;
      if (!scene_path.empty()) {
        const SceneBundle scene = load_scene(scene_path, false);
        cam = scene.cameras[split_of(scene, "test").front()].camera;
      } else {
        const Vec3 c = field.bounds.center();
        const double d = 1.75 * field.bounds.extent().norm();
        cam = look_at(c + Vec3(0.0, -0.3 * d, d), c, Vec3::UnitY(), 256.0, 256, 256);
      }
      service.load(std::move(field), std::move(unc), cam);
    } catch (...) {
      load_error = std::current_exception();
      server.stop();
    }
  });
  server.listen();
  loader.join();
  if (load_error) std::rethrow_exception(load_error);
  (void)err;
  return 0;
}

void fail(std::ostream& err, const std::string& category, const std::string& message) {
  std::string m = message;
  std::replace(m.begin(), m.end(), '\n', ' ');
  err << "error: " << category << ": " << m << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"raylaplace: voxel radiance fields with Laplace uncertainty"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic scene, images and fields");
  s->add_option("--scene", synth.scene, "box | sphere | two-blob | floater")->capture_default_str();
  s->add_option("--out-dir", synth.out_dir)->required();
  s->add_option("--resolution", synth.resolution, "ground-truth grid")->capture_default_str();
  s->add_option("--train-resolution", synth.train_resolution)->capture_default_str();
  s->add_option("--views", synth.views)->capture_default_str();
  s->add_option("--test-views", synth.test_views)->capture_default_str();
  s->add_option("--width", synth.width)->capture_default_str();
  s->add_option("--height", synth.height)->capture_default_str();
  s->add_option("--focal", synth.focal, "pixels; 0 uses the width");
  s->add_option("--distance", synth.distance)->capture_default_str();
  s->add_option("--axis", synth.axis)->expected(3);
  s->add_option("--cap-angle-deg", synth.cap_angle_deg)->capture_default_str();
  s->add_option("--test-axis", synth.test_axis)->expected(3);
  s->add_option("--test-cap-angle-deg", synth.test_cap_angle_deg);
  s->add_option("--samples", synth.samples)->capture_default_str();
  s->add_option("--texture-amplitude", synth.texture_amplitude);
  s->add_option("--init-raw-density", synth.init_raw_density)->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "fit a voxel field to the training views");
  t->add_option("--scene", train.scene)->required();
  t->add_option("--out", train.out)->required();
  t->add_option("--init", train.init, "starting field; default is a constant field");
  t->add_option("--resolution", train.resolution)->capture_default_str();
  t->add_option("--init-raw-density", train.init_raw_density)->capture_default_str();
  t->add_option("--iterations", train.cfg.iterations)->capture_default_str();
  t->add_option("--learning-rate", train.cfg.learning_rate)->capture_default_str();
  t->add_option("--batch-rays", train.cfg.batch_rays)->capture_default_str();
  t->add_option("--samples", train.cfg.samples)->capture_default_str();
  t->add_option("--seed", train.cfg.seed)->capture_default_str();
  t->add_option("--init-noise", train.cfg.init_noise)->capture_default_str();

  UqArgs uq;
  auto* u = app.add_subcommand("uq", "compute the per-vertex uncertainty field");
  u->add_option("--field", uq.field)->required();
  u->add_option("--scene", uq.scene)->required();
  u->add_option("--out", uq.out)->required();
  u->add_option("--resolution", uq.cfg.resolution, "deformation grid M")->capture_default_str();
  u->add_option("--lambda", uq.lambda, "prior weight; default 1e-4 / M^3");
  u->add_option("--batches", uq.cfg.batches)->capture_default_str();
  u->add_option("--rays-per-batch", uq.cfg.rays_per_batch)->capture_default_str();
  u->add_option("--samples", uq.cfg.samples)->capture_default_str();
  u->add_option("--seed", uq.cfg.seed)->capture_default_str();
  u->add_option("--mode-check-rays", uq.mode_check_rays)->capture_default_str();

  RenderArgs render;
  auto* r = app.add_subcommand("render", "render channels from a scene camera or a pose");
  r->add_option("--field", render.field)->required();
  r->add_option("--uncertainty", render.uncertainty);
  r->add_option("--scene", render.scene);
  r->add_option("--camera-index", render.camera_index);
  r->add_option("--pose", render.pose, "12 comma separated numbers, world_from_camera 3x4");
  r->add_option("--fx", render.fx);
  r->add_option("--fy", render.fy);
  r->add_option("--width", render.width)->capture_default_str();
  r->add_option("--height", render.height)->capture_default_str();
  r->add_option("--channels", render.channels, "rgb depth unc opacity")->delimiter(',');
  r->add_option("--threshold", render.threshold, "normalized log uncertainty cut; inf allowed");
  r->add_option("--samples", render.samples)->capture_default_str();
  r->add_option("--out-prefix", render.out_prefix)->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "AUSE, PSNR, coverage and ensemble correlation");
  e->add_option("--scene", eval.scene)->required();
  e->add_option("--field", eval.field)->required();
  e->add_option("--uncertainty", eval.uncertainty)->required();
  e->add_option("--gt-field", eval.gt_field, "reference field for depth")->required();
  e->add_option("--report", eval.report)->required();
  e->add_option("--ensemble", eval.ensemble, "member fields for the std baseline");
  e->add_option("--split", eval.split)->capture_default_str();
  e->add_option("--threshold", eval.threshold);
  e->add_option("--samples", eval.samples)->capture_default_str();
  e->add_option("--step", eval.step)->capture_default_str();

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "coverage and PSNR across uncertainty thresholds");
  w->add_option("--scene", sweep.scene)->required();
  w->add_option("--field", sweep.field)->required();
  w->add_option("--uncertainty", sweep.uncertainty)->required();
  w->add_option("--out-dir", sweep.out_dir)->required();
  w->add_option("--thresholds", sweep.thresholds)->delimiter(',');
  w->add_option("--split", sweep.split)->capture_default_str();
  w->add_option("--samples", sweep.samples)->capture_default_str();

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "HTTP render service for the viewer");
  v->add_option("--field", serve.field)->required();
  v->add_option("--uncertainty", serve.uncertainty)->required();
  v->add_option("--scene", serve.scene, "default camera source");
  v->add_option("--host", serve.host)->capture_default_str();
  v->add_option("--port", serve.port)->capture_default_str();
  v->add_option("--samples", serve.samples)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    fail(err, "usage", ex.what());
    return 2;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(train, out);
    if (u->parsed()) return cmd_uq(uq, out, err);
    if (r->parsed()) return cmd_render(render, out);
    if (e->parsed()) return cmd_eval(eval, out);
    if (w->parsed()) return cmd_sweep(sweep, out);
    if (v->parsed()) return cmd_serve(serve, out, err);
  } catch (const UsageError& ex) {
    fail(err, "usage", ex.what());
    return 2;
  } catch (const IoError& ex) {
    fail(err, ex.category(), ex.what());
    return 1;
  } catch (const std::invalid_argument& ex) {
    fail(err, "invalid_argument", ex.what());
    return 1;
  } catch (const std::out_of_range& ex) {
    fail(err, "invalid_argument", ex.what());
    return 1;
  } catch (const std::exception& ex) {
    fail(err, "runtime", ex.what());
    return 1;
  }
  return 2;
}

}  // namespace raylaplace
