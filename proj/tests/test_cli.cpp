// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/cli.hpp"
#include "raylaplace/io.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <sstream>

using namespace raylaplace;
using namespace raylaplace::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "raylaplace");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// One small synthesized and trained scene shared by the test cases.
struct Workspace {
  TempDir dir{"cli"};
  std::string scene, field, unc;

  Workspace() {
    const std::string root = dir.path().string();
    scene = root + "/scene/scene.json";
    field = root + "/field.vxf";
    unc = root + "/field.unc";
    const Run synth = cli({"synth", "--scene", "sphere", "--out-dir", root + "/scene",
                           "--resolution", "24", "--train-resolution", "12", "--views", "6",
                           "--test-views", "2", "--width", "16", "--height", "16", "--samples",
                           "32", "--texture-amplitude", "0.2"});
    REQUIRE_MESSAGE(synth.code == 0, synth.err);
    const Run train = cli({"train", "--scene", scene, "--out", field, "--resolution", "12",
                           "--iterations", "30", "--batch-rays", "512", "--samples", "24"});
    REQUIRE_MESSAGE(train.code == 0, train.err);
    const Run uq = cli({"uq", "--field", field, "--scene", scene, "--out", unc, "--resolution",
                        "4", "--batches", "2", "--rays-per-batch", "256", "--samples", "16",
                        "--mode-check-rays", "64"});
    REQUIRE_MESSAGE(uq.code == 0, uq.err);
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("synth writes a loadable scene") {
  Workspace& w = workspace();
  const SceneBundle s = load_scene(w.scene);
  CHECK(s.cameras.size() == 8);
  CHECK(s.train.size() == 6);
  CHECK(s.test.size() == 2);
  const fs::path dir = fs::path(w.scene).parent_path();
  CHECK(load_field(dir / "gt_field.vxf").dims() == GridDims::cube(24));
  CHECK(load_field(dir / "init_field.vxf").dims() == GridDims::cube(12));
  const auto echo = nlohmann::json::parse(read_file(dir / "synth.config.json"));
  CHECK(echo["command"] == "synth");
  CHECK(echo["views"] == 6);
}

TEST_CASE("train and uq outputs") {
  Workspace& w = workspace();
  CHECK(load_field(w.field).dims() == GridDims::cube(12));
  const UncertaintyField u = load_uncertainty(w.unc);
  CHECK(u.resolution() == 4);
  CHECK(u.log_min <= u.log_max);
  CHECK(fs::exists(w.field + ".config.json"));
  CHECK(fs::exists(w.unc + ".config.json"));
  const auto echo = nlohmann::json::parse(read_file(w.unc + ".config.json"));
  CHECK(echo["resolution"] == 4);
  CHECK(echo["batches"] == 2);
}

TEST_CASE("uq without rays is the prior") {
  Workspace& w = workspace();
  const std::string out = (w.dir / "prior.unc").string();
  const Run r = cli({"uq", "--field", w.field, "--scene", w.scene, "--out", out, "--resolution",
                     "3", "--batches", "0", "--lambda", "0.02", "--mode-check-rays", "0"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("R=0 ") != std::string::npos);
  const UncertaintyField u = load_uncertainty(out);
  const double expected = std::sqrt(3.0) / std::sqrt(2.0 * 0.02);
  for (float s : u.sigma.data) CHECK(s == doctest::Approx(expected).epsilon(1e-6).scale(0));
  CHECK(u.log_min == u.log_max);
}

TEST_CASE("render channels and thresholds") {
  Workspace& w = workspace();
  const std::string a = (w.dir / "a").string(), b = (w.dir / "b").string();
  const std::string c = (w.dir / "c").string();
  REQUIRE(cli({"render", "--field", w.field, "--uncertainty", w.unc, "--scene", w.scene,
               "--camera-index", "1", "--channels", "rgb,depth,unc,opacity", "--out-prefix", a})
              .code == 0);
  const Run inf = cli({"render", "--field", w.field, "--uncertainty", w.unc, "--scene", w.scene,
                       "--camera-index", "1", "--channels", "rgb", "--threshold", "inf",
                       "--out-prefix", b});
  REQUIRE_MESSAGE(inf.code == 0, inf.err);
  CHECK(read_file(a + "_rgb.png") == read_file(b + "_rgb.png"));
  CHECK(decode_float_planes(read_file(a + "_depth.imgf")).size() == 1);
  CHECK(decode_float_planes(read_file(a + "_opacity.imgf")).size() == 1);
  CHECK(decode_float_planes(read_file(a + "_unc.imgf")).size() == 2);
  CHECK(load_png(a + "_unc.png").width == 16);
  const auto echo = nlohmann::json::parse(read_file(b + ".config.json"));
  CHECK(echo["threshold"] == "inf");

  SUBCASE("explicit pose") {
    const Run r = cli({"render", "--field", w.field, "--pose", "1,0,0,0,0,1,0,0,0,0,1,-3",
                       "--width", "8", "--height", "6", "--out-prefix", c});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const ImageRGB img = load_png(c + "_rgb.png");
    CHECK(img.width == 8);
    CHECK(img.height == 6);
  }
}

TEST_CASE("eval and sweep") {
  Workspace& w = workspace();
  const std::string gt = (fs::path(w.scene).parent_path() / "gt_field.vxf").string();
  const std::string member = (w.dir / "member.vxf").string();
  REQUIRE(cli({"train", "--scene", w.scene, "--out", member, "--resolution", "12",
               "--iterations", "30", "--batch-rays", "512", "--samples", "24", "--seed", "7"})
              .code == 0);
  const std::string report = (w.dir / "report.json").string();
  const Run e = cli({"eval", "--scene", w.scene, "--field", w.field, "--uncertainty", w.unc,
                     "--gt-field", gt, "--report", report, "--ensemble", w.field, member,
                     "--threshold", "0.5", "--samples", "32"});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const auto j = nlohmann::json::parse(read_file(report));
  for (const char* key : {"ause", "psnr", "coverage", "spearman", "curves", "ause_ensemble"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j["views"] == 2.0);
  CHECK(e.out.find("ause=") == 0);
  CHECK(fs::exists(w.dir / "report.txt"));

  const std::string sweep_dir = (w.dir / "sweep").string();
  const Run s = cli({"sweep", "--scene", w.scene, "--field", w.field, "--uncertainty", w.unc,
                     "--out-dir", sweep_dir, "--thresholds", "1.0,0.5,0.1", "--samples", "32"});
  REQUIRE_MESSAGE(s.code == 0, s.err);
  CHECK(s.out.find("threshold=none coverage=1") == 0);
  const auto rows = nlohmann::json::parse(read_file(fs::path(sweep_dir) / "sweep.json"));
  CHECK(rows.size() == 4);
  CHECK(fs::exists(fs::path(sweep_dir) / "sweep_none.png"));
}

TEST_CASE("errors are reported on one line") {
  Workspace& w = workspace();
  auto single_line = [](const Run& r, const std::string& prefix) {
    CHECK(r.err.rfind(prefix, 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  };
  const Run none = cli({});
  CHECK(none.code == 2);
  const Run unknown = cli({"frobnicate"});
  CHECK(unknown.code == 2);
  single_line(unknown, "error: usage: ");
  const Run missing_flag = cli({"train", "--scene", w.scene});
  CHECK(missing_flag.code == 2);
  single_line(missing_flag, "error: usage: ");
  const Run missing = cli({"render", "--field", (w.dir / "nope.vxf").string(), "--pose",
                           "1,0,0,0,0,1,0,0,0,0,1,-3", "--out-prefix", (w.dir / "x").string()});
  CHECK(missing.code == 1);
  single_line(missing, "error: missing_file: ");
  const Run pose = cli({"render", "--field", w.field, "--pose", "1,0,0,0,0,1,0,0,0,0,-1,-3",
                        "--out-prefix", (w.dir / "x").string()});
  CHECK(pose.code == 1);
  single_line(pose, "error: pose: ");
  const Run corrupt_path = (write_file_atomic(w.dir / "bad.vxf", "XXXXjunk"),
                            cli({"render", "--field", (w.dir / "bad.vxf").string(), "--pose",
                                 "1,0,0,0,0,1,0,0,0,0,1,-3", "--out-prefix",
                                 (w.dir / "x").string()}));
  CHECK(corrupt_path.code == 1);
  single_line(corrupt_path, "error: format: ");
  const Run channel = cli({"render", "--field", w.field, "--scene", w.scene, "--channels",
                           "normals", "--out-prefix", (w.dir / "x").string()});
  CHECK(channel.code == 2);
  const Run threshold = cli({"render", "--field", w.field, "--scene", w.scene, "--threshold",
                             "0.5", "--out-prefix", (w.dir / "x").string()});
  CHECK(threshold.code == 2);
  single_line(threshold, "error: usage: ");
  const Run serve = cli({"serve", "--field", (w.dir / "nope.vxf").string(), "--uncertainty",
                         w.unc, "--port", "0"});
  CHECK(serve.code == 1);
  CHECK(serve.err.find("error: missing_file: ") != std::string::npos);
  const Run help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("synth") != std::string::npos);
}
