// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/service.hpp"

#include "raylaplace/eval.hpp"
#include "raylaplace/io.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace raylaplace {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 9> kViridis{{
    {0x44, 0x01, 0x54},
    {0x48, 0x28, 0x78},
    {0x3E, 0x49, 0x89},
    {0x31, 0x68, 0x8E},
    {0x26, 0x82, 0x8E},
    {0x1F, 0x9E, 0x89},
    {0x35, 0xB7, 0x79},
    {0x6D, 0xCD, 0x59},
    {0xFD, 0xE7, 0x25},
}};

HttpResponse error(int status, const std::string& message) {
  return {status, "text/plain", message + "\n"};
}

double parse_number(const std::string& text, const char* name) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || !std::isfinite(v)) {
    throw std::invalid_argument(std::string("bad number for ") + name);
  }
  return v;
}

std::uint32_t parse_size(const std::string& text, const char* name) {
  const double v = parse_number(text, name);
  if (v != std::floor(v) || v < 1 || v > kMaxServedPixels) {
    throw std::invalid_argument(std::string(name) + " must be an integer in [1, 512]");
  }
  return static_cast<std::uint32_t>(v);
}

const std::string& required(const std::map<std::string, std::string>& q, const char* key) {
  const auto it = q.find(key);
  if (it == q.end()) throw std::invalid_argument(std::string("missing parameter ") + key);
  return it->second;
}

}  // namespace

std::array<std::uint8_t, 3> viridis(double t) {
  t = std::isfinite(t) ? std::clamp(t, 0.0, 1.0) : 1.0;
  const double s = t * double(kViridis.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(s), kViridis.size() - 2);
  const double f = s - double(i);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double v = (1.0 - f) * kViridis[i][c] + f * kViridis[i + 1][c];
    out[c] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

std::array<double, 12> parse_pose(const std::string& csv) {
  std::array<double, 12> pose{};
  std::size_t count = 0, start = 0;
  while (true) {
    const std::size_t comma = csv.find(',', start);
    const std::string item = csv.substr(start, comma == std::string::npos ? csv.npos : comma - start);
    if (count == 12) throw std::invalid_argument("pose needs 12 numbers");
    pose[count++] = parse_number(item, "pose");
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (count != 12) throw std::invalid_argument("pose needs 12 numbers");
  return pose;
}

std::array<double, 12> pose_of(const Camera& camera) {
  std::array<double, 12> pose{};
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) pose[4 * r + k] = camera.rotation(r, k);
    pose[4 * r + 3] = camera.translation[r];
  }
  return pose;
}

RenderService::RenderService(std::uint32_t samples) : samples_(samples) {
  if (samples == 0) throw std::invalid_argument("service: samples must be >= 1");
}

void RenderService::load(VoxelField field, UncertaintyField uncertainty, Camera default_camera) {
  auto a = std::make_shared<Artifacts>(
      Artifacts{std::move(field), std::move(uncertainty), std::move(default_camera)});
  std::lock_guard lock(mutex_);
  artifacts_ = std::move(a);
}

std::shared_ptr<const RenderService::Artifacts> RenderService::snapshot() const {
  std::lock_guard lock(mutex_);
  return artifacts_;
}

bool RenderService::ready() const { return snapshot() != nullptr; }

HttpResponse RenderService::healthz() const {
  return {200, "text/plain", ready() ? "ok\n" : "loading\n"};
}

HttpResponse RenderService::meta() const {
  const auto a = snapshot();
  if (!a) return error(503, "loading");
  const Aabb& box = a->field.bounds;
  const Camera& cam = a->default_camera;
  nlohmann::json j;
  j["aabb"] = {{box.min_corner.x(), box.min_corner.y(), box.min_corner.z()},
               {box.max_corner.x(), box.max_corner.y(), box.max_corner.z()}};
  j["M"] = a->uncertainty.resolution();
  j["log_sigma_range"] = {a->uncertainty.log_min, a->uncertainty.log_max};
  j["default_camera"] = {{"pose", pose_of(cam)}, {"fx", cam.fx},        {"fy", cam.fy},
                         {"cx", cam.cx},         {"cy", cam.cy},        {"w", cam.width},
                         {"h", cam.height}};
  return {200, "application/json", j.dump()};
}

HttpResponse RenderService::render(const std::map<std::string, std::string>& query) const {
  const auto a = snapshot();
  if (!a) return error(503, "loading");

  const auto ch = query.find("channel");
  const std::string channel = ch == query.end() ? "rgb" : ch->second;
  if (channel != "rgb" && channel != "unc" && channel != "depth" && channel != "filtered") {
    return error(404, "unknown channel " + channel);
  }

  Camera cam;
  RenderOptions opts;
  try {
    const auto pose = parse_pose(required(query, "pose"));
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) cam.rotation(r, k) = pose[4 * r + k];
      cam.translation[r] = pose[4 * r + 3];
    }
    cam.fx = parse_number(required(query, "fx"), "fx");
    cam.fy = parse_number(required(query, "fy"), "fy");
    cam.width = parse_size(required(query, "w"), "w");
    cam.height = parse_size(required(query, "h"), "h");
    const auto cx = query.find("cx"), cy = query.find("cy");
    cam.cx = cx == query.end() ? 0.5 * cam.width : parse_number(cx->second, "cx");
    cam.cy = cy == query.end() ? 0.5 * cam.height : parse_number(cy->second, "cy");
    cam.validate();

    opts.samples = samples_;
    opts.mode = SampleMode::Midpoint;
    opts.uncertainty_channel = channel == "unc";
    if (channel == "filtered") {
      const auto th = query.find("threshold");
      opts.threshold = th == query.end() ? 1.0 : parse_number(th->second, "threshold");
    }
  } catch (const std::exception& e) {
    return error(400, e.what());
  }

  const ChannelImage img = render_channels(a->field, cam, opts, &a->uncertainty);
  if (channel == "depth") {
    const PlaneF planes[] = {img.depth};
    return {200, "application/octet-stream", encode_float_planes(planes)};
  }
  if (channel == "unc") {
    const PlaneF score = uncertainty_score(img);
    std::vector<std::uint8_t> rgb(3 * score.size());
    for (std::size_t i = 0; i < score.size(); ++i) {
      const auto c = viridis(score.data[i]);
      std::copy(c.begin(), c.end(), rgb.begin() + 3 * i);
    }
    return {200, "image/png", encode_png_rgb8(img.width, img.height, rgb)};
  }
  return {200, "image/png", encode_png(img.rgb)};
}

// --- transport ----------------------------------------------------------------

struct HttpServer::Impl {
  RenderService& service;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const HttpResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(RenderService& service) : impl_(new Impl{service, {}}) {
  Impl& impl = *impl_;
  const unsigned workers = std::max(2u, worker_count());
  impl.server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  impl.server.Get("/healthz", [&impl](const httplib::Request&, httplib::Response& res) {
    reply(res, impl.service.healthz());
  });
  impl.server.Get("/meta", [&impl](const httplib::Request&, httplib::Response& res) {
    reply(res, impl.service.meta());
  });
  impl.server.Get("/render", [&impl](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [key, value] : req.params) {
      if (!query.emplace(key, value).second) {
        reply(res, error(400, "duplicate parameter " + key));
        return;
      }
    }
    reply(res, impl.service.render(query));
  });
  impl.server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          what = e.what();
        } catch (...) {
        }
        reply(res, error(500, what));
      });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace raylaplace
