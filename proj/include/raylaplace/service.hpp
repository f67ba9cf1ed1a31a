// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/render.hpp"
#include "raylaplace/uncertainty_field.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace raylaplace {

inline constexpr std::uint32_t kMaxServedPixels = 512;

struct HttpResponse {
  int status = 200;
  std::string content_type = "text/plain";
  std::string body;
};

/// Nine-stop viridis ramp, linearly interpolated; t is clamped to [0,1].
std::array<std::uint8_t, 3> viridis(double t);

/// 12 comma separated numbers, row-major 3x4 world_from_camera.
/// Throws std::invalid_argument when malformed.
std::array<double, 12> parse_pose(const std::string& csv);
std::array<double, 12> pose_of(const Camera& camera);

/// Request handlers for the render service, independent of the transport.
/// Artifacts are shared read-only; until load() is called every data
/// endpoint answers 503.
class RenderService {
 public:
  explicit RenderService(std::uint32_t samples = 64);

  void load(VoxelField field, UncertaintyField uncertainty, Camera default_camera);
  bool ready() const;

  HttpResponse healthz() const;
  HttpResponse meta() const;
  HttpResponse render(const std::map<std::string, std::string>& query) const;

 private:
  struct Artifacts {
    VoxelField field;
    UncertaintyField uncertainty;
    Camera default_camera;
  };
  std::shared_ptr<const Artifacts> snapshot() const;

  std::uint32_t samples_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Artifacts> artifacts_;
};

/// HTTP/1.1 transport for a RenderService.
class HttpServer {
 public:
  explicit HttpServer(RenderService& service);
  ~HttpServer();

  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace raylaplace
