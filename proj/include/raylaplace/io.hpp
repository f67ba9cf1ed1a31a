// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "raylaplace/field.hpp"
#include "raylaplace/render.hpp"
#include "raylaplace/uncertainty_field.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace raylaplace {

/// Base of all persistence errors. category() is a stable machine-readable tag.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "io"; }
};

class MissingFileError : public IoError {
 public:
  using IoError::IoError;
  const char* category() const noexcept override { return "missing_file"; }
};

class FormatError : public IoError {
 public:
  using IoError::IoError;
  const char* category() const noexcept override { return "format"; }
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* category() const noexcept override { return "truncated"; }
};

class InvariantViolation : public IoError {
 public:
  using IoError::IoError;
  const char* category() const noexcept override { return "invariant"; }
};

class PoseValidityError : public InvariantViolation {
 public:
  using InvariantViolation::InvariantViolation;
  const char* category() const noexcept override { return "pose"; }
};

// --- scene manifest ---------------------------------------------------------

struct SceneCamera {
  Camera camera;
  std::string file;  ///< image path, relative to the manifest directory
};

struct SceneBundle {
  Aabb bounds;
  std::vector<SceneCamera> cameras;
  std::vector<std::uint32_t> train;
  std::vector<std::uint32_t> test;
  std::filesystem::path root;  ///< directory image paths are resolved against

  std::vector<Camera> cameras_of(std::span<const std::uint32_t> indices) const;
  std::filesystem::path image_path(std::uint32_t index) const;
  bool operator==(const SceneBundle& other) const;
};

/// Parses and validates a manifest. With check_images, every referenced
/// image must exist and match its camera size.
SceneBundle load_scene(const std::filesystem::path& path, bool check_images = true);
void save_scene(const SceneBundle& scene, const std::filesystem::path& path);
std::vector<ImageRGB> load_images(const SceneBundle& scene, std::span<const std::uint32_t> indices);

// --- binary payloads (little endian, 4-byte magics) -------------------------

std::string encode_field(const VoxelField& field);
VoxelField decode_field(std::string_view bytes);
void save_field(const std::filesystem::path& path, const VoxelField& field);
VoxelField load_field(const std::filesystem::path& path);

std::string encode_uncertainty(const UncertaintyField& field);
UncertaintyField decode_uncertainty(std::string_view bytes);
void save_uncertainty(const std::filesystem::path& path, const UncertaintyField& field);
UncertaintyField load_uncertainty(const std::filesystem::path& path);

/// "IMGF" + width, height, channels (u32) + interleaved float32 values.
std::string encode_float_planes(std::span<const PlaneF> channels);
std::vector<PlaneF> decode_float_planes(std::string_view bytes);
void save_float_planes(const std::filesystem::path& path, std::span<const PlaneF> channels);

// --- 8-bit PNG ---------------------------------------------------------------

std::string encode_png(const ImageRGB& image);
/// Encodes already-quantized RGB8 pixels.
std::string encode_png_rgb8(std::uint32_t width, std::uint32_t height,
                            std::span<const std::uint8_t> rgb);
ImageRGB decode_png(std::string_view bytes);
void save_png(const std::filesystem::path& path, const ImageRGB& image);
ImageRGB load_png(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace raylaplace
