// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/io.hpp"

#include <Eigen/LU>
#include <nlohmann/json.hpp>
#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace raylaplace {

namespace fs = std::filesystem;

// --- byte helpers ------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
T swap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  void magic(std::string_view m) { out_.append(m); }
  template <class T>
  void put(T v) {
    v = swap_if_big(v);
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  std::string take() { return std::move(out_); }
  void reserve(std::size_t n) { out_.reserve(n); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

  void expect_magic(std::string_view m) {
    if (bytes_.size() < m.size()) throw TruncationError(std::string(what_) + ": file too short");
    if (bytes_.substr(0, m.size()) != m) throw FormatError(std::string(what_) + ": bad magic");
    pos_ = m.size();
  }
  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw TruncationError(std::string(what_) + ": truncated payload");
  }
  template <class T>
  T get() {
    require(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return swap_if_big(v);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const {
    if (remaining() != 0) throw FormatError(std::string(what_) + ": trailing bytes");
  }

 private:
  std::string_view bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void put_aabb(Writer& w, const Aabb& box) {
  for (int a = 0; a < 3; ++a) w.put<double>(box.min_corner[a]);
  for (int a = 0; a < 3; ++a) w.put<double>(box.max_corner[a]);
}

Aabb get_aabb(Reader& r, const char* what) {
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) lo[a] = r.get<double>();
  for (int a = 0; a < 3; ++a) hi[a] = r.get<double>();
  try {
    return Aabb(lo, hi);
  } catch (const std::invalid_argument&) {
    throw FormatError(std::string(what) + ": invalid bounds");
  }
}

// Largest vertex count accepted from a header (2^30 vertices).
constexpr std::uint64_t kMaxVertices = std::uint64_t(1) << 30;

GridDims checked_dims(std::uint32_t nx, std::uint32_t ny, std::uint32_t nz, const char* what) {
  if (nx < 2 || ny < 2 || nz < 2) throw FormatError(std::string(what) + ": resolution below 2");
  const std::uint64_t count = std::uint64_t(nx) * ny * nz;
  if (std::uint64_t(nx) * ny > kMaxVertices || count > kMaxVertices) {
    throw FormatError(std::string(what) + ": resolution overflow");
  }
  return {nx, ny, nz};
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

// --- field -------------------------------------------------------------------

std::string encode_field(const VoxelField& field) {
  Writer w;
  const GridDims d = field.dims();
  w.reserve(64 + 16 * d.count());
  w.magic("VXF1");
  w.put<std::uint32_t>(d.nx);
  w.put<std::uint32_t>(d.ny);
  w.put<std::uint32_t>(d.nz);
  put_aabb(w, field.bounds);
  for (float v : field.raw_density.data) w.put<float>(v);
  for (const Vec3f& c : field.raw_color.data) {
    w.put<float>(c.x());
    w.put<float>(c.y());
    w.put<float>(c.z());
  }
  return w.take();
}

VoxelField decode_field(std::string_view bytes) {
  Reader r(bytes, "field");
  r.expect_magic("VXF1");
  const auto nx = r.get<std::uint32_t>();
  const auto ny = r.get<std::uint32_t>();
  const auto nz = r.get<std::uint32_t>();
  const GridDims dims = checked_dims(nx, ny, nz, "field");
  const Aabb box = get_aabb(r, "field");
  r.require(16 * dims.count());
  VoxelField field(box, dims);
  for (float& v : field.raw_density.data) v = r.get<float>();
  for (Vec3f& c : field.raw_color.data) {
    c.x() = r.get<float>();
    c.y() = r.get<float>();
    c.z() = r.get<float>();
  }
  r.expect_end();
  return field;
}

void save_field(const fs::path& path, const VoxelField& field) {
  write_file_atomic(path, encode_field(field));
}

VoxelField load_field(const fs::path& path) { return decode_field(read_file(path)); }

// --- uncertainty ----------------------------------------------------------------

std::string encode_uncertainty(const UncertaintyField& field) {
  Writer w;
  w.magic("UNC1");
  w.put<std::uint32_t>(field.resolution());
  put_aabb(w, field.bounds);
  for (std::size_t v = 0; v < field.sigma.data.size(); ++v) {
    const Vec3f& a = field.sigma_axes.data[v];
    w.put<float>(a.x());
    w.put<float>(a.y());
    w.put<float>(a.z());
    w.put<float>(field.sigma.data[v]);
  }
  w.put<double>(field.log_min);
  w.put<double>(field.log_max);
  return w.take();
}

UncertaintyField decode_uncertainty(std::string_view bytes) {
  Reader r(bytes, "uncertainty");
  r.expect_magic("UNC1");
  const auto m = r.get<std::uint32_t>();
  const GridDims dims = checked_dims(m, m, m, "uncertainty");
  UncertaintyField uf;
  uf.bounds = get_aabb(r, "uncertainty");
  r.require(16 * dims.count() + 16);
  uf.sigma_axes = Grid3<Vec3f>(dims, Vec3f::Zero());
  uf.sigma = Grid3<float>(dims, 0.0f);
  for (std::size_t v = 0; v < dims.count(); ++v) {
    Vec3f& a = uf.sigma_axes.data[v];
    a.x() = r.get<float>();
    a.y() = r.get<float>();
    a.z() = r.get<float>();
    uf.sigma.data[v] = r.get<float>();
  }
  uf.log_min = r.get<double>();
  uf.log_max = r.get<double>();
  r.expect_end();
  return uf;
}

void save_uncertainty(const fs::path& path, const UncertaintyField& field) {
  write_file_atomic(path, encode_uncertainty(field));
}

UncertaintyField load_uncertainty(const fs::path& path) {
  return decode_uncertainty(read_file(path));
}

// --- float planes -------------------------------------------------------------

std::string encode_float_planes(std::span<const PlaneF> channels) {
  if (channels.empty()) throw std::invalid_argument("float planes: no channels");
  const std::uint32_t w = channels[0].width, h = channels[0].height;
  for (const PlaneF& p : channels) {
    if (p.width != w || p.height != h) throw std::invalid_argument("float planes: size mismatch");
  }
  Writer out;
  out.magic("IMGF");
  out.put<std::uint32_t>(w);
  out.put<std::uint32_t>(h);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(channels.size()));
  for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
    for (const PlaneF& p : channels) out.put<float>(p.data[i]);
  }
  return out.take();
}

std::vector<PlaneF> decode_float_planes(std::string_view bytes) {
  Reader r(bytes, "float planes");
  r.expect_magic("IMGF");
  const auto w = r.get<std::uint32_t>();
  const auto h = r.get<std::uint32_t>();
  const auto c = r.get<std::uint32_t>();
  if (c == 0 || std::uint64_t(w) * h * c > kMaxVertices) {
    throw FormatError("float planes: bad header");
  }
  r.require(std::size_t(w) * h * c * 4);
  std::vector<PlaneF> planes(c, PlaneF(w, h, 0.0f));
  for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
    for (PlaneF& p : planes) p.data[i] = r.get<float>();
  }
  r.expect_end();
  return planes;
}

void save_float_planes(const fs::path& path, std::span<const PlaneF> channels) {
  write_file_atomic(path, encode_float_planes(channels));
}

// --- PNG ---------------------------------------------------------------------

std::string encode_png_rgb8(std::uint32_t width, std::uint32_t height,
                            std::span<const std::uint8_t> rgb) {
  if (rgb.size() != std::size_t(width) * height * 3) {
    throw std::invalid_argument("png: pixel buffer size mismatch");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = width;
  image.height = height;
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb.data(), 0, nullptr)) {
    throw IoError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

std::string encode_png(const ImageRGB& img) {
  std::vector<std::uint8_t> rgb(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(double(img.data[i][c]), 0.0, 1.0);
      rgb[3 * i + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return encode_png_rgb8(img.width, img.height, rgb);
}

ImageRGB decode_png(std::string_view bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png decode failed: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError(std::string("png decode failed: ") + image.message);
  }
  ImageRGB out(image.width, image.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = Vec3f(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]) / 255.0f;
  }
  return out;
}

void save_png(const fs::path& path, const ImageRGB& image) {
  write_file_atomic(path, encode_png(image));
}

ImageRGB load_png(const fs::path& path) { return decode_png(read_file(path)); }

// --- scene manifest ---------------------------------------------------------------

std::vector<Camera> SceneBundle::cameras_of(std::span<const std::uint32_t> indices) const {
  std::vector<Camera> out;
  out.reserve(indices.size());
  for (std::uint32_t i : indices) out.push_back(cameras.at(i).camera);
  return out;
}

fs::path SceneBundle::image_path(std::uint32_t index) const {
  const fs::path file = cameras.at(index).file;
  return file.is_absolute() ? file : root / file;
}

bool SceneBundle::operator==(const SceneBundle& other) const {
  if (!(bounds == other.bounds) || train != other.train || test != other.test ||
      cameras.size() != other.cameras.size()) {
    return false;
  }
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const Camera& a = cameras[i].camera;
    const Camera& b = other.cameras[i].camera;
    if (cameras[i].file != other.cameras[i].file || a.rotation != b.rotation ||
        a.translation != b.translation || a.fx != b.fx || a.fy != b.fy || a.cx != b.cx ||
        a.cy != b.cy || a.width != b.width || a.height != b.height) {
      return false;
    }
  }
  return true;
}

namespace {

using nlohmann::json;

const json& member(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("manifest: missing ") + key);
  return j.at(key);
}

double number(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_number()) throw FormatError(std::string("manifest: ") + key + " is not a number");
  return v.get<double>();
}

std::uint32_t count(const json& j, const char* key) {
  const json& v = member(j, key);
  if (!v.is_number_integer() || v.get<std::int64_t>() <= 0 ||
      v.get<std::int64_t>() > std::int64_t(1) << 20) {
    throw FormatError(std::string("manifest: ") + key + " is not a positive integer");
  }
  return v.get<std::uint32_t>();
}

std::vector<double> numbers(const json& v, std::size_t n, const char* what) {
  if (!v.is_array() || v.size() != n) {
    throw FormatError(std::string("manifest: ") + what + " needs " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) throw FormatError(std::string("manifest: ") + what + " has a non-number");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::uint32_t> indices(const json& split, const char* key, std::size_t n) {
  std::vector<std::uint32_t> out;
  if (!split.contains(key)) return out;
  const json& v = split.at(key);
  if (!v.is_array()) throw FormatError(std::string("manifest: split.") + key + " is not a list");
  for (const json& e : v) {
    if (!e.is_number_integer()) throw FormatError("manifest: split index is not an integer");
    const auto i = e.get<std::int64_t>();
    if (i < 0 || std::size_t(i) >= n) throw InvariantViolation("manifest: split index out of range");
    out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

std::pair<std::uint32_t, std::uint32_t> png_size(const fs::path& path) {
  const std::string bytes = read_file(path);
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError("unreadable image " + path.string());
  }
  const std::pair<std::uint32_t, std::uint32_t> size{image.width, image.height};
  png_image_free(&image);
  return size;
}

}  // namespace

SceneBundle load_scene(const fs::path& path, bool check_images) {
  if (!fs::exists(path)) throw MissingFileError("manifest not found: " + path.string());
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }

  SceneBundle scene;
  scene.root = path.parent_path();
  {
    const json& box = member(doc, "aabb");
    if (!box.is_array() || box.size() != 2) throw FormatError("manifest: aabb needs two corners");
    const auto lo = numbers(box[0], 3, "aabb");
    const auto hi = numbers(box[1], 3, "aabb");
    try {
      scene.bounds = Aabb({lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]});
    } catch (const std::invalid_argument& e) {
      throw InvariantViolation(std::string("manifest: ") + e.what());
    }
  }

  const json& cams = member(doc, "cameras");
  if (!cams.is_array()) throw FormatError("manifest: cameras is not a list");
  for (const json& c : cams) {
    SceneCamera sc;
    const json& file = member(c, "file");
    if (!file.is_string()) throw FormatError("manifest: camera file is not a string");
    sc.file = file.get<std::string>();
    Camera& cam = sc.camera;
    cam.width = count(c, "width");
    cam.height = count(c, "height");
    cam.fx = number(c, "fx");
    cam.fy = number(c, "fy");
    cam.cx = number(c, "cx");
    cam.cy = number(c, "cy");
    const auto pose = numbers(member(c, "world_from_camera"), 12, "world_from_camera");
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) cam.rotation(r, k) = pose[4 * r + k];
      cam.translation[r] = pose[4 * r + 3];
    }
    if (!cam.rotation.allFinite() || !cam.translation.allFinite() ||
        std::abs(cam.rotation.determinant() - 1.0) > 1e-6 ||
        (cam.rotation.transpose() * cam.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
      throw PoseValidityError("manifest: camera " + sc.file + " has an invalid rotation");
    }
    if (!(cam.fx > 0.0) || !(cam.fy > 0.0)) {
      throw InvariantViolation("manifest: camera " + sc.file + " has non-positive focal length");
    }
    scene.cameras.push_back(std::move(sc));
  }

  const json& split = member(doc, "split");
  if (!split.is_object()) throw FormatError("manifest: split is not an object");
  scene.train = indices(split, "train", scene.cameras.size());
  scene.test = indices(split, "test", scene.cameras.size());
  if (scene.train.empty()) throw InvariantViolation("manifest: no train cameras");

  if (check_images) {
    for (std::uint32_t i = 0; i < scene.cameras.size(); ++i) {
      const fs::path img = scene.image_path(i);
      if (!fs::exists(img)) throw MissingFileError("image not found: " + img.string());
      const auto [w, h] = png_size(img);
      if (w != scene.cameras[i].camera.width || h != scene.cameras[i].camera.height) {
        throw InvariantViolation("image " + img.string() + " does not match its camera size");
      }
    }
  }
  return scene;
}

void save_scene(const SceneBundle& scene, const fs::path& path) {
  json doc;
  doc["aabb"] = {{scene.bounds.min_corner.x(), scene.bounds.min_corner.y(),
                  scene.bounds.min_corner.z()},
                 {scene.bounds.max_corner.x(), scene.bounds.max_corner.y(),
                  scene.bounds.max_corner.z()}};
  json cams = json::array();
  for (const SceneCamera& sc : scene.cameras) {
    const Camera& c = sc.camera;
    std::vector<double> pose;
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) pose.push_back(c.rotation(r, k));
      pose.push_back(c.translation[r]);
    }
    cams.push_back({{"file", sc.file},
                    {"width", c.width},
                    {"height", c.height},
                    {"fx", c.fx},
                    {"fy", c.fy},
                    {"cx", c.cx},
                    {"cy", c.cy},
                    {"world_from_camera", pose}});
  }
  doc["cameras"] = cams;
  doc["split"] = {{"train", scene.train}, {"test", scene.test}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

std::vector<ImageRGB> load_images(const SceneBundle& scene, std::span<const std::uint32_t> idx) {
  std::vector<ImageRGB> out;
  out.reserve(idx.size());
  for (std::uint32_t i : idx) {
    ImageRGB img = load_png(scene.image_path(i));
    const Camera& cam = scene.cameras.at(i).camera;
    if (img.width != cam.width || img.height != cam.height) {
      throw InvariantViolation("image size does not match camera " + std::to_string(i));
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace raylaplace
