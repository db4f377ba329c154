#include "meshfield/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "meshfield/errors.hpp"

namespace meshfield {

namespace {

using nlohmann::json;

Affine affine_from_matrix(const json& m, size_t frame_index) {
  const std::string where = "frame " + std::to_string(frame_index) + " transform_matrix";
  if (!m.is_array() || m.size() != 4) fail(ErrorKind::parse, where + " must be a 4x4 array");
  double rows[4][4];
  for (size_t r = 0; r < 4; ++r) {
    if (!m[r].is_array() || m[r].size() != 4)
      fail(ErrorKind::parse, where + " must be a 4x4 array");
    for (size_t c = 0; c < 4; ++c) {
      if (!m[r][c].is_number()) fail(ErrorKind::parse, where + " has a non-numeric entry");
      rows[r][c] = m[r][c].get<double>();
    }
  }
  const double bottom[4] = {0, 0, 0, 1};
  for (size_t c = 0; c < 4; ++c)
    if (std::abs(rows[3][c] - bottom[c]) > 1e-9)
      fail(ErrorKind::validation, where + " bottom row must be [0, 0, 0, 1]");
  Affine a;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.linear(r, c) = rows[r][c];
    a.offset[r] = rows[r][3];
  }
  return a;
}

json matrix_from_affine(const Affine& a) {
  json m = json::array();
  for (int r = 0; r < 3; ++r)
    m.push_back({a.linear(r, 0), a.linear(r, 1), a.linear(r, 2), a.offset[r]});
  m.push_back({0.0, 0.0, 0.0, 1.0});
  return m;
}

}  // namespace

SceneManifest parse_manifest(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::parse, std::string("manifest is not valid json: ") + e.what());
  }
  if (!root.is_object() || !root.contains("camera_angle_x") ||
      !root["camera_angle_x"].is_number())
    fail(ErrorKind::parse, "manifest needs a numeric camera_angle_x");
  if (!root.contains("frames") || !root["frames"].is_array())
    fail(ErrorKind::parse, "manifest needs a frames array");

  SceneManifest m;
  m.camera_angle_x = root["camera_angle_x"].get<double>();
  for (size_t i = 0; i < root["frames"].size(); ++i) {
    const json& f = root["frames"][i];
    if (!f.is_object() || !f.contains("file_path") || !f["file_path"].is_string() ||
        !f.contains("transform_matrix"))
      fail(ErrorKind::parse,
           "frame " + std::to_string(i) + " needs file_path and transform_matrix");
    SceneManifest::Frame frame;
    frame.file_path = f["file_path"].get<std::string>();
    frame.c2w = affine_from_matrix(f["transform_matrix"], i);
    const double err = rotation_error(frame.c2w.linear);
    if (!(err <= 1e-4))
      fail(ErrorKind::validation, "frame " + std::to_string(i) +
                                      " transform is not rigid (rotation deviation " +
                                      std::to_string(err) + ")");
    m.frames.push_back(std::move(frame));
  }
  return m;
}

std::string emit_manifest(const SceneManifest& m) {
  json root;
  root["camera_angle_x"] = m.camera_angle_x;
  root["frames"] = json::array();
  for (const SceneManifest::Frame& f : m.frames)
    root["frames"].push_back(
        {{"file_path", f.file_path}, {"transform_matrix", matrix_from_affine(f.c2w)}});
  return root.dump(2) + "\n";
}

std::string frame_image_path(const std::string& manifest_path, const std::string& file_path) {
  namespace fs = std::filesystem;
  fs::path p(file_path);
  if (p.extension() != ".png") p += ".png";
  return (fs::path(manifest_path).parent_path() / p).lexically_normal().string();
}

SceneManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::missing_file, "cannot open manifest " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  SceneManifest m = parse_manifest(buf.str());
  for (const SceneManifest::Frame& f : m.frames) {
    const std::string img = frame_image_path(path, f.file_path);
    if (!std::filesystem::exists(img))
      fail(ErrorKind::missing_file, "manifest references missing image " + img);
  }
  return m;
}

void save_manifest(const SceneManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::missing_file, "cannot create manifest " + path);
  out << emit_manifest(m);
  if (!out) fail(ErrorKind::parse, "failed writing manifest " + path);
}

Dataset load_dataset(const std::string& manifest_path, const Vec3& background) {
  const SceneManifest m = load_manifest(manifest_path);
  if (m.frames.empty()) fail(ErrorKind::validation, "manifest has no frames");

  Dataset data;
  for (size_t i = 0; i < m.frames.size(); ++i) {
    ImageF img = read_png(frame_image_path(manifest_path, m.frames[i].file_path));
    if (i == 0) {
      data.width = img.width;
      data.height = img.height;
    } else if (img.width != data.width || img.height != data.height) {
      fail(ErrorKind::mismatch, "frame " + m.frames[i].file_path +
                                    " size differs from the first frame");
    }
    data.cameras.push_back(
        camera_from_fov(img.width, img.height, m.camera_angle_x, m.frames[i].c2w));
    std::vector<Vec3> target(size_t(img.width) * img.height);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        const double* px = img.pixel(x, y);
        const double alpha = px[3];
        target[size_t(y) * img.width + x] = Vec3{px[0], px[1], px[2]} * alpha +
                                            (1.0 - alpha) * background;
      }
    data.targets.push_back(std::move(target));
    data.images.push_back(std::move(img));
    data.names.push_back(m.frames[i].file_path);
  }
  return data;
}

}  // namespace meshfield
