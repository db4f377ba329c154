#pragma once

#include <string>
#include <vector>

#include "meshfield/image.hpp"
#include "meshfield/renderer.hpp"
#include "meshfield/vec3.hpp"

namespace meshfield {

// Scene description in the synthetic-NeRF transforms layout: a shared
// horizontal field of view plus one camera-to-world matrix per frame.
struct SceneManifest {
  struct Frame {
    std::string file_path;  // stored verbatim; ".png" appended when resolving
    Affine c2w;

    bool operator==(const Frame&) const = default;
  };
  double camera_angle_x = 0;
  std::vector<Frame> frames;

  bool operator==(const SceneManifest&) const = default;
};

// Validates rigidity of every transform (1e-4) and that every referenced
// image exists next to the manifest.
SceneManifest load_manifest(const std::string& path);
// Parse only, no filesystem checks; backs the round-trip property.
SceneManifest parse_manifest(const std::string& json_text);
std::string emit_manifest(const SceneManifest& m);
void save_manifest(const SceneManifest& m, const std::string& path);

// Image path for a frame, relative to the manifest's directory.
std::string frame_image_path(const std::string& manifest_path, const std::string& file_path);

struct Dataset {
  int width = 0;
  int height = 0;
  std::vector<Camera> cameras;
  std::vector<ImageF> images;              // straight alpha, as stored
  std::vector<std::vector<Vec3>> targets;  // premultiplied over the background
  std::vector<std::string> names;
};

Dataset load_dataset(const std::string& manifest_path, const Vec3& background);

}  // namespace meshfield
