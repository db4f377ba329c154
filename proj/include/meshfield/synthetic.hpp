#pragma once

#include <cstdint>
#include <string>

#include "meshfield/bvh.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/renderer.hpp"

namespace meshfield {

// Fixed smooth rgb pattern; gives every surface region a distinctive color so
// pose and expression errors show up in the photometric loss.
Vec3 synthetic_surface_color(const Vec3& x);

// Ground-truth shader for generated datasets: analytic shell density plus the
// procedural color.
struct SyntheticShader {
  const Bvh* bvh;
  const TriangleMesh* mesh;
  double eps = 0.02;

  ShadedSample shade(const Vec3& x) const {
    const SurfacePoint sp = closest_point(*bvh, *mesh, x);
    const double s = shell_density(sp.distance, eps);
    if (s <= 0.0) return {};
    return {s, synthetic_surface_color(x)};
  }
};

struct SyntheticSpec {
  int train_views = 100;
  int test_views = 20;
  int image_size = 200;
  int subdiv = 3;
  double shell_eps = 0.02;
  int samples_per_ray = 256;
  uint64_t seed = 1;
  double radius = 3.0;  // camera orbit radius
  double fov_deg = 50.0;
  double max_elev_deg = 25.0;
};

// Expression used by the generated scene (psi = [0.4, -0.3]); beta and phi
// stay zero.
FaceParams synthetic_gt_params(const HeadModelAssets& assets);

// Camera at `position` looking at the origin, +y up.
Affine look_at_origin(const Vec3& position);

// Writes assets.mfh, gt_params.json, transforms_train.json/transforms_test.json
// plus the train/ and test/ image directories under out_dir. Rays use bin
// midpoints (no jitter), so a given spec reproduces every byte.
void generate_synthetic_scene(const SyntheticSpec& spec, const std::string& out_dir);

}  // namespace meshfield
