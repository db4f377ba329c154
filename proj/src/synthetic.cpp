#include "meshfield/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "meshfield/errors.hpp"
#include "meshfield/image.hpp"
#include "meshfield/manifest.hpp"
#include "meshfield/rng.hpp"

namespace meshfield {

namespace {

void validate_spec(const SyntheticSpec& spec) {
  if (spec.train_views < 1) fail(ErrorKind::config, "train_views must be at least 1");
  if (spec.test_views < 0) fail(ErrorKind::config, "test_views must be >= 0");
  if (spec.image_size < 8) fail(ErrorKind::config, "image_size must be at least 8");
  if (spec.subdiv < 0 || spec.subdiv > 6) fail(ErrorKind::config, "subdiv must lie in [0, 6]");
  if (!(spec.shell_eps > 0)) fail(ErrorKind::config, "shell_eps must be positive");
  if (spec.samples_per_ray < 1) fail(ErrorKind::config, "samples_per_ray must be at least 1");
  if (!(spec.radius > 0)) fail(ErrorKind::config, "radius must be positive");
  if (!(spec.fov_deg > 0 && spec.fov_deg < 180))
    fail(ErrorKind::config, "fov_deg must lie in (0, 180)");
  if (!(spec.max_elev_deg >= 0 && spec.max_elev_deg < 90))
    fail(ErrorKind::config, "max_elev_deg must lie in [0, 90)");
}

Affine orbit_camera(Rng& rng, double radius, double max_elev_rad) {
  const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double elev = rng.uniform(-max_elev_rad, max_elev_rad);
  const Vec3 pos{radius * std::cos(elev) * std::sin(azimuth), radius * std::sin(elev),
                 radius * std::cos(elev) * std::cos(azimuth)};
  return look_at_origin(pos);
}

}  // namespace

Vec3 synthetic_surface_color(const Vec3& x) {
  return {0.5 + 0.4 * std::sin(2.0 * x.x + 0.5 * x.y),
          0.5 + 0.4 * std::sin(2.2 * x.y + 0.4 * x.z - 1.0),
          0.5 + 0.4 * std::sin(1.8 * x.z + 0.6 * x.x + 2.1)};
}

FaceParams synthetic_gt_params(const HeadModelAssets& assets) {
  FaceParams p = FaceParams::zero(assets);
  if (p.psi.size() < 2)
    fail(ErrorKind::validation, "synthetic scene needs at least 2 expression coefficients");
  p.psi[0] = 0.4;
  p.psi[1] = -0.3;
  return p;
}

Affine look_at_origin(const Vec3& position) {
  const Vec3 up{0, 1, 0};
  const Vec3 z = normalize(position);  // camera looks down -z, toward the origin
  Vec3 x = cross(up, z);
  const double len = length(x);
  if (len < 1e-9)
    fail(ErrorKind::validation, "camera position is parallel to the up axis");
  x = (1.0 / len) * x;
  const Vec3 y = cross(z, x);
  Affine c2w;
  c2w.linear(0, 0) = x.x; c2w.linear(1, 0) = x.y; c2w.linear(2, 0) = x.z;
  c2w.linear(0, 1) = y.x; c2w.linear(1, 1) = y.y; c2w.linear(2, 1) = y.z;
  c2w.linear(0, 2) = z.x; c2w.linear(1, 2) = z.y; c2w.linear(2, 2) = z.z;
  c2w.offset = position;
  return c2w;
}

void generate_synthetic_scene(const SyntheticSpec& spec, const std::string& out_dir) {
  validate_spec(spec);
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "train");
  fs::create_directories(fs::path(out_dir) / "test");

  HeadModelAssets assets = make_toy_head(spec.subdiv, spec.seed);
  save_head_assets(assets, (fs::path(out_dir) / "assets.mfh").string());

  const FaceParams gt = synthetic_gt_params(assets);
  {
    nlohmann::json j;
    j["beta"] = gt.beta;
    j["psi"] = gt.psi;
    j["phi"] = gt.phi;
    std::ofstream out(fs::path(out_dir) / "gt_params.json", std::ios::binary);
    if (!out) fail(ErrorKind::missing_file, "cannot create gt_params.json in " + out_dir);
    out << j.dump(2) << "\n";
  }

  TriangleMesh mesh = deform(assets, gt);
  const Bvh bvh = build_bvh(mesh);
  const SceneBounds bounds = scene_bounds(assets);
  const double fov = spec.fov_deg * std::numbers::pi / 180.0;
  const double max_elev = spec.max_elev_deg * std::numbers::pi / 180.0;

  RenderSettings settings;
  settings.samples_per_ray = spec.samples_per_ray;
  settings.stratified = false;
  settings.seed = spec.seed;
  settings.shell_skip = true;
  const ShellClip clip{&bvh, spec.shell_eps};
  const SyntheticShader shader{&bvh, &mesh, spec.shell_eps};

  const struct {
    const char* name;
    int views;
    uint64_t stream;
  } splits[2] = {{"train", spec.train_views, 0x747261696eULL},
                 {"test", spec.test_views, 0x74657374ULL}};

  for (const auto& split : splits) {
    Rng rng(hash_mix(spec.seed, split.stream));
    SceneManifest manifest;
    manifest.camera_angle_x = fov;
    for (int i = 0; i < split.views; ++i) {
      const Affine c2w = orbit_camera(rng, spec.radius, max_elev);
      const Camera cam = camera_from_fov(spec.image_size, spec.image_size, fov, c2w);
      const ImageF img = render_image(shader, cam, bounds, settings, clip);
      const std::string rel = std::string("./") + split.name + "/r_" + std::to_string(i);
      write_png(img, (fs::path(out_dir) / (rel.substr(2) + ".png")).string());
      manifest.frames.push_back({rel, c2w});
    }
    save_manifest(manifest,
                  (fs::path(out_dir) / (std::string("transforms_") + split.name + ".json"))
                      .string());
  }
}

}  // namespace meshfield
