#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "meshfield/errors.hpp"
#include "meshfield/field.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/manifest.hpp"
#include "meshfield/metrics.hpp"
#include "meshfield/renderer.hpp"
#include "meshfield/retarget.hpp"
#include "meshfield/run_config.hpp"
#include "meshfield/synthetic.hpp"
#include "meshfield/training.hpp"

namespace mf = meshfield;
namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) mf::fail(mf::ErrorKind::config, what + " path not set");
  if (!fs::exists(path)) mf::fail(mf::ErrorKind::missing_file, what + " not found: " + path);
}

bool parse_on_off(const std::string& v, const std::string& flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  mf::fail(mf::ErrorKind::config, flag + " must be on or off, got " + v);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) mf::fail(mf::ErrorKind::missing_file, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

mf::Affine orbit_pose(double radius, double azimuth, double elev) {
  const mf::Vec3 pos{radius * std::cos(elev) * std::sin(azimuth), radius * std::sin(elev),
                     radius * std::cos(elev) * std::cos(azimuth)};
  return mf::look_at_origin(pos);
}

std::string fmt_metric(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

constexpr double k_deg = std::numbers::pi / 180.0;

struct MakeSyntheticArgs {
  mf::SyntheticSpec spec;
  std::string out;

  void run() const {
    mf::generate_synthetic_scene(spec, out);
    std::printf("wrote synthetic scene to %s (%d train / %d test views)\n", out.c_str(),
                spec.train_views, spec.test_views);
  }
};

struct TrainArgs {
  std::string data_dir, manifest, assets, out, config;
  mf::RunConfig rc;

  void run() {
    if (!data_dir.empty()) {
      if (rc.manifest.empty()) rc.manifest = (fs::path(data_dir) / "transforms_train.json").string();
      if (rc.assets.empty()) rc.assets = (fs::path(data_dir) / "assets.mfh").string();
    }
    if (!manifest.empty()) rc.manifest = manifest;
    if (!assets.empty()) rc.assets = assets;
    if (!out.empty()) rc.out_dir = out;
    if (rc.manifest.empty() || rc.assets.empty())
      mf::fail(mf::ErrorKind::config, "train needs --data, or --manifest plus --assets");
    if (rc.out_dir.empty()) mf::fail(mf::ErrorKind::config, "train needs --out");
    require_file(rc.manifest, "manifest");
    require_file(rc.assets, "assets");

    const mf::HeadModelAssets head = mf::load_head_assets(rc.assets);
    const mf::Dataset data = mf::load_dataset(rc.manifest, rc.train.background);
    mf::TrainState state = mf::make_train_state(head, rc.train);
    fs::create_directories(rc.out_dir);
    mf::save_run_config(rc, (fs::path(rc.out_dir) / "run_config.json").string());
    mf::run_training(state, data, rc.out_dir);
    std::printf("wrote %s/checkpoint_final.mfc and train_log.csv\n", rc.out_dir.c_str());
  }
};

struct RenderArgs {
  std::string checkpoint, assets, out, manifest;
  int orbit = 0;
  double radius = 3.0, elev_deg = 10.0, fov_deg = 50.0;
  int size = 200, samples = 192;
  uint64_t seed = 1;

  void run() const {
    require_file(checkpoint, "checkpoint");
    require_file(assets, "assets");
    if (out.empty()) mf::fail(mf::ErrorKind::config, "render needs --out");
    if (manifest.empty() && orbit <= 0)
      mf::fail(mf::ErrorKind::config, "render needs --manifest or --orbit N");

    const mf::HeadModelAssets head = mf::load_head_assets(assets);
    const mf::Checkpoint ckpt = mf::load_checkpoint(checkpoint, head);
    const mf::TriangleMesh mesh = mf::deform(head, ckpt.face);
    const mf::Bvh bvh = mf::build_bvh(mesh);
    const mf::SceneBounds bounds = mf::scene_bounds(head);

    std::vector<mf::Camera> cams;
    if (!manifest.empty()) {
      // parse only: rendering novel views must not require target images
      const mf::SceneManifest m = mf::parse_manifest(read_text(manifest));
      for (const auto& f : m.frames)
        cams.push_back(mf::camera_from_fov(size, size, m.camera_angle_x, f.c2w));
    } else {
      for (int i = 0; i < orbit; ++i)
        cams.push_back(mf::camera_from_fov(
            size, size, fov_deg * k_deg,
            orbit_pose(radius, 2.0 * std::numbers::pi * i / orbit, elev_deg * k_deg)));
    }

    mf::RenderSettings settings;
    settings.samples_per_ray = samples;
    settings.stratified = false;
    settings.seed = seed;
    fs::create_directories(out);
    for (size_t i = 0; i < cams.size(); ++i) {
      const mf::ImageF img = mf::render_field_image(ckpt.field, bvh, mesh, cams[i], bounds,
                                                    settings);
      char name[32];
      std::snprintf(name, sizeof name, "view_%04zu.png", i);
      mf::write_png(img, (fs::path(out) / name).string());
      std::printf("wrote %s\n", (fs::path(out) / name).string().c_str());
    }
  }
};

struct AnimateArgs {
  std::string checkpoint, assets, keyframes, out;
  std::string mouth_filter = "off";
  std::string density = "analytic";
  int samples = 192;
  uint64_t seed = 1;

  void run() const {
    require_file(checkpoint, "checkpoint");
    require_file(assets, "assets");
    require_file(keyframes, "keyframes");
    if (out.empty()) mf::fail(mf::ErrorKind::config, "animate needs --out");
    const bool filter = parse_on_off(mouth_filter, "--mouth-filter");
    const mf::RetargetDensity mode = mf::parse_retarget_density(density);

    const mf::HeadModelAssets head = mf::load_head_assets(assets);
    const mf::Checkpoint ckpt = mf::load_checkpoint(checkpoint, head);

    nlohmann::json root;
    try {
      root = nlohmann::json::parse(read_text(keyframes));
    } catch (const nlohmann::json::exception& e) {
      mf::fail(mf::ErrorKind::parse, std::string("keyframes file is not valid json: ") + e.what());
    }
    if (!root.is_object() || !root.contains("frames") || !root["frames"].is_array())
      mf::fail(mf::ErrorKind::parse, "keyframes file needs a frames array");

    double radius = 3.0, azimuth_deg = 0.0, elev_deg = 0.0, fov_deg = 50.0;
    int size = 200;
    if (root.contains("camera")) {
      const auto& c = root["camera"];
      if (!c.is_object()) mf::fail(mf::ErrorKind::parse, "keyframes camera must be an object");
      if (c.contains("radius")) radius = c["radius"].get<double>();
      if (c.contains("azimuth_deg")) azimuth_deg = c["azimuth_deg"].get<double>();
      if (c.contains("elev_deg")) elev_deg = c["elev_deg"].get<double>();
      if (c.contains("fov_deg")) fov_deg = c["fov_deg"].get<double>();
      if (c.contains("size")) size = c["size"].get<int>();
    }
    const mf::Camera cam = mf::camera_from_fov(
        size, size, fov_deg * k_deg, orbit_pose(radius, azimuth_deg * k_deg, elev_deg * k_deg));

    mf::RenderSettings settings;
    settings.samples_per_ray = samples;
    settings.stratified = false;
    settings.seed = seed;

    fs::create_directories(out);
    const auto& frames = root["frames"];
    for (size_t i = 0; i < frames.size(); ++i) {
      // keyframes override only the parameter blocks they mention
      mf::FaceParams face = ckpt.face;
      const auto& f = frames[i];
      if (!f.is_object()) mf::fail(mf::ErrorKind::parse, "each keyframe must be an object");
      const auto load_block = [&](const char* key, std::vector<double>& dst) {
        if (!f.contains(key)) return;
        if (!f[key].is_array())
          mf::fail(mf::ErrorKind::parse, std::string("keyframe ") + key + " must be an array");
        std::vector<double> v = f[key].get<std::vector<double>>();
        if (v.size() != dst.size())
          mf::fail(mf::ErrorKind::mismatch,
                   std::string("keyframe ") + key + " length " + std::to_string(v.size()) +
                       " does not match the model (" + std::to_string(dst.size()) + ")");
        dst = std::move(v);
      };
      load_block("beta", face.beta);
      load_block("psi", face.psi);
      load_block("phi", face.phi);

      const mf::ImageF img = mf::render_retargeted(ckpt.field, head, ckpt.face, face, cam,
                                                   settings, mode, filter);
      char name[32];
      std::snprintf(name, sizeof name, "frame_%04zu.png", i);
      mf::write_png(img, (fs::path(out) / name).string());
      std::printf("wrote %s\n", (fs::path(out) / name).string().c_str());
    }
  }
};

struct EvalArgs {
  std::string checkpoint, assets, manifest, out;
  int samples = 192;
  uint64_t seed = 1;

  void run() const {
    require_file(checkpoint, "checkpoint");
    require_file(assets, "assets");
    require_file(manifest, "manifest");

    const mf::HeadModelAssets head = mf::load_head_assets(assets);
    const mf::Checkpoint ckpt = mf::load_checkpoint(checkpoint, head);
    const mf::Vec3 background{0, 0, 0};
    const mf::Dataset data = mf::load_dataset(manifest, background);
    const mf::TriangleMesh mesh = mf::deform(head, ckpt.face);
    const mf::Bvh bvh = mf::build_bvh(mesh);
    const mf::SceneBounds bounds = mf::scene_bounds(head);

    mf::RenderSettings settings;
    settings.samples_per_ray = samples;
    settings.stratified = false;
    settings.seed = seed;

    std::ostringstream csv;
    csv << "name,psnr,ssim\n";
    double psnr_sum = 0, ssim_sum = 0;
    for (size_t i = 0; i < data.cameras.size(); ++i) {
      const mf::ImageF img = mf::render_field_image(ckpt.field, bvh, mesh, data.cameras[i],
                                                    bounds, settings);
      const double p = mf::psnr(img, data.images[i], background);
      const double s = mf::ssim(img, data.images[i], background);
      psnr_sum += p;
      ssim_sum += s;
      csv << data.names[i] << "," << fmt_metric(p) << "," << fmt_metric(s) << "\n";
      std::printf("%s  psnr %s  ssim %s\n", data.names[i].c_str(), fmt_metric(p).c_str(),
                  fmt_metric(s).c_str());
    }
    const double n = double(data.cameras.size());
    csv << "mean," << fmt_metric(psnr_sum / n) << "," << fmt_metric(ssim_sum / n) << "\n";
    std::printf("mean  psnr %s  ssim %s\n", fmt_metric(psnr_sum / n).c_str(),
                fmt_metric(ssim_sum / n).c_str());

    if (!out.empty()) {
      std::ofstream file(out, std::ios::binary);
      if (!file) mf::fail(mf::ErrorKind::missing_file, "cannot create " + out);
      file << csv.str();
    }
  }
};

struct ExportMeshArgs {
  std::string checkpoint, assets, out;

  void run() const {
    require_file(checkpoint, "checkpoint");
    require_file(assets, "assets");
    if (out.empty()) mf::fail(mf::ErrorKind::config, "export-mesh needs --out");
    const mf::HeadModelAssets head = mf::load_head_assets(assets);
    const mf::Checkpoint ckpt = mf::load_checkpoint(checkpoint, head);
    const mf::TriangleMesh mesh = mf::deform(head, ckpt.face);
    mf::write_obj(mesh, out);
    std::printf("wrote %s (%zu vertices, %zu triangles)\n", out.c_str(), mesh.vertices.size(),
                mesh.triangles.size());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mesh-conditioned radiance field: dataset generation, training, rendering"};
  app.require_subcommand(1);

  MakeSyntheticArgs ms;
  auto* c_ms = app.add_subcommand("make-synthetic", "generate a toy-head ground-truth dataset");
  c_ms->add_option("--out", ms.out, "output directory")->required();
  c_ms->add_option("--views", ms.spec.train_views, "training views");
  c_ms->add_option("--test-views", ms.spec.test_views, "held-out views");
  c_ms->add_option("--seed", ms.spec.seed, "rng seed");
  c_ms->add_option("--size", ms.spec.image_size, "image width = height");
  c_ms->add_option("--subdiv", ms.spec.subdiv, "icosphere subdivisions");
  c_ms->add_option("--eps", ms.spec.shell_eps, "shell half-width");
  c_ms->add_option("--samples", ms.spec.samples_per_ray, "samples per ray");
  c_ms->add_option("--radius", ms.spec.radius, "camera orbit radius");
  c_ms->add_option("--fov", ms.spec.fov_deg, "horizontal fov, degrees");
  c_ms->add_option("--max-elev", ms.spec.max_elev_deg, "max camera elevation, degrees");
  c_ms->callback([&] { ms.run(); });

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "run the two-phase training loop");
  c_tr->add_option("--data", tr.data_dir, "dataset dir with transforms_train.json + assets.mfh");
  c_tr->add_option("--manifest", tr.manifest, "training manifest path");
  c_tr->add_option("--assets", tr.assets, "head assets path");
  c_tr->add_option("--out", tr.out, "output directory");
  c_tr->add_option("--config", tr.config, "run config json; flags override its values");
  auto* o_iters = c_tr->add_option("--iters", tr.rc.train.total_iters, "total iterations");
  auto* o_switch =
      c_tr->add_option("--phase-switch", tr.rc.train.phase_switch_iter, "phase-1 length");
  auto* o_eps0 = c_tr->add_option("--eps0", tr.rc.train.eps0, "initial shell half-width");
  auto* o_epsf = c_tr->add_option("--eps-final", tr.rc.train.eps_final, "final shell half-width");
  auto* o_rays = c_tr->add_option("--rays", tr.rc.train.rays_per_batch, "rays per batch");
  auto* o_samples =
      c_tr->add_option("--samples", tr.rc.train.samples_per_ray, "samples per ray");
  auto* o_seed = c_tr->add_option("--seed", tr.rc.train.seed, "rng seed");
  auto* o_ckpt =
      c_tr->add_option("--checkpoint-every", tr.rc.train.checkpoint_every, "checkpoint period");
  c_tr->callback([&] {
    if (!tr.config.empty()) {
      require_file(tr.config, "config");
      mf::RunConfig file_rc = mf::load_run_config(tr.config);
      // flags given on the command line win over file values
      if (o_iters->count()) file_rc.train.total_iters = tr.rc.train.total_iters;
      if (o_switch->count()) file_rc.train.phase_switch_iter = tr.rc.train.phase_switch_iter;
      if (o_eps0->count()) file_rc.train.eps0 = tr.rc.train.eps0;
      if (o_epsf->count()) file_rc.train.eps_final = tr.rc.train.eps_final;
      if (o_rays->count()) file_rc.train.rays_per_batch = tr.rc.train.rays_per_batch;
      if (o_samples->count()) file_rc.train.samples_per_ray = tr.rc.train.samples_per_ray;
      if (o_seed->count()) file_rc.train.seed = tr.rc.train.seed;
      if (o_ckpt->count()) file_rc.train.checkpoint_every = tr.rc.train.checkpoint_every;
      tr.rc = file_rc;
    }
    tr.run();
  });

  RenderArgs rd;
  auto* c_rd = app.add_subcommand("render", "render novel views from a checkpoint");
  c_rd->add_option("--checkpoint", rd.checkpoint, "checkpoint path")->required();
  c_rd->add_option("--assets", rd.assets, "head assets path")->required();
  c_rd->add_option("--out", rd.out, "output directory")->required();
  c_rd->add_option("--manifest", rd.manifest, "render the cameras of this manifest");
  c_rd->add_option("--orbit", rd.orbit, "render N evenly spaced orbit views");
  c_rd->add_option("--radius", rd.radius, "orbit radius");
  c_rd->add_option("--elev", rd.elev_deg, "orbit elevation, degrees");
  c_rd->add_option("--fov", rd.fov_deg, "orbit fov, degrees");
  c_rd->add_option("--size", rd.size, "image width = height");
  c_rd->add_option("--samples", rd.samples, "samples per ray");
  c_rd->add_option("--seed", rd.seed, "rng seed");
  c_rd->callback([&] { rd.run(); });

  AnimateArgs an;
  auto* c_an = app.add_subcommand("animate", "render retargeted expression keyframes");
  c_an->add_option("--checkpoint", an.checkpoint, "checkpoint path")->required();
  c_an->add_option("--assets", an.assets, "head assets path")->required();
  c_an->add_option("--keyframes", an.keyframes, "keyframes json")->required();
  c_an->add_option("--out", an.out, "output directory")->required();
  c_an->add_option("--mouth-filter", an.mouth_filter, "on|off (default off)");
  c_an->add_option("--retarget-density", an.density, "analytic|learned (default analytic)");
  c_an->add_option("--samples", an.samples, "samples per ray");
  c_an->add_option("--seed", an.seed, "rng seed");
  c_an->callback([&] { an.run(); });

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "psnr/ssim table against a manifest");
  c_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  c_ev->add_option("--assets", ev.assets, "head assets path")->required();
  c_ev->add_option("--manifest", ev.manifest, "evaluation manifest path")->required();
  c_ev->add_option("--out", ev.out, "csv output path (stdout table always printed)");
  c_ev->add_option("--samples", ev.samples, "samples per ray");
  c_ev->add_option("--seed", ev.seed, "rng seed");
  c_ev->callback([&] { ev.run(); });

  ExportMeshArgs ex;
  auto* c_ex = app.add_subcommand("export-mesh", "write the fitted mesh as obj");
  c_ex->add_option("--checkpoint", ex.checkpoint, "checkpoint path")->required();
  c_ex->add_option("--assets", ex.assets, "head assets path")->required();
  c_ex->add_option("--out", ex.out, "obj output path")->required();
  c_ex->callback([&] { ex.run(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config-error: " << e.what() << "\n";
    return 1;
  } catch (const mf::Error& e) {
    std::cerr << "error: " << mf::error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
