#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "meshfield/errors.hpp"
#include "meshfield/manifest.hpp"
#include "meshfield/metrics.hpp"
#include "meshfield/rng.hpp"
#include "meshfield/synthetic.hpp"
#include "meshfield/training.hpp"

using namespace meshfield;

namespace {

std::string temp_dir(const char* name) {
  const std::string p = (std::filesystem::temp_directory_path() / name).string();
  std::filesystem::remove_all(p);
  return p;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.rays_per_batch = 16;
  cfg.samples_per_ray = 48;
  cfg.num_frequencies = 2;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 16;
  cfg.skip_layer = 1;
  cfg.total_iters = 4;
  cfg.phase_switch_iter = 2;
  return cfg;
}

// Two-frame in-memory dataset: orbit cameras plus a flat target pattern.
Dataset tiny_dataset(int size) {
  Dataset d;
  d.width = size;
  d.height = size;
  const double fov = 0.9;
  for (int i = 0; i < 2; ++i) {
    const double az = 0.4 + 2.1 * i;
    const Vec3 pos{2.4 * std::sin(az), 0.3, 2.4 * std::cos(az)};
    d.cameras.push_back(camera_from_fov(size, size, fov, look_at_origin(pos)));
    std::vector<Vec3> target(size_t(size) * size);
    for (size_t p = 0; p < target.size(); ++p)
      target[p] = {0.1 + 0.02 * double(i), 0.3, 0.5 - 0.02 * double(p % 7)};
    d.targets.push_back(std::move(target));
    d.images.push_back(ImageF::make(size, size));
    d.names.push_back("frame_" + std::to_string(i));
  }
  return d;
}

std::vector<RayTask> shell_hitting_tasks(int count, uint64_t seed) {
  const Camera cam =
      camera_from_fov(24, 24, 0.8, look_at_origin({1.4, 0.7, 1.9}));
  Rng rng(seed);
  std::vector<RayTask> tasks;
  while (int(tasks.size()) < count) {
    RayTask t;
    t.ray = pixel_ray(cam, int(rng.below(24)), int(rng.below(24)));
    t.target = {rng.uniform(), rng.uniform(), rng.uniform()};
    t.rng_seed = hash_mix(seed, tasks.size(), 0x7261790aULL);
    tasks.push_back(t);
  }
  return tasks;
}

}  // namespace

TEST_CASE("train config validation names the offending field") {
  validate_train_config(TrainConfig{});  // defaults are valid

  auto rejects = [](auto&& mutate, const char* field) {
    TrainConfig cfg;
    mutate(cfg);
    try {
      validate_train_config(cfg);
      const std::string msg = std::string("expected config error for ") + field;
      FAIL(msg);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  rejects([](TrainConfig& c) { c.rays_per_batch = 0; }, "rays_per_batch");
  rejects([](TrainConfig& c) { c.samples_per_ray = -1; }, "samples_per_ray");
  rejects([](TrainConfig& c) { c.lr_network = 0; }, "lr_network");
  rejects([](TrainConfig& c) { c.lr_face = -1e-3; }, "lr_face");
  rejects([](TrainConfig& c) { c.adam_beta1 = 1.0; }, "adam_beta1");
  rejects([](TrainConfig& c) { c.adam_beta2 = -0.1; }, "adam_beta2");
  rejects([](TrainConfig& c) { c.adam_eps = 0; }, "adam_eps");
  rejects([](TrainConfig& c) { c.total_iters = 0; }, "total_iters");
  rejects([](TrainConfig& c) { c.phase_switch_iter = c.total_iters + 1; }, "phase_switch_iter");
  rejects([](TrainConfig& c) { c.eps0 = 0; }, "eps0");
  rejects([](TrainConfig& c) { c.eps_final = -0.1; }, "eps_final");
  rejects([](TrainConfig& c) { c.checkpoint_every = -1; }, "checkpoint_every");
  rejects([](TrainConfig& c) { c.hidden_layers = 0; }, "hidden_layers");
  rejects([](TrainConfig& c) { c.skip_layer = c.hidden_layers; }, "skip_layer");
  rejects([](TrainConfig& c) { c.background = {1.5, 0, 0}; }, "background");
}

TEST_CASE("photometric loss closed form and gradient") {
  const std::vector<Vec3> rendered{{0.5, 0.5, 0.5}, {1.0, 0.0, 0.25}};
  const std::vector<Vec3> target{{0.25, 0.5, 0.75}, {1.0, 0.5, 0.25}};
  std::vector<Vec3> grad;
  const double loss = photometric_loss(rendered, target, &grad);
  CHECK(loss == doctest::Approx(0.0625 + 0.0625 + 0.25).epsilon(1e-15));
  CHECK(max_abs(grad[0] - Vec3{0.5, 0.0, -0.5}) == 0.0);
  CHECK(max_abs(grad[1] - Vec3{0.0, -1.0, 0.0}) == 0.0);

  // Central differences confirm grad = 2 * diff.
  std::vector<Vec3> r = rendered;
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    r[1][c] += h;
    const double up = photometric_loss(r, target, nullptr);
    r[1][c] -= 2 * h;
    const double dn = photometric_loss(r, target, nullptr);
    r[1][c] += h;
    CHECK(grad[1][c] == doctest::Approx((up - dn) / (2 * h)).epsilon(1e-6));
  }

  std::vector<Vec3> short_target{{0, 0, 0}};
  CHECK_THROWS_AS(photometric_loss(rendered, short_target, nullptr), Error);
}

TEST_CASE("epsilon schedule endpoints are bitwise exact") {
  TrainConfig cfg;
  cfg.eps0 = 0.02;
  cfg.eps_final = 0.1;
  cfg.total_iters = 12000;
  cfg.phase_switch_iter = 10000;

  for (int iter : {1, 500, 9999, 10000}) CHECK(epsilon_schedule(iter, cfg) == 0.02);
  CHECK(epsilon_schedule(cfg.total_iters, cfg) == 0.1);
  CHECK(epsilon_schedule(11000, cfg) == doctest::Approx(0.06).epsilon(1e-15));

  // Monotone over the ramp.
  double prev = cfg.eps0;
  for (int iter = 10001; iter <= 12000; ++iter) {
    const double e = epsilon_schedule(iter, cfg);
    CHECK(e > prev);
    prev = e;
  }

  // All-phase-1 edge: switch == total keeps eps0 for every step.
  cfg.phase_switch_iter = cfg.total_iters;
  CHECK(epsilon_schedule(cfg.total_iters, cfg) == 0.02);
}

TEST_CASE("adam matches a hand-traced step and ignores zero gradients") {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> p{0.0};
  AdamState st;
  st.reset(1);

  adam_update(p, {1.0}, st, lr, b1, b2, eps);
  // t=1: m=0.1, v=0.001; bias correction makes mhat=1, vhat=1.
  const double step1 = lr * 1.0 / (1.0 + eps);
  CHECK(p[0] == doctest::Approx(-step1).epsilon(1e-15));
  CHECK(st.m[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(st.v[0] == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(st.t == 1);

  adam_update(p, {1.0}, st, lr, b1, b2, eps);
  // Constant gradient keeps mhat=vhat=1, so the move repeats.
  CHECK(p[0] == doctest::Approx(-2 * step1).epsilon(1e-14));

  // Zero gradient with zero moments is a bitwise no-op on the params.
  std::vector<double> q{0.75, -1.5};
  AdamState zs;
  zs.reset(2);
  adam_update(q, {0.0, 0.0}, zs, lr, b1, b2, eps);
  CHECK(q == std::vector<double>{0.75, -1.5});

  std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(adam_update(wrong, {1.0, 2.0}, zs, lr, b1, b2, eps), Error);
}

TEST_CASE("batch accumulation and train steps are deterministic") {
  const HeadModelAssets assets = make_toy_head(1, 11);
  const TrainConfig cfg = tiny_config();
  const Dataset data = tiny_dataset(12);

  TrainState a = make_train_state(assets, cfg);
  TrainState b = make_train_state(assets, cfg);
  CHECK(a.field.color_net.params() == b.field.color_net.params());

  const std::vector<RayTask> tasks = shell_hitting_tasks(24, 3);
  BatchGrads ga, gb;
  accumulate_batch(a, tasks, ga);
  accumulate_batch(b, tasks, gb);
  CHECK(ga.loss == gb.loss);
  CHECK(ga.field.color == gb.field.color);
  CHECK(ga.face == gb.face);
  // Repeat on the same state: accumulation resets, so results rerun bitwise.
  BatchGrads ga2;
  accumulate_batch(a, tasks, ga2);
  CHECK(ga2.loss == ga.loss);
  CHECK(ga2.field.color == ga.field.color);

  for (int step = 0; step < 3; ++step) {
    const double la = train_step(a, data);
    const double lb = train_step(b, data);
    CHECK(la == lb);
  }
  CHECK(a.field.color_net.params() == b.field.color_net.params());
  CHECK(a.face.packed() == b.face.packed());
}

TEST_CASE("phase 2 freezes the face parameters bitwise") {
  const HeadModelAssets assets = make_toy_head(1, 13);
  TrainConfig cfg = tiny_config();
  cfg.total_iters = 5;
  cfg.phase_switch_iter = 2;
  TrainState state = make_train_state(assets, cfg);
  const Dataset data = tiny_dataset(12);

  train_step(state, data);
  const std::vector<double> after1 = state.face.packed();
  train_step(state, data);
  const std::vector<double> frozen = state.face.packed();
  CHECK(after1 != frozen);  // phase 1 actually moves the face

  const uint64_t frozen_hash = face_param_hash(state.face);
  for (int step = 3; step <= 5; ++step) {
    train_step(state, data);
    CHECK(state.face.packed() == frozen);
    CHECK(face_param_hash(state.face) == frozen_hash);
  }
  CHECK(state.field.phase == DensityPhase::learned);
  CHECK(state.adam_face.t == 2);  // no phase-2 face updates counted

  // Phase-2 batches produce no face gradient at all.
  BatchGrads g;
  accumulate_batch(state, shell_hitting_tasks(16, 9), g);
  for (double v : g.face) CHECK(v == 0.0);
  CHECK(g.vertex == std::vector<Vec3>(g.vertex.size(), Vec3{0, 0, 0}));
}

TEST_CASE("face hash tracks parameter changes") {
  const HeadModelAssets assets = make_toy_head(0, 2);
  FaceParams a = FaceParams::zero(assets);
  FaceParams b = a;
  CHECK(face_param_hash(a) == face_param_hash(b));
  b.psi[0] = 1e-12;
  CHECK(face_param_hash(a) != face_param_hash(b));
  b.psi[0] = 0.0;
  CHECK(face_param_hash(a) == face_param_hash(b));
}

TEST_CASE("face gradients match finite differences through the distance density") {
  const HeadModelAssets assets = make_toy_head(2, 17);
  TrainConfig cfg = tiny_config();
  cfg.samples_per_ray = 96;
  cfg.eps0 = 0.05;

  for (uint64_t seed : {101ULL, 202ULL, 303ULL}) {
    TrainState state = make_train_state(assets, cfg);
    // A mild nonzero start keeps the test away from any symmetric special case.
    std::vector<double> p0 = state.face.packed();
    Rng rng(seed);
    for (double& v : p0) v = rng.uniform(-0.05, 0.05);
    state.face = FaceParams::unpack(assets, p0);
    mesh_refresh(state);

    const std::vector<RayTask> tasks = shell_hitting_tasks(12, seed);
    BatchGrads grads;
    accumulate_batch(state, tasks, grads);

    const double h = 1e-5;
    for (size_t i = 0; i < p0.size(); ++i) {
      std::vector<double> p = p0;
      p[i] = p0[i] + h;
      state.face = FaceParams::unpack(assets, p);
      mesh_refresh(state);
      BatchGrads up;
      accumulate_batch(state, tasks, up);
      p[i] = p0[i] - h;
      state.face = FaceParams::unpack(assets, p);
      mesh_refresh(state);
      BatchGrads dn;
      accumulate_batch(state, tasks, dn);
      const double fd = (up.loss - dn.loss) / (2 * h);
      const double g = grads.face[i];
      const double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1e-6});
      CHECK(rel < 1e-4);
    }
    state.face = FaceParams::unpack(assets, p0);
    mesh_refresh(state);
  }
}

TEST_CASE("short phase-1 run recovers the generating expression") {
  const std::string out = temp_dir("mf_train_recover");
  SyntheticSpec spec;
  spec.train_views = 8;
  spec.test_views = 2;
  spec.image_size = 32;
  spec.subdiv = 2;
  spec.samples_per_ray = 128;
  spec.seed = 5;
  generate_synthetic_scene(spec, out);

  const HeadModelAssets assets = load_head_assets(out + "/assets.mfh");
  const Dataset data = load_dataset(out + "/transforms_train.json", {0, 0, 0});
  const FaceParams gt = synthetic_gt_params(assets);

  TrainConfig cfg;
  cfg.rays_per_batch = 64;
  cfg.samples_per_ray = 96;
  cfg.total_iters = 700;
  cfg.phase_switch_iter = 700;  // phase 1 only
  cfg.eps0 = spec.shell_eps;
  cfg.num_frequencies = 4;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 32;
  cfg.skip_layer = 1;
  cfg.checkpoint_every = 0;
  TrainState state = make_train_state(assets, cfg);

  double first_losses = 0, last_losses = 0;
  for (int k = 0; k < cfg.total_iters; ++k) {
    const double loss = train_step(state, data);
    if (k < 50) first_losses += loss;
    if (k >= cfg.total_iters - 50) last_losses += loss;
  }
  CHECK(last_losses < 0.2 * first_losses);  // strong single-scene descent

  double worst = 0;
  for (size_t i = 0; i < gt.psi.size(); ++i)
    worst = std::max(worst, std::abs(state.face.psi[i] - gt.psi[i]));
  CHECK(worst < 0.1);

  std::filesystem::remove_all(out);
}

TEST_CASE("run_training writes a parsable log and checkpoints with frozen tail") {
  const std::string scene = temp_dir("mf_train_scene");
  SyntheticSpec spec;
  spec.train_views = 2;
  spec.test_views = 1;
  spec.image_size = 16;
  spec.subdiv = 1;
  spec.samples_per_ray = 64;
  spec.seed = 7;
  generate_synthetic_scene(spec, scene);

  const HeadModelAssets assets = load_head_assets(scene + "/assets.mfh");
  const Dataset data = load_dataset(scene + "/transforms_train.json", {0, 0, 0});

  TrainConfig cfg = tiny_config();
  cfg.total_iters = 6;
  cfg.phase_switch_iter = 3;
  cfg.checkpoint_every = 2;
  TrainState state = make_train_state(assets, cfg);
  const std::string out = temp_dir("mf_train_run");
  run_training(state, data, out);
  CHECK(state.iteration == 6);

  std::ifstream log(out + "/train_log.csv");
  REQUIRE(log.good());
  std::string line;
  std::getline(log, line);
  CHECK(line == "iter,loss,epsilon,phase,face_hash");
  struct Row {
    int iter = 0, phase = 0;
    double loss = 0, eps = 0;
    std::string hash;
  };
  std::vector<Row> rows;
  while (std::getline(log, line)) {
    Row r;
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    r.iter = std::stoi(tok);
    std::getline(ss, tok, ',');
    r.loss = std::stod(tok);
    std::getline(ss, tok, ',');
    r.eps = std::stod(tok);
    std::getline(ss, tok, ',');
    r.phase = std::stoi(tok);
    std::getline(ss, r.hash, ',');
    rows.push_back(r);
  }
  REQUIRE(rows.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(rows[size_t(i)].iter == i + 1);
    CHECK(std::isfinite(rows[size_t(i)].loss));
    CHECK(rows[size_t(i)].phase == (i < 3 ? 1 : 2));
  }
  for (int i = 0; i < 3; ++i) CHECK(rows[size_t(i)].eps == cfg.eps0);
  CHECK(rows[5].eps == 0.1);  // %.17g round-trips the exact final epsilon
  CHECK(rows[2].hash == rows[3].hash);
  CHECK(rows[3].hash == rows[4].hash);
  CHECK(rows[4].hash == rows[5].hash);
  CHECK(rows[0].hash != rows[2].hash);

  CHECK(std::filesystem::exists(out + "/ckpt_000002.mfc"));
  CHECK(std::filesystem::exists(out + "/ckpt_000004.mfc"));
  CHECK(!std::filesystem::exists(out + "/ckpt_000006.mfc"));
  const Checkpoint ck = load_checkpoint(out + "/checkpoint_final.mfc", assets);
  CHECK(ck.iteration == 6);
  CHECK(ck.field.epsilon == 0.1);
  CHECK(ck.field.phase == DensityPhase::learned);
  CHECK(ck.face.packed() == state.face.packed());
  CHECK(ck.field.color_net.params() == state.field.color_net.params());

  std::filesystem::remove_all(scene);
  std::filesystem::remove_all(out);
}
