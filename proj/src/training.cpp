#include "meshfield/training.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "meshfield/errors.hpp"
#include "meshfield/kernels.hpp"
#include "meshfield/parallel.hpp"
#include "meshfield/rng.hpp"

namespace meshfield {

namespace {

constexpr int k_groups = 16;  // fixed ray groups keep gradients thread-count independent

struct RayWork {
  std::vector<double> ts, sigma, delta, dsigma;
  std::vector<Vec3> colors, dcolor;
  std::vector<SurfacePoint> surf;
  std::vector<uint8_t> evaluated;
  std::vector<std::pair<double, double>> spans;
  CompositeScratch comp;
  FieldWorkspace ws;
};

// Forward + loss + reverse for one ray. Only evaluated (in-shell) samples can
// carry parameter gradients: everywhere else both density phases sit on their
// exactly-flat zero branch and the composite weight is zero.
double process_ray(const TrainState& state, const RayTask& task, bool phase1, double eps,
                   BatchGrads& g, RayWork& w) {
  const TrainConfig& cfg = state.config;
  const Vec3 bg = cfg.background;
  double t0, t1;
  if (!clip_to_sphere(task.ray, state.bounds, t0, t1)) {
    const Vec3 diff = bg - task.target;
    return dot(diff, diff);
  }

  const int n = cfg.samples_per_ray;
  Rng rng(task.rng_seed);
  sample_stratified(t0, t1, n, cfg.stratified, rng, w.ts);
  if (cfg.shell_skip) {
    Ray span_ray = task.ray;
    span_ray.t_near = t0;
    span_ray.t_far = t1;
    w.spans = shell_intervals(state.bvh, span_ray, eps);
  }

  w.sigma.resize(size_t(n));
  w.colors.resize(size_t(n));
  w.delta.resize(size_t(n));
  w.surf.resize(size_t(n));
  w.evaluated.assign(size_t(n), 0);
  size_t span_i = 0;
  for (int i = 0; i < n; ++i) {
    const double t = w.ts[size_t(i)];
    bool evaluate = true;
    if (cfg.shell_skip) {
      while (span_i < w.spans.size() && w.spans[span_i].second < t) ++span_i;
      evaluate = span_i < w.spans.size() && w.spans[span_i].first <= t;
    }
    double s = 0.0;
    Vec3 c{0, 0, 0};
    if (evaluate) {
      const Vec3 x = task.ray.origin + t * task.ray.direction;
      const SurfacePoint sp = closest_point(state.bvh, state.mesh, x);
      w.surf[size_t(i)] = sp;
      w.evaluated[size_t(i)] = 1;
      if (phase1) {
        s = shell_density(sp.distance, eps);
        if (s > 0.0) c = field_color(state.field, x, w.ws);
      } else if (sp.distance <= eps) {
        s = softplus(field_density_raw(state.field, x, w.ws));
        c = field_color(state.field, x, w.ws);
      }
    }
    w.sigma[size_t(i)] = s;
    w.colors[size_t(i)] = c;
    w.delta[size_t(i)] = (i + 1 < n ? w.ts[size_t(i + 1)] : t1) - t;
  }

  const CompositeResult res =
      composite(w.sigma.data(), w.colors.data(), w.delta.data(), n);
  const Vec3 pre = res.rgb + (1.0 - res.alpha) * bg;
  const Vec3 diff = pre - task.target;
  const Vec3 drgb = 2.0 * diff;
  const double dalpha = -dot(drgb, bg);

  w.dsigma.resize(size_t(n));
  w.dcolor.resize(size_t(n));
  composite_backward(w.sigma.data(), w.colors.data(), w.delta.data(), n, drgb, dalpha,
                     w.dsigma.data(), w.dcolor.data(), w.comp);

  for (int i = 0; i < n; ++i) {
    if (!w.evaluated[size_t(i)]) continue;
    const Vec3 x = task.ray.origin + w.ts[size_t(i)] * task.ray.direction;
    // sigma == 0 forces the composite weight, hence dcolor, to exactly zero.
    if (w.sigma[size_t(i)] > 0.0)
      color_backward(state.field, x, w.dcolor[size_t(i)], g.field, w.ws);
    if (phase1) {
      const SurfacePoint& sp = w.surf[size_t(i)];
      // d == 0 has no distance gradient (query on the surface); d >= eps is flat.
      if (sp.distance > 0.0 && sp.distance < eps) {
        const double scale = w.dsigma[size_t(i)] * (-1.0 / eps);
        const DistanceGradient dg = distance_gradient(state.mesh, sp, x);
        const auto& tri = state.mesh.triangles[size_t(sp.triangle_id)];
        for (int v = 0; v < 3; ++v) g.vertex[size_t(tri[size_t(v)])] += scale * dg.wrt_vertex[v];
      }
    } else if (w.surf[size_t(i)].distance <= eps) {
      density_backward(state.field, x, w.dsigma[size_t(i)], g.field, w.ws);
    }
  }
  return dot(diff, diff);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.rays_per_batch <= 0) fail(ErrorKind::config, "rays_per_batch must be positive");
  if (cfg.samples_per_ray <= 0) fail(ErrorKind::config, "samples_per_ray must be positive");
  if (!(cfg.lr_network > 0)) fail(ErrorKind::config, "lr_network must be positive");
  if (!(cfg.lr_face > 0)) fail(ErrorKind::config, "lr_face must be positive");
  if (!(cfg.adam_beta1 >= 0 && cfg.adam_beta1 < 1))
    fail(ErrorKind::config, "adam_beta1 must lie in [0, 1)");
  if (!(cfg.adam_beta2 >= 0 && cfg.adam_beta2 < 1))
    fail(ErrorKind::config, "adam_beta2 must lie in [0, 1)");
  if (!(cfg.adam_eps > 0)) fail(ErrorKind::config, "adam_eps must be positive");
  if (cfg.total_iters < 1) fail(ErrorKind::config, "total_iters must be at least 1");
  if (cfg.phase_switch_iter < 0 || cfg.phase_switch_iter > cfg.total_iters)
    fail(ErrorKind::config, "phase_switch_iter must lie in [0, total_iters]");
  if (!(cfg.eps0 > 0)) fail(ErrorKind::config, "eps0 must be positive");
  if (!(cfg.eps_final > 0)) fail(ErrorKind::config, "eps_final must be positive");
  if (cfg.checkpoint_every < 0) fail(ErrorKind::config, "checkpoint_every must be >= 0");
  if (cfg.num_frequencies < 0) fail(ErrorKind::config, "num_frequencies must be >= 0");
  if (cfg.hidden_layers < 1) fail(ErrorKind::config, "hidden_layers must be at least 1");
  if (cfg.hidden_width < 1) fail(ErrorKind::config, "hidden_width must be at least 1");
  if (cfg.skip_layer != -1 && (cfg.skip_layer < 1 || cfg.skip_layer >= cfg.hidden_layers))
    fail(ErrorKind::config, "skip_layer must be -1 or in [1, hidden_layers)");
  for (double c : {cfg.background.x, cfg.background.y, cfg.background.z})
    if (!(c >= 0 && c <= 1)) fail(ErrorKind::config, "background channels must lie in [0, 1]");
}

double photometric_loss(const std::vector<Vec3>& rendered, const std::vector<Vec3>& target,
                        std::vector<Vec3>* grad) {
  if (rendered.size() != target.size())
    fail(ErrorKind::mismatch, "photometric_loss needs equally many rendered and target rays");
  if (grad) grad->resize(rendered.size());
  double loss = 0;
  for (size_t i = 0; i < rendered.size(); ++i) {
    const Vec3 diff = rendered[i] - target[i];
    loss += dot(diff, diff);
    if (grad) (*grad)[i] = 2.0 * diff;
  }
  return loss;
}

double epsilon_schedule(int iter, const TrainConfig& cfg) {
  if (iter <= cfg.phase_switch_iter || cfg.total_iters <= cfg.phase_switch_iter)
    return cfg.eps0;
  // s hits exactly 1 at total_iters, so the last step uses exactly eps_final.
  const double s = double(iter - cfg.phase_switch_iter) /
                   double(cfg.total_iters - cfg.phase_switch_iter);
  return cfg.eps0 * (1.0 - s) + cfg.eps_final * s;
}

void adam_update(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    fail(ErrorKind::mismatch, "adam_update buffers disagree on the parameter count");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    params[i] -= lr * (state.m[i] / bc1) / (std::sqrt(state.v[i] / bc2) + eps);
  }
}

void BatchGrads::reset_for(const RadianceField& f, int32_t n_vertices, int32_t n_params) {
  field.reset_for(f);
  vertex.assign(size_t(n_vertices), Vec3{0, 0, 0});
  face.assign(size_t(n_params), 0.0);
  loss = 0;
}

void BatchGrads::add(const BatchGrads& other) {
  field.add(other.field);
  for (size_t i = 0; i < vertex.size(); ++i) vertex[i] += other.vertex[i];
  k_axpy(1.0, other.face.data(), face.data(), int(face.size()));
  loss += other.loss;
}

TrainState make_train_state(const HeadModelAssets& assets, const TrainConfig& cfg) {
  validate_train_config(cfg);
  TrainState s;
  s.assets = &assets;
  s.config = cfg;
  EncodingConfig enc;
  enc.num_frequencies = cfg.num_frequencies;
  s.field = make_radiance_field(enc, cfg.hidden_layers, cfg.hidden_width, cfg.skip_layer,
                                cfg.seed);
  s.field.epsilon = cfg.eps0;
  s.field.phase = DensityPhase::distance;
  s.face = FaceParams::zero(assets);
  s.adam_color.reset(s.field.color_net.params().size());
  s.adam_density.reset(s.field.density_net.params().size());
  s.adam_face.reset(s.face.packed().size());
  s.bounds = scene_bounds(assets);
  mesh_refresh(s);
  return s;
}

void mesh_refresh(TrainState& state) {
  state.mesh = deform(*state.assets, state.face);
  state.bvh = build_bvh(state.mesh);
  state.jacobian = deform_jacobian(*state.assets, state.face);
}

void accumulate_batch(TrainState& state, const std::vector<RayTask>& tasks, BatchGrads& grads) {
  const bool phase1 = state.field.phase == DensityPhase::distance;
  const double eps = state.field.epsilon;
  const int32_t n_vertices = state.assets->n_vertices();
  const int32_t n_params = state.assets->n_params();

  if (state.group_scratch.size() != size_t(k_groups)) state.group_scratch.resize(k_groups);
  parallel_for(k_groups, [&](int64_t gi) {
    BatchGrads& g = state.group_scratch[size_t(gi)];
    g.reset_for(state.field, n_vertices, n_params);
    RayWork work;
    for (size_t r = size_t(gi); r < tasks.size(); r += k_groups)
      g.loss += process_ray(state, tasks[r], phase1, eps, g, work);
  });

  grads.reset_for(state.field, n_vertices, n_params);
  for (int gi = 0; gi < k_groups; ++gi) grads.add(state.group_scratch[size_t(gi)]);

  if (phase1) {
    std::vector<double> vflat(size_t(3) * n_vertices);
    for (int32_t i = 0; i < n_vertices; ++i) {
      vflat[size_t(3) * i + 0] = grads.vertex[size_t(i)].x;
      vflat[size_t(3) * i + 1] = grads.vertex[size_t(i)].y;
      vflat[size_t(3) * i + 2] = grads.vertex[size_t(i)].z;
    }
    k_matvec_t_acc(state.jacobian.d.data(), vflat.data(), grads.face.data(),
                   state.jacobian.n_rows, state.jacobian.n_cols);
  }
}

double train_step(TrainState& state, const Dataset& data) {
  const TrainConfig& cfg = state.config;
  if (data.cameras.empty()) fail(ErrorKind::validation, "training dataset has no frames");

  const int k = state.iteration + 1;
  state.field.epsilon = epsilon_schedule(k, cfg);
  const bool phase1 = k <= cfg.phase_switch_iter;
  state.field.phase = phase1 ? DensityPhase::distance : DensityPhase::learned;

  std::vector<RayTask> tasks(size_t(cfg.rays_per_batch));
  for (int b = 0; b < cfg.rays_per_batch; ++b) {
    Rng pick(hash_mix(cfg.seed, uint64_t(k), uint64_t(b)));
    const size_t img = pick.below(data.cameras.size());
    const int px = int(pick.below(uint64_t(data.width)));
    const int py = int(pick.below(uint64_t(data.height)));
    RayTask& task = tasks[size_t(b)];
    task.ray = pixel_ray(data.cameras[img], px, py);
    task.target = data.targets[img][size_t(py) * data.width + px];
    task.rng_seed = hash_mix(cfg.seed, uint64_t(k), uint64_t(b), 0x73616d70ULL);
  }

  BatchGrads grads;
  accumulate_batch(state, tasks, grads);

  if (!std::isfinite(grads.loss) || !all_finite(grads.field.color) ||
      !all_finite(grads.field.density) || !all_finite(grads.face))
    fail(ErrorKind::numeric, "non-finite loss or gradient at iteration " + std::to_string(k));

  adam_update(state.field.color_net.params(), grads.field.color, state.adam_color,
              cfg.lr_network, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  if (phase1) {
    std::vector<double> packed = state.face.packed();
    adam_update(packed, grads.face, state.adam_face, cfg.lr_face, cfg.adam_beta1,
                cfg.adam_beta2, cfg.adam_eps);
    state.face = FaceParams::unpack(*state.assets, packed);
    mesh_refresh(state);
  } else {
    adam_update(state.field.density_net.params(), grads.field.density, state.adam_density,
                cfg.lr_network, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  }
  state.iteration = k;
  return grads.loss / double(cfg.rays_per_batch);
}

uint64_t face_param_hash(const FaceParams& face) {
  uint64_t h = 0x243F6A8885A308D3ULL;
  for (double v : face.packed()) h = hash_mix(h, std::bit_cast<uint64_t>(v));
  return h;
}

void run_training(TrainState& state, const Dataset& data, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string log_path = out_dir + "/train_log.csv";
  std::ofstream log(log_path, std::ios::binary);
  if (!log) fail(ErrorKind::missing_file, "cannot create " + log_path);
  log << "iter,loss,epsilon,phase,face_hash\n";

  const TrainConfig& cfg = state.config;
  char row[192];
  while (state.iteration < cfg.total_iters) {
    const double loss = train_step(state, data);
    const int k = state.iteration;
    const int phase = state.field.phase == DensityPhase::distance ? 1 : 2;
    std::snprintf(row, sizeof row, "%d,%.17g,%.17g,%d,%016llx\n", k, loss,
                  state.field.epsilon, phase,
                  (unsigned long long)face_param_hash(state.face));
    log << row;
    if (cfg.checkpoint_every > 0 && k % cfg.checkpoint_every == 0 && k < cfg.total_iters) {
      char name[48];
      std::snprintf(name, sizeof name, "ckpt_%06d.mfc", k);
      save_checkpoint(out_dir + "/" + name, state.field, state.face, k, *state.assets);
    }
    if (k % 1000 == 0 || k == cfg.total_iters) {
      std::printf("iter %d/%d  loss %.6g  eps %.4f  phase %d\n", k, cfg.total_iters, loss,
                  state.field.epsilon, phase);
      std::fflush(stdout);
    }
  }
  if (!log) fail(ErrorKind::parse, "failed writing " + log_path);
  save_checkpoint(out_dir + "/checkpoint_final.mfc", state.field, state.face, state.iteration,
                  *state.assets);
}

}  // namespace meshfield
