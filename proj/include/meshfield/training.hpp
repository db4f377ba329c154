#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meshfield/bvh.hpp"
#include "meshfield/field.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/manifest.hpp"
#include "meshfield/renderer.hpp"
#include "meshfield/vec3.hpp"

namespace meshfield {

struct TrainConfig {
  int rays_per_batch = 256;
  int samples_per_ray = 192;
  double lr_network = 5e-4;
  double lr_face = 5e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int total_iters = 20000;
  // Steps k <= phase_switch_iter use the distance density and train the face
  // parameters; afterwards the face is frozen and the density net takes over.
  int phase_switch_iter = 10000;
  double eps0 = 0.02;
  double eps_final = 0.1;
  uint64_t seed = 1;
  bool shell_skip = true;
  bool stratified = true;
  Vec3 background{0, 0, 0};
  int checkpoint_every = 2000;  // 0 keeps only the final checkpoint
  int num_frequencies = 6;
  int hidden_layers = 6;
  int hidden_width = 128;
  int skip_layer = 3;

  bool operator==(const TrainConfig&) const = default;
};

// Config error naming the offending field.
void validate_train_config(const TrainConfig& cfg);

// Sum over rays of the squared rgb error; grad entries are 2 * (rendered - target).
double photometric_loss(const std::vector<Vec3>& rendered, const std::vector<Vec3>& target,
                        std::vector<Vec3>* grad);

// Shell half-width for training step `iter` (1-based). Exactly eps0 while
// iter <= phase_switch_iter, then linear in the remaining steps so the final
// step lands on exactly eps_final.
double epsilon_schedule(int iter, const TrainConfig& cfg);

struct AdamState {
  std::vector<double> m, v;
  int64_t t = 0;

  void reset(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }
};

// One bias-corrected Adam step on params in place.
void adam_update(std::vector<double>& params, const std::vector<double>& grad, AdamState& state,
                 double lr, double beta1, double beta2, double eps);

// Per-batch gradients. Rays are accumulated into 16 fixed groups by ray index
// and the groups reduced in order, so results do not depend on worker count.
struct BatchGrads {
  FieldGrads field;
  std::vector<Vec3> vertex;  // distance-density gradient w.r.t. deformed vertices
  std::vector<double> face;  // vertex gradient chained through the deform jacobian
  double loss = 0;

  void reset_for(const RadianceField& f, int32_t n_vertices, int32_t n_params);
  void add(const BatchGrads& other);
};

struct TrainState {
  const HeadModelAssets* assets = nullptr;
  TrainConfig config;
  RadianceField field;
  FaceParams face;
  AdamState adam_color, adam_density, adam_face;
  int iteration = 0;  // completed steps
  TriangleMesh mesh;
  Bvh bvh;
  DeformJacobian jacobian;
  SceneBounds bounds;
  std::vector<BatchGrads> group_scratch;  // reused across steps
};

TrainState make_train_state(const HeadModelAssets& assets, const TrainConfig& cfg);

// Rebuild mesh, bvh, and deform jacobian after a face-parameter change.
void mesh_refresh(TrainState& state);

struct RayTask {
  Ray ray;
  Vec3 target;  // already composited over the training background
  uint64_t rng_seed = 0;
};

// Renders every task against the current state and accumulates the loss and
// all parameter gradients into grads (which it resets first).
void accumulate_batch(TrainState& state, const std::vector<RayTask>& tasks, BatchGrads& grads);

// One optimizer step; step k = iteration + 1 uses epsilon_schedule(k) and is
// phase 1 iff k <= phase_switch_iter. Returns the mean per-ray loss. Numeric
// error naming the iteration if the loss or any gradient is non-finite.
double train_step(TrainState& state, const Dataset& data);

// Order-sensitive fold over the packed face parameter bits; logged every
// iteration so the phase-2 freeze is checkable from the csv alone.
uint64_t face_param_hash(const FaceParams& face);

// Full loop: one train_log.csv row per iteration (iter,loss,epsilon,phase,
// face_hash), periodic ckpt_NNNNNN.mfc plus checkpoint_final.mfc in out_dir.
void run_training(TrainState& state, const Dataset& data, const std::string& out_dir);

}  // namespace meshfield
