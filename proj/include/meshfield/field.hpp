#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meshfield/bvh.hpp"
#include "meshfield/geometry.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/vec3.hpp"

namespace meshfield {

// Frequency encoding of a 3d position: optional raw input followed by
// sin/cos(2^k * pi * x) per component for k = 0..L-1.
struct EncodingConfig {
  int num_frequencies = 6;
  bool include_input = true;

  int width() const { return 3 * ((include_input ? 1 : 0) + 2 * num_frequencies); }
};

// out must hold cfg.width() doubles.
void encode(const Vec3& x, const EncodingConfig& cfg, double* out);
std::vector<double> encode(const Vec3& x, const EncodingConfig& cfg);

struct MlpConfig {
  int input_width = 0;
  int hidden_layers = 6;
  int hidden_width = 128;
  int output_width = 1;
  // Hidden layer whose input is [previous activations | encoded input]; -1 disables.
  int skip_layer = 3;
};

// Dense ReLU net with a linear output layer. Parameters live in one flat
// vector, per layer [W row-major | b], so the optimizer and checkpoints can
// treat the net as a single array.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(const MlpConfig& cfg);  // validates, params zero-filled

  // Fan-in uniform weights, zero biases.
  void init_params(uint64_t seed);

  const MlpConfig& config() const { return cfg_; }
  int layer_count() const { return cfg_.hidden_layers + 1; }
  int param_count() const { return int(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  int rows(int layer) const { return rows_[layer]; }
  int cols(int layer) const { return cols_[layer]; }
  int weight_offset(int layer) const { return w_off_[layer]; }
  int bias_offset(int layer) const { return b_off_[layer]; }

  // Forward workspace doubling as the backward tape. Reuse across calls to
  // avoid per-sample allocation.
  struct Tape {
    std::vector<double> input;
    std::vector<std::vector<double>> post;  // post-ReLU per hidden layer
    std::vector<double> skip_concat;        // cached input of the skip layer
    std::vector<double> out;
    std::vector<double> delta_a, delta_b;   // backward scratch
  };

  void forward(const double* input, Tape& tape) const;
  // Accumulates d<dout, out>/dparams into dparams (sized like params()).
  // Positions are fixed during training, so no input gradient is produced.
  void backward(Tape& tape, const double* dout, std::vector<double>& dparams) const;

 private:
  MlpConfig cfg_;
  std::vector<double> params_;
  std::vector<int> w_off_, b_off_, rows_, cols_;
};

double softplus(double z);
double sigmoid(double z);

// Explicit shell density: exactly 0 beyond eps, else 1 - d/eps.
double shell_density(double distance, double eps);

enum class DensityPhase : int32_t { distance = 0, learned = 1 };

struct RadianceField {
  EncodingConfig encoding;
  Mlp color_net;    // 3 outputs, squashed by sigmoid
  Mlp density_net;  // 1 output, squashed by softplus, used in the learned phase
  double epsilon = 0.02;
  DensityPhase phase = DensityPhase::distance;
};

RadianceField make_radiance_field(const EncodingConfig& enc, int hidden_layers,
                                  int hidden_width, int skip_layer, uint64_t seed);

struct FieldWorkspace {
  std::vector<double> encoded;
  Mlp::Tape color_tape;
  Mlp::Tape density_tape;
};

Vec3 field_color(const RadianceField& f, const Vec3& x, FieldWorkspace& ws);
// Raw (pre-softplus) density net output.
double field_density_raw(const RadianceField& f, const Vec3& x, FieldWorkspace& ws);

// Distance-conditioned densities; both are exactly zero outside the eps shell.
double density_phase1(const Vec3& x, const Bvh& bvh, const TriangleMesh& mesh, double eps);
double density_phase2(const Vec3& x, const Bvh& bvh, const TriangleMesh& mesh, double eps,
                      const RadianceField& f, FieldWorkspace& ws);

struct FieldGrads {
  std::vector<double> color;
  std::vector<double> density;

  void reset_for(const RadianceField& f);
  void add(const FieldGrads& other);
};

// Per-sample reverse passes. Both recompute the forward with a tape, so they
// only need the sample position and the upstream gradient.
void color_backward(const RadianceField& f, const Vec3& x, const Vec3& dcolor,
                    FieldGrads& g, FieldWorkspace& ws);
// dsigma is w.r.t. the post-softplus density.
void density_backward(const RadianceField& f, const Vec3& x, double dsigma,
                      FieldGrads& g, FieldWorkspace& ws);

struct Checkpoint {
  RadianceField field;
  FaceParams face;
  int64_t iteration = 0;
};

void save_checkpoint(const std::string& path, const RadianceField& f, const FaceParams& face,
                     int64_t iteration, const HeadModelAssets& assets);
// Validates the stored asset fingerprint against `assets` (mismatch error).
Checkpoint load_checkpoint(const std::string& path, const HeadModelAssets& assets);

}  // namespace meshfield
