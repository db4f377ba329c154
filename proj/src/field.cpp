#include "meshfield/field.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "meshfield/container.hpp"
#include "meshfield/errors.hpp"
#include "meshfield/kernels.hpp"
#include "meshfield/rng.hpp"

namespace meshfield {

void encode(const Vec3& x, const EncodingConfig& cfg, double* out) {
  int o = 0;
  if (cfg.include_input) {
    out[o++] = x.x;
    out[o++] = x.y;
    out[o++] = x.z;
  }
  double scale = std::numbers::pi;
  for (int k = 0; k < cfg.num_frequencies; ++k) {
    for (int c = 0; c < 3; ++c) out[o++] = std::sin(scale * x[c]);
    for (int c = 0; c < 3; ++c) out[o++] = std::cos(scale * x[c]);
    scale *= 2.0;
  }
}

std::vector<double> encode(const Vec3& x, const EncodingConfig& cfg) {
  std::vector<double> out(size_t(cfg.width()));
  encode(x, cfg, out.data());
  return out;
}

Mlp::Mlp(const MlpConfig& cfg) : cfg_(cfg) {
  if (cfg.input_width < 1) fail(ErrorKind::config, "mlp input width must be >= 1");
  if (cfg.output_width < 1) fail(ErrorKind::config, "mlp output width must be >= 1");
  if (cfg.hidden_layers < 0) fail(ErrorKind::config, "mlp hidden layer count must be >= 0");
  if (cfg.hidden_layers > 0 && cfg.hidden_width < 1)
    fail(ErrorKind::config, "mlp hidden width must be >= 1");
  if (cfg.skip_layer != -1 && (cfg.skip_layer < 1 || cfg.skip_layer >= cfg.hidden_layers))
    fail(ErrorKind::config, "mlp skip layer must be -1 or in [1, hidden_layers)");

  const int n_layers = layer_count();
  rows_.resize(n_layers);
  cols_.resize(n_layers);
  w_off_.resize(n_layers);
  b_off_.resize(n_layers);
  int off = 0;
  for (int i = 0; i < n_layers; ++i) {
    rows_[i] = (i == cfg.hidden_layers) ? cfg.output_width : cfg.hidden_width;
    if (i == 0)
      cols_[i] = cfg.input_width;
    else if (i == cfg.skip_layer)
      cols_[i] = cfg.hidden_width + cfg.input_width;
    else
      cols_[i] = cfg.hidden_width;
    w_off_[i] = off;
    off += rows_[i] * cols_[i];
    b_off_[i] = off;
    off += rows_[i];
  }
  params_.assign(size_t(off), 0.0);
}

void Mlp::init_params(uint64_t seed) {
  Rng rng(seed);
  for (int i = 0; i < layer_count(); ++i) {
    const double bound = 1.0 / std::sqrt(double(cols_[i]));
    double* w = params_.data() + w_off_[i];
    for (int k = 0; k < rows_[i] * cols_[i]; ++k) w[k] = rng.uniform(-bound, bound);
    double* b = params_.data() + b_off_[i];
    for (int k = 0; k < rows_[i]; ++k) b[k] = 0.0;
  }
}

void Mlp::forward(const double* input, Tape& tape) const {
  const int h_layers = cfg_.hidden_layers;
  tape.input.assign(input, input + cfg_.input_width);
  tape.post.resize(size_t(h_layers));
  tape.out.resize(size_t(cfg_.output_width));

  const double* in = tape.input.data();
  for (int i = 0; i < h_layers; ++i) {
    if (i == cfg_.skip_layer) {
      tape.skip_concat.resize(size_t(cols_[i]));
      std::memcpy(tape.skip_concat.data(), in, sizeof(double) * size_t(cfg_.hidden_width));
      std::memcpy(tape.skip_concat.data() + cfg_.hidden_width, tape.input.data(),
                  sizeof(double) * size_t(cfg_.input_width));
      in = tape.skip_concat.data();
    }
    tape.post[i].resize(size_t(rows_[i]));
    k_matvec(params_.data() + w_off_[i], params_.data() + b_off_[i], in, tape.post[i].data(),
             rows_[i], cols_[i]);
    for (double& v : tape.post[i]) v = v > 0.0 ? v : 0.0;
    in = tape.post[i].data();
  }
  const int last = h_layers;
  k_matvec(params_.data() + w_off_[last], params_.data() + b_off_[last], in, tape.out.data(),
           rows_[last], cols_[last]);
}

void Mlp::backward(Tape& tape, const double* dout, std::vector<double>& dparams) const {
  const int h_layers = cfg_.hidden_layers;
  tape.delta_a.assign(dout, dout + cfg_.output_width);
  std::vector<double>& delta = tape.delta_a;
  std::vector<double>& dprev = tape.delta_b;

  for (int i = h_layers; i >= 0; --i) {
    const double* in;
    if (i == 0)
      in = tape.input.data();
    else if (i == cfg_.skip_layer)
      in = tape.skip_concat.data();
    else
      in = tape.post[size_t(i - 1)].data();

    k_outer_acc(dparams.data() + w_off_[i], delta.data(), in, rows_[i], cols_[i]);
    double* db = dparams.data() + b_off_[i];
    for (int r = 0; r < rows_[i]; ++r) db[r] += delta[size_t(r)];

    if (i == 0) break;
    dprev.assign(size_t(cols_[i]), 0.0);
    k_matvec_t_acc(params_.data() + w_off_[i], delta.data(), dprev.data(), rows_[i], cols_[i]);
    // The skip concat's trailing input slice carries no trainable state; only
    // the leading hidden slice propagates.
    const std::vector<double>& post = tape.post[size_t(i - 1)];
    delta.resize(size_t(cfg_.hidden_width));
    for (int j = 0; j < cfg_.hidden_width; ++j)
      delta[size_t(j)] = post[size_t(j)] > 0.0 ? dprev[size_t(j)] : 0.0;
  }
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double shell_density(double distance, double eps) {
  return distance > eps ? 0.0 : 1.0 - distance / eps;
}

RadianceField make_radiance_field(const EncodingConfig& enc, int hidden_layers,
                                  int hidden_width, int skip_layer, uint64_t seed) {
  RadianceField f;
  f.encoding = enc;
  MlpConfig mc;
  mc.input_width = enc.width();
  mc.hidden_layers = hidden_layers;
  mc.hidden_width = hidden_width;
  mc.skip_layer = skip_layer;
  mc.output_width = 3;
  f.color_net = Mlp(mc);
  f.color_net.init_params(hash_mix(seed, 0x636f6c6f72));
  mc.output_width = 1;
  f.density_net = Mlp(mc);
  f.density_net.init_params(hash_mix(seed, 0x64656e73));
  return f;
}

namespace {

void encode_into(const RadianceField& f, const Vec3& x, FieldWorkspace& ws) {
  ws.encoded.resize(size_t(f.encoding.width()));
  encode(x, f.encoding, ws.encoded.data());
}

}  // namespace

Vec3 field_color(const RadianceField& f, const Vec3& x, FieldWorkspace& ws) {
  encode_into(f, x, ws);
  f.color_net.forward(ws.encoded.data(), ws.color_tape);
  const std::vector<double>& z = ws.color_tape.out;
  return {sigmoid(z[0]), sigmoid(z[1]), sigmoid(z[2])};
}

double field_density_raw(const RadianceField& f, const Vec3& x, FieldWorkspace& ws) {
  encode_into(f, x, ws);
  f.density_net.forward(ws.encoded.data(), ws.density_tape);
  return ws.density_tape.out[0];
}

double density_phase1(const Vec3& x, const Bvh& bvh, const TriangleMesh& mesh, double eps) {
  return shell_density(closest_point(bvh, mesh, x).distance, eps);
}

double density_phase2(const Vec3& x, const Bvh& bvh, const TriangleMesh& mesh, double eps,
                      const RadianceField& f, FieldWorkspace& ws) {
  const double d = closest_point(bvh, mesh, x).distance;
  if (d > eps) return 0.0;
  return softplus(field_density_raw(f, x, ws));
}

void FieldGrads::reset_for(const RadianceField& f) {
  color.assign(size_t(f.color_net.param_count()), 0.0);
  density.assign(size_t(f.density_net.param_count()), 0.0);
}

void FieldGrads::add(const FieldGrads& other) {
  k_axpy(1.0, other.color.data(), color.data(), int(color.size()));
  k_axpy(1.0, other.density.data(), density.data(), int(density.size()));
}

void color_backward(const RadianceField& f, const Vec3& x, const Vec3& dcolor,
                    FieldGrads& g, FieldWorkspace& ws) {
  encode_into(f, x, ws);
  f.color_net.forward(ws.encoded.data(), ws.color_tape);
  double dz[3];
  for (int c = 0; c < 3; ++c) {
    const double s = sigmoid(ws.color_tape.out[size_t(c)]);
    dz[c] = dcolor[c] * s * (1.0 - s);
  }
  f.color_net.backward(ws.color_tape, dz, g.color);
}

void density_backward(const RadianceField& f, const Vec3& x, double dsigma,
                      FieldGrads& g, FieldWorkspace& ws) {
  encode_into(f, x, ws);
  f.density_net.forward(ws.encoded.data(), ws.density_tape);
  // d softplus(z) / dz = sigmoid(z)
  const double dz = dsigma * sigmoid(ws.density_tape.out[0]);
  f.density_net.backward(ws.density_tape, &dz, g.density);
}

namespace {

constexpr const char* k_ckpt_magic = "MESHFIELD-CKPT v1";

std::vector<int32_t> asset_fingerprint(const HeadModelAssets& assets) {
  return {assets.n_vertices(), assets.n_triangles(), assets.k_beta, assets.k_psi,
          assets.n_joints()};
}

}  // namespace

void save_checkpoint(const std::string& path, const RadianceField& f, const FaceParams& face,
                     int64_t iteration, const HeadModelAssets& assets) {
  Container c;
  const int32_t enc[2] = {int32_t(f.encoding.num_frequencies),
                          f.encoding.include_input ? 1 : 0};
  c.put_i32("encoding", {2}, enc);
  const MlpConfig& cc = f.color_net.config();
  const int32_t ccfg[4] = {cc.hidden_layers, cc.hidden_width, cc.output_width, cc.skip_layer};
  c.put_i32("color_config", {4}, ccfg);
  const MlpConfig& dc = f.density_net.config();
  const int32_t dcfg[4] = {dc.hidden_layers, dc.hidden_width, dc.output_width, dc.skip_layer};
  c.put_i32("density_config", {4}, dcfg);
  c.put_f64("color_params", {uint32_t(f.color_net.param_count())}, f.color_net.params().data());
  c.put_f64("density_params", {uint32_t(f.density_net.param_count())},
            f.density_net.params().data());
  const double eps = f.epsilon;
  c.put_f64("epsilon", {1}, &eps);
  const int32_t meta[2] = {int32_t(f.phase), int32_t(iteration)};
  c.put_i32("meta", {2}, meta);
  c.put_f64("beta", {uint32_t(face.beta.size())}, face.beta.data());
  c.put_f64("psi", {uint32_t(face.psi.size())}, face.psi.data());
  c.put_f64("phi", {uint32_t(face.phi.size())}, face.phi.data());
  const std::vector<int32_t> fp = asset_fingerprint(assets);
  c.put_i32("asset_dims", {uint32_t(fp.size())}, fp.data());
  write_container(c, path, k_ckpt_magic);
}

Checkpoint load_checkpoint(const std::string& path, const HeadModelAssets& assets) {
  const Container c = read_container(path, k_ckpt_magic);

  const std::vector<int32_t> fp = c.require("asset_dims", Dtype::i32).as_i32();
  const std::vector<int32_t> want = asset_fingerprint(assets);
  if (fp != want)
    fail(ErrorKind::mismatch,
         "checkpoint was trained against different head assets (vertex/triangle/basis/joint "
         "counts differ)");

  Checkpoint ck;
  const std::vector<int32_t> enc = c.require("encoding", Dtype::i32).as_i32();
  if (enc.size() != 2) fail(ErrorKind::parse, "checkpoint encoding entry malformed");
  ck.field.encoding.num_frequencies = enc[0];
  ck.field.encoding.include_input = enc[1] != 0;

  auto load_net = [&](const char* cfg_name, const char* params_name, int out_width) {
    const std::vector<int32_t> raw = c.require(cfg_name, Dtype::i32).as_i32();
    if (raw.size() != 4) fail(ErrorKind::parse, std::string(cfg_name) + " entry malformed");
    MlpConfig mc;
    mc.input_width = ck.field.encoding.width();
    mc.hidden_layers = raw[0];
    mc.hidden_width = raw[1];
    mc.output_width = raw[2];
    mc.skip_layer = raw[3];
    if (mc.output_width != out_width)
      fail(ErrorKind::parse, std::string(cfg_name) + " has unexpected output width");
    Mlp net(mc);
    std::vector<double> p = c.require(params_name, Dtype::f64).as_f64();
    if (int(p.size()) != net.param_count())
      fail(ErrorKind::mismatch, std::string(params_name) + " size does not match the config");
    net.params() = std::move(p);
    return net;
  };
  ck.field.color_net = load_net("color_config", "color_params", 3);
  ck.field.density_net = load_net("density_config", "density_params", 1);

  const std::vector<double> eps = c.require("epsilon", Dtype::f64).as_f64();
  if (eps.size() != 1) fail(ErrorKind::parse, "checkpoint epsilon entry malformed");
  ck.field.epsilon = eps[0];
  if (!(ck.field.epsilon > 0.0)) fail(ErrorKind::validation, "checkpoint epsilon must be > 0");

  const std::vector<int32_t> meta = c.require("meta", Dtype::i32).as_i32();
  if (meta.size() != 2) fail(ErrorKind::parse, "checkpoint meta entry malformed");
  if (meta[0] != 0 && meta[0] != 1) fail(ErrorKind::parse, "checkpoint phase tag unknown");
  ck.field.phase = DensityPhase(meta[0]);
  ck.iteration = meta[1];

  ck.face.beta = c.require("beta", Dtype::f64).as_f64();
  ck.face.psi = c.require("psi", Dtype::f64).as_f64();
  ck.face.phi = c.require("phi", Dtype::f64).as_f64();
  if (int32_t(ck.face.beta.size()) != assets.k_beta ||
      int32_t(ck.face.psi.size()) != assets.k_psi ||
      int32_t(ck.face.phi.size()) != assets.n_pose_params())
    fail(ErrorKind::mismatch, "checkpoint face parameter lengths do not match the assets");
  return ck;
}

}  // namespace meshfield
