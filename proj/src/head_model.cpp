#include "meshfield/head_model.hpp"

#include <cmath>
#include <map>

#include "meshfield/container.hpp"
#include "meshfield/errors.hpp"
#include "meshfield/rng.hpp"

namespace meshfield {

namespace {

constexpr const char* kAssetMagic = "MESHFIELD-HEAD v1";

Vec3 vertex_at(const std::vector<float>& flat, int32_t i) {
  return {double(flat[3 * i]), double(flat[3 * i + 1]), double(flat[3 * i + 2])};
}

// Per-joint skinning transforms S_j and their pose derivatives, built as
// S_j = S_parent o L_j with L_j = {R_j, p_j - R_j p_j} (rotation about the
// joint's rest position). Zero pose yields the exact identity.
struct SkinPose {
  std::vector<Affine> skin;      // S_j
  std::vector<Mat3> local_rot;   // R_j
  std::vector<Affine> parents_skin;  // S_parent(j), identity for roots
};

SkinPose compute_skin_pose(const HeadModelAssets& assets, const FaceParams& params) {
  int32_t J = assets.n_joints();
  SkinPose pose;
  pose.skin.resize(J);
  pose.local_rot.resize(J);
  pose.parents_skin.resize(J);
  for (int32_t j = 0; j < J; ++j) {
    Vec3 phi{params.phi[3 * j], params.phi[3 * j + 1], params.phi[3 * j + 2]};
    Mat3 rot = axis_angle_to_matrix(phi);
    Vec3 p = vertex_at(assets.joints, j);
    Affine local{rot, p - rot * p};
    Affine parent = assets.joint_parents[j] < 0 ? Affine::identity()
                                                : pose.skin[assets.joint_parents[j]];
    pose.local_rot[j] = rot;
    pose.parents_skin[j] = parent;
    pose.skin[j] = parent * local;
  }
  return pose;
}

std::vector<Vec3> blended_rest(const HeadModelAssets& assets, const FaceParams& params) {
  int32_t n = assets.n_vertices();
  std::vector<Vec3> rest(n);
  for (int32_t i = 0; i < n; ++i) rest[i] = vertex_at(assets.template_vertices, i);
  for (int32_t k = 0; k < assets.k_beta; ++k) {
    double c = params.beta[k];
    if (c == 0) continue;
    const float* slice = assets.shape_basis.data() + size_t(k) * n * 3;
    for (int32_t i = 0; i < n; ++i)
      rest[i] += c * Vec3{double(slice[3 * i]), double(slice[3 * i + 1]), double(slice[3 * i + 2])};
  }
  for (int32_t k = 0; k < assets.k_psi; ++k) {
    double c = params.psi[k];
    if (c == 0) continue;
    const float* slice = assets.expression_basis.data() + size_t(k) * n * 3;
    for (int32_t i = 0; i < n; ++i)
      rest[i] += c * Vec3{double(slice[3 * i]), double(slice[3 * i + 1]), double(slice[3 * i + 2])};
  }
  return rest;
}

void check_param_dims(const HeadModelAssets& assets, const FaceParams& params) {
  if (int32_t(params.beta.size()) != assets.k_beta)
    fail(ErrorKind::mismatch, "deform: beta has " + std::to_string(params.beta.size()) +
                                  " entries, expected " + std::to_string(assets.k_beta));
  if (int32_t(params.psi.size()) != assets.k_psi)
    fail(ErrorKind::mismatch, "deform: psi has " + std::to_string(params.psi.size()) +
                                  " entries, expected " + std::to_string(assets.k_psi));
  if (int32_t(params.phi.size()) != assets.n_pose_params())
    fail(ErrorKind::mismatch, "deform: phi has " + std::to_string(params.phi.size()) +
                                  " entries, expected " + std::to_string(assets.n_pose_params()));
}

}  // namespace

void validate_assets(const HeadModelAssets& assets) {
  int32_t n = assets.n_vertices();
  int32_t J = assets.n_joints();
  int32_t m = assets.n_triangles();
  if (n == 0) fail(ErrorKind::validation, "assets: no vertices");
  if (assets.template_vertices.size() % 3 != 0)
    fail(ErrorKind::validation, "assets: template size not a multiple of 3");
  if (assets.shape_basis.size() != size_t(assets.k_beta) * n * 3)
    fail(ErrorKind::validation, "assets: shape basis size mismatch");
  if (assets.expression_basis.size() != size_t(assets.k_psi) * n * 3)
    fail(ErrorKind::validation, "assets: expression basis size mismatch");
  if (assets.joints.size() != size_t(J) * 3)
    fail(ErrorKind::validation, "assets: joint positions size mismatch");
  if (J == 0) fail(ErrorKind::validation, "assets: no joints");
  if (assets.joint_parents[0] != -1)
    fail(ErrorKind::validation, "assets: joint 0 must be a root (parent -1)");
  for (int32_t j = 1; j < J; ++j)
    if (assets.joint_parents[j] < -1 || assets.joint_parents[j] >= j)
      fail(ErrorKind::validation,
           "assets: joint " + std::to_string(j) + " parent must precede it in the array");
  if (assets.skinning_weights.size() != size_t(n) * J)
    fail(ErrorKind::validation, "assets: skinning weight matrix size mismatch");
  for (int32_t i = 0; i < n; ++i) {
    double sum = 0;
    for (int32_t j = 0; j < J; ++j) {
      float w = assets.skinning_weights[size_t(i) * J + j];
      if (w < 0)
        fail(ErrorKind::validation, "assets: negative skinning weight in row " + std::to_string(i));
      sum += double(w);
    }
    if (std::abs(sum - 1.0) > 1e-6)
      fail(ErrorKind::validation, "assets: skinning weights of vertex " + std::to_string(i) +
                                      " sum to " + std::to_string(sum) + ", expected 1");
  }
  if (assets.triangles.size() % 3 != 0)
    fail(ErrorKind::validation, "assets: triangle list size not a multiple of 3");
  for (int32_t t = 0; t < m; ++t) {
    for (int k = 0; k < 3; ++k) {
      int32_t v = assets.triangles[3 * t + k];
      if (v < 0 || v >= n)
        fail(ErrorKind::validation,
             "assets: triangle " + std::to_string(t) + " references vertex " + std::to_string(v));
    }
    Vec3 a = vertex_at(assets.template_vertices, assets.triangles[3 * t]);
    Vec3 b = vertex_at(assets.template_vertices, assets.triangles[3 * t + 1]);
    Vec3 c = vertex_at(assets.template_vertices, assets.triangles[3 * t + 2]);
    if (length(cross(b - a, c - a)) < 1e-12)
      fail(ErrorKind::validation, "assets: triangle " + std::to_string(t) + " is degenerate");
  }
}

FaceParams FaceParams::zero(const HeadModelAssets& assets) {
  FaceParams p;
  p.beta.assign(assets.k_beta, 0.0);
  p.psi.assign(assets.k_psi, 0.0);
  p.phi.assign(assets.n_pose_params(), 0.0);
  return p;
}

std::vector<double> FaceParams::packed() const {
  std::vector<double> flat;
  flat.reserve(beta.size() + psi.size() + phi.size());
  flat.insert(flat.end(), beta.begin(), beta.end());
  flat.insert(flat.end(), psi.begin(), psi.end());
  flat.insert(flat.end(), phi.begin(), phi.end());
  return flat;
}

FaceParams FaceParams::unpack(const HeadModelAssets& assets, const std::vector<double>& flat) {
  if (int32_t(flat.size()) != assets.n_params())
    fail(ErrorKind::mismatch, "unpack: expected " + std::to_string(assets.n_params()) +
                                  " params, got " + std::to_string(flat.size()));
  FaceParams p;
  p.beta.assign(flat.begin(), flat.begin() + assets.k_beta);
  p.psi.assign(flat.begin() + assets.k_beta, flat.begin() + assets.k_beta + assets.k_psi);
  p.phi.assign(flat.begin() + assets.k_beta + assets.k_psi, flat.end());
  return p;
}

TriangleMesh deform(const HeadModelAssets& assets, const FaceParams& params) {
  check_param_dims(assets, params);
  int32_t n = assets.n_vertices();
  int32_t J = assets.n_joints();
  std::vector<Vec3> rest = blended_rest(assets, params);
  SkinPose pose = compute_skin_pose(assets, params);

  TriangleMesh mesh;
  mesh.vertices.resize(n);
  for (int32_t i = 0; i < n; ++i) {
    // Displacement blend: v + sum_j w_ij (S_j v - v). Equal to the affine
    // blend when the row sums to 1 (validated) and exact at the rest pose.
    Vec3 v = rest[i];
    Vec3 out = v;
    for (int32_t j = 0; j < J; ++j) {
      double w = double(assets.skinning_weights[size_t(i) * J + j]);
      if (w == 0) continue;
      out += w * (pose.skin[j].point(v) - v);
    }
    mesh.vertices[i] = out;
  }
  mesh.triangles.resize(assets.n_triangles());
  for (int32_t t = 0; t < assets.n_triangles(); ++t)
    mesh.triangles[t] = {assets.triangles[3 * t], assets.triangles[3 * t + 1],
                         assets.triangles[3 * t + 2]};
  mesh.update_normals();
  return mesh;
}

DeformJacobian deform_jacobian(const HeadModelAssets& assets, const FaceParams& params) {
  check_param_dims(assets, params);
  int32_t n = assets.n_vertices();
  int32_t J = assets.n_joints();
  int32_t cols = assets.n_params();
  std::vector<Vec3> rest = blended_rest(assets, params);
  SkinPose pose = compute_skin_pose(assets, params);

  DeformJacobian jac;
  jac.n_rows = n * 3;
  jac.n_cols = cols;
  jac.d.assign(size_t(jac.n_rows) * cols, 0.0);
  auto put = [&](int32_t vertex, int32_t col, Vec3 g) {
    for (int axis = 0; axis < 3; ++axis)
      jac.d[size_t(vertex * 3 + axis) * cols + col] = g[axis];
  };

  // Blendshape columns: basis slice pushed through d(out)/d(rest) =
  // I + sum_j w_ij (R_j - I).
  for (int32_t i = 0; i < n; ++i) {
    Mat3 m = Mat3::identity();
    for (int32_t j = 0; j < J; ++j) {
      double w = double(assets.skinning_weights[size_t(i) * J + j]);
      if (w == 0) continue;
      m = m + w * (pose.skin[j].linear + (-1.0) * Mat3::identity());
    }
    for (int32_t k = 0; k < assets.k_beta; ++k) {
      const float* slice = assets.shape_basis.data() + size_t(k) * n * 3;
      Vec3 b{double(slice[3 * i]), double(slice[3 * i + 1]), double(slice[3 * i + 2])};
      put(i, k, m * b);
    }
    for (int32_t k = 0; k < assets.k_psi; ++k) {
      const float* slice = assets.expression_basis.data() + size_t(k) * n * 3;
      Vec3 b{double(slice[3 * i]), double(slice[3 * i + 1]), double(slice[3 * i + 2])};
      put(i, assets.k_beta + k, m * b);
    }
  }

  // Pose columns: dS_jq = S_parent o dL, descendants chain dS_j = dS_parent o L_j.
  for (int32_t jq = 0; jq < J; ++jq) {
    Vec3 phi{params.phi[3 * jq], params.phi[3 * jq + 1], params.phi[3 * jq + 2]};
    Vec3 p_jq = vertex_at(assets.joints, jq);
    for (int axis = 0; axis < 3; ++axis) {
      Mat3 drot = axis_angle_derivative(phi, axis, pose.local_rot[jq]);
      std::vector<Affine> ds(J, Affine{Mat3::zero(), {0, 0, 0}});
      std::vector<char> touched(J, 0);
      ds[jq] = Affine{pose.parents_skin[jq].linear * drot,
                      pose.parents_skin[jq].linear * (-1.0 * (drot * p_jq))};
      touched[jq] = 1;
      for (int32_t j = jq + 1; j < J; ++j) {
        int32_t par = assets.joint_parents[j];
        if (par >= 0 && touched[par]) {
          Vec3 p_j = vertex_at(assets.joints, j);
          Affine local{pose.local_rot[j], p_j - pose.local_rot[j] * p_j};
          ds[j] = ds[par] * local;
          touched[j] = 1;
        }
      }
      int32_t col = assets.k_beta + assets.k_psi + 3 * jq + axis;
      for (int32_t i = 0; i < n; ++i) {
        Vec3 g{0, 0, 0};
        for (int32_t j = jq; j < J; ++j) {
          if (!touched[j]) continue;
          double w = double(assets.skinning_weights[size_t(i) * J + j]);
          if (w == 0) continue;
          g += w * (ds[j].linear * rest[i] + ds[j].offset);
        }
        put(i, col, g);
      }
    }
  }
  return jac;
}

namespace {

struct IcoMesh {
  std::vector<Vec3> verts;
  std::vector<std::array<int32_t, 3>> faces;
};

IcoMesh icosphere(int n_subdiv) {
  double t = (1.0 + std::sqrt(5.0)) / 2.0;
  IcoMesh m;
  m.verts = {{-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
             {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.verts) v = normalize(v);
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < n_subdiv; ++s) {
    std::map<std::pair<int32_t, int32_t>, int32_t> midpoint;
    auto mid = [&](int32_t a, int32_t b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      int32_t id = int32_t(m.verts.size());
      m.verts.push_back(normalize(0.5 * (m.verts[a] + m.verts[b])));
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int32_t, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      int32_t a = mid(f[0], f[1]), b = mid(f[1], f[2]), c = mid(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    m.faces = std::move(next);
  }
  return m;
}

// Compactly supported C1 bump by angular distance on the unit sphere.
double sphere_bump(Vec3 u, Vec3 center, double radius) {
  double ang = std::acos(std::clamp(dot(u, center), -1.0, 1.0));
  double w = ang / radius;
  if (w >= 1.0) return 0.0;
  double s = 1.0 - w * w;
  return s * s;
}

Vec3 random_unit(Rng& rng) {
  Vec3 v{rng.normal(), rng.normal(), rng.normal()};
  double len = length(v);
  return len > 1e-9 ? v / len : Vec3{1, 0, 0};
}

}  // namespace

HeadModelAssets make_toy_head(int n_subdiv, uint64_t seed) {
  if (n_subdiv < 0 || n_subdiv > 6)
    fail(ErrorKind::config, "make_toy_head: n_subdiv must be in [0, 6]");
  IcoMesh ico = icosphere(n_subdiv);
  int32_t n = int32_t(ico.verts.size());
  Rng rng(hash_mix(seed, 0x746f7968656164ULL));

  const Vec3 axis_scale{0.85, 1.05, 0.95};
  const Vec3 jaw_center = normalize({0, -0.78, 0.62});
  const Vec3 jaw_dir = normalize({0, -0.85, 0.30});
  const Vec3 cheek_l = normalize({0.70, 0.05, 0.62});
  const Vec3 cheek_r = normalize({-0.70, 0.05, 0.62});

  // Shape-bump centers kept away from the expression regions and each other
  // so shape and expression effects stay distinguishable when fit jointly.
  auto far_enough = [&](Vec3 c, Vec3 other, double min_angle) {
    return std::acos(std::clamp(dot(c, other), -1.0, 1.0)) >= min_angle;
  };
  Vec3 c0, c1;
  do {
    c0 = random_unit(rng);
  } while (!far_enough(c0, jaw_center, 1.2) || !far_enough(c0, cheek_l, 1.0) ||
           !far_enough(c0, cheek_r, 1.0));
  do {
    c1 = random_unit(rng);
  } while (!far_enough(c1, jaw_center, 1.2) || !far_enough(c1, cheek_l, 1.0) ||
           !far_enough(c1, cheek_r, 1.0) || !far_enough(c1, c0, 1.0));

  HeadModelAssets assets;
  assets.k_beta = 2;
  assets.k_psi = 2;
  assets.template_vertices.resize(size_t(n) * 3);
  assets.shape_basis.resize(size_t(2) * n * 3);
  assets.expression_basis.resize(size_t(2) * n * 3);
  for (int32_t i = 0; i < n; ++i) {
    Vec3 u = ico.verts[i];
    Vec3 pos = u * axis_scale;
    for (int a = 0; a < 3; ++a) assets.template_vertices[3 * i + a] = float(pos[a]);

    Vec3 s0 = 0.12 * sphere_bump(u, c0, 1.0) * u;
    Vec3 s1 = 0.10 * sphere_bump(u, c1, 0.85) * u;
    Vec3 e0 = 0.12 * sphere_bump(u, jaw_center, 0.75) * jaw_dir;
    Vec3 e1 = 0.10 * (sphere_bump(u, cheek_l, 0.55) + sphere_bump(u, cheek_r, 0.55)) * u;
    for (int a = 0; a < 3; ++a) {
      assets.shape_basis[size_t(0) * n * 3 + 3 * i + a] = float(s0[a]);
      assets.shape_basis[size_t(1) * n * 3 + 3 * i + a] = float(s1[a]);
      assets.expression_basis[size_t(0) * n * 3 + 3 * i + a] = float(e0[a]);
      assets.expression_basis[size_t(1) * n * 3 + 3 * i + a] = float(e1[a]);
    }
  }

  assets.joints = {0.0f, 0.0f, 0.0f, 0.0f, -0.05f, 0.0f};
  assets.joint_parents = {-1, 0};
  assets.skinning_weights.resize(size_t(n) * 2);
  for (int32_t i = 0; i < n; ++i) {
    // Quantized so each row sums to exactly 1.0f.
    double w = 0.9 * sphere_bump(ico.verts[i], jaw_center, 0.85);
    float wj = float(std::round(w * 4096.0) / 4096.0);
    assets.skinning_weights[size_t(i) * 2] = 1.0f - wj;
    assets.skinning_weights[size_t(i) * 2 + 1] = wj;
  }

  assets.triangles.resize(ico.faces.size() * 3);
  for (size_t f = 0; f < ico.faces.size(); ++f)
    for (int k = 0; k < 3; ++k) assets.triangles[3 * f + k] = ico.faces[f][k];

  validate_assets(assets);
  return assets;
}

HeadModelAssets load_head_assets(const std::string& path) {
  Container c = read_container(path, kAssetMagic);
  HeadModelAssets assets;
  const NamedArray& tmpl = c.require("template", Dtype::f32);
  assets.template_vertices = tmpl.as_f32();
  const NamedArray& shape = c.require("shape_basis", Dtype::f32);
  if (shape.dims.size() != 3)
    fail(ErrorKind::parse, path + ": shape_basis must have dims [k, n, 3]");
  assets.k_beta = int32_t(shape.dims[0]);
  assets.shape_basis = shape.as_f32();
  const NamedArray& expr = c.require("expression_basis", Dtype::f32);
  if (expr.dims.size() != 3)
    fail(ErrorKind::parse, path + ": expression_basis must have dims [k, n, 3]");
  assets.k_psi = int32_t(expr.dims[0]);
  assets.expression_basis = expr.as_f32();
  assets.joints = c.require("joints", Dtype::f32).as_f32();
  assets.joint_parents = c.require("joint_parents", Dtype::i32).as_i32();
  assets.skinning_weights = c.require("skinning_weights", Dtype::f32).as_f32();
  assets.triangles = c.require("triangles", Dtype::i32).as_i32();
  validate_assets(assets);
  return assets;
}

void save_head_assets(const HeadModelAssets& assets, const std::string& path) {
  uint32_t n = uint32_t(assets.n_vertices());
  uint32_t J = uint32_t(assets.n_joints());
  Container c;
  c.put_f32("template", {n, 3}, assets.template_vertices.data());
  c.put_f32("shape_basis", {uint32_t(assets.k_beta), n, 3}, assets.shape_basis.data());
  c.put_f32("expression_basis", {uint32_t(assets.k_psi), n, 3}, assets.expression_basis.data());
  c.put_f32("joints", {J, 3}, assets.joints.data());
  c.put_i32("joint_parents", {J}, assets.joint_parents.data());
  c.put_f32("skinning_weights", {n, J}, assets.skinning_weights.data());
  c.put_i32("triangles", {uint32_t(assets.n_triangles()), 3}, assets.triangles.data());
  write_container(c, path, kAssetMagic);
}

}  // namespace meshfield
