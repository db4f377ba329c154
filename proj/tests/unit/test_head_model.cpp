#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "meshfield/errors.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/rng.hpp"

using namespace meshfield;

namespace {

// Minimal rig: tetrahedron fully weighted to a second joint away from origin.
HeadModelAssets tetra_assets() {
  HeadModelAssets a;
  a.template_vertices = {0.4f, 0.0f, 0.0f, 0.0f, 0.5f, 0.0f,
                         0.0f, 0.0f, 0.6f, 0.3f, 0.3f, 0.3f};
  a.k_beta = 0;
  a.k_psi = 0;
  a.joints = {0.0f, 0.0f, 0.0f, 0.3f, -0.2f, 0.1f};
  a.joint_parents = {-1, 0};
  a.skinning_weights = {0, 1, 0, 1, 0, 1, 0, 1};
  a.triangles = {0, 1, 2, 0, 3, 1, 1, 3, 2, 0, 2, 3};
  validate_assets(a);
  return a;
}

FaceParams random_params(const HeadModelAssets& assets, Rng& rng, double pose_scale = 0.4) {
  FaceParams p = FaceParams::zero(assets);
  for (auto& v : p.beta) v = rng.uniform(-0.5, 0.5);
  for (auto& v : p.psi) v = rng.uniform(-0.5, 0.5);
  for (auto& v : p.phi) v = rng.uniform(-pose_scale, pose_scale);
  return p;
}

}  // namespace

TEST_CASE("all-zero params reproduce the template exactly") {
  HeadModelAssets assets = make_toy_head(2, 7);
  TriangleMesh mesh = deform(assets, FaceParams::zero(assets));
  REQUIRE(int32_t(mesh.vertices.size()) == assets.n_vertices());
  for (int32_t i = 0; i < assets.n_vertices(); ++i) {
    CHECK(mesh.vertices[i].x == double(assets.template_vertices[3 * i]));
    CHECK(mesh.vertices[i].y == double(assets.template_vertices[3 * i + 1]));
    CHECK(mesh.vertices[i].z == double(assets.template_vertices[3 * i + 2]));
  }
}

TEST_CASE("toy head counts, winding, and determinism") {
  HeadModelAssets assets = make_toy_head(2, 7);
  CHECK(assets.n_triangles() == 320);  // 20 * 4^2
  CHECK(assets.n_vertices() == 162);   // 10 * 4^2 + 2
  CHECK(assets.k_beta == 2);
  CHECK(assets.k_psi == 2);
  CHECK(assets.n_joints() == 2);

  // Closed orientable surface: every directed edge appears exactly once and
  // its reverse exists in some other triangle.
  std::map<std::pair<int32_t, int32_t>, int> directed;
  for (int32_t t = 0; t < assets.n_triangles(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int32_t u = assets.triangles[3 * t + k];
      int32_t v = assets.triangles[3 * t + (k + 1) % 3];
      directed[{u, v}]++;
    }
  }
  for (const auto& [edge, count] : directed) {
    CHECK(count == 1);
    CHECK(directed.count({edge.second, edge.first}) == 1);
  }

  // Outward normals for the star-shaped template.
  TriangleMesh mesh = deform(assets, FaceParams::zero(assets));
  for (size_t t = 0; t < mesh.triangles.size(); ++t) {
    Vec3 centroid = (mesh.vertices[mesh.triangles[t][0]] + mesh.vertices[mesh.triangles[t][1]] +
                     mesh.vertices[mesh.triangles[t][2]]) /
                    3.0;
    CHECK(dot(mesh.face_normals[t], centroid) > 0);
  }

  HeadModelAssets again = make_toy_head(2, 7);
  CHECK(again.template_vertices == assets.template_vertices);
  CHECK(again.shape_basis == assets.shape_basis);
  CHECK(again.expression_basis == assets.expression_basis);
  CHECK(again.skinning_weights == assets.skinning_weights);
  HeadModelAssets other = make_toy_head(2, 8);
  CHECK(other.shape_basis != assets.shape_basis);

  // Expression slice 0 (jaw) is compactly supported.
  int32_t zero_rows = 0;
  for (int32_t i = 0; i < assets.n_vertices(); ++i) {
    bool zero = assets.expression_basis[3 * i] == 0 && assets.expression_basis[3 * i + 1] == 0 &&
                assets.expression_basis[3 * i + 2] == 0;
    if (zero) ++zero_rows;
  }
  CHECK(zero_rows > assets.n_vertices() / 2);
}

TEST_CASE("single-joint quarter turn matches the hand-applied rotation") {
  HeadModelAssets assets = tetra_assets();
  FaceParams params = FaceParams::zero(assets);
  double half_pi = std::acos(0.0);
  params.phi[5] = half_pi;  // joint 1, z axis

  TriangleMesh mesh = deform(assets, params);
  Vec3 p{double(0.3f), double(-0.2f), double(0.1f)};  // joints are stored as f32
  for (int32_t i = 0; i < 4; ++i) {
    Vec3 v{double(assets.template_vertices[3 * i]), double(assets.template_vertices[3 * i + 1]),
           double(assets.template_vertices[3 * i + 2])};
    Vec3 rel = v - p;
    Vec3 expected = p + Vec3{-rel.y, rel.x, rel.z};  // z-rotation by pi/2
    CHECK(length(mesh.vertices[i] - expected) < 1e-12);
  }
}

TEST_CASE("deform is affine in blendshape coefficients at fixed pose") {
  HeadModelAssets assets = make_toy_head(1, 3);
  Rng rng(77);
  FaceParams pose = FaceParams::zero(assets);
  for (auto& v : pose.phi) v = rng.uniform(-0.3, 0.3);

  FaceParams p1 = pose, p2 = pose, p0 = pose, pc = pose;
  for (int k = 0; k < assets.k_beta; ++k) {
    p1.beta[k] = rng.uniform(-1, 1);
    p2.beta[k] = rng.uniform(-1, 1);
  }
  for (int k = 0; k < assets.k_psi; ++k) {
    p1.psi[k] = rng.uniform(-1, 1);
    p2.psi[k] = rng.uniform(-1, 1);
  }
  double a = 0.7, b = -0.4;
  for (int k = 0; k < assets.k_beta; ++k) pc.beta[k] = a * p1.beta[k] + b * p2.beta[k];
  for (int k = 0; k < assets.k_psi; ++k) pc.psi[k] = a * p1.psi[k] + b * p2.psi[k];

  TriangleMesh m1 = deform(assets, p1), m2 = deform(assets, p2), m0 = deform(assets, p0),
               mc = deform(assets, pc);
  for (size_t i = 0; i < mc.vertices.size(); ++i) {
    Vec3 expected = a * m1.vertices[i] + b * m2.vertices[i] - (a + b - 1.0) * m0.vertices[i];
    CHECK(length(mc.vertices[i] - expected) < 1e-9);
  }
}

TEST_CASE("pose derivative at rest equals the skew form about the joint") {
  HeadModelAssets assets = tetra_assets();
  FaceParams params = FaceParams::zero(assets);
  DeformJacobian jac = deform_jacobian(assets, params);
  Vec3 p{double(0.3f), double(-0.2f), double(0.1f)};
  for (int32_t i = 0; i < 4; ++i) {
    Vec3 v{double(assets.template_vertices[3 * i]), double(assets.template_vertices[3 * i + 1]),
           double(assets.template_vertices[3 * i + 2])};
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 e{axis == 0 ? 1.0 : 0.0, axis == 1 ? 1.0 : 0.0, axis == 2 ? 1.0 : 0.0};
      Vec3 expected = cross(e, v - p);
      int32_t col = 3 + axis;  // joint 1 pose params
      Vec3 got{jac.at(3 * i, col), jac.at(3 * i + 1, col), jac.at(3 * i + 2, col)};
      CHECK(length(got - expected) < 1e-12);
    }
  }
}

TEST_CASE("deform_jacobian matches central finite differences") {
  HeadModelAssets assets = make_toy_head(1, 11);
  Rng rng(13);
  const double h = 1e-5;
  for (int draw = 0; draw < 5; ++draw) {
    FaceParams params = random_params(assets, rng);
    DeformJacobian jac = deform_jacobian(assets, params);
    std::vector<double> flat = params.packed();
    for (int32_t col = 0; col < assets.n_params(); ++col) {
      std::vector<double> fp = flat, fm = flat;
      fp[col] += h;
      fm[col] -= h;
      TriangleMesh mp = deform(assets, FaceParams::unpack(assets, fp));
      TriangleMesh mm = deform(assets, FaceParams::unpack(assets, fm));
      for (int32_t i = 0; i < assets.n_vertices(); ++i) {
        for (int axis = 0; axis < 3; ++axis) {
          double fd = (mp.vertices[i][axis] - mm.vertices[i][axis]) / (2 * h);
          double an = jac.at(3 * i + axis, col);
          CHECK(std::abs(an - fd) <= 1e-6 * std::max({1.0, std::abs(an), std::abs(fd)}));
        }
      }
    }
  }
}

TEST_CASE("asset save/load round-trips bitwise") {
  HeadModelAssets assets = make_toy_head(1, 42);
  std::string path = "mf_test_assets.mfh";
  save_head_assets(assets, path);
  HeadModelAssets loaded = load_head_assets(path);
  CHECK(loaded.template_vertices == assets.template_vertices);
  CHECK(loaded.shape_basis == assets.shape_basis);
  CHECK(loaded.expression_basis == assets.expression_basis);
  CHECK(loaded.joints == assets.joints);
  CHECK(loaded.joint_parents == assets.joint_parents);
  CHECK(loaded.skinning_weights == assets.skinning_weights);
  CHECK(loaded.triangles == assets.triangles);
  CHECK(loaded.k_beta == assets.k_beta);
  CHECK(loaded.k_psi == assets.k_psi);
  std::remove(path.c_str());
}

TEST_CASE("bad skinning row is rejected with the row named") {
  HeadModelAssets assets = make_toy_head(0, 1);
  assets.skinning_weights[3 * assets.n_joints()] = 0.25f;  // vertex 3 row now sums to < 1
  assets.skinning_weights[3 * assets.n_joints() + 1] = 0.25f;
  std::string path = "mf_test_badassets.mfh";
  save_head_assets(assets, path);
  try {
    load_head_assets(path);
    FAIL("expected validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK(std::string(e.what()).find("vertex 3") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("parameter dimension mismatches are explicit errors") {
  HeadModelAssets assets = make_toy_head(0, 1);
  FaceParams params = FaceParams::zero(assets);
  params.beta.push_back(0.0);
  CHECK_THROWS_AS(deform(assets, params), Error);
  params = FaceParams::zero(assets);
  params.phi.resize(2);
  CHECK_THROWS_AS(deform_jacobian(assets, params), Error);
}
