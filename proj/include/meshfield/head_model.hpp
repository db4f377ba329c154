#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meshfield/geometry.hpp"

namespace meshfield {

// Linear blendshape + linear-blend-skinning head. Numeric payloads are kept
// as f32 to match the asset file exactly (save/load round-trips bitwise);
// deform() accumulates in double.
struct HeadModelAssets {
  std::vector<float> template_vertices;  // n*3
  std::vector<float> shape_basis;        // k_beta slices of n*3
  std::vector<float> expression_basis;   // k_psi slices of n*3
  std::vector<float> joints;             // J*3 rest positions
  std::vector<int32_t> joint_parents;    // parent[0] == -1, parent[j] < j
  std::vector<float> skinning_weights;   // n*J, rows sum to 1 within 1e-6
  std::vector<int32_t> triangles;        // m*3, CCW
  int32_t k_beta = 0;
  int32_t k_psi = 0;

  int32_t n_vertices() const { return int32_t(template_vertices.size() / 3); }
  int32_t n_triangles() const { return int32_t(triangles.size() / 3); }
  int32_t n_joints() const { return int32_t(joint_parents.size()); }
  int32_t n_pose_params() const { return 3 * n_joints(); }
  int32_t n_params() const { return k_beta + k_psi + n_pose_params(); }
};

// Throws a validation error naming the offending entity.
void validate_assets(const HeadModelAssets& assets);

struct FaceParams {
  std::vector<double> beta;  // shape
  std::vector<double> psi;   // expression
  std::vector<double> phi;   // axis-angle per joint, 3*J

  static FaceParams zero(const HeadModelAssets& assets);
  // Packed order [beta | psi | phi]; the deform Jacobian uses the same order.
  std::vector<double> packed() const;
  static FaceParams unpack(const HeadModelAssets& assets, const std::vector<double>& flat);
};

// Blendshape offsets applied in rest pose, then skinning. All-zero params
// reproduce the template exactly.
TriangleMesh deform(const HeadModelAssets& assets, const FaceParams& params);

// d(vertex coordinates) / d(params), rows = vertex*3+axis, cols = packed params.
struct DeformJacobian {
  int32_t n_rows = 0;
  int32_t n_cols = 0;
  std::vector<double> d;  // row-major

  double at(int32_t row, int32_t col) const { return d[size_t(row) * n_cols + col]; }
};

DeformJacobian deform_jacobian(const HeadModelAssets& assets, const FaceParams& params);

// Subdivided icosphere with two smooth shape bases, two compactly supported
// expression bases (index 0 opens the jaw), and a root + jaw joint rig.
HeadModelAssets make_toy_head(int n_subdiv, uint64_t seed);

HeadModelAssets load_head_assets(const std::string& path);
void save_head_assets(const HeadModelAssets& assets, const std::string& path);

}  // namespace meshfield
