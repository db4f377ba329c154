#pragma once

#include <string>
#include <vector>

#include "meshfield/bvh.hpp"
#include "meshfield/field.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/renderer.hpp"

namespace meshfield {

struct TriangleAffine {
  Affine map;
  bool degenerate = false;  // near-zero area on either side; identity substituted
};

// Affine agreeing exactly with the three vertex pairs plus the unit-normal
// offset point on each side (the deformation-transfer construction).
TriangleAffine estimate_triangle_affine(const Vec3 p[3], const Vec3 q[3]);

struct TriangleAffineMap {
  std::vector<TriangleAffine> maps;  // indexed by source triangle
};

// maps[t] carries points near source triangle t onto the target mesh. The
// meshes must share their triangle list (mismatch error).
TriangleAffineMap build_affine_field(const TriangleMesh& source, const TriangleMesh& target);

// Applies the map of the source triangle nearest to x.
Vec3 retarget_point(const Vec3& x, const Bvh& source_bvh, const TriangleMesh& source,
                    const TriangleAffineMap& maps);

enum class RetargetDensity { analytic, learned };

RetargetDensity parse_retarget_density(const std::string& name);  // config error otherwise

// Geometry (and analytic density) from the re-posed source mesh; appearance
// queried at the retargeted point on the trained side.
struct RetargetShader {
  const RadianceField* field;
  const Bvh* source_bvh;
  const TriangleMesh* source;
  const TriangleAffineMap* maps;
  RetargetDensity mode = RetargetDensity::analytic;
  mutable FieldWorkspace ws;

  ShadedSample shade(const Vec3& x) const;
};

// Kept iff the first mesh intersection exists and is front-facing; rays that
// miss or enter through a hole (back-face first) are dropped.
bool mouth_filter_keeps(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray);
std::vector<Ray> filter_open_mouth_rays(const std::vector<Ray>& rays, const Bvh& bvh,
                                        const TriangleMesh& mesh);

// Renders new_face with appearance transported from trained_face. Dropped
// rays (mouth filter on) come out rgba zero.
ImageF render_retargeted(const RadianceField& field, const HeadModelAssets& assets,
                         const FaceParams& trained_face, const FaceParams& new_face,
                         const Camera& cam, const RenderSettings& settings,
                         RetargetDensity mode, bool mouth_filter);

}  // namespace meshfield
