#include "meshfield/retarget.hpp"

#include <cmath>

#include "meshfield/errors.hpp"

namespace meshfield {

namespace {

// Unit normal, or zero when the triangle is degenerate (cross below tol).
bool triangle_normal(const Vec3 v[3], Vec3& n) {
  const Vec3 c = cross(v[1] - v[0], v[2] - v[0]);
  const double len = length(c);
  if (len <= 2e-12) return false;  // area <= 1e-12
  n = (1.0 / len) * c;
  return true;
}

}  // namespace

TriangleAffine estimate_triangle_affine(const Vec3 p[3], const Vec3 q[3]) {
  Vec3 np, nq;
  if (!triangle_normal(p, np) || !triangle_normal(q, nq))
    return {Affine::identity(), true};
  // Columns span the edges plus the unit normal, so the system is exactly
  // determined: A * [p2-p1, p3-p1, np] = [q2-q1, q3-q1, nq].
  const Mat3 pm = Mat3::from_columns(p[1] - p[0], p[2] - p[0], np);
  const Mat3 qm = Mat3::from_columns(q[1] - q[0], q[2] - q[0], nq);
  TriangleAffine r;
  r.map.linear = qm * inverse(pm);
  r.map.offset = q[0] - r.map.linear * p[0];
  return r;
}

TriangleAffineMap build_affine_field(const TriangleMesh& source, const TriangleMesh& target) {
  if (source.triangles != target.triangles || source.vertices.size() != target.vertices.size())
    fail(ErrorKind::mismatch, "retarget meshes must share their triangle list");
  TriangleAffineMap field;
  field.maps.resize(source.triangles.size());
  for (size_t t = 0; t < source.triangles.size(); ++t) {
    Vec3 p[3], q[3];
    for (int v = 0; v < 3; ++v) {
      p[v] = source.vertices[size_t(source.triangles[t][size_t(v)])];
      q[v] = target.vertices[size_t(target.triangles[t][size_t(v)])];
    }
    field.maps[t] = estimate_triangle_affine(p, q);
  }
  return field;
}

Vec3 retarget_point(const Vec3& x, const Bvh& source_bvh, const TriangleMesh& source,
                    const TriangleAffineMap& maps) {
  const SurfacePoint sp = closest_point(source_bvh, source, x);
  return maps.maps[size_t(sp.triangle_id)].map.point(x);
}

RetargetDensity parse_retarget_density(const std::string& name) {
  if (name == "analytic") return RetargetDensity::analytic;
  if (name == "learned") return RetargetDensity::learned;
  fail(ErrorKind::config, "retarget density must be analytic or learned, got " + name);
}

ShadedSample RetargetShader::shade(const Vec3& x) const {
  const SurfacePoint sp = closest_point(*source_bvh, *source, x);
  if (mode == RetargetDensity::analytic) {
    const double s = shell_density(sp.distance, field->epsilon);
    if (s <= 0.0) return {};
    const Vec3 xp = maps->maps[size_t(sp.triangle_id)].map.point(x);
    return {s, field_color(*field, xp, ws)};
  }
  if (sp.distance > field->epsilon) return {};
  const Vec3 xp = maps->maps[size_t(sp.triangle_id)].map.point(x);
  const double s = softplus(field_density_raw(*field, xp, ws));
  return {s, field_color(*field, xp, ws)};
}

bool mouth_filter_keeps(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray) {
  const auto hit = first_hit(bvh, mesh, ray);
  return hit.has_value() && hit->front_facing;
}

std::vector<Ray> filter_open_mouth_rays(const std::vector<Ray>& rays, const Bvh& bvh,
                                        const TriangleMesh& mesh) {
  std::vector<Ray> kept;
  kept.reserve(rays.size());
  for (const Ray& r : rays)
    if (mouth_filter_keeps(bvh, mesh, r)) kept.push_back(r);
  return kept;
}

ImageF render_retargeted(const RadianceField& field, const HeadModelAssets& assets,
                         const FaceParams& trained_face, const FaceParams& new_face,
                         const Camera& cam, const RenderSettings& settings,
                         RetargetDensity mode, bool mouth_filter) {
  const TriangleMesh trained_mesh = deform(assets, trained_face);
  TriangleMesh new_mesh = deform(assets, new_face);
  const Bvh new_bvh = build_bvh(new_mesh);
  const TriangleAffineMap maps = build_affine_field(new_mesh, trained_mesh);
  const SceneBounds bounds = scene_bounds(assets);

  const RetargetShader shader{&field, &new_bvh, &new_mesh, &maps, mode, {}};
  const ShellClip clip{&new_bvh, field.epsilon};
  ImageF img = render_image(shader, cam, bounds, settings, clip);

  if (mouth_filter) {
    parallel_for(cam.height, [&](int64_t py) {
      for (int px = 0; px < cam.width; ++px) {
        const Ray ray = pixel_ray(cam, px, int(py));
        if (!mouth_filter_keeps(new_bvh, new_mesh, ray)) {
          double* p = img.pixel(px, int(py));
          p[0] = p[1] = p[2] = p[3] = 0.0;
        }
      }
    });
  }
  return img;
}

}  // namespace meshfield
