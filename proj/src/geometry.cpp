#include "meshfield/geometry.hpp"

#include <cstdio>
#include <fstream>

#include "meshfield/errors.hpp"

namespace meshfield {

void TriangleMesh::update_normals() {
  face_normals.resize(triangles.size());
  for (size_t i = 0; i < triangles.size(); ++i) {
    const auto& t = triangles[i];
    Vec3 n = cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]);
    double len = length(n);
    face_normals[i] = len > 0 ? n / len : Vec3{0, 0, 0};
  }
}

Aabb mesh_bounds(const TriangleMesh& mesh) {
  Aabb box;
  for (const Vec3& v : mesh.vertices) box.expand(v);
  return box;
}

namespace {

TrianglePoint closest_on_segment(Vec3 p, Vec3 a, Vec3 b, double bary_a[3], double bary_b[3]) {
  Vec3 ab = b - a;
  double denom = dot(ab, ab);
  double t = denom > 0 ? dot(p - a, ab) / denom : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  TrianglePoint r;
  r.point = a + t * ab;
  r.b0 = (1 - t) * bary_a[0] + t * bary_b[0];
  r.b1 = (1 - t) * bary_a[1] + t * bary_b[1];
  r.b2 = (1 - t) * bary_a[2] + t * bary_b[2];
  return r;
}

}  // namespace

TrianglePoint closest_point_triangle(Vec3 p, Vec3 a, Vec3 b, Vec3 c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return {a, 1, 0, 0};  // vertex A

  Vec3 bp = p - b;
  double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return {b, 0, 1, 0};  // vertex B

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double denom = d1 - d3;
    if (denom > 0) {
      double v = d1 / denom;  // edge AB
      return {a + v * ab, 1 - v, v, 0};
    }
  }

  Vec3 cp = p - c;
  double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return {c, 0, 0, 1};  // vertex C

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double denom = d2 - d6;
    if (denom > 0) {
      double w = d2 / denom;  // edge AC
      return {a + w * ac, 1 - w, 0, w};
    }
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0) {
    double denom = (d4 - d3) + (d5 - d6);
    if (denom > 0) {
      double w = (d4 - d3) / denom;  // edge BC
      return {b + w * (c - b), 0, 1 - w, w};
    }
  }

  double sum = va + vb + vc;
  if (sum <= 0) {
    // Degenerate (collinear) triangle: best of the three edges.
    double ba[3] = {1, 0, 0}, bb[3] = {0, 1, 0}, bc[3] = {0, 0, 1};
    TrianglePoint best = closest_on_segment(p, a, b, ba, bb);
    TrianglePoint t2 = closest_on_segment(p, a, c, ba, bc);
    if (length_squared(p - t2.point) < length_squared(p - best.point)) best = t2;
    TrianglePoint t3 = closest_on_segment(p, b, c, bb, bc);
    if (length_squared(p - t3.point) < length_squared(p - best.point)) best = t3;
    return best;
  }

  double denom = 1.0 / sum;
  double v = vb * denom, w = vc * denom;  // interior
  return {a + v * ab + w * ac, 1 - v - w, v, w};
}

SurfacePoint make_surface_point(const TriangleMesh& mesh, int32_t tri, const TrianglePoint& tp,
                                Vec3 query) {
  SurfacePoint sp;
  sp.triangle_id = tri;
  sp.barycentric[0] = tp.b0;
  sp.barycentric[1] = tp.b1;
  sp.barycentric[2] = tp.b2;
  sp.position = tp.point;
  sp.distance = length(query - tp.point);
  (void)mesh;
  return sp;
}

SurfacePoint closest_point_brute(const TriangleMesh& mesh, Vec3 query) {
  if (mesh.triangles.empty()) fail(ErrorKind::validation, "closest_point on empty mesh");
  SurfacePoint best;
  best.distance = 1e300;
  for (int32_t i = 0; i < int32_t(mesh.triangles.size()); ++i) {
    const auto& t = mesh.triangles[i];
    TrianglePoint tp =
        closest_point_triangle(query, mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    double d = length(query - tp.point);
    if (d < best.distance || (d == best.distance && i < best.triangle_id)) {
      best = make_surface_point(mesh, i, tp, query);
      best.distance = d;
    }
  }
  return best;
}

bool ray_triangle(const Ray& ray, Vec3 a, Vec3 b, Vec3 c, double& t, double& u, double& v) {
  Vec3 e1 = b - a, e2 = c - a;
  Vec3 pv = cross(ray.direction, e2);
  double det = dot(e1, pv);
  if (det == 0) return false;
  double inv = 1.0 / det;
  Vec3 tv = ray.origin - a;
  u = dot(tv, pv) * inv;
  if (u < 0 || u > 1) return false;
  Vec3 qv = cross(tv, e1);
  v = dot(ray.direction, qv) * inv;
  if (v < 0 || u + v > 1) return false;
  t = dot(e2, qv) * inv;
  return t >= ray.t_near && t <= ray.t_far;
}

bool first_hit_brute(const TriangleMesh& mesh, const Ray& ray, RayHit& hit) {
  bool found = false;
  RayHit best;
  best.t = 1e300;
  for (int32_t i = 0; i < int32_t(mesh.triangles.size()); ++i) {
    const auto& tri = mesh.triangles[i];
    double t, u, v;
    if (!ray_triangle(ray, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]], t, u,
                      v))
      continue;
    if (t < best.t || (t == best.t && i < best.triangle_id)) {
      best.t = t;
      best.triangle_id = i;
      found = true;
    }
  }
  if (!found) return false;
  best.front_facing = dot(ray.direction, mesh.face_normals[best.triangle_id]) < 0;
  hit = best;
  return true;
}

DistanceGradient distance_gradient(const TriangleMesh& mesh, const SurfacePoint& sp, Vec3 query) {
  (void)mesh;
  if (!(sp.distance > 0))
    fail(ErrorKind::numeric, "distance_gradient at zero distance is undefined");
  DistanceGradient g;
  g.wrt_query = (query - sp.position) / sp.distance;
  for (int k = 0; k < 3; ++k) g.wrt_vertex[k] = -sp.barycentric[k] * g.wrt_query;
  return g;
}

void write_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::missing_file, "cannot open for write: " + path);
  char line[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(line, sizeof line, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    f << line;
  }
  for (const auto& t : mesh.triangles) {
    std::snprintf(line, sizeof line, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    f << line;
  }
  if (!f) fail(ErrorKind::validation, "short write: " + path);
}

}  // namespace meshfield
