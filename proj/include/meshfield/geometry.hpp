#pragma once

#include <array>
#include <string>
#include <vector>

#include "meshfield/vec3.hpp"

namespace meshfield {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int32_t, 3>> triangles;  // CCW winding, outward normals
  std::vector<Vec3> face_normals;                 // unit; kept in sync by update_normals

  void update_normals();
};

struct Aabb {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};

  void expand(Vec3 p) { lo = min(lo, p); hi = max(hi, p); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
};

Aabb mesh_bounds(const TriangleMesh& mesh);

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 0;
  double t_far = 1e300;
};

// Closest point on the mesh surface. barycentric sums to 1, entries >= 0;
// position == barycentric combination of the owning triangle's vertices.
struct SurfacePoint {
  int32_t triangle_id = -1;
  double barycentric[3] = {0, 0, 0};
  Vec3 position;
  double distance = 0;
};

struct TrianglePoint {
  Vec3 point;
  double b0, b1, b2;
};

// Exact closest point on a single triangle: vertex / edge / interior regions.
TrianglePoint closest_point_triangle(Vec3 p, Vec3 a, Vec3 b, Vec3 c);

SurfacePoint make_surface_point(const TriangleMesh& mesh, int32_t tri, const TrianglePoint& tp,
                                Vec3 query);

// Exhaustive scan, ascending triangle id, ties to the lowest id. Reference
// oracle for the BVH path and the fallback for tiny meshes.
SurfacePoint closest_point_brute(const TriangleMesh& mesh, Vec3 query);

struct RayHit {
  double t = 0;
  int32_t triangle_id = -1;
  bool front_facing = false;  // direction . face_normal < 0
};

// Lexicographic (t, triangle_id) ordering; inclusive edge/vertex hits.
bool ray_triangle(const Ray& ray, Vec3 a, Vec3 b, Vec3 c, double& t, double& u, double& v);
bool first_hit_brute(const TriangleMesh& mesh, const Ray& ray, RayHit& hit);

// Gradient of the unsigned distance d(x, mesh) at a point with d > 0.
// Vertex derivatives freeze the barycentric weights (exact a.e. by
// stationarity of the closest point; subgradient on region boundaries).
struct DistanceGradient {
  Vec3 wrt_query;
  Vec3 wrt_vertex[3];
};

DistanceGradient distance_gradient(const TriangleMesh& mesh, const SurfacePoint& sp, Vec3 query);

// ASCII polygon export: "v x y z" lines then 1-based CCW "f i j k" lines.
void write_obj(const TriangleMesh& mesh, const std::string& path);

}  // namespace meshfield
