#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "meshfield/geometry.hpp"

namespace meshfield {

// Binary AABB tree, longest-axis median split over triangle centroids.
// Query results are identical to the exhaustive scans in geometry.hpp: both
// sides order candidates by (distance, triangle_id) / (t, triangle_id).
struct Bvh {
  struct Node {
    Vec3 lo, hi;
    int32_t left = -1, right = -1;  // internal when count == 0
    int32_t first = 0, count = 0;   // leaf range into 'order'
  };
  std::vector<Node> nodes;     // nodes[0] is the root
  std::vector<int32_t> order;  // triangle ids
};

Bvh build_bvh(const TriangleMesh& mesh, int leaf_size = 4);
int bvh_depth(const Bvh& bvh);

SurfacePoint closest_point(const Bvh& bvh, const TriangleMesh& mesh, Vec3 query);
std::optional<RayHit> first_hit(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray);

// Merged, ascending t spans where the ray passes through leaf boxes inflated
// by eps. Any point outside every span is farther than eps from the surface,
// so sample evaluation may be skipped there without changing the composite.
std::vector<std::pair<double, double>> shell_intervals(const Bvh& bvh, const Ray& ray, double eps);

}  // namespace meshfield
