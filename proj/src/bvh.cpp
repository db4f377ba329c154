#include "meshfield/bvh.hpp"

#include <algorithm>
#include <cmath>

#include "meshfield/errors.hpp"

namespace meshfield {

namespace {

Aabb triangle_bounds(const TriangleMesh& mesh, int32_t id) {
  Aabb box;
  for (int k = 0; k < 3; ++k) box.expand(mesh.vertices[mesh.triangles[id][k]]);
  return box;
}

int32_t build_node(Bvh& bvh, const TriangleMesh& mesh, const std::vector<Vec3>& centroids,
                   int32_t first, int32_t count, int leaf_size) {
  Aabb box;
  for (int32_t i = first; i < first + count; ++i) {
    Aabb tb = triangle_bounds(mesh, bvh.order[i]);
    box.expand(tb.lo);
    box.expand(tb.hi);
  }
  int32_t index = int32_t(bvh.nodes.size());
  bvh.nodes.push_back({box.lo, box.hi, -1, -1, first, 0});
  if (count <= leaf_size) {
    bvh.nodes[index].count = count;
    return index;
  }
  Vec3 ext = box.extent();
  int axis = ext.x >= ext.y && ext.x >= ext.z ? 0 : (ext.y >= ext.z ? 1 : 2);
  int32_t mid = first + count / 2;
  std::nth_element(bvh.order.begin() + first, bvh.order.begin() + mid,
                   bvh.order.begin() + first + count, [&](int32_t a, int32_t b) {
                     double ca = centroids[a][axis], cb = centroids[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  int32_t left = build_node(bvh, mesh, centroids, first, mid - first, leaf_size);
  int32_t right = build_node(bvh, mesh, centroids, mid, first + count - mid, leaf_size);
  bvh.nodes[index].left = left;
  bvh.nodes[index].right = right;
  return index;
}

double box_distance_squared(Vec3 lo, Vec3 hi, Vec3 p) {
  double d2 = 0;
  for (int a = 0; a < 3; ++a) {
    double v = p[a] < lo[a] ? lo[a] - p[a] : (p[a] > hi[a] ? p[a] - hi[a] : 0.0);
    d2 += v * v;
  }
  return d2;
}

// Slab test against [ray.t_near, ray.t_far]; inclusive, robust to axis-aligned rays.
bool box_ray_span(Vec3 lo, Vec3 hi, const Ray& ray, double& enter, double& exit) {
  enter = ray.t_near;
  exit = ray.t_far;
  for (int a = 0; a < 3; ++a) {
    double o = ray.origin[a], d = ray.direction[a];
    if (d == 0) {
      if (o < lo[a] || o > hi[a]) return false;
      continue;
    }
    double inv = 1.0 / d;
    double t0 = (lo[a] - o) * inv, t1 = (hi[a] - o) * inv;
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > enter) enter = t0;
    if (t1 < exit) exit = t1;
    if (enter > exit) return false;
  }
  return true;
}

}  // namespace

Bvh build_bvh(const TriangleMesh& mesh, int leaf_size) {
  if (mesh.triangles.empty()) fail(ErrorKind::validation, "build_bvh on empty mesh");
  Bvh bvh;
  bvh.order.resize(mesh.triangles.size());
  for (size_t i = 0; i < bvh.order.size(); ++i) bvh.order[i] = int32_t(i);
  std::vector<Vec3> centroids(mesh.triangles.size());
  for (size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    centroids[i] =
        (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  bvh.nodes.reserve(2 * mesh.triangles.size());
  build_node(bvh, mesh, centroids, 0, int32_t(mesh.triangles.size()), std::max(1, leaf_size));
  return bvh;
}

int bvh_depth(const Bvh& bvh) {
  struct Item {
    int32_t node;
    int depth;
  };
  std::vector<Item> stack{{0, 1}};
  int max_depth = 0;
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    max_depth = std::max(max_depth, it.depth);
    const auto& n = bvh.nodes[it.node];
    if (n.count == 0) {
      stack.push_back({n.left, it.depth + 1});
      stack.push_back({n.right, it.depth + 1});
    }
  }
  return max_depth;
}

SurfacePoint closest_point(const Bvh& bvh, const TriangleMesh& mesh, Vec3 query) {
  SurfacePoint best;
  best.distance = 1e300;
  double best_d2 = 1e300;
  int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Bvh::Node& node = bvh.nodes[stack[--top]];
    // Conservative prune: a few ulps of slack keep equal-distance candidates
    // visitable (the id tie-break needs them), whatever the rounding of the
    // box test vs. the sqrt'd triangle distance.
    if (box_distance_squared(node.lo, node.hi, query) > best_d2 * 1.0000000000001) continue;
    if (node.count > 0) {
      for (int32_t i = node.first; i < node.first + node.count; ++i) {
        int32_t id = bvh.order[i];
        const auto& t = mesh.triangles[id];
        TrianglePoint tp = closest_point_triangle(query, mesh.vertices[t[0]], mesh.vertices[t[1]],
                                                  mesh.vertices[t[2]]);
        double d = length(query - tp.point);
        if (d < best.distance || (d == best.distance && id < best.triangle_id)) {
          best = make_surface_point(mesh, id, tp, query);
          best_d2 = d * d;
        }
      }
    } else {
      double dl = box_distance_squared(bvh.nodes[node.left].lo, bvh.nodes[node.left].hi, query);
      double dr = box_distance_squared(bvh.nodes[node.right].lo, bvh.nodes[node.right].hi, query);
      // Push the farther child first so the nearer is processed next.
      if (dl <= dr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
  }
  return best;
}

std::optional<RayHit> first_hit(const Bvh& bvh, const TriangleMesh& mesh, const Ray& ray) {
  RayHit best;
  best.t = 1e300;
  bool found = false;
  int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Bvh::Node& node = bvh.nodes[stack[--top]];
    double enter, exit;
    if (!box_ray_span(node.lo, node.hi, ray, enter, exit)) continue;
    // Slack mirrors closest_point: equal-t candidates stay visitable for the
    // id tie-break despite slab-test rounding.
    if (found && enter > best.t + 1e-12 * (1.0 + std::abs(best.t))) continue;
    if (node.count > 0) {
      for (int32_t i = node.first; i < node.first + node.count; ++i) {
        int32_t id = bvh.order[i];
        const auto& tri = mesh.triangles[id];
        double t, u, v;
        if (!ray_triangle(ray, mesh.vertices[tri[0]], mesh.vertices[tri[1]],
                          mesh.vertices[tri[2]], t, u, v))
          continue;
        if (t < best.t || (t == best.t && id < best.triangle_id)) {
          best.t = t;
          best.triangle_id = id;
          found = true;
        }
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  if (!found) return std::nullopt;
  best.front_facing = dot(ray.direction, mesh.face_normals[best.triangle_id]) < 0;
  return best;
}

std::vector<std::pair<double, double>> shell_intervals(const Bvh& bvh, const Ray& ray, double eps) {
  std::vector<std::pair<double, double>> spans;
  int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  Vec3 inflate{eps, eps, eps};
  while (top > 0) {
    const Bvh::Node& node = bvh.nodes[stack[--top]];
    double enter, exit;
    if (!box_ray_span(node.lo - inflate, node.hi + inflate, ray, enter, exit)) continue;
    if (node.count > 0) {
      spans.emplace_back(enter, exit);
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  std::sort(spans.begin(), spans.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& s : spans) {
    if (!merged.empty() && s.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, s.second);
    else
      merged.push_back(s);
  }
  return merged;
}

}  // namespace meshfield
