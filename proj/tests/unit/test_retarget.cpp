#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "meshfield/bvh.hpp"
#include "meshfield/errors.hpp"
#include "meshfield/field.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/metrics.hpp"
#include "meshfield/renderer.hpp"
#include "meshfield/retarget.hpp"
#include "meshfield/rng.hpp"
#include "meshfield/synthetic.hpp"

using namespace meshfield;

namespace {

Vec3 unit_normal(const Vec3 t[3]) { return normalize(cross(t[1] - t[0], t[2] - t[0])); }

// Random triangle with comfortably non-degenerate area.
void random_triangle(Rng& rng, Vec3 out[3]) {
  do {
    for (int i = 0; i < 3; ++i)
      out[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  } while (length(cross(out[1] - out[0], out[2] - out[0])) < 0.1);
}

// Orientation-preserving affine: rotation * (I + shear) * positive scale.
Affine random_affine(Rng& rng) {
  const Vec3 axis = normalize({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  Mat3 lin = axis_angle_to_matrix(rng.uniform(0, 3.0) * axis);
  Mat3 shear = Mat3::identity();
  shear(0, 1) = rng.uniform(-0.4, 0.4);
  shear(1, 2) = rng.uniform(-0.4, 0.4);
  shear(2, 0) = rng.uniform(-0.4, 0.4);
  Mat3 scale = Mat3::identity();
  for (int i = 0; i < 3; ++i) scale(i, i) = rng.uniform(0.6, 1.6);
  Affine t;
  t.linear = lin * shear * scale;
  t.offset = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
  return t;
}

RadianceField small_field(uint64_t seed) {
  EncodingConfig enc;
  enc.num_frequencies = 2;
  RadianceField f = make_radiance_field(enc, 2, 16, 1, seed);
  f.epsilon = 0.05;
  return f;
}

}  // namespace

TEST_CASE("triangle affine recovery on 100 random transforms") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    Vec3 p[3];
    random_triangle(rng, p);
    const Affine t = random_affine(rng);
    Vec3 q[3];
    for (int i = 0; i < 3; ++i) q[i] = t.point(p[i]);

    const TriangleAffine r = estimate_triangle_affine(p, q);
    CHECK(!r.degenerate);
    // All four correspondence points: the vertices and the unit-normal tip.
    for (int i = 0; i < 3; ++i) CHECK(max_abs(r.map.point(p[i]) - q[i]) < 1e-9);
    const Vec3 tip_p = p[0] + unit_normal(p);
    const Vec3 tip_q = q[0] + unit_normal(q);
    CHECK(max_abs(r.map.point(tip_p) - tip_q) < 1e-9);
  }
}

TEST_CASE("identity and rigid transforms recover exactly") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    Vec3 p[3];
    random_triangle(rng, p);

    const TriangleAffine id = estimate_triangle_affine(p, p);
    CHECK(!id.degenerate);
    Mat3 diff = id.map.linear;
    for (int i = 0; i < 3; ++i) diff(i, i) -= 1.0;
    double err = max_abs(id.map.offset);
    for (int i = 0; i < 9; ++i) err = std::max(err, std::abs(diff.m[i]));
    CHECK(err < 1e-6);

    // Rigid motion: the recovered linear part is exactly the rotation.
    const Vec3 axis = normalize({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const Mat3 rot = axis_angle_to_matrix(rng.uniform(0.1, 3.0) * axis);
    const Vec3 shift{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    Vec3 q[3];
    for (int i = 0; i < 3; ++i) q[i] = rot * p[i] + shift;
    const TriangleAffine r = estimate_triangle_affine(p, q);
    double rot_err = 0;
    for (int i = 0; i < 9; ++i) rot_err = std::max(rot_err, std::abs(r.map.linear.m[i] - rot.m[i]));
    CHECK(rot_err < 1e-6);
    CHECK(max_abs(r.map.offset - shift) < 1e-6);
  }
}

TEST_CASE("degenerate triangles are flagged and map as identity") {
  Vec3 line[3] = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
  Vec3 ok[3] = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  for (const TriangleAffine r :
       {estimate_triangle_affine(line, ok), estimate_triangle_affine(ok, line)}) {
    CHECK(r.degenerate);
    const Vec3 x{0.3, -0.7, 1.1};
    CHECK(r.map.point(x) == x);
  }
}

TEST_CASE("affine field transports surface points barycentrically") {
  const HeadModelAssets assets = make_toy_head(2, 19);
  FaceParams a = FaceParams::zero(assets);
  FaceParams b = FaceParams::zero(assets);
  a.psi = {0.25, -0.1};
  b.psi = {-0.3, 0.2};
  b.phi[3] = 0.2;
  const TriangleMesh source = deform(assets, a);
  const TriangleMesh target = deform(assets, b);
  const TriangleAffineMap maps = build_affine_field(source, target);
  REQUIRE(maps.maps.size() == source.triangles.size());
  const Bvh bvh = build_bvh(source);

  Rng rng(47);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t tri = rng.below(source.triangles.size());
    // Interior barycentrics keep the nearest-triangle assignment unambiguous.
    double u = rng.uniform(0.1, 0.8), v = rng.uniform(0.1, 0.8);
    if (u + v > 0.9) {
      u *= 0.5;
      v *= 0.5;
    }
    const double w = 1.0 - u - v;
    const auto& tv = source.triangles[tri];
    const Vec3 x = u * source.vertices[size_t(tv[0])] + v * source.vertices[size_t(tv[1])] +
                   w * source.vertices[size_t(tv[2])];
    const auto& qv = target.triangles[tri];
    const Vec3 want = u * target.vertices[size_t(qv[0])] + v * target.vertices[size_t(qv[1])] +
                      w * target.vertices[size_t(qv[2])];
    CHECK(max_abs(retarget_point(x, bvh, source, maps) - want) < 1e-6);
  }
}

TEST_CASE("affine field rejects meshes with different topology") {
  const HeadModelAssets assets = make_toy_head(1, 19);
  const TriangleMesh source = deform(assets, FaceParams::zero(assets));
  TriangleMesh swapped = source;
  std::swap(swapped.triangles[0][0], swapped.triangles[0][1]);
  CHECK_THROWS_AS(build_affine_field(source, swapped), Error);
  TriangleMesh shrunk = source;
  shrunk.vertices.pop_back();
  try {
    build_affine_field(source, shrunk);
    FAIL("expected mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::mismatch);
  }
}

TEST_CASE("retarget density mode parsing") {
  CHECK(parse_retarget_density("analytic") == RetargetDensity::analytic);
  CHECK(parse_retarget_density("learned") == RetargetDensity::learned);
  try {
    parse_retarget_density("other");
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
  }
}

TEST_CASE("identity retargeting matches the direct render in both modes") {
  const HeadModelAssets assets = make_toy_head(2, 23);
  RadianceField field = small_field(29);
  FaceParams face = FaceParams::zero(assets);
  face.psi = {0.3, -0.2};
  const TriangleMesh mesh = deform(assets, face);
  const Bvh bvh = build_bvh(mesh);
  const SceneBounds bounds = scene_bounds(assets);
  const Camera cam = camera_from_fov(32, 32, 0.85, look_at_origin({0.5, 0.6, 2.4}));
  RenderSettings settings;
  settings.samples_per_ray = 96;
  settings.stratified = false;

  field.phase = DensityPhase::distance;
  const ImageF direct1 = render_field_image(field, bvh, mesh, cam, bounds, settings);
  const ImageF re1 = render_retargeted(field, assets, face, face, cam, settings,
                                       RetargetDensity::analytic, false);
  double worst = 0;
  for (size_t i = 0; i < direct1.data.size(); ++i)
    worst = std::max(worst, std::abs(direct1.data[i] - re1.data[i]));
  CHECK(worst < 1e-5);

  field.phase = DensityPhase::learned;
  const ImageF direct2 = render_field_image(field, bvh, mesh, cam, bounds, settings);
  const ImageF re2 = render_retargeted(field, assets, face, face, cam, settings,
                                       RetargetDensity::learned, false);
  worst = 0;
  for (size_t i = 0; i < direct2.data.size(); ++i)
    worst = std::max(worst, std::abs(direct2.data[i] - re2.data[i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("root rotation is equivariant with a counter-rotated camera") {
  const HeadModelAssets assets = make_toy_head(2, 23);
  RadianceField field = small_field(31);
  FaceParams trained = FaceParams::zero(assets);
  trained.psi = {0.2, 0.1};
  FaceParams rotated = trained;
  rotated.phi[1] = 0.35;  // root joint sits at the origin: a pure rotation
  const Mat3 rot = axis_angle_to_matrix({0, 0.35, 0});

  const TriangleMesh mesh = deform(assets, trained);
  const Bvh bvh = build_bvh(mesh);
  const SceneBounds bounds = scene_bounds(assets);
  RenderSettings settings;
  settings.samples_per_ray = 96;
  settings.stratified = false;

  const Affine base = look_at_origin({0.4, 0.5, 2.5});
  Affine moved;
  moved.linear = rot * base.linear;
  moved.offset = rot * base.offset;
  const Camera cam_direct = camera_from_fov(40, 40, 0.85, base);
  const Camera cam_moved = camera_from_fov(40, 40, 0.85, moved);

  field.phase = DensityPhase::distance;
  const ImageF direct = render_field_image(field, bvh, mesh, cam_direct, bounds, settings);
  const ImageF re = render_retargeted(field, assets, trained, rotated, cam_moved, settings,
                                      RetargetDensity::analytic, false);
  CHECK(psnr(direct, re, {0, 0, 0}) >= 40.0);
}

TEST_CASE("jaw opening changes the render locally") {
  const HeadModelAssets assets = make_toy_head(2, 23);
  RadianceField field = small_field(37);
  field.phase = DensityPhase::distance;
  const FaceParams trained = FaceParams::zero(assets);
  FaceParams jaw = trained;
  jaw.phi[3] = 0.3;

  const Camera cam = camera_from_fov(40, 40, 0.85, look_at_origin({0, 0.1, 2.6}));
  RenderSettings settings;
  settings.samples_per_ray = 96;
  settings.stratified = false;

  const ImageF still = render_retargeted(field, assets, trained, trained, cam, settings,
                                         RetargetDensity::analytic, false);
  const ImageF open = render_retargeted(field, assets, trained, jaw, cam, settings,
                                        RetargetDensity::analytic, false);
  int changed = 0, total = 0;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      ++total;
      double d = 0;
      for (int c = 0; c < 4; ++c)
        d = std::max(d, std::abs(still.pixel(x, y)[c] - open.pixel(x, y)[c]));
      if (d > 1e-3) ++changed;
    }
  CHECK(changed > 0);                // the jaw visibly moved
  CHECK(changed < (total * 2) / 5);  // but most of the head did not
}

TEST_CASE("mouth filter keeps front-facing first hits only") {
  const HeadModelAssets assets = make_toy_head(1, 23);
  const TriangleMesh mesh = deform(assets, FaceParams::zero(assets));
  const Bvh bvh = build_bvh(mesh);

  Ray outside;  // hits the front of the head
  outside.origin = {0, 0, 3};
  outside.direction = {0, 0, -1};
  CHECK(mouth_filter_keeps(bvh, mesh, outside));

  Ray inside;  // first hit is the surface seen from behind
  inside.origin = {0, 0, 0};
  inside.direction = {1, 0, 0};
  CHECK(!mouth_filter_keeps(bvh, mesh, inside));

  Ray miss;
  miss.origin = {0, 3, 3};
  miss.direction = {0, 1, 0};
  CHECK(!mouth_filter_keeps(bvh, mesh, miss));

  const std::vector<Ray> kept = filter_open_mouth_rays({outside, inside, miss}, bvh, mesh);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].origin == outside.origin);
  CHECK(kept[0].direction == outside.direction);
}

TEST_CASE("mouth filter zeroes dropped pixels and leaves the rest untouched") {
  const HeadModelAssets assets = make_toy_head(2, 23);
  RadianceField field = small_field(53);
  field.phase = DensityPhase::distance;
  const FaceParams face = FaceParams::zero(assets);
  const Camera cam = camera_from_fov(40, 40, 0.9, look_at_origin({0, 0.2, 2.4}));
  RenderSettings settings;
  settings.samples_per_ray = 64;
  settings.stratified = false;

  const ImageF off = render_retargeted(field, assets, face, face, cam, settings,
                                       RetargetDensity::analytic, false);
  const ImageF on = render_retargeted(field, assets, face, face, cam, settings,
                                      RetargetDensity::analytic, true);

  int off_visible = 0, on_visible = 0, zeroed = 0;
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) {
      const double* a = off.pixel(x, y);
      const double* b = on.pixel(x, y);
      if (a[3] > 0) ++off_visible;
      if (b[3] > 0) ++on_visible;
      const bool equal = a[0] == b[0] && a[1] == b[1] && a[2] == b[2] && a[3] == b[3];
      const bool blank = b[0] == 0 && b[1] == 0 && b[2] == 0 && b[3] == 0;
      CHECK((equal || blank));
      if (!equal && a[3] > 0 && blank) ++zeroed;
    }
  CHECK(on_visible < off_visible);  // silhouette grazers that miss the mesh drop out
  CHECK(zeroed > 0);
}
