#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "meshfield/bvh.hpp"
#include "meshfield/field.hpp"
#include "meshfield/geometry.hpp"
#include "meshfield/head_model.hpp"
#include "meshfield/image.hpp"
#include "meshfield/parallel.hpp"
#include "meshfield/rng.hpp"
#include "meshfield/vec3.hpp"

namespace meshfield {

// Pinhole camera, looks down -z in camera space, x right, y up, pixel (0,0)
// at the top-left, rays through pixel centers.
struct Camera {
  int width = 0;
  int height = 0;
  double focal = 0;  // pixels
  Affine c2w;
};

// Max abs deviation of R^T R from identity.
double rotation_error(const Mat3& r);
// Validation error when the rotation block is off by more than tol or the
// intrinsics are degenerate.
void validate_camera(const Camera& cam, double tol);

Camera camera_from_fov(int width, int height, double fov_x_radians, const Affine& c2w);

Ray pixel_ray(const Camera& cam, int px, int py);
std::vector<Ray> generate_rays(const Camera& cam);

struct RenderSettings {
  int samples_per_ray = 192;
  bool stratified = true;
  Vec3 background{0, 0, 0};
  uint64_t seed = 1;
  bool shell_skip = true;
};

// Parameter-independent ray bounds: a sphere around the rest-pose template
// with enough margin for every deformation the toy bases can produce plus the
// widest density shell. Sample positions therefore never move when face
// params change, which keeps the density path cleanly differentiable.
struct SceneBounds {
  Vec3 center;
  double radius = 0;
};

SceneBounds scene_bounds(const HeadModelAssets& assets);
bool clip_to_sphere(const Ray& ray, const SceneBounds& bounds, double& t0, double& t1);

// One uniform draw per evenly spaced bin of [t0, t1]; bin midpoints when
// stratified is off. ts ascending, size n.
void sample_stratified(double t0, double t1, int n, bool stratified, Rng& rng,
                       std::vector<double>& ts);

struct CompositeResult {
  Vec3 rgb{0, 0, 0};  // sum of per-sample weights times colors
  double alpha = 0;   // 1 - final transmittance
};

CompositeResult composite(const double* sigma, const Vec3* color, const double* delta, int n);

struct CompositeScratch {
  std::vector<double> trans;  // transmittance before each sample
  std::vector<double> att;    // exp(-sigma_i * delta_i)
};

// Gradients of <drgb, rgb> + dalpha * alpha w.r.t. per-sample sigma and color.
void composite_backward(const double* sigma, const Vec3* color, const double* delta, int n,
                        const Vec3& drgb, double dalpha, double* dsigma, Vec3* dcolor,
                        CompositeScratch& scratch);

struct ShadedSample {
  double sigma = 0;
  Vec3 color{0, 0, 0};
};

// Density from the analytic shell, color from the MLP. Skips the color net
// wherever the shell weight is exactly zero.
struct AnalyticShellShader {
  const RadianceField* field;
  const Bvh* bvh;
  const TriangleMesh* mesh;
  mutable FieldWorkspace ws;

  ShadedSample shade(const Vec3& x) const {
    const SurfacePoint sp = closest_point(*bvh, *mesh, x);
    const double s = shell_density(sp.distance, field->epsilon);
    if (s <= 0.0) return {};
    return {s, field_color(*field, x, ws)};
  }
};

// Learned in-shell density (softplus of the density net), MLP color.
struct LearnedShellShader {
  const RadianceField* field;
  const Bvh* bvh;
  const TriangleMesh* mesh;
  mutable FieldWorkspace ws;

  ShadedSample shade(const Vec3& x) const {
    const SurfacePoint sp = closest_point(*bvh, *mesh, x);
    if (sp.distance > field->epsilon) return {};
    const double s = softplus(field_density_raw(*field, x, ws));
    return {s, field_color(*field, x, ws)};
  }
};

// Evaluation skipping outside the eps shell. bvh == nullptr disables it.
struct ShellClip {
  const Bvh* bvh = nullptr;
  double eps = 0;
};

struct RayScratch {
  std::vector<double> ts;
  std::vector<double> sigma;
  std::vector<double> delta;
  std::vector<Vec3> colors;
  std::vector<std::pair<double, double>> spans;
};

// Quadrature along one clipped ray segment. Samples outside every shell span
// keep sigma = 0 and color = 0 without being shaded; because both density
// phases are exactly zero there anyway, skipping is bitwise-neutral.
template <class Shader>
CompositeResult render_ray_segment(const Shader& shader, const Ray& ray, double t0, double t1,
                                   const RenderSettings& settings, Rng& rng,
                                   const ShellClip& clip, RayScratch& scratch) {
  const int n = settings.samples_per_ray;
  sample_stratified(t0, t1, n, settings.stratified, rng, scratch.ts);

  const bool skipping = settings.shell_skip && clip.bvh != nullptr;
  if (skipping) {
    Ray span_ray = ray;
    span_ray.t_near = t0;
    span_ray.t_far = t1;
    scratch.spans = shell_intervals(*clip.bvh, span_ray, clip.eps);
  }

  scratch.sigma.resize(size_t(n));
  scratch.colors.resize(size_t(n));
  scratch.delta.resize(size_t(n));
  size_t span_i = 0;
  for (int i = 0; i < n; ++i) {
    const double t = scratch.ts[size_t(i)];
    bool evaluate = true;
    if (skipping) {
      while (span_i < scratch.spans.size() && scratch.spans[span_i].second < t) ++span_i;
      evaluate = span_i < scratch.spans.size() && scratch.spans[span_i].first <= t;
    }
    if (evaluate) {
      const ShadedSample s = shader.shade(ray.origin + t * ray.direction);
      scratch.sigma[size_t(i)] = s.sigma;
      scratch.colors[size_t(i)] = s.color;
    } else {
      scratch.sigma[size_t(i)] = 0.0;
      scratch.colors[size_t(i)] = {0, 0, 0};
    }
    scratch.delta[size_t(i)] =
        (i + 1 < n ? scratch.ts[size_t(i + 1)] : t1) - t;
  }
  return composite(scratch.sigma.data(), scratch.colors.data(), scratch.delta.data(), n);
}

// Straight-alpha pixel from a composite: color channels divided out by alpha.
// The convex bound rgb <= alpha keeps the quotient inside [0, 1].
inline void store_pixel(double* px, const CompositeResult& r) {
  if (r.alpha > 0.0) {
    px[0] = r.rgb.x / r.alpha;
    px[1] = r.rgb.y / r.alpha;
    px[2] = r.rgb.z / r.alpha;
  } else {
    px[0] = px[1] = px[2] = 0.0;
  }
  px[3] = r.alpha;
}

// Per-pixel rng is seeded from (seed, pixel index), so scheduling order and
// worker count never change the image.
template <class Shader>
ImageF render_image(const Shader& shader, const Camera& cam, const SceneBounds& bounds,
                    const RenderSettings& settings, const ShellClip& clip);

// Shader picked by the field's density phase.
inline ImageF render_field_image(const RadianceField& field, const Bvh& bvh,
                                 const TriangleMesh& mesh, const Camera& cam,
                                 const SceneBounds& bounds, const RenderSettings& settings) {
  const ShellClip clip{&bvh, field.epsilon};
  if (field.phase == DensityPhase::distance) {
    AnalyticShellShader shader{&field, &bvh, &mesh, {}};
    return render_image(shader, cam, bounds, settings, clip);
  }
  LearnedShellShader shader{&field, &bvh, &mesh, {}};
  return render_image(shader, cam, bounds, settings, clip);
}

template <class Shader>
ImageF render_image(const Shader& shader, const Camera& cam, const SceneBounds& bounds,
                    const RenderSettings& settings, const ShellClip& clip) {
  ImageF img = ImageF::make(cam.width, cam.height);
  parallel_for(cam.height, [&](int64_t py) {
    Shader local = shader;
    RayScratch scratch;
    for (int px = 0; px < cam.width; ++px) {
      const Ray ray = pixel_ray(cam, px, int(py));
      Rng rng(hash_mix(settings.seed, uint64_t(py) * uint64_t(cam.width) + uint64_t(px)));
      CompositeResult res;
      double t0, t1;
      if (clip_to_sphere(ray, bounds, t0, t1))
        res = render_ray_segment(local, ray, t0, t1, settings, rng, clip, scratch);
      store_pixel(img.pixel(px, int(py)), res);
    }
  });
  return img;
}

}  // namespace meshfield
