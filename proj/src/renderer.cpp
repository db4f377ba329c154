#include "meshfield/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "meshfield/errors.hpp"

namespace meshfield {

double rotation_error(const Mat3& r) {
  const Mat3 gram = transpose(r) * r;
  double err = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      err = std::max(err, std::abs(gram(i, j) - want));
    }
  return err;
}

void validate_camera(const Camera& cam, double tol) {
  if (cam.width < 1 || cam.height < 1)
    fail(ErrorKind::validation, "camera image size must be positive");
  if (!(cam.focal > 0.0)) fail(ErrorKind::validation, "camera focal length must be positive");
  const double err = rotation_error(cam.c2w.linear);
  if (!(err <= tol))
    fail(ErrorKind::validation,
         "camera-to-world rotation block is not orthonormal (deviation " + std::to_string(err) +
             " exceeds " + std::to_string(tol) + ")");
}

Camera camera_from_fov(int width, int height, double fov_x_radians, const Affine& c2w) {
  if (!(fov_x_radians > 0.0) || !(fov_x_radians < std::numbers::pi))
    fail(ErrorKind::validation, "horizontal field of view must lie in (0, pi)");
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.focal = 0.5 * double(width) / std::tan(0.5 * fov_x_radians);
  cam.c2w = c2w;
  validate_camera(cam, 1e-4);
  return cam;
}

Ray pixel_ray(const Camera& cam, int px, int py) {
  const double cx = (double(px) + 0.5) - 0.5 * double(cam.width);
  const double cy = (double(py) + 0.5) - 0.5 * double(cam.height);
  const Vec3 dir_cam = normalize({cx / cam.focal, -cy / cam.focal, -1.0});
  Ray ray;
  ray.origin = cam.c2w.offset;
  ray.direction = cam.c2w.linear * dir_cam;
  return ray;
}

std::vector<Ray> generate_rays(const Camera& cam) {
  std::vector<Ray> rays;
  rays.reserve(size_t(cam.width) * size_t(cam.height));
  for (int py = 0; py < cam.height; ++py)
    for (int px = 0; px < cam.width; ++px) rays.push_back(pixel_ray(cam, px, py));
  return rays;
}

SceneBounds scene_bounds(const HeadModelAssets& assets) {
  if (assets.template_vertices.empty())
    fail(ErrorKind::validation, "cannot bound an asset with no vertices");
  Aabb box;
  const int32_t n = assets.n_vertices();
  for (int32_t i = 0; i < n; ++i)
    box.expand({double(assets.template_vertices[size_t(3 * i)]),
                double(assets.template_vertices[size_t(3 * i + 1)]),
                double(assets.template_vertices[size_t(3 * i + 2)])});
  SceneBounds b;
  b.center = box.center();
  double r2 = 0.0;
  for (int32_t i = 0; i < n; ++i) {
    const Vec3 v{double(assets.template_vertices[size_t(3 * i)]),
                 double(assets.template_vertices[size_t(3 * i + 1)]),
                 double(assets.template_vertices[size_t(3 * i + 2)])};
    r2 = std::max(r2, length_squared(v - b.center));
  }
  // Margin covers the blendshape displacements and the widest shell.
  b.radius = std::sqrt(r2) + 0.75;
  return b;
}

bool clip_to_sphere(const Ray& ray, const SceneBounds& bounds, double& t0, double& t1) {
  const Vec3 oc = ray.origin - bounds.center;
  // Unit direction, so the quadratic is t^2 + 2 b t + c.
  const double b = dot(oc, ray.direction);
  const double c = length_squared(oc) - bounds.radius * bounds.radius;
  const double disc = b * b - c;
  if (disc <= 0.0) return false;
  const double root = std::sqrt(disc);
  t0 = std::max(ray.t_near, -b - root);
  t1 = std::min(ray.t_far, -b + root);
  return t0 < t1;
}

void sample_stratified(double t0, double t1, int n, bool stratified, Rng& rng,
                       std::vector<double>& ts) {
  if (n < 1) fail(ErrorKind::validation, "sample count must be >= 1");
  ts.resize(size_t(n));
  const double step = (t1 - t0) / double(n);
  for (int i = 0; i < n; ++i) {
    const double u = stratified ? rng.uniform() : 0.5;
    ts[size_t(i)] = t0 + (double(i) + u) * step;
  }
}

CompositeResult composite(const double* sigma, const Vec3* color, const double* delta, int n) {
  CompositeResult out;
  double trans = 1.0;
  for (int i = 0; i < n; ++i) {
    const double att = std::exp(-sigma[i] * delta[i]);
    const double weight = trans * (1.0 - att);
    out.rgb = out.rgb + weight * color[i];
    trans *= att;
  }
  out.alpha = 1.0 - trans;
  return out;
}

void composite_backward(const double* sigma, const Vec3* color, const double* delta, int n,
                        const Vec3& drgb, double dalpha, double* dsigma, Vec3* dcolor,
                        CompositeScratch& scratch) {
  scratch.trans.resize(size_t(n));
  scratch.att.resize(size_t(n));
  double trans = 1.0;
  for (int i = 0; i < n; ++i) {
    scratch.trans[size_t(i)] = trans;
    scratch.att[size_t(i)] = std::exp(-sigma[i] * delta[i]);
    trans *= scratch.att[size_t(i)];
  }
  const double trans_end = trans;

  // suffix = sum_{j > i} weight_j * color_j; sigma_i attenuates every later
  // sample and the final transmittance.
  Vec3 suffix{0, 0, 0};
  for (int i = n - 1; i >= 0; --i) {
    const double t_i = scratch.trans[size_t(i)];
    const double att = scratch.att[size_t(i)];
    const double weight = t_i * (1.0 - att);
    dcolor[i] = weight * drgb;
    dsigma[i] = delta[i] * (dot(drgb, t_i * att * color[i] - suffix) + dalpha * trans_end);
    suffix = suffix + weight * color[i];
  }
}

}  // namespace meshfield
