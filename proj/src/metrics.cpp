#include "meshfield/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "meshfield/errors.hpp"

namespace meshfield {

namespace {

constexpr int k_window = 11;
constexpr double k_sigma = 1.5;
constexpr double k_c1 = 0.01 * 0.01;
constexpr double k_c2 = 0.03 * 0.03;

void check_same_size(const ImageF& a, const ImageF& b) {
  if (a.width != b.width || a.height != b.height)
    fail(ErrorKind::mismatch, "image sizes differ (" + std::to_string(a.width) + "x" +
                                  std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                  "x" + std::to_string(b.height) + ")");
}

// RGB over the background, channel-planar.
std::vector<double> flatten_over(const ImageF& img, const Vec3& bg) {
  std::vector<double> out(size_t(img.width) * img.height * 3);
  const size_t plane = size_t(img.width) * img.height;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double* px = img.pixel(x, y);
      const double alpha = px[3];
      const size_t at = size_t(y) * img.width + x;
      for (int c = 0; c < 3; ++c)
        out[size_t(c) * plane + at] = px[c] * alpha + bg[c] * (1.0 - alpha);
    }
  return out;
}

}  // namespace

double psnr(const ImageF& a, const ImageF& b, const Vec3& background) {
  check_same_size(a, b);
  if (a.width < 1 || a.height < 1) fail(ErrorKind::validation, "psnr needs a non-empty image");
  const std::vector<double> pa = flatten_over(a, background);
  const std::vector<double> pb = flatten_over(b, background);
  double sum = 0.0;
  for (size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    sum += d * d;
  }
  const double mse = sum / double(pa.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageF& a, const ImageF& b, const Vec3& background) {
  check_same_size(a, b);
  if (a.width < k_window || a.height < k_window)
    fail(ErrorKind::validation, "ssim needs images at least " + std::to_string(k_window) +
                                    " pixels in each dimension");

  double window[k_window * k_window];
  double wsum = 0.0;
  for (int dy = 0; dy < k_window; ++dy)
    for (int dx = 0; dx < k_window; ++dx) {
      const double ry = dy - (k_window - 1) / 2;
      const double rx = dx - (k_window - 1) / 2;
      const double w = std::exp(-(rx * rx + ry * ry) / (2.0 * k_sigma * k_sigma));
      window[dy * k_window + dx] = w;
      wsum += w;
    }
  for (double& w : window) w /= wsum;

  const std::vector<double> pa = flatten_over(a, background);
  const std::vector<double> pb = flatten_over(b, background);
  const size_t plane = size_t(a.width) * a.height;

  double total = 0.0;
  int64_t count = 0;
  for (int c = 0; c < 3; ++c) {
    const double* ca = pa.data() + size_t(c) * plane;
    const double* cb = pb.data() + size_t(c) * plane;
    for (int y = 0; y + k_window <= a.height; ++y)
      for (int x = 0; x + k_window <= a.width; ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = 0; dy < k_window; ++dy)
          for (int dx = 0; dx < k_window; ++dx) {
            const double w = window[dy * k_window + dx];
            const double va = ca[size_t(y + dy) * a.width + size_t(x + dx)];
            const double vb = cb[size_t(y + dy) * a.width + size_t(x + dx)];
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double var_a = saa - ma * ma;
        const double var_b = sbb - mb * mb;
        const double cov = sab - ma * mb;
        const double num = (2.0 * ma * mb + k_c1) * (2.0 * cov + k_c2);
        const double den = (ma * ma + mb * mb + k_c1) * (var_a + var_b + k_c2);
        total += num / den;
        ++count;
      }
  }
  return total / double(count);
}

}  // namespace meshfield
