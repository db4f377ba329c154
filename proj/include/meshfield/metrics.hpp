#pragma once

#include "meshfield/image.hpp"
#include "meshfield/vec3.hpp"

namespace meshfield {

// Both metrics first composite the straight-alpha images over the same
// background, then score the resulting RGB in [0, 1].

// 10 * log10(1 / MSE); +infinity when the images are identical.
double psnr(const ImageF& a, const ImageF& b, const Vec3& background);

// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, averaged over the valid window positions and channels.
double ssim(const ImageF& a, const ImageF& b, const Vec3& background);

}  // namespace meshfield
