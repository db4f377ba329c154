#pragma once

#include <string>
#include <vector>

namespace meshfield {

// Linear-light RGBA, straight (non-premultiplied) alpha, row-major from the
// top-left. PNG io quantizes to 8 bits, no gamma on either side.
struct ImageF {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  static ImageF make(int w, int h) {
    ImageF img;
    img.width = w;
    img.height = h;
    img.data.assign(size_t(w) * size_t(h) * 4, 0.0);
    return img;
  }

  double* pixel(int x, int y) { return data.data() + 4 * (size_t(y) * width + x); }
  const double* pixel(int x, int y) const { return data.data() + 4 * (size_t(y) * width + x); }
};

ImageF read_png(const std::string& path);
void write_png(const ImageF& img, const std::string& path);

}  // namespace meshfield
