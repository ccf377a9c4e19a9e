#pragma once

#include <string>
#include <vector>

#include "csr/errors.hpp"

namespace csr {

/// Planar RGB image, channel-major ([3][H][W]), values in [0,1] after any
/// load or clip. The degradation and metric pipelines run in double precision.
struct ImageRgb {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // 3 * height * width

  ImageRgb() = default;
  ImageRgb(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, 0.0) {}

  static ImageRgb constant(int h, int w, double v) {
    ImageRgb img(h, w);
    for (auto& x : img.data) x = v;
    return img;
  }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
};

/// Loads an 8- or 16-bit PNG. Grayscale files load as three identical
/// channels; an alpha channel, if present, is dropped.
ImageRgb load_png(const std::string& path);

/// Saves as 8-bit RGB, rounding and clipping to [0,1].
void save_png(const ImageRgb& image, const std::string& path);

/// Saves a single [0,1] plane as 16-bit grayscale (used for kernel dumps).
void save_png16_gray(const std::vector<double>& plane, int height, int width,
                     const std::string& path);

ImageRgb clamp01(ImageRgb image);

/// BT.601 full-range luma: Y = 0.299 R + 0.587 G + 0.114 B, returned as an
/// [H*W] plane.
std::vector<double> rgb_to_y(const ImageRgb& image);

/// PSNR over the Y channels in the [0,1] domain with `shave` border pixels
/// excluded on every side. Identical inputs return +infinity.
double psnr_y(const ImageRgb& a, const ImageRgb& b, int shave);

/// Formats a PSNR value for CSV output; +infinity prints as "inf".
std::string format_psnr(double db);

}  // namespace csr
