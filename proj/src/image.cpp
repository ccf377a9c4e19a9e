#include "csr/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>
#include <sstream>

namespace csr {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageRgb load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("load_png: cannot open " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    throw IoError("load_png: not a PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("load_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("load_png: libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: corrupt or truncated PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth != 8 && bit_depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: unsupported bit depth " + std::to_string(bit_depth) + " in " + path);
  }
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("load_png: palette PNGs unsupported: " + path);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (bit_depth == 16) png_set_swap(png);  // little-endian reads below
  png_read_update_info(png, info);

  const png_size_t rowbytes = png_get_rowbytes(png, info);
  rows.resize(rowbytes * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = rows.data() + y * rowbytes;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);

  const int channels = png_get_channels(png, info);
  png_destroy_read_struct(&png, &info, nullptr);
  if (channels != 1 && channels != 3)
    throw IoError("load_png: unsupported channel count " + std::to_string(channels) + " in " +
                  path);

  ImageRgb img(static_cast<int>(h), static_cast<int>(w));
  const double denom = bit_depth == 16 ? 65535.0 : 255.0;
  for (png_uint_32 y = 0; y < h; ++y) {
    const png_byte* row = rows.data() + y * rowbytes;
    for (png_uint_32 x = 0; x < w; ++x) {
      double rgb[3];
      for (int c = 0; c < 3; ++c) {
        const int src = channels == 1 ? 0 : c;
        double v;
        if (bit_depth == 16) {
          std::uint16_t u;
          std::memcpy(&u, row + (x * channels + src) * 2, 2);
          v = u / denom;
        } else {
          v = row[x * channels + src] / denom;
        }
        rgb[c] = v;
      }
      for (int c = 0; c < 3; ++c)
        img.at(c, static_cast<int>(y), static_cast<int>(x)) = rgb[c];
    }
  }
  return img;
}

namespace {

void write_png_impl(const std::string& path, int height, int width, int channels,
                    int bit_depth, const std::vector<png_byte>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("save_png: cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("save_png: libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("save_png: libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("save_png: write failed: " + path);
  }
  png_init_io(png, fp.get());
  const int color = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y)
    row_ptrs[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(rows.data() + static_cast<std::size_t>(y) * rowbytes);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void save_png(const ImageRgb& image, const std::string& path) {
  const int h = image.height, w = image.width;
  std::vector<png_byte> rows(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double v = image.at(c, y, x);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        rows[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
  write_png_impl(path, h, w, 3, 8, rows);
}

void save_png16_gray(const std::vector<double>& plane, int height, int width,
                     const std::string& path) {
  if (plane.size() != static_cast<std::size_t>(height) * width)
    throw ShapeError("save_png16_gray: plane size does not match " + std::to_string(height) +
                     "x" + std::to_string(width));
  std::vector<png_byte> rows(static_cast<std::size_t>(height) * width * 2);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    double v = plane[i];
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    const std::uint16_t u = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    std::memcpy(rows.data() + i * 2, &u, 2);
  }
  write_png_impl(path, height, width, 1, 16, rows);
}

ImageRgb clamp01(ImageRgb image) {
  for (auto& v : image.data) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return image;
}

std::vector<double> rgb_to_y(const ImageRgb& image) {
  std::vector<double> y(image.plane_size());
  const double* r = image.data.data();
  const double* g = r + image.plane_size();
  const double* b = g + image.plane_size();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return y;
}

double psnr_y(const ImageRgb& a, const ImageRgb& b, int shave) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError("psnr_y: dimension mismatch " + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                     std::to_string(b.width));
  if (shave < 0) throw ValueError("psnr_y: shave must be >= 0");
  if (a.height - 2 * shave < 1 || a.width - 2 * shave < 1)
    throw ValueError("psnr_y: shave " + std::to_string(shave) + " leaves no pixels");
  const auto ya = rgb_to_y(a);
  const auto yb = rgb_to_y(b);
  double mse = 0.0;
  std::int64_t count = 0;
  for (int y = shave; y < a.height - shave; ++y)
    for (int x = shave; x < a.width - shave; ++x) {
      const double d = ya[static_cast<std::size_t>(y) * a.width + x] -
                       yb[static_cast<std::size_t>(y) * a.width + x];
      mse += d * d;
      ++count;
    }
  mse /= static_cast<double>(count);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << db;
  return os.str();
}

}  // namespace csr
