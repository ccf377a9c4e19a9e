#include "csr/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace csr {

// ---------------------------------------------------------------------------
// Config validation / JSON
// ---------------------------------------------------------------------------

void KernelConfig::validate() const {
  validate_kernel_size(size);
  switch (type) {
    case Type::isotropic:
      if (!(sigma >= kSigmaMin && sigma <= kSigmaMax))
        throw ValueError("kernel.sigma out of [0.05,10]: " + std::to_string(sigma));
      break;
    case Type::anisotropic:
      if (!(theta >= 0.0 && theta < 3.14159265358979323846))
        throw ValueError("kernel.theta out of [0,pi): " + std::to_string(theta));
      if (!(lambda1 >= kSigmaMin && lambda1 <= kSigmaMax) ||
          !(lambda2 >= kSigmaMin && lambda2 <= kSigmaMax))
        throw ValueError("kernel.lambda out of [0.05,10]");
      break;
    case Type::field: {
      KernelField f{sigma_min, sigma_max, size};
      f.validate();
      break;
    }
  }
}

nlohmann::json KernelConfig::to_json() const {
  nlohmann::json j;
  j["size"] = size;
  switch (type) {
    case Type::isotropic:
      j["type"] = "isotropic";
      j["sigma"] = sigma;
      break;
    case Type::anisotropic:
      j["type"] = "anisotropic";
      j["theta"] = theta;
      j["lambda1"] = lambda1;
      j["lambda2"] = lambda2;
      break;
    case Type::field:
      j["type"] = "field";
      j["sigma_min"] = sigma_min;
      j["sigma_max"] = sigma_max;
      break;
  }
  return j;
}

KernelConfig KernelConfig::from_json(const nlohmann::json& j) {
  KernelConfig k;
  const std::string type = j.at("type").get<std::string>();
  k.size = j.value("size", 21);
  if (type == "isotropic") {
    k.type = Type::isotropic;
    k.sigma = j.at("sigma").get<double>();
  } else if (type == "anisotropic") {
    k.type = Type::anisotropic;
    k.theta = j.at("theta").get<double>();
    k.lambda1 = j.at("lambda1").get<double>();
    k.lambda2 = j.at("lambda2").get<double>();
  } else if (type == "field") {
    k.type = Type::field;
    k.sigma_min = j.at("sigma_min").get<double>();
    k.sigma_max = j.at("sigma_max").get<double>();
  } else {
    throw ValueError("kernel.type must be isotropic|anisotropic|field, got " + type);
  }
  k.validate();
  return k;
}

void NoiseConfig::validate() const {
  const auto check = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 100.0))
      throw ValueError(std::string("noise.") + name + " out of [0,100]: " + std::to_string(v));
  };
  if (type == Type::constant) {
    check(level, "level");
  } else {
    check(level_min, "level_min");
    check(level_max, "level_max");
    if (level_min > level_max) throw ValueError("noise.level_min > noise.level_max");
  }
}

nlohmann::json NoiseConfig::to_json() const {
  nlohmann::json j;
  if (type == Type::constant) {
    j["type"] = "constant";
    j["level"] = level;
  } else {
    j["type"] = "ramp";
    j["level_min"] = level_min;
    j["level_max"] = level_max;
  }
  return j;
}

NoiseConfig NoiseConfig::from_json(const nlohmann::json& j) {
  NoiseConfig n;
  const std::string type = j.at("type").get<std::string>();
  if (type == "constant") {
    n.type = Type::constant;
    n.level = j.at("level").get<double>();
  } else if (type == "ramp") {
    n.type = Type::ramp;
    n.level_min = j.at("level_min").get<double>();
    n.level_max = j.at("level_max").get<double>();
  } else {
    throw ValueError("noise.type must be constant|ramp, got " + type);
  }
  n.validate();
  return n;
}

void DegradationSpec::validate() const {
  kernel.validate();
  noise.validate();
  if (scale != 2 && scale != 3 && scale != 4)
    throw ValueError("scale must be one of {2,3,4}, got " + std::to_string(scale));
}

nlohmann::json DegradationSpec::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kernel"] = kernel.to_json();
  j["scale"] = scale;
  j["noise"] = noise.to_json();
  j["seed"] = seed;
  return j;
}

DegradationSpec DegradationSpec::from_json(const nlohmann::json& j) {
  DegradationSpec s;
  s.kernel = KernelConfig::from_json(j.at("kernel"));
  s.scale = j.at("scale").get<int>();
  s.noise = NoiseConfig::from_json(j.at("noise"));
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open spec file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed spec JSON in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("spec " + path + " missing field: " + e.what());
  }
}

void DegradationSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write spec file " + path);
  out << to_json().dump(2) << "\n";
}

std::string DegradationSpec::kernel_summary() const {
  std::ostringstream os;
  os.precision(4);
  switch (kernel.type) {
    case KernelConfig::Type::isotropic:
      os << "iso:" << kernel.sigma;
      break;
    case KernelConfig::Type::anisotropic:
      os << "aniso:" << kernel.theta << ":" << kernel.lambda1 << ":" << kernel.lambda2;
      break;
    case KernelConfig::Type::field:
      os << "field:" << kernel.sigma_min << "-" << kernel.sigma_max;
      break;
  }
  return os.str();
}

std::string DegradationSpec::noise_summary() const {
  std::ostringstream os;
  os.precision(4);
  if (noise.type == NoiseConfig::Type::constant)
    os << noise.level;
  else
    os << noise.level_min << "-" << noise.level_max;
  return os.str();
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

namespace {

// reflect-101: gfedcb|abcdefgh|gfedcba (edge pixel not repeated)
inline int reflect101(int p, int n) {
  if (n == 1) return 0;
  while (p < 0 || p >= n) {
    if (p < 0) p = -p;
    if (p >= n) p = 2 * n - 2 - p;
  }
  return p;
}

void convolve_column(const ImageRgb& image, const Kernel& kernel, int x, ImageRgb& out) {
  const int h = image.height, w = image.width;
  const int k = kernel.size, c0 = (k - 1) / 2;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y) {
      double acc = 0.0;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = reflect101(y + ky - c0, h);
        for (int kx = 0; kx < k; ++kx) {
          const int ix = reflect101(x + kx - c0, w);
          acc += image.at(c, iy, ix) * kernel.at(ky, kx);
        }
      }
      out.at(c, y, x) = acc;
    }
}

}  // namespace

ImageRgb convolve(const ImageRgb& image, const Kernel& kernel) {
  if (kernel.size > 2 * std::min(image.height, image.width))
    throw ValueError("convolve: kernel size " + std::to_string(kernel.size) +
                     " exceeds 2*min(H,W) for " + std::to_string(image.height) + "x" +
                     std::to_string(image.width));
  ImageRgb out(image.height, image.width);
  for (int x = 0; x < image.width; ++x) convolve_column(image, kernel, x, out);
  return out;
}

ImageRgb convolve_spatially_variant(const ImageRgb& image, const KernelField& field) {
  field.validate();
  if (image.width < 2) throw ValueError("convolve_spatially_variant: image width must be >= 2");
  if (field.size > 2 * std::min(image.height, image.width))
    throw ValueError("convolve_spatially_variant: kernel size exceeds 2*min(H,W)");
  ImageRgb out(image.height, image.width);
  for (int x = 0; x < image.width; ++x) {
    const Kernel k = make_isotropic_kernel(field.sigma_at(x, image.width), field.size);
    convolve_column(image, k, x, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bicubic resampling (Keys a = -0.5, antialias on downscale)
// ---------------------------------------------------------------------------

namespace {

double keys_cubic(double x) {
  x = std::fabs(x);
  if (x <= 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
  if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
  return 0.0;
}

struct ResampleTaps {
  std::vector<int> index;      // n_out * taps, clamped source indices
  std::vector<double> weight;  // n_out * taps, rows normalized to sum 1
  int taps = 0;
};

// scale = out/in. For scale < 1 the kernel is stretched by 1/scale and scaled
// by `scale` (antialiasing); weights are renormalized after border clamping.
ResampleTaps make_taps(int n_in, int n_out, double scale) {
  ResampleTaps t;
  const double kernel_width = scale < 1.0 ? 4.0 / scale : 4.0;
  t.taps = static_cast<int>(std::ceil(kernel_width)) + 2;
  t.index.resize(static_cast<std::size_t>(n_out) * t.taps);
  t.weight.resize(static_cast<std::size_t>(n_out) * t.taps);
  for (int xo = 0; xo < n_out; ++xo) {
    const double u = (xo + 0.5) / scale - 0.5;
    const int left = static_cast<int>(std::floor(u - kernel_width / 2.0));
    double sum = 0.0;
    for (int k = 0; k < t.taps; ++k) {
      const int src = left + 1 + k;
      const double d = u - src;
      const double wv = scale < 1.0 ? scale * keys_cubic(scale * d) : keys_cubic(d);
      t.index[static_cast<std::size_t>(xo) * t.taps + k] = std::clamp(src, 0, n_in - 1);
      t.weight[static_cast<std::size_t>(xo) * t.taps + k] = wv;
      sum += wv;
    }
    for (int k = 0; k < t.taps; ++k)
      t.weight[static_cast<std::size_t>(xo) * t.taps + k] /= sum;
  }
  return t;
}

}  // namespace

ImageRgb bicubic_resize(const ImageRgb& image, int scale, ResizeDir dir) {
  if (scale != 2 && scale != 3 && scale != 4)
    throw ValueError("bicubic_resize: scale must be one of {2,3,4}, got " +
                     std::to_string(scale));
  const int h_in = image.height, w_in = image.width;
  const int h_out = dir == ResizeDir::down ? h_in / scale : h_in * scale;
  const int w_out = dir == ResizeDir::down ? w_in / scale : w_in * scale;
  if (h_out < 4 || w_out < 4)
    throw ValueError("bicubic_resize: output " + std::to_string(h_out) + "x" +
                     std::to_string(w_out) + " is below the 4-pixel minimum");
  const double s = dir == ResizeDir::down ? 1.0 / scale : static_cast<double>(scale);
  const ResampleTaps tx = make_taps(w_in, w_out, s);
  const ResampleTaps ty = make_taps(h_in, h_out, s);

  // Horizontal pass, then vertical.
  ImageRgb mid(h_in, w_out);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h_in; ++y)
      for (int x = 0; x < w_out; ++x) {
        double acc = 0.0;
        for (int k = 0; k < tx.taps; ++k)
          acc += image.at(c, y, tx.index[static_cast<std::size_t>(x) * tx.taps + k]) *
                 tx.weight[static_cast<std::size_t>(x) * tx.taps + k];
        mid.at(c, y, x) = acc;
      }
  ImageRgb out(h_out, w_out);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h_out; ++y)
      for (int x = 0; x < w_out; ++x) {
        double acc = 0.0;
        for (int k = 0; k < ty.taps; ++k)
          acc += mid.at(c, ty.index[static_cast<std::size_t>(y) * ty.taps + k], x) *
                 ty.weight[static_cast<std::size_t>(y) * ty.taps + k];
        out.at(c, y, x) = acc;
      }
  return out;
}

// ---------------------------------------------------------------------------
// Noise and the full pipeline
// ---------------------------------------------------------------------------

ImageRgb add_awgn(const ImageRgb& image, const NoiseConfig& noise, Rng& rng) {
  noise.validate();
  ImageRgb out = image;
  const int h = image.height, w = image.width;
  // Draw order fixed: channel-major, then rows, then columns.
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double level = noise.level;
        if (noise.type == NoiseConfig::Type::ramp)
          level = w < 2 ? noise.level_min
                        : noise.level_min + (noise.level_max - noise.level_min) *
                                                static_cast<double>(x) / (w - 1);
        const double z = rng.next_normal();
        double v = out.at(c, y, x) + z * (level / 255.0);
        out.at(c, y, x) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      }
  return out;
}

ImageRgb degrade(const ImageRgb& hr, const DegradationSpec& spec) {
  spec.validate();
  if (hr.height % spec.scale != 0 || hr.width % spec.scale != 0)
    throw ValueError("degrade: image " + std::to_string(hr.height) + "x" +
                     std::to_string(hr.width) + " not divisible by scale " +
                     std::to_string(spec.scale));
  ImageRgb blurred;
  switch (spec.kernel.type) {
    case KernelConfig::Type::isotropic:
      blurred = convolve(hr, make_isotropic_kernel(spec.kernel.sigma, spec.kernel.size));
      break;
    case KernelConfig::Type::anisotropic:
      blurred = convolve(hr, make_anisotropic_kernel(spec.kernel.theta, spec.kernel.lambda1,
                                                     spec.kernel.lambda2, spec.kernel.size));
      break;
    case KernelConfig::Type::field: {
      KernelField f{spec.kernel.sigma_min, spec.kernel.sigma_max, spec.kernel.size};
      blurred = convolve_spatially_variant(hr, f);
      break;
    }
  }
  ImageRgb lr = clamp01(bicubic_resize(blurred, spec.scale, ResizeDir::down));
  Rng noise_rng = Rng(spec.seed).split(kNoiseStream);
  return add_awgn(lr, spec.noise, noise_rng);
}

}  // namespace csr
