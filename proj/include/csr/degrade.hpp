#pragma once

#include <cstdint>
#include <string>

#include "csr/image.hpp"
#include "csr/kernels.hpp"
#include "csr/rng.hpp"

#include "json.hpp"

namespace csr {

/// Blur configuration: a single isotropic/anisotropic kernel, or a horizontal
/// field of isotropic kernels with sigma ramping across columns.
struct KernelConfig {
  enum class Type { isotropic, anisotropic, field };
  Type type = Type::isotropic;
  double sigma = 2.0;                       // isotropic
  double theta = 0.0, lambda1 = 2.0, lambda2 = 2.0;  // anisotropic
  double sigma_min = 0.2, sigma_max = 4.0;  // field
  int size = 21;

  void validate() const;
  nlohmann::json to_json() const;
  static KernelConfig from_json(const nlohmann::json& j);
};

/// Additive white Gaussian noise; levels are standard deviations on the 0-255
/// intensity scale. The ramp variant increases linearly across columns.
struct NoiseConfig {
  enum class Type { constant, ramp };
  Type type = Type::constant;
  double level = 0.0;                      // constant
  double level_min = 0.0, level_max = 0.0;  // ramp

  void validate() const;
  nlohmann::json to_json() const;
  static NoiseConfig from_json(const nlohmann::json& j);
};

/// Full parameterization of the LR synthesis pipeline:
/// blur, bicubic downsample by `scale`, then noise, deterministically seeded.
struct DegradationSpec {
  KernelConfig kernel;
  int scale = 2;
  NoiseConfig noise;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DegradationSpec from_json(const nlohmann::json& j);
  static DegradationSpec load(const std::string& path);
  void save(const std::string& path) const;

  std::string kernel_summary() const;  // e.g. "iso:2.0" or "field:0.2-4.0"
  std::string noise_summary() const;
};

/// Per-channel 2-D correlation with reflect-101 borders. Normalized kernels
/// preserve constant images. Kernels wider than 2*min(H,W) are rejected.
ImageRgb convolve(const ImageRgb& image, const Kernel& kernel);

/// Column x of the output is convolved with the kernel of width
/// field.sigma_at(x, W); one kernel per column, no quantization.
ImageRgb convolve_spatially_variant(const ImageRgb& image, const KernelField& field);

enum class ResizeDir { down, up };

/// Bicubic resampler (Keys kernel, a = -0.5). Downsampling widens the kernel
/// support by the scale factor (antialiasing); borders clamp to the edge and
/// tap weights are renormalized to sum 1. Output sides: floor(side/scale) when
/// down, side*scale when up. Results with any side < 4 are rejected.
ImageRgb bicubic_resize(const ImageRgb& image, int scale, ResizeDir dir);

/// Adds N(0, (level/255)^2) per pixel per channel and clips to [0,1]. A ramp
/// config interpolates the level across columns. Deterministic in `rng`.
ImageRgb add_awgn(const ImageRgb& image, const NoiseConfig& noise, Rng& rng);

// Stream index used to derive the AWGN generator from DegradationSpec::seed.
inline constexpr std::uint64_t kNoiseStream = 1;

/// Eq.-of-record degradation: blur -> bicubic downsample -> clamp -> noise.
/// A pure function of (hr, spec); same inputs give bit-identical outputs.
/// H and W must be divisible by spec.scale.
ImageRgb degrade(const ImageRgb& hr, const DegradationSpec& spec);

}  // namespace csr
