#pragma once

#include <string>
#include <vector>

#include "csr/errors.hpp"

namespace csr {

/// Normalized 2-D blur kernel on an odd square grid, entries sum to 1.
struct Kernel {
  int size = 0;
  std::vector<double> w;  // size * size, row-major

  double at(int i, int j) const { return w[static_cast<std::size_t>(i) * size + j]; }
};

inline constexpr double kSigmaMin = 0.05;
inline constexpr double kSigmaMax = 10.0;

/// Isotropic Gaussian: k(i,j) proportional to
/// exp(-((i-c)^2 + (j-c)^2) / (2 sigma^2)) with c = (size-1)/2, normalized to
/// sum 1. sigma must lie in [0.05, 10] and size must be odd and >= 3; values
/// outside the range are rejected, never clamped.
Kernel make_isotropic_kernel(double sigma, int size);

/// Anisotropic Gaussian with covariance R(theta) diag(l1^2, l2^2) R(theta)^T,
/// i.e. lambda1/lambda2 act as per-axis standard deviations, so
/// theta=0, lambda1=lambda2=sigma reproduces the isotropic kernel exactly.
/// theta in [0, pi); lambdas in [0.05, 10].
Kernel make_anisotropic_kernel(double theta, double lambda1, double lambda2, int size);

/// Horizontal ramp of isotropic kernel widths: at column x of a width-W image
/// the effective sigma is sigma_min + (sigma_max - sigma_min) * x / (W - 1).
struct KernelField {
  double sigma_min = 0.2;
  double sigma_max = 4.0;
  int size = 21;

  double sigma_at(int x, int width) const {
    if (width < 2) throw ValueError("KernelField: image width must be >= 2");
    return sigma_min + (sigma_max - sigma_min) * static_cast<double>(x) / (width - 1);
  }
  void validate() const;
};

void validate_kernel_size(int size);

}  // namespace csr
