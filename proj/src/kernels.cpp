#include "csr/kernels.hpp"

#include <cmath>

namespace csr {

void validate_kernel_size(int size) {
  if (size < 3 || size % 2 == 0)
    throw ValueError("kernel size must be odd and >= 3, got " + std::to_string(size));
}

namespace {

void check_sigma(double sigma, const char* name) {
  if (!(sigma >= kSigmaMin && sigma <= kSigmaMax))
    throw ValueError(std::string(name) + " must be in [" + std::to_string(kSigmaMin) + ", " +
                     std::to_string(kSigmaMax) + "], got " + std::to_string(sigma));
}

Kernel normalized(Kernel k) {
  double sum = 0.0;
  for (double v : k.w) sum += v;
  for (double& v : k.w) v /= sum;
  return k;
}

}  // namespace

Kernel make_isotropic_kernel(double sigma, int size) {
  check_sigma(sigma, "sigma");
  validate_kernel_size(size);
  Kernel k;
  k.size = size;
  k.w.resize(static_cast<std::size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double dy = i - c;
      const double dx = j - c;
      k.w[static_cast<std::size_t>(i) * size + j] = std::exp(-(dx * dx + dy * dy) * inv);
    }
  return normalized(std::move(k));
}

Kernel make_anisotropic_kernel(double theta, double lambda1, double lambda2, int size) {
  if (!(theta >= 0.0 && theta < 3.14159265358979323846))
    throw ValueError("theta must be in [0, pi), got " + std::to_string(theta));
  check_sigma(lambda1, "lambda1");
  check_sigma(lambda2, "lambda2");
  validate_kernel_size(size);

  // Sigma = R diag(l1^2, l2^2) R^T; the quadratic form uses its inverse.
  const double ct = std::cos(theta), st = std::sin(theta);
  const double a1 = 1.0 / (lambda1 * lambda1);
  const double a2 = 1.0 / (lambda2 * lambda2);
  // inv(Sigma) = R diag(a1, a2) R^T
  const double ixx = a1 * ct * ct + a2 * st * st;
  const double iyy = a1 * st * st + a2 * ct * ct;
  const double ixy = (a1 - a2) * ct * st;

  Kernel k;
  k.size = size;
  k.w.resize(static_cast<std::size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) {
      const double y = i - c;  // vertical offset
      const double x = j - c;  // horizontal offset
      const double q = ixx * x * x + 2.0 * ixy * x * y + iyy * y * y;
      k.w[static_cast<std::size_t>(i) * size + j] = std::exp(-0.5 * q);
    }
  return normalized(std::move(k));
}

void KernelField::validate() const {
  if (!(sigma_min <= sigma_max))
    throw ValueError("KernelField: sigma_min must be <= sigma_max");
  if (!(sigma_min >= kSigmaMin && sigma_max <= kSigmaMax))
    throw ValueError("KernelField: sigmas must be in [" + std::to_string(kSigmaMin) + ", " +
                     std::to_string(kSigmaMax) + "]");
  validate_kernel_size(size);
}

}  // namespace csr
