#include <algorithm>
#include <cmath>

#include "nsm/kernels.hpp"

namespace nsm::kernels::scalar {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double gaussian_kernel_sum(double x, std::span<const double> samples, double inv_bandwidth) {
  double s = 0.0;
  for (double xi : samples) {
    double z = (x - xi) * inv_bandwidth;
    s += std::exp(-0.5 * z * z);
  }
  return s;
}

}  // namespace nsm::kernels::scalar
