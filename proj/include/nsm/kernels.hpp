#pragma once

#include <span>

// Data-parallel inner loops used by metrics, KDE evaluation and the chain
// accumulators. Each kernel has a scalar reference implementation and, on
// x86-64, an AVX2+FMA variant. The active variant is picked once at startup
// from CPUID and can be overridden with NSM_KERNELS=scalar|avx2 or set_isa().

namespace nsm::kernels {

enum class Isa { Scalar, Avx2 };

bool isa_available(Isa isa);
Isa active_isa();
// Throws ConfigError when the requested variant is not available.
void set_isa(Isa isa);
const char* isa_name(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
// sum_i exp(-0.5 * ((x - samples[i]) * inv_bandwidth)^2)
double gaussian_kernel_sum(double x, std::span<const double> samples, double inv_bandwidth);

namespace scalar {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double gaussian_kernel_sum(double x, std::span<const double> samples, double inv_bandwidth);
}  // namespace scalar

namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double sum_sq_diff(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double gaussian_kernel_sum(double x, std::span<const double> samples, double inv_bandwidth);
}  // namespace avx2

}  // namespace nsm::kernels
