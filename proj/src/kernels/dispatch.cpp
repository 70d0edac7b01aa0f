#include <atomic>
#include <cstdlib>
#include <string>
#include <string_view>

#include "nsm/error.hpp"
#include "nsm/kernels.hpp"

namespace nsm::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(NSM_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  Isa best = cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
  if (const char* env = std::getenv("NSM_KERNELS")) {
    std::string_view v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && best == Isa::Avx2) return Isa::Avx2;
  }
  return best;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!isa_available(isa)) throw ConfigError(std::string("kernel variant unavailable: ") + isa_name(isa));
  current().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

double dot(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::Avx2 ? avx2::dot(a, b) : scalar::dot(a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (active_isa() == Isa::Avx2) {
    avx2::axpy(alpha, x, y);
  } else {
    scalar::axpy(alpha, x, y);
  }
}

double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::Avx2 ? avx2::sum_sq_diff(a, b) : scalar::sum_sq_diff(a, b);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::Avx2 ? avx2::max_abs_diff(a, b) : scalar::max_abs_diff(a, b);
}

double gaussian_kernel_sum(double x, std::span<const double> samples, double inv_bandwidth) {
  return active_isa() == Isa::Avx2 ? avx2::gaussian_kernel_sum(x, samples, inv_bandwidth)
                                   : scalar::gaussian_kernel_sum(x, samples, inv_bandwidth);
}

}  // namespace nsm::kernels
