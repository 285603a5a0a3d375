#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

namespace sermm::detail {
namespace {

// FFTW planning is not thread-safe; execution on a plan's own buffers is
// safe as long as each thread owns its plan, so plans live per thread.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct R2cPlan {
  explicit R2cPlan(std::size_t n) : size(n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
  }
  ~R2cPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(in);
    fftw_free(out);
  }
  R2cPlan(const R2cPlan&) = delete;
  R2cPlan& operator=(const R2cPlan&) = delete;

  std::size_t size;
  double* in;
  fftw_complex* out;
  fftw_plan forward;
  fftw_plan backward;
};

R2cPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<R2cPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<R2cPlan>(n);
  return *slot;
}

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t nfft) {
  R2cPlan& plan = plan_for(nfft);
  const std::size_t copy = std::min(x.size(), nfft);
  std::copy_n(x.begin(), copy, plan.in);
  std::fill(plan.in + copy, plan.in + nfft, 0.0);
  fftw_execute(plan.forward);
  std::vector<double> mag(nfft / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) {
    mag[k] = std::hypot(plan.out[k][0], plan.out[k][1]);
  }
  return mag;
}

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  const std::size_t nfft = next_pow2(2 * x.size());
  R2cPlan& plan = plan_for(nfft);
  std::copy(x.begin(), x.end(), plan.in);
  std::fill(plan.in + x.size(), plan.in + nfft, 0.0);
  fftw_execute(plan.forward);
  for (std::size_t k = 0; k < nfft / 2 + 1; ++k) {
    const double re = plan.out[k][0];
    const double im = plan.out[k][1];
    plan.out[k][0] = re * re + im * im;
    plan.out[k][1] = 0.0;
  }
  fftw_execute(plan.backward);
  const std::size_t lags = std::min(max_lag + 1, x.size());
  std::vector<double> r(max_lag + 1, 0.0);
  const double scale = 1.0 / static_cast<double>(nfft);
  for (std::size_t k = 0; k < lags; ++k) r[k] = plan.in[k] * scale;
  return r;
}

}  // namespace sermm::detail
