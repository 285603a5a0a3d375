#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sermm {

/// All-pole model 1 / (1 + sum_k a_k z^-k); coefficients hold a_1..a_p.
struct LpcModel {
  std::vector<double> coefficients;
  double gain = 1.0;

  std::size_t order() const noexcept { return coefficients.size(); }
};

/// Autocorrelation-method linear prediction solved by Levinson-Durbin.
/// Unstable solutions have their outside poles reflected into the unit
/// circle. Throws DataError for an all-zero signal.
LpcModel lpc(std::span<const double> signal, std::size_t order);

/// As above, with the autocorrelation tapered by a Gaussian lag window of
/// the given bandwidth (expressed in cycles per sample; 0 disables it).
LpcModel lpc(std::span<const double> signal, std::size_t order, double lag_window_bw);

/// Reflection coefficients by the step-down recursion; |k| < 1 for all k
/// exactly when the model is minimum phase.
std::vector<double> reflection_coefficients(const LpcModel& model);
bool is_minimum_phase(const LpcModel& model);

/// Roots of z^p + a_1 z^(p-1) + ... + a_p, i.e. the model poles.
std::vector<std::complex<double>> poles(const LpcModel& model);

/// Reflects poles outside the unit circle to 1/conj(z).
LpcModel stabilize(const LpcModel& model);

/// FIR y[n] = x[n] + sum_k a_k x[n-k] with zero initial state.
std::vector<double> inverse_filter(std::span<const double> signal, const LpcModel& model);

/// IIR y[n] = x[n] - sum_k a_k y[n-k] with zero initial state.
std::vector<double> all_pole_filter(std::span<const double> signal, const LpcModel& model);

}  // namespace sermm
