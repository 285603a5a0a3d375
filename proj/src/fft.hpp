#pragma once

// Thin FFTW wrapper shared by the extraction code. Not part of the public API.

#include <cstddef>
#include <span>
#include <vector>

namespace sermm::detail {

std::size_t next_pow2(std::size_t n);

/// |X[k]| for k = 0..nfft/2 of the zero-padded real input.
std::vector<double> magnitude_spectrum(std::span<const double> x, std::size_t nfft);

/// Raw autocorrelation sum_n x[n] x[n+lag] for lag = 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

}  // namespace sermm::detail
