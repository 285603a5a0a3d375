#pragma once

// Textbook formulas for the 12 contour functionals, evaluated in long
// double with explicit sums. Kept separate from the library code path.

#include <array>
#include <cmath>
#include <span>

namespace sermm::testing {

inline std::array<double, 12> functional_oracle(std::span<const double> x) {
  using ld = long double;
  const std::size_t n = x.size();
  const ld N = static_cast<ld>(n);
  ld s = 0;
  for (double v : x) s += v;
  const ld mean = s / N;
  ld var = 0, c3 = 0, c4 = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= N;
  for (double v : x) c3 += std::pow(static_cast<ld>(v) - mean, 3);
  for (double v : x) c4 += std::pow(static_cast<ld>(v) - mean, 4);
  c3 /= N;
  c4 /= N;
  const ld sd = std::sqrt(var);
  const ld skew = var > 0 ? c3 / std::pow(sd, 3) : 0;
  const ld kurt = var > 0 ? c4 / (var * var) - 3 : 0;

  std::size_t imin = 0, imax = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] < x[imin]) imin = i;
    if (x[i] > x[imax]) imax = i;
  }
  const ld denom = n > 1 ? N - 1 : 1;

  // Normal equations of y = a + b t with t = 0..n-1.
  ld st = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    st += i;
    stt += static_cast<ld>(i) * i;
    sty += static_cast<ld>(i) * x[i];
  }
  const ld det = N * stt - st * st;
  const ld b = det > 0 ? (N * sty - st * s) / det : 0;
  const ld a = (s - b * st) / N;
  ld sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const ld e = x[i] - (a + b * static_cast<ld>(i));
    sse += e * e;
  }
  return {static_cast<double>(mean),
          static_cast<double>(sd),
          static_cast<double>(kurt),
          static_cast<double>(skew),
          x[imin],
          x[imax],
          static_cast<double>(n > 1 ? imin / denom : 0),
          static_cast<double>(n > 1 ? imax / denom : 0),
          x[imax] - x[imin],
          static_cast<double>(a),
          static_cast<double>(b),
          static_cast<double>(sse / N)};
}

}  // namespace sermm::testing
