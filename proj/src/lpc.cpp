#include "sermm/lpc.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "sermm/errors.hpp"

namespace sermm {

LpcModel lpc(std::span<const double> signal, std::size_t order) {
  return lpc(signal, order, 0.0);
}

LpcModel lpc(std::span<const double> signal, std::size_t order, double lag_window_bw) {
  if (order == 0) throw ParameterError("LPC order must be >= 1");
  if (signal.size() <= order) throw TooShortError(order + 1, signal.size());

  std::vector<double> r(order + 1, 0.0);
  for (std::size_t lag = 0; lag <= order; ++lag) {
    double acc = 0.0;
    for (std::size_t n = lag; n < signal.size(); ++n) acc += signal[n] * signal[n - lag];
    r[lag] = acc;
  }
  if (!(r[0] > 0.0)) throw DataError("LPC of an all-zero signal is undefined");
  if (lag_window_bw > 0.0) {
    for (std::size_t lag = 1; lag <= order; ++lag) {
      const double x = 2.0 * std::numbers::pi * lag_window_bw * static_cast<double>(lag);
      r[lag] *= std::exp(-0.5 * x * x);
    }
  }

  std::vector<double> a(order + 1, 0.0);
  std::vector<double> prev(order + 1, 0.0);
  a[0] = 1.0;
  double err = r[0];
  for (std::size_t i = 1; i <= order; ++i) {
    double acc = r[i];
    for (std::size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
    const double k = -acc / err;
    prev = a;
    for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= (1.0 - k * k);
    if (err <= 0.0) {
      // Perfectly predictable signal; higher orders add nothing.
      err = 0.0;
      break;
    }
  }

  LpcModel model{std::vector<double>(a.begin() + 1, a.end()), std::sqrt(err)};
  if (!is_minimum_phase(model)) model = stabilize(model);
  return model;
}

std::vector<double> reflection_coefficients(const LpcModel& model) {
  const std::size_t p = model.order();
  std::vector<double> a(model.coefficients);
  std::vector<double> k(p, 0.0);
  for (std::size_t i = p; i >= 1; --i) {
    const double ki = a[i - 1];
    k[i - 1] = ki;
    if (std::abs(ki) >= 1.0) return k;
    const double denom = 1.0 - ki * ki;
    std::vector<double> next(i - 1);
    for (std::size_t j = 1; j < i; ++j) next[j - 1] = (a[j - 1] - ki * a[i - j - 1]) / denom;
    a = std::move(next);
  }
  return k;
}

bool is_minimum_phase(const LpcModel& model) {
  for (double k : reflection_coefficients(model)) {
    if (!(std::abs(k) < 1.0)) return false;
  }
  return true;
}

std::vector<std::complex<double>> poles(const LpcModel& model) {
  const std::size_t p = model.order();
  if (p == 0) return {};
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p),
                                                    static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) companion(0, static_cast<Eigen::Index>(j)) = -model.coefficients[j];
  for (std::size_t i = 1; i < p; ++i) {
    companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  std::vector<std::complex<double>> roots;
  roots.reserve(p);
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    roots.push_back(solver.eigenvalues()[i]);
  }
  return roots;
}

LpcModel stabilize(const LpcModel& model) {
  auto roots = poles(model);
  for (auto& z : roots) {
    const double mag = std::abs(z);
    if (mag >= 1.0) {
      z = 1.0 / std::conj(z);
      // Keep reflected poles strictly inside so the check below is robust.
      if (std::abs(z) > 1.0 - 1e-9) z *= (1.0 - 1e-9);
    }
  }
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& z : roots) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] -= z * poly[i];
    }
    poly = std::move(next);
  }
  LpcModel out{std::vector<double>(model.order()), model.gain};
  for (std::size_t i = 1; i < poly.size(); ++i) out.coefficients[i - 1] = poly[i].real();
  return out;
}

std::vector<double> inverse_filter(std::span<const double> signal, const LpcModel& model) {
  const auto& a = model.coefficients;
  std::vector<double> y(signal.size());
  for (std::size_t n = 0; n < signal.size(); ++n) {
    double acc = signal[n];
    const std::size_t taps = std::min(a.size(), n);
    for (std::size_t k = 1; k <= taps; ++k) acc += a[k - 1] * signal[n - k];
    y[n] = acc;
  }
  return y;
}

std::vector<double> all_pole_filter(std::span<const double> signal, const LpcModel& model) {
  const auto& a = model.coefficients;
  std::vector<double> y(signal.size());
  for (std::size_t n = 0; n < signal.size(); ++n) {
    double acc = signal[n];
    const std::size_t taps = std::min(a.size(), n);
    for (std::size_t k = 1; k <= taps; ++k) acc -= a[k - 1] * y[n - k];
    y[n] = acc;
  }
  return y;
}

}  // namespace sermm
