#include "sermm/lf_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sermm/errors.hpp"
#include "sermm/lpc.hpp"
#include "sermm/rng.hpp"

namespace sermm {
namespace {

// Integral of e^{a t} sin(w t) over [0, t].
double open_integral(double a, double w, double t) {
  return (std::exp(a * t) * (a * std::sin(w * t) - w * std::cos(w * t)) + w) / (a * a + w * w);
}

template <typename F>
double bisect(F&& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = f(mid);
    if ((fmid < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fmid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

LfPulse::LfPulse(const LfShape& shape) {
  if (!(shape.ra > 0.0 && shape.rk > 0.0 && shape.rg > 0.0)) {
    throw ParameterError("LF R-parameters must be positive");
  }
  tp_ = 1.0 / (2.0 * shape.rg);
  te_ = tp_ * (1.0 + shape.rk);
  ta_ = shape.ra;
  tc_ = 1.0;
  if (!(te_ < tc_ && tp_ < te_)) throw ParameterError("LF timing parameters out of order");
  omega_ = std::numbers::pi / tp_;

  // Return-phase decay: epsilon * ta = 1 - exp(-epsilon (tc - te)).
  const double tail = tc_ - te_;
  auto eps_eq = [&](double e) { return e * ta_ - 1.0 + std::exp(-e * tail); };
  double hi = 2.0 / ta_;
  while (eps_eq(hi) < 0.0) hi *= 2.0;
  epsilon_ = bisect(eps_eq, 1e-6, hi);

  // Open-phase growth alpha from zero net flow over the cycle (unit E0).
  const double decay = std::exp(-epsilon_ * tail);
  const double return_shape = (1.0 - decay) / epsilon_ - tail * decay;
  auto net_flow = [&](double a) {
    const double ee = -std::exp(a * te_) * std::sin(omega_ * te_);
    return open_integral(a, omega_, te_) - ee / (epsilon_ * ta_) * return_shape;
  };
  double lo = -5.0 / te_, up = 5.0 / te_;
  while (net_flow(lo) * net_flow(up) > 0.0 && up < 1e4) {
    lo *= 2.0;
    up *= 2.0;
  }
  alpha_ = bisect(net_flow, lo, up);

  const double ee_unit = -std::exp(alpha_ * te_) * std::sin(omega_ * te_);
  e0_ = 1.0 / ee_unit;
  ee_ = 1.0;
  flow_at_te_ = e0_ * open_integral(alpha_, omega_, te_);
}

double LfPulse::derivative(double t) const {
  if (t < te_) return e0_ * std::exp(alpha_ * t) * std::sin(omega_ * t);
  if (t < tc_) {
    return -ee_ / (epsilon_ * ta_) *
           (std::exp(-epsilon_ * (t - te_)) - std::exp(-epsilon_ * (tc_ - te_)));
  }
  return 0.0;
}

double LfPulse::flow(double t) const {
  if (t < te_) return e0_ * open_integral(alpha_, omega_, t);
  const double dt = std::min(t, tc_) - te_;
  const double decay_end = std::exp(-epsilon_ * (tc_ - te_));
  const double ret = (1.0 - std::exp(-epsilon_ * dt)) / epsilon_ - dt * decay_end;
  return flow_at_te_ - ee_ / (epsilon_ * ta_) * ret;
}

SyntheticVowel synthesize_lf_vowel(double f0_hz, std::span<const double> formants_hz,
                                   double duration_s, double sample_rate_hz, std::uint64_t seed,
                                   const VowelOptions& options) {
  if (!(f0_hz >= 60.0 && f0_hz <= 400.0)) throw ParameterError("f0 must lie in [60, 400] Hz");
  if (!(sample_rate_hz > 0.0) || !(duration_s > 0.0)) {
    throw ParameterError("duration and sample rate must be positive");
  }
  if (options.bandwidths_hz.empty()) throw ParameterError("at least one bandwidth is required");
  for (double f : formants_hz) {
    if (!(f > 0.0 && f < sample_rate_hz / 2.0)) {
      throw ParameterError("formants must lie strictly between 0 and Nyquist");
    }
  }

  const LfPulse pulse(options.shape);
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  Rng rng(seed);
  const double phase0 = rng.uniform();

  std::vector<double> dg(n), flow(n);
  const double cycles_per_sample = f0_hz / sample_rate_hz;
  for (std::size_t i = 0; i < n; ++i) {
    double phase = phase0 + static_cast<double>(i) * cycles_per_sample;
    phase -= std::floor(phase);
    // Derivative per unit normalized time; convert to per-sample units.
    dg[i] = pulse.derivative(phase) * cycles_per_sample;
    flow[i] = pulse.flow(phase);
  }

  LpcModel tract{{}, 1.0};
  std::vector<double> poly{1.0};
  for (std::size_t k = 0; k < formants_hz.size(); ++k) {
    const double bw = options.bandwidths_hz[std::min(k, options.bandwidths_hz.size() - 1)];
    const double r = std::exp(-std::numbers::pi * bw / sample_rate_hz);
    const double theta = 2.0 * std::numbers::pi * formants_hz[k] / sample_rate_hz;
    const double b1 = -2.0 * r * std::cos(theta);
    const double b2 = r * r;
    std::vector<double> next(poly.size() + 2, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i] += poly[i];
      next[i + 1] += b1 * poly[i];
      next[i + 2] += b2 * poly[i];
    }
    poly = std::move(next);
  }
  tract.coefficients.assign(poly.begin() + 1, poly.end());

  double power = 0.0;
  for (double v : dg) power += v * v;
  const double noise_rms =
      std::sqrt(power / static_cast<double>(std::max<std::size_t>(n, 1))) *
      std::pow(10.0, -options.aspiration_hnr_db / 20.0);
  std::vector<double> excitation = dg;
  for (double& v : excitation) v += noise_rms * rng.normal();
  auto audio = all_pole_filter(excitation, tract);

  double peak = 0.0;
  for (double v : audio) peak = std::max(peak, std::abs(v));
  const double scale = peak > 0.0 ? 0.5 / peak : 1.0;
  for (double& v : audio) v *= scale;
  for (double& v : dg) v *= scale;
  for (double& v : flow) v *= scale;

  return SyntheticVowel{Waveform(std::move(audio), sample_rate_hz, WaveKind::Audio),
                        Waveform(std::move(flow), sample_rate_hz, WaveKind::GlottalFlow),
                        Waveform(std::move(dg), sample_rate_hz, WaveKind::GlottalFlow)};
}

}  // namespace sermm
