#include "sermm/iaif.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sermm/errors.hpp"
#include "sermm/lld.hpp"

namespace sermm {

std::size_t default_vocal_tract_order(double sample_rate_hz) {
  return static_cast<std::size_t>(std::llround(sample_rate_hz / 1000.0)) + 2;
}

std::vector<double> leaky_integrate(std::span<const double> x, double leak) {
  std::vector<double> y(x.size());
  double state = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    state = x[n] + leak * state;
    y[n] = state;
  }
  return y;
}

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;

  std::vector<double> run(std::span<const double> x) const {
    std::vector<double> y(x.size());
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double v = b0 * x[n] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = x[n];
      y2 = y1;
      y1 = v;
      y[n] = v;
    }
    return y;
  }
};

Biquad butterworth_highpass(double cutoff_hz, double fs) {
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double a0 = 1.0 + alpha;
  return {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0, -2.0 * cw / a0,
          (1.0 - alpha) / a0};
}

std::vector<double> hann(std::size_t n, bool periodic) {
  std::vector<double> w(n);
  const double denom = periodic ? static_cast<double>(n) : static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
  }
  return w;
}

std::vector<double> windowed(std::span<const double> x, std::span<const double> w) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * w[i];
  return out;
}

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

struct FrameResult {
  std::vector<double> derivative;
  LpcModel tract;
};

// One IAIF pass over a frame. `segment` holds `context` samples of history
// followed by the frame itself; filters run over the whole segment so the
// frame starts with warm filter state.
FrameResult analyze_frame(std::span<const double> segment, std::size_t context,
                          std::span<const double> window, std::size_t tract_order,
                          std::size_t glottal_order, double leak, double lag_bw) {
  const std::size_t len = segment.size() - context;
  auto body = [&](const std::vector<double>& full) {
    return std::span<const double>(full).subspan(context, len);
  };
  const auto frame = segment.subspan(context, len);

  const LpcModel tilt = lpc(windowed(frame, window), 1);
  const auto no_tilt = inverse_filter(segment, tilt);
  const LpcModel tract1 = lpc(windowed(body(no_tilt), window), tract_order, lag_bw);

  const auto flow1 = leaky_integrate(inverse_filter(segment, tract1), leak);
  const LpcModel glottis = lpc(windowed(body(flow1), window), glottal_order);

  const auto no_glottis = leaky_integrate(inverse_filter(segment, glottis), leak);
  const LpcModel tract2 = lpc(windowed(body(no_glottis), window), tract_order, lag_bw);

  const auto residual = inverse_filter(segment, tract2);
  const auto out = body(residual);
  return {std::vector<double>(out.begin(), out.end()), tract2};
}

}  // namespace

std::vector<double> zero_phase_highpass(std::span<const double> x, double cutoff_hz,
                                        double sample_rate_hz) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0)) {
    throw ParameterError("high-pass cutoff must lie between 0 and Nyquist");
  }
  if (x.empty()) return {};
  const Biquad hp = butterworth_highpass(cutoff_hz, sample_rate_hz);
  // Odd reflection about each end keeps the edges free of start-up steps.
  const auto settle = static_cast<std::size_t>(std::ceil(3.0 * sample_rate_hz / cutoff_hz));
  const std::size_t pad = std::min(settle, x.size() - 1);
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i > 0; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  auto forward = hp.run(ext);
  std::reverse(forward.begin(), forward.end());
  auto backward = hp.run(forward);
  std::reverse(backward.begin(), backward.end());
  return std::vector<double>(backward.begin() + static_cast<std::ptrdiff_t>(pad),
                             backward.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

GlottalEstimate iaif(const Waveform& w, const IaifConfig& config, std::string source_audio_id) {
  if (w.kind() != WaveKind::Audio) throw ParameterError("IAIF expects an audio waveform");
  const double fs = w.sample_rate_hz();
  const auto len = static_cast<std::size_t>(std::llround(config.frame_len_s * fs));
  const auto shift = static_cast<std::size_t>(std::llround(config.shift_s * fs));
  if (!(config.flow_corner_hz > 0.0 && config.flow_corner_hz < fs / 2.0)) {
    throw ParameterError("flow integrator corner must lie between 0 and Nyquist");
  }
  if (len < 8 || shift == 0 || shift > len) {
    throw ParameterError("IAIF frame plan is degenerate at this sample rate");
  }
  if (w.size() < len + shift) throw TooShortError(len + shift, w.size());
  const std::size_t tract_order =
      config.vocal_tract_order == 0 ? default_vocal_tract_order(fs) : config.vocal_tract_order;
  if (tract_order >= len) throw ParameterError("vocal tract order exceeds the frame length");

  const auto x = zero_phase_highpass(w.samples(), config.highpass_hz, fs);
  const auto analysis_window = hann(len, false);
  const auto ola_window = hann(len, true);

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + len <= x.size(); s += shift) starts.push_back(s);
  if (starts.back() + len < x.size()) starts.push_back(x.size() - len);

  std::vector<double> acc(x.size(), 0.0), weight(x.size(), 0.0);
  LpcModel loudest_tract{std::vector<double>(tract_order, 0.0), 0.0};
  double loudest = -1.0;
  for (std::size_t start : starts) {
    const std::size_t context = std::min(start, tract_order);
    const std::span<const double> segment(x.data() + start - context, len + context);
    const double e = energy(segment.subspan(context));
    std::vector<double> dg(len, 0.0);
    if (e > 0.0) {
      try {
        auto result = analyze_frame(segment, context, analysis_window, tract_order,
                                    config.glottal_order, config.leak,
                                    config.lag_window_hz / fs);
        dg = std::move(result.derivative);
        if (e > loudest) {
          loudest = e;
          loudest_tract = std::move(result.tract);
        }
      } catch (const DataError&) {
        // A filtered stage collapsed to silence; the frame contributes zeros.
      }
    }
    for (std::size_t i = 0; i < len; ++i) {
      acc[start + i] += ola_window[i] * dg[i];
      weight[start + i] += ola_window[i];
    }
  }
  for (std::size_t n = 0; n < acc.size(); ++n) {
    if (weight[n] > 1e-6) acc[n] /= weight[n];
  }
  const double flow_leak = std::exp(-2.0 * std::numbers::pi * config.flow_corner_hz / fs);
  auto flow = leaky_integrate(acc, flow_leak);

  // Voicing check on the raw audio with the feature pitch tracker.
  std::size_t voiced = 0, total = 0;
  const LldConfig pitch;
  const FramePlan plan = FramePlan::standard();
  if (w.size() >= plan.frame_len_samples(fs)) {
    for (const Frame& f : frame_signal(w, plan)) {
      ++total;
      if (f0_acf(f, fs, pitch.f0_min_hz, pitch.f0_max_hz, pitch.voicing_threshold) > 0.0) {
        ++voiced;
      }
    }
  }
  const double voiced_fraction =
      total == 0 ? 0.0 : static_cast<double>(voiced) / static_cast<double>(total);

  return GlottalEstimate{Waveform(std::move(flow), fs, WaveKind::GlottalFlow),
                         Waveform(std::move(acc), fs, WaveKind::GlottalFlow),
                         std::move(loudest_tract),
                         std::move(source_audio_id),
                         voiced_fraction,
                         voiced_fraction < config.min_voiced_fraction};
}

FeatureVector excitation_vector_estimated(const GlottalEstimate& g, const FramePlan& plan,
                                          const LldConfig& config) {
  auto v = is09_vector(extract_lld(g.flow, plan, config), Modality::ExcitationEstimated);
  v.set_utterance_id(g.source_audio_id);
  return v;
}

}  // namespace sermm
