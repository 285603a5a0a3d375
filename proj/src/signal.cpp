#include "sermm/signal.hpp"

#include <cmath>
#include <numbers>

#include "sermm/errors.hpp"

namespace sermm {

std::string_view to_string(WaveKind kind) {
  switch (kind) {
    case WaveKind::Audio:
      return "audio";
    case WaveKind::Egg:
      return "egg";
    case WaveKind::GlottalFlow:
      return "glottal_flow";
  }
  return "unknown";
}

Waveform::Waveform(std::vector<double> samples, double sample_rate_hz, WaveKind kind)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), kind_(kind) {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw ParameterError("sample rate must be positive");
  }
}

FramePlan::FramePlan(double frame_len_s, double shift_s)
    : frame_len_s_(frame_len_s), shift_s_(shift_s) {
  if (!(shift_s > 0.0) || !(shift_s <= frame_len_s)) {
    throw ParameterError("frame plan requires 0 < shift <= frame length");
  }
}

std::size_t FramePlan::frame_len_samples(double sample_rate_hz) const {
  return static_cast<std::size_t>(std::llround(frame_len_s_ * sample_rate_hz));
}

std::size_t FramePlan::shift_samples(double sample_rate_hz) const {
  const auto s = static_cast<std::size_t>(std::llround(shift_s_ * sample_rate_hz));
  return s == 0 ? 1 : s;
}

std::size_t FramePlan::frame_count(std::size_t n, double sample_rate_hz) const {
  const std::size_t len = frame_len_samples(sample_rate_hz);
  const std::size_t shift = shift_samples(sample_rate_hz);
  if (len == 0 || n < len) return 0;
  return (n - len) / shift + 1;
}

std::vector<Frame> frame_signal(const Waveform& w, const FramePlan& plan) {
  const double fs = w.sample_rate_hz();
  const std::size_t len = plan.frame_len_samples(fs);
  const std::size_t shift = plan.shift_samples(fs);
  if (len == 0) throw ParameterError("frame length rounds to zero samples");
  if (w.size() < len) throw TooShortError(len, w.size());

  const std::size_t count = plan.frame_count(w.size(), fs);
  const auto samples = w.samples();
  std::vector<Frame> frames;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * shift;
    frames.push_back(Frame{start, std::vector<double>(samples.begin() + start,
                                                      samples.begin() + start + len)});
  }
  return frames;
}

std::vector<double> window_coefficients(Window window, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (window == Window::Hamming && length > 1) {
    const double denom = static_cast<double>(length - 1);
    for (std::size_t n = 0; n < length; ++n) {
      w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
    }
  }
  return w;
}

Frame apply_window(const Frame& f, Window window) {
  if (window == Window::Rectangular) return f;
  const auto w = window_coefficients(window, f.values.size());
  Frame out{f.start_sample, f.values};
  for (std::size_t n = 0; n < out.values.size(); ++n) out.values[n] *= w[n];
  return out;
}

Waveform pre_emphasize(const Waveform& w, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ParameterError("pre-emphasis alpha must lie in [0, 1)");
  }
  const auto x = w.samples();
  std::vector<double> y(x.size());
  if (!x.empty()) y[0] = x[0];
  for (std::size_t n = 1; n < x.size(); ++n) y[n] = x[n] - alpha * x[n - 1];
  return Waveform(std::move(y), w.sample_rate_hz(), w.kind());
}

}  // namespace sermm
