#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sermm {

enum class WaveKind { Audio, Egg, GlottalFlow };

std::string_view to_string(WaveKind kind);

/// Uniformly sampled mono signal. Samples are nominally in [-1, 1].
class Waveform {
 public:
  Waveform(std::vector<double> samples, double sample_rate_hz, WaveKind kind);

  std::span<const double> samples() const noexcept { return samples_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  WaveKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration_s() const noexcept {
    return static_cast<double>(samples_.size()) / sample_rate_hz_;
  }

 private:
  std::vector<double> samples_;
  double sample_rate_hz_;
  WaveKind kind_;
};

/// Frame length and shift in seconds; 0 < shift <= length.
class FramePlan {
 public:
  FramePlan(double frame_len_s, double shift_s);

  /// 20 ms frames with a 10 ms shift.
  static FramePlan standard() { return FramePlan(0.020, 0.010); }

  double frame_len_s() const noexcept { return frame_len_s_; }
  double shift_s() const noexcept { return shift_s_; }

  std::size_t frame_len_samples(double sample_rate_hz) const;
  std::size_t shift_samples(double sample_rate_hz) const;

  /// Number of full frames in n samples (0 if none fit).
  std::size_t frame_count(std::size_t n, double sample_rate_hz) const;

  bool operator==(const FramePlan&) const = default;

 private:
  double frame_len_s_;
  double shift_s_;
};

struct Frame {
  std::size_t start_sample = 0;
  std::vector<double> values;
};

/// Splits w into equal-length frames; the trailing partial frame is dropped.
/// Throws TooShortError when not even one frame fits.
std::vector<Frame> frame_signal(const Waveform& w, const FramePlan& plan);

enum class Window { Hamming, Rectangular };

std::vector<double> window_coefficients(Window window, std::size_t length);
Frame apply_window(const Frame& f, Window window);

/// y[n] = x[n] - alpha * x[n-1], y[0] = x[0]; requires 0 <= alpha < 1.
Waveform pre_emphasize(const Waveform& w, double alpha);

inline constexpr double kDefaultPreEmphasis = 0.97;

}  // namespace sermm
