#pragma once

// Frame-level low-level descriptors (LLDs): the 16 INTERSPEECH 2009
// emotion-challenge contours and their regression deltas.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sermm/signal.hpp"

namespace sermm {

inline constexpr std::size_t kBaseLldCount = 16;
inline constexpr std::size_t kLldCount = 2 * kBaseLldCount;

/// Column order of the base matrix. Frozen: feature indices depend on it.
inline constexpr std::array<std::string_view, kBaseLldCount> kBaseLldNames = {
    "zcr",   "rms",   "f0",    "hnr",    "mfcc1",  "mfcc2",  "mfcc3",  "mfcc4",
    "mfcc5", "mfcc6", "mfcc7", "mfcc8",  "mfcc9",  "mfcc10", "mfcc11", "mfcc12"};

inline constexpr std::string_view kLldTableVersion = "is09-lld-v1";

struct LldConfig {
  double f0_min_hz = 60.0;
  double f0_max_hz = 500.0;
  double voicing_threshold = 0.45;
  int mel_filters = 26;
  int mfcc_coeffs = 12;
  int delta_window = 2;
  double pre_emphasis = kDefaultPreEmphasis;
};

/// Row-major frames x descriptors matrix.
class LldMatrix {
 public:
  LldMatrix(std::size_t frames, std::vector<std::string> names, FramePlan plan);
  LldMatrix(std::vector<double> values, std::vector<std::string> names, FramePlan plan);

  std::size_t frames() const noexcept { return frames_; }
  std::size_t descriptors() const noexcept { return names_.size(); }
  const std::vector<std::string>& descriptor_names() const noexcept { return names_; }
  const FramePlan& frame_plan() const noexcept { return plan_; }
  std::span<const double> values() const noexcept { return values_; }

  double& at(std::size_t frame, std::size_t col) { return values_[frame * names_.size() + col]; }
  double at(std::size_t frame, std::size_t col) const {
    return values_[frame * names_.size() + col];
  }
  std::vector<double> column(std::size_t col) const;

 private:
  std::size_t frames_;
  std::vector<std::string> names_;
  FramePlan plan_;
  std::vector<double> values_;
};

/// Sign changes between consecutive samples over (length - 1). Zero samples
/// keep the sign of the previous nonzero sample.
double zcr(const Frame& f);

double rms_energy(const Frame& f);

/// Autocorrelation pitch in Hz; 0 for unvoiced frames.
double f0_acf(const Frame& f, double sample_rate_hz, double fmin_hz, double fmax_hz,
              double voicing_threshold);

/// Normalized autocorrelation at an integer lag, computed over the
/// overlapping part of the frame. 0 when either part has no energy.
double normalized_autocorrelation(std::span<const double> x, std::size_t lag);

inline constexpr double kHnrClampDb = 100.0;

/// Harmonics-to-noise ratio in dB at the pitch lag, clamped to +-100 dB.
double hnr(const Frame& f, double sample_rate_hz, double f0_hz);

/// Triangular mel filterbank over FFT bins 0..nfft/2 spanning 0 Hz to Nyquist.
class MelFilterbank {
 public:
  MelFilterbank(double sample_rate_hz, std::size_t nfft, int n_filters);

  std::size_t nfft() const noexcept { return nfft_; }
  int filters() const noexcept { return n_filters_; }
  /// Weighted magnitude sums, one per filter.
  std::vector<double> apply(std::span<const double> magnitude) const;

 private:
  struct Band {
    std::size_t first_bin;
    std::vector<double> weights;
  };
  std::size_t nfft_;
  int n_filters_;
  std::vector<Band> bands_;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

inline constexpr double kMelLogFloor = 1e-10;

/// Cepstral coefficients 1..n_coeffs of an already windowed frame.
std::vector<double> mfcc(const Frame& f, double sample_rate_hz, int n_filters, int n_coeffs);
std::vector<double> mfcc(const Frame& f, const MelFilterbank& bank, int n_coeffs);

/// Appends regression deltas, doubling the column count. Edges replicate
/// the first/last frame. Requires at least 2 * window + 1 frames.
LldMatrix delta(const LldMatrix& m, int window = 2);

/// All 16 descriptors per frame followed by their deltas (frames x 32).
LldMatrix extract_lld(const Waveform& w, const FramePlan& plan, const LldConfig& config = {});

}  // namespace sermm
