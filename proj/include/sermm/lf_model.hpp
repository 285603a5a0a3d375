#pragma once

// Liljencrants-Fant glottal source and a formant vowel synthesizer, used as
// ground truth when checking glottal inverse filtering.

#include <cstdint>
#include <span>
#include <vector>

#include "sermm/signal.hpp"

namespace sermm {

/// LF shape in R-parameters (ratios to the fundamental period).
struct LfShape {
  double ra = 0.01;
  double rk = 0.34;
  double rg = 1.2;
};

/// One LF cycle in normalized time (period 1). The derivative is scaled so
/// that the main excitation Ee (the negative peak at te) equals 1.
class LfPulse {
 public:
  explicit LfPulse(const LfShape& shape = {});

  /// Glottal flow derivative at phase t in [0, 1).
  double derivative(double t) const;
  /// Glottal flow at phase t; 0 at the cycle start and (to rounding) at its end.
  double flow(double t) const;

  double tp() const noexcept { return tp_; }
  double te() const noexcept { return te_; }
  double ta() const noexcept { return ta_; }
  double alpha() const noexcept { return alpha_; }
  double epsilon() const noexcept { return epsilon_; }

 private:
  double tp_, te_, ta_, tc_;
  double omega_;
  double alpha_ = 0.0;
  double epsilon_ = 0.0;
  double e0_ = 1.0;
  double ee_ = 1.0;
  double flow_at_te_ = 0.0;
};

struct SyntheticVowel {
  Waveform audio;
  Waveform flow;
  Waveform flow_derivative;
};

struct VowelOptions {
  LfShape shape{};
  /// Formant bandwidths in Hz; formants beyond the list reuse the last entry.
  std::vector<double> bandwidths_hz{80.0, 100.0, 120.0};
  /// Harmonics-to-noise ratio of the aspiration noise added to the flow
  /// derivative, in dB. Healthy sustained vowels sit around 20 dB.
  double aspiration_hnr_db = 20.0;
};

/// LF pulse train at f0 through cascaded all-pole formant resonators.
/// Requires f0 in [60, 400] Hz and every formant below Nyquist.
SyntheticVowel synthesize_lf_vowel(double f0_hz, std::span<const double> formants_hz,
                                   double duration_s, double sample_rate_hz, std::uint64_t seed,
                                   const VowelOptions& options = {});

}  // namespace sermm
