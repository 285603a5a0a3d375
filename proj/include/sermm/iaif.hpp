#pragma once

// Glottal flow estimation by iterative adaptive inverse filtering (IAIF).

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sermm/functionals.hpp"
#include "sermm/lpc.hpp"
#include "sermm/signal.hpp"

namespace sermm {

struct IaifConfig {
  double highpass_hz = 70.0;
  double frame_len_s = 0.032;
  double shift_s = 0.016;
  /// 0 selects round(fs / 1000) + 2.
  std::size_t vocal_tract_order = 0;
  std::size_t glottal_order = 4;
  /// Integrator leak used inside the iterations.
  double leak = 0.99;
  /// Corner frequency of the leaky integrator that turns the final
  /// derivative estimate into flow; independent of the sample rate.
  double flow_corner_hz = 5.0;
  /// Gaussian lag-window bandwidth for the vocal tract fits, in Hz. Damps
  /// the harmonic bias of pitch-asynchronous LPC on high-pitched voices.
  double lag_window_hz = 80.0;
  /// Below this voiced-frame fraction the estimate is flagged low-confidence.
  double min_voiced_fraction = 0.1;
};

std::size_t default_vocal_tract_order(double sample_rate_hz);

struct GlottalEstimate {
  Waveform flow;
  Waveform flow_derivative;
  /// Vocal tract model of the most energetic analysis frame.
  LpcModel vocal_tract;
  std::string source_audio_id;
  double voiced_fraction = 0.0;
  bool low_confidence = false;
};

/// y[n] = x[n] + leak * y[n-1].
std::vector<double> leaky_integrate(std::span<const double> x, double leak);

/// Second-order Butterworth high-pass run forward and backward (zero phase).
std::vector<double> zero_phase_highpass(std::span<const double> x, double cutoff_hz,
                                        double sample_rate_hz);

/// Two-pass IAIF per analysis frame with Hann overlap-add. Requires Audio
/// input spanning at least two analysis frames.
GlottalEstimate iaif(const Waveform& w, const IaifConfig& config = {},
                     std::string source_audio_id = {});

/// The 384-dim IS09 vector of the estimated flow.
FeatureVector excitation_vector_estimated(const GlottalEstimate& g, const FramePlan& plan,
                                          const LldConfig& config = {});

}  // namespace sermm
