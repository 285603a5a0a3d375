#pragma once

// Seeded synthetic corpus whose emotion label is split across modalities.
// Label k is coded as the 3-bit number k + 1: bit 0 drives the audio (f0
// level and amplitude-modulation rate), bit 1 the EGG open quotient and
// bit 2 the EMA lip aperture and tongue-tip excursion. Each modality reads
// its bit from its own corrupted copy of the label, which is replaced by a
// uniform draw with probability `corruption`.

#include <cstdint>
#include <filesystem>

#include "sermm/manifest.hpp"

namespace sermm {

struct SyntheticSpec {
  int speakers = 4;
  int sentences = 16;
  int classes = 7;
  double corruption = 0.2;
  double duration_s = 0.5;
  double audio_rate_hz = 16000.0;
  double egg_rate_hz = 16000.0;
  double ema_rate_hz = 250.0;
  bool estimated_ema = true;
  /// Std of the smoothed error added to produce estimated EMA, in mm.
  double estimated_ema_error_mm = 1.5;
  /// Extraction threads; 0 picks the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

/// Bit of label k carried by modality slot 0, 1 or 2.
int label_bit(int label, int slot);

/// Bayes-optimal accuracy of a classifier that sees one modality's bit.
double single_modality_ceiling(double corruption);

/// Writes audio/, egg/, ema/ (and ema_est/) plus manifest.csv under `dir`
/// and returns the manifest. Byte-identical output for equal seeds.
Manifest generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                                   const std::filesystem::path& dir);

}  // namespace sermm
