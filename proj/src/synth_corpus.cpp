#include "sermm/synth_corpus.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "sermm/ema_csv.hpp"
#include "sermm/emotion.hpp"
#include "sermm/errors.hpp"
#include "sermm/lf_model.hpp"
#include "sermm/pipeline.hpp"
#include "sermm/rng.hpp"
#include "sermm/wav.hpp"

namespace sermm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SpeakerTraits {
  double f0_hz;
  std::array<double, kEmaChannels> rest;
};

struct UtterancePlan {
  std::string id;
  std::string speaker;
  int speaker_index;
  std::string sentence;
  int label;
  std::array<int, 3> bits;
  std::uint64_t seed;
};

// Neutral articulator positions (x forward, y left, z up), in mm.
constexpr std::array<double, kEmaChannels> kRestPose = {
    10.0, 0.0,  6.0,    // UL
    9.0,  0.0,  -6.0,   // LL
    4.0,  22.0, 0.0,    // LC
    4.0,  -22.0, 0.0,   // RC
    -5.0, 0.0,  -2.0,   // TT
    -25.0, 0.0, 4.0,    // TB
    -45.0, 0.0, -2.0};  // TR

Waveform make_audio(const SyntheticSpec& spec, const SpeakerTraits& sp, int bit, Rng& rng) {
  const double f0 = sp.f0_hz * (bit ? 1.45 : 1.0) * (1.0 + 0.04 * rng.normal());
  const std::array<double, 3> formants = {rng.uniform(300.0, 900.0), rng.uniform(900.0, 2000.0),
                                          rng.uniform(2200.0, 3500.0)};
  const SyntheticVowel v =
      synthesize_lf_vowel(f0, formants, spec.duration_s, spec.audio_rate_hz, rng.next_u64());
  const double am_rate = (bit ? 8.0 : 3.0) * (1.0 + 0.05 * rng.normal());
  const double phase = rng.uniform(0.0, kTwoPi);
  std::vector<double> x(v.audio.samples().begin(), v.audio.samples().end());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double t = static_cast<double>(n) / spec.audio_rate_hz;
    x[n] = x[n] * (1.0 + 0.6 * std::sin(kTwoPi * am_rate * t + phase)) / 1.6 + 1e-3 * rng.normal();
  }
  return Waveform(std::move(x), spec.audio_rate_hz, WaveKind::Audio);
}

Waveform make_egg(const SyntheticSpec& spec, const SpeakerTraits& sp, int bit, Rng& rng) {
  const double f0 = sp.f0_hz * (1.0 + 0.04 * rng.normal());
  const double open_quotient = (bit ? 0.70 : 0.35) + 0.02 * rng.normal();
  const double closed = 1.0 - open_quotient;
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * spec.egg_rate_hz));
  std::vector<double> x(n);
  double phase = rng.uniform();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = phase < closed ? std::sin(std::numbers::pi * phase / closed) : 0.0;
    mean += x[i];
    phase += f0 / spec.egg_rate_hz;
    phase -= std::floor(phase);
  }
  mean /= static_cast<double>(n);
  for (double& v : x) v = 0.5 * (v - mean) + 2e-3 * rng.normal();
  return Waveform(std::move(x), spec.egg_rate_hz, WaveKind::Egg);
}

Matrix make_ema(const SyntheticSpec& spec, const SpeakerTraits& sp, int bit, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * spec.ema_rate_hz));
  Matrix p(n, kEmaChannels);
  const double aperture = (bit ? 14.0 : 8.0) + 0.8 * rng.normal();
  const double tip_amp = (bit ? 5.0 : 2.0) * (1.0 + 0.1 * rng.normal());
  const double rate = rng.uniform(3.0, 5.0);
  const double phase = rng.uniform(0.0, kTwoPi);
  const double body_amp = rng.uniform(1.0, 3.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.ema_rate_hz;
    const double s = std::sin(kTwoPi * rate * t + phase);
    const double c = std::cos(kTwoPi * rate * t + phase);
    for (std::size_t col = 0; col < kEmaChannels; ++col) p(i, col) = sp.rest[col];
    const double open = 0.5 * aperture * (1.0 + 0.3 * s);
    p(i, ema_column(Articulator::UL, Axis::Z)) += open;
    p(i, ema_column(Articulator::LL, Axis::Z)) -= open;
    p(i, ema_column(Articulator::LL, Axis::X)) += 0.8 * c;
    p(i, ema_column(Articulator::TT, Axis::X)) += tip_amp * s;
    p(i, ema_column(Articulator::TT, Axis::Z)) += 0.5 * tip_amp * c;
    p(i, ema_column(Articulator::TB, Axis::X)) += body_amp * c;
    p(i, ema_column(Articulator::TR, Axis::X)) += 0.5 * body_amp * s;
    for (std::size_t col = 0; col < kEmaChannels; ++col) p(i, col) += 0.2 * rng.normal();
  }
  return p;
}

Matrix estimate_ema(const Matrix& truth, double error_mm, Rng& rng) {
  // Moving-average smoothed noise, rescaled to the requested std.
  constexpr std::size_t kSpan = 9;
  const std::size_t n = truth.rows();
  Matrix out = truth;
  std::vector<double> white(n + kSpan);
  for (std::size_t col = 0; col < truth.cols(); ++col) {
    for (double& w : white) w = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kSpan; ++j) acc += white[i + j];
      out(i, col) += error_mm * acc / std::sqrt(static_cast<double>(kSpan));
    }
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (speakers < 1 || speakers > 999) throw ParameterError("speakers must lie in [1, 999]");
  if (sentences < 1 || sentences > 9999) throw ParameterError("sentences must lie in [1, 9999]");
  if (classes != kEmotionCount) throw ParameterError("the synthetic corpus has exactly 7 classes");
  if (!(corruption >= 0.0 && corruption <= 1.0)) throw ParameterError("corruption must lie in [0, 1]");
  if (!(duration_s >= 0.2 && duration_s <= 30.0)) {
    throw ParameterError("duration must lie in [0.2, 30] s");
  }
  if (!(audio_rate_hz >= 8000.0 && egg_rate_hz >= 8000.0)) {
    throw ParameterError("audio and EGG rates must be at least 8 kHz");
  }
  if (!(ema_rate_hz >= 50.0)) throw ParameterError("EMA rate must be at least 50 Hz");
  if (!(estimated_ema_error_mm >= 0.0)) throw ParameterError("estimated EMA error must be >= 0");
}

int label_bit(int label, int slot) { return ((label + 1) >> slot) & 1; }

double single_modality_ceiling(double corruption) {
  // For each bit value the best guess is any label carrying it; summed over
  // both values this gives (2 (1 - q) + q) / 7.
  return (2.0 - corruption) / static_cast<double>(kEmotionCount);
}

Manifest generate_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                                   const std::filesystem::path& dir) {
  spec.validate();
  namespace fs = std::filesystem;
  for (const char* sub : {"audio", "egg", "ema"}) fs::create_directories(dir / sub);
  if (spec.estimated_ema) fs::create_directories(dir / "ema_est");

  Rng rng(seed);
  std::vector<SpeakerTraits> speakers;
  for (int s = 0; s < spec.speakers; ++s) {
    SpeakerTraits sp{rng.uniform(100.0, 140.0), kRestPose};
    for (double& v : sp.rest) v += 2.0 * rng.normal();
    speakers.push_back(sp);
  }

  std::vector<UtterancePlan> plan;
  char buf[64];
  for (int s = 0; s < spec.speakers; ++s) {
    for (int t = 0; t < spec.sentences; ++t) {
      for (int k = 0; k < spec.classes; ++k) {
        UtterancePlan u;
        std::snprintf(buf, sizeof buf, "S%03d", s + 1);
        u.speaker = buf;
        u.speaker_index = s;
        std::snprintf(buf, sizeof buf, "T%04d", t + 1);
        u.sentence = buf;
        u.label = k;
        u.id = u.speaker + "_" + u.sentence + "_" + std::string(kEmotionNames[static_cast<std::size_t>(k)]);
        for (int slot = 0; slot < 3; ++slot) {
          const int seen = rng.uniform() < spec.corruption
                               ? static_cast<int>(rng.below(kEmotionCount))
                               : k;
          u.bits[static_cast<std::size_t>(slot)] = label_bit(seen, slot);
        }
        u.seed = rng.next_u64();
        plan.push_back(std::move(u));
      }
    }
  }

  Manifest manifest;
  manifest.root = dir;
  manifest.entries.resize(plan.size());
  parallel_for(plan.size(), spec.threads, [&](std::size_t i) {
    const UtterancePlan& u = plan[i];
    const SpeakerTraits& sp = speakers[static_cast<std::size_t>(u.speaker_index)];
    Rng local(u.seed);
    ManifestEntry& e = manifest.entries[i];
    e.utterance_id = u.id;
    e.speaker_id = u.speaker;
    e.emotion = std::string(kEmotionNames[static_cast<std::size_t>(u.label)]);
    e.label = u.label;
    e.sentence_id = u.sentence;
    e.audio_path = fs::path("audio") / (u.id + ".wav");
    e.egg_path = fs::path("egg") / (u.id + ".wav");
    e.ema_path = fs::path("ema") / (u.id + ".csv");

    save_wav(dir / e.audio_path, make_audio(spec, sp, u.bits[0], local), WavEncoding::Pcm16);
    save_wav(dir / e.egg_path, make_egg(spec, sp, u.bits[1], local), WavEncoding::Float32);
    const Matrix ema = make_ema(spec, sp, u.bits[2], local);
    save_ema(dir / e.ema_path, EmaRecording(ema, spec.ema_rate_hz, u.id, u.speaker));
    if (spec.estimated_ema) {
      e.estimated_ema_path = fs::path("ema_est") / (u.id + ".csv");
      const Matrix est = estimate_ema(ema, spec.estimated_ema_error_mm, local);
      save_ema(dir / e.estimated_ema_path, EmaRecording(est, spec.ema_rate_hz, u.id, u.speaker));
    }
  });
  save_manifest(dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace sermm
