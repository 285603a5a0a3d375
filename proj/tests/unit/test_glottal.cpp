#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "glottal_eval.hpp"
#include "sermm/errors.hpp"
#include "sermm/iaif.hpp"
#include "sermm/lf_model.hpp"
#include "sermm/lpc.hpp"
#include "test_support.hpp"

using namespace sermm;

namespace {

// Step-up recursion from reflection coefficients; |k| < 1 gives a stable model.
LpcModel from_reflection(const std::vector<double>& k) {
  std::vector<double> a;
  for (double ki : k) {
    std::vector<double> next(a.size() + 1);
    for (std::size_t j = 0; j < a.size(); ++j) next[j] = a[j] + ki * a[a.size() - 1 - j];
    next[a.size()] = ki;
    a = std::move(next);
  }
  return LpcModel{a, 1.0};
}

double amplitude_at(std::span<const double> x, double hz, double fs) {
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    acc += x[n] * std::polar(1.0, -2.0 * std::numbers::pi * hz * double(n) / fs);
  }
  return std::abs(acc);
}

}  // namespace

TEST_CASE("lpc recovers an AR(2) process") {
  Rng rng(42);
  std::vector<double> y(200000, 0.0);
  for (std::size_t n = 2; n < y.size(); ++n) y[n] = 0.5 * y[n - 1] - 0.3 * y[n - 2] + rng.normal();
  const LpcModel m = lpc(y, 2);
  REQUIRE(m.order() == 2);
  CHECK(m.coefficients[0] == doctest::Approx(-0.5).epsilon(0.1));
  CHECK(std::abs(m.coefficients[0] + 0.5) <= 0.05);
  CHECK(std::abs(m.coefficients[1] - 0.3) <= 0.05);
}

TEST_CASE("order-1 lpc is -r1/r0") {
  Rng rng(3);
  std::vector<double> x(500);
  for (std::size_t n = 0; n < x.size(); ++n) x[n] = 0.01 * double(n) + rng.normal(0.0, 0.1);
  double r0 = 0.0, r1 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    r0 += x[n] * x[n];
    if (n + 1 < x.size()) r1 += x[n] * x[n + 1];
  }
  CHECK(lpc(x, 1).coefficients[0] == doctest::Approx(-r1 / r0).epsilon(1e-12));
}

TEST_CASE("lpc output is minimum phase") {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = testing::random_vector(rng, 400);
    const auto m = lpc(x, 1 + rng.below(20));
    CHECK(is_minimum_phase(m));
    for (const auto& p : poles(m)) CHECK(std::abs(p) < 1.0);
  }
  CHECK_THROWS_AS(lpc(std::vector<double>(100, 0.0), 4), DataError);
}

TEST_CASE("stabilize reflects outside poles") {
  // (1 - 2z^-1): pole at 2 moves to 0.5.
  const LpcModel unstable{{-2.0}, 1.0};
  CHECK_FALSE(is_minimum_phase(unstable));
  const auto s = stabilize(unstable);
  CHECK(is_minimum_phase(s));
  CHECK(s.coefficients[0] == doctest::Approx(-0.5));
}

TEST_CASE("inverse filtering undoes all-pole synthesis") {
  const LpcModel tract = from_reflection({0.6, -0.4, 0.3});
  std::vector<double> impulse(64, 0.0);
  impulse[0] = 1.0;
  const auto back = inverse_filter(all_pole_filter(impulse, tract), tract);
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(std::abs(back[i] - impulse[i]) <= 1e-9);

  Rng rng(5);
  const auto x = testing::random_vector(rng, 300);
  const LpcModel identity{std::vector<double>(6, 0.0), 1.0};
  CHECK(inverse_filter(x, identity) == x);
  CHECK(all_pole_filter(x, identity) == x);

  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> k(1 + rng.below(16));
    for (double& v : k) v = rng.uniform(-0.9, 0.9);
    const LpcModel m = from_reflection(k);
    CHECK(is_minimum_phase(m));
    const auto rk = reflection_coefficients(m);
    for (std::size_t i = 0; i < k.size(); ++i) CHECK(rk[i] == doctest::Approx(k[i]).epsilon(1e-9));
    const auto round = inverse_filter(all_pole_filter(x, m), m);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err += (round[i] - x[i]) * (round[i] - x[i]);
    CHECK(std::sqrt(err / double(x.size())) < 1e-9);
  }
}

TEST_CASE("LF pulse") {
  const LfPulse p;
  CHECK(p.te() > p.tp());
  CHECK(p.flow(0.0) == doctest::Approx(0.0));
  CHECK(std::abs(p.flow(1.0 - 1e-9)) < 1e-6);
  CHECK(p.derivative(p.te()) == doctest::Approx(-1.0).epsilon(1e-6));
  double lowest = 0.0;
  for (int i = 0; i < 10000; ++i) lowest = std::min(lowest, p.derivative(i / 10000.0));
  CHECK(lowest >= -1.0 - 1e-6);
}

TEST_CASE("synthetic vowel") {
  const std::vector<double> formants{800.0, 1200.0, 2500.0};
  const auto v = synthesize_lf_vowel(100.0, formants, 0.5, 48000.0, 1);
  CHECK(v.audio.size() == 24000);
  CHECK(v.flow.size() == 24000);
  CHECK(v.audio.kind() == WaveKind::Audio);

  const auto flow = v.flow.samples();
  for (std::size_t i = 0; i + 480 < flow.size(); ++i) {
    CHECK(std::abs(flow[i] - flow[i + 480]) <= 1e-6 * (1.0 + std::abs(flow[i])));
  }

  // Harmonic amplitudes peak at the harmonic on each formant.
  const auto audio = v.audio.samples();
  for (double f : formants) {
    const double here = amplitude_at(audio, f, 48000.0);
    CHECK(here > amplitude_at(audio, f - 100.0, 48000.0));
    CHECK(here > amplitude_at(audio, f + 100.0, 48000.0));
  }

  const auto w = synthesize_lf_vowel(100.0, formants, 0.5, 48000.0, 1);
  CHECK(std::equal(audio.begin(), audio.end(), w.audio.samples().begin()));

  CHECK_THROWS_AS(synthesize_lf_vowel(40.0, formants, 0.5, 48000.0, 1), ParameterError);
  const std::vector<double> too_high{30000.0};
  CHECK_THROWS_AS(synthesize_lf_vowel(100.0, too_high, 0.5, 48000.0, 1), ParameterError);
}

TEST_CASE("iaif on silence gives zero flow") {
  const Waveform zero(std::vector<double>(16000, 0.0), 48000.0, WaveKind::Audio);
  const auto g = iaif(zero);
  for (double v : g.flow.samples()) CHECK(v == 0.0);
  CHECK(g.low_confidence);
}

TEST_CASE("iaif preconditions") {
  const Waveform egg(std::vector<double>(16000, 0.1), 48000.0, WaveKind::Egg);
  CHECK_THROWS_AS(iaif(egg), ParameterError);
  const Waveform tiny(std::vector<double>(100, 0.1), 48000.0, WaveKind::Audio);
  CHECK_THROWS_AS(iaif(tiny), TooShortError);
  CHECK(default_vocal_tract_order(48000.0) == 50);
  CHECK(default_vocal_tract_order(16000.0) == 18);
}

TEST_CASE("iaif recovers the LF source of a three-formant vowel") {
  const std::vector<double> formants{800.0, 1200.0, 2500.0};
  const auto v = synthesize_lf_vowel(120.0, formants, 0.5, 48000.0, 7);
  const auto g = iaif(v.audio, {}, "vowel");
  CHECK(g.source_audio_id == "vowel");
  CHECK_FALSE(g.low_confidence);
  CHECK(g.voiced_fraction > 0.9);
  const auto agree = testing::glottal_agreement(v, g);
  CHECK(agree.derivative >= 0.8);

  const auto features = excitation_vector_estimated(g, FramePlan::standard());
  CHECK(features.dim() == kIs09Dim);
  CHECK(features.modality() == Modality::ExcitationEstimated);
  CHECK(features.utterance_id() == "vowel");
  const std::size_t f0_mean = 2 * kFunctionalCount;
  CHECK(features.names()[f0_mean] == "f0_mean");
  CHECK(std::abs(features.values()[f0_mean] - 120.0) <= 2.0);
}

TEST_CASE("iaif on a bare pulse train") {
  const auto v = synthesize_lf_vowel(120.0, {}, 0.5, 48000.0, 9);
  const auto g = iaif(v.audio);
  CHECK(testing::glottal_agreement(v, g).flow >= 0.95);
}

TEST_CASE("iaif scales linearly") {
  const std::vector<double> formants{600.0, 1500.0, 2700.0};
  const auto v = synthesize_lf_vowel(150.0, formants, 0.3, 16000.0, 3);
  std::vector<double> louder(v.audio.samples().begin(), v.audio.samples().end());
  for (double& x : louder) x *= 0.25;
  const auto a = iaif(v.audio);
  const auto b = iaif(Waveform(louder, 16000.0, WaveKind::Audio));
  double peak = 0.0;
  for (double x : a.flow.samples()) peak = std::max(peak, std::abs(x));
  for (std::size_t i = 0; i < a.flow.size(); ++i) {
    CHECK(std::abs(0.25 * a.flow.samples()[i] - b.flow.samples()[i]) <= 1e-9 * peak);
  }
}

TEST_CASE("leaky integration and high-pass") {
  const std::vector<double> x{1.0, 0.0, 0.0, 0.0};
  const auto y = leaky_integrate(x, 0.5);
  CHECK(y == std::vector<double>{1.0, 0.5, 0.25, 0.125});

  const std::vector<double> dc(4000, 1.0);
  const auto hp = zero_phase_highpass(dc, 70.0, 16000.0);
  CHECK(std::abs(hp[2000]) < 1e-3);
  const auto s = testing::sine(1000.0, 16000.0, 4000);
  const auto hs = zero_phase_highpass(s, 70.0, 16000.0);
  CHECK(hs[2000] == doctest::Approx(s[2000]).epsilon(1e-2));
  CHECK_THROWS_AS(zero_phase_highpass(s, 9000.0, 16000.0), ParameterError);
}
