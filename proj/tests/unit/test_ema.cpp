#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sermm/ema.hpp"
#include "sermm/errors.hpp"
#include "test_support.hpp"

using namespace sermm;

namespace {

EmaRecording random_recording(Rng& rng, std::size_t n, const std::string& speaker = "S1",
                              const std::string& id = "u") {
  Matrix p(n, kEmaChannels);
  for (std::size_t c = 0; c < kEmaChannels; ++c) {
    double v = rng.uniform(-20.0, 20.0);
    for (std::size_t i = 0; i < n; ++i) {
      v += rng.normal(0.0, 0.5);
      p(i, c) = v;
    }
  }
  return EmaRecording(std::move(p), kEmaSampleRateHz, id, speaker);
}

EmaRecording with_track(std::size_t n, Articulator a, Axis axis, const std::vector<double>& v,
                        const std::string& speaker = "S1") {
  Matrix p(n, kEmaChannels, 0.0);
  for (std::size_t i = 0; i < n; ++i) p(i, ema_column(a, axis)) = v[i];
  return EmaRecording(std::move(p), kEmaSampleRateHz, "u", speaker);
}

SpeakerMedians medians_of(const EmaRecording& r) {
  const EmaRecording* one[] = {&r};
  return compute_speaker_medians(one);
}

double population_variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= double(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / double(x.size());
}

}  // namespace

TEST_CASE("derivatives") {
  const std::size_t n = 20;
  SUBCASE("constant") {
    const Matrix p(n, kEmaChannels, 3.0);
    const EmaRecording r(p, 250.0, "u", "s");
    for (double v : differentiate(r, 1).data()) CHECK(v == 0.0);
    for (double v : differentiate(r, 2).data()) CHECK(v == 0.0);
  }
  SUBCASE("ramp") {
    std::vector<double> ramp;
    for (std::size_t i = 0; i < n; ++i) ramp.push_back(2.0 * double(i));
    const auto d = differentiate(with_track(n, Articulator::TT, Axis::Z, ramp), 1);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(d(i, ema_column(Articulator::TT, Axis::Z)) == doctest::Approx(500.0));
    }
  }
  SUBCASE("quadratic") {
    std::vector<double> q;
    for (std::size_t i = 0; i < n; ++i) q.push_back(double(i * i));
    const auto d2 = differentiate(with_track(n, Articulator::LL, Axis::X, q), 2);
    for (std::size_t i = 2; i + 2 < n; ++i) {
      CHECK(d2(i, ema_column(Articulator::LL, Axis::X)) == doctest::Approx(2.0 * 250.0 * 250.0));
    }
  }
  SUBCASE("errors") {
    Rng rng(1);
    CHECK_THROWS_AS(differentiate(random_recording(rng, 2), 1), TooShortError);
    CHECK_THROWS_AS(differentiate(random_recording(rng, 10), 3), ParameterError);
  }
}

TEST_CASE("kinematic functionals") {
  CHECK(kinematic_functionals(Matrix(10, kEmaChannels, 0.0)) == std::vector<double>(84, 0.0));

  Rng rng(12);
  Matrix m(37, kEmaChannels);
  for (double& v : m.data()) v = rng.uniform(-100.0, 100.0);
  const auto f = kinematic_functionals(m);
  REQUIRE(f.size() == kKinematicDim);
  for (std::size_t c = 0; c < kEmaChannels; ++c) {
    const auto col = m.column(c);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= double(col.size());
    const double var = population_variance(col);
    CHECK(f[4 * c] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(f[4 * c + 1] == *std::max_element(col.begin(), col.end()));
    CHECK(f[4 * c + 2] == doctest::Approx(var).epsilon(1e-12));
    CHECK(f[4 * c + 3] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    CHECK(std::abs(f[4 * c + 2] - f[4 * c + 3] * f[4 * c + 3]) <= 1e-9 * std::max(1.0, var));
  }
  CHECK_THROWS_AS(kinematic_functionals(Matrix(5, 3)), DimensionError);
}

TEST_CASE("lip aperture") {
  const std::size_t n = 8;
  Matrix p(n, kEmaChannels, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    p(i, ema_column(Articulator::UL, Axis::X)) = 4.0;
    p(i, ema_column(Articulator::UL, Axis::Y)) = -1.0;
    p(i, ema_column(Articulator::UL, Axis::Z)) = 7.0;
    p(i, ema_column(Articulator::LL, Axis::X)) = 5.0;
    p(i, ema_column(Articulator::LL, Axis::Y)) = 1.0;
    p(i, ema_column(Articulator::LL, Axis::Z)) = 9.0;
  }
  const EmaRecording r(p, 250.0, "u", "s");
  for (double v : lip_aperture(r)) CHECK(v == doctest::Approx(3.0));

  Matrix swapped = p;
  for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
    for (std::size_t i = 0; i < n; ++i) {
      std::swap(swapped(i, ema_column(Articulator::UL, a)), swapped(i, ema_column(Articulator::LL, a)));
    }
  }
  CHECK(lip_aperture(EmaRecording(swapped, 250.0, "u", "s")) == lip_aperture(r));

  for (double v : lip_aperture(EmaRecording(Matrix(n, kEmaChannels, 2.0), 250.0, "u", "s"))) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("lip protrusion and tongue constriction signs") {
  const auto ll = with_track(3, Articulator::LL, Axis::X, {1, 2, 3});
  const auto med = medians_of(ll);
  CHECK(med.ll_x == 2.0);
  CHECK(lip_protrusion(ll, med) == std::vector<double>{-1, 0, 1});

  const auto tt = with_track(3, Articulator::TT, Axis::X, {1, 2, 3});
  const auto tc = tongue_constriction_locations(tt, medians_of(tt));
  CHECK(tc.ttcl == std::vector<double>{1, 0, -1});
  for (double v : tc.tbcl) CHECK(v == 0.0);

  Rng rng(5);
  const auto r = random_recording(rng, 50);
  const auto m = medians_of(r);
  const auto c = tongue_constriction_locations(r, m);
  const auto x = r.track(Articulator::TT, Axis::X);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(c.ttcl[i] + (x[i] - m.tt_x) == 0.0);
}

TEST_CASE("speaker medians pool all utterances") {
  const auto a = with_track(3, Articulator::LL, Axis::X, {1, 2, 3});
  const auto b = with_track(2, Articulator::LL, Axis::X, {10, 11});
  const EmaRecording* both[] = {&a, &b};
  const auto med = compute_speaker_medians(both);
  CHECK(med.ll_x == 3.0);
  CHECK(med.speaker_id == "S1");

  const auto c = with_track(3, Articulator::LL, Axis::X, {5, 5, 5});
  for (double v : lip_protrusion(c, medians_of(c))) CHECK(v == 0.0);

  // Shifting every LL_x of the speaker leaves LP alone.
  const auto shifted = with_track(3, Articulator::LL, Axis::X, {6, 7, 8});
  CHECK(lip_protrusion(shifted, medians_of(shifted)) == lip_protrusion(a, medians_of(a)));

  const auto other = with_track(3, Articulator::LL, Axis::X, {0, 0, 0}, "S2");
  const EmaRecording* mixed[] = {&a, &other};
  CHECK_THROWS_AS(compute_speaker_medians(mixed), ContextError);
  CHECK_THROWS_AS(lip_protrusion(other, med), ContextError);

  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK(median({7.0}) == 7.0);
}

TEST_CASE("VTV features") {
  Rng rng(21);
  const auto r = random_recording(rng, 60);
  const auto t = vtv_track(r, medians_of(r));
  const auto f = vtv_features(t);
  REQUIRE(f.size() == kVtvDim);
  const std::vector<const std::vector<double>*> tracks{&t.la, &t.lp, &t.ttcl, &t.tbcl, &t.trcl};
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& x = *tracks[k];
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= double(x.size());
    const double hi = *std::max_element(x.begin(), x.end());
    const double lo = *std::min_element(x.begin(), x.end());
    const double var = population_variance(x);
    CHECK(f[5 * k] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(f[5 * k + 1] == hi);
    CHECK(f[5 * k + 2] == hi - lo);
    CHECK(f[5 * k + 3] == doctest::Approx(var).epsilon(1e-12));
    CHECK(f[5 * k + 4] == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    if (k > 0) CHECK(f[25 + k - 1] == lo);
  }

  const EmaRecording still(Matrix(30, kEmaChannels, 1.0), 250.0, "u", "S1");
  const auto g = vtv_features(vtv_track(still, medians_of(still)));
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(g[5 * k + 2] == 0.0);
    CHECK(g[5 * k + 3] == 0.0);
    CHECK(g[5 * k + 4] == 0.0);
  }
}

TEST_CASE("EMA vector") {
  Rng rng(33);
  const auto r = random_recording(rng, 125);
  const auto v = ema_vector(r, medians_of(r));
  CHECK(v.dim() == kEmaDim);
  CHECK(v.names().size() == kEmaDim);
  CHECK(v.utterance_id() == "u");
  CHECK(v.modality() == Modality::Articulatory);
  CHECK(ema_vector(r, medians_of(r), Modality::ArticulatoryEstimated).modality() ==
        Modality::ArticulatoryEstimated);

  const EmaRecording frozen(Matrix(40, kEmaChannels, 12.5), 250.0, "f", "S1");
  const auto fv = ema_vector(frozen, medians_of(frozen));
  for (std::size_t i = 0; i < 2 * kKinematicDim; ++i) CHECK(fv.values()[i] == 0.0);

  // A constant 3-D offset on every sensor changes nothing. On a 1/64 mm
  // grid the shift is exact, so the features must agree absolutely; off
  // the grid rounding in the offset itself allows a relative 1e-9.
  const double offset[3] = {13.0, -7.5, 42.25};
  auto check_shift = [&](const EmaRecording& base, bool absolute) {
    Matrix moved = base.positions();
    for (std::size_t i = 0; i < moved.rows(); ++i) {
      for (std::size_t c = 0; c < kEmaChannels; ++c) moved(i, c) += offset[c % 3];
    }
    const EmaRecording rm(moved, 250.0, "u", "S1");
    const auto a = ema_vector(base, medians_of(base));
    const auto b = ema_vector(rm, medians_of(rm));
    for (std::size_t i = 0; i < kEmaDim; ++i) {
      INFO(a.names()[i]);
      const double tol = absolute ? 1e-9 : 1e-9 * std::max(1.0, std::abs(a.values()[i]));
      CHECK(std::abs(b.values()[i] - a.values()[i]) <= tol);
    }
  };
  check_shift(r, false);
  Matrix grid = r.positions();
  for (double& x : grid.data()) x = std::round(x * 64.0) / 64.0;
  check_shift(EmaRecording(grid, 250.0, "u", "S1"), true);
}
