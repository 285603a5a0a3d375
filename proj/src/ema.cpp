#include "sermm/ema.hpp"

#include <algorithm>
#include <cmath>

namespace sermm {

EmaRecording::EmaRecording(Matrix positions, double sample_rate_hz, std::string utterance_id,
                           std::string speaker_id)
    : positions_(std::move(positions)),
      sample_rate_hz_(sample_rate_hz),
      utterance_id_(std::move(utterance_id)),
      speaker_id_(std::move(speaker_id)) {
  if (positions_.cols() != kEmaChannels) {
    throw DimensionError("EMA recording needs 21 position columns, got " +
                         std::to_string(positions_.cols()));
  }
  if (!(sample_rate_hz_ > 0.0)) throw ParameterError("EMA sample rate must be positive");
}

double median(std::vector<double> values) {
  if (values.empty()) throw ParameterError("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower =
      *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

SpeakerMedians compute_speaker_medians(std::span<const EmaRecording* const> recordings) {
  if (recordings.empty()) throw ParameterError("speaker medians need at least one recording");
  const std::string& speaker = recordings.front()->speaker_id();
  std::vector<double> ll, tt, tb, tr;
  for (const EmaRecording* r : recordings) {
    if (r->speaker_id() != speaker) {
      throw ContextError("recordings of speakers '" + speaker + "' and '" + r->speaker_id() +
                         "' mixed in one median");
    }
    for (std::size_t n = 0; n < r->samples(); ++n) {
      ll.push_back(r->at(n, Articulator::LL, Axis::X));
      tt.push_back(r->at(n, Articulator::TT, Axis::X));
      tb.push_back(r->at(n, Articulator::TB, Axis::X));
      tr.push_back(r->at(n, Articulator::TR, Axis::X));
    }
  }
  return SpeakerMedians{speaker, median(std::move(ll)), median(std::move(tt)),
                        median(std::move(tb)), median(std::move(tr))};
}

std::map<std::string, SpeakerMedians> compute_all_speaker_medians(
    std::span<const EmaRecording> corpus) {
  std::map<std::string, std::vector<const EmaRecording*>> by_speaker;
  for (const auto& r : corpus) by_speaker[r.speaker_id()].push_back(&r);
  std::map<std::string, SpeakerMedians> out;
  for (const auto& [speaker, recs] : by_speaker) {
    out.emplace(speaker, compute_speaker_medians(recs));
  }
  return out;
}

namespace {

Matrix central_difference(const Matrix& p, double fs) {
  const std::size_t n = p.rows();
  Matrix d(n, p.cols());
  for (std::size_t c = 0; c < p.cols(); ++c) {
    d(0, c) = (p(1, c) - p(0, c)) * fs;
    d(n - 1, c) = (p(n - 1, c) - p(n - 2, c)) * fs;
    for (std::size_t i = 1; i + 1 < n; ++i) d(i, c) = (p(i + 1, c) - p(i - 1, c)) * fs / 2.0;
  }
  return d;
}

void check_speaker(const EmaRecording& r, const SpeakerMedians& med) {
  if (r.speaker_id() != med.speaker_id) {
    throw ContextError("medians of speaker '" + med.speaker_id + "' applied to utterance '" +
                       r.utterance_id() + "' of speaker '" + r.speaker_id() + "'");
  }
}

struct Moments {
  double mean;
  double max;
  double min;
  double variance;
};

Moments moments(std::span<const double> x) {
  double sum = 0.0;
  double hi = x.front(), lo = x.front();
  for (double v : x) {
    sum += v;
    hi = std::max(hi, v);
    lo = std::min(lo, v);
  }
  const double mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, hi, lo, ss / static_cast<double>(x.size())};
}

}  // namespace

Matrix differentiate(const EmaRecording& r, int order) {
  if (order != 1 && order != 2) throw ParameterError("derivative order must be 1 or 2");
  if (r.samples() < 3) throw TooShortError(3, r.samples());
  Matrix d = central_difference(r.positions(), r.sample_rate_hz());
  if (order == 2) d = central_difference(d, r.sample_rate_hz());
  return d;
}

std::vector<double> kinematic_functionals(const Matrix& deriv) {
  if (deriv.cols() != kEmaChannels) {
    throw DimensionError("kinematic functionals need 21 columns, got " +
                         std::to_string(deriv.cols()));
  }
  if (deriv.rows() == 0) throw ParameterError("kinematic functionals need at least one row");
  std::vector<double> out;
  out.reserve(kKinematicDim);
  for (std::size_t c = 0; c < deriv.cols(); ++c) {
    const auto col = deriv.column(c);
    const Moments m = moments(col);
    out.insert(out.end(), {m.mean, m.max, m.variance, std::sqrt(m.variance)});
  }
  return out;
}

std::vector<double> lip_aperture(const EmaRecording& r) {
  std::vector<double> la(r.samples());
  for (std::size_t n = 0; n < r.samples(); ++n) {
    const double x = r.at(n, Articulator::LL, Axis::X) - r.at(n, Articulator::UL, Axis::X);
    const double y = r.at(n, Articulator::LL, Axis::Y) - r.at(n, Articulator::UL, Axis::Y);
    const double z = r.at(n, Articulator::LL, Axis::Z) - r.at(n, Articulator::UL, Axis::Z);
    la[n] = std::sqrt(x * x + y * y + z * z);
  }
  return la;
}

std::vector<double> lip_protrusion(const EmaRecording& r, const SpeakerMedians& med) {
  check_speaker(r, med);
  auto lp = r.track(Articulator::LL, Axis::X);
  for (double& v : lp) v -= med.ll_x;
  return lp;
}

TongueConstrictions tongue_constriction_locations(const EmaRecording& r,
                                                  const SpeakerMedians& med) {
  check_speaker(r, med);
  auto flip = [](std::vector<double> x, double ref) {
    for (double& v : x) v = ref - v;
    return x;
  };
  return {flip(r.track(Articulator::TT, Axis::X), med.tt_x),
          flip(r.track(Articulator::TB, Axis::X), med.tb_x),
          flip(r.track(Articulator::TR, Axis::X), med.tr_x)};
}

VtvTrack vtv_track(const EmaRecording& r, const SpeakerMedians& med) {
  auto tongue = tongue_constriction_locations(r, med);
  return {lip_aperture(r), lip_protrusion(r, med), std::move(tongue.ttcl),
          std::move(tongue.tbcl), std::move(tongue.trcl)};
}

std::vector<double> vtv_features(const VtvTrack& t) {
  const std::array<const std::vector<double>*, 5> tracks = {&t.la, &t.lp, &t.ttcl, &t.tbcl,
                                                            &t.trcl};
  for (const auto* tr : tracks) {
    if (tr->empty()) throw ParameterError("VTV features need a non-empty track");
    if (tr->size() != t.la.size()) throw DimensionError("VTV tracks differ in length");
  }
  std::vector<double> out;
  out.reserve(kVtvDim);
  for (const auto* tr : tracks) {
    const Moments m = moments(*tr);
    out.insert(out.end(), {m.mean, m.max, m.max - m.min, m.variance, std::sqrt(m.variance)});
  }
  for (std::size_t i = 1; i < tracks.size(); ++i) out.push_back(moments(*tracks[i]).min);
  return out;
}

std::vector<std::string> ema_feature_names() {
  static constexpr std::array<std::string_view, 3> kAxes = {"x", "y", "z"};
  static constexpr std::array<std::string_view, 4> kStats = {"mean", "max", "var", "std"};
  static constexpr std::array<std::string_view, 5> kVtvs = {"LA", "LP", "TTCL", "TBCL", "TRCL"};
  static constexpr std::array<std::string_view, 5> kVtvStats = {"mean", "max", "range", "var",
                                                                "std"};
  std::vector<std::string> names;
  names.reserve(kEmaDim);
  for (std::string_view kind : {"vel", "acc"}) {
    for (auto art : kArticulatorNames) {
      for (auto axis : kAxes) {
        for (auto stat : kStats) {
          names.push_back(std::string(kind) + "_" + std::string(art) + "_" + std::string(axis) +
                          "_" + std::string(stat));
        }
      }
    }
  }
  for (auto v : kVtvs) {
    for (auto stat : kVtvStats) names.push_back(std::string(v) + "_" + std::string(stat));
  }
  for (std::size_t i = 1; i < kVtvs.size(); ++i) names.push_back(std::string(kVtvs[i]) + "_min");
  return names;
}

FeatureVector ema_vector(const EmaRecording& r, const SpeakerMedians& med, Modality modality) {
  check_speaker(r, med);
  auto values = kinematic_functionals(differentiate(r, 1));
  const auto accel = kinematic_functionals(differentiate(r, 2));
  const auto vtv = vtv_features(vtv_track(r, med));
  values.insert(values.end(), accel.begin(), accel.end());
  values.insert(values.end(), vtv.begin(), vtv.end());
  if (values.size() != kEmaDim) throw InvariantError("EMA vector dimension drifted from 197");
  return FeatureVector(std::move(values), ema_feature_names(), {modality}, r.utterance_id());
}

}  // namespace sermm
