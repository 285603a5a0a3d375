#include "sermm/functionals.hpp"

#include <algorithm>
#include <cmath>

#include "sermm/errors.hpp"

namespace sermm {

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Speech:
      return "speech";
    case Modality::Excitation:
      return "excitation";
    case Modality::Articulatory:
      return "articulatory";
    case Modality::ExcitationEstimated:
      return "excitation_est";
    case Modality::ArticulatoryEstimated:
      return "articulatory_est";
  }
  return "unknown";
}

std::optional<Modality> parse_modality(std::string_view text) {
  for (Modality m : kAllModalities) {
    if (to_string(m) == text) return m;
  }
  if (text == "egg") return Modality::Excitation;
  if (text == "ema") return Modality::Articulatory;
  if (text == "glottal" || text == "egg_est") return Modality::ExcitationEstimated;
  if (text == "ema_est") return Modality::ArticulatoryEstimated;
  return std::nullopt;
}

int canonical_slot(Modality m) {
  switch (m) {
    case Modality::Speech:
      return 0;
    case Modality::Excitation:
    case Modality::ExcitationEstimated:
      return 1;
    case Modality::Articulatory:
    case Modality::ArticulatoryEstimated:
      return 2;
  }
  return 3;
}

std::size_t modality_dim(Modality m) {
  return canonical_slot(m) == 2 ? kEmaDim : kIs09Dim;
}

FeatureVector::FeatureVector(std::vector<double> values, std::vector<std::string> names,
                             std::vector<Modality> modalities, std::string utterance_id)
    : values_(std::move(values)),
      names_(std::move(names)),
      modalities_(std::move(modalities)),
      utterance_id_(std::move(utterance_id)) {
  if (modalities_.empty()) throw ParameterError("feature vector needs a modality");
  if (names_.size() != values_.size()) {
    throw DimensionError("feature names and values differ in length");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvariantError("feature vector contains a non-finite value");
  }
}

std::array<double, kFunctionalCount> apply_functionals(std::span<const double> contour) {
  if (contour.empty()) throw ParameterError("functionals need a non-empty contour");
  const std::size_t n = contour.size();
  const auto nd = static_cast<double>(n);

  double sum = 0.0;
  for (double v : contour) sum += v;
  const double mean = sum / nd;

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : contour) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  const double stddev = std::sqrt(m2);

  // Rounding leaves a tiny residual variance on constant contours; treat
  // anything at that level as constant so the higher moments stay at 0.
  double max_abs = 0.0;
  for (double v : contour) max_abs = std::max(max_abs, std::abs(v));
  const bool flat = stddev <= 1e-12 * max_abs;
  const double skewness = flat ? 0.0 : m3 / (m2 * stddev);
  const double kurtosis = flat ? 0.0 : m4 / (m2 * m2) - 3.0;

  const auto [min_it, max_it] = std::minmax_element(contour.begin(), contour.end());
  // minmax_element reports the last maximum; the first occurrence is wanted.
  const auto first_max = std::max_element(contour.begin(), contour.end());
  const double lo = *min_it;
  const double hi = *max_it;
  const double span_len = n > 1 ? nd - 1.0 : 1.0;
  const double minpos = n > 1 ? static_cast<double>(min_it - contour.begin()) / span_len : 0.0;
  const double maxpos = n > 1 ? static_cast<double>(first_max - contour.begin()) / span_len : 0.0;

  double slope = 0.0;
  double offset = mean;
  double mse = 0.0;
  if (n > 1) {
    const double xbar = (nd - 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dx = static_cast<double>(i) - xbar;
      sxy += dx * (contour[i] - mean);
      sxx += dx * dx;
    }
    slope = flat ? 0.0 : sxy / sxx;
    offset = mean - slope * xbar;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = contour[i] - (offset + slope * static_cast<double>(i));
      mse += e * e;
    }
    mse = flat ? 0.0 : mse / nd;
  }

  return {mean, stddev, kurtosis, skewness, lo, hi, minpos, maxpos, hi - lo, offset, slope, mse};
}

FeatureVector is09_vector(const LldMatrix& m, Modality modality) {
  if (m.descriptors() != kLldCount) {
    throw DimensionError("is09 vector needs 32 LLD columns, got " +
                         std::to_string(m.descriptors()));
  }
  if (m.frames() == 0) throw ParameterError("is09 vector needs at least one frame");
  std::vector<double> values;
  std::vector<std::string> names;
  values.reserve(kIs09Dim);
  names.reserve(kIs09Dim);
  for (std::size_t c = 0; c < kLldCount; ++c) {
    const auto contour = m.column(c);
    const auto stats = apply_functionals(contour);
    for (std::size_t k = 0; k < kFunctionalCount; ++k) {
      values.push_back(stats[k]);
      names.push_back(m.descriptor_names()[c] + "_" + std::string(kFunctionalNames[k]));
    }
  }
  return FeatureVector(std::move(values), std::move(names), {modality});
}

Modality modality_for(WaveKind kind) {
  switch (kind) {
    case WaveKind::Audio:
      return Modality::Speech;
    case WaveKind::Egg:
      return Modality::Excitation;
    case WaveKind::GlottalFlow:
      return Modality::ExcitationEstimated;
  }
  return Modality::Speech;
}

FeatureVector waveform_vector(const Waveform& w, const FramePlan& plan, const LldConfig& config) {
  return is09_vector(extract_lld(w, plan, config), modality_for(w.kind()));
}

}  // namespace sermm
