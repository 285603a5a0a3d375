#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sermm/lld.hpp"

namespace sermm {

enum class Modality { Speech, Excitation, Articulatory, ExcitationEstimated, ArticulatoryEstimated };

inline constexpr std::array<Modality, 5> kAllModalities = {
    Modality::Speech, Modality::Excitation, Modality::Articulatory,
    Modality::ExcitationEstimated, Modality::ArticulatoryEstimated};

std::string_view to_string(Modality m);
std::optional<Modality> parse_modality(std::string_view text);

/// Position in the canonical fusion order [Speech | Excitation | Articulatory];
/// estimated variants share the slot of their ground-truth kind.
int canonical_slot(Modality m);

inline constexpr std::size_t kIs09Dim = 384;
inline constexpr std::size_t kEmaDim = 197;

/// Expected feature dimension of a single-modality vector.
std::size_t modality_dim(Modality m);

/// Fixed-length per-utterance feature vector. Values are always finite.
class FeatureVector {
 public:
  FeatureVector(std::vector<double> values, std::vector<std::string> names,
                std::vector<Modality> modalities, std::string utterance_id = {});

  std::span<const double> values() const noexcept { return values_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  /// One entry for single-modality vectors; several after fusion, in canonical order.
  const std::vector<Modality>& modalities() const noexcept { return modalities_; }
  Modality modality() const { return modalities_.front(); }
  std::size_t dim() const noexcept { return values_.size(); }
  const std::string& utterance_id() const noexcept { return utterance_id_; }
  void set_utterance_id(std::string id) { utterance_id_ = std::move(id); }

 private:
  std::vector<double> values_;
  std::vector<std::string> names_;
  std::vector<Modality> modalities_;
  std::string utterance_id_;
};

inline constexpr std::size_t kFunctionalCount = 12;

/// Output order of apply_functionals. Frozen.
inline constexpr std::array<std::string_view, kFunctionalCount> kFunctionalNames = {
    "mean",   "stddev", "kurtosis", "skewness",      "min",          "max",
    "minpos", "maxpos", "range",    "linreg_offset", "linreg_slope", "linreg_mse"};

inline constexpr std::string_view kFunctionalTableVersion = "is09-functionals-v1";

/// The 12 utterance-level statistics of one contour. Standard deviation is
/// the population value; kurtosis is excess kurtosis; both higher moments
/// are 0 for a constant contour. Regression runs over the frame index.
std::array<double, kFunctionalCount> apply_functionals(std::span<const double> contour);

/// 32 LLD columns x 12 functionals = 384 values, descriptor-major.
FeatureVector is09_vector(const LldMatrix& m, Modality modality);

Modality modality_for(WaveKind kind);

/// Ground-truth waveform pipeline: extract_lld followed by is09_vector.
FeatureVector waveform_vector(const Waveform& w, const FramePlan& plan,
                              const LldConfig& config = {});

}  // namespace sermm
