#pragma once

// Articulatory kinematics from 7-sensor EMA position trajectories:
// velocity/acceleration statistics and the five vocal tract variables.

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sermm/functionals.hpp"
#include "sermm/matrix.hpp"

namespace sermm {

enum class Articulator { UL = 0, LL, LC, RC, TT, TB, TR };
enum class Axis { X = 0, Y, Z };

inline constexpr std::size_t kArticulatorCount = 7;
inline constexpr std::size_t kEmaChannels = 3 * kArticulatorCount;
inline constexpr double kEmaSampleRateHz = 250.0;

inline constexpr std::array<std::string_view, kArticulatorCount> kArticulatorNames = {
    "UL", "LL", "LC", "RC", "TT", "TB", "TR"};

/// Column of (articulator, axis) in the sensor-major, xyz-minor layout.
constexpr std::size_t ema_column(Articulator a, Axis axis) {
  return 3 * static_cast<std::size_t>(a) + static_cast<std::size_t>(axis);
}

/// Position trajectories in mm, one row per EMA sample. The x axis points
/// forward-backward, y left-right and z up-down.
class EmaRecording {
 public:
  EmaRecording(Matrix positions, double sample_rate_hz, std::string utterance_id,
               std::string speaker_id);

  const Matrix& positions() const noexcept { return positions_; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  std::size_t samples() const noexcept { return positions_.rows(); }
  const std::string& utterance_id() const noexcept { return utterance_id_; }
  const std::string& speaker_id() const noexcept { return speaker_id_; }

  double at(std::size_t n, Articulator a, Axis axis) const {
    return positions_(n, ema_column(a, axis));
  }
  std::vector<double> track(Articulator a, Axis axis) const {
    return positions_.column(ema_column(a, axis));
  }

 private:
  Matrix positions_;
  double sample_rate_hz_;
  std::string utterance_id_;
  std::string speaker_id_;
};

/// Per-speaker medians of the x coordinate, pooled over every sample of
/// every utterance handed to compute_speaker_medians.
struct SpeakerMedians {
  std::string speaker_id;
  double ll_x = 0.0;
  double tt_x = 0.0;
  double tb_x = 0.0;
  double tr_x = 0.0;
};

/// All recordings must belong to one speaker.
SpeakerMedians compute_speaker_medians(std::span<const EmaRecording* const> recordings);

/// Medians for every speaker present in the corpus.
std::map<std::string, SpeakerMedians> compute_all_speaker_medians(
    std::span<const EmaRecording> corpus);

/// Median of a sample; the mean of the two middle values for even sizes.
double median(std::vector<double> values);

struct VtvTrack {
  std::vector<double> la;
  std::vector<double> lp;
  std::vector<double> ttcl;
  std::vector<double> tbcl;
  std::vector<double> trcl;
};

/// Central-difference derivative scaled by the sample rate (mm/s, mm/s^2),
/// one-sided at the edges. order 2 applies the scheme twice.
Matrix differentiate(const EmaRecording& r, int order);

inline constexpr std::size_t kKinematicStats = 4;
inline constexpr std::size_t kKinematicDim = kEmaChannels * kKinematicStats;
inline constexpr std::size_t kVtvDim = 29;
static_assert(2 * kKinematicDim + kVtvDim == kEmaDim);

/// Per column [mean, max, variance, stddev], column-major (84 values).
std::vector<double> kinematic_functionals(const Matrix& deriv);

/// Euclidean LL-UL distance per sample.
std::vector<double> lip_aperture(const EmaRecording& r);

/// LL_x(n) minus the speaker's median LL_x.
std::vector<double> lip_protrusion(const EmaRecording& r, const SpeakerMedians& med);

struct TongueConstrictions {
  std::vector<double> ttcl;
  std::vector<double> tbcl;
  std::vector<double> trcl;
};

/// Speaker median x minus the current x, for TT, TB and TR (note the sign
/// is opposite to lip protrusion).
TongueConstrictions tongue_constriction_locations(const EmaRecording& r,
                                                  const SpeakerMedians& med);

VtvTrack vtv_track(const EmaRecording& r, const SpeakerMedians& med);

/// [mean, max, range, variance, stddev] for LA, LP, TTCL, TBCL, TRCL (25),
/// then the minimum of LP, TTCL, TBCL, TRCL (4).
std::vector<double> vtv_features(const VtvTrack& t);

std::vector<std::string> ema_feature_names();

/// [velocity 84 | acceleration 84 | VTV 29] = 197 features.
FeatureVector ema_vector(const EmaRecording& r, const SpeakerMedians& med,
                         Modality modality = Modality::Articulatory);

}  // namespace sermm
