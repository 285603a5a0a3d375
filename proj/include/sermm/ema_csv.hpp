#pragma once

// Portable EMA trajectory format: a CSV with header
//   time,UL_x,UL_y,UL_z,UL_rx,UL_ry,UL_rz,...,TR_rz
// (1 + 7 x 6 columns) or the position-only 1 + 7 x 3 variant. Time is in
// seconds and must be uniformly spaced; positions are in mm with x
// forward-backward, y left-right and z up-down. Rotations are read and
// discarded.

#include <filesystem>
#include <string>

#include "sermm/ema.hpp"

namespace sermm {

inline constexpr double kEmaTimeTolerance = 1e-6;

EmaRecording load_ema(const std::filesystem::path& path, std::string utterance_id = {},
                      std::string speaker_id = {});
EmaRecording parse_ema_csv(const std::string& text, std::string utterance_id = {},
                           std::string speaker_id = {}, const std::string& source = "<memory>");

/// Writes positions, time starting at 0. Rotation columns are zero-filled
/// when `with_rotations` is set.
void save_ema(const std::filesystem::path& path, const EmaRecording& r, bool with_rotations = false);
std::string format_ema_csv(const EmaRecording& r, bool with_rotations = false);

}  // namespace sermm
