#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace sermm {

inline constexpr int kEmotionCount = 7;

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "neutral", "ecstatic", "pleased", "angry", "indifferent", "pained", "sad"};

/// Class id of an emotion name, exact lower-case match.
inline std::optional<int> emotion_index(std::string_view name) {
  for (int k = 0; k < kEmotionCount; ++k) {
    if (kEmotionNames[static_cast<std::size_t>(k)] == name) return k;
  }
  return std::nullopt;
}

}  // namespace sermm
