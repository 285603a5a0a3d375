#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sermm/signal.hpp"

namespace sermm {

enum class WavEncoding { Pcm16, Float32 };

/// Mono RIFF/WAVE, 16-bit integer PCM or 32-bit IEEE float. Integer
/// samples are scaled by 1/32768. Any sample rate is accepted.
Waveform load_wav(const std::filesystem::path& path, WaveKind kind = WaveKind::Audio);
Waveform parse_wav(const std::vector<unsigned char>& bytes, WaveKind kind = WaveKind::Audio,
                   const std::string& source = "<memory>");

/// Pcm16 clips to [-1, 1) before quantizing.
void save_wav(const std::filesystem::path& path, const Waveform& w,
              WavEncoding encoding = WavEncoding::Pcm16);
std::vector<unsigned char> encode_wav(const Waveform& w, WavEncoding encoding = WavEncoding::Pcm16);

}  // namespace sermm
