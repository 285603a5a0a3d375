#pragma once

// Versioned per-modality feature cache. A plain-text header of
// "key value" lines ending in "end" is followed by little-endian binary
// records {u32 id length, id bytes, u64 dim, dim x f64}.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sermm/functionals.hpp"

namespace sermm {

inline constexpr std::string_view kPipelineVersion = "sermm-pipeline-1";
inline constexpr std::string_view kCacheMagic = "SERMM-FEATURE-CACHE";
inline constexpr int kCacheFormatVersion = 1;

struct CacheHeader {
  std::string pipeline_version{kPipelineVersion};
  double frame_len_s = 0.0;
  double frame_shift_s = 0.0;
  std::string functional_table;
  std::string config_hash;
  std::string manifest_hash;
  Modality modality = Modality::Speech;
  std::size_t dim = 0;
  std::vector<std::string> names;
};

/// 64-bit FNV-1a as 16 hex digits.
std::string hash_hex(std::string_view data);

/// Digest of the descriptor and functional tables.
std::string functional_table_hash();

std::filesystem::path cache_file(const std::filesystem::path& dir, Modality m);

void write_cache(const std::filesystem::path& path, const CacheHeader& header,
                 std::span<const FeatureVector> vectors);

CacheHeader read_cache_header(const std::filesystem::path& path);

struct CacheContents {
  CacheHeader header;
  std::vector<FeatureVector> vectors;
};

CacheContents read_cache(const std::filesystem::path& path);

/// Throws CacheError naming the first field that differs.
void require_compatible(const CacheHeader& found, const CacheHeader& expected);

}  // namespace sermm
