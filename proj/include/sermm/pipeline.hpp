#pragma once

// Manifest -> per-modality feature vectors, with the on-disk cache.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sermm/experiment.hpp"
#include "sermm/feature_cache.hpp"
#include "sermm/iaif.hpp"
#include "sermm/lld.hpp"
#include "sermm/manifest.hpp"

namespace sermm {

struct ExtractOptions {
  bool speech = true;
  bool egg = true;
  bool ema = true;
  bool glottal_estimate = true;
  bool ema_estimate = true;
  FramePlan plan = FramePlan::standard();
  LldConfig lld;
  IaifConfig iaif;
  /// 0 picks the hardware concurrency.
  unsigned threads = 0;
};

std::vector<Modality> requested_modalities(const ExtractOptions& options);

/// Digest of every setting that changes extracted values.
std::string extraction_config_hash(const ExtractOptions& options);

std::string manifest_hash(const Manifest& manifest);

CacheHeader expected_cache_header(Modality m, const ExtractOptions& options,
                                  const Manifest& manifest);

/// Vectors for every entry that has a source file for `m`, in manifest
/// order. Articulatory modalities normalize with per-speaker medians pooled
/// over all of that speaker's recordings in the manifest.
std::vector<FeatureVector> extract_modality(const Manifest& manifest, Modality m,
                                            const ExtractOptions& options);

using LogFn = std::function<void(const std::string&)>;

struct ExtractResult {
  std::vector<Modality> cache_hits;
  std::vector<Modality> computed;
};

/// Recomputes a modality only when its cache file is absent or stale.
ExtractResult extract_to_cache(const Manifest& manifest, const ExtractOptions& options,
                               const std::filesystem::path& cache_dir, const LogFn& log = {});

/// Registers every manifest utterance, then loads each modality's cache
/// after checking it against the current pipeline. Missing cache files are
/// skipped; stale ones throw CacheError.
FeatureStore load_feature_store(const Manifest& manifest, const ExtractOptions& options,
                                const std::filesystem::path& cache_dir,
                                std::span<const Modality> modalities);

/// Runs fn(i) for i in [0, n) on a bounded pool; the first exception is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace sermm
