#include "sermm/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "sermm/ema_csv.hpp"
#include "sermm/wav.hpp"

namespace sermm {

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<Modality> requested_modalities(const ExtractOptions& options) {
  std::vector<Modality> out;
  if (options.speech) out.push_back(Modality::Speech);
  if (options.egg) out.push_back(Modality::Excitation);
  if (options.ema) out.push_back(Modality::Articulatory);
  if (options.glottal_estimate) out.push_back(Modality::ExcitationEstimated);
  if (options.ema_estimate) out.push_back(Modality::ArticulatoryEstimated);
  return out;
}

std::string extraction_config_hash(const ExtractOptions& o) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "plan %.17g %.17g|lld %.17g %.17g %.17g %d %d %d %.17g|iaif %.17g %.17g %.17g %zu "
                "%zu %.17g %.17g %.17g %.17g",
                o.plan.frame_len_s(), o.plan.shift_s(), o.lld.f0_min_hz, o.lld.f0_max_hz,
                o.lld.voicing_threshold, o.lld.mel_filters, o.lld.mfcc_coeffs, o.lld.delta_window,
                o.lld.pre_emphasis, o.iaif.highpass_hz, o.iaif.frame_len_s, o.iaif.shift_s,
                o.iaif.vocal_tract_order, o.iaif.glottal_order, o.iaif.leak, o.iaif.lag_window_hz,
                o.iaif.flow_corner_hz, o.iaif.min_voiced_fraction);
  return hash_hex(buf);
}

std::string manifest_hash(const Manifest& manifest) { return hash_hex(format_manifest(manifest)); }

CacheHeader expected_cache_header(Modality m, const ExtractOptions& options,
                                  const Manifest& manifest) {
  CacheHeader h;
  h.frame_len_s = options.plan.frame_len_s();
  h.frame_shift_s = options.plan.shift_s();
  h.functional_table = functional_table_hash();
  h.config_hash = extraction_config_hash(options);
  h.manifest_hash = manifest_hash(manifest);
  h.modality = m;
  h.dim = modality_dim(m);
  return h;
}

namespace {

const std::filesystem::path& source_path(const ManifestEntry& e, Modality m) {
  switch (m) {
    case Modality::Speech:
    case Modality::ExcitationEstimated:
      return e.audio_path;
    case Modality::Excitation:
      return e.egg_path;
    case Modality::Articulatory:
      return e.ema_path;
    case Modality::ArticulatoryEstimated:
      return e.estimated_ema_path;
  }
  return e.audio_path;
}

std::string context(const ManifestEntry& e, Modality m) {
  return "utterance '" + e.utterance_id + "' (" + std::string(to_string(m)) + "): ";
}

}  // namespace

std::vector<FeatureVector> extract_modality(const Manifest& manifest, Modality m,
                                            const ExtractOptions& options) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!source_path(manifest.entries[i], m).empty()) rows.push_back(i);
  }
  std::vector<std::optional<FeatureVector>> out(rows.size());

  if (canonical_slot(m) == 2) {
    std::vector<std::optional<EmaRecording>> recs(rows.size());
    parallel_for(rows.size(), options.threads, [&](std::size_t j) {
      const ManifestEntry& e = manifest.entries[rows[j]];
      recs[j].emplace(load_ema(manifest.resolve(source_path(e, m)), e.utterance_id, e.speaker_id));
    });
    std::map<std::string, std::vector<const EmaRecording*>> by_speaker;
    for (const auto& r : recs) by_speaker[r->speaker_id()].push_back(&*r);
    std::map<std::string, SpeakerMedians> medians;
    for (const auto& [speaker, list] : by_speaker) {
      medians.emplace(speaker, compute_speaker_medians(list));
    }
    parallel_for(rows.size(), options.threads, [&](std::size_t j) {
      try {
        out[j].emplace(ema_vector(*recs[j], medians.at(recs[j]->speaker_id()), m));
      } catch (const Error& err) {
        throw DataError(context(manifest.entries[rows[j]], m) + err.what());
      }
    });
  } else {
    parallel_for(rows.size(), options.threads, [&](std::size_t j) {
      const ManifestEntry& e = manifest.entries[rows[j]];
      const auto path = manifest.resolve(source_path(e, m));
      try {
        if (m == Modality::Speech) {
          out[j].emplace(waveform_vector(load_wav(path, WaveKind::Audio), options.plan, options.lld));
        } else if (m == Modality::Excitation) {
          out[j].emplace(waveform_vector(load_wav(path, WaveKind::Egg), options.plan, options.lld));
        } else {
          const GlottalEstimate g = iaif(load_wav(path, WaveKind::Audio), options.iaif, e.utterance_id);
          out[j].emplace(excitation_vector_estimated(g, options.plan, options.lld));
        }
      } catch (const TooShortError& err) {
        throw DataError(context(e, m) + err.what());
      }
      out[j]->set_utterance_id(e.utterance_id);
    });
  }

  std::vector<FeatureVector> result;
  result.reserve(out.size());
  for (auto& v : out) {
    if (v->dim() != modality_dim(m)) {
      throw InvariantError(std::string(to_string(m)) + " vector has dim " + std::to_string(v->dim()));
    }
    result.push_back(std::move(*v));
  }
  return result;
}

ExtractResult extract_to_cache(const Manifest& manifest, const ExtractOptions& options,
                               const std::filesystem::path& cache_dir, const LogFn& log) {
  std::filesystem::create_directories(cache_dir);
  ExtractResult result;
  for (Modality m : requested_modalities(options)) {
    const auto path = cache_file(cache_dir, m);
    CacheHeader expected = expected_cache_header(m, options, manifest);
    if (std::filesystem::exists(path)) {
      try {
        require_compatible(read_cache_header(path), expected);
        result.cache_hits.push_back(m);
        if (log) log("cache hit: " + std::string(to_string(m)) + " (" + path.string() + ")");
        continue;
      } catch (const CacheError& err) {
        if (log) log("cache invalidated: " + std::string(err.what()));
      }
    }
    std::vector<FeatureVector> vectors = extract_modality(manifest, m, options);
    if (vectors.empty()) {
      if (log) log("skipped " + std::string(to_string(m)) + ": no source files in manifest");
      continue;
    }
    expected.names = vectors.front().names();
    write_cache(path, expected, vectors);
    result.computed.push_back(m);
    if (log) {
      log("extracted " + std::string(to_string(m)) + ": " + std::to_string(vectors.size()) +
          " utterances -> " + path.string());
    }
  }
  return result;
}

FeatureStore load_feature_store(const Manifest& manifest, const ExtractOptions& options,
                                const std::filesystem::path& cache_dir,
                                std::span<const Modality> modalities) {
  FeatureStore store;
  for (const ManifestEntry& e : manifest.entries) {
    store.add_utterance(e.utterance_id, e.speaker_id, e.label);
  }
  for (Modality m : modalities) {
    const auto path = cache_file(cache_dir, m);
    if (!std::filesystem::exists(path)) continue;
    CacheContents c = read_cache(path);
    CacheHeader expected = expected_cache_header(m, options, manifest);
    require_compatible(c.header, expected);
    for (FeatureVector& v : c.vectors) store.put(std::move(v));
  }
  return store;
}

}  // namespace sermm
