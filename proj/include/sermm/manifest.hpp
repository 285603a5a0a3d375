#pragma once

// Corpus manifest: a CSV with header
//   utterance_id,speaker_id,emotion,sentence_id,audio_path,egg_path,ema_path,estimated_ema_path
// The last three paths may be empty. Relative paths resolve against the
// manifest's directory.

#include <filesystem>
#include <string>
#include <vector>

namespace sermm {

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string emotion;
  int label = 0;
  std::string sentence_id;
  std::filesystem::path audio_path;
  std::filesystem::path egg_path;
  std::filesystem::path ema_path;
  std::filesystem::path estimated_ema_path;
};

struct Manifest {
  /// Directory relative paths resolve against.
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Validates labels, id uniqueness and, with `check_paths`, file existence.
Manifest load_manifest(const std::filesystem::path& path, bool check_paths = true);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& root,
                        bool check_paths = true, const std::string& source = "<memory>");

void save_manifest(const std::filesystem::path& path, const Manifest& manifest);
std::string format_manifest(const Manifest& manifest);

}  // namespace sermm
