#include "sermm/manifest.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "sermm/emotion.hpp"
#include "sermm/errors.hpp"

namespace sermm {

namespace {

constexpr std::array<std::string_view, 8> kColumns = {
    "utterance_id", "speaker_id", "emotion", "sentence_id",
    "audio_path",   "egg_path",   "ema_path", "estimated_ema_path"};

// Minimal RFC 4180 field splitting: quoted fields may contain commas and "".
std::vector<std::string> split_csv(const std::string& line, const std::string& where) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  if (quoted) throw DataError(where + ": unterminated quote");
  return out;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return root / p;
}

Manifest parse_manifest(const std::string& text, const std::filesystem::path& root,
                        bool check_paths, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty manifest");
  const auto header = split_csv(line, source + ":1");
  if (header.size() != kColumns.size()) {
    throw DataError(source + ": manifest needs " + std::to_string(kColumns.size()) +
                    " columns, found " + std::to_string(header.size()));
  }
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (header[i] != kColumns[i]) {
      throw DataError(source + ": column " + std::to_string(i + 1) + " should be '" +
                      std::string(kColumns[i]) + "', found '" + header[i] + "'");
    }
  }

  Manifest m;
  m.root = root;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto cells = split_csv(line, where);
    if (cells.size() != kColumns.size()) {
      throw DataError(where + ": expected " + std::to_string(kColumns.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    ManifestEntry e;
    e.utterance_id = cells[0];
    e.speaker_id = cells[1];
    e.emotion = cells[2];
    e.sentence_id = cells[3];
    e.audio_path = cells[4];
    e.egg_path = cells[5];
    e.ema_path = cells[6];
    e.estimated_ema_path = cells[7];
    if (e.utterance_id.empty()) throw DataError(where + ": empty utterance_id");
    if (e.speaker_id.empty()) throw DataError(where + ": empty speaker_id");
    if (e.audio_path.empty()) throw DataError(where + ": empty audio_path");
    const auto label = emotion_index(e.emotion);
    if (!label) {
      throw DataError(where + ": emotion '" + e.emotion +
                      "' is not one of neutral, ecstatic, pleased, angry, indifferent, pained, sad");
    }
    e.label = *label;
    if (!seen.insert(e.utterance_id).second) {
      throw DataError(where + ": duplicate utterance_id '" + e.utterance_id + "'");
    }
    if (check_paths) {
      for (const auto* p : {&e.audio_path, &e.egg_path, &e.ema_path, &e.estimated_ema_path}) {
        if (!p->empty() && !std::filesystem::exists(m.resolve(*p))) {
          throw DataError(where + ": file not found: " + m.resolve(*p).string());
        }
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path(), check_paths, path.string());
}

std::string format_manifest(const Manifest& manifest) {
  std::string out;
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    if (i) out += ',';
    out += kColumns[i];
  }
  out += '\n';
  for (const ManifestEntry& e : manifest.entries) {
    out += quote(e.utterance_id) + ',' + quote(e.speaker_id) + ',' + quote(e.emotion) + ',' +
           quote(e.sentence_id) + ',' + quote(e.audio_path.generic_string()) + ',' +
           quote(e.egg_path.generic_string()) + ',' + quote(e.ema_path.generic_string()) + ',' +
           quote(e.estimated_ema_path.generic_string()) + '\n';
  }
  return out;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << format_manifest(manifest);
  if (!out) throw DataError("failed writing manifest " + path.string());
}

}  // namespace sermm
