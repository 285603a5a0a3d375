#include "sermm/feature_cache.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sermm/ema.hpp"
#include "sermm/errors.hpp"

namespace sermm {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 8);
}

std::uint64_t read_uint(std::istream& in, int bytes, const std::string& where) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), bytes)) {
    throw CacheError(where + ": truncated record at byte offset " +
                     std::to_string(static_cast<long long>(in.tellg())));
  }
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

CacheHeader parse_header(std::istream& in, std::size_t& records, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw CacheError(source + ": empty cache file");
  {
    std::istringstream first(line);
    std::string magic;
    int version = 0;
    first >> magic >> version;
    if (magic != kCacheMagic) throw CacheError(source + ": not a feature cache file");
    if (version != kCacheFormatVersion) {
      throw CacheError(source + ": cache format version " + std::to_string(version) +
                       " is not supported");
    }
  }
  CacheHeader h;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto space = line.find(' ');
    const std::string key = line.substr(0, space);
    const std::string value = space == std::string::npos ? "" : line.substr(space + 1);
    if (key == "pipeline") {
      h.pipeline_version = value;
    } else if (key == "frame_plan") {
      std::istringstream v(value);
      v >> h.frame_len_s >> h.frame_shift_s;
    } else if (key == "functional_table") {
      h.functional_table = value;
    } else if (key == "config_hash") {
      h.config_hash = value;
    } else if (key == "manifest_hash") {
      h.manifest_hash = value;
    } else if (key == "modality") {
      const auto m = parse_modality(value);
      if (!m) throw CacheError(source + ": unknown modality '" + value + "'");
      h.modality = *m;
    } else if (key == "dim") {
      h.dim = std::stoul(value);
    } else if (key == "records") {
      records = std::stoul(value);
    } else if (key == "names") {
      const std::size_t n = std::stoul(value);
      h.names.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!std::getline(in, h.names[i])) throw CacheError(source + ": truncated name list");
      }
    } else {
      throw CacheError(source + ": unknown header key '" + key + "'");
    }
  }
  if (!ended) throw CacheError(source + ": header has no end marker");
  if (h.names.size() != h.dim) throw CacheError(source + ": name count differs from dim");
  return h;
}

}  // namespace

std::string hash_hex(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string functional_table_hash() {
  std::string text;
  text += kLldTableVersion;
  text += '\n';
  text += kFunctionalTableVersion;
  text += '\n';
  for (auto n : kBaseLldNames) text += std::string(n) + ',';
  for (auto n : kFunctionalNames) text += std::string(n) + ',';
  for (const auto& n : ema_feature_names()) text += n + ',';
  return hash_hex(text);
}

std::filesystem::path cache_file(const std::filesystem::path& dir, Modality m) {
  return dir / (std::string(to_string(m)) + ".sfc");
}

void write_cache(const std::filesystem::path& path, const CacheHeader& header,
                 std::span<const FeatureVector> vectors) {
  if (header.names.size() != header.dim) throw ParameterError("cache header names differ from dim");
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CacheError("cannot write cache file " + tmp.string());
    out << kCacheMagic << ' ' << kCacheFormatVersion << '\n'
        << "pipeline " << header.pipeline_version << '\n'
        << "frame_plan " << format_double(header.frame_len_s) << ' '
        << format_double(header.frame_shift_s) << '\n'
        << "functional_table " << header.functional_table << '\n'
        << "config_hash " << header.config_hash << '\n'
        << "manifest_hash " << header.manifest_hash << '\n'
        << "modality " << to_string(header.modality) << '\n'
        << "dim " << header.dim << '\n'
        << "records " << vectors.size() << '\n'
        << "names " << header.names.size() << '\n';
    for (const std::string& n : header.names) out << n << '\n';
    out << "end\n";
    for (const FeatureVector& v : vectors) {
      if (v.dim() != header.dim) throw DimensionError("cache record dim differs from header");
      write_u32(out, static_cast<std::uint32_t>(v.utterance_id().size()));
      out.write(v.utterance_id().data(), static_cast<std::streamsize>(v.utterance_id().size()));
      write_u64(out, v.dim());
      for (double x : v.values()) write_u64(out, std::bit_cast<std::uint64_t>(x));
    }
    if (!out) throw CacheError("failed writing cache file " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CacheHeader read_cache_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open cache file " + path.string());
  std::size_t records = 0;
  return parse_header(in, records, path.string());
}

CacheContents read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError("cannot open cache file " + path.string());
  const std::string source = path.string();
  std::size_t records = 0;
  CacheContents out{parse_header(in, records, source), {}};
  out.vectors.reserve(records);
  for (std::size_t r = 0; r < records; ++r) {
    const auto len = static_cast<std::size_t>(read_uint(in, 4, source));
    std::string id(len, '\0');
    if (!in.read(id.data(), static_cast<std::streamsize>(len))) {
      throw CacheError(source + ": truncated utterance id in record " + std::to_string(r));
    }
    const auto dim = static_cast<std::size_t>(read_uint(in, 8, source));
    if (dim != out.header.dim) {
      throw CacheError(source + ": record " + std::to_string(r) + " has dim " + std::to_string(dim));
    }
    std::vector<double> values(dim);
    for (double& x : values) x = std::bit_cast<double>(read_uint(in, 8, source));
    try {
      out.vectors.emplace_back(std::move(values), out.header.names,
                               std::vector<Modality>{out.header.modality}, std::move(id));
    } catch (const InvariantError&) {
      throw CacheError(source + ": record " + std::to_string(r) + " holds non-finite values");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CacheError(source + ": trailing bytes after " + std::to_string(records) + " records");
  }
  return out;
}

void require_compatible(const CacheHeader& found, const CacheHeader& expected) {
  auto fail = [](const std::string& field, const std::string& a, const std::string& b) {
    throw CacheError("stale feature cache: " + field + " is '" + a + "', expected '" + b +
                     "'; re-run extract");
  };
  if (found.pipeline_version != expected.pipeline_version) {
    fail("pipeline version", found.pipeline_version, expected.pipeline_version);
  }
  if (found.modality != expected.modality) {
    fail("modality", std::string(to_string(found.modality)), std::string(to_string(expected.modality)));
  }
  if (found.frame_len_s != expected.frame_len_s || found.frame_shift_s != expected.frame_shift_s) {
    fail("frame plan", format_double(found.frame_len_s) + "/" + format_double(found.frame_shift_s),
         format_double(expected.frame_len_s) + "/" + format_double(expected.frame_shift_s));
  }
  if (found.functional_table != expected.functional_table) {
    fail("functional table", found.functional_table, expected.functional_table);
  }
  if (found.config_hash != expected.config_hash) {
    fail("config hash", found.config_hash, expected.config_hash);
  }
  if (found.manifest_hash != expected.manifest_hash) {
    fail("manifest hash", found.manifest_hash, expected.manifest_hash);
  }
  if (found.dim != expected.dim) fail("dim", std::to_string(found.dim), std::to_string(expected.dim));
}

}  // namespace sermm
