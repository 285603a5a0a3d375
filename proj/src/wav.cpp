#include "sermm/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "sermm/errors.hpp"

namespace sermm {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
 public:
  Reader(const std::vector<unsigned char>& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw DataError(source_ + ": truncated WAV " + what + " at byte offset " +
                      std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string tag(const char* what) {
    need(4, what);
    std::string t(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + 4));
    pos_ += 4;
    return t;
  }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }
  std::size_t size() const { return bytes_.size(); }
  const unsigned char* at(std::size_t p) const { return bytes_.data() + p; }

 private:
  const std::vector<unsigned char>& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* t) { out.insert(out.end(), t, t + 4); }

}  // namespace

Waveform parse_wav(const std::vector<unsigned char>& bytes, WaveKind kind,
                   const std::string& source) {
  Reader r(bytes, source);
  const std::size_t riff_at = r.pos();
  if (r.tag("RIFF tag") != "RIFF") {
    throw DataError(source + ": missing RIFF tag at byte offset " + std::to_string(riff_at));
  }
  r.u32("RIFF size");
  const std::size_t wave_at = r.pos();
  if (r.tag("WAVE tag") != "WAVE") {
    throw DataError(source + ": missing WAVE tag at byte offset " + std::to_string(wave_at));
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (true) {
    const std::size_t chunk_at = r.pos();
    if (chunk_at >= r.size()) {
      throw DataError(source + ": no data chunk before end of file at byte offset " +
                      std::to_string(chunk_at));
    }
    const std::string id = r.tag("chunk header");
    const std::uint32_t size = r.u32("chunk size");
    const std::size_t body = r.pos();
    if (id == "fmt ") {
      if (size < 16) {
        throw DataError(source + ": fmt chunk too short at byte offset " + std::to_string(chunk_at));
      }
      r.need(size, "fmt chunk");
      format = r.u16("format tag");
      channels = r.u16("channel count");
      rate = r.u32("sample rate");
      r.u32("byte rate");
      r.u16("block align");
      bits = r.u16("bit depth");
      if (format == kFormatExtensible) {
        if (size < 40) {
          throw DataError(source + ": extensible fmt chunk too short at byte offset " +
                          std::to_string(chunk_at));
        }
        r.seek(body + 24);
        format = r.u16("sub-format");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) {
        throw DataError(source + ": data chunk before fmt chunk at byte offset " +
                        std::to_string(chunk_at));
      }
      if (channels != 1) {
        throw DataError(source + ": " + std::to_string(channels) +
                        " channels; only mono WAV is supported");
      }
      if (rate == 0) throw DataError(source + ": sample rate 0 in fmt chunk");
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) {
        throw DataError(source + ": unsupported encoding (format " + std::to_string(format) +
                        ", " + std::to_string(bits) +
                        " bits); expected 16-bit PCM or 32-bit float");
      }
      const std::size_t width = bits / 8;
      const std::size_t available = std::min<std::size_t>(size, r.size() - body);
      if (available < size) {
        throw DataError(source + ": data chunk truncated at byte offset " +
                        std::to_string(r.size()) + " (declared " + std::to_string(size) +
                        " bytes from offset " + std::to_string(body) + ")");
      }
      const std::size_t n = size / width;
      std::vector<double> samples(n);
      const unsigned char* p = r.at(body);
      for (std::size_t i = 0; i < n; ++i, p += width) {
        if (pcm16) {
          const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
          samples[i] = static_cast<double>(v) / 32768.0;
        } else {
          const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                                  (static_cast<std::uint32_t>(p[1]) << 8) |
                                  (static_cast<std::uint32_t>(p[2]) << 16) |
                                  (static_cast<std::uint32_t>(p[3]) << 24);
          const float f = std::bit_cast<float>(u);
          if (!std::isfinite(f)) {
            throw DataError(source + ": non-finite float sample at byte offset " +
                            std::to_string(body + i * width));
          }
          samples[i] = static_cast<double>(f);
        }
      }
      return Waveform(std::move(samples), static_cast<double>(rate), kind);
    } else {
      r.need(size, "chunk body");
    }
    r.seek(body + size + (size & 1u));
  }
}

Waveform load_wav(const std::filesystem::path& path, WaveKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return parse_wav(bytes, kind, path.string());
}

std::vector<unsigned char> encode_wav(const Waveform& w, WavEncoding encoding) {
  const bool pcm = encoding == WavEncoding::Pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(w.sample_rate_hz()));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.size() * bits / 8);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * bits / 8);
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : w.samples()) {
    if (pcm) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  const auto bytes = encode_wav(w, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write WAV file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing WAV file " + path.string());
}

}  // namespace sermm
