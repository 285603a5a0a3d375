#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "sermm/ema_csv.hpp"
#include "sermm/errors.hpp"
#include "sermm/feature_cache.hpp"
#include "sermm/manifest.hpp"
#include "sermm/pipeline.hpp"
#include "sermm/synth_corpus.hpp"
#include "sermm/wav.hpp"
#include "test_support.hpp"

using namespace sermm;
namespace fs = std::filesystem;

namespace {

void put_u16(std::vector<unsigned char>& b, unsigned v) {
  b.push_back(static_cast<unsigned char>(v & 0xff));
  b.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<unsigned char>& b, const char* tag) { b.insert(b.end(), tag, tag + 4); }

// Canonical 44-byte-header PCM16 file holding `frames` frames of `value`.
std::vector<unsigned char> pcm16_file(unsigned channels, std::uint32_t rate, std::size_t frames,
                                      std::int16_t value) {
  const auto data_bytes = static_cast<std::uint32_t>(frames * channels * 2);
  std::vector<unsigned char> b;
  put_tag(b, "RIFF");
  put_u32(b, 36 + data_bytes);
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put_u32(b, 16);
  put_u16(b, 1);
  put_u16(b, channels);
  put_u32(b, rate);
  put_u32(b, rate * channels * 2);
  put_u16(b, channels * 2);
  put_u16(b, 16);
  put_tag(b, "data");
  put_u32(b, data_bytes);
  for (std::size_t i = 0; i < frames * channels; ++i) put_u16(b, static_cast<std::uint16_t>(value));
  return b;
}

std::string ema_header(bool rotations) {
  std::string h = "time";
  for (const char* s : {"UL", "LL", "LC", "RC", "TT", "TB", "TR"}) {
    for (const char* a : {"x", "y", "z"}) h += std::string(",") + s + "_" + a;
    if (rotations) {
      for (const char* a : {"rx", "ry", "rz"}) h += std::string(",") + s + "_" + a;
    }
  }
  return h + "\n";
}

std::string ema_text(std::size_t rows, double rate, bool rotations, std::size_t jitter_row = 0) {
  std::ostringstream s;
  s.precision(17);
  s << ema_header(rotations);
  const std::size_t cols = rotations ? 42 : 21;
  for (std::size_t i = 0; i < rows; ++i) {
    double t = double(i) / rate;
    if (jitter_row != 0 && i == jitter_row) t += 1e-4;
    s << t;
    for (std::size_t c = 0; c < cols; ++c) s << ',' << double(c) + 0.01 * double(i);
    s << '\n';
  }
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

// 1-nearest-neighbor accuracy under k-fold cross-validation. With
// `fisher_weighted` each column is scaled by the square root of its
// between/within class variance ratio, estimated on the training rows of
// the fold; otherwise columns are only z-scored.
double one_nn_accuracy(const LabeledDataset& data, bool fisher_weighted, std::size_t k = 8) {
  const Matrix& x = data.features;
  const std::size_t n = x.rows(), d = x.cols();
  std::size_t correct = 0;
  for (std::size_t fold = 0; fold < k; ++fold) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < n; ++i) (i % k == fold ? test : train).push_back(i);
    std::vector<double> scale(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      std::vector<double> sum(kEmotionCount, 0.0), count(kEmotionCount, 0.0);
      double mean = 0.0;
      for (std::size_t i : train) {
        sum[static_cast<std::size_t>(data.labels[i])] += x(i, c);
        count[static_cast<std::size_t>(data.labels[i])] += 1.0;
        mean += x(i, c);
      }
      mean /= double(train.size());
      double total = 0.0, within = 0.0;
      for (std::size_t i : train) {
        const auto y = static_cast<std::size_t>(data.labels[i]);
        const double m = sum[y] / count[y];
        total += (x(i, c) - mean) * (x(i, c) - mean);
        within += (x(i, c) - m) * (x(i, c) - m);
      }
      if (total <= 0.0) continue;
      const double sd = std::sqrt(total / double(train.size()));
      if (!fisher_weighted) {
        scale[c] = 1.0 / sd;
      } else if (within > 0.0) {
        scale[c] = std::sqrt((total - within) / within) / sd;
      }
    }
    for (std::size_t i : test) {
      double best = std::numeric_limits<double>::infinity();
      int label = -1;
      for (std::size_t j : train) {
        double dist = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = scale[c] * (x(i, c) - x(j, c));
          dist += diff * diff;
        }
        if (dist < best) {
          best = dist;
          label = data.labels[j];
        }
      }
      correct += label == data.labels[i];
    }
  }
  return double(correct) / double(n);
}

}  // namespace

TEST_CASE("wav loading") {
  const auto bytes = pcm16_file(1, 48000, 48000, 16384);
  const auto w = parse_wav(bytes);
  CHECK(w.size() == 48000);
  CHECK(w.sample_rate_hz() == 48000.0);
  for (double v : w.samples()) CHECK(v == 0.5);

  const auto stereo = error_of([] { parse_wav(pcm16_file(2, 48000, 100, 0)); });
  CHECK(stereo.find("channel") != std::string::npos);

  const std::vector<unsigned char> truncated(bytes.begin(), bytes.begin() + 30);
  const auto cut = error_of([&] { parse_wav(truncated); });
  CHECK(cut.find("offset") != std::string::npos);

  auto bad = bytes;
  bad[20] = 2;  // ADPCM
  CHECK_THROWS_AS(parse_wav(bad), DataError);

  const auto odd = parse_wav(pcm16_file(1, 11025, 10, -32768));
  CHECK(odd.sample_rate_hz() == 11025.0);
  CHECK(odd.samples()[0] == -1.0);
}

TEST_CASE("wav round trip") {
  Rng rng(2);
  const Waveform w(testing::random_vector(rng, 1000, -0.9, 0.9), 16000.0, WaveKind::Egg);
  const auto f = parse_wav(encode_wav(w, WavEncoding::Float32), WaveKind::Egg);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(f.samples()[i] == static_cast<double>(static_cast<float>(w.samples()[i])));
  }
  const auto p = parse_wav(encode_wav(w));
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(std::abs(p.samples()[i] - w.samples()[i]) <= 0.5 / 32768.0 + 1e-15);
  }
  const auto dir = testing::scratch_dir("wav");
  save_wav(dir / "a.wav", w);
  CHECK(load_wav(dir / "a.wav").size() == 1000);
  CHECK_THROWS_AS(load_wav(dir / "missing.wav"), DataError);
}

TEST_CASE("ema csv") {
  const auto r = parse_ema_csv(ema_text(500, 250.0, true), "u", "S1");
  CHECK(r.samples() == 500);
  CHECK(r.sample_rate_hz() == doctest::Approx(250.0).epsilon(1e-9));
  CHECK(r.positions().cols() == kEmaChannels);
  CHECK(r.track(Articulator::UL, Axis::Y)[0] == 1.0);
  CHECK(r.track(Articulator::LL, Axis::X)[0] == 6.0);

  const auto reduced = parse_ema_csv(ema_text(100, 250.0, false));
  CHECK(reduced.samples() == 100);
  CHECK(reduced.track(Articulator::LL, Axis::X)[0] == 3.0);

  const auto jitter = error_of([] { parse_ema_csv(ema_text(50, 250.0, false, 20)); });
  CHECK(jitter.find("non-uniform") != std::string::npos);

  std::string nan = ema_text(10, 250.0, false);
  nan.replace(nan.find(",2,"), 3, ",nan,");
  CHECK_THROWS_AS(parse_ema_csv(nan), DataError);

  std::string missing = ema_text(10, 250.0, false);
  missing.replace(missing.find("TR_z"), 4, "QQ_z");
  CHECK(error_of([&] { parse_ema_csv(missing); }).find("missing sensor") != std::string::npos);

  const auto back = parse_ema_csv(format_ema_csv(r), "u", "S1");
  CHECK(back.positions() == r.positions());
  CHECK(parse_ema_csv(format_ema_csv(r, true)).positions() == r.positions());
}

TEST_CASE("manifest validation") {
  const std::string header =
      "utterance_id,speaker_id,emotion,sentence_id,audio_path,egg_path,ema_path,estimated_ema_path\n";
  const auto ok = parse_manifest(header + "a,S1,sad,T1,a.wav,,,\nb,S1,angry,T1,b.wav,b.egg.wav,,\n",
                                 "/data", false);
  REQUIRE(ok.entries.size() == 2);
  CHECK(ok.entries[0].label == 6);
  CHECK(ok.entries[1].label == 3);
  CHECK(ok.resolve("b.wav") == fs::path("/data/b.wav"));
  CHECK(ok.entries[0].egg_path.empty());

  for (const char* bad : {"happy", "Sad", "surprised", ""}) {
    const std::string text = header + "a,S1," + bad + ",T1,a.wav,,,\n";
    CHECK_THROWS_AS(parse_manifest(text, "/data", false), DataError);
  }
  CHECK_THROWS_AS(parse_manifest(header + "a,S1,sad,T1,a.wav,,,\na,S1,sad,T1,a.wav,,,\n", "/", false),
                  DataError);
  CHECK_THROWS_AS(parse_manifest(header + "a,S1,sad,T1,a.wav,,,\n", "/nonexistent", true), DataError);

  const auto again = parse_manifest(format_manifest(ok), "/data", false);
  CHECK(again.entries.size() == 2);
  CHECK(again.entries[1].egg_path == ok.entries[1].egg_path);
}

TEST_CASE("feature cache round trip is bit-identical") {
  Rng rng(8);
  std::vector<FeatureVector> vs;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kEmaDim; ++i) names.push_back("n" + std::to_string(i));
  for (int k = 0; k < 20; ++k) {
    auto values = testing::random_vector(rng, kEmaDim, -1e6, 1e6);
    values[0] = std::numeric_limits<double>::denorm_min();
    values[1] = -0.0;
    values[2] = 0.1;
    vs.emplace_back(values, names, std::vector<Modality>{Modality::Articulatory},
                    "utt" + std::to_string(k));
  }
  CacheHeader h;
  h.frame_len_s = 0.025;
  h.frame_shift_s = 0.01;
  h.functional_table = functional_table_hash();
  h.config_hash = "cfg";
  h.manifest_hash = "man";
  h.modality = Modality::Articulatory;
  h.dim = kEmaDim;
  h.names = names;

  const auto dir = testing::scratch_dir("cache");
  const auto path = cache_file(dir, Modality::Articulatory);
  write_cache(path, h, vs);
  const auto back = read_cache(path);
  REQUIRE(back.vectors.size() == vs.size());
  for (std::size_t k = 0; k < vs.size(); ++k) {
    CHECK(back.vectors[k].utterance_id() == vs[k].utterance_id());
    CHECK(std::memcmp(back.vectors[k].values().data(), vs[k].values().data(),
                      kEmaDim * sizeof(double)) == 0);
  }
  CHECK(back.header.names == names);
  CHECK_NOTHROW(require_compatible(back.header, h));

  CacheHeader stale = h;
  stale.pipeline_version = "sermm-pipeline-0";
  CHECK_THROWS_AS(require_compatible(back.header, stale), CacheError);
  stale = h;
  stale.config_hash = "other";
  CHECK(error_of([&] { require_compatible(back.header, stale); }).find("config") !=
        std::string::npos);

  std::string bytes = slurp(path);
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 5);
  CHECK_THROWS_AS(read_cache(path), CacheError);
  std::ofstream(path, std::ios::binary) << "garbage\n";
  CHECK_THROWS_AS(read_cache_header(path), CacheError);
}

TEST_CASE("synthetic corpus layout and determinism") {
  SyntheticSpec spec;
  spec.speakers = 4;
  spec.sentences = 16;
  const auto a = testing::scratch_dir("synth_a");
  const auto b = testing::scratch_dir("synth_b");
  const Manifest m = generate_synthetic_corpus(spec, 11, a);
  generate_synthetic_corpus(spec, 11, b);
  CHECK(m.entries.size() == 448);

  const Manifest loaded = load_manifest(a / "manifest.csv", true);
  CHECK(loaded.entries.size() == 448);
  for (const auto& e : loaded.entries) {
    CHECK(e.label == *emotion_index(e.emotion));
    CHECK_FALSE(e.egg_path.empty());
    CHECK_FALSE(e.ema_path.empty());
  }
  const auto& e = loaded.entries.front();
  CHECK(load_wav(loaded.resolve(e.audio_path)).sample_rate_hz() == 16000.0);
  CHECK(load_ema(loaded.resolve(e.ema_path)).sample_rate_hz() == doctest::Approx(250.0));

  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(entry.path(), a);
    CHECK(slurp(entry.path()) == slurp(b / rel));
  }
  CHECK(files == 1 + 4 * 448);

  const auto c = testing::scratch_dir("synth_c");
  generate_synthetic_corpus(spec, 12, c);
  CHECK(slurp(a / e.audio_path) != slurp(c / e.audio_path));

  SyntheticSpec bad = spec;
  bad.corruption = 1.5;
  CHECK_THROWS_AS(generate_synthetic_corpus(bad, 1, c), ParameterError);
  bad = spec;
  bad.speakers = 0;
  CHECK_THROWS_AS(generate_synthetic_corpus(bad, 1, c), ParameterError);

  for (int k = 0; k < kEmotionCount; ++k) {
    const int code = k + 1;
    for (int slot = 0; slot < 3; ++slot) CHECK(label_bit(k, slot) == ((code >> slot) & 1));
  }
  CHECK(single_modality_ceiling(0.0) == doctest::Approx(2.0 / 7.0));
}

TEST_CASE("uncorrupted tri-modal features determine the label") {
  SyntheticSpec spec;
  spec.speakers = 4;
  spec.sentences = 16;
  spec.corruption = 0.0;
  spec.estimated_ema = false;
  const auto dir = testing::scratch_dir("synth_clean");
  const Manifest m = generate_synthetic_corpus(spec, 5, dir);
  ExtractOptions options;
  options.glottal_estimate = false;
  options.ema_estimate = false;
  extract_to_cache(m, options, dir / "cache");
  const Scenario tri = Scenario::parse("speech+excitation+articulatory");
  const auto store = load_feature_store(m, options, dir / "cache", tri.modalities);
  const auto data = store.dataset(tri);
  MESSAGE("unweighted 1-NN accuracy " << 100.0 * one_nn_accuracy(data, false) << "%");
  CHECK(one_nn_accuracy(data, true) == 1.0);
}

TEST_CASE("a single modality stays under the analytic ceiling") {
  SyntheticSpec spec;
  spec.speakers = 6;
  spec.sentences = 48;
  spec.corruption = 0.3;
  spec.estimated_ema = false;
  const auto dir = testing::scratch_dir("synth_ceiling");
  const Manifest m = generate_synthetic_corpus(spec, 21, dir);
  REQUIRE(m.entries.size() >= 2000);
  ExtractOptions options;
  options.speech = false;
  options.ema = false;
  options.glottal_estimate = false;
  options.ema_estimate = false;
  extract_to_cache(m, options, dir / "cache");
  const Scenario egg = Scenario::parse("excitation");
  const auto store = load_feature_store(m, options, dir / "cache", egg.modalities);
  const auto folds = make_folds(store.labels(), store.speakers(), 5, 3,
                                FoldStrategy::StratifiedRandom);
  GbdtConfig config;
  config.num_rounds = 20;
  config.max_depth = 3;
  config.learning_rate = 0.3;
  config.colsample = 0.3;
  const auto report = run_scenario(store, egg, folds, config);
  const double ceiling = 100.0 * single_modality_ceiling(spec.corruption);
  MESSAGE("excitation accuracy " << 100.0 * report.accuracy << "%, ceiling " << ceiling << "%");
  CHECK(100.0 * report.accuracy <= ceiling + 3.0);
  CHECK(100.0 * report.accuracy >= ceiling - 3.0);
}
