#include "sermm/lld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fft.hpp"
#include "sermm/errors.hpp"

namespace sermm {

LldMatrix::LldMatrix(std::size_t frames, std::vector<std::string> names, FramePlan plan)
    : frames_(frames),
      names_(std::move(names)),
      plan_(plan),
      values_(frames * names_.size(), 0.0) {}

LldMatrix::LldMatrix(std::vector<double> values, std::vector<std::string> names,
                     FramePlan plan)
    : frames_(0), names_(std::move(names)), plan_(plan), values_(std::move(values)) {
  if (names_.empty() || values_.size() % names_.size() != 0) {
    throw DimensionError("LLD values do not form whole rows");
  }
  frames_ = values_.size() / names_.size();
}

std::vector<double> LldMatrix::column(std::size_t col) const {
  if (col >= descriptors()) throw DimensionError("LLD column out of range");
  std::vector<double> out(frames_);
  for (std::size_t t = 0; t < frames_; ++t) out[t] = at(t, col);
  return out;
}

double zcr(const Frame& f) {
  const auto& x = f.values;
  if (x.size() < 2) return 0.0;
  int prev_sign = 0;
  std::size_t crossings = 0;
  for (double v : x) {
    const int s = (v > 0.0) - (v < 0.0);
    if (s == 0) continue;
    if (prev_sign != 0 && s != prev_sign) ++crossings;
    prev_sign = s;
  }
  return static_cast<double>(crossings) / static_cast<double>(x.size() - 1);
}

double rms_energy(const Frame& f) {
  if (f.values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : f.values) acc += v * v;
  return std::sqrt(acc / static_cast<double>(f.values.size()));
}

double normalized_autocorrelation(std::span<const double> x, std::size_t lag) {
  if (lag >= x.size()) return 0.0;
  const std::size_t n = x.size() - lag;
  double num = 0.0, e0 = 0.0, e1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += x[i] * x[i + lag];
    e0 += x[i] * x[i];
    e1 += x[i + lag] * x[i + lag];
  }
  if (e0 <= 0.0 || e1 <= 0.0) return 0.0;
  return num / std::sqrt(e0 * e1);
}

namespace {

// Normalized autocorrelation for every lag in [0, max_lag] via one FFT and
// running energies of the head and tail segments.
std::vector<double> normalized_acf(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  const auto raw = detail::autocorrelation(x, max_lag);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];
  std::vector<double> r(max_lag + 1, 0.0);
  for (std::size_t lag = 0; lag <= max_lag && lag < n; ++lag) {
    const double head = prefix[n - lag];
    const double tail = prefix[n] - prefix[lag];
    if (head > 0.0 && tail > 0.0) r[lag] = raw[lag] / std::sqrt(head * tail);
  }
  return r;
}

}  // namespace

double f0_acf(const Frame& f, double sample_rate_hz, double fmin_hz, double fmax_hz,
              double voicing_threshold) {
  if (!(fmin_hz > 0.0 && fmin_hz < fmax_hz && fmax_hz < sample_rate_hz / 2.0)) {
    throw ParameterError("f0 search requires 0 < fmin < fmax < fs/2");
  }
  const auto& x = f.values;
  const std::size_t n = x.size();
  if (n < 4) return 0.0;

  auto min_lag = static_cast<std::size_t>(std::floor(sample_rate_hz / fmax_hz));
  auto max_lag = static_cast<std::size_t>(std::ceil(sample_rate_hz / fmin_hz));
  min_lag = std::max<std::size_t>(min_lag, 2);
  max_lag = std::min(max_lag, n - 2);
  if (min_lag >= max_lag) return 0.0;

  const auto r = normalized_acf(x, max_lag + 1);
  if (r[0] <= 0.0) return 0.0;

  double best = -1.0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1]) best = std::max(best, r[lag]);
  }
  if (best < voicing_threshold) return 0.0;

  // Shortest-lag peak close to the best one, which avoids sub-harmonic picks
  // on strongly periodic frames where every multiple of the period scores ~1.
  std::size_t peak = 0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    if (r[lag] >= r[lag - 1] && r[lag] > r[lag + 1] && r[lag] >= 0.9 * best) {
      peak = lag;
      break;
    }
  }
  const double a = r[peak - 1], b = r[peak], c = r[peak + 1];
  const double denom = a - 2.0 * b + c;
  double offset = 0.0;
  if (denom < 0.0) offset = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  return sample_rate_hz / (static_cast<double>(peak) + offset);
}

double hnr(const Frame& f, double sample_rate_hz, double f0_hz) {
  if (!(f0_hz > 0.0)) return -kHnrClampDb;
  const auto lag = static_cast<std::size_t>(std::llround(sample_rate_hz / f0_hz));
  if (lag == 0 || lag + 1 >= f.values.size()) return -kHnrClampDb;
  const double r = normalized_autocorrelation(f.values, lag);
  if (r <= 0.0) return -kHnrClampDb;
  if (r >= 1.0) return kHnrClampDb;
  const double db = 10.0 * std::log10(r / (1.0 - r));
  return std::clamp(db, -kHnrClampDb, kHnrClampDb);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(double sample_rate_hz, std::size_t nfft, int n_filters)
    : nfft_(nfft), n_filters_(n_filters) {
  if (n_filters < 1) throw ParameterError("mel filterbank needs at least one filter");
  const double top = hz_to_mel(sample_rate_hz / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_filters + 1));
  }
  const std::size_t bins = nfft / 2 + 1;
  const double bin_hz = sample_rate_hz / static_cast<double>(nfft);
  bands_.reserve(static_cast<std::size_t>(n_filters));
  for (int j = 1; j <= n_filters; ++j) {
    const double lo = edges[j - 1], mid = edges[j], hi = edges[j + 1];
    Band band{bins, {}};
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (hz > lo && hz <= mid) {
        w = (hz - lo) / (mid - lo);
      } else if (hz > mid && hz < hi) {
        w = (hi - hz) / (hi - mid);
      }
      if (w <= 0.0) {
        if (band.first_bin != bins) break;
        continue;
      }
      if (band.first_bin == bins) band.first_bin = k;
      band.weights.push_back(w);
    }
    if (band.first_bin == bins) band.first_bin = 0;
    bands_.push_back(std::move(band));
  }
}

std::vector<double> MelFilterbank::apply(std::span<const double> magnitude) const {
  std::vector<double> out(bands_.size(), 0.0);
  for (std::size_t j = 0; j < bands_.size(); ++j) {
    const Band& b = bands_[j];
    double acc = 0.0;
    for (std::size_t i = 0; i < b.weights.size(); ++i) {
      acc += b.weights[i] * magnitude[b.first_bin + i];
    }
    out[j] = acc;
  }
  return out;
}

std::vector<double> mfcc(const Frame& f, const MelFilterbank& bank, int n_coeffs) {
  if (n_coeffs < 1 || n_coeffs > bank.filters()) {
    throw ParameterError("mfcc requires 1 <= n_coeffs <= n_filters");
  }
  const auto mag = detail::magnitude_spectrum(f.values, bank.nfft());
  auto energies = bank.apply(mag);
  for (double& e : energies) e = std::log(std::max(e, kMelLogFloor));

  const auto nf = static_cast<double>(energies.size());
  const double scale = std::sqrt(2.0 / nf);
  std::vector<double> c(static_cast<std::size_t>(n_coeffs));
  for (int i = 1; i <= n_coeffs; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < energies.size(); ++j) {
      acc += energies[j] *
             std::cos(std::numbers::pi * i * (static_cast<double>(j) + 0.5) / nf);
    }
    c[static_cast<std::size_t>(i - 1)] = scale * acc;
  }
  return c;
}

std::vector<double> mfcc(const Frame& f, double sample_rate_hz, int n_filters, int n_coeffs) {
  const MelFilterbank bank(sample_rate_hz, detail::next_pow2(f.values.size()), n_filters);
  return mfcc(f, bank, n_coeffs);
}

LldMatrix delta(const LldMatrix& m, int window) {
  if (window < 1) throw ParameterError("delta window must be >= 1");
  const std::size_t frames = m.frames();
  const auto w = static_cast<std::size_t>(window);
  if (frames < 2 * w + 1) {
    throw TooShortError(2 * w + 1, frames);
  }
  const std::size_t cols = m.descriptors();
  auto names = m.descriptor_names();
  for (std::size_t c = 0; c < cols; ++c) names.push_back(names[c] + "_de");
  LldMatrix out(frames, std::move(names), m.frame_plan());

  double norm = 0.0;
  for (int k = 1; k <= window; ++k) norm += static_cast<double>(k * k);
  norm *= 2.0;

  const auto last = static_cast<std::ptrdiff_t>(frames) - 1;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < cols; ++c) out.at(t, c) = m.at(t, c);
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int k = 1; k <= window; ++k) {
        const auto ahead = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + k, last);
        const auto behind = std::max<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) - k, 0);
        acc += k * (m.at(static_cast<std::size_t>(ahead), c) -
                    m.at(static_cast<std::size_t>(behind), c));
      }
      out.at(t, cols + c) = acc / norm;
    }
  }
  return out;
}

LldMatrix extract_lld(const Waveform& w, const FramePlan& plan, const LldConfig& config) {
  const double fs = w.sample_rate_hz();
  const auto raw_frames = frame_signal(w, plan);
  const auto emph_frames = frame_signal(pre_emphasize(w, config.pre_emphasis), plan);
  const std::size_t len = raw_frames.front().values.size();
  const MelFilterbank bank(fs, detail::next_pow2(len), config.mel_filters);
  const auto hamming = window_coefficients(Window::Hamming, len);

  std::vector<std::string> names(kBaseLldNames.begin(), kBaseLldNames.end());
  LldMatrix base(raw_frames.size(), std::move(names), plan);
  Frame windowed;
  for (std::size_t t = 0; t < raw_frames.size(); ++t) {
    const Frame& f = raw_frames[t];
    base.at(t, 0) = zcr(f);
    base.at(t, 1) = rms_energy(f);
    const double pitch =
        f0_acf(f, fs, config.f0_min_hz, config.f0_max_hz, config.voicing_threshold);
    base.at(t, 2) = pitch;
    base.at(t, 3) = hnr(f, fs, pitch);

    windowed.start_sample = f.start_sample;
    windowed.values = emph_frames[t].values;
    for (std::size_t i = 0; i < len; ++i) windowed.values[i] *= hamming[i];
    const auto cep = mfcc(windowed, bank, config.mfcc_coeffs);
    for (std::size_t i = 0; i < cep.size() && 4 + i < kBaseLldCount; ++i) {
      base.at(t, 4 + i) = cep[i];
    }
  }
  return delta(base, config.delta_window);
}

}  // namespace sermm
