#include "ppl/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ppl/errors.hpp"
#include "ppl/io_util.hpp"

namespace ppl {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint32_t read_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}

std::uint16_t read_u16(const char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() < 44 || data.compare(0, 4, "RIFF") != 0 || data.compare(8, 4, "WAVE") != 0)
    throw ValidationError("not a RIFF/WAVE file: " + path);

  std::size_t pos = 12;
  int channels = 0, bits = 0;
  double rate = 0;
  AudioBuffer audio;
  bool got_fmt = false, got_data = false;
  while (pos + 8 <= data.size()) {
    const std::string id = data.substr(pos, 4);
    const std::uint32_t size = read_u32(data.data() + pos + 4);
    pos += 8;
    if (pos + size > data.size()) throw ValidationError("truncated WAV chunk in " + path);
    if (id == "fmt ") {
      const std::uint16_t format = read_u16(data.data() + pos);
      channels = read_u16(data.data() + pos + 2);
      rate = read_u32(data.data() + pos + 4);
      bits = read_u16(data.data() + pos + 14);
      if (format != 1 || channels != 1 || bits != 16)
        throw ValidationError("unsupported WAV encoding (need 16-bit PCM mono): " + path);
      got_fmt = true;
    } else if (id == "data") {
      const std::size_t n = size / 2;
      audio.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t s;
        std::memcpy(&s, data.data() + pos + 2 * i, 2);
        audio.samples[i] = static_cast<double>(s) / 32768.0;
      }
      got_data = true;
    }
    pos += size + (size & 1);
  }
  if (!got_fmt || !got_data) throw ValidationError("missing fmt/data chunk: " + path);
  audio.sample_rate = rate;
  return audio;
}

void write_wav(const AudioBuffer& audio, const std::string& path) {
  const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_bytes = n * 2;
  const std::uint32_t rate = static_cast<std::uint32_t>(audio.sample_rate);
  std::string out;
  out.reserve(44 + data_bytes);
  auto put_u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  auto put_u16 = [&](std::uint16_t v) { out.append(reinterpret_cast<const char*>(&v), 2); };
  out.append("RIFF");
  put_u32(36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(rate);
  put_u32(rate * 2);
  put_u16(2);
  put_u16(16);
  out.append("data");
  put_u32(data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double x = std::clamp(audio.samples[i], -1.0, 1.0);
    const std::int16_t s = static_cast<std::int16_t>(std::lrint(x * 32767.0));
    out.append(reinterpret_cast<const char*>(&s), 2);
  }
  write_file_atomic(path, out);
}

namespace {

// in-place radix-2 FFT, n a power of two
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

struct F0Result {
  double f0_hz = 0.0;
  double nac = 0.0;  // normalized autocorrelation at the chosen lag
  bool voiced = false;
};

// Normalized autocorrelation pitch estimate on one window, with parabolic
// interpolation of the peak lag.
F0Result estimate_f0(const double* x, int len, double sr, const FrontendConfig& cfg) {
  F0Result res;
  const int lag_min = std::max(2, static_cast<int>(std::floor(sr / cfg.f0_max_hz)));
  const int lag_max = std::min(len - 2, static_cast<int>(std::ceil(sr / cfg.f0_min_hz)));
  if (lag_max <= lag_min) return res;

  // prefix sums of x^2 for the normalization terms
  std::vector<double> cum(len + 1, 0.0);
  for (int i = 0; i < len; ++i) cum[i + 1] = cum[i] + x[i] * x[i];
  if (cum[len] <= 0.0) return res;

  std::vector<double> nac(lag_max + 1, 0.0);
  int best = -1;
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    double corr = 0.0;
    const int m = len - lag;
    for (int i = 0; i < m; ++i) corr += x[i] * x[i + lag];
    const double e1 = cum[m];
    const double e2 = cum[len] - cum[lag];
    const double denom = std::sqrt(e1 * e2);
    nac[lag] = denom > 0.0 ? corr / denom : 0.0;
    if (best < 0 || nac[lag] > nac[best]) best = lag;
  }
  if (best < 0) return res;

  double lag_star = best;
  if (best > lag_min && best < lag_max) {
    const double y1 = nac[best - 1], y2 = nac[best], y3 = nac[best + 1];
    const double denom = y1 - 2.0 * y2 + y3;
    if (std::abs(denom) > 1e-12) {
      const double shift = 0.5 * (y1 - y3) / denom;
      if (std::abs(shift) < 1.0) lag_star = best + shift;
    }
  }
  res.f0_hz = sr / lag_star;
  res.nac = std::clamp(nac[best], 0.0, 0.999999);
  res.voiced = nac[best] >= cfg.voicing_threshold;
  return res;
}

}  // namespace

ContourStack extract_contours(const AudioBuffer& audio, const Utterance& utterance,
                              const FrontendConfig& cfg) {
  if (audio.samples.empty()) throw ValidationError("extract_contours: empty audio");
  if (audio.sample_rate < 8000.0)
    throw ValidationError("extract_contours: sample rate below 8 kHz");
  const double duration = audio.duration_s();
  if (utterance.end_time_s() > duration + ContourStack::kHopS)
    throw ValidationError("extract_contours: utterance '" + utterance.id +
                          "' extends past the audio");

  const double sr = audio.sample_rate;
  const int n_samples = static_cast<int>(audio.samples.size());
  const int frames = frame_count_for_duration(duration);

  Eigen::VectorXd log_f0 = Eigen::VectorXd::Zero(frames);
  Eigen::VectorXd intensity_db(frames);
  Eigen::VectorXd hnr_db(frames);
  MatRM bands(5, frames);
  std::vector<std::uint8_t> voicing(frames, 0);

  const int f0_half = static_cast<int>(cfg.f0_window_s * sr) / 2;
  const int rms_half = static_cast<int>(0.020 * sr) / 2;
  int fft_len = 1;
  while (fft_len < static_cast<int>(0.032 * sr)) fft_len <<= 1;
  std::vector<std::complex<double>> spec(fft_len);
  std::vector<double> hann(fft_len);
  for (int i = 0; i < fft_len; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (fft_len - 1));

  const double band_edges[6] = {0.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0};

  std::vector<double> window;
  for (int t = 0; t < frames; ++t) {
    const double center_s = (t + 0.5) * ContourStack::kHopS;
    const int center = static_cast<int>(center_s * sr);

    // intensity
    {
      const int lo = std::max(0, center - rms_half);
      const int hi = std::min(n_samples, center + rms_half);
      double ss = 0.0;
      for (int i = lo; i < hi; ++i) ss += audio.samples[i] * audio.samples[i];
      const double rms = hi > lo ? std::sqrt(ss / (hi - lo)) : 0.0;
      intensity_db[t] =
          rms > 0.0 ? std::max(cfg.silence_floor_db, 20.0 * std::log10(rms)) : cfg.silence_floor_db;
    }

    // F0 + HNR from normalized autocorrelation
    {
      const int lo = std::max(0, center - f0_half);
      const int hi = std::min(n_samples, center + f0_half);
      window.assign(audio.samples.begin() + lo, audio.samples.begin() + hi);
      F0Result f0 = estimate_f0(window.data(), static_cast<int>(window.size()), sr, cfg);
      const bool loud_enough = intensity_db[t] > cfg.voicing_silence_db;
      if (f0.voiced && loud_enough && f0.f0_hz >= cfg.f0_min_hz && f0.f0_hz <= cfg.f0_max_hz) {
        voicing[t] = 1;
        log_f0[t] = std::log(f0.f0_hz);
        hnr_db[t] = std::clamp(10.0 * std::log10(f0.nac / (1.0 - f0.nac)), -20.0, 40.0);
      } else {
        hnr_db[t] = -20.0;
      }
    }

    // band energies
    {
      const int lo = center - fft_len / 2;
      for (int i = 0; i < fft_len; ++i) {
        const int idx = lo + i;
        const double s = (idx >= 0 && idx < n_samples) ? audio.samples[idx] : 0.0;
        spec[i] = s * hann[i];
      }
      fft(spec);
      double energy[5] = {0, 0, 0, 0, 0};
      const int half = fft_len / 2;
      for (int k = 1; k <= half; ++k) {
        const double freq = sr * static_cast<double>(k) / fft_len;
        const double p = std::norm(spec[k]);
        for (int b = 0; b < 5; ++b) {
          if (freq >= band_edges[b] && freq < std::min(band_edges[b + 1], sr / 2.0)) {
            energy[b] += p;
            break;
          }
        }
      }
      for (int b = 0; b < 5; ++b)
        bands(b, t) = 10.0 * std::log10(energy[b] / fft_len + 1e-12);
    }
  }

  return assemble_stack(log_f0, voicing, intensity_db, hnr_db, bands);
}

}  // namespace ppl
