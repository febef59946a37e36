#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "vocalbeat/error.hpp"
#include "vocalbeat/resample.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

struct MelConfig {
  double fps = 100.0;
  int n_mels = 80;
  double fmin = 30.0;
  double fmax = 17000.0;
  double log_offset = 1e-6;
};

struct SpectralConfig {
  int sample_rate = 44100;
  std::vector<int> window_sizes{1024, 2048, 4096};
  MelConfig mel{};
  bool rectify_diff = true;
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular filters with peaks of 1, equally spaced on the mel scale.
// weights(b, k) is the gain of FFT bin k in band b.
class MelFilterbank {
 public:
  MelFilterbank(int n_fft, int sample_rate, int n_mels, double fmin, double fmax)
      : n_bins_(n_fft / 2 + 1), n_mels_(n_mels) {
    if (n_mels < 1) throw InvalidArgument("mel filterbank needs at least one band");
    const double nyquist = 0.5 * sample_rate;
    fmax = std::min(fmax, nyquist);
    if (!(fmin >= 0.0 && fmin < fmax)) throw InvalidArgument("mel filterbank frequency range is empty");
    const double mel_lo = hz_to_mel(fmin);
    const double mel_hi = hz_to_mel(fmax);
    edges_.resize(static_cast<std::size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i) edges_[i] = mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1);

    weights_ = RowMatrix<double>::Zero(n_mels, n_bins_);
    for (int k = 0; k < n_bins_; ++k) {
      const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / n_fft);
      for (int b = 0; b < n_mels; ++b) weights_(b, k) = band_gain(b, mel);
    }
  }

  // Gain of band b at a given mel value (used for frequency lookups too).
  double band_gain(int b, double mel) const {
    const double left = edges_[b], center = edges_[b + 1], right = edges_[b + 2];
    if (mel <= left || mel >= right) return 0.0;
    return mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
  }

  int n_bins() const noexcept { return n_bins_; }
  int n_mels() const noexcept { return n_mels_; }
  const RowMatrix<double>& weights() const noexcept { return weights_; }

 private:
  int n_bins_;
  int n_mels_;
  std::vector<double> edges_;
  RowMatrix<double> weights_;
};

namespace spectral_detail {

// FFTW planning is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard lock(fftw_planner_mutex());
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() noexcept { return in_; }
  void execute() { fftw_execute(plan_); }
  double magnitude(int k) const { return std::hypot(out_[k][0], out_[k][1]); }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace spectral_detail

// Centered STFT magnitudes (Hann window) mapped through a mel filterbank,
// then log10(mel + offset). Frame i is centered on sample i*hop, with
// hop = sample_rate / fps; there are ceil(len / hop) frames.
inline FeatureSequence log_mel(const Waveform& w, int window_size, const MelConfig& cfg = {}) {
  if (window_size < 2) throw InvalidArgument("log_mel: window must be at least 2 samples");
  if (w.sample_rate <= 0) throw InvalidArgument("log_mel: invalid sample rate");
  if (!(cfg.fps > 0.0)) throw InvalidArgument("log_mel: fps must be positive");
  const double hop_real = w.sample_rate / cfg.fps;
  const long hop = std::lround(hop_real);
  if (hop < 1 || std::abs(hop_real - static_cast<double>(hop)) > 1e-9)
    throw InvalidArgument("log_mel: sample_rate / fps must be an integer hop");
  if (w.samples.empty()) throw DegenerateInput("log_mel: empty waveform");

  const long len = static_cast<long>(w.samples.size());
  const long n_frames = (len + hop - 1) / hop;
  const MelFilterbank bank(window_size, w.sample_rate, cfg.n_mels, cfg.fmin, cfg.fmax);

  std::vector<double> window(static_cast<std::size_t>(window_size));
  for (int n = 0; n < window_size; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window_size);

  spectral_detail::RealFft fft(window_size);
  Eigen::VectorXd magnitude(bank.n_bins());
  FeatureSequence out;
  out.fps = cfg.fps;
  out.frames.resize(n_frames, cfg.n_mels);
  const long half = window_size / 2;
  for (long i = 0; i < n_frames; ++i) {
    const long start = i * hop - half;
    double* buf = fft.input();
    for (long n = 0; n < window_size; ++n) {
      const long idx = start + n;
      buf[n] = (idx >= 0 && idx < len) ? window[n] * w.samples[static_cast<std::size_t>(idx)] : 0.0;
    }
    fft.execute();
    for (int k = 0; k < bank.n_bins(); ++k) magnitude[k] = fft.magnitude(k);
    const Eigen::VectorXd mel = bank.weights() * magnitude;
    for (int b = 0; b < cfg.n_mels; ++b)
      out.frames(i, b) = static_cast<float>(std::log10(mel[b] + cfg.log_offset));
  }
  return out;
}

// out[i] = f[i] - f[i-1] (half-wave rectified when `rectify`), out[0] = 0.
inline FeatureSequence first_diff(const FeatureSequence& f, bool rectify = true) {
  if (f.n_frames() < 1) throw InvalidArgument("first_diff: empty sequence");
  FeatureSequence out;
  out.fps = f.fps;
  out.frames = FeatureMatrix::Zero(f.n_frames(), f.dim());
  for (Eigen::Index i = 1; i < f.n_frames(); ++i) {
    out.frames.row(i) = f.frames.row(i) - f.frames.row(i - 1);
    if (rectify) out.frames.row(i) = out.frames.row(i).cwiseMax(0.0f);
  }
  return out;
}

// Keeps the first n frames.
inline FeatureSequence truncate_frames(const FeatureSequence& f, Eigen::Index n) {
  if (n > f.n_frames()) throw InvalidArgument("truncate_frames: sequence is shorter than requested");
  return FeatureSequence{f.frames.topRows(n), f.fps};
}

// Horizontal concatenation of time-aligned parts.
inline FeatureSequence stack_features(std::span<const FeatureSequence> parts) {
  if (parts.empty()) throw InvalidArgument("stack_features: no parts");
  const double fps = parts.front().fps;
  const Eigen::Index n = parts.front().n_frames();
  Eigen::Index dim = 0;
  for (const auto& p : parts) {
    if (p.fps != fps) throw InvalidArgument("stack_features: parts have different fps");
    if (p.n_frames() != n) throw InvalidArgument("stack_features: parts have different frame counts");
    dim += p.dim();
  }
  FeatureSequence out;
  out.fps = fps;
  out.frames.resize(n, dim);
  Eigen::Index col = 0;
  for (const auto& p : parts) {
    out.frames.middleCols(col, p.dim()) = p.frames;
    col += p.dim();
  }
  return out;
}

// Full spectral front end: resample, then for each window a log-mel block
// followed by its first difference. 3 windows x (80 + 80) = 480 dims.
inline FeatureSequence spectral_features(const Waveform& w, const SpectralConfig& cfg = {}) {
  const Waveform audio = w.sample_rate == cfg.sample_rate ? w : resample(w, cfg.sample_rate);
  std::vector<FeatureSequence> mels;
  Eigen::Index n = -1;
  for (int size : cfg.window_sizes) {
    mels.push_back(log_mel(audio, size, cfg.mel));
    n = n < 0 ? mels.back().n_frames() : std::min(n, mels.back().n_frames());
  }
  std::vector<FeatureSequence> parts;
  for (const auto& m : mels) {
    FeatureSequence mel = truncate_frames(m, n);
    FeatureSequence diff = first_diff(mel, cfg.rectify_diff);
    parts.push_back(std::move(mel));
    parts.push_back(std::move(diff));
  }
  return stack_features(parts);
}

}  // namespace vocalbeat
