#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

struct RmsSeries {
  std::vector<double> values;
  double hop_seconds = 0.0;
  double window_seconds = 0.0;
  std::size_t hop_samples = 0;
  std::size_t window_samples = 0;
};

struct VocalSegment {
  Waveform waveform;
  double source_offset_seconds = 0.0;
  BeatAnnotation beats;  // segment-local times
};

struct SegmentationConfig {
  double rms_threshold = 0.01;
  double min_silence_seconds = 8.0;
  double window_seconds = 0.1;
  double hop_seconds = 0.01;
};

inline double global_rms(const Waveform& w) {
  if (w.samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : w.samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(w.samples.size()));
}

// Divides every sample by the global RMS so the output has RMS 1.
inline Waveform normalize_rms(const Waveform& w) {
  const double rms = global_rms(w);
  if (!(rms > 0.0)) throw DegenerateInput("normalize_rms: signal has zero energy");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    out.samples[i] = static_cast<float>(static_cast<double>(w.samples[i]) / rms);
  return out;
}

namespace segmentation_detail {

inline std::size_t seconds_to_samples(double seconds, int rate) {
  return static_cast<std::size_t>(std::llround(seconds * rate));
}

inline std::vector<double> prefix_energy(const Waveform& w) {
  std::vector<double> prefix(w.samples.size() + 1, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    prefix[i + 1] = prefix[i] + static_cast<double>(w.samples[i]) * w.samples[i];
  return prefix;
}

}  // namespace segmentation_detail

// values[i] = RMS of samples [i*hop, i*hop + window).
inline RmsSeries frame_rms(const Waveform& w, double window_seconds = 0.1, double hop_seconds = 0.01) {
  using namespace segmentation_detail;
  if (!(hop_seconds > 0.0) || window_seconds < hop_seconds)
    throw InvalidArgument("frame_rms: requires window >= hop > 0");
  if (w.sample_rate <= 0) throw InvalidArgument("frame_rms: invalid sample rate");
  const std::size_t win = std::max<std::size_t>(1, seconds_to_samples(window_seconds, w.sample_rate));
  const std::size_t hop = std::max<std::size_t>(1, seconds_to_samples(hop_seconds, w.sample_rate));
  if (w.samples.size() < win) throw InvalidArgument("frame_rms: waveform shorter than one window");

  const auto prefix = prefix_energy(w);
  RmsSeries r;
  r.hop_seconds = hop_seconds;
  r.window_seconds = window_seconds;
  r.hop_samples = hop;
  r.window_samples = win;
  const std::size_t n = (w.samples.size() - win) / hop + 1;
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double energy = prefix[i * hop + win] - prefix[i * hop];
    r.values[i] = std::sqrt(std::max(0.0, energy) / static_cast<double>(win));
  }
  return r;
}

// Half-open sample range [begin, end).
struct SampleSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Sample ranges of silent runs that qualify for removal. A run of silent
// frames i..j covers [i*hop, j*hop + window); runs touching either edge
// of the signal are extended to that edge.
inline std::vector<SampleSpan> removable_silences(const Waveform& w, const SegmentationConfig& cfg = {}) {
  const std::size_t len = w.samples.size();
  const double min_samples = cfg.min_silence_seconds * w.sample_rate;
  std::vector<SampleSpan> spans;
  if (len == 0) return spans;

  const std::size_t win = std::max<std::size_t>(1, segmentation_detail::seconds_to_samples(cfg.window_seconds, w.sample_rate));
  if (len < win) {
    if (global_rms(w) < cfg.rms_threshold && static_cast<double>(len) >= min_samples) spans.push_back({0, len});
    return spans;
  }

  const RmsSeries rms = frame_rms(w, cfg.window_seconds, cfg.hop_seconds);
  const std::size_t n = rms.values.size();
  std::size_t i = 0;
  while (i < n) {
    if (rms.values[i] >= cfg.rms_threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && rms.values[j + 1] < cfg.rms_threshold) ++j;
    SampleSpan s{i * rms.hop_samples, j * rms.hop_samples + rms.window_samples};
    if (i == 0) s.begin = 0;
    if (j == n - 1) s.end = len;
    if (static_cast<double>(s.end - s.begin) >= min_samples) spans.push_back(s);
    i = j + 1;
  }
  return spans;
}

// Removes long silent runs and returns the voiced remainder as segments.
// Beats inside removed runs are dropped; the rest are shifted to
// segment-local time. A fully silent input yields no segments.
inline std::vector<VocalSegment> split_silence(const Waveform& w, const BeatAnnotation& beats,
                                               const SegmentationConfig& cfg = {}) {
  if (w.sample_rate <= 0) throw InvalidArgument("split_silence: invalid sample rate");
  std::vector<VocalSegment> segments;
  const std::size_t len = w.samples.size();
  if (len == 0 || global_rms(w) == 0.0) return segments;

  const auto removed = removable_silences(w, cfg);
  std::vector<SampleSpan> voiced;
  std::size_t cursor = 0;
  for (const auto& s : removed) {
    if (s.begin > cursor) voiced.push_back({cursor, s.begin});
    cursor = std::max(cursor, s.end);
  }
  if (cursor < len) voiced.push_back({cursor, len});

  const double rate = static_cast<double>(w.sample_rate);
  const auto times = beats.times();
  std::size_t b = 0;
  for (const auto& v : voiced) {
    VocalSegment seg;
    seg.waveform.sample_rate = w.sample_rate;
    seg.waveform.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(v.begin),
                                w.samples.begin() + static_cast<std::ptrdiff_t>(v.end));
    seg.source_offset_seconds = static_cast<double>(v.begin) / rate;
    const double start = seg.source_offset_seconds;
    const double stop = static_cast<double>(v.end) / rate;
    std::vector<double> local;
    while (b < times.size() && times[b] < start) ++b;
    while (b < times.size() && times[b] <= stop) {
      local.push_back(std::max(0.0, times[b] - start));
      ++b;
    }
    // Shifting may collapse two beats onto the same value only through
    // rounding; keep the annotation strictly increasing.
    local.erase(std::unique(local.begin(), local.end()), local.end());
    seg.beats = BeatAnnotation(std::move(local));
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace vocalbeat
