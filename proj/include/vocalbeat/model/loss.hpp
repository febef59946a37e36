#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

// Per-frame beat targets: 1 at round(t * fps), neighbours raised to at
// least 0.5, zero elsewhere.
inline std::vector<float> make_targets(const BeatAnnotation& beats, Eigen::Index n_frames, double fps) {
  if (n_frames < 0) throw InvalidArgument("make_targets: negative frame count");
  if (!(fps > 0.0)) throw InvalidArgument("make_targets: fps must be positive");
  std::vector<float> y(static_cast<std::size_t>(n_frames), 0.0f);
  const double duration = static_cast<double>(n_frames) / fps;
  std::vector<Eigen::Index> centers;
  for (double t : beats.times()) {
    if (t < 0.0 || t > duration + 1e-9)
      throw InvalidArgument("make_targets: beat at " + std::to_string(t) + " s outside [0, " +
                            std::to_string(duration) + "] s");
    if (n_frames == 0) continue;
    centers.push_back(std::min<Eigen::Index>(std::llround(t * fps), n_frames - 1));
  }
  for (Eigen::Index c : centers) {
    for (Eigen::Index nb : {c - 1, c + 1})
      if (nb >= 0 && nb < n_frames) y[static_cast<std::size_t>(nb)] = std::max(y[static_cast<std::size_t>(nb)], 0.5f);
  }
  for (Eigen::Index c : centers) y[static_cast<std::size_t>(c)] = 1.0f;
  return y;
}

// Numerically stable per-frame BCE: max(z,0) - z*y + log(1 + exp(-|z|)).
inline double bce_term(double z, double y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

// Sum of bce_term over the first `valid` frames.
inline double bce_with_logits_sum(std::span<const double> logits, std::span<const float> targets, std::size_t valid) {
  if (logits.size() != targets.size()) throw InvalidArgument("bce_with_logits: length mismatch");
  if (valid > logits.size()) throw InvalidArgument("bce_with_logits: valid exceeds length");
  double sum = 0.0;
  for (std::size_t i = 0; i < valid; ++i) sum += bce_term(logits[i], targets[i]);
  return sum;
}

// Mean binary cross-entropy with logits over all frames.
inline double bce_with_logits(std::span<const double> logits, std::span<const float> targets) {
  if (logits.size() != targets.size()) throw InvalidArgument("bce_with_logits: length mismatch");
  if (logits.empty()) throw InvalidArgument("bce_with_logits: empty input");
  return bce_with_logits_sum(logits, targets, logits.size()) / static_cast<double>(logits.size());
}

}  // namespace vocalbeat
