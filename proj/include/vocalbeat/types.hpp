#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vocalbeat/error.hpp"

namespace vocalbeat {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FeatureMatrix = RowMatrix<float>;

// Mono audio. Amplitudes are nominally in [-1, 1] but RMS-normalized
// signals may exceed that.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t size() const noexcept { return samples.size(); }
  double duration() const noexcept {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }

  void validate() const {
    if (sample_rate <= 0) throw InvalidArgument("waveform sample rate must be positive");
    for (float s : samples)
      if (!std::isfinite(s)) throw DataError("waveform contains non-finite samples");
  }
};

// N frames x D dimensions, sampled at `fps` frames per second.
struct FeatureSequence {
  FeatureMatrix frames;
  double fps = 0.0;

  Eigen::Index n_frames() const noexcept { return frames.rows(); }
  Eigen::Index dim() const noexcept { return frames.cols(); }

  void validate() const {
    if (!(fps > 0.0)) throw InvalidArgument("feature fps must be positive");
    if (frames.rows() < 1) throw InvalidArgument("feature sequence has no frames");
    if (!frames.allFinite()) throw DataError("feature sequence contains non-finite values");
  }
};

// Strictly increasing, non-negative beat times in seconds.
class BeatAnnotation {
 public:
  BeatAnnotation() = default;
  explicit BeatAnnotation(std::vector<double> times) : times_(std::move(times)) {
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!std::isfinite(times_[i]) || times_[i] < 0.0)
        throw InvalidArgument("beat times must be finite and non-negative");
      if (i > 0 && !(times_[i] > times_[i - 1]))
        throw InvalidArgument("beat times must be strictly increasing");
    }
  }

  std::span<const double> times() const noexcept { return times_; }
  const std::vector<double>& vector() const noexcept { return times_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  double operator[](std::size_t i) const { return times_[i]; }

  friend bool operator==(const BeatAnnotation&, const BeatAnnotation&) = default;

 private:
  std::vector<double> times_;
};

}  // namespace vocalbeat
