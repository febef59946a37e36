#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <vector>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

struct ResampleOptions {
  int zero_crossings = 32;  // filter half-length, in zero crossings of the sinc
  double rolloff = 0.9;     // cutoff as a fraction of the lower Nyquist rate
  double kaiser_beta = 8.0;
};

namespace resample_detail {

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

class KaiserSinc {
 public:
  KaiserSinc(double cutoff, double half_width, double beta)
      : cutoff_(cutoff), half_width_(half_width), beta_(beta), norm_(1.0 / std::cyl_bessel_i(0.0, beta)) {}

  double operator()(double tau) const {
    double x = tau / half_width_;
    if (std::abs(x) >= 1.0) return 0.0;
    double window = std::cyl_bessel_i(0.0, beta_ * std::sqrt(1.0 - x * x)) * norm_;
    return cutoff_ * sinc(cutoff_ * tau) * window;
  }

 private:
  double cutoff_, half_width_, beta_, norm_;
};

}  // namespace resample_detail

// Band-limited rational resampling with a Kaiser-windowed sinc kernel.
// Output length is ceil(len * target / source).
inline Waveform resample(const Waveform& w, int target_rate, const ResampleOptions& opt = {}) {
  if (target_rate <= 0) throw InvalidArgument("resample: target rate must be positive");
  if (w.sample_rate <= 0) throw InvalidArgument("resample: source rate must be positive");
  if (target_rate == w.sample_rate) return w;

  const std::int64_t g = std::gcd<std::int64_t>(target_rate, w.sample_rate);
  const std::int64_t up = target_rate / g;
  const std::int64_t down = w.sample_rate / g;
  const double cutoff = opt.rolloff * std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = opt.zero_crossings / cutoff;
  const std::int64_t reach = static_cast<std::int64_t>(std::ceil(half_width));
  const std::int64_t taps = 2 * reach + 1;
  const resample_detail::KaiserSinc kernel(cutoff, half_width, opt.kaiser_beta);

  const std::int64_t n_in = static_cast<std::int64_t>(w.samples.size());
  const std::int64_t n_out = (n_in * up + down - 1) / down;

  // One normalized filter per fractional phase when the phase count is small.
  const bool use_table = up <= 4096;
  std::vector<double> table;
  auto build_phase = [&](std::int64_t phase, double* dst) {
    double sum = 0.0;
    for (std::int64_t j = -reach; j <= reach; ++j) {
      double tau = static_cast<double>(phase) / static_cast<double>(up) - static_cast<double>(j);
      double h = kernel(tau);
      dst[j + reach] = h;
      sum += h;
    }
    if (sum != 0.0)
      for (std::int64_t j = 0; j < taps; ++j) dst[j] /= sum;
  };
  if (use_table) {
    table.resize(static_cast<std::size_t>(up * taps));
    for (std::int64_t p = 0; p < up; ++p) build_phase(p, table.data() + p * taps);
  }

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  std::vector<double> scratch(use_table ? 0 : static_cast<std::size_t>(taps));
  for (std::int64_t n = 0; n < n_out; ++n) {
    const std::int64_t pos = n * down;
    const std::int64_t base = pos / up;
    const std::int64_t phase = pos % up;
    const double* h;
    if (use_table) {
      h = table.data() + phase * taps;
    } else {
      build_phase(phase, scratch.data());
      h = scratch.data();
    }
    double acc = 0.0;
    const std::int64_t lo = std::max<std::int64_t>(0, base - reach);
    const std::int64_t hi = std::min<std::int64_t>(n_in - 1, base + reach);
    for (std::int64_t k = lo; k <= hi; ++k) acc += h[k - base + reach] * w.samples[static_cast<std::size_t>(k)];
    out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace vocalbeat
