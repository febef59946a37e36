#pragma once

// Straightforward reference implementations used to check the library.
// They favour obviousness over speed and share no code with it.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "vocalbeat/decoder.hpp"
#include "vocalbeat/model/params.hpp"
#include "vocalbeat/types.hpp"

namespace oracle {

using vocalbeat::RowMatrix;

// ---- metrics ---------------------------------------------------------------

// Maximum one-to-one matching within tolerance, by exhaustive search over
// subsets of used estimates.
inline double f_measure(std::span<const double> ref, std::span<const double> est, double tol = 0.07) {
  if (ref.empty() && est.empty()) return 1.0;
  if (ref.empty() || est.empty()) return 0.0;
  const std::size_t m = est.size();
  std::vector<int> memo((ref.size() + 1) << m, -1);
  std::function<int(std::size_t, unsigned)> best = [&](std::size_t i, unsigned used) -> int {
    if (i == ref.size()) return 0;
    int& slot = memo[(i << m) | used];
    if (slot >= 0) return slot;
    int b = best(i + 1, used);
    for (std::size_t j = 0; j < m; ++j)
      if (!(used & (1u << j)) && std::abs(ref[i] - est[j]) <= tol) b = std::max(b, 1 + best(i + 1, used | (1u << j)));
    return slot = b;
  };
  const int tp = best(0, 0);
  const double fp = static_cast<double>(est.size()) - tp, fn = static_cast<double>(ref.size()) - tp;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

inline double cemgil(std::span<const double> ref, std::span<const double> est, double sigma = 0.04) {
  if (ref.empty() && est.empty()) return 1.0;
  if (ref.empty() || est.empty()) return 0.0;
  double sum = 0.0;
  for (double r : ref) {
    double g = 0.0;
    for (double e : est) g = std::max(g, std::exp(-(e - r) * (e - r) / (2.0 * sigma * sigma)));
    sum += g;
  }
  return sum / ((ref.size() + est.size()) / 2.0);
}

inline double p_score(std::span<const double> ref, std::span<const double> est, double fraction = 0.2) {
  if (ref.empty() && est.empty()) return 1.0;
  if (ref.empty() || est.empty() || ref.size() < 2) return 0.0;
  std::vector<double> ibi;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) ibi.push_back(ref[i + 1] - ref[i]);
  std::sort(ibi.begin(), ibi.end());
  const std::size_t k = ibi.size();
  const double med = k % 2 ? ibi[k / 2] : 0.5 * (ibi[k / 2 - 1] + ibi[k / 2]);
  const double tol = fraction * med;
  double count = 0.0;
  for (double r : ref)
    for (double e : est)
      if (std::abs(r - e) <= tol) count += 1.0;
  return std::min(1.0, count / static_cast<double>(std::max(ref.size(), est.size())));
}

inline double goto_score(std::span<const double> ref, std::span<const double> est, double threshold = 0.35,
                         double mu = 0.2, double sigma = 0.2) {
  const std::size_t n = ref.size();
  std::vector<double> err(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double prev = i == 0 ? ref[1] - ref[0] : ref[i] - ref[i - 1];
    const double next = i == n - 1 ? ref[n - 1] - ref[n - 2] : ref[i + 1] - ref[i];
    int inside = 0;
    double found = 0.0;
    for (double e : est)
      if (e >= ref[i] - prev / 2 && e < ref[i] + next / 2) {
        ++inside;
        found = e;
      }
    if (inside == 1) err[i] = found < ref[i] ? (found - ref[i]) / (prev / 2) : (found - ref[i]) / (next / 2);
  }
  auto correct = [&](std::ptrdiff_t i) { return i >= 0 && i < static_cast<std::ptrdiff_t>(n) && std::abs(err[i]) < threshold; };
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(n); ++a)
    for (std::ptrdiff_t b = a; b < static_cast<std::ptrdiff_t>(n); ++b) {
      bool all = true;
      for (std::ptrdiff_t i = a; i <= b; ++i) all = all && correct(i);
      if (!all || correct(a - 1) || correct(b + 1)) continue;
      const double len = static_cast<double>(b - a + 1);
      if (len < 0.25 * n) continue;
      double mean = 0.0, mean_abs = 0.0;
      for (std::ptrdiff_t i = a; i <= b; ++i) {
        mean += err[i] / len;
        mean_abs += std::abs(err[i]) / len;
      }
      double ss = 0.0;
      for (std::ptrdiff_t i = a; i <= b; ++i) ss += (err[i] - mean) * (err[i] - mean);
      const double sd = len > 1 ? std::sqrt(ss / (len - 1)) : 0.0;
      if (mean_abs < mu && sd < sigma) return 1.0;
    }
  return 0.0;
}

// Random (ref, est) pair with at most 12 beats each. Reference beats are
// more than twice the F-measure tolerance apart.
inline std::pair<std::vector<double>, std::vector<double>> random_pair(std::mt19937_64& rng, std::size_t min_ref = 0) {
  std::uniform_int_distribution<std::size_t> count(min_ref, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> ref;
  double t = unit(rng);
  const std::size_t n_ref = count(rng);
  for (std::size_t i = 0; i < n_ref; ++i) {
    ref.push_back(t);
    t += 0.15 + 0.85 * unit(rng);
  }
  std::vector<double> est;
  const int mode = static_cast<int>(unit(rng) * 3);
  if (mode == 0) {
    std::uniform_int_distribution<std::size_t> n_est(0, 12);
    const double span = ref.empty() ? 5.0 : ref.back() + 1.0;
    for (std::size_t i = n_est(rng); i > 0; --i) est.push_back(span * unit(rng));
  } else {
    const double jitter = mode == 1 ? 0.05 : 0.15;
    for (double r : ref)
      if (unit(rng) < 0.85) est.push_back(std::max(0.0, r + jitter * (2.0 * unit(rng) - 1.0)));
    if (unit(rng) < 0.5 && est.size() < 12) est.push_back(10.0 * unit(rng));
  }
  std::sort(est.begin(), est.end());
  std::vector<double> clean;
  for (double e : est)
    if (clean.empty() || e > clean.back() + 1e-6) clean.push_back(e);
  if (clean.size() > 12) clean.resize(12);
  return {ref, clean};
}

// ---- attention and forward -------------------------------------------------

inline double phi(double x) { return x > 0 ? x + 1.0 : std::exp(x); }

// Explicit N x N evaluation of normalized kernel attention.
inline RowMatrix<double> quadratic_attention(const RowMatrix<double>& q, const RowMatrix<double>& k,
                                             const RowMatrix<double>& v, Eigen::Index valid = -1) {
  if (valid < 0) valid = k.rows();
  const Eigen::Index n = q.rows();
  RowMatrix<double> a(n, valid);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < valid; ++j) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < q.cols(); ++c) s += phi(q(i, c)) * phi(k(j, c));
      a(i, j) = s;
    }
  RowMatrix<double> out = RowMatrix<double>::Zero(n, v.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm = 0.0;
    for (Eigen::Index j = 0; j < valid; ++j) norm += a(i, j);
    for (Eigen::Index j = 0; j < valid; ++j)
      for (Eigen::Index c = 0; c < v.cols(); ++c) out(i, c) += a(i, j) * v(j, c) / norm;
  }
  return out;
}

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat affine(const Mat& x, const RowMatrix<double>& w, const RowMatrix<double>& b, Eigen::Index c0 = 0,
                  Eigen::Index cols = -1) {
  if (cols < 0) cols = w.cols();
  Mat y = zeros(x.size(), static_cast<std::size_t>(cols));
  for (std::size_t n = 0; n < x.size(); ++n)
    for (Eigen::Index c = 0; c < cols; ++c) {
      double s = b(0, c0 + c);
      for (std::size_t i = 0; i < x[n].size(); ++i) s += x[n][i] * w(static_cast<Eigen::Index>(i), c0 + c);
      y[n][static_cast<std::size_t>(c)] = s;
    }
  return y;
}

inline Mat layer_norm(const Mat& x, const RowMatrix<double>& g, const RowMatrix<double>& b) {
  Mat y = x;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double d = static_cast<double>(x[n].size());
    double mean = 0.0;
    for (double v : x[n]) mean += v / d;
    double var = 0.0;
    for (double v : x[n]) var += (v - mean) * (v - mean) / d;
    for (std::size_t c = 0; c < x[n].size(); ++c)
      y[n][c] = (x[n][c] - mean) / std::sqrt(var + 1e-5) * g(0, static_cast<Eigen::Index>(c)) + b(0, static_cast<Eigen::Index>(c));
  }
  return y;
}

// Beat logits computed one equation at a time.
inline std::vector<double> reference_forward(const vocalbeat::ModelParams<double>& p,
                                             const std::vector<vocalbeat::FeatureMatrix>& layers, Eigen::Index valid = -1) {
  const auto& cfg = p.config;
  const std::size_t n = static_cast<std::size_t>(layers.front().rows());
  if (valid < 0) valid = static_cast<Eigen::Index>(n);
  const std::size_t in_dim = static_cast<std::size_t>(cfg.input_dim), dim = static_cast<std::size_t>(cfg.model_dim);

  Mat input = zeros(n, in_dim);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double w = cfg.input_layers > 0 ? p.layer_weights(0, static_cast<Eigen::Index>(l)) : 1.0;
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t i = 0; i < in_dim; ++i)
        input[t][i] += w * layers[l](static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i));
  }
  Mat x = affine(input, p.w_in, p.b_in);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < dim; ++c) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(c / 2) / static_cast<double>(dim));
      x[t][c] += c % 2 == 0 ? std::sin(t * freq) : std::cos(t * freq);
    }

  const Mat h1 = layer_norm(x, p.ln1_gain, p.ln1_bias);
  Mat concat = zeros(n, dim);
  for (int h = 0; h < cfg.heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * cfg.head_dim;
    const Mat q = affine(h1, p.w_q, p.b_q, c0, cfg.head_dim);
    const Mat k = affine(h1, p.w_k, p.b_k, c0, cfg.head_dim);
    const Mat v = affine(h1, p.w_v, p.b_v, c0, cfg.head_dim);
    for (std::size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      std::vector<double> acc(static_cast<std::size_t>(cfg.head_dim), 0.0);
      for (std::size_t j = 0; j < static_cast<std::size_t>(valid); ++j) {
        double a = 0.0;
        for (std::size_t c = 0; c < acc.size(); ++c) a += phi(q[i][c]) * phi(k[j][c]);
        norm += a;
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += a * v[j][c];
      }
      for (std::size_t c = 0; c < acc.size(); ++c) concat[i][static_cast<std::size_t>(c0) + c] = acc[c] / norm;
    }
  }
  const Mat attn_out = affine(concat, p.w_o, p.b_o);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < dim; ++c) x[t][c] += attn_out[t][c];

  const Mat h2 = layer_norm(x, p.ln2_gain, p.ln2_bias);
  Mat hidden = affine(h2, p.w_ff1, p.b_ff1);
  for (auto& row : hidden)
    for (auto& v : row) v = std::max(v, 0.0);
  const Mat ffn = affine(hidden, p.w_ff2, p.b_ff2);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < dim; ++c) x[t][c] += ffn[t][c];

  const Mat out = layer_norm(x, p.ln_out_gain, p.ln_out_bias);
  const Mat logits = affine(out, p.w_out, p.b_out);
  std::vector<double> z(n);
  for (std::size_t t = 0; t < n; ++t) z[t] = logits[t][0];
  return z;
}

// ---- decoder ---------------------------------------------------------------

struct Lattice {
  std::vector<int> tau, phase;
  std::vector<bool> beat;
  std::vector<std::vector<double>> log_trans;  // -inf where no edge
};

inline Lattice lattice(const vocalbeat::DecoderConfig& cfg) {
  Lattice L;
  std::vector<int> taus;
  for (int tau = 1; tau <= 100000; ++tau) {
    const double bpm = 60.0 * cfg.fps / tau;
    if (bpm <= cfg.max_bpm * (1 + 1e-12) && bpm >= cfg.min_bpm * (1 - 1e-12)) taus.push_back(tau);
    if (bpm < cfg.min_bpm) break;
  }
  for (int tau : taus) {
    const double beat_len = std::max(1.0, std::round(tau / cfg.observation_lambda));
    for (int p = 0; p < tau; ++p) {
      L.tau.push_back(tau);
      L.phase.push_back(p);
      L.beat.push_back(p < beat_len);
    }
  }
  const std::size_t s = L.tau.size();
  L.log_trans.assign(s, std::vector<double>(s, -std::numeric_limits<double>::infinity()));
  for (std::size_t i = 0; i < s; ++i) {
    if (L.phase[i] + 1 < L.tau[i]) {
      L.log_trans[i][i + 1] = 0.0;
      continue;
    }
    double total = 0.0;
    for (int t2 : taus) total += std::exp(-cfg.transition_lambda * std::abs(std::log(double(t2) / L.tau[i])));
    for (std::size_t j = 0; j < s; ++j)
      if (L.phase[j] == 0)
        L.log_trans[i][j] = -cfg.transition_lambda * std::abs(std::log(double(L.tau[j]) / L.tau[i])) - std::log(total);
  }
  return L;
}

struct BestPath {
  double score = -std::numeric_limits<double>::infinity();
  std::vector<int> path;
  double runner_up = -std::numeric_limits<double>::infinity();
};

// Scores every one of S^N state sequences.
inline BestPath enumerate_paths(const Lattice& L, std::span<const double> beat_log, std::span<const double> non_beat_log) {
  const std::size_t s = L.tau.size(), n = beat_log.size();
  BestPath best;
  std::vector<int> path(n, 0);
  while (true) {
    double score = -std::log(static_cast<double>(s));
    for (std::size_t t = 0; t < n; ++t) {
      if (t > 0) score += L.log_trans[static_cast<std::size_t>(path[t - 1])][static_cast<std::size_t>(path[t])];
      score += L.beat[static_cast<std::size_t>(path[t])] ? beat_log[t] : non_beat_log[t];
    }
    if (score > best.score) {
      best.runner_up = best.score;
      best.score = score;
      best.path = path;
    } else if (score > best.runner_up) {
      best.runner_up = score;
    }
    std::size_t t = n;
    while (t > 0) {
      --t;
      if (++path[t] < static_cast<int>(s)) break;
      path[t] = 0;
      if (t == 0) return best;
    }
    if (n == 0) return best;
  }
}

// ---- signals ---------------------------------------------------------------

// Frequency of the largest DFT magnitude (Hann window, full length).
inline double peak_frequency(const vocalbeat::Waveform& w) {
  const int n = static_cast<int>(w.samples.size());
  std::vector<double> in(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) in[i] = w.samples[i] * (0.5 - 0.5 * std::cos(2.0 * M_PI * i / n));
  std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  int best = 0;
  double mag = -1.0;
  for (int k = 1; k <= n / 2; ++k) {
    const double m = std::hypot(out[k][0], out[k][1]);
    if (m > mag) {
      mag = m;
      best = k;
    }
  }
  return static_cast<double>(best) * w.sample_rate / n;
}

}  // namespace oracle
