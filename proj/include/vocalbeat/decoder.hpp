#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vocalbeat/error.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

struct DecoderConfig {
  double fps = 100.0;
  double min_bpm = 55.0;
  double max_bpm = 215.0;
  double transition_lambda = 100.0;
  double observation_lambda = 16.0;

  void validate() const {
    if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidArgument("decoder fps must be positive");
    if (!(min_bpm > 0.0) || !(max_bpm >= min_bpm) || !std::isfinite(max_bpm))
      throw InvalidArgument("decoder tempo range requires 0 < min_bpm <= max_bpm");
    if (!(transition_lambda > 0.0)) throw InvalidArgument("decoder transition lambda must be positive");
    // non-beat states share 1 - a over observation_lambda - 1 parts
    if (!(observation_lambda > 1.0)) throw InvalidArgument("decoder observation lambda must exceed 1");
  }
};

// Tempo/phase lattice. States are ordered by interval, then phase:
// state(k, p) = first_state[k] + p.
struct DecoderStateSpace {
  std::vector<int> intervals;    // beat lengths in frames, ascending
  std::vector<int> first_state;  // index of (intervals[k], 0)
  std::vector<int> state_interval_index;
  std::vector<int> state_phase;
  std::vector<std::uint8_t> beat_state;
  double observation_lambda = 16.0;

  int n_states() const noexcept { return static_cast<int>(state_phase.size()); }
  int n_intervals() const noexcept { return static_cast<int>(intervals.size()); }
  int interval_of(int state) const { return intervals[static_cast<std::size_t>(state_interval_index[static_cast<std::size_t>(state)])]; }
  int last_state(int k) const { return first_state[static_cast<std::size_t>(k)] + intervals[static_cast<std::size_t>(k)] - 1; }
};

inline DecoderStateSpace build_state_space(const DecoderConfig& cfg) {
  cfg.validate();
  // the small slack keeps exact ratios such as 6000/60 from rounding the wrong way
  const int tau_min = std::max(1, static_cast<int>(std::ceil(60.0 * cfg.fps / cfg.max_bpm - 1e-9)));
  const int tau_max = static_cast<int>(std::floor(60.0 * cfg.fps / cfg.min_bpm + 1e-9));
  if (tau_min > tau_max)
    throw InvalidArgument("empty tempo range: no integer beat interval in [" + std::to_string(60.0 * cfg.fps / cfg.max_bpm) +
                          ", " + std::to_string(60.0 * cfg.fps / cfg.min_bpm) + "] frames");
  DecoderStateSpace s;
  s.observation_lambda = cfg.observation_lambda;
  int next = 0;
  for (int tau = tau_min; tau <= tau_max; ++tau) {
    const int k = static_cast<int>(s.intervals.size());
    s.intervals.push_back(tau);
    s.first_state.push_back(next);
    const long beat_len = std::max(1L, std::lround(tau / cfg.observation_lambda));
    for (int p = 0; p < tau; ++p) {
      s.state_interval_index.push_back(k);
      s.state_phase.push_back(p);
      s.beat_state.push_back(p < beat_len ? 1 : 0);
    }
    next += tau;
  }
  return s;
}

inline constexpr double kActivationClamp = 1e-12;

struct ObservationLogs {
  double beat = 0.0;
  double non_beat = 0.0;
};

// Log densities of one activation under the beat and non-beat states.
inline ObservationLogs observation_logs(double activation, double observation_lambda) {
  const double a = std::clamp(activation, kActivationClamp, 1.0 - kActivationClamp);
  return {std::log(a), std::log((1.0 - a) / (observation_lambda - 1.0))};
}

// Per-state log density for one frame.
inline std::vector<double> observation_logprobs(double activation, const DecoderStateSpace& s) {
  const auto o = observation_logs(activation, s.observation_lambda);
  std::vector<double> out(static_cast<std::size_t>(s.n_states()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.beat_state[i] ? o.beat : o.non_beat;
  return out;
}

// Inside a beat, (tau, p) -> (tau, p + 1) with probability one. From the
// last phase, (tau, tau - 1) -> (tau', 0) with log probability
// tempo_log(k, k') where k, k' index `intervals`.
struct TransitionModel {
  RowMatrix<double> tempo_log;

  struct Successor {
    int state;
    double log_prob;
  };
  std::vector<Successor> successors(const DecoderStateSpace& s, int state) const {
    const int k = s.state_interval_index[static_cast<std::size_t>(state)];
    const int p = s.state_phase[static_cast<std::size_t>(state)];
    if (p + 1 < s.intervals[static_cast<std::size_t>(k)]) return {{state + 1, 0.0}};
    std::vector<Successor> out;
    for (int j = 0; j < s.n_intervals(); ++j) out.push_back({s.first_state[static_cast<std::size_t>(j)], tempo_log(k, j)});
    return out;
  }
};

// Unnormalized weight exp(-lambda * |ln(tau' / tau)|), normalized per row.
inline TransitionModel transition_logprobs(const DecoderStateSpace& s, const DecoderConfig& cfg) {
  const int K = s.n_intervals();
  TransitionModel t;
  t.tempo_log.resize(K, K);
  for (int k = 0; k < K; ++k) {
    const double tau = s.intervals[static_cast<std::size_t>(k)];
    double norm = 0.0;
    for (int j = 0; j < K; ++j) {
      const double w = -cfg.transition_lambda * std::abs(std::log(s.intervals[static_cast<std::size_t>(j)] / tau));
      t.tempo_log(k, j) = w;
      norm += std::exp(w);
    }
    const double log_norm = std::log(norm);
    for (int j = 0; j < K; ++j) t.tempo_log(k, j) -= log_norm;
  }
  return t;
}

struct ViterbiPath {
  std::vector<int> states;
  double log_score = -std::numeric_limits<double>::infinity();
};

// MAP state sequence for per-frame beat / non-beat log densities. Uniform
// initial distribution; ties go to the lower state index.
inline ViterbiPath viterbi(const DecoderStateSpace& s, const TransitionModel& tm, std::span<const double> beat_log,
                           std::span<const double> non_beat_log) {
  if (beat_log.size() != non_beat_log.size()) throw InvalidArgument("viterbi: observation length mismatch");
  const std::size_t n = beat_log.size();
  if (n == 0) throw InvalidArgument("viterbi: empty activation sequence");
  const int S = s.n_states();
  const int K = s.n_intervals();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::vector<double> score(static_cast<std::size_t>(S)), next(static_cast<std::size_t>(S));
  const double init = -std::log(static_cast<double>(S));
  for (int i = 0; i < S; ++i)
    score[static_cast<std::size_t>(i)] = init + (s.beat_state[static_cast<std::size_t>(i)] ? beat_log[0] : non_beat_log[0]);

  // only phase-0 states have a choice of predecessor
  std::vector<std::int32_t> back((n - 1) * static_cast<std::size_t>(K));
  std::vector<double> boundary(static_cast<std::size_t>(K));
  for (std::size_t t = 1; t < n; ++t) {
    for (int k = 0; k < K; ++k) boundary[static_cast<std::size_t>(k)] = score[static_cast<std::size_t>(s.last_state(k))];
    for (int k = 0; k < K; ++k) {
      const int first = s.first_state[static_cast<std::size_t>(k)];
      for (int p = 1; p < s.intervals[static_cast<std::size_t>(k)]; ++p)
        next[static_cast<std::size_t>(first + p)] = score[static_cast<std::size_t>(first + p - 1)];
    }
    for (int j = 0; j < K; ++j) {
      double best = kNegInf;
      int arg = 0;
      for (int k = 0; k < K; ++k) {
        const double v = boundary[static_cast<std::size_t>(k)] + tm.tempo_log(k, j);
        if (v > best) {
          best = v;
          arg = k;
        }
      }
      next[static_cast<std::size_t>(s.first_state[static_cast<std::size_t>(j)])] = best;
      back[(t - 1) * static_cast<std::size_t>(K) + static_cast<std::size_t>(j)] = arg;
    }
    const double b = beat_log[t], nb = non_beat_log[t];
    for (int i = 0; i < S; ++i) next[static_cast<std::size_t>(i)] += s.beat_state[static_cast<std::size_t>(i)] ? b : nb;
    score.swap(next);
  }

  ViterbiPath out;
  int state = 0;
  for (int i = 0; i < S; ++i)
    if (score[static_cast<std::size_t>(i)] > out.log_score) {
      out.log_score = score[static_cast<std::size_t>(i)];
      state = i;
    }
  out.states.assign(n, 0);
  for (std::size_t t = n; t-- > 0;) {
    out.states[t] = state;
    if (t == 0) break;
    const int p = s.state_phase[static_cast<std::size_t>(state)];
    if (p > 0) {
      state -= 1;
    } else {
      const int j = s.state_interval_index[static_cast<std::size_t>(state)];
      state = s.last_state(back[(t - 1) * static_cast<std::size_t>(K) + static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

inline ViterbiPath viterbi(const DecoderStateSpace& s, const TransitionModel& tm, std::span<const double> activations) {
  std::vector<double> b(activations.size()), nb(activations.size());
  for (std::size_t t = 0; t < activations.size(); ++t) {
    const auto o = observation_logs(activations[t], s.observation_lambda);
    b[t] = o.beat;
    nb[t] = o.non_beat;
  }
  return viterbi(s, tm, b, nb);
}

// Beats at the frames where the decoded path enters phase 0.
inline BeatAnnotation decode_beats(std::span<const double> activations, double fps, const DecoderConfig& cfg = {}) {
  if (std::abs(fps - cfg.fps) > 1e-9 * std::max(1.0, fps))
    throw InvalidArgument("decode_beats: activation fps " + std::to_string(fps) + " does not match decoder fps " +
                          std::to_string(cfg.fps));
  if (activations.empty()) return BeatAnnotation{};
  const auto space = build_state_space(cfg);
  const auto tm = transition_logprobs(space, cfg);
  const auto path = viterbi(space, tm, activations);
  std::vector<double> beats;
  for (std::size_t t = 0; t < path.states.size(); ++t)
    if (space.state_phase[static_cast<std::size_t>(path.states[t])] == 0) beats.push_back(static_cast<double>(t) / fps);
  return BeatAnnotation(std::move(beats));
}

}  // namespace vocalbeat
