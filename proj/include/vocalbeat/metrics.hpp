#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vocalbeat/error.hpp"
#include "vocalbeat/parallel.hpp"
#include "vocalbeat/types.hpp"

namespace vocalbeat {

struct MetricConfig {
  double f_tolerance = 0.07;
  double cemgil_sigma = 0.04;
  double p_window_fraction = 0.2;
  double goto_phase_threshold = 0.35;
  double goto_mu = 0.2;
  double goto_sigma = 0.2;
  double goto_min_coverage = 0.25;
};

namespace metrics_detail {

// 1 when both lists are empty, 0 when exactly one is, -1 otherwise.
inline int empty_case(std::span<const double> ref, std::span<const double> est) {
  if (ref.empty() && est.empty()) return 1;
  if (ref.empty() || est.empty()) return 0;
  return -1;
}

}  // namespace metrics_detail

// Each reference beat, in time order, takes the nearest still-unmatched
// estimate within the tolerance.
inline double f_measure(std::span<const double> ref, std::span<const double> est, double tolerance = 0.07) {
  if (int e = metrics_detail::empty_case(ref, est); e >= 0) return e;
  std::vector<bool> used(est.size(), false);
  std::size_t tp = 0;
  auto lo = est.begin();
  for (double r : ref) {
    lo = std::lower_bound(lo, est.end(), r - tolerance - 1e-12);
    std::ptrdiff_t best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (auto it = lo; it != est.end() && *it <= r + tolerance + 1e-12; ++it) {
      const auto j = it - est.begin();
      const double d = std::abs(*it - r);
      if (!used[static_cast<std::size_t>(j)] && d <= tolerance && d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
  }
  return 2.0 * static_cast<double>(tp) / static_cast<double>(ref.size() + est.size());
}

// Gaussian-weighted distance of every reference beat to its nearest
// estimate, normalized by the mean list length.
inline double cemgil(std::span<const double> ref, std::span<const double> est, double sigma = 0.04) {
  if (int e = metrics_detail::empty_case(ref, est); e >= 0) return e;
  double acc = 0.0;
  for (double r : ref) {
    const auto it = std::lower_bound(est.begin(), est.end(), r);
    double d = std::numeric_limits<double>::infinity();
    if (it != est.end()) d = *it - r;
    if (it != est.begin()) d = std::min(d, r - *std::prev(it));
    acc += std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return acc / (0.5 * static_cast<double>(ref.size() + est.size()));
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw InvalidArgument("median of an empty list");
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  if (v.size() % 2 == 1) return v[m];
  const double upper = v[m];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lower + upper);
}

// Number of (ref, est) pairs closer than window_fraction times the median
// reference inter-beat interval, over max(|ref|, |est|), capped at 1. A
// single reference beat defines no interval and scores 0.
inline double p_score(std::span<const double> ref, std::span<const double> est, double window_fraction = 0.2) {
  if (int e = metrics_detail::empty_case(ref, est); e >= 0) return e;
  if (ref.size() < 2) return 0.0;
  std::vector<double> ibi;
  for (std::size_t i = 1; i < ref.size(); ++i) ibi.push_back(ref[i] - ref[i - 1]);
  const double tol = window_fraction * median(std::move(ibi));
  std::size_t pairs = 0;
  for (double r : ref) {
    const auto lo = std::lower_bound(est.begin(), est.end(), r - tol);
    const auto hi = std::upper_bound(est.begin(), est.end(), r + tol);
    for (auto it = lo; it != hi; ++it)
      if (std::abs(*it - r) <= tol) ++pairs;
  }
  return std::min(1.0, static_cast<double>(pairs) / static_cast<double>(std::max(ref.size(), est.size())));
}

// Signed phase error per reference beat. Beat i owns the window from half
// the interval to its predecessor to half the interval to its successor
// (the first and last beats mirror their only interval). With exactly one
// estimate in the window the error is its offset divided by the
// half-interval on that side; otherwise it is 1.
inline std::vector<double> goto_errors(std::span<const double> ref, std::span<const double> est) {
  const std::size_t n = ref.size();
  if (n < 2) throw InvalidArgument("goto needs at least 2 reference beats");
  std::vector<double> err(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = 0.5 * (i > 0 ? ref[i] - ref[i - 1] : ref[1] - ref[0]);
    const double right = 0.5 * (i + 1 < n ? ref[i + 1] - ref[i] : ref[n - 1] - ref[n - 2]);
    const auto lo = std::lower_bound(est.begin(), est.end(), ref[i] - left);
    const auto hi = std::lower_bound(est.begin(), est.end(), ref[i] + right);
    if (hi - lo != 1) continue;
    const double offset = *lo - ref[i];
    err[i] = offset < 0 ? offset / left : offset / right;
  }
  return err;
}

// 1 when some maximal run of consecutive correct beats (|error| below the
// phase threshold) spans at least min_coverage of the reference beats with
// mean |error| < mu and sample standard deviation of the error < sigma.
inline double goto_score(std::span<const double> ref, std::span<const double> est, const MetricConfig& cfg = {}) {
  const auto err = goto_errors(ref, est);
  const std::size_t n = err.size();
  std::size_t i = 0;
  while (i < n) {
    if (!(std::abs(err[i]) < cfg.goto_phase_threshold)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && std::abs(err[j]) < cfg.goto_phase_threshold) ++j;
    const std::size_t len = j - i;
    if (static_cast<double>(len) >= cfg.goto_min_coverage * static_cast<double>(n)) {
      double mean_abs = 0.0, mean = 0.0;
      for (std::size_t k = i; k < j; ++k) {
        mean_abs += std::abs(err[k]);
        mean += err[k];
      }
      mean_abs /= static_cast<double>(len);
      mean /= static_cast<double>(len);
      double var = 0.0;
      for (std::size_t k = i; k < j; ++k) var += (err[k] - mean) * (err[k] - mean);
      const double sd = len > 1 ? std::sqrt(var / static_cast<double>(len - 1)) : 0.0;
      if (mean_abs < cfg.goto_mu && sd < cfg.goto_sigma) return 1.0;
    }
    i = j;
  }
  return 0.0;
}

// Midpoints between adjacent beats.
inline BeatAnnotation offbeat_shift(const BeatAnnotation& ref) {
  if (ref.size() < 2) throw InvalidArgument("offbeat_shift needs at least 2 beats");
  std::vector<double> out;
  out.reserve(ref.size() - 1);
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) out.push_back(0.5 * (ref[i] + ref[i + 1]));
  return BeatAnnotation(std::move(out));
}

enum class Metric { kFMeasure, kPScore, kCemgil, kGoto };

inline double score(Metric m, std::span<const double> ref, std::span<const double> est, const MetricConfig& cfg = {}) {
  switch (m) {
    case Metric::kFMeasure:
      return f_measure(ref, est, cfg.f_tolerance);
    case Metric::kPScore:
      return p_score(ref, est, cfg.p_window_fraction);
    case Metric::kCemgil:
      return cemgil(ref, est, cfg.cemgil_sigma);
    case Metric::kGoto:
      return goto_score(ref, est, cfg);
  }
  throw InvalidArgument("unknown metric");
}

// Best of scoring against the reference and against its offbeats. With
// two reference beats the offbeat list has one beat, on which goto is
// undefined, so PI goto falls back to the plain score.
inline double pi_metric(Metric m, const BeatAnnotation& ref, const BeatAnnotation& est, const MetricConfig& cfg = {}) {
  const auto off = offbeat_shift(ref);
  const double plain = score(m, ref.times(), est.times(), cfg);
  if (m == Metric::kGoto && off.size() < 2) return plain;
  return std::max(plain, score(m, off.times(), est.times(), cfg));
}

struct TrackScores {
  double f_measure = 0, p_score = 0, cemgil = 0, goto_score = 0;
  double pi_f_measure = 0, pi_p_score = 0, pi_cemgil = 0, pi_goto = 0;
};

struct TrackEntry {
  std::string id;
  TrackScores scores;
  double compute_seconds = 0.0;
  // Fewer than 2 reference beats: goto and the offbeat reference are
  // undefined, so goto is 1 only when both lists are empty and every PI
  // score equals its plain score.
  bool short_reference = false;
  bool empty_reference = false;
  bool empty_estimate = false;
};

struct EvaluationInput {
  std::string id;
  BeatAnnotation ref;
  BeatAnnotation est;
  double compute_seconds = 0.0;
};

struct MetricReport {
  std::vector<TrackEntry> tracks;
  TrackScores mean;
  double mean_compute_seconds = 0.0;
  std::size_t short_reference_tracks = 0;
};

inline TrackEntry evaluate_track(const EvaluationInput& in, const MetricConfig& cfg = {}) {
  TrackEntry e;
  e.id = in.id;
  e.compute_seconds = in.compute_seconds;
  e.empty_reference = in.ref.empty();
  e.empty_estimate = in.est.empty();
  e.short_reference = in.ref.size() < 2;
  auto& s = e.scores;
  const auto r = in.ref.times(), x = in.est.times();
  s.f_measure = f_measure(r, x, cfg.f_tolerance);
  s.p_score = p_score(r, x, cfg.p_window_fraction);
  s.cemgil = cemgil(r, x, cfg.cemgil_sigma);
  if (e.short_reference) {
    s.goto_score = (in.ref.empty() && in.est.empty()) ? 1.0 : 0.0;
    s.pi_f_measure = s.f_measure;
    s.pi_p_score = s.p_score;
    s.pi_cemgil = s.cemgil;
    s.pi_goto = s.goto_score;
    return e;
  }
  s.goto_score = goto_score(r, x, cfg);
  const auto off = offbeat_shift(in.ref);
  const auto o = off.times();
  s.pi_f_measure = std::max(s.f_measure, f_measure(o, x, cfg.f_tolerance));
  s.pi_p_score = std::max(s.p_score, p_score(o, x, cfg.p_window_fraction));
  s.pi_cemgil = std::max(s.cemgil, cemgil(o, x, cfg.cemgil_sigma));
  s.pi_goto = off.size() < 2 ? s.goto_score : std::max(s.goto_score, goto_score(o, x, cfg));
  return e;
}

// Per-track scores (PI taken per track) and unweighted means over tracks.
inline MetricReport evaluate_corpus(std::span<const EvaluationInput> inputs, const MetricConfig& cfg = {},
                                    int threads = 1) {
  if (inputs.empty()) throw InvalidArgument("evaluate_corpus: no tracks");
  MetricReport rep;
  rep.tracks.resize(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t i) { rep.tracks[i] = evaluate_track(inputs[i], cfg); });
  auto& m = rep.mean;
  for (const auto& t : rep.tracks) {
    const auto& s = t.scores;
    m.f_measure += s.f_measure;
    m.p_score += s.p_score;
    m.cemgil += s.cemgil;
    m.goto_score += s.goto_score;
    m.pi_f_measure += s.pi_f_measure;
    m.pi_p_score += s.pi_p_score;
    m.pi_cemgil += s.pi_cemgil;
    m.pi_goto += s.pi_goto;
    rep.mean_compute_seconds += t.compute_seconds;
    if (t.short_reference) ++rep.short_reference_tracks;
  }
  const double n = static_cast<double>(rep.tracks.size());
  for (double* v : {&m.f_measure, &m.p_score, &m.cemgil, &m.goto_score, &m.pi_f_measure, &m.pi_p_score, &m.pi_cemgil,
                    &m.pi_goto, &rep.mean_compute_seconds})
    *v /= n;
  return rep;
}

namespace metrics_detail {

inline nlohmann::ordered_json scores_json(const TrackScores& s, bool with_pi) {
  nlohmann::ordered_json j;
  j["f_measure"] = s.f_measure;
  j["p_score"] = s.p_score;
  j["cemgil"] = s.cemgil;
  j["goto"] = s.goto_score;
  if (with_pi) {
    j["pi_f_measure"] = s.pi_f_measure;
    j["pi_p_score"] = s.pi_p_score;
    j["pi_cemgil"] = s.pi_cemgil;
    j["pi_goto"] = s.pi_goto;
  }
  return j;
}

}  // namespace metrics_detail

inline nlohmann::ordered_json report_json(const MetricReport& rep, bool with_pi = true) {
  nlohmann::ordered_json j;
  j["tracks"] = nlohmann::ordered_json::array();
  for (const auto& t : rep.tracks) {
    nlohmann::ordered_json e;
    e["id"] = t.id;
    const auto scores = metrics_detail::scores_json(t.scores, with_pi);
    for (const auto& [k, v] : scores.items()) e[k] = v;
    e["compute_seconds"] = t.compute_seconds;
    e["short_reference"] = t.short_reference;
    e["empty_reference"] = t.empty_reference;
    e["empty_estimate"] = t.empty_estimate;
    j["tracks"].push_back(std::move(e));
  }
  auto agg = metrics_detail::scores_json(rep.mean, with_pi);
  agg["compute_seconds"] = rep.mean_compute_seconds;
  agg["n_tracks"] = rep.tracks.size();
  agg["short_reference_tracks"] = rep.short_reference_tracks;
  j["aggregate"] = std::move(agg);
  return j;
}

inline std::string report_csv(const MetricReport& rep, bool with_pi = true) {
  std::ostringstream out;
  out << "id,f_measure,p_score,cemgil,goto";
  if (with_pi) out << ",pi_f_measure,pi_p_score,pi_cemgil,pi_goto";
  out << ",compute_seconds,short_reference,empty_reference,empty_estimate\n";
  auto row = [&](const std::string& id, const TrackScores& s, double secs, int f1, int f2, int f3) {
    char buf[64];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.6f", v);
      out << ',' << buf;
    };
    out << id;
    num(s.f_measure);
    num(s.p_score);
    num(s.cemgil);
    num(s.goto_score);
    if (with_pi) {
      num(s.pi_f_measure);
      num(s.pi_p_score);
      num(s.pi_cemgil);
      num(s.pi_goto);
    }
    num(secs);
    out << ',' << f1 << ',' << f2 << ',' << f3 << '\n';
  };
  for (const auto& t : rep.tracks)
    row(t.id, t.scores, t.compute_seconds, t.short_reference, t.empty_reference, t.empty_estimate);
  row("aggregate", rep.mean, rep.mean_compute_seconds, 0, 0, 0);
  return out.str();
}

}  // namespace vocalbeat
