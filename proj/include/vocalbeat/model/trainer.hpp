#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "vocalbeat/embedding.hpp"
#include "vocalbeat/error.hpp"
#include "vocalbeat/model/adam.hpp"
#include "vocalbeat/model/loss.hpp"
#include "vocalbeat/model/network.hpp"
#include "vocalbeat/model/params.hpp"
#include "vocalbeat/parallel.hpp"

namespace vocalbeat {

// One training file: its (possibly single-layer) input and ground truth.
struct TrainingTrack {
  EmbeddingTensor input;
  BeatAnnotation beats;

  Eigen::Index n_frames() const noexcept { return input.n_frames(); }
};

// Targets for a whole track; beats past the last frame are ignored.
inline std::vector<float> track_targets(const TrainingTrack& t) {
  const double duration = static_cast<double>(t.n_frames()) / t.input.fps;
  std::vector<double> kept;
  for (double b : t.beats.times())
    if (b <= duration) kept.push_back(b);
  return make_targets(BeatAnnotation(std::move(kept)), t.n_frames(), t.input.fps);
}

// A fixed-length training window. Rows at index >= valid are zero padding
// and carry zero targets.
struct Excerpt {
  EmbeddingTensor input;
  std::vector<float> targets;
  Eigen::Index valid = 0;
  std::size_t track = 0;
  Eigen::Index start = 0;
};

inline Eigen::Index excerpt_frames(double excerpt_seconds, double fps) {
  return std::max<Eigen::Index>(1, std::llround(excerpt_seconds * fps));
}

inline Excerpt make_excerpt(const TrainingTrack& t, std::size_t track, Eigen::Index start, Eigen::Index length) {
  const Eigen::Index n = t.n_frames();
  const Eigen::Index valid = std::min(length, n - start);
  Excerpt ex;
  ex.track = track;
  ex.start = start;
  ex.valid = valid;
  ex.input.fps = t.input.fps;
  for (const auto& layer : t.input.layers) {
    FeatureMatrix m = FeatureMatrix::Zero(length, layer.cols());
    m.topRows(valid) = layer.middleRows(start, valid);
    ex.input.layers.push_back(std::move(m));
  }
  const auto all = track_targets(t);
  ex.targets.assign(static_cast<std::size_t>(length), 0.0f);
  std::copy_n(all.begin() + start, valid, ex.targets.begin());
  return ex;
}

// Picks a file with probability proportional to its length, then a start
// uniformly over the valid starts. Files shorter than the excerpt are
// taken whole and zero-padded.
inline Excerpt sample_excerpt(std::span<const TrainingTrack> corpus, double excerpt_seconds, std::mt19937_64& rng) {
  if (corpus.empty()) throw InvalidArgument("sample_excerpt: empty corpus");
  std::vector<double> weights;
  weights.reserve(corpus.size());
  for (const auto& t : corpus) {
    if (t.n_frames() < 1) throw InvalidArgument("sample_excerpt: track without frames");
    weights.push_back(static_cast<double>(t.n_frames()));
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const std::size_t index = pick(rng);
  const auto& t = corpus[index];
  const Eigen::Index length = excerpt_frames(excerpt_seconds, t.input.fps);
  Eigen::Index start = 0;
  if (t.n_frames() > length) {
    std::uniform_int_distribution<Eigen::Index> s(0, t.n_frames() - length);
    start = s(rng);
  }
  return make_excerpt(t, index, start, length);
}

// Mean masked BCE over every valid frame of the batch; accumulates its
// gradient into `grads` (which the caller zeroes). Items are processed
// independently and reduced in batch order, so the result does not depend
// on the thread count.
inline double batch_gradient(const ModelParams<float>& params, std::span<const Excerpt> batch, ModelParams<float>& grads,
                             int threads = 1) {
  std::size_t total_valid = 0;
  for (const auto& ex : batch) total_valid += static_cast<std::size_t>(ex.valid);
  if (total_valid == 0) throw InvalidArgument("batch_gradient: batch has no valid frames");
  const double scale = 1.0 / static_cast<double>(total_valid);

  const std::size_t workers = std::min<std::size_t>(batch.size(), static_cast<std::size_t>(std::max(1, threads)));
  std::vector<double> item_loss(batch.size(), 0.0);
  auto item_gradient = [&](std::size_t i, ModelParams<float>& g) {
    const auto& ex = batch[i];
    const std::span<const FeatureMatrix> layers(ex.input.layers);
    ForwardTape<float> tape;
    const ColVector<float> z = forward_layers(params, layers, ex.valid, &tape);
    ColVector<float> dz = ColVector<float>::Zero(z.size());
    double loss = 0.0;
    for (Eigen::Index f = 0; f < ex.valid; ++f) {
      const double zf = z[f];
      const double y = ex.targets[static_cast<std::size_t>(f)];
      loss += bce_term(zf, y);
      const double s = zf >= 0 ? 1.0 / (1.0 + std::exp(-zf)) : std::exp(zf) / (1.0 + std::exp(zf));
      dz[f] = static_cast<float>((s - y) * scale);
    }
    item_loss[i] = loss;
    g.set_zero();
    backward(params, layers, tape, dz, g);
  };

  auto accumulate = [&](const ModelParams<float>& g) {
    auto dst = grads.tensors();
    auto src = g.tensors();
    for (std::size_t t = 0; t < dst.size(); ++t) *dst[t] += *src[t];
  };

  if (workers <= 1) {
    auto g = ModelParams<float>::zeros(params.config);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      item_gradient(i, g);
      accumulate(g);
    }
  } else {
    // waves of `workers` items, reduced in order
    std::vector<ModelParams<float>> buffers(workers, ModelParams<float>::zeros(params.config));
    for (std::size_t base = 0; base < batch.size(); base += workers) {
      const std::size_t count = std::min(workers, batch.size() - base);
      parallel_for(count, static_cast<int>(workers), [&](std::size_t j) { item_gradient(base + j, buffers[j]); });
      for (std::size_t j = 0; j < count; ++j) accumulate(buffers[j]);
    }
  }
  return std::accumulate(item_loss.begin(), item_loss.end(), 0.0) * scale;
}

// Mean BCE over every frame of every track (whole tracks, no excerpts).
inline double evaluate_loss(const ModelParams<float>& params, std::span<const TrainingTrack> tracks, int threads = 1) {
  std::vector<double> sums(tracks.size(), 0.0);
  std::vector<std::size_t> counts(tracks.size(), 0);
  parallel_for(tracks.size(), threads, [&](std::size_t i) {
    const auto& t = tracks[i];
    const ColVector<float> z = forward_logits(params, t.input);
    const auto y = track_targets(t);
    const std::vector<double> logits(z.data(), z.data() + z.size());
    sums[i] = bce_with_logits_sum(logits, y, logits.size());
    counts[i] = logits.size();
  });
  const double total = std::accumulate(sums.begin(), sums.end(), 0.0);
  const std::size_t frames = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (frames == 0) throw InvalidArgument("evaluate_loss: no frames");
  return total / static_cast<double>(frames);
}

struct TrainConfig {
  int epochs = 100;
  int batches_per_epoch = 200;
  int batch_size = 10;
  double excerpt_seconds = 15.0;
  AdamConfig adam{};
  int patience = 20;  // stop once this many consecutive epochs fail to improve
  std::uint64_t seed = 0;
  int threads = 1;
  double max_wall_seconds = std::numeric_limits<double>::infinity();  // checked between epochs
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;  // cumulative since training started
};

struct TrainResult {
  ModelParams<float> params;  // best validation loss
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// Indices of a seeded random train/validation split.
struct Split {
  std::vector<std::size_t> train, validation;
};

inline Split split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("split: fraction must be in (0, 1)");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
  s.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), order.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

// Adam on length-weighted random excerpts, validation after every epoch,
// early stopping on validation loss. Only the network (and the layer
// weights on the SSL path) are trained; the input features are fixed.
inline TrainResult train(std::span<const TrainingTrack> train_set, std::span<const TrainingTrack> val_set,
                         const ModelConfig& model_cfg, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  if (train_set.empty()) throw InvalidArgument("train: empty training split");
  if (val_set.empty()) throw InvalidArgument("train: empty validation split");
  if (cfg.epochs < 1 || cfg.batches_per_epoch < 1 || cfg.batch_size < 1)
    throw InvalidArgument("train: epochs, batches and batch size must be positive");
  const double fps = train_set.front().input.fps;
  for (auto set : {train_set, val_set})
    for (const auto& t : set) {
      if (t.input.fps != fps) throw InvalidArgument("train: all tracks must share one fps");
      if (static_cast<int>(t.input.n_layers()) != std::max(1, model_cfg.input_layers))
        throw InvalidArgument("train: track layer count does not match the model");
      if (t.input.dim() != model_cfg.input_dim) throw InvalidArgument("train: track dimension does not match the model");
    }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  TrainResult result;
  auto params = init_model<float>(model_cfg);
  auto state = AdamState<float>::zeros(model_cfg);
  auto grads = ModelParams<float>::zeros(model_cfg);
  std::mt19937_64 rng(cfg.seed);
  result.params = params;

  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double train_loss = 0.0;
    for (int b = 0; b < cfg.batches_per_epoch; ++b) {
      std::vector<Excerpt> batch;
      batch.reserve(static_cast<std::size_t>(cfg.batch_size));
      for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(sample_excerpt(train_set, cfg.excerpt_seconds, rng));
      grads.set_zero();
      train_loss += batch_gradient(params, batch, grads, cfg.threads);
      adam_step(params, grads, state, cfg.adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss / cfg.batches_per_epoch;
    rec.val_loss = evaluate_loss(params, val_set, cfg.threads);
    rec.wall_seconds = elapsed();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_loss < result.best_val_loss) {
      result.best_val_loss = rec.val_loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best > cfg.patience) {
      break;
    }
    if (elapsed() >= cfg.max_wall_seconds) break;
  }
  return result;
}

}  // namespace vocalbeat
