#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "vocalbeat/model/trainer.hpp"

using namespace vocalbeat;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.input_dim = 4;
  c.model_dim = 8;
  c.heads = 2;
  c.head_dim = 4;
  c.ffn_dim = 8;
  c.seed = 1;
  return c;
}

// Feature 0 spikes on beat frames; the others are noise.
TrainingTrack spike_track(double seconds, double fps, double period, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 0.1f);
  const auto n = static_cast<Eigen::Index>(std::llround(seconds * fps));
  TrainingTrack t;
  t.input.fps = fps;
  FeatureMatrix m(n, 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  std::vector<double> beats;
  for (double b = 0.25; b < seconds - 1e-9; b += period) {
    beats.push_back(b);
    m(std::min(n - 1, static_cast<Eigen::Index>(std::llround(b * fps))), 0) += 3.0f;
  }
  t.input.layers.push_back(std::move(m));
  t.beats = BeatAnnotation(beats);
  return t;
}

}  // namespace

TEST(SampleExcerpt, FileChoiceProportionalToLength) {
  std::vector<TrainingTrack> corpus{spike_track(30, 10, 0.5, 1), spike_track(60, 10, 0.5, 2)};
  std::mt19937_64 rng(3);
  int second = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) second += sample_excerpt(corpus, 15.0, rng).track == 1;
  EXPECT_NEAR(static_cast<double>(second) / draws, 2.0 / 3.0, 0.02);
}

TEST(SampleExcerpt, StartIsUniform) {
  const std::vector<TrainingTrack> corpus{spike_track(2.0, 10, 0.5, 4)};  // 20 frames
  std::mt19937_64 rng(5);
  std::vector<int> hist(11, 0);
  const int draws = 55000;
  for (int i = 0; i < draws; ++i) {
    const auto ex = sample_excerpt(corpus, 1.0, rng);  // 10 frames
    ASSERT_EQ(ex.track, 0u);
    ASSERT_LE(ex.start, 10);
    ++hist[static_cast<std::size_t>(ex.start)];
  }
  for (int h : hist) EXPECT_NEAR(h / static_cast<double>(draws), 1.0 / 11.0, 0.01);
}

TEST(SampleExcerpt, ShortFileIsPaddedWhole) {
  const std::vector<TrainingTrack> corpus{spike_track(10.0, 50, 0.5, 6)};
  std::mt19937_64 rng(7);
  const auto ex = sample_excerpt(corpus, 15.0, rng);
  EXPECT_EQ(ex.start, 0);
  EXPECT_EQ(ex.valid, 500);
  ASSERT_EQ(ex.input.n_frames(), 750);
  EXPECT_TRUE(ex.input.layers[0].topRows(500) == corpus[0].input.layers[0]);
  EXPECT_TRUE(ex.input.layers[0].bottomRows(250).isZero());
  EXPECT_TRUE(std::all_of(ex.targets.begin() + 500, ex.targets.end(), [](float v) { return v == 0.0f; }));
  const auto full = track_targets(corpus[0]);
  EXPECT_TRUE(std::equal(full.begin(), full.end(), ex.targets.begin()));
}

TEST(SampleExcerpt, ExcerptTargetsAreSlicesOfTrackTargets) {
  const std::vector<TrainingTrack> corpus{spike_track(40.0, 50, 0.43, 8)};
  std::mt19937_64 rng(9);
  const auto full = track_targets(corpus[0]);
  for (int i = 0; i < 20; ++i) {
    const auto ex = sample_excerpt(corpus, 15.0, rng);
    ASSERT_EQ(ex.valid, 750);
    EXPECT_TRUE(std::equal(ex.targets.begin(), ex.targets.end(), full.begin() + ex.start));
    EXPECT_TRUE(ex.input.layers[0] == corpus[0].input.layers[0].middleRows(ex.start, 750));
  }
}

TEST(SampleExcerpt, EmptyCorpus) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_excerpt({}, 15.0, rng), InvalidArgument);
}

TEST(BatchGradient, PermutationAndThreadInvariant) {
  std::vector<TrainingTrack> corpus{spike_track(12, 20, 0.5, 10), spike_track(7, 20, 0.6, 11), spike_track(20, 20, 0.4, 12)};
  std::mt19937_64 rng(13);
  std::vector<Excerpt> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(sample_excerpt(corpus, 10.0, rng));
  const auto params = init_model<float>(tiny());

  auto g1 = ModelParams<float>::zeros(params.config);
  const double l1 = batch_gradient(params, batch, g1, 1);
  auto g3 = ModelParams<float>::zeros(params.config);
  const double l3 = batch_gradient(params, batch, g3, 3);
  EXPECT_EQ(l1, l3);
  EXPECT_TRUE(g1.w_q == g3.w_q && g1.w_in == g3.w_in && g1.b_out == g3.b_out);

  std::shuffle(batch.begin(), batch.end(), rng);
  auto gs = ModelParams<float>::zeros(params.config);
  EXPECT_NEAR(batch_gradient(params, batch, gs, 1), l1, 1e-9);
  EXPECT_LT((gs.w_q - g1.w_q).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(BatchGradient, PaddingIsMaskedOutOfTheLoss) {
  const std::vector<TrainingTrack> corpus{spike_track(5, 20, 0.5, 14)};
  const auto params = init_model<float>(tiny());
  const auto padded = make_excerpt(corpus[0], 0, 0, 200);
  const auto exact = make_excerpt(corpus[0], 0, 0, 100);
  ASSERT_EQ(padded.valid, 100);
  auto gp = ModelParams<float>::zeros(params.config), ge = ModelParams<float>::zeros(params.config);
  const double lp = batch_gradient(params, std::vector<Excerpt>{padded}, gp);
  const double le = batch_gradient(params, std::vector<Excerpt>{exact}, ge);
  EXPECT_NEAR(lp, le, 1e-6);
  EXPECT_LT((gp.w_q - ge.w_q).cwiseAbs().maxCoeff(), 1e-6f);
  // a duplicated item leaves the mean loss and its gradient unchanged
  auto gd = ModelParams<float>::zeros(params.config);
  EXPECT_NEAR(batch_gradient(params, std::vector<Excerpt>{exact, exact}, gd), le, 1e-6);
  EXPECT_LT((gd.w_ff1 - ge.w_ff1).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(SplitIndices, EightyTwentyDisjointDeterministic) {
  const auto s = split_indices(200, 0.8, 5);
  EXPECT_EQ(s.train.size(), 160u);
  EXPECT_EQ(s.validation.size(), 40u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.validation.begin(), s.validation.end());
  EXPECT_EQ(all.size(), 200u);
  const auto again = split_indices(200, 0.8, 5);
  EXPECT_EQ(again.train, s.train);
  EXPECT_NE(split_indices(200, 0.8, 6).train, s.train);
  EXPECT_THROW(split_indices(10, 1.0, 0), InvalidArgument);
}

TEST(Train, ReproducibleForFixedSeed) {
  std::vector<TrainingTrack> tr, va;
  for (int i = 0; i < 6; ++i) tr.push_back(spike_track(8, 20, 0.4 + 0.05 * i, 20 + i));
  for (int i = 0; i < 2; ++i) va.push_back(spike_track(8, 20, 0.45 + 0.1 * i, 40 + i));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batches_per_epoch = 4;
  cfg.batch_size = 3;
  cfg.excerpt_seconds = 5;
  cfg.adam.lr = 1e-3;
  cfg.seed = 17;
  const auto a = train(tr, va, tiny(), cfg);
  cfg.threads = 2;
  const auto b = train(tr, va, tiny(), cfg);
  ASSERT_EQ(a.history.size(), 3u);
  ASSERT_EQ(b.history.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].val_loss, b.history[i].val_loss);
  }
  EXPECT_TRUE(a.params.w_q == b.params.w_q);
  EXPECT_LT(a.best_val_loss, a.history.front().val_loss + 1e-12);
}

TEST(Train, PatienceZeroStopsAtFirstNonImprovement) {
  std::vector<TrainingTrack> tr{spike_track(6, 20, 0.5, 50)}, va{spike_track(6, 20, 0.5, 51)};
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batches_per_epoch = 1;
  cfg.batch_size = 2;
  cfg.excerpt_seconds = 3;
  cfg.adam.lr = 0.0;  // validation loss cannot improve after epoch 1
  cfg.patience = 0;
  int calls = 0;
  const auto r = train(tr, va, tiny(), cfg, [&](const EpochRecord&) { ++calls; });
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(calls, 2);
  EXPECT_EQ(r.best_epoch, 1);
  cfg.patience = 3;
  EXPECT_EQ(train(tr, va, tiny(), cfg).history.size(), 5u);
}

TEST(Train, EmptySplits) {
  std::vector<TrainingTrack> one{spike_track(3, 20, 0.5, 1)};
  EXPECT_THROW(train({}, one, tiny(), TrainConfig{}), InvalidArgument);
  EXPECT_THROW(train(one, {}, tiny(), TrainConfig{}), InvalidArgument);
}

TEST(Train, OnlyLayerWeightsAndNetworkChange) {
  // the input features are never modified by training
  std::vector<TrainingTrack> tr{spike_track(6, 20, 0.5, 60)}, va{spike_track(6, 20, 0.5, 61)};
  const auto before = tr[0].input.layers[0];
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batches_per_epoch = 2;
  cfg.batch_size = 2;
  cfg.excerpt_seconds = 3;
  cfg.adam.lr = 1e-2;
  const auto r = train(tr, va, tiny(), cfg);
  EXPECT_TRUE(tr[0].input.layers[0] == before);
  EXPECT_FALSE(r.params.w_q == init_model<float>(tiny()).w_q);
}
