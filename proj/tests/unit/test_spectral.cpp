#include <gtest/gtest.h>

#include <random>

#include "synth.hpp"
#include "vocalbeat/spectral.hpp"

using namespace vocalbeat;

TEST(LogMel, SilenceFloor) {
  const auto f = log_mel(synth::constant(0.0, 0.5), 1024);
  for (Eigen::Index i = 0; i < f.frames.size(); ++i) ASSERT_NEAR(f.frames.data()[i], -6.0f, 1e-6);
}

TEST(LogMel, FrameCountAndDimension) {
  for (int win : {1024, 2048, 4096}) {
    const auto f = log_mel(synth::sine(300.0, 1.0), win);
    EXPECT_EQ(f.n_frames(), 100);
    EXPECT_EQ(f.dim(), 80);
    EXPECT_EQ(f.fps, 100.0);
  }
  // round(duration * fps) +- 1 for awkward lengths
  for (double secs : {0.333, 1.005, 2.71828}) {
    const auto f = log_mel(synth::constant(0.1, secs), 2048);
    EXPECT_LE(std::abs(static_cast<double>(f.n_frames()) - std::round(secs * 100.0)), 1.0);
  }
}

TEST(LogMel, SineLandsInItsBand) {
  const MelConfig cfg;
  for (int win : {1024, 2048, 4096}) {
    const MelFilterbank bank(win, 44100, cfg.n_mels, cfg.fmin, cfg.fmax);
    // band(s) whose triangle has the largest gain at 440 Hz
    double best_gain = -1.0;
    for (int b = 0; b < cfg.n_mels; ++b) best_gain = std::max(best_gain, bank.band_gain(b, hz_to_mel(440.0)));
    const auto f = log_mel(synth::sine(440.0, 1.0), win);
    for (Eigen::Index i = 5; i < f.n_frames() - 5; ++i) {
      Eigen::Index arg = 0;
      f.frames.row(i).maxCoeff(&arg);
      EXPECT_GT(bank.band_gain(static_cast<int>(arg), hz_to_mel(440.0)), 0.0) << "window " << win << " frame " << i;
    }
  }
}

TEST(LogMel, PolarityInvariant) {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> g(0.0f, 0.3f);
  Waveform w{std::vector<float>(20000), 44100};
  for (auto& s : w.samples) s = g(rng);
  Waveform neg = w;
  for (auto& s : neg.samples) s = -s;
  const auto a = log_mel(w, 2048), b = log_mel(neg, 2048);
  EXPECT_TRUE(a.frames == b.frames);
}

TEST(LogMel, Errors) {
  const auto w = synth::constant(0.1, 0.1);
  EXPECT_THROW(log_mel(w, 1), InvalidArgument);
  MelConfig odd;
  odd.fps = 97.0;
  EXPECT_THROW(log_mel(w, 1024, odd), InvalidArgument);
  EXPECT_THROW(log_mel(Waveform{{}, 44100}, 1024), DegenerateInput);
}

TEST(MelFilterbank, TrianglesPeakAtOne) {
  const MelFilterbank bank(4096, 44100, 80, 30.0, 17000.0);
  EXPECT_EQ(bank.n_bins(), 2049);
  for (int b = 0; b < 80; ++b) {
    EXPECT_LE(bank.weights().row(b).maxCoeff(), 1.0);
    EXPECT_GT(bank.weights().row(b).maxCoeff(), 0.0);
  }
  // nothing outside 30 Hz .. 17 kHz
  for (int k = 0; k < bank.n_bins(); ++k) {
    const double hz = k * 44100.0 / 4096.0;
    if (hz <= 30.0 || hz >= 17000.0) EXPECT_EQ(bank.weights().col(k).sum(), 0.0) << hz;
  }
}

TEST(FirstDiff, ConstantRampAndDecreasing) {
  FeatureSequence c{FeatureMatrix::Constant(5, 3, 2.0f), 100.0};
  EXPECT_TRUE(first_diff(c).frames.isZero());

  FeatureSequence ramp{FeatureMatrix(5, 2), 100.0};
  for (int i = 0; i < 5; ++i) ramp.frames.row(i).setConstant(0.25f * i);
  const auto d = first_diff(ramp);
  EXPECT_TRUE(d.frames.row(0).isZero());
  for (int i = 1; i < 5; ++i)
    for (int c2 = 0; c2 < 2; ++c2) EXPECT_FLOAT_EQ(d.frames(i, c2), 0.25f);

  FeatureSequence dec{FeatureMatrix(4, 2), 50.0};
  for (int i = 0; i < 4; ++i) dec.frames.row(i).setConstant(-1.0f * i);
  EXPECT_TRUE(first_diff(dec).frames.isZero());
  const auto plain = first_diff(dec, false);
  EXPECT_FLOAT_EQ(plain.frames(2, 0), -1.0f);
  EXPECT_EQ(first_diff(dec).fps, 50.0);
}

TEST(FirstDiff, NonNegative) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g;
  FeatureSequence f{FeatureMatrix(50, 7), 100.0};
  for (Eigen::Index i = 0; i < f.frames.size(); ++i) f.frames.data()[i] = g(rng);
  EXPECT_GE(first_diff(f).frames.minCoeff(), 0.0f);
}

TEST(StackFeatures, Shapes) {
  FeatureSequence a{FeatureMatrix::Random(10, 80), 100.0};
  const std::vector<FeatureSequence> one{a};
  EXPECT_TRUE(stack_features(one).frames == a.frames);
  std::vector<FeatureSequence> six(6, a);
  EXPECT_EQ(stack_features(six).dim(), 480);
  std::vector<FeatureSequence> mixed{a, FeatureSequence{FeatureMatrix::Random(10, 80), 50.0}};
  EXPECT_THROW(stack_features(mixed), InvalidArgument);
}

TEST(SpectralFeatures, PaperConfiguration) {
  const auto f = spectral_features(synth::sine(440.0, 1.0));
  EXPECT_EQ(f.dim(), 480);
  EXPECT_EQ(f.fps, 100.0);
  EXPECT_NEAR(static_cast<double>(f.n_frames()), 100.0, 1.0);
  EXPECT_TRUE(f.frames.allFinite());
  // diff blocks are non-negative
  for (int block : {1, 3, 5}) EXPECT_GE(f.frames.middleCols(block * 80, 80).minCoeff(), 0.0f);
}

TEST(SpectralFeatures, ResamplesOtherRates) {
  const auto f = spectral_features(synth::sine(440.0, 1.0, 16000));
  EXPECT_EQ(f.dim(), 480);
  EXPECT_NEAR(static_cast<double>(f.n_frames()), 100.0, 1.0);
}
