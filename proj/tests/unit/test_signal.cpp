#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "xsei/common.hpp"
#include "xsei/signal.hpp"

using namespace xsei;
using namespace xsei::signal;

namespace {

LoadProfile pure_sine() {
  LoadProfile p;
  p.name = "sine";
  p.amplitude = 5.0;
  return p;
}

LoadProfile arcing() {
  LoadProfile p = pure_sine();
  p.arc_fraction = 0.3;
  p.arc_episode_min_ms = 20;
  p.arc_episode_max_ms = 40;
  p.arc.shoulder = 0.2;
  p.arc.peak_clip = 0.3;
  p.arc.triangle_mix = 0.4;
  p.arc.spike_rate = 2;
  p.arc.spike_amplitude = 0.3;
  return p;
}

SignalWindow ramp_window(std::size_t n) {
  SignalWindow w;
  w.samples.resize(n);
  std::iota(w.samples.begin(), w.samples.end(), 1.0);
  w.mask.flags.assign(n, 0);
  return w;
}

}  // namespace

TEST(Synthesize, NoArcFractionGivesEmptyMask) {
  auto [w, m] = synthesize(pure_sine(), 8000, 3);
  EXPECT_EQ(w.samples.size(), 8000u);
  EXPECT_EQ(m.size(), 8000u);
  EXPECT_EQ(m.count(), 0u);
}

TEST(Synthesize, Deterministic) {
  auto [a, ma] = synthesize(arcing(), 40000, 11);
  auto [b, mb] = synthesize(arcing(), 40000, 11);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(ma.flags, mb.flags);
  auto [c, mc] = synthesize(arcing(), 40000, 12);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Synthesize, PureSineSpectrumPeaksAtMains) {
  const auto p = pure_sine();
  const std::size_t n = samples_per_cycle(p) * 3;
  auto [w, m] = synthesize(p, n, 5);
  const auto s = fft_magnitude(w.samples, w.sample_period_ms);
  const std::size_t k = static_cast<std::size_t>(std::lround(kMainsHz / s.bin_width_hz));
  EXPECT_EQ(k, 3u);
  const double peak = s.magnitudes[k];
  for (std::size_t i = 0; i < s.magnitudes.size(); ++i) {
    if (i != k) {
      EXPECT_LT(s.magnitudes[i], 1e-6 * peak) << "bin " << i;
    }
  }
}

TEST(Synthesize, ArcMaskMatchesAltered) {
  auto [arc, mask] = synthesize(arcing(), 40000, 21);
  ASSERT_GT(mask.count(), 0u);
  auto [clean, none] = synthesize_with_arcs(arcing(), 40000, 21, {});
  EXPECT_EQ(none.count(), 0u);
  std::vector<Span> spans;
  for (std::size_t i = 0; i < mask.size();) {
    if (!mask.flags[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < mask.size() && mask.flags[j]) ++j;
    spans.push_back({i, j});
    i = j;
  }
  auto [placed, pmask] = synthesize_with_arcs(arcing(), 40000, 21, spans);
  EXPECT_EQ(pmask.flags, mask.flags);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask.flags[i]) {
      EXPECT_EQ(placed.samples[i], clean.samples[i]) << i;
    }
  }
}

TEST(Synthesize, RejectsInvalidProfile) {
  auto p = pure_sine();
  p.amplitude = -1;
  EXPECT_THROW(synthesize(p, 8000, 1), Error);
  p = pure_sine();
  p.arc_fraction = 1.5;
  EXPECT_THROW(synthesize(p, 8000, 1), Error);
  EXPECT_THROW(synthesize(pure_sine(), 10, 1), Error);
}

TEST(Window, CountAndStarts) {
  Waveform w;
  w.samples.assign(20000, 1.0);
  ArcMask m;
  m.flags.assign(20000, 0);
  const auto wins = window(w, m, 10000, 5000);
  ASSERT_EQ(wins.size(), 3u);
  EXPECT_EQ(wins[0].start, 0u);
  EXPECT_EQ(wins[1].start, 5000u);
  EXPECT_EQ(wins[2].start, 10000u);
  for (std::size_t i = 0; i < wins.size(); ++i) {
    EXPECT_EQ(wins[i].id, i);
    EXPECT_EQ(wins[i].label, kNormalClass);
  }
  EXPECT_EQ(window(w, m, 20000, 5000).size(), 1u);
  EXPECT_THROW(window(w, m, 20001, 5000), Error);
}

TEST(Window, SlicesMatchSource) {
  auto [w, m] = synthesize(arcing(), 40000, 4);
  WindowOptions keep_all;
  keep_all.min_arc_fraction = 0.0;
  const auto wins = window(w, m, 10000, 5000, keep_all);
  ASSERT_EQ(wins.size(), 7u);
  for (const auto& win : wins) {
    for (std::size_t i = 0; i < win.size(); ++i) {
      ASSERT_EQ(win.samples[i], w.samples[win.start + i]);
      ASSERT_EQ(win.mask.flags[i], m.flags[win.start + i]);
    }
    EXPECT_EQ(win.label, win.mask.any() ? kArcClass : kNormalClass);
  }
}

TEST(Window, LabelRule) {
  std::vector<std::uint8_t> mask(100, 0);
  EXPECT_EQ(label_for_mask(mask, {}), kNormalClass);
  for (std::size_t i = 0; i < 5; ++i) mask[i] = 1;
  EXPECT_EQ(label_for_mask(mask, {}), -1);
  WindowOptions keep;
  keep.discard_ambiguous = false;
  EXPECT_EQ(label_for_mask(mask, keep), kNormalClass);
  for (std::size_t i = 0; i < 10; ++i) mask[i] = 1;
  EXPECT_EQ(label_for_mask(mask, {}), kArcClass);
  WindowOptions any;
  any.min_arc_fraction = 0.0;
  mask.assign(100, 0);
  mask[50] = 1;
  EXPECT_EQ(label_for_mask(mask, any), kArcClass);
}

TEST(Downsample, Examples) {
  auto w = ramp_window(4);
  const auto d = downsample(w, 2);
  EXPECT_EQ(d.samples, (std::vector<double>{1, 3}));
  EXPECT_DOUBLE_EQ(d.sample_period_ms, 2 * kBaseSamplePeriodMs);
  EXPECT_EQ(downsample(w, 1).samples, w.samples);
  auto big = ramp_window(100);
  EXPECT_DOUBLE_EQ(downsample(big, 5).sample_period_ms, 2.5e-2);
  EXPECT_THROW(downsample(w, 0), Error);
}

TEST(Downsample, Composes) {
  auto [w, m] = synthesize(arcing(), 20000, 8);
  WindowOptions keep_all;
  keep_all.min_arc_fraction = 0.0;
  const auto win = window(w, m, 20000, 1, keep_all)[0];
  const auto ab = downsample(downsample(win, 2), 5);
  const auto direct = downsample(win, 10);
  EXPECT_EQ(ab.samples, direct.samples);
  EXPECT_EQ(ab.mask.flags, direct.mask.flags);
  EXPECT_DOUBLE_EQ(ab.sample_period_ms, direct.sample_period_ms);
}

TEST(Downsample, Prefilter) {
  auto w = ramp_window(6);
  const auto d = downsample(w, 2, true);
  ASSERT_EQ(d.samples.size(), 3u);
  EXPECT_NE(d.samples, downsample(w, 2).samples);
}

TEST(AddNoise, ZeroDbPower) {
  auto [w, m] = synthesize(pure_sine(), 40000, 2);
  WindowOptions opt;
  const auto win = window(w, m, 40000, 1, opt)[0];
  const auto noisy = add_noise(win, 0.0, 99);
  std::vector<double> diff(win.size());
  for (std::size_t i = 0; i < win.size(); ++i) diff[i] = noisy.samples[i] - win.samples[i];
  const double ratio = mean_power(diff) / mean_power(win.samples);
  EXPECT_NEAR(ratio, 1.0, 0.05);
}

TEST(AddNoise, VanishingAndDeterministic) {
  auto [w, m] = synthesize(arcing(), 20000, 6);
  WindowOptions keep_all;
  keep_all.min_arc_fraction = 0.0;
  const auto win = window(w, m, 10000, 10000, keep_all)[1];
  const auto quiet = add_noise(win, 300.0, 1);
  std::vector<double> diff(win.size());
  for (std::size_t i = 0; i < win.size(); ++i) diff[i] = quiet.samples[i] - win.samples[i];
  EXPECT_LT(std::sqrt(mean_power(diff) / mean_power(win.samples)), 1e-12);
  EXPECT_EQ(add_noise(win, 3.0, 5).samples, add_noise(win, 3.0, 5).samples);
  const auto n = add_noise(win, -5.0, 5);
  EXPECT_EQ(n.label, win.label);
  EXPECT_EQ(n.mask.flags, win.mask.flags);
  EXPECT_EQ(n.id, win.id);
}

TEST(AddNoise, SameSeedScalesOneRealization) {
  auto w = ramp_window(64);
  const auto a = add_noise(w, 0.0, 17);
  const auto b = add_noise(w, 10.0, 17);
  const double scale = std::sqrt(10.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_NEAR(a.samples[i] - w.samples[i], scale * (b.samples[i] - w.samples[i]), 1e-9);
  }
}

TEST(AddNoise, ZeroPowerRejected) {
  SignalWindow w;
  w.samples.assign(16, 0.0);
  w.mask.flags.assign(16, 0);
  EXPECT_THROW(add_noise(w, 5.0, 1), Error);
}

TEST(Fft, ConstantAndSingleBin) {
  std::vector<double> c(32, -3.0);
  const auto s = fft_magnitude(c, 1.0);
  ASSERT_EQ(s.magnitudes.size(), 17u);
  EXPECT_NEAR(s.magnitudes[0], 96.0, 1e-9);
  for (std::size_t i = 1; i < s.magnitudes.size(); ++i) EXPECT_NEAR(s.magnitudes[i], 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(s.bin_width_hz, 1000.0 / 32.0);

  std::vector<double> sine(64);
  for (std::size_t t = 0; t < sine.size(); ++t) sine[t] = std::sin(2 * M_PI * 5 * t / 64.0);
  const auto ss = fft_magnitude(sine, 1.0);
  EXPECT_EQ(argmax(ss.magnitudes), 5u);
  EXPECT_NEAR(ss.magnitudes[5], 32.0, 1e-9);
}

TEST(Fft, MatchesDftOracle) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (std::size_t n = 2; n <= 64; ++n) {
    std::vector<double> x(n);
    for (double& v : x) v = g(rng);
    const auto s = fft_magnitude(x, kBaseSamplePeriodMs);
    const auto ref = oracle::dft(x);
    ASSERT_EQ(s.magnitudes.size(), n / 2 + 1);
    for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
      const double r = std::abs(ref[k]);
      EXPECT_LE(std::abs(s.magnitudes[k] - r), 1e-9 * std::max(r, 1.0)) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Fft, LinearityViaOracle) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (std::size_t n : {8u, 31u, 64u}) {
    std::vector<double> a(n), b(n), sum(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
      sum[i] = a[i] + b[i];
    }
    const auto fa = oracle::dft(a);
    const auto fb = oracle::dft(b);
    const auto s = fft_magnitude(sum, 1.0);
    for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
      const double expect = std::abs(fa[k] + fb[k]);
      EXPECT_NEAR(s.magnitudes[k], expect, 1e-9 * std::max(expect, 1.0));
    }
  }
}

TEST(Fft, RejectsShort) {
  std::vector<double> one{1.0};
  EXPECT_THROW(fft_magnitude(one, 1.0), Error);
}
