#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "xsei/common.hpp"
#include "xsei/models.hpp"

using namespace xsei;
using namespace xsei::models;

namespace {

FeatureData one_d(std::vector<double> xs, std::vector<int> ys) {
  FeatureData d;
  d.names = {"x"};
  for (double x : xs) d.rows.push_back({x});
  d.labels = std::move(ys);
  return d;
}

FeatureData blobs(std::size_t n, double gap, std::uint64_t seed, double prior1 = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  FeatureData d;
  d.names = {"a", "b", "c", "d"};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = u(rng) < prior1 ? 1 : 0;
    d.rows.push_back({g(rng) + gap * y, 3.0 * g(rng), g(rng) - gap * y, 10.0 + g(rng)});
    d.labels.push_back(y);
  }
  return d;
}

void expect_simplex(const std::vector<double>& p) {
  double s = 0;
  for (double v : p) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-9);
}

}  // namespace

TEST(Knn, Examples) {
  const auto m = fit_knn(one_d({0, 10}, {0, 1}), 1);
  std::vector<double> q{1.0};
  EXPECT_EQ(m->predict_row(q), (std::vector<double>{1.0, 0.0}));
  std::vector<double> on{10.0};
  EXPECT_EQ(argmax(m->predict_row(on)), 1u);
  EXPECT_THROW(fit_knn(one_d({}, {}), 1), Error);
  EXPECT_THROW(fit_knn(one_d({0, 1}, {0, 1}), 3), Error);
}

TEST(Knn, DistanceTiesGoToLowerIndex) {
  // Query 2 is equidistant from every training point.
  const auto d = one_d({0, 4, 0, 4}, {0, 1, 1, 0});
  std::vector<double> q{2.0};
  EXPECT_EQ(fit_knn(d, 1)->predict_row(q), (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(fit_knn(d, 2)->predict_row(q), (std::vector<double>{0.5, 0.5}));
  const auto p3 = fit_knn(d, 3)->predict_row(q);
  EXPECT_DOUBLE_EQ(p3[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(p3[1], 2.0 / 3.0);
}

TEST(Knn, StandardizationMakesUnitsIrrelevant) {
  auto d = blobs(80, 1.0, 3);
  auto scaled = d;
  for (auto& r : scaled.rows) r[1] *= 1000.0;
  const auto a = fit_knn(d, 5);
  const auto b = fit_knn(scaled, 5);
  const auto test = blobs(40, 1.0, 4);
  for (auto row : test.rows) {
    const auto pa = a->predict_row(row);
    row[1] *= 1000.0;
    EXPECT_EQ(argmax(pa), argmax(b->predict_row(row)));
  }
}

TEST(Cart, PureLabelsGiveOneLeaf) {
  const auto m = fit_cart(one_d({1, 2, 3}, {1, 1, 1}), 5, 1);
  const auto& t = dynamic_cast<const TreeModel&>(*m).trees();
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].nodes.size(), 1u);
  std::vector<double> q{7.0};
  EXPECT_EQ(m->predict_row(q)[1], 1.0);
}

TEST(Cart, ThresholdSeparable) {
  const auto d = one_d({1, 2, 3, 4, 10, 11, 12, 13}, {0, 0, 0, 0, 1, 1, 1, 1});
  const auto m = fit_cart(d, 5, 1);
  EXPECT_EQ(dynamic_cast<const TreeModel&>(*m).trees()[0].depth(), 1u);
  EXPECT_EQ(accuracy(*m, d), 1.0);
}

TEST(Cart, DepthZeroIsMajorityStump) {
  const auto d = one_d({1, 2, 3, 4, 5}, {1, 0, 1, 1, 0});
  const auto m = fit_cart(d, 0, 1);
  std::vector<double> q{0.0};
  const auto p = m->predict_row(q);
  EXPECT_DOUBLE_EQ(p[1], 0.6);
  EXPECT_EQ(argmax(p), 1u);
}

TEST(Ensemble, SingleTreeWithoutBootstrapEqualsCart) {
  const auto d = blobs(100, 1.0, 5);
  EnsembleOptions opt{1, 6, 2, false, d.names.size()};
  const auto e = fit_ensemble(d, opt, 77);
  const auto c = fit_cart(d, 6, 2);
  EXPECT_EQ(dynamic_cast<const TreeModel&>(*e).trees()[0],
            dynamic_cast<const TreeModel&>(*c).trees()[0]);
}

TEST(Ensemble, ProbabilityIsMeanOfMembers) {
  const auto d = blobs(100, 0.7, 6);
  const auto e = fit_ensemble(d, EnsembleOptions{3, 5, 1, true, 0}, 8);
  const auto& trees = dynamic_cast<const TreeModel&>(*e).trees();
  ASSERT_EQ(trees.size(), 3u);
  for (const auto& row : blobs(20, 0.7, 9).rows) {
    const auto& a = trees[0].leaf(row);
    const auto& b = trees[1].leaf(row);
    const auto& c = trees[2].leaf(row);
    const auto p = e->predict_row(row);
    for (std::size_t k = 0; k < p.size(); ++k) EXPECT_NEAR(p[k], (a[k] + b[k] + c[k]) / 3.0, 1e-15);
  }
}

TEST(Ensemble, SeededForest) {
  const auto d = blobs(100, 0.7, 10);
  EnsembleOptions opt{4, 5, 1, true, 0};
  const auto ma = fit_ensemble(d, opt, 1);
  const auto mb = fit_ensemble(d, opt, 1);
  const auto mc = fit_ensemble(d, opt, 2);
  const auto& a = dynamic_cast<const TreeModel&>(*ma).trees();
  const auto& b = dynamic_cast<const TreeModel&>(*mb).trees();
  const auto& c = dynamic_cast<const TreeModel&>(*mc).trees();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Linear, HeavyL2ShrinksToPriors) {
  const auto d = blobs(200, 2.0, 11, 0.3);
  double prior = 0;
  for (int y : d.labels) prior += y;
  prior /= static_cast<double>(d.labels.size());
  LinearOptions opt;
  opt.strength = 1e6;
  const auto m = fit_linear(d, opt);
  const auto& lin = dynamic_cast<const LinearModel&>(*m);
  for (double w : lin.weights()) EXPECT_LT(std::fabs(w), 1e-5);
  EXPECT_NEAR(m->predict_row(d.rows[0])[1], prior, 1e-3);
}

TEST(Linear, SeparableSmallPenalty) {
  const auto d = blobs(200, 4.0, 12);
  const auto m = fit_linear(d, LinearOptions{});
  EXPECT_GE(accuracy(*m, d), 0.99);
}

TEST(Linear, L1ZeroesWeights) {
  const auto d = blobs(200, 1.0, 13);
  LinearOptions opt;
  opt.penalty = Penalty::l1;
  opt.strength = 0.2;
  const auto m = fit_linear(d, opt);
  const auto& lin = dynamic_cast<const LinearModel&>(*m);
  std::size_t zeros = 0;
  for (double w : lin.weights()) zeros += w == 0.0;
  EXPECT_GE(zeros, 1u);
}

TEST(Linear, IterationCapFlagsNonConvergence) {
  const auto d = blobs(100, 4.0, 14);
  LinearOptions opt;
  opt.strength = 1e-9;
  opt.max_iterations = 3;
  const auto m = fit_linear(d, opt);
  const auto& lin = dynamic_cast<const LinearModel&>(*m);
  EXPECT_FALSE(lin.converged());
  EXPECT_EQ(lin.iterations(), 3u);
}

TEST(Predict, SimplexPurityAndFamily) {
  const auto d = blobs(60, 1.0, 15);
  std::vector<TrainedModel> zoo{fit_knn(d, 1), fit_knn(d, 5), fit_cart(d, 4, 1),
                                fit_ensemble(d, EnsembleOptions{5, 4, 1, true, 0}, 1),
                                fit_linear(d, LinearOptions{})};
  for (const auto& m : zoo) {
    for (const auto& row : d.rows) {
      const auto p = m->predict_row(row);
      expect_simplex(p);
      EXPECT_EQ(p, m->predict_row(row));
    }
    EXPECT_THROW(m->predict_samples(d.rows[0]), Error);
    signal::SignalWindow w;
    w.samples = {1, 2, 3};
    EXPECT_THROW(predict(*m, w), Error);
  }
  const auto k1 = zoo[0]->predict_row(d.rows[3]);
  EXPECT_EQ(*std::max_element(k1.begin(), k1.end()), 1.0);
}

TEST(Predict, FeatureVectorAlignedByName) {
  const auto d = blobs(60, 2.0, 16);
  const auto m = fit_cart(d, 4, 1);
  features::FeatureVector fv;
  fv.names = {"d", "c", "b", "a"};
  const auto& r = d.rows[0];
  fv.values = {r[3], r[2], r[1], r[0]};
  EXPECT_EQ(predict(*m, fv), m->predict_row(r));
  fv.names[0] = "zzz";
  EXPECT_THROW(predict(*m, fv), Error);
}

TEST(Accuracy, HandCounted) {
  const auto train = one_d({0, 1, 2, 3}, {0, 1, 0, 1});
  const auto m = fit_knn(train, 1);
  EXPECT_EQ(accuracy(*m, train), 1.0);
  auto three = train;
  three.labels[2] = 1;
  EXPECT_EQ(accuracy(*m, three), 0.75);
  auto flipped = train;
  for (int& y : flipped.labels) y = 1 - y;
  EXPECT_EQ(accuracy(*m, flipped), 0.0);
}

TEST(Lbnn, VariantsShareLayoutAndCheckInput) {
  nn::Network avg(nn::Shape{1, 64}, lbnn_layers(PoolVariant::avg, 2));
  avg.initialize(3);
  nn::Network mx(nn::Shape{1, 64}, lbnn_layers(PoolVariant::max, 2));
  mx.set_parameters(avg.parameters());
  LbnnModel a(Descriptor{"lbnn_avg", {}, 0}, avg, 0.5, PoolVariant::avg);
  LbnnModel b(Descriptor{"lbnn_max", {}, 0}, mx, 0.5, PoolVariant::max);
  EXPECT_EQ(avg.layer_parameter_counts(), mx.layer_parameter_counts());
  std::vector<double> c(64, 2.5);
  const auto pa = a.predict_samples(c);
  ASSERT_EQ(pa.size(), 2u);
  EXPECT_NEAR(pa[0] + pa[1], 1.0, 1e-12);
  EXPECT_EQ(b.predict_samples(c).size(), 2u);
  std::vector<double> wrong(63, 1.0);
  EXPECT_THROW(a.predict_samples(wrong), Error);
  EXPECT_THROW(a.predict_row(c), Error);
}

TEST(Lbnn, FitsSeparableWindows) {
  std::vector<signal::SignalWindow> train, val;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0.0, 0.2);
  for (int i = 0; i < 80; ++i) {
    signal::SignalWindow w;
    w.id = i;
    w.label = i % 2;
    w.samples.resize(48);
    for (std::size_t t = 0; t < w.samples.size(); ++t) {
      const double base = std::sin(2 * M_PI * t / 24.0);
      w.samples[t] = (w.label ? std::copysign(1.0, base) : base) + g(rng);
    }
    (i < 64 ? train : val).push_back(w);
  }
  LbnnOptions opt;
  opt.train.epochs = 15;
  opt.train.batch_size = 16;
  std::vector<nn::EpochStats> curve;
  const auto m = fit_lbnn(train, val, PoolVariant::avg, opt, 4, &curve);
  EXPECT_EQ(curve.size(), 15u);
  EXPECT_GE(accuracy(*m, val), 0.9);
  EXPECT_EQ(m->family(), Family::raw_signal);
  const auto again = fit_lbnn(train, val, PoolVariant::avg, opt, 4);
  EXPECT_EQ(m->predict_samples(val[0].samples), again->predict_samples(val[0].samples));
}
