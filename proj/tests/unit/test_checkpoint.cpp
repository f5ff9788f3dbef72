#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "xsei/checkpoint.hpp"
#include "xsei/common.hpp"
#include "xsei/model_io.hpp"
#include "xsei/models.hpp"

using namespace xsei;
namespace fs = std::filesystem;

namespace {

models::FeatureData toy_data(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  models::FeatureData d;
  d.names = {"a", "b", "c"};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    d.rows.push_back({g(rng) + 2.0 * y, g(rng), g(rng) - y});
    d.labels.push_back(y);
  }
  return d;
}

void expect_same_predictions(const models::Model& a, const models::Model& b,
                             const models::FeatureData& d) {
  for (const auto& row : d.rows) EXPECT_EQ(a.predict_row(row), b.predict_row(row));
}

}  // namespace

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  nn::Checkpoint c{"{\"kind\":\"x\"}", {1.5, -2.0, 3e-300, 0.0}};
  const auto bytes = nn::encode_checkpoint(c);
  EXPECT_EQ(bytes.substr(0, 8), "XSEICKPT");
  const auto back = nn::decode_checkpoint(bytes);
  EXPECT_EQ(back.header_json, c.header_json);
  EXPECT_EQ(back.params, c.params);
}

TEST(Checkpoint, DetectsCorruption) {
  const auto bytes = nn::encode_checkpoint({"{}", {1.0, 2.0}});
  for (std::size_t pos : {0ul, 9ul, bytes.size() - 9, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] = static_cast<char>(bad[pos] ^ 0x40);
    EXPECT_THROW(nn::decode_checkpoint(bad), Error) << pos;
  }
  EXPECT_THROW(nn::decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
}

TEST(Checkpoint, NetworkRoundTrip) {
  nn::Network net(nn::Shape{1, 32}, models::lbnn_layers(models::PoolVariant::max, 3));
  net.initialize(4);
  const auto path = fs::temp_directory_path() / "xsei_ckpt_net.ckpt";
  nn::write_checkpoint(path, nn::network_checkpoint(net));
  const auto back = nn::network_from_checkpoint(nn::read_checkpoint(path));
  EXPECT_EQ(back.layers(), net.layers());
  EXPECT_EQ(back.input_shape(), net.input_shape());
  EXPECT_TRUE(std::equal(net.parameters().begin(), net.parameters().end(),
                         back.parameters().begin()));
}

TEST(ModelIo, FeatureModelsRoundTrip) {
  const auto d = toy_data(60, 1);
  models::LinearOptions lin;
  lin.max_iterations = 500;
  const std::vector<models::TrainedModel> zoo = {
      models::fit_knn(d, 3), models::fit_cart(d, 4, 2),
      models::fit_ensemble(d, models::EnsembleOptions{5, 4, 1, true, 0}, 3),
      models::fit_linear(d, lin, 0)};
  for (const auto& m : zoo) {
    const auto path = fs::temp_directory_path() / ("xsei_model_" + m->kind() + ".ckpt");
    models::save_model(path, *m);
    const auto back = models::load_model(path);
    EXPECT_EQ(back->kind(), m->kind());
    EXPECT_EQ(back->feature_names(), m->feature_names());
    EXPECT_EQ(back->descriptor().name, m->descriptor().name);
    EXPECT_EQ(back->descriptor().seed, m->descriptor().seed);
    EXPECT_EQ(back->descriptor().hyperparameters, m->descriptor().hyperparameters);
    expect_same_predictions(*m, *back, d);
  }
}

TEST(ModelIo, LbnnRoundTrip) {
  std::vector<signal::SignalWindow> wins;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int i = 0; i < 12; ++i) {
    signal::SignalWindow w;
    w.id = i;
    w.samples.resize(40);
    for (auto& v : w.samples) v = g(rng) + (i % 2) * 2.0;
    w.label = i % 2;
    wins.push_back(w);
  }
  models::LbnnOptions opt;
  opt.train.epochs = 2;
  const auto m = models::fit_lbnn(wins, wins, models::PoolVariant::avg, opt, 5);
  const auto back = models::from_checkpoint(models::to_checkpoint(*m));
  const auto& lb = dynamic_cast<const models::LbnnModel&>(*back);
  EXPECT_EQ(lb.variant(), models::PoolVariant::avg);
  EXPECT_EQ(lb.input_scale(), dynamic_cast<const models::LbnnModel&>(*m).input_scale());
  for (const auto& w : wins) EXPECT_EQ(back->predict_samples(w.samples), m->predict_samples(w.samples));
}
