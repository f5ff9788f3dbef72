#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "xsei/features.hpp"
#include "xsei/nn.hpp"
#include "xsei/signal.hpp"

namespace xsei::models {

enum class Family { feature_pool, raw_signal };

std::string to_string(Family f);

struct Descriptor {
  std::string name;
  std::map<std::string, std::string> hyperparameters;
  std::uint64_t seed = 0;
};

/// Common prediction interface. Models are immutable once fitted and safe to
/// query from several threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual Family family() const = 0;
  /// Short tag used by checkpoints: knn, cart, ensemble, linear, lbnn.
  virtual std::string kind() const = 0;
  const Descriptor& descriptor() const { return descriptor_; }
  std::size_t num_classes() const { return num_classes_; }

  /// Feature-pool models: names of the expected feature columns.
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  /// Probabilities for one feature row. Throws for raw-signal models.
  virtual std::vector<double> predict_row(std::span<const double> row) const;
  /// Probabilities for one raw window. Throws for feature-pool models.
  virtual std::vector<double> predict_samples(std::span<const double> samples) const;
  virtual std::vector<std::vector<double>> predict_samples_batch(
      std::span<const std::vector<double>> windows) const;

 protected:
  Model(Descriptor d, std::size_t num_classes, std::vector<std::string> feature_names = {});

  Descriptor descriptor_;
  std::size_t num_classes_;
  std::vector<std::string> feature_names_;
};

using TrainedModel = std::shared_ptr<const Model>;

/// Zero-mean unit-variance scaling frozen from a training matrix. Constant
/// columns keep a scale of 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const std::vector<std::vector<double>>& rows);
  std::vector<double> apply(std::span<const double> row) const;
};

class KnnModel final : public Model {
 public:
  KnnModel(Descriptor d, std::size_t num_classes, std::vector<std::string> names, std::size_t k,
           Standardizer standardizer, std::vector<std::vector<double>> points,
           std::vector<int> labels);

  Family family() const override { return Family::feature_pool; }
  std::string kind() const override { return "knn"; }
  std::vector<double> predict_row(std::span<const double> row) const override;

  std::size_t k() const { return k_; }
  const Standardizer& standardizer() const { return standardizer_; }
  const std::vector<std::vector<double>>& points() const { return points_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  std::size_t k_;
  Standardizer standardizer_;
  std::vector<std::vector<double>> points_;  // standardized
  std::vector<int> labels_;
};

/// Flat binary tree. Rows with x[feature] <= threshold go left.
struct Tree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> probabilities;  // class proportions at the node
    friend bool operator==(const Node&, const Node&) = default;
  };
  std::vector<Node> nodes;

  const std::vector<double>& leaf(std::span<const double> row) const;
  std::size_t depth() const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

/// One CART tree or a bagged forest of them; prediction averages the trees.
class TreeModel final : public Model {
 public:
  TreeModel(Descriptor d, std::size_t num_classes, std::vector<std::string> names,
            std::vector<Tree> trees, std::string kind);

  Family family() const override { return Family::feature_pool; }
  std::string kind() const override { return kind_; }
  std::vector<double> predict_row(std::span<const double> row) const override;

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
  std::string kind_;
};

enum class Penalty { l1, l2 };

std::string to_string(Penalty p);
Penalty penalty_from_string(const std::string& s);

/// Multinomial logistic regression over standardized features.
class LinearModel final : public Model {
 public:
  LinearModel(Descriptor d, std::size_t num_classes, std::vector<std::string> names,
              Standardizer standardizer, std::vector<double> weights, std::vector<double> bias,
              bool converged, std::size_t iterations);

  Family family() const override { return Family::feature_pool; }
  std::string kind() const override { return "linear"; }
  std::vector<double> predict_row(std::span<const double> row) const override;

  /// Row-major num_classes x feature count.
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }
  const Standardizer& standardizer() const { return standardizer_; }
  /// False when the optimizer hit its iteration cap first.
  bool converged() const { return converged_; }
  std::size_t iterations() const { return iterations_; }

 private:
  Standardizer standardizer_;
  std::vector<double> weights_;
  std::vector<double> bias_;
  bool converged_;
  std::size_t iterations_;
};

enum class PoolVariant { avg, max };

std::string to_string(PoolVariant v);

/// Convolutional classifier over raw windows. Inputs are multiplied by a
/// scale frozen from the training windows (1 / training RMS).
class LbnnModel final : public Model {
 public:
  LbnnModel(Descriptor d, nn::Network net, double input_scale, PoolVariant variant);

  Family family() const override { return Family::raw_signal; }
  std::string kind() const override { return "lbnn"; }
  std::vector<double> predict_samples(std::span<const double> samples) const override;
  std::vector<std::vector<double>> predict_samples_batch(
      std::span<const std::vector<double>> windows) const override;

  const nn::Network& network() const { return net_; }
  double input_scale() const { return input_scale_; }
  PoolVariant variant() const { return variant_; }
  std::size_t input_length() const { return net_.input_shape().length; }

 private:
  nn::Network net_;
  double input_scale_;
  PoolVariant variant_;
};

/// Labeled feature matrix. `num_classes` of 0 means max(label) + 1.
struct FeatureData {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  static FeatureData from_table(const features::FeatureTable& table, std::size_t num_classes = 0);
  std::size_t classes() const;
  void validate() const;
};

TrainedModel fit_knn(const FeatureData& data, std::size_t k);

TrainedModel fit_cart(const FeatureData& data, std::size_t max_depth, std::size_t min_leaf);

struct EnsembleOptions {
  std::size_t size = 50;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 1;
  bool bootstrap = true;
  /// Candidate features drawn per split; 0 means ceil(sqrt(d)).
  std::size_t max_features = 0;
};

TrainedModel fit_ensemble(const FeatureData& data, const EnsembleOptions& options,
                          std::uint64_t seed);

struct LinearOptions {
  Penalty penalty = Penalty::l2;
  double strength = 1e-3;
  std::size_t max_iterations = 5000;
  double tolerance = 1e-7;  // largest parameter change that counts as converged
};

TrainedModel fit_linear(const FeatureData& data, const LinearOptions& options,
                        std::uint64_t seed = 0);

struct LbnnOptions {
  std::size_t num_classes = 2;
  nn::TrainConfig train;
};

/// Layer chain of the lightweight network: two conv/pool stages, then two dense layers.
std::vector<nn::LayerSpec> lbnn_layers(PoolVariant variant, std::size_t num_classes);

/// Trains the network on `train_windows`; `val_windows` (possibly empty)
/// selects the best epoch. `curve` receives the per-epoch statistics.
TrainedModel fit_lbnn(std::span<const signal::SignalWindow> train_windows,
                      std::span<const signal::SignalWindow> val_windows, PoolVariant variant,
                      const LbnnOptions& options, std::uint64_t seed,
                      std::vector<nn::EpochStats>* curve = nullptr);

/// Checks that the model takes feature vectors, aligns columns by name and predicts.
std::vector<double> predict(const Model& model, const features::FeatureVector& input);
/// Checks that the model takes raw windows and predicts.
std::vector<double> predict(const Model& model, const signal::SignalWindow& input);

/// Fraction of argmax-correct rows; argmax ties go to the lowest class.
double accuracy(const Model& model, const FeatureData& test);
double accuracy(const Model& model, std::span<const signal::SignalWindow> test);

}  // namespace xsei::models
