#include "xsei/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "xsei/common.hpp"

namespace xsei::models {

std::string to_string(Family f) { return f == Family::feature_pool ? "feature_pool" : "raw_signal"; }

std::string to_string(Penalty p) { return p == Penalty::l1 ? "l1" : "l2"; }

Penalty penalty_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return Penalty::l1;
  if (s == "l2" || s == "L2") return Penalty::l2;
  throw Error("unknown penalty '" + s + "' (expected l1 or l2)");
}

std::string to_string(PoolVariant v) { return v == PoolVariant::avg ? "avg" : "max"; }

Model::Model(Descriptor d, std::size_t num_classes, std::vector<std::string> feature_names)
    : descriptor_(std::move(d)), num_classes_(num_classes), feature_names_(std::move(feature_names)) {
  if (num_classes_ < 2) throw Error("a classifier needs at least two classes");
}

std::vector<double> Model::predict_row(std::span<const double>) const {
  throw Error("model '" + descriptor_.name + "' takes raw signal windows, not feature vectors");
}

std::vector<double> Model::predict_samples(std::span<const double>) const {
  throw Error("model '" + descriptor_.name + "' takes feature vectors, not raw signal windows");
}

std::vector<std::vector<double>> Model::predict_samples_batch(
    std::span<const std::vector<double>> windows) const {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(predict_samples(w));
  return out;
}

Standardizer Standardizer::fit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error("cannot standardize an empty matrix");
  const std::size_t d = rows[0].size();
  const double n = static_cast<double>(rows.size());
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += r[j];
  }
  for (double& m : s.mean) m /= n;
  std::vector<double> var(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) var[j] += (r[j] - s.mean[j]) * (r[j] - s.mean[j]);
  }
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / n);
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw Error("feature row has the wrong width");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / scale[j];
  return out;
}

FeatureData FeatureData::from_table(const features::FeatureTable& table, std::size_t num_classes) {
  FeatureData d;
  d.names = table.names;
  d.rows = table.rows;
  d.labels = table.labels;
  d.num_classes = num_classes;
  return d;
}

std::size_t FeatureData::classes() const {
  if (num_classes > 0) return num_classes;
  int top = 0;
  for (int l : labels) top = std::max(top, l);
  return std::max<std::size_t>(2, static_cast<std::size_t>(top) + 1);
}

void FeatureData::validate() const {
  if (rows.empty()) throw Error("training set is empty");
  if (rows.size() != labels.size()) throw Error("feature rows and labels differ in count");
  const std::size_t k = classes();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != names.size()) {
      throw Error("feature row " + std::to_string(i) + " has the wrong width");
    }
    for (double v : rows[i]) {
      if (!std::isfinite(v)) throw Error("feature row " + std::to_string(i) + " is not finite");
    }
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw Error("label of row " + std::to_string(i) + " is out of range");
    }
  }
}

// ---------------------------------------------------------------- KNN

KnnModel::KnnModel(Descriptor d, std::size_t num_classes, std::vector<std::string> names,
                   std::size_t k, Standardizer standardizer, std::vector<std::vector<double>> points,
                   std::vector<int> labels)
    : Model(std::move(d), num_classes, std::move(names)),
      k_(k),
      standardizer_(std::move(standardizer)),
      points_(std::move(points)),
      labels_(std::move(labels)) {
  if (k_ == 0 || k_ > points_.size()) throw Error("knn k must be within [1, training size]");
}

std::vector<double> KnnModel::predict_row(std::span<const double> row) const {
  const auto q = standardizer_.apply(row);
  std::vector<std::pair<double, std::size_t>> dist(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (points_[i][j] - q[j]) * (points_[i][j] - q[j]);
    dist[i] = {s, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  std::vector<double> p(num_classes_, 0.0);
  for (std::size_t i = 0; i < k_; ++i) p[static_cast<std::size_t>(labels_[dist[i].second])] += 1.0;
  for (double& v : p) v /= static_cast<double>(k_);
  return p;
}

TrainedModel fit_knn(const FeatureData& data, std::size_t k) {
  data.validate();
  if (k == 0 || k > data.rows.size()) throw Error("knn k must be within [1, training size]");
  auto st = Standardizer::fit(data.rows);
  std::vector<std::vector<double>> points;
  points.reserve(data.rows.size());
  for (const auto& r : data.rows) points.push_back(st.apply(r));
  Descriptor d{"knn", {{"k", std::to_string(k)}}, 0};
  return std::make_shared<KnnModel>(std::move(d), data.classes(), data.names, k, std::move(st),
                                    std::move(points), data.labels);
}

// ---------------------------------------------------------------- trees

const std::vector<double>& Tree::leaf(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                          : n.right);
  }
  return nodes[i].probabilities;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return best;
}

TreeModel::TreeModel(Descriptor d, std::size_t num_classes, std::vector<std::string> names,
                     std::vector<Tree> trees, std::string kind)
    : Model(std::move(d), num_classes, std::move(names)),
      trees_(std::move(trees)),
      kind_(std::move(kind)) {
  if (trees_.empty()) throw Error("a tree model needs at least one tree");
}

std::vector<double> TreeModel::predict_row(std::span<const double> row) const {
  if (row.size() != feature_names_.size()) throw Error("feature row has the wrong width");
  std::vector<double> p(num_classes_, 0.0);
  for (const auto& t : trees_) {
    const auto& leaf = t.leaf(row);
    for (std::size_t c = 0; c < p.size(); ++c) p[c] += leaf[c];
  }
  if (trees_.size() > 1) {
    for (double& v : p) v /= static_cast<double>(trees_.size());
  }
  return p;
}

namespace {

double gini(std::span<const std::size_t> counts, std::size_t n) {
  if (n == 0) return 0.0;
  double s = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s += p * p;
  }
  return 1.0 - s;
}

struct TreeBuilder {
  const FeatureData& data;
  std::size_t classes;
  std::size_t max_depth;
  std::size_t min_leaf;
  std::size_t max_features;  // >= d means every feature, no draws
  std::mt19937_64* rng;
  Tree tree;

  int build(std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t n = rows.size();
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t r : rows) counts[static_cast<std::size_t>(data.labels[r])]++;
    Tree::Node node;
    node.probabilities.resize(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      node.probabilities[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    const double parent = gini(counts, n);
    if (depth >= max_depth || parent <= 0.0 || n < 2 * min_leaf) return id;

    const std::size_t d = data.names.size();
    std::vector<std::size_t> candidates(d);
    std::iota(candidates.begin(), candidates.end(), 0);
    if (max_features < d) {
      for (std::size_t i = 0; i < max_features; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, d - 1);
        std::swap(candidates[i], candidates[pick(*rng)]);
      }
      candidates.resize(max_features);
      std::sort(candidates.begin(), candidates.end());
    }

    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(rows);
    std::vector<std::size_t> left(classes), right(classes);
    for (std::size_t f : candidates) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.rows[a][f] < data.rows[b][f];
      });
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 1; i < n; ++i) {
        const auto lbl = static_cast<std::size_t>(data.labels[order[i - 1]]);
        left[lbl]++;
        right[lbl]--;
        const double lo = data.rows[order[i - 1]][f];
        const double hi = data.rows[order[i]][f];
        if (!(lo < hi) || i < min_leaf || n - i < min_leaf) continue;
        const double gain = parent - (static_cast<double>(i) * gini(left, i) +
                                      static_cast<double>(n - i) * gini(right, n - i)) /
                                         static_cast<double>(n);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : rows) {
      (data.rows[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? lrows : rrows)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(lrows, depth + 1);
    const int r = build(rrows, depth + 1);
    auto& self = tree.nodes[static_cast<std::size_t>(id)];
    self.feature = best_feature;
    self.threshold = best_threshold;
    self.left = l;
    self.right = r;
    return id;
  }
};

Tree grow_tree(const FeatureData& data, std::vector<std::size_t> rows, std::size_t max_depth,
               std::size_t min_leaf, std::size_t max_features, std::mt19937_64* rng) {
  TreeBuilder b{data, data.classes(), max_depth, std::max<std::size_t>(1, min_leaf), max_features,
                rng, {}};
  b.build(rows, 0);
  return std::move(b.tree);
}

}  // namespace

TrainedModel fit_cart(const FeatureData& data, std::size_t max_depth, std::size_t min_leaf) {
  data.validate();
  std::vector<std::size_t> rows(data.rows.size());
  std::iota(rows.begin(), rows.end(), 0);
  Descriptor d{"cart",
               {{"max_depth", std::to_string(max_depth)}, {"min_leaf", std::to_string(min_leaf)}},
               0};
  std::vector<Tree> trees;
  trees.push_back(grow_tree(data, std::move(rows), max_depth, min_leaf, data.names.size(), nullptr));
  return std::make_shared<TreeModel>(std::move(d), data.classes(), data.names, std::move(trees),
                                     "cart");
}

TrainedModel fit_ensemble(const FeatureData& data, const EnsembleOptions& options,
                          std::uint64_t seed) {
  data.validate();
  if (options.size == 0) throw Error("ensemble size must be >= 1");
  const std::size_t d = data.names.size();
  const std::size_t max_features =
      options.max_features == 0
          ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
          : std::min(options.max_features, d);
  const std::size_t n = data.rows.size();
  std::vector<Tree> trees;
  trees.reserve(options.size);
  for (std::size_t t = 0; t < options.size; ++t) {
    const auto ti = static_cast<std::int64_t>(t);
    std::vector<std::size_t> rows(n);
    if (options.bootstrap) {
      std::mt19937_64 boot(derive_seed(seed, "bootstrap", {ti}));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(boot);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    std::mt19937_64 split_rng(derive_seed(seed, "splits", {ti}));
    trees.push_back(grow_tree(data, std::move(rows), options.max_depth, options.min_leaf,
                              max_features, &split_rng));
  }
  Descriptor desc{"ensemble",
                  {{"size", std::to_string(options.size)},
                   {"max_depth", std::to_string(options.max_depth)},
                   {"min_leaf", std::to_string(options.min_leaf)},
                   {"bootstrap", options.bootstrap ? "true" : "false"},
                   {"max_features", std::to_string(max_features)}},
                  seed};
  return std::make_shared<TreeModel>(std::move(desc), data.classes(), data.names, std::move(trees),
                                     "ensemble");
}

// ---------------------------------------------------------------- linear

LinearModel::LinearModel(Descriptor d, std::size_t num_classes, std::vector<std::string> names,
                         Standardizer standardizer, std::vector<double> weights,
                         std::vector<double> bias, bool converged, std::size_t iterations)
    : Model(std::move(d), num_classes, std::move(names)),
      standardizer_(std::move(standardizer)),
      weights_(std::move(weights)),
      bias_(std::move(bias)),
      converged_(converged),
      iterations_(iterations) {
  if (weights_.size() != num_classes_ * feature_names_.size() || bias_.size() != num_classes_) {
    throw Error("linear model parameters do not match its shape");
  }
}

namespace {

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : z) v /= s;
}

}  // namespace

std::vector<double> LinearModel::predict_row(std::span<const double> row) const {
  const auto x = standardizer_.apply(row);
  const std::size_t d = x.size();
  std::vector<double> z(bias_);
  for (std::size_t c = 0; c < num_classes_; ++c) {
    for (std::size_t j = 0; j < d; ++j) z[c] += weights_[c * d + j] * x[j];
  }
  softmax_inplace(z);
  return z;
}

TrainedModel fit_linear(const FeatureData& data, const LinearOptions& options, std::uint64_t seed) {
  data.validate();
  if (!(options.strength >= 0.0)) throw Error("penalty strength must be >= 0");
  const std::size_t n = data.rows.size();
  const std::size_t d = data.names.size();
  const std::size_t k = data.classes();
  auto st = Standardizer::fit(data.rows);
  std::vector<std::vector<double>> x;
  x.reserve(n);
  double sq = 0.0;
  for (const auto& r : data.rows) {
    x.push_back(st.apply(r));
    for (double v : x.back()) sq += v * v;
  }
  // Step 1/L with L bounding the curvature of the mean cross-entropy.
  const double lipschitz = 0.5 * (sq / static_cast<double>(n) + 1.0);
  const double step = options.penalty == Penalty::l2 ? 1.0 / (lipschitz + options.strength)
                                                     : 1.0 / lipschitz;
  std::vector<double> w(k * d, 0.0), b(k, 0.0), gw(k * d), gb(k), z(k);
  bool converged = false;
  std::size_t it = 0;
  for (; it < options.max_iterations && !converged; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        z[c] = b[c];
        for (std::size_t j = 0; j < d; ++j) z[c] += w[c * d + j] * x[i][j];
      }
      softmax_inplace(z);
      z[static_cast<std::size_t>(data.labels[i])] -= 1.0;
      for (std::size_t c = 0; c < k; ++c) {
        gb[c] += z[c];
        for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += z[c] * x[i][j];
      }
    }
    double change = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < k; ++c) {
      const double nb = b[c] - gb[c] * inv_n / lipschitz;
      change = std::max(change, std::abs(nb - b[c]));
      b[c] = nb;
    }
    for (std::size_t q = 0; q < w.size(); ++q) {
      double g = gw[q] * inv_n;
      if (options.penalty == Penalty::l2) g += options.strength * w[q];
      double nw = w[q] - step * g;
      if (options.penalty == Penalty::l1) {
        const double t = step * options.strength;
        nw = std::abs(nw) <= t ? 0.0 : nw - std::copysign(t, nw);
      }
      change = std::max(change, std::abs(nw - w[q]));
      w[q] = nw;
    }
    converged = change < options.tolerance;
  }
  Descriptor desc{"linear",
                  {{"penalty", to_string(options.penalty)},
                   {"strength", format_double(options.strength)},
                   {"max_iterations", std::to_string(options.max_iterations)}},
                  seed};
  return std::make_shared<LinearModel>(std::move(desc), k, data.names, std::move(st), std::move(w),
                                       std::move(b), converged, it);
}

// ---------------------------------------------------------------- LBNN

LbnnModel::LbnnModel(Descriptor d, nn::Network net, double input_scale, PoolVariant variant)
    : Model(std::move(d), net.output_shape().size()),
      net_(std::move(net)),
      input_scale_(input_scale),
      variant_(variant) {
  if (net_.input_shape().channels != 1) throw Error("raw-signal networks take one input channel");
  if (!(input_scale_ > 0.0) || !std::isfinite(input_scale_)) throw Error("input scale must be > 0");
}

std::vector<double> LbnnModel::predict_samples(std::span<const double> samples) const {
  if (samples.size() != input_length()) {
    throw Error("window length " + std::to_string(samples.size()) + " does not match model input " +
                std::to_string(input_length()));
  }
  return net_.forward(nn::Tensor1D::from_signal(samples, input_scale_));
}

std::vector<std::vector<double>> LbnnModel::predict_samples_batch(
    std::span<const std::vector<double>> windows) const {
  constexpr std::size_t kChunk = 64;
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  std::vector<nn::Tensor1D> inputs;
  std::vector<const nn::Tensor1D*> ptrs;
  for (std::size_t start = 0; start < windows.size(); start += kChunk) {
    const std::size_t stop = std::min(windows.size(), start + kChunk);
    inputs.clear();
    ptrs.clear();
    for (std::size_t i = start; i < stop; ++i) {
      if (windows[i].size() != input_length()) {
        throw Error("window length " + std::to_string(windows[i].size()) +
                    " does not match model input " + std::to_string(input_length()));
      }
      inputs.push_back(nn::Tensor1D::from_signal(windows[i], input_scale_));
    }
    for (const auto& t : inputs) ptrs.push_back(&t);
    for (auto& p : net_.forward_batch(ptrs)) out.push_back(std::move(p));
  }
  return out;
}

std::vector<nn::LayerSpec> lbnn_layers(PoolVariant variant, std::size_t num_classes) {
  using nn::LayerSpec;
  const auto pool = [variant] {
    return variant == PoolVariant::avg ? LayerSpec::avgpool(2, 2) : LayerSpec::maxpool(2, 2);
  };
  return {LayerSpec::conv1d(6, 5, 2),
          pool(),
          LayerSpec::conv1d(16, 3, 2),
          pool(),
          LayerSpec::flatten(),
          LayerSpec::dense(256, nn::Activation::relu),
          LayerSpec::dense(num_classes, nn::Activation::softmax)};
}

namespace {

nn::LabeledSet to_labeled(std::span<const signal::SignalWindow> windows, double scale,
                          std::size_t length, std::size_t classes) {
  nn::LabeledSet set;
  set.inputs.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.size() != length) throw Error("all windows must have the same length");
    if (w.label < 0 || static_cast<std::size_t>(w.label) >= classes) {
      throw Error("window " + std::to_string(w.id) + " has an out-of-range label");
    }
    set.inputs.push_back(nn::Tensor1D::from_signal(w.samples, scale));
    set.labels.push_back(w.label);
  }
  return set;
}

}  // namespace

TrainedModel fit_lbnn(std::span<const signal::SignalWindow> train_windows,
                      std::span<const signal::SignalWindow> val_windows, PoolVariant variant,
                      const LbnnOptions& options, std::uint64_t seed,
                      std::vector<nn::EpochStats>* curve) {
  if (train_windows.empty()) throw Error("training set is empty");
  const std::size_t length = train_windows[0].size();
  double power = 0.0;
  for (const auto& w : train_windows) power += signal::mean_power(w.samples);
  power /= static_cast<double>(train_windows.size());
  const double scale = power > 0.0 ? 1.0 / std::sqrt(power) : 1.0;

  const auto train_set = to_labeled(train_windows, scale, length, options.num_classes);
  const auto val_set = to_labeled(val_windows, scale, length, options.num_classes);
  nn::Network net(nn::Shape{1, length}, lbnn_layers(variant, options.num_classes));
  auto result = nn::train(net, train_set, val_set, options.train, seed);
  if (curve) *curve = result.curve;

  const auto& a = options.train.adam;
  Descriptor d{variant == PoolVariant::avg ? "lbnn_avg" : "lbnn_max",
               {{"pooling", to_string(variant)},
                {"epochs", std::to_string(options.train.epochs)},
                {"batch_size", std::to_string(options.train.batch_size)},
                {"learning_rate", format_double(a.learning_rate)},
                {"decay_every", std::to_string(a.decay_every)},
                {"decay_factor", format_double(a.decay_factor)},
                {"best_epoch", std::to_string(result.best_epoch)}},
               seed};
  return std::make_shared<LbnnModel>(std::move(d), std::move(net), scale, variant);
}

// ---------------------------------------------------------------- prediction

std::vector<double> predict(const Model& model, const features::FeatureVector& input) {
  if (model.family() != Family::feature_pool) {
    throw Error("model '" + model.descriptor().name + "' expects a raw signal window");
  }
  if (input.names == model.feature_names()) return model.predict_row(input.values);
  std::vector<double> row;
  row.reserve(model.feature_names().size());
  for (const auto& n : model.feature_names()) row.push_back(input.at(n));
  return model.predict_row(row);
}

std::vector<double> predict(const Model& model, const signal::SignalWindow& input) {
  if (model.family() != Family::raw_signal) {
    throw Error("model '" + model.descriptor().name + "' expects a feature vector");
  }
  return model.predict_samples(input.samples);
}

double accuracy(const Model& model, const FeatureData& test) {
  if (test.rows.empty()) throw Error("accuracy of an empty test set");
  if (model.family() != Family::feature_pool) {
    throw Error("model '" + model.descriptor().name + "' expects raw signal windows");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.rows.size(); ++i) {
    if (static_cast<int>(argmax(model.predict_row(test.rows[i]))) == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.rows.size());
}

double accuracy(const Model& model, std::span<const signal::SignalWindow> test) {
  if (test.empty()) throw Error("accuracy of an empty test set");
  if (model.family() != Family::raw_signal) {
    throw Error("model '" + model.descriptor().name + "' expects feature vectors");
  }
  std::vector<std::vector<double>> inputs;
  inputs.reserve(test.size());
  for (const auto& w : test) inputs.push_back(w.samples);
  const auto out = model.predict_samples_batch(inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (static_cast<int>(argmax(out[i])) == test[i].label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace xsei::models
