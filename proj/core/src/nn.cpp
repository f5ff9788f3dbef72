#include "xsei/nn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "xsei/common.hpp"

namespace xsei::nn {

using Eigen::Index;
using Matrix = Eigen::MatrixXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::conv1d, LayerKind::avgpool, LayerKind::maxpool, LayerKind::flatten,
                 LayerKind::dense}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown layer kind '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
  for (auto a : {Activation::none, Activation::relu, Activation::softmax}) {
    if (to_string(a) == s) return a;
  }
  throw Error("unknown activation '" + s + "'");
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t kernel, std::size_t padding,
                            Activation act) {
  return {LayerKind::conv1d, kernel, padding, 1, filters, act};
}
LayerSpec LayerSpec::avgpool(std::size_t kernel, std::size_t stride) {
  return {LayerKind::avgpool, kernel, 0, stride, 0, Activation::none};
}
LayerSpec LayerSpec::maxpool(std::size_t kernel, std::size_t stride) {
  return {LayerKind::maxpool, kernel, 0, stride, 0, Activation::none};
}
LayerSpec LayerSpec::flatten() { return {LayerKind::flatten, 1, 0, 1, 0, Activation::none}; }
LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  return {LayerKind::dense, 1, 0, 1, units, act};
}

Tensor1D::Tensor1D(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
  if (data.size() != shape.size()) throw Error("tensor data length does not match its shape");
}

Tensor1D Tensor1D::from_signal(std::span<const double> samples, double scale) {
  std::vector<double> v(samples.begin(), samples.end());
  if (scale != 1.0) {
    for (double& x : v) x *= scale;
  }
  return Tensor1D(Shape{1, samples.size()}, std::move(v));
}

// ---------------------------------------------------------------------------

struct Network::Workspace {
  std::vector<Matrix> acts;                       // acts[l] is the input of layer l
  std::vector<std::vector<Matrix>> cols;          // im2col per conv layer, per sample
  std::vector<std::vector<std::uint32_t>> argmax;  // maxpool source index per output
};

Network::Network(Shape input, std::vector<LayerSpec> layers)
    : input_(input), layers_(std::move(layers)) {
  if (input_.channels == 0 || input_.length == 0) throw Error("network input shape is empty");
  if (layers_.empty()) throw Error("network has no layers");
  Shape cur = input_;
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& s = layers_[l];
    const std::string where = "layer " + std::to_string(l) + " (" + to_string(s.kind) + "): ";
    if (s.kernel < 1) throw Error(where + "kernel must be >= 1");
    if (s.stride < 1) throw Error(where + "stride must be >= 1");
    if (s.activation == Activation::softmax &&
        (l + 1 != layers_.size() || s.kind != LayerKind::dense)) {
      throw Error(where + "softmax is only supported on the final dense layer");
    }
    offsets_.push_back(total);
    Shape next;
    switch (s.kind) {
      case LayerKind::conv1d: {
        if (s.out == 0) throw Error(where + "needs at least one filter");
        if (cur.length + 2 * s.padding < s.kernel) {
          throw Error(where + "input length " + std::to_string(cur.length) +
                      " is shorter than the kernel");
        }
        next = {s.out, (cur.length + 2 * s.padding - s.kernel) / s.stride + 1};
        total += s.out * cur.channels * s.kernel + s.out;
        break;
      }
      case LayerKind::avgpool:
      case LayerKind::maxpool: {
        if (s.padding != 0) throw Error(where + "pooling does not support padding");
        if (cur.length < s.kernel) {
          throw Error(where + "input length " + std::to_string(cur.length) +
                      " is shorter than the kernel");
        }
        if (s.activation != Activation::none) throw Error(where + "pooling takes no activation");
        next = {cur.channels, (cur.length - s.kernel) / s.stride + 1};
        break;
      }
      case LayerKind::flatten:
        next = {1, cur.size()};
        break;
      case LayerKind::dense: {
        if (s.out == 0) throw Error(where + "needs at least one unit");
        next = {1, s.out};
        total += s.out * cur.size() + s.out;
        break;
      }
    }
    shapes_.push_back(next);
    cur = next;
  }
  params_.assign(total, 0.0);
}

std::vector<std::size_t> Network::layer_parameter_counts() const {
  std::vector<std::size_t> counts;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::size_t end = l + 1 < layers_.size() ? offsets_[l + 1] : params_.size();
    counts.push_back(end - offsets_[l]);
  }
  return counts;
}

void Network::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) {
    throw Error("parameter vector has " + std::to_string(values.size()) + " entries, network needs " +
                std::to_string(params_.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
}

void Network::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Shape cur = input_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& s = layers_[l];
    std::size_t fan_in = 0;
    std::size_t weights = 0;
    if (s.kind == LayerKind::conv1d) {
      fan_in = cur.channels * s.kernel;
      weights = s.out * fan_in;
    } else if (s.kind == LayerKind::dense) {
      fan_in = cur.size();
      weights = s.out * fan_in;
    }
    if (weights > 0) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      double* w = params_.data() + offsets_[l];
      for (std::size_t i = 0; i < weights; ++i) w[i] = dist(rng);
      std::fill_n(w + weights, s.out, 0.0);
    }
    cur = shapes_[l];
  }
}

namespace {

void softmax_columns(Matrix& y) {
  for (Index b = 0; b < y.cols(); ++b) {
    auto col = y.col(b);
    const double mx = col.maxCoeff();
    col = (col.array() - mx).exp();
    col /= col.sum();
  }
}

}  // namespace

void Network::run_forward(std::span<const Tensor1D* const> inputs, Workspace& ws, bool keep) const {
  const auto batch = static_cast<Index>(inputs.size());
  ws.acts.assign(layers_.size() + 1, Matrix());
  ws.cols.assign(layers_.size(), {});
  ws.argmax.assign(layers_.size(), {});
  Matrix& x0 = ws.acts[0];
  x0.resize(static_cast<Index>(input_.size()), batch);
  for (Index b = 0; b < batch; ++b) {
    const Tensor1D& t = *inputs[static_cast<std::size_t>(b)];
    if (t.shape != input_) {
      throw Error("layer 0 (" + to_string(layers_[0].kind) + "): input shape (" +
                  std::to_string(t.shape.channels) + ", " + std::to_string(t.shape.length) +
                  ") does not match network input (" + std::to_string(input_.channels) + ", " +
                  std::to_string(input_.length) + ")");
    }
    x0.col(b) = ConstVectorMap(t.data.data(), static_cast<Index>(t.data.size()));
  }

  Shape in_shape = input_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& s = layers_[l];
    const Shape out_shape = shapes_[l];
    const Matrix& x = ws.acts[l];
    Matrix& y = ws.acts[l + 1];
    y.resize(static_cast<Index>(out_shape.size()), batch);
    const double* p = params_.data() + offsets_[l];
    const auto C = static_cast<Index>(in_shape.channels);
    const auto L = static_cast<Index>(in_shape.length);
    const auto Lout = static_cast<Index>(out_shape.length);
    const auto k = static_cast<Index>(s.kernel);
    const auto stride = static_cast<Index>(s.stride);

    switch (s.kind) {
      case LayerKind::conv1d: {
        const auto F = static_cast<Index>(s.out);
        const auto pad = static_cast<Index>(s.padding);
        ConstMatrixMap w(p, C * k, F);
        ConstVectorMap bias(p + C * k * F, F);
        if (keep) ws.cols[l].resize(static_cast<std::size_t>(batch));
        Matrix local;
        for (Index b = 0; b < batch; ++b) {
          Matrix& cols = keep ? ws.cols[l][static_cast<std::size_t>(b)] : local;
          cols.setZero(Lout, C * k);
          const double* xb = x.col(b).data();
          for (Index c = 0; c < C; ++c) {
            for (Index j = 0; j < k; ++j) {
              double* dst = cols.col(c * k + j).data();
              for (Index t = 0; t < Lout; ++t) {
                const Index src = t * stride + j - pad;
                if (src >= 0 && src < L) dst[t] = xb[c * L + src];
              }
            }
          }
          MatrixMap out(y.col(b).data(), Lout, F);
          out.noalias() = cols * w;
          out.rowwise() += bias.transpose();
        }
        break;
      }
      case LayerKind::avgpool: {
        const double inv = 1.0 / static_cast<double>(k);
        for (Index b = 0; b < batch; ++b) {
          const double* xb = x.col(b).data();
          double* yb = y.col(b).data();
          for (Index c = 0; c < C; ++c) {
            for (Index t = 0; t < Lout; ++t) {
              double sum = 0.0;
              for (Index j = 0; j < k; ++j) sum += xb[c * L + t * stride + j];
              yb[c * Lout + t] = sum * inv;
            }
          }
        }
        break;
      }
      case LayerKind::maxpool: {
        auto& arg = ws.argmax[l];
        if (keep) arg.assign(out_shape.size() * static_cast<std::size_t>(batch), 0);
        for (Index b = 0; b < batch; ++b) {
          const double* xb = x.col(b).data();
          double* yb = y.col(b).data();
          for (Index c = 0; c < C; ++c) {
            for (Index t = 0; t < Lout; ++t) {
              Index best = c * L + t * stride;
              for (Index j = 1; j < k; ++j) {
                const Index idx = c * L + t * stride + j;
                if (xb[idx] > xb[best]) best = idx;
              }
              yb[c * Lout + t] = xb[best];
              if (keep) {
                arg[static_cast<std::size_t>(b * y.rows() + c * Lout + t)] =
                    static_cast<std::uint32_t>(best);
              }
            }
          }
        }
        break;
      }
      case LayerKind::flatten:
        y = x;
        break;
      case LayerKind::dense: {
        const auto in = static_cast<Index>(in_shape.size());
        const auto units = static_cast<Index>(s.out);
        ConstMatrixMap w(p, in, units);
        ConstVectorMap bias(p + in * units, units);
        y.noalias() = w.transpose() * x;
        y.colwise() += bias;
        break;
      }
    }
    if (s.activation == Activation::relu) {
      y = y.cwiseMax(0.0);
    } else if (s.activation == Activation::softmax) {
      softmax_columns(y);
    }
    in_shape = out_shape;
  }
}

std::vector<double> Network::forward(const Tensor1D& input) const {
  const Tensor1D* ptr = &input;
  return forward_batch(std::span<const Tensor1D* const>(&ptr, 1)).front();
}

std::vector<std::vector<double>> Network::forward_batch(
    std::span<const Tensor1D* const> inputs) const {
  Workspace ws;
  run_forward(inputs, ws, false);
  const Matrix& out = ws.acts.back();
  std::vector<std::vector<double>> result(inputs.size());
  for (Index b = 0; b < out.cols(); ++b) {
    result[static_cast<std::size_t>(b)].assign(out.col(b).data(), out.col(b).data() + out.rows());
  }
  return result;
}

double Network::loss_and_gradient(std::span<const Tensor1D* const> inputs,
                                  std::span<const int> labels, std::span<double> grad) const {
  if (inputs.size() != labels.size() || inputs.empty()) {
    throw Error("loss_and_gradient needs one label per input and a nonempty batch");
  }
  if (grad.size() != params_.size()) throw Error("gradient buffer has the wrong size");
  if (layers_.back().activation != Activation::softmax) {
    throw Error("cross-entropy training requires a final softmax layer");
  }
  Workspace ws;
  run_forward(inputs, ws, true);
  AlignedVector acc(params_.size(), 0.0);

  const auto batch = static_cast<Index>(inputs.size());
  const Matrix& probs = ws.acts.back();
  const auto classes = probs.rows();
  double loss = 0.0;
  Matrix delta = probs;  // d(loss)/d(logits) for the softmax layer
  for (Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= classes) throw Error("label " + std::to_string(y) + " outside class range");
    loss -= std::log(std::max(probs(y, b), 1e-300));
    delta(y, b) -= 1.0;
  }
  delta /= static_cast<double>(batch);
  loss /= static_cast<double>(batch);

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const LayerSpec& s = layers_[li];
    const Shape in_shape = li == 0 ? input_ : shapes_[li - 1];
    const Shape out_shape = shapes_[li];
    const Matrix& x = ws.acts[li];
    const Matrix& y = ws.acts[li + 1];
    if (s.activation == Activation::relu) {
      delta = (y.array() > 0.0).select(delta.array(), 0.0).matrix();
    }
    const bool need_input_grad = li > 0;
    Matrix dx;
    if (need_input_grad) dx.setZero(static_cast<Index>(in_shape.size()), batch);
    const double* p = params_.data() + offsets_[li];
    double* g = acc.data() + offsets_[li];
    const auto C = static_cast<Index>(in_shape.channels);
    const auto L = static_cast<Index>(in_shape.length);
    const auto Lout = static_cast<Index>(out_shape.length);
    const auto k = static_cast<Index>(s.kernel);
    const auto stride = static_cast<Index>(s.stride);

    switch (s.kind) {
      case LayerKind::conv1d: {
        const auto F = static_cast<Index>(s.out);
        const auto pad = static_cast<Index>(s.padding);
        ConstMatrixMap w(p, C * k, F);
        MatrixMap gw(g, C * k, F);
        VectorMap gb(g + C * k * F, F);
        Matrix dcols;
        for (Index b = 0; b < batch; ++b) {
          const Matrix& cols = ws.cols[li][static_cast<std::size_t>(b)];
          ConstMatrixMap dout(delta.col(b).data(), Lout, F);
          gw.noalias() += cols.transpose() * dout;
          gb += dout.colwise().sum().transpose();
          if (!need_input_grad) continue;
          dcols.noalias() = dout * w.transpose();
          double* dxb = dx.col(b).data();
          for (Index c = 0; c < C; ++c) {
            for (Index j = 0; j < k; ++j) {
              const double* src = dcols.col(c * k + j).data();
              for (Index t = 0; t < Lout; ++t) {
                const Index at = t * stride + j - pad;
                if (at >= 0 && at < L) dxb[c * L + at] += src[t];
              }
            }
          }
        }
        break;
      }
      case LayerKind::avgpool: {
        if (!need_input_grad) break;
        const double inv = 1.0 / static_cast<double>(k);
        for (Index b = 0; b < batch; ++b) {
          const double* db = delta.col(b).data();
          double* dxb = dx.col(b).data();
          for (Index c = 0; c < C; ++c) {
            for (Index t = 0; t < Lout; ++t) {
              const double v = db[c * Lout + t] * inv;
              for (Index j = 0; j < k; ++j) dxb[c * L + t * stride + j] += v;
            }
          }
        }
        break;
      }
      case LayerKind::maxpool: {
        if (!need_input_grad) break;
        const auto& arg = ws.argmax[li];
        for (Index b = 0; b < batch; ++b) {
          const double* db = delta.col(b).data();
          double* dxb = dx.col(b).data();
          for (Index o = 0; o < delta.rows(); ++o) {
            dxb[arg[static_cast<std::size_t>(b * delta.rows() + o)]] += db[o];
          }
        }
        break;
      }
      case LayerKind::flatten:
        if (need_input_grad) dx = delta;
        break;
      case LayerKind::dense: {
        const auto in = static_cast<Index>(in_shape.size());
        const auto units = static_cast<Index>(s.out);
        ConstMatrixMap w(p, in, units);
        MatrixMap gw(g, in, units);
        VectorMap gb(g + in * units, units);
        gw.noalias() += x * delta.transpose();
        gb += delta.rowwise().sum();
        if (need_input_grad) dx.noalias() = w * delta;
        break;
      }
    }
    if (need_input_grad) delta = std::move(dx);
  }
  std::copy(acc.begin(), acc.end(), grad.begin());
  return loss;
}

// ---------------------------------------------------------------------------

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error("adam learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw Error("adam beta1 must be in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw Error("adam beta2 must be in (0,1)");
  if (!(epsilon > 0.0)) throw Error("adam epsilon must be positive");
  if (!(decay_factor > 0.0)) throw Error("learning-rate decay factor must be positive");
}

Adam::Adam(AdamConfig config, std::size_t parameter_count)
    : config_(config), lr_(config.learning_rate), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  config_.validate();
}

void Adam::set_epoch(std::size_t epoch) {
  const std::size_t periods = config_.decay_every == 0 ? 0 : epoch / config_.decay_every;
  lr_ = config_.learning_rate * std::pow(config_.decay_factor, static_cast<double>(periods));
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error("adam: parameter and gradient sizes differ from the optimizer state");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error("adam: gradient entry " + std::to_string(i) + " is not finite");
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2_sqrt = std::sqrt(1.0 - std::pow(b2, static_cast<double>(t_)));
  const double step = lr_ / bc1;
  const double eps = config_.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) / bc2_sqrt + eps);
  }
}

// ---------------------------------------------------------------------------

double accuracy(const Network& net, const LabeledSet& set) {
  if (set.inputs.empty()) throw Error("accuracy of an empty set");
  constexpr std::size_t kChunk = 64;
  std::size_t correct = 0;
  std::vector<const Tensor1D*> ptrs;
  for (std::size_t start = 0; start < set.inputs.size(); start += kChunk) {
    const std::size_t stop = std::min(set.inputs.size(), start + kChunk);
    ptrs.clear();
    for (std::size_t i = start; i < stop; ++i) ptrs.push_back(&set.inputs[i]);
    const auto out = net.forward_batch(ptrs);
    for (std::size_t i = start; i < stop; ++i) {
      if (static_cast<int>(argmax(out[i - start])) == set.labels[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(set.inputs.size());
}

TrainResult train(Network& net, const LabeledSet& train_set, const LabeledSet& val_set,
                  const TrainConfig& config, std::uint64_t seed) {
  if (train_set.inputs.size() != train_set.labels.size() ||
      val_set.inputs.size() != val_set.labels.size()) {
    throw Error("training sets need one label per input");
  }
  if (config.batch_size == 0) throw Error("batch size must be >= 1");
  std::vector<int> classes = train_set.labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw Error("training split must contain at least two classes");

  net.initialize(derive_seed(seed, "init"));
  std::mt19937_64 order_rng(derive_seed(seed, "batch-order"));
  Adam adam(config.adam, net.parameter_count());
  std::vector<double> grad(net.parameter_count(), 0.0);
  std::vector<std::size_t> order(train_set.inputs.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best_parameters.assign(net.parameters().begin(), net.parameters().end());
  double best = -1.0;
  std::vector<const Tensor1D*> batch_inputs;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    adam.set_epoch(epoch);
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_inputs.push_back(&train_set.inputs[order[i]]);
        batch_labels.push_back(train_set.labels[order[i]]);
      }
      const double loss = net.loss_and_gradient(batch_inputs, batch_labels, grad);
      if (!std::isfinite(loss)) {
        throw Error("training diverged: loss is not finite at epoch " + std::to_string(epoch));
      }
      adam.step(net.parameters(), grad);
      loss_sum += loss * static_cast<double>(stop - start);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_accuracy = val_set.inputs.empty() ? 0.0 : accuracy(net, val_set);
    result.curve.push_back(stats);
    // Without a validation split the last epoch wins.
    if (val_set.inputs.empty() || stats.val_accuracy > best) {
      best = stats.val_accuracy;
      result.best_epoch = epoch;
      result.best_val_accuracy = stats.val_accuracy;
      result.best_parameters.assign(net.parameters().begin(), net.parameters().end());
    }
  }
  result.optimizer_steps = adam.step_count();
  net.set_parameters(result.best_parameters);
  return result;
}

std::string loss_curve_csv(const std::vector<EpochStats>& curve) {
  std::string out = "epoch,train_loss,val_acc\n";
  for (const auto& e : curve) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
           format_double(e.val_accuracy) + "\n";
  }
  return out;
}

}  // namespace xsei::nn
