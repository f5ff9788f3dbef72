#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace xsei::nn {

enum class LayerKind { conv1d, avgpool, maxpool, flatten, dense };
enum class Activation { none, relu, softmax };

std::string to_string(LayerKind k);
std::string to_string(Activation a);
LayerKind layer_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

/// One row of a layer table. `out` is the filter count for conv1d and the
/// unit count for dense; it is ignored by pooling and flatten.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t kernel = 1;
  std::size_t padding = 0;
  std::size_t stride = 1;
  std::size_t out = 0;
  Activation activation = Activation::none;

  static LayerSpec conv1d(std::size_t filters, std::size_t kernel, std::size_t padding,
                          Activation act = Activation::relu);
  static LayerSpec avgpool(std::size_t kernel, std::size_t stride);
  static LayerSpec maxpool(std::size_t kernel, std::size_t stride);
  static LayerSpec flatten();
  static LayerSpec dense(std::size_t units, Activation act);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Shape {
  std::size_t channels = 1;
  std::size_t length = 1;

  std::size_t size() const { return channels * length; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// channels x length grid, channel-major: element (c, t) lives at c * length + t.
struct Tensor1D {
  Shape shape;
  std::vector<double> data;

  Tensor1D() = default;
  Tensor1D(Shape s, std::vector<double> values);
  static Tensor1D from_signal(std::span<const double> samples, double scale = 1.0);
};

/// A feed-forward chain of layers with its parameters held in one flat array.
///
/// Parameter layout per layer: conv1d weights [filter][in_channel][tap] then
/// one bias per filter; dense weights [unit][input] then one bias per unit.
/// Inference is const and safe to call concurrently.
/// 64-byte aligned allocator.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedVector = std::vector<double, AlignedAllocator<double>>;

class Network {
 public:
  Network(Shape input, std::vector<LayerSpec> layers);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  Shape input_shape() const { return input_; }
  /// Output shape of every layer, in order.
  const std::vector<Shape>& shapes() const { return shapes_; }
  Shape output_shape() const { return shapes_.back(); }

  std::size_t parameter_count() const { return params_.size(); }
  std::vector<std::size_t> layer_parameter_counts() const;
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> values);

  /// He-style uniform init: weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases 0.
  void initialize(std::uint64_t seed);

  /// Output of the last layer for one input (probabilities when the chain ends in softmax).
  std::vector<double> forward(const Tensor1D& input) const;
  std::vector<std::vector<double>> forward_batch(std::span<const Tensor1D* const> inputs) const;

  /// Mean softmax cross-entropy over the batch; writes d(loss)/d(params) into `grad`.
  double loss_and_gradient(std::span<const Tensor1D* const> inputs, std::span<const int> labels,
                           std::span<double> grad) const;

 private:
  struct Workspace;
  void run_forward(std::span<const Tensor1D* const> inputs, Workspace& ws, bool keep) const;

  Shape input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::size_t> offsets_;  // first parameter of each layer
  AlignedVector params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t decay_every = 30;  // epochs; 0 disables decay
  double decay_factor = 0.1;

  void validate() const;
};

/// Adam with bias correction and step-wise learning-rate decay.
class Adam {
 public:
  Adam(AdamConfig config, std::size_t parameter_count);

  /// One update. Throws if any gradient entry is not finite.
  void step(std::span<double> params, std::span<const double> grads);
  /// Switches the learning rate to the value scheduled for `epoch` (0-based).
  void set_epoch(std::size_t epoch);

  double learning_rate() const { return lr_; }
  std::size_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  AdamConfig adam;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<double> best_parameters;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<EpochStats> curve;
  std::size_t optimizer_steps = 0;
};

struct LabeledSet {
  std::vector<Tensor1D> inputs;
  std::vector<int> labels;
};

/// Mini-batch Adam training. Initialization and batch order derive from
/// `seed`. The returned parameters are those of the epoch with the best
/// validation accuracy (earliest on ties); `net` ends up holding them.
TrainResult train(Network& net, const LabeledSet& train_set, const LabeledSet& val_set,
                  const TrainConfig& config, std::uint64_t seed);

/// Fraction of argmax-correct predictions.
double accuracy(const Network& net, const LabeledSet& set);

/// CSV `epoch,train_loss,val_acc`.
std::string loss_curve_csv(const std::vector<EpochStats>& curve);

}  // namespace xsei::nn
