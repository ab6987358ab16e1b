#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swprobe/rng.hpp"

namespace swprobe {

enum class LayerMode { Single, Mix };

// Pooled input vectors, one example per row. In mix mode a row holds
// `layers` consecutive vectors of size `hidden`; in single-layer mode layers == 1.
struct FeatureMatrix {
  std::uint32_t layers = 1;
  std::uint32_t hidden = 0;
  std::vector<float> data;
  std::vector<std::int32_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t row_size() const { return std::size_t(layers) * hidden; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * row_size(), row_size()}; }
  void push(std::span<const float> values, std::int32_t label);
};

// Learned layer mix (mix mode only) followed by a one-hidden-layer ReLU MLP.
// All parameters live in one flat buffer:
//   [mix logits (layers, mix mode only)] [W1 width x hidden] [b1 width]
//   [W2 classes x width] [b2 classes]
class ProbeModel {
 public:
  static constexpr std::uint32_t kDefaultWidth = 50;

  ProbeModel(LayerMode mode, std::uint32_t layers, std::uint32_t hidden, std::uint32_t classes,
             std::uint32_t width = kDefaultWidth);

  // Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)); biases and mix logits zero.
  void initialize(Rng& rng);

  LayerMode mode() const { return mode_; }
  std::uint32_t layers() const { return layers_; }
  std::uint32_t hidden() const { return hidden_; }
  std::uint32_t classes() const { return classes_; }
  std::uint32_t width() const { return width_; }
  // Input layers per example: `layers` in mix mode, 1 otherwise.
  std::uint32_t input_layers() const { return mode_ == LayerMode::Mix ? layers_ : 1; }

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<const double> mix_logits() const { return slice(0, mix_size()); }
  std::span<double> mix_logits() { return slice(0, mix_size()); }
  std::span<const double> w1() const { return slice(w1_offset(), std::size_t(width_) * hidden_); }
  std::span<double> w1() { return slice(w1_offset(), std::size_t(width_) * hidden_); }
  std::span<const double> b1() const { return slice(b1_offset(), width_); }
  std::span<double> b1() { return slice(b1_offset(), width_); }
  std::span<const double> w2() const { return slice(w2_offset(), std::size_t(classes_) * width_); }
  std::span<double> w2() { return slice(w2_offset(), std::size_t(classes_) * width_); }
  std::span<const double> b2() const { return slice(b2_offset(), classes_); }
  std::span<double> b2() { return slice(b2_offset(), classes_); }

  // softmax(mix logits); empty in single-layer mode.
  std::vector<double> mix_weights() const;

  std::size_t mix_size() const { return mode_ == LayerMode::Mix ? layers_ : 0; }
  std::size_t w1_offset() const { return mix_size(); }
  std::size_t b1_offset() const { return w1_offset() + std::size_t(width_) * hidden_; }
  std::size_t w2_offset() const { return b1_offset() + width_; }
  std::size_t b2_offset() const { return w2_offset() + std::size_t(classes_) * width_; }

 private:
  std::span<double> slice(std::size_t off, std::size_t n) { return {params_.data() + off, n}; }
  std::span<const double> slice(std::size_t off, std::size_t n) const { return {params_.data() + off, n}; }

  LayerMode mode_;
  std::uint32_t layers_, hidden_, classes_, width_;
  std::vector<double> params_;
};

std::vector<double> softmax(std::span<const double> logits);

// Convex combination of `layers` stacked vectors with softmax(logits) weights.
std::vector<double> scalar_mix(std::span<const double> logits, std::span<const float> layer_vectors,
                               std::uint32_t hidden);
// Same combination with explicit weights (no normalization).
std::vector<double> weighted_sum(std::span<const double> weights, std::span<const float> layer_vectors,
                                 std::uint32_t hidden);

// Class log-probabilities. With training set and dropout > 0, hidden
// activations are dropped with inverted scaling using `rng`.
std::vector<double> forward(const ProbeModel& model, std::span<const float> input, bool training = false,
                            double dropout = 0.0, Rng* rng = nullptr);
// MLP only, on an already mixed/selected input vector.
std::vector<double> forward_vector(const ProbeModel& model, std::span<const double> x);

struct LossAndGrads {
  double loss = 0;
  std::vector<double> grads;  // same layout as ProbeModel::parameters()
  std::size_t correct = 0;    // argmax hits under the training-mode forward
};

// Mean negative log-likelihood over `batch` (row indices into `data`) and its
// gradient. Dropout masks are drawn from `rng` in batch order when dropout > 0.
LossAndGrads loss_and_grads(const ProbeModel& model, const FeatureMatrix& data,
                            std::span<const std::size_t> batch, double dropout, Rng* rng);

struct TrainerConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dropout = 0.2;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const TrainerConfig& config);

std::vector<std::int32_t> predict(const ProbeModel& model, const FeatureMatrix& data);
double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& gold);
double mean_nll(const ProbeModel& model, const FeatureMatrix& data);

enum class Split { Train, Dev, Test };
// Scores predictions on a split; higher is better. Defaults to accuracy.
using SplitMetric = std::function<double(Split, const std::vector<std::int32_t>& predicted)>;

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0, train_accuracy = 0;
  double dev_loss = 0, dev_accuracy = 0, dev_metric = 0;
};

struct TrainResult {
  ProbeModel model;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_metric = 0;
  double test_accuracy = 0;
  double test_metric = 0;
  std::vector<std::int32_t> test_predictions;
};

// Minibatch Adam with per-epoch dev evaluation. Keeps the snapshot with the
// highest dev metric (earliest on ties) and stops after `patience` epochs
// without improvement. Deterministic given config.seed.
TrainResult train_classifier(const FeatureMatrix& train, const FeatureMatrix& dev, const FeatureMatrix& test,
                             LayerMode mode, std::uint32_t classes, const TrainerConfig& config,
                             const SplitMetric& metric = {});

}  // namespace swprobe
