#include "swprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "swprobe/error.hpp"
#include "swprobe/kernels.hpp"

namespace swprobe {

void FeatureMatrix::push(std::span<const float> values, std::int32_t label) {
  if (values.size() != row_size()) throw Error("shape", "feature row has the wrong size");
  data.insert(data.end(), values.begin(), values.end());
  labels.push_back(label);
}

ProbeModel::ProbeModel(LayerMode mode, std::uint32_t layers, std::uint32_t hidden, std::uint32_t classes,
                       std::uint32_t width)
    : mode_(mode), layers_(layers), hidden_(hidden), classes_(classes), width_(width) {
  if (hidden == 0 || classes == 0 || width == 0 || layers == 0) {
    throw Error("shape", "probe dimensions must be positive");
  }
  params_.assign(b2_offset() + classes_, 0.0);
}

void ProbeModel::initialize(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill_uniform = [&](std::span<double> w, std::uint32_t fan_in) {
    const double bound = std::sqrt(1.0 / fan_in);
    for (double& x : w) x = (2.0 * uniform01(rng) - 1.0) * bound;
  };
  fill_uniform(w1(), hidden_);
  fill_uniform(w2(), width_);
}

std::vector<double> ProbeModel::mix_weights() const {
  if (mode_ != LayerMode::Mix) return {};
  return softmax(mix_logits());
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double& v : out) z += v = std::exp(v - mx);
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> weighted_sum(std::span<const double> weights, std::span<const float> layer_vectors,
                                 std::uint32_t hidden) {
  if (hidden == 0 || layer_vectors.size() != weights.size() * hidden) {
    throw Error("shape", "layer mix expects " + std::to_string(weights.size()) + " x " +
                             std::to_string(hidden) + " values, got " + std::to_string(layer_vectors.size()));
  }
  const auto& k = kernels::active();
  std::vector<double> out(hidden, 0.0);
  for (std::size_t l = 0; l < weights.size(); ++l) {
    k.axpy_f32_f64(weights[l], layer_vectors.data() + l * hidden, out.data(), hidden);
  }
  return out;
}

std::vector<double> scalar_mix(std::span<const double> logits, std::span<const float> layer_vectors,
                               std::uint32_t hidden) {
  return weighted_sum(softmax(logits), layer_vectors, hidden);
}

namespace {

// Per-example activations kept for the backward pass.
struct Activations {
  std::vector<double> x, pre, mask, hd, logp;
};

void check_input(const ProbeModel& model, std::size_t size) {
  const std::size_t want = std::size_t(model.input_layers()) * model.hidden();
  if (size != want) {
    throw Error("shape", "probe input has " + std::to_string(size) + " values, expected " + std::to_string(want));
  }
}

void input_vector(const ProbeModel& model, std::span<const float> input, const std::vector<double>& mix_w,
                  std::vector<double>& x) {
  if (model.mode() == LayerMode::Mix) {
    x = weighted_sum(mix_w, input, model.hidden());
  } else {
    x.assign(input.begin(), input.end());
  }
}

void mlp_forward(const ProbeModel& model, Activations& a, bool training, double dropout, Rng* rng) {
  const auto& k = kernels::active();
  const std::uint32_t H = model.hidden(), M = model.width(), C = model.classes();
  const auto w1 = model.w1();
  const auto b1 = model.b1();
  const auto w2 = model.w2();
  const auto b2 = model.b2();
  a.pre.resize(M);
  a.mask.assign(M, 1.0);
  a.hd.resize(M);
  const bool drop = training && dropout > 0.0;
  if (drop && rng == nullptr) throw Error("config", "dropout in training mode needs a generator");
  const double keep_scale = drop ? 1.0 / (1.0 - dropout) : 1.0;
  for (std::uint32_t j = 0; j < M; ++j) {
    a.pre[j] = k.dot_f64(w1.data() + std::size_t(j) * H, a.x.data(), H) + b1[j];
    if (drop) a.mask[j] = uniform01(*rng) < dropout ? 0.0 : keep_scale;
    a.hd[j] = std::max(a.pre[j], 0.0) * a.mask[j];
  }
  a.logp.resize(C);
  for (std::uint32_t c = 0; c < C; ++c) a.logp[c] = k.dot_f64(w2.data() + std::size_t(c) * M, a.hd.data(), M) + b2[c];
  const double mx = *std::max_element(a.logp.begin(), a.logp.end());
  double z = 0.0;
  for (double v : a.logp) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  for (double& v : a.logp) v -= lse;
}

std::int32_t argmax(const std::vector<double>& v) {
  return static_cast<std::int32_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> forward(const ProbeModel& model, std::span<const float> input, bool training, double dropout,
                            Rng* rng) {
  check_input(model, input.size());
  Activations a;
  input_vector(model, input, model.mix_weights(), a.x);
  mlp_forward(model, a, training, dropout, rng);
  return a.logp;
}

std::vector<double> forward_vector(const ProbeModel& model, std::span<const double> x) {
  if (x.size() != model.hidden()) throw Error("shape", "probe input vector has the wrong size");
  Activations a;
  a.x.assign(x.begin(), x.end());
  mlp_forward(model, a, false, 0.0, nullptr);
  return a.logp;
}

LossAndGrads loss_and_grads(const ProbeModel& model, const FeatureMatrix& data, std::span<const std::size_t> batch,
                            double dropout, Rng* rng) {
  if (batch.empty()) throw Error("train", "empty batch");
  if (data.hidden != model.hidden() || data.layers != model.input_layers()) {
    throw Error("shape", "feature matrix does not match the probe shape");
  }
  const auto& k = kernels::active();
  const std::uint32_t H = model.hidden(), M = model.width(), C = model.classes();
  const auto w1 = model.w1();
  const auto w2 = model.w2();
  const std::vector<double> mix_w = model.mix_weights();

  LossAndGrads out;
  out.grads.assign(model.parameter_count(), 0.0);
  double* g_mix = out.grads.data();
  double* g_w1 = out.grads.data() + model.w1_offset();
  double* g_b1 = out.grads.data() + model.b1_offset();
  double* g_w2 = out.grads.data() + model.w2_offset();
  double* g_b2 = out.grads.data() + model.b2_offset();

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Activations a;
  std::vector<double> dz(C), dhd(M), dpre(M), dx(H);
  for (std::size_t idx : batch) {
    if (idx >= data.size()) throw Error("range", "batch index out of range");
    const std::int32_t y = data.labels[idx];
    if (y < 0 || static_cast<std::uint32_t>(y) >= C) {
      throw Error("label", "label " + std::to_string(y) + " outside [0," + std::to_string(C) + ")");
    }
    const auto input = data.row(idx);
    input_vector(model, input, mix_w, a.x);
    mlp_forward(model, a, true, dropout, rng);
    out.loss -= a.logp[y];
    if (argmax(a.logp) == y) ++out.correct;

    for (std::uint32_t c = 0; c < C; ++c) dz[c] = (std::exp(a.logp[c]) - (c == std::uint32_t(y) ? 1.0 : 0.0)) * inv_b;
    std::fill(dhd.begin(), dhd.end(), 0.0);
    for (std::uint32_t c = 0; c < C; ++c) {
      k.axpy_f64(dz[c], a.hd.data(), g_w2 + std::size_t(c) * M, M);
      g_b2[c] += dz[c];
      k.axpy_f64(dz[c], w2.data() + std::size_t(c) * M, dhd.data(), M);
    }
    for (std::uint32_t j = 0; j < M; ++j) {
      dpre[j] = a.pre[j] > 0.0 ? dhd[j] * a.mask[j] : 0.0;
      if (dpre[j] == 0.0) continue;
      k.axpy_f64(dpre[j], a.x.data(), g_w1 + std::size_t(j) * H, H);
      g_b1[j] += dpre[j];
    }
    if (model.mode() == LayerMode::Mix) {
      std::fill(dx.begin(), dx.end(), 0.0);
      for (std::uint32_t j = 0; j < M; ++j) {
        if (dpre[j] != 0.0) k.axpy_f64(dpre[j], w1.data() + std::size_t(j) * H, dx.data(), H);
      }
      // d/da_l of sum_k w_k g_k with w = softmax(a): w_l (g_l - sum_k w_k g_k)
      const std::uint32_t L = model.layers();
      std::vector<double> g(L);
      double mean_g = 0.0;
      for (std::uint32_t l = 0; l < L; ++l) {
        g[l] = k.dot_f32_f64(input.data() + std::size_t(l) * H, dx.data(), H);
        mean_g += mix_w[l] * g[l];
      }
      for (std::uint32_t l = 0; l < L; ++l) g_mix[l] += mix_w[l] * (g[l] - mean_g);
    }
  }
  out.loss *= inv_b;
  return out;
}

void TrainerConfig::validate() const {
  if (!(lr > 0)) throw Error("config", "learning rate must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw Error("config", "dropout must be in [0, 1)");
  if (patience < 1) throw Error("config", "patience must be at least 1");
  if (batch_size < 1) throw Error("config", "batch size must be at least 1");
  if (max_epochs < 1) throw Error("config", "max epochs must be at least 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw Error("config", "Adam betas must be in [0, 1)");
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               const TrainerConfig& config) {
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw Error("shape", "Adam state, parameters and gradients differ in size");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double m_corr = 1.0 / (1.0 - std::pow(config.beta1, t));
  const double v_corr = 1.0 / (1.0 - std::pow(config.beta2, t));
  kernels::active().adam_update(params.data(), grads.data(), state.m.data(), state.v.data(), params.size(),
                                config.lr, config.beta1, config.beta2, config.epsilon, m_corr, v_corr);
}

std::vector<std::int32_t> predict(const ProbeModel& model, const FeatureMatrix& data) {
  std::vector<std::int32_t> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(argmax(forward(model, data.row(i))));
  return out;
}

double accuracy(const std::vector<std::int32_t>& predicted, const std::vector<std::int32_t>& gold) {
  if (predicted.size() != gold.size()) throw Error("shape", "prediction and gold counts differ");
  if (gold.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

double mean_nll(const ProbeModel& model, const FeatureMatrix& data) {
  if (data.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total -= forward(model, data.row(i))[data.labels[i]];
  return total / static_cast<double>(data.size());
}

TrainResult train_classifier(const FeatureMatrix& train, const FeatureMatrix& dev, const FeatureMatrix& test,
                             LayerMode mode, std::uint32_t classes, const TrainerConfig& config,
                             const SplitMetric& metric) {
  config.validate();
  if (train.size() == 0) throw Error("train", "training split is empty");
  if (dev.size() == 0) throw Error("train", "development split is empty");
  if (mode == LayerMode::Single && train.layers != 1) {
    throw Error("shape", "single-layer mode expects one input layer per example");
  }
  for (const auto* m : {&dev, &test}) {
    if (m->hidden != train.hidden || m->layers != train.layers) throw Error("shape", "splits differ in shape");
  }
  {
    std::vector<std::int32_t> seen(train.labels);
    std::sort(seen.begin(), seen.end());
    if (std::unique(seen.begin(), seen.end()) - seen.begin() < 2) {
      throw Error("train", "training data has a single class; nothing to learn");
    }
  }

  auto score = [&](Split split, const std::vector<std::int32_t>& pred, const FeatureMatrix& gold) {
    return metric ? metric(split, pred) : accuracy(pred, gold.labels);
  };

  Rng init_rng(derive_seed(config.seed, "init"));
  Rng rng(derive_seed(config.seed, "train"));
  ProbeModel model(mode, train.layers, train.hidden, classes);
  model.initialize(init_rng);
  AdamState adam(model.parameter_count());

  TrainResult result{model, {}, 0, 0.0, 0.0, 0.0, {}};
  std::vector<double> best_params(model.parameters().begin(), model.parameters().end());
  bool have_best = false;
  std::size_t stale = 0;
  std::vector<std::size_t> order(train.size());

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::span<const std::size_t> batch(order.data() + start, n);
      auto lg = loss_and_grads(model, train, batch, config.dropout, &rng);
      loss_sum += lg.loss * static_cast<double>(n);
      correct += lg.correct;
      adam_step(adam, model.parameters(), lg.grads, config);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    const auto dev_pred = predict(model, dev);
    rec.dev_loss = mean_nll(model, dev);
    rec.dev_accuracy = accuracy(dev_pred, dev.labels);
    rec.dev_metric = score(Split::Dev, dev_pred, dev);
    result.history.push_back(rec);

    if (!have_best || rec.dev_metric > result.best_dev_metric) {
      have_best = true;
      result.best_dev_metric = rec.dev_metric;
      result.best_epoch = epoch;
      std::ranges::copy(model.parameters(), best_params.begin());
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  std::ranges::copy(best_params, model.parameters().begin());
  result.model = model;
  result.test_predictions = predict(model, test);
  result.test_accuracy = test.size() ? accuracy(result.test_predictions, test.labels) : 0.0;
  result.test_metric = test.size() ? score(Split::Test, result.test_predictions, test) : 0.0;
  return result;
}

}  // namespace swprobe
