#include "camib/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "camib/errors.hpp"
#include "camib/heads.hpp"
#include "camib/rng.hpp"

namespace camib {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
    throw ConfigError("warmup_fraction must lie in [0, 1]");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must lie in [0, 1)");
  if (d == 0) throw ConfigError("representation width d must be positive");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("loss weights must be non-negative");
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (k_shortcuts == 0) throw ConfigError("k_shortcuts must be positive");
  if (mc_samples == 0) throw ConfigError("mc_samples must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(prior_std > 0.0)) throw ConfigError("prior_std must be positive");
}

StepOptions TrainConfig::step_options() const {
  StepOptions opts;
  opts.lambda1 = lambda1;
  opts.lambda2 = lambda2;
  opts.beta = beta;
  opts.mc_samples = mc_samples;
  opts.dropout_rate = dropout_rate;
  opts.k_shortcuts = k_shortcuts;
  opts.prior_std = prior_std;
  opts.ablation = ablation;
  return opts;
}

TrainConfig full_scale_profile() {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-5;
  cfg.dropout_rate = 0.5;
  cfg.d = 512;
  cfg.lambda1 = 0.2;
  cfg.lambda2 = 0.3;
  cfg.beta = 1e-4;
  return cfg;
}

void AdamW::update(ParameterSet& params, const GradientMap& grads, double lr) {
  ++step_count;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  for (auto& [name, theta] : params) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw ArgumentError("AdamW: missing gradient for '" + name + "'");
    const Tensor& g = it->second;
    if (!g.same_shape(theta)) throw ArgumentError("AdamW: gradient shape mismatch for '" + name + "'");
    Tensor& m_t = m.try_emplace(name, Tensor(theta.shape())).first->second;
    Tensor& v_t = v.try_emplace(name, Tensor(theta.shape())).first->second;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m_t[i] = beta1 * m_t[i] + (1.0 - beta1) * g[i];
      v_t[i] = beta2 * v_t[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = m_t[i] / bc1;
      const double v_hat = v_t[i] / bc2;
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + epsilon) + weight_decay * theta[i]);
    }
  }
}

double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps) {
  if (step == 0 || step > total_steps)
    throw ArgumentError("learning_rate_at: step index is 1-based and bounded by total_steps");
  const auto warm_steps = static_cast<std::size_t>(
      cfg.warmup_fraction * static_cast<double>(total_steps));
  if (warm_steps == 0 || step >= warm_steps) return cfg.learning_rate;
  return cfg.learning_rate * static_cast<double>(step) / static_cast<double>(warm_steps);
}

TrainedModel train(const TrainConfig& cfg, const SyntheticDataset& data) {
  cfg.validate();
  if (data.train.batch == 0) throw ArgumentError("train: the training split is empty");

  RngStream master(cfg.seed);
  RngStream init_rng = master.split("init");
  RngStream order_rng = master.split("order");
  RngStream noise_root = master.split("noise");

  TrainedModel out;
  out.config = cfg;
  out.model = init_model(arch_for(data.spec, cfg.d), init_rng);

  const std::size_t n = data.train.batch;
  const std::size_t batches_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * batches_per_epoch;
  const StepOptions opts = cfg.step_options();

  AdamW optimizer;
  optimizer.weight_decay = cfg.weight_decay;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      ++step;
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, n);
      const std::vector<std::size_t> sample_idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                                order.begin() + static_cast<std::ptrdiff_t>(end));
      Batch batch = slice_batch(data.train, sample_idx);
      RngStream step_rng = noise_root.split(step);
      try {
        Tape tape;
        ParamVars vars;
        for (const auto& [name, tensor] : out.model.params)
          vars.vars.emplace(name, tape.leaf(tensor));
        StepLoss loss = training_loss(tape, out.model, vars, batch, opts, step_rng);
        tape.backward(loss.total);
        GradientMap grads;
        for (const auto& [name, var] : vars.vars)
          grads.emplace(name, tape.grad_of(var));
        optimizer.update(out.model.params, grads, learning_rate_at(cfg, step, total_steps));
        out.history.push_back(loss.breakdown);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at step " + std::to_string(step) + ": " +
                           e.what());
      }
    }
  }
  return out;
}

MetricsReport evaluate(const Model& model, const ModalitySplit& split) {
  if (split.batch == 0) throw ArgumentError("evaluate: empty split");
  const std::vector<double> raw = predict(model, split);
  if (model.arch.task_kind == TaskKind::classification) {
    std::vector<std::size_t> preds(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      preds[i] = static_cast<std::size_t>(raw[i]);
    return classification_metrics(preds, split.labels.classes, model.arch.num_classes);
  }
  return regression_metrics(raw, split.labels.values);
}

}  // namespace camib
