#ifndef CAMIB_TRAIN_HPP
#define CAMIB_TRAIN_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "camib/intervention.hpp"
#include "camib/metrics.hpp"
#include "camib/model.hpp"
#include "camib/synthetic.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Desk-scale defaults; the published full-scale setting is available as a
// separate profile below.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double warmup_fraction = 0.1;  // linear ramp over this share of all steps
  double dropout_rate = 0.1;
  std::size_t d = 32;
  double lambda1 = 0.2;
  double lambda2 = 0.3;
  double beta = 1e-4;
  std::size_t k_shortcuts = 4;
  std::uint64_t seed = 1;
  std::size_t mc_samples = 1;
  double weight_decay = 0.01;
  double prior_std = 1.0;
  AblationFlags ablation;

  void validate() const;  // throws ConfigError
  StepOptions step_options() const;
};

// Hyperparameters tuned for full-scale encoders: batch 8, 30 epochs,
// lr 1e-5, dropout 0.5, d 512, lambda1 0.2, lambda2 0.3, beta 1e-4.
TrainConfig full_scale_profile();

// Decoupled-weight-decay Adam. Moments are kept per parameter tensor; the
// decay term is applied directly to the weights, not through the gradient.
struct AdamW {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  std::size_t step_count = 0;
  GradientMap m, v;

  void update(ParameterSet& params, const GradientMap& grads, double lr);
};

// 1-based schedule: lr * t / warm_steps while t <= warm_steps, constant
// afterwards. warm_steps = floor(warmup_fraction * total_steps).
double learning_rate_at(const TrainConfig& cfg, std::size_t step, std::size_t total_steps);

struct TrainedModel {
  Model model;
  TrainConfig config;
  std::vector<LossBreakdown> history;  // one entry per optimizer step
};

// Minibatch training with hierarchical seeding: "init" for parameters,
// "order" for epoch shuffles, "noise" (split again per step) for bottleneck
// noise, dropout masks, and recombination partners. Identical config and
// seed therefore reproduce the loss history bit for bit. A non-finite loss
// aborts with the failing step index.
TrainedModel train(const TrainConfig& cfg, const SyntheticDataset& data);

// Metrics on one split, predictions taken from the causal pathway.
MetricsReport evaluate(const Model& model, const ModalitySplit& split);

}  // namespace camib

#endif  // CAMIB_TRAIN_HPP
