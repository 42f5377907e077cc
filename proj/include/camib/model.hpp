#ifndef CAMIB_MODEL_HPP
#define CAMIB_MODEL_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "camib/autograd.hpp"
#include "camib/heads.hpp"
#include "camib/intervention.hpp"
#include "camib/rng.hpp"
#include "camib/synthetic.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Shape contract of the assembled model: per-modality bottleneck encoders
// into a shared width d (each with its own small predictive map), an
// attention-based instrument over all tokens, a fused mask-split
// representation, and one shared task head that scores both the causal and
// the shortcut pathway.
struct ModelArch {
  std::size_t modalities = 3;
  std::size_t seq_len = 4;
  std::size_t input_dim = 16;
  std::size_t d = 32;
  TaskKind task_kind = TaskKind::classification;
  std::size_t num_classes = 2;  // classification only

  std::size_t head_width() const {
    return task_kind == TaskKind::classification ? num_classes : 1;
  }
  void validate() const;
};

ModelArch arch_for(const BiasSpec& data_spec, std::size_t d);

// Parameter names: vib{m}.{W1,b1,Wmu,bmu,Wlv,blv,Wh,bh}, attn.{Wq,Wk,Wv},
// fuse.{W,b}, mask.{W1,b1,W2,b2}, head.{W,b}. The per-modality Wh/bh pair is
// the bottleneck's own predictive map; the task head serves the fused
// representation.
struct Model {
  ModelArch arch;
  ParameterSet params;
};

// Gaussian init with scale 1/sqrt(fan_in) for weights, zero biases except
// the log-variance bias, which starts at -2 so early latent noise does not
// drown the signal. The draw order is fixed, so equal seeds give
// bit-identical models.
Model init_model(const ModelArch& arch, RngStream& rng);

// Independent toggles that remove individual training signals.
struct AblationFlags {
  bool no_iv = false;     // drop the instrument alignment term
  bool no_unif = false;   // drop the shortcut uniformity term
  bool kl_to_mse = false; // uniformity as MSE toward the uninformative output
  bool no_intv = false;   // lambda2 forced to zero, recombination skipped
  bool no_ib = false;     // z = mu deterministic, bottleneck term dropped
};

// A minibatch: per-modality token features with rows sample-major, exactly
// like ModalitySplit but restricted to selected samples.
struct Batch {
  std::vector<Tensor> features;
  Labels labels;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
};

Batch slice_batch(const ModalitySplit& split, const std::vector<std::size_t>& sample_idx);

// Per-step knobs consumed by the training objective.
struct StepOptions {
  double lambda1 = 0.2;
  double lambda2 = 0.3;
  double beta = 1e-4;
  std::size_t mc_samples = 1;
  double dropout_rate = 0.1;
  std::size_t k_shortcuts = 4;
  double prior_std = 1.0;  // regression uniformity prior scale
  AblationFlags ablation;
};

struct StepLoss {
  Var total;
  LossBreakdown breakdown;
};

// One full training objective on a tape. All stochastic pieces (bottleneck
// noise, dropout masks, recombination partners) are drawn from `rng` in a
// fixed order, so re-running with an equally seeded stream rebuilds the
// identical objective — that is what makes finite differences and byte-equal
// repeat runs possible.
StepLoss training_loss(Tape& t, const Model& model, const ParamVars& vars, const Batch& batch,
                       const StepOptions& opts, RngStream& rng);

// Inference uses the causal pathway only: deterministic encodings (z = mu),
// fuse, mask, take the causal half, pool, task head. The shortcut half never
// influences predictions.
std::vector<double> predict(const Model& model, const std::vector<Tensor>& features,
                            std::size_t batch);
std::vector<double> predict(const Model& model, const ModalitySplit& split);

// Mean causal-mask activation per feature, averaged over a split's tokens —
// a diagnostic for how much of the representation the mask keeps.
Tensor mean_causal_mask(const Model& model, const ModalitySplit& split);

// Binary container: one JSON header line (arch + parameter manifest), then
// each parameter's doubles in manifest order, little-endian.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace camib

#endif  // CAMIB_MODEL_HPP
