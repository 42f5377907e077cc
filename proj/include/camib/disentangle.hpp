#ifndef CAMIB_DISENTANGLE_HPP
#define CAMIB_DISENTANGLE_HPP

#include <cstddef>
#include <vector>

#include "camib/autograd.hpp"
#include "camib/heads.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Fusion of the per-modality latents: tanh(Concat(z_1..z_M) W + b) per token.
// W: (M*d) x d, b: d.
struct FusionParams {
  Tensor W, b;
};

struct FusionVars {
  Var W, b;
};

// Two-layer mask network: sigmoid(tanh(z_m W1 + b1) W2 + b2), elementwise over
// every latent coordinate of every token.
struct MaskParams {
  Tensor W1, b1, W2, b2;
};

struct MaskVars {
  Var W1, b1, W2, b2;
};

Tensor fuse(const std::vector<Tensor>& z_list, const FusionParams& params);
Var fuse(Tape& t, const std::vector<Var>& z_list, const FusionVars& params);

Tensor mask_probabilities(const Tensor& z_m, const MaskParams& params);
Var mask_probabilities(Tape& t, Var z_m, const MaskVars& params);

// Complementary decomposition z_c = m_c * z_m, z_s = (1 - m_c) * z_m.
struct SplitTensors {
  Tensor z_c, z_s;
};

struct SplitVars {
  Var z_c, z_s;
};

Tensor shortcut_mask(const Tensor& m_c);
SplitTensors split(const Tensor& z_m, const Tensor& m_c);
SplitVars split(Tape& t, Var z_m, Var m_c);

// Mean over all elements of (z_c - v)^2; ties the causal part to the
// instrumental variable.
double iv_alignment_loss_value(const Tensor& z_c, const Tensor& v);
Var iv_alignment_loss(Tape& t, Var z_c, Var v);

// Push shortcut-based predictions toward an uninformative prior. For
// classification this is the batch-mean KL from the predicted distribution to
// the uniform distribution over K classes; for regression it is the KL from
// N(yhat, 1) to N(0, prior_std^2) in closed form:
// ln s - 1/2 + (1 + yhat^2) / (2 s^2).
double uniformity_loss_value(const Tensor& scores, TaskKind kind, std::size_t num_classes,
                             double prior_std);
Var uniformity_loss(Tape& t, Var scores, TaskKind kind, std::size_t num_classes,
                    double prior_std);

}  // namespace camib

#endif  // CAMIB_DISENTANGLE_HPP
