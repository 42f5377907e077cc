#ifndef CAMIB_ATTENTION_HPP
#define CAMIB_ATTENTION_HPP

#include <cstddef>

#include "camib/autograd.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Single-head self-attention projections over d-dimensional tokens. No output
// projection, no layer norm, no positional encoding.
struct AttentionParams {
  Tensor Wq, Wk, Wv;
};

struct AttentionVars {
  Var Wq, Wk, Wv;
};

// Intermediate products for one sample's token stack (rows are tokens in
// modality-major order: token i = m * L + t).
struct AttentionTrace {
  Tensor scores;    // (M*L) x (M*L), s_ij = q_i . k_j / sqrt(d)
  Tensor weights;   // softmax over each score row
  Tensor values;    // (M*L) x d, v_j = z_j Wv
  Tensor attended;  // (M*L) x d, row i = sum_j weights_ij v_j
};

Tensor attention_scores(const Tensor& z_flat, const AttentionParams& params);
Var attention_scores(Tape& t, Var z_flat, const AttentionVars& params);

AttentionTrace attention_trace(const Tensor& z_flat, const AttentionParams& params);

// Collapse the modality axis: V[t] = sum_m attended[m*L + t] (or the mean over
// modalities when mean_over_modalities is set).
Tensor aggregate_instrument(const Tensor& attended, std::size_t modalities, std::size_t seq_len,
                            bool mean_over_modalities);
Var aggregate_instrument(Tape& t, Var attended, std::size_t modalities, std::size_t seq_len,
                         bool mean_over_modalities);

// Full pipeline for one sample: scores -> row softmax -> attended values ->
// modality aggregation. Returns L x d.
Tensor instrument(const Tensor& z_flat, const AttentionParams& params, std::size_t modalities,
                  std::size_t seq_len, bool mean_over_modalities);
Var instrument(Tape& t, Var z_flat, const AttentionVars& params, std::size_t modalities,
               std::size_t seq_len, bool mean_over_modalities);

}  // namespace camib

#endif  // CAMIB_ATTENTION_HPP
