#include "camib/attention.hpp"

#include <cmath>
#include <string>

#include "camib/errors.hpp"

namespace camib {

namespace {

void check_projections(std::size_t d, const Tensor& Wq, const Tensor& Wk, const Tensor& Wv) {
  for (const Tensor* W : {&Wq, &Wk, &Wv}) {
    check_rank2(*W, "attention");
    if (W->extent(0) != d || W->extent(1) != d)
      throw ArgumentError("attention projections must be " + std::to_string(d) + "x" +
                          std::to_string(d) + ", got " + Tensor::shape_string(W->shape()));
  }
}

void check_token_count(const Tensor& rows, std::size_t modalities, std::size_t seq_len,
                       const char* who) {
  if (modalities == 0 || seq_len == 0)
    throw ArgumentError(std::string(who) + ": modality and position counts must be positive");
  if (rows.extent(0) != modalities * seq_len)
    throw ArgumentError(std::string(who) + ": " + std::to_string(rows.extent(0)) +
                        " rows for " + std::to_string(modalities) + " modalities x " +
                        std::to_string(seq_len) + " positions");
}

}  // namespace

Tensor attention_scores(const Tensor& z_flat, const AttentionParams& params) {
  check_rank2(z_flat, "attention_scores");
  const std::size_t d = z_flat.extent(1);
  check_projections(d, params.Wq, params.Wk, params.Wv);
  Tensor q = matmul_nn(z_flat, params.Wq);
  Tensor k = matmul_nn(z_flat, params.Wk);
  Tensor s = matmul_nt(q, k);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= inv_sqrt_d;
  return s;
}

Var attention_scores(Tape& t, Var z_flat, const AttentionVars& params) {
  check_rank2(z_flat.value(), "attention_scores");
  const std::size_t d = z_flat.value().extent(1);
  check_projections(d, params.Wq.value(), params.Wk.value(), params.Wv.value());
  Var q = t.matmul(z_flat, params.Wq);
  Var k = t.matmul(z_flat, params.Wk);
  return t.scale(t.matmul(q, t.transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
}

AttentionTrace attention_trace(const Tensor& z_flat, const AttentionParams& params) {
  AttentionTrace trace;
  trace.scores = attention_scores(z_flat, params);
  trace.weights = softmax_rows(trace.scores);
  trace.values = matmul_nn(z_flat, params.Wv);
  trace.attended = matmul_nn(trace.weights, trace.values);
  return trace;
}

Tensor aggregate_instrument(const Tensor& attended, std::size_t modalities, std::size_t seq_len,
                            bool mean_over_modalities) {
  check_rank2(attended, "aggregate_instrument");
  check_token_count(attended, modalities, seq_len, "aggregate_instrument");
  const std::size_t d = attended.extent(1);
  Tensor v({seq_len, d});
  for (std::size_t m = 0; m < modalities; ++m)
    for (std::size_t t = 0; t < seq_len; ++t)
      for (std::size_t j = 0; j < d; ++j) v.at2(t, j) += attended.at2(m * seq_len + t, j);
  if (mean_over_modalities) {
    const double inv = 1.0 / static_cast<double>(modalities);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= inv;
  }
  return v;
}

Var aggregate_instrument(Tape& t, Var attended, std::size_t modalities, std::size_t seq_len,
                         bool mean_over_modalities) {
  check_token_count(attended.value(), modalities, seq_len, "aggregate_instrument");
  Var acc = t.slice_rows(attended, 0, seq_len);
  for (std::size_t m = 1; m < modalities; ++m)
    acc = t.add(acc, t.slice_rows(attended, m * seq_len, (m + 1) * seq_len));
  if (mean_over_modalities) acc = t.scale(acc, 1.0 / static_cast<double>(modalities));
  return acc;
}

Tensor instrument(const Tensor& z_flat, const AttentionParams& params, std::size_t modalities,
                  std::size_t seq_len, bool mean_over_modalities) {
  check_token_count(z_flat, modalities, seq_len, "instrument");
  AttentionTrace trace = attention_trace(z_flat, params);
  return aggregate_instrument(trace.attended, modalities, seq_len, mean_over_modalities);
}

Var instrument(Tape& t, Var z_flat, const AttentionVars& params, std::size_t modalities,
               std::size_t seq_len, bool mean_over_modalities) {
  check_token_count(z_flat.value(), modalities, seq_len, "instrument");
  Var s = attention_scores(t, z_flat, params);
  Var alpha = t.softmax_rows(s);
  Var values = t.matmul(z_flat, params.Wv);
  Var attended = t.matmul(alpha, values);
  return aggregate_instrument(t, attended, modalities, seq_len, mean_over_modalities);
}

}  // namespace camib
