#include "camib/disentangle.hpp"

#include <cmath>
#include <string>

#include "camib/errors.hpp"

namespace camib {

namespace {

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  Tensor s = matmul_nn(x, W);
  const std::size_t n = s.extent(0), m = s.extent(1);
  if (b.size() != m) throw ArgumentError("affine bias width mismatch");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) s.at2(i, j) += b[j];
  return s;
}

}  // namespace

Tensor fuse(const std::vector<Tensor>& z_list, const FusionParams& params) {
  if (z_list.empty()) throw ArgumentError("fuse: no modalities");
  const std::size_t n = z_list[0].extent(0), d = z_list[0].extent(1);
  for (const Tensor& z : z_list) {
    check_rank2(z, "fuse");
    if (z.extent(0) != n || z.extent(1) != d)
      throw ArgumentError("fuse: modality latents must share one shape");
  }
  const std::size_t md = z_list.size() * d;
  if (params.W.extent(0) != md)
    throw ArgumentError("fuse: weight expects " + std::to_string(params.W.extent(0)) +
                        " inputs, concatenation has " + std::to_string(md));
  Tensor cat({n, md});
  for (std::size_t m = 0; m < z_list.size(); ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) cat.at2(i, m * d + j) = z_list[m].at2(i, j);
  Tensor out = affine(cat, params.W, params.b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

Var fuse(Tape& t, const std::vector<Var>& z_list, const FusionVars& params) {
  if (z_list.empty()) throw ArgumentError("fuse: no modalities");
  Var cat = t.concat_cols(z_list);
  if (params.W.value().extent(0) != cat.value().extent(1))
    throw ArgumentError("fuse: weight width does not match concatenated latents");
  return t.tanh(t.add_row_broadcast(t.matmul(cat, params.W), params.b));
}

Tensor mask_probabilities(const Tensor& z_m, const MaskParams& params) {
  Tensor h = affine(z_m, params.W1, params.b1);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
  Tensor p = affine(h, params.W2, params.b2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p[i];
    p[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return p;
}

Var mask_probabilities(Tape& t, Var z_m, const MaskVars& params) {
  Var h = t.tanh(t.add_row_broadcast(t.matmul(z_m, params.W1), params.b1));
  return t.sigmoid(t.add_row_broadcast(t.matmul(h, params.W2), params.b2));
}

Tensor shortcut_mask(const Tensor& m_c) {
  Tensor m_s = m_c;
  for (std::size_t i = 0; i < m_s.size(); ++i) m_s[i] = 1.0 - m_s[i];
  return m_s;
}

SplitTensors split(const Tensor& z_m, const Tensor& m_c) {
  if (!z_m.same_shape(m_c)) throw ArgumentError("split: mask shape mismatch");
  SplitTensors out;
  out.z_c = z_m;
  out.z_s = z_m;
  for (std::size_t i = 0; i < z_m.size(); ++i) {
    out.z_c[i] = m_c[i] * z_m[i];
    out.z_s[i] = (1.0 - m_c[i]) * z_m[i];
  }
  return out;
}

SplitVars split(Tape& t, Var z_m, Var m_c) {
  if (!z_m.value().same_shape(m_c.value()))
    throw ArgumentError("split: mask shape mismatch");
  SplitVars out;
  out.z_c = t.mul(m_c, z_m);
  Var m_s = t.add_const(t.scale(m_c, -1.0), 1.0);
  out.z_s = t.mul(m_s, z_m);
  return out;
}

double iv_alignment_loss_value(const Tensor& z_c, const Tensor& v) {
  if (!z_c.same_shape(v)) throw ArgumentError("alignment: shape mismatch");
  if (z_c.size() == 0) throw ArgumentError("alignment: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < z_c.size(); ++i) {
    const double r = z_c[i] - v[i];
    acc += r * r;
  }
  return acc / static_cast<double>(z_c.size());
}

Var iv_alignment_loss(Tape& t, Var z_c, Var v) {
  if (!z_c.value().same_shape(v.value())) throw ArgumentError("alignment: shape mismatch");
  return t.mean(t.square(t.sub(z_c, v)));
}

double uniformity_loss_value(const Tensor& scores, TaskKind kind, std::size_t num_classes,
                             double prior_std) {
  const std::size_t n = scores.extent(0);
  if (n == 0) throw ArgumentError("uniformity: empty batch");
  if (kind == TaskKind::classification) {
    if (num_classes < 2) throw ArgumentError("uniformity: need at least 2 classes");
    if (scores.extent(1) != num_classes)
      throw ArgumentError("uniformity: score width does not match class count");
    Tensor logp = log_softmax_rows(scores);
    double acc = 0.0;
    for (std::size_t i = 0; i < logp.size(); ++i) acc += std::exp(logp[i]) * logp[i];
    return acc / static_cast<double>(n) + std::log(static_cast<double>(num_classes));
  }
  if (!(prior_std > 0.0)) throw ArgumentError("uniformity: prior spread must be positive");
  if (scores.extent(1) != 1) throw ArgumentError("uniformity: regression needs 1 output column");
  double mean_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_sq += scores[i] * scores[i];
  mean_sq /= static_cast<double>(n);
  const double s2 = prior_std * prior_std;
  return std::log(prior_std) - 0.5 + (1.0 + mean_sq) / (2.0 * s2);
}

Var uniformity_loss(Tape& t, Var scores, TaskKind kind, std::size_t num_classes,
                    double prior_std) {
  const std::size_t n = scores.value().extent(0);
  if (n == 0) throw ArgumentError("uniformity: empty batch");
  if (kind == TaskKind::classification) {
    if (num_classes < 2) throw ArgumentError("uniformity: need at least 2 classes");
    if (scores.value().extent(1) != num_classes)
      throw ArgumentError("uniformity: score width does not match class count");
    Var logp = t.log_softmax_rows(scores);
    Var p = t.softmax_rows(scores);
    Var neg_entropy = t.scale(t.sum(t.mul(p, logp)), 1.0 / static_cast<double>(n));
    return t.add_const(neg_entropy, std::log(static_cast<double>(num_classes)));
  }
  if (!(prior_std > 0.0)) throw ArgumentError("uniformity: prior spread must be positive");
  if (scores.value().extent(1) != 1)
    throw ArgumentError("uniformity: regression needs 1 output column");
  const double s2 = prior_std * prior_std;
  Var mean_sq = t.mean(t.square(scores));
  return t.add_const(t.scale(t.add_const(mean_sq, 1.0), 1.0 / (2.0 * s2)),
                     std::log(prior_std) - 0.5);
}

}  // namespace camib
