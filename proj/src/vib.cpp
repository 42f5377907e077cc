#include "camib/vib.hpp"

#include <cmath>
#include <string>

#include "camib/errors.hpp"

namespace camib {

namespace {

void check_encode_shapes(const Tensor& x, std::size_t w1_rows, std::size_t batch,
                         std::size_t seq_len) {
  check_rank2(x, "encode");
  if (x.extent(0) != batch * seq_len)
    throw ArgumentError("encode: " + std::to_string(x.extent(0)) + " token rows for batch " +
                        std::to_string(batch) + " x positions " + std::to_string(seq_len));
  if (x.extent(1) != w1_rows)
    throw ArgumentError("encode: input width " + std::to_string(x.extent(1)) +
                        " does not match encoder width " + std::to_string(w1_rows));
}

Tensor affine(const Tensor& x, const Tensor& W, const Tensor& b) {
  Tensor s = matmul_nn(x, W);
  const std::size_t n = s.extent(0), m = s.extent(1);
  if (b.size() != m) throw ArgumentError("affine bias width mismatch");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) s.at2(i, j) += b[j];
  return s;
}

}  // namespace

GaussianPosterior encode(const Tensor& x, const EncoderParams& params, std::size_t batch,
                         std::size_t seq_len) {
  check_encode_shapes(x, params.W1.extent(0), batch, seq_len);
  Tensor h = affine(x, params.W1, params.b1);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::tanh(h[i]);
  GaussianPosterior post;
  post.mu = affine(h, params.Wmu, params.bmu);
  post.log_var = affine(h, params.Wlv, params.blv);
  post.batch = batch;
  post.seq_len = seq_len;
  return post;
}

TapePosterior encode(Tape& t, Var x, const EncoderVars& params, std::size_t batch,
                     std::size_t seq_len) {
  check_encode_shapes(x.value(), params.W1.value().extent(0), batch, seq_len);
  Var h = t.tanh(t.add_row_broadcast(t.matmul(x, params.W1), params.b1));
  TapePosterior post;
  post.mu = t.add_row_broadcast(t.matmul(h, params.Wmu), params.bmu);
  post.log_var = t.add_row_broadcast(t.matmul(h, params.Wlv), params.blv);
  post.batch = batch;
  post.seq_len = seq_len;
  return post;
}

Tensor sample_eps_like(const Tensor& mu, RngStream& rng) {
  Tensor eps(mu.shape());
  rng.fill_normal(eps.data(), eps.size());
  return eps;
}

Tensor sample_eps(const GaussianPosterior& post, RngStream& rng) {
  return sample_eps_like(post.mu, rng);
}

Tensor reparameterize(const GaussianPosterior& post, const Tensor& eps) {
  if (!post.mu.same_shape(post.log_var) || !post.mu.same_shape(eps))
    throw ArgumentError("reparameterize: shape mismatch");
  Tensor z = post.mu;
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] += std::exp(0.5 * post.log_var[i]) * eps[i];
  return z;
}

Tensor reparameterize(const GaussianPosterior& post, RngStream& rng) {
  return reparameterize(post, sample_eps(post, rng));
}

Var reparameterize(Tape& t, const TapePosterior& post, const Tensor& eps) {
  if (!post.mu.value().same_shape(eps))
    throw ArgumentError("reparameterize: eps shape mismatch");
  Var sigma = t.exp(t.scale(post.log_var, 0.5));
  return t.add(post.mu, t.mul(sigma, t.constant(eps)));
}

double kl_to_standard_normal(const GaussianPosterior& post) {
  if (!post.mu.same_shape(post.log_var))
    throw ArgumentError("kl: posterior shape mismatch");
  if (post.batch == 0) throw ArgumentError("kl: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < post.mu.size(); ++i) {
    const double mu = post.mu[i];
    const double lv = post.log_var[i];
    acc += std::exp(lv) + mu * mu - 1.0 - lv;
  }
  return 0.5 * acc / static_cast<double>(post.batch);
}

Var kl_to_standard_normal(Tape& t, const TapePosterior& post) {
  if (post.batch == 0) throw ArgumentError("kl: empty batch");
  Var term = t.add(t.exp(post.log_var), t.square(post.mu));
  term = t.sub(t.add_const(term, -1.0), post.log_var);
  return t.scale(t.sum(term), 0.5 / static_cast<double>(post.batch));
}

Var ib_loss(Tape& t, Var x, const EncoderVars& enc, const HeadVars& head, const Labels& y,
            const VibConfig& cfg, std::size_t batch, std::size_t seq_len, RngStream& rng) {
  if (cfg.mc_samples < 1) throw ArgumentError("ib_loss: mc_samples must be at least 1");
  if (!(cfg.beta > 0.0) && cfg.beta != 0.0)
    throw ArgumentError("ib_loss: beta must be non-negative and finite");
  TapePosterior post = encode(t, x, enc, batch, seq_len);
  Var kl = kl_to_standard_normal(t, post);
  Var predictive;
  for (std::size_t l = 0; l < cfg.mc_samples; ++l) {
    Tensor eps = sample_eps_like(post.mu.value(), rng);
    Var z = reparameterize(t, post, eps);
    Var pooled = t.mean_pool_rows(z, seq_len);
    Var ll = mean_log_likelihood(t, head_scores(t, pooled, head), y);
    predictive = predictive ? t.add(predictive, ll) : ll;
  }
  predictive = t.scale(predictive, 1.0 / static_cast<double>(cfg.mc_samples));
  return t.sub(kl, t.scale(predictive, cfg.beta));
}

IbMcEstimate ib_loss_value(const Tensor& x, const EncoderParams& enc, const HeadParams& head,
                           const Labels& y, const VibConfig& cfg, std::size_t batch,
                           std::size_t seq_len, RngStream& rng) {
  if (cfg.mc_samples < 1) throw ArgumentError("ib_loss: mc_samples must be at least 1");
  GaussianPosterior post = encode(x, enc, batch, seq_len);
  IbMcEstimate est;
  est.kl = kl_to_standard_normal(post);
  double sum = 0.0, sumsq = 0.0;
  const std::size_t d = post.mu.extent(1);
  Tensor eps({batch * seq_len, d});
  for (std::size_t l = 0; l < cfg.mc_samples; ++l) {
    rng.fill_normal(eps.data(), eps.size());
    Tensor z = reparameterize(post, eps);
    Tensor pooled({batch, d});
    const double inv = 1.0 / static_cast<double>(seq_len);
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t tpos = 0; tpos < seq_len; ++tpos)
        for (std::size_t j = 0; j < d; ++j)
          pooled.at2(n, j) += z.at2(n * seq_len + tpos, j) * inv;
    const double ll = mean_log_likelihood(head_scores(pooled, head), y);
    sum += ll;
    sumsq += ll * ll;
  }
  const double mc = static_cast<double>(cfg.mc_samples);
  est.predictive_mean = sum / mc;
  const double var = std::max(0.0, sumsq / mc - est.predictive_mean * est.predictive_mean);
  est.predictive_se = cfg.mc_samples > 1 ? std::sqrt(var / (mc - 1.0)) : 0.0;
  est.value = est.kl - cfg.beta * est.predictive_mean;
  return est;
}

}  // namespace camib
