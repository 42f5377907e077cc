#ifndef CAMIB_VIB_HPP
#define CAMIB_VIB_HPP

#include <cstddef>

#include "camib/autograd.hpp"
#include "camib/heads.hpp"
#include "camib/rng.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Bottleneck settings for one modality filter: latent width d, compression
// weight beta, and the Monte-Carlo sample count for the predictive term.
struct VibConfig {
  std::size_t latent_dim = 0;
  double beta = 1e-4;
  std::size_t mc_samples = 1;
};

// Two-layer token encoder producing a diagonal Gaussian per token:
// h = tanh(x W1 + b1), mu = h Wmu + bmu, log_var = h Wlv + blv.
struct EncoderParams {
  Tensor W1, b1;
  Tensor Wmu, bmu;
  Tensor Wlv, blv;
};

struct EncoderVars {
  Var W1, b1;
  Var Wmu, bmu;
  Var Wlv, blv;
};

// Token-wise posterior for a batch: rows are (sample, position) pairs in
// sample-major order, so mu and log_var are (N*L) x d.
struct GaussianPosterior {
  Tensor mu;
  Tensor log_var;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
};

struct TapePosterior {
  Var mu;
  Var log_var;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
};

GaussianPosterior encode(const Tensor& x, const EncoderParams& params, std::size_t batch,
                         std::size_t seq_len);
TapePosterior encode(Tape& t, Var x, const EncoderVars& params, std::size_t batch,
                     std::size_t seq_len);

// One standard-normal draw per latent coordinate, shaped like mu.
Tensor sample_eps(const GaussianPosterior& post, RngStream& rng);
Tensor sample_eps_like(const Tensor& mu, RngStream& rng);

// z = mu + exp(0.5 log_var) * eps. The tape variant takes a frozen eps so the
// same draw can be replayed across forward evaluations.
Tensor reparameterize(const GaussianPosterior& post, const Tensor& eps);
Tensor reparameterize(const GaussianPosterior& post, RngStream& rng);
Var reparameterize(Tape& t, const TapePosterior& post, const Tensor& eps);

// 0.5 * sum(sigma^2 + mu^2 - 1 - log sigma^2) over latent and position dims,
// averaged over the batch. Non-negative, zero exactly at mu=0, sigma=1.
double kl_to_standard_normal(const GaussianPosterior& post);
Var kl_to_standard_normal(Tape& t, const TapePosterior& post);

// Bottleneck loss for one modality: KL - beta * (1/mc) sum_l E[log q(y|z_l)],
// with the predictive head reading mean-pooled latents.
Var ib_loss(Tape& t, Var x, const EncoderVars& enc, const HeadVars& head, const Labels& y,
            const VibConfig& cfg, std::size_t batch, std::size_t seq_len, RngStream& rng);

// Streaming evaluation used for large Monte-Carlo sample counts. Reports the
// per-draw mean and standard error of the predictive term so estimates at
// different sample counts can be compared on equal statistical footing.
struct IbMcEstimate {
  double value = 0.0;
  double kl = 0.0;
  double predictive_mean = 0.0;
  double predictive_se = 0.0;
};

IbMcEstimate ib_loss_value(const Tensor& x, const EncoderParams& enc, const HeadParams& head,
                           const Labels& y, const VibConfig& cfg, std::size_t batch,
                           std::size_t seq_len, RngStream& rng);

}  // namespace camib

#endif  // CAMIB_VIB_HPP
