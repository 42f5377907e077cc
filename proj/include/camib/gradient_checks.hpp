#ifndef CAMIB_GRADIENT_CHECKS_HPP
#define CAMIB_GRADIENT_CHECKS_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "camib/attention.hpp"
#include "camib/tensor.hpp"

namespace camib {

// Closed-form derivatives of the attention pipeline and the entropy identity,
// exposed directly so they can be compared against reverse-mode gradients and
// central finite differences: a formula bug and an autodiff bug cannot mask
// each other when both oracles must agree.

// J[m][j] = alpha_m (delta_mj - alpha_j) for one softmax row.
Tensor softmax_jacobian(const Tensor& alpha_row);

// Row j = alpha_j (v_j - v_hat): sensitivity of one attended vector to its
// own score row.
Tensor dvhat_ds(const Tensor& alpha_row, const Tensor& values, const Tensor& v_hat);

// Entry j = alpha_j <upstream, v_j - v_hat>: chain rule through the attended
// vector for a scalar loss.
Tensor dl_ds(const Tensor& upstream, const Tensor& alpha_row, const Tensor& values,
             const Tensor& v_hat);

// Derivatives of a single score s_ij with respect to the projections:
// outer(z_i, k_j)/sqrt(d), outer(z_j, q_i)/sqrt(d), and exactly zero.
struct ScoreWeightGradients {
  Tensor dWq, dWk, dWv;
};

ScoreWeightGradients score_weight_gradients(const Tensor& z_i, const Tensor& z_j,
                                            const AttentionParams& params);

// Both sides of KL(p || uniform_K) = ln K - H(p), with 0 log 0 := 0.
struct KlUniformPair {
  double kl;
  double logk_minus_h;
};

KlUniformPair kl_uniform_identity(const Tensor& p, std::size_t num_classes);

// Randomized verification sweep over token-count and width combinations
// (1..3 modalities, 1..4 positions, widths 2/4/8).
struct CheckResult {
  std::string name;
  std::size_t instances = 0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::size_t instances = 0;
  std::uint64_t seed = 0;
  bool all_pass() const;
  std::string to_text() const;
};

struct VerifyConfig {
  std::size_t instances = 100;
  double tolerance = 1e-4;       // derivative checks (relative, unit floor)
  double identity_tolerance = 1e-10;  // algebraic identities
  std::uint64_t seed = 20240915;
  // Deliberately corrupts the dvhat_ds formula so the suite demonstrably
  // catches a wrong derivative. The report must then flag exactly that check.
  bool mutate = false;
};

VerificationReport verify_all(const VerifyConfig& cfg);

}  // namespace camib

#endif  // CAMIB_GRADIENT_CHECKS_HPP
