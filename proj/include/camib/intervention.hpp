#ifndef CAMIB_INTERVENTION_HPP
#define CAMIB_INTERVENTION_HPP

#include <cstddef>
#include <vector>

#include "camib/autograd.hpp"
#include "camib/heads.hpp"
#include "camib/rng.hpp"
#include "camib/tensor.hpp"

namespace camib {

// For each sample, the indices of the foreign samples whose shortcut parts it
// is recombined with. Never contains the sample's own index.
using ShortcutDraw = std::vector<std::vector<std::size_t>>;

// k indices per sample, uniform without replacement over the other N-1
// samples. N < 2 is a configuration error (callers disable the term instead).
ShortcutDraw sample_shortcut_set(std::size_t batch, std::size_t k, RngStream& rng);

// Mean prediction loss over all recombined pairs z' = z_c[n] + z_s[s]:
// cross-entropy for classification, squared error for regression, averaged
// over the N*k pairs. Rows of z_c/z_s are (sample, position) pairs,
// sample-major, seq_len rows per sample.
Var intervention_loss(Tape& t, Var z_c, Var z_s, const ShortcutDraw& draw, const Labels& y,
                      const HeadVars& head, std::size_t seq_len);

// Weighted objective with every component retained for inspection. The total
// is exactly caus + lambda1*(iv_align + unif) + lambda2*intv + ib, where ib is
// the summed per-modality bottleneck loss.
struct LossBreakdown {
  double ib = 0.0;
  double caus = 0.0;
  double iv_align = 0.0;
  double unif = 0.0;
  double intv = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double beta = 0.0;

  // Recomputes the weighted sum from the stored parts with the same
  // floating-point expression used to build `total`.
  double recomposed() const { return caus + lambda1 * (iv_align + unif) + lambda2 * intv + ib; }
};

LossBreakdown total_loss(double ib, double caus, double iv_align, double unif, double intv,
                         double lambda1, double lambda2, double beta);

// Tape-side weighted sum with the identical association order.
Var total_loss(Tape& t, Var ib, Var caus, Var iv_align, Var unif, Var intv, double lambda1,
               double lambda2);

}  // namespace camib

#endif  // CAMIB_INTERVENTION_HPP
