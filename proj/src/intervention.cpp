#include "camib/intervention.hpp"

#include <string>

#include "camib/errors.hpp"

namespace camib {

ShortcutDraw sample_shortcut_set(std::size_t batch, std::size_t k, RngStream& rng) {
  if (batch < 2)
    throw ConfigError("shortcut sampling needs a batch of at least 2, got " +
                      std::to_string(batch));
  if (k < 1 || k > batch - 1)
    throw ArgumentError("shortcut draw size " + std::to_string(k) + " outside [1, " +
                        std::to_string(batch - 1) + "]");
  ShortcutDraw draw(batch);
  std::vector<std::size_t> pool(batch - 1);
  for (std::size_t n = 0; n < batch; ++n) {
    std::size_t w = 0;
    for (std::size_t i = 0; i < batch; ++i)
      if (i != n) pool[w++] = i;
    // Partial Fisher-Yates: after j swaps the first j entries are a uniform
    // draw without replacement.
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + rng.uniform_below(pool.size() - j);
      std::swap(pool[j], pool[pick]);
    }
    draw[n].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return draw;
}

Var intervention_loss(Tape& t, Var z_c, Var z_s, const ShortcutDraw& draw, const Labels& y,
                      const HeadVars& head, std::size_t seq_len) {
  const std::size_t batch = draw.size();
  if (batch == 0) throw ArgumentError("intervention: empty draw");
  if (y.size() != batch) throw ArgumentError("intervention: label count mismatch");
  if (!z_c.value().same_shape(z_s.value()))
    throw ArgumentError("intervention: causal/shortcut shape mismatch");
  if (z_c.value().extent(0) != batch * seq_len)
    throw ArgumentError("intervention: row count does not match batch x positions");
  const std::size_t k = draw[0].size();
  std::vector<std::size_t> self_rows, foreign_rows, label_idx;
  self_rows.reserve(batch * k * seq_len);
  foreign_rows.reserve(batch * k * seq_len);
  label_idx.reserve(batch * k);
  for (std::size_t n = 0; n < batch; ++n) {
    if (draw[n].size() != k) throw ArgumentError("intervention: ragged draw");
    for (std::size_t s : draw[n]) {
      if (s >= batch) throw ArgumentError("intervention: draw index out of range");
      for (std::size_t pos = 0; pos < seq_len; ++pos) {
        self_rows.push_back(n * seq_len + pos);
        foreign_rows.push_back(s * seq_len + pos);
      }
      label_idx.push_back(n);
    }
  }
  Var recombined = t.add(t.gather_rows(z_c, self_rows), t.gather_rows(z_s, foreign_rows));
  Var pooled = t.mean_pool_rows(recombined, seq_len);
  Var scores = head_scores(t, pooled, head);
  return task_loss(t, scores, y.subset(label_idx));
}

LossBreakdown total_loss(double ib, double caus, double iv_align, double unif, double intv,
                         double lambda1, double lambda2, double beta) {
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw ArgumentError("loss weights must be non-negative");
  LossBreakdown b;
  b.ib = ib;
  b.caus = caus;
  b.iv_align = iv_align;
  b.unif = unif;
  b.intv = intv;
  b.lambda1 = lambda1;
  b.lambda2 = lambda2;
  b.beta = beta;
  b.total = b.recomposed();
  return b;
}

Var total_loss(Tape& t, Var ib, Var caus, Var iv_align, Var unif, Var intv, double lambda1,
               double lambda2) {
  if (lambda1 < 0.0 || lambda2 < 0.0)
    throw ArgumentError("loss weights must be non-negative");
  Var weighted = t.add(caus, t.scale(t.add(iv_align, unif), lambda1));
  weighted = t.add(weighted, t.scale(intv, lambda2));
  return t.add(weighted, ib);
}

}  // namespace camib
