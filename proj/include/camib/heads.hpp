#ifndef CAMIB_HEADS_HPP
#define CAMIB_HEADS_HPP

#include <cstddef>
#include <vector>

#include "camib/autograd.hpp"
#include "camib/tensor.hpp"

namespace camib {

enum class TaskKind { classification, regression };

// Batch labels for either task. Classification stores class indices in
// [0, num_classes); regression stores real targets.
struct Labels {
  TaskKind kind = TaskKind::regression;
  std::vector<std::size_t> classes;
  std::vector<double> values;
  std::size_t num_classes = 0;

  std::size_t size() const {
    return kind == TaskKind::classification ? classes.size() : values.size();
  }

  // One label per (sample, repetition) pair, sample-major. Used when a batch
  // row is expanded into several recombined rows.
  Labels repeated(std::size_t k) const;
  Labels subset(const std::vector<std::size_t>& idx) const;
  // N x K one-hot matrix (classification only).
  Tensor one_hot() const;
};

// Affine prediction head over pooled d-dimensional representations.
// W: d x K for classification, d x 1 for regression; b matches columns.
struct HeadParams {
  Tensor W;
  Tensor b;
};

struct HeadVars {
  Var W;
  Var b;
};

// Raw scores: z W + b, shape N x K (or N x 1).
Tensor head_scores(const Tensor& z, const HeadParams& head);
Var head_scores(Tape& t, Var z, const HeadVars& head);

// Mean over the batch of log q(y|z): categorical log-probability for
// classification, unit-variance Gaussian log-density without its additive
// constant for regression (exact fit gives 0).
double mean_log_likelihood(const Tensor& scores, const Labels& y);
Var mean_log_likelihood(Tape& t, Var scores, const Labels& y);

// Supervised loss on head scores: cross-entropy (classification, log-sum-exp
// form) or mean squared error (regression). Batch-mean reduction.
double task_loss_value(const Tensor& scores, const Labels& y);
Var task_loss(Tape& t, Var scores, const Labels& y);

// Point predictions: argmax class index (classification) or the raw scalar
// output (regression), one per row.
std::vector<double> head_predictions(const Tensor& scores, TaskKind kind);

}  // namespace camib

#endif  // CAMIB_HEADS_HPP
