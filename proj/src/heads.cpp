#include "camib/heads.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "camib/errors.hpp"

namespace camib {

namespace {

void check_labels(const Labels& y, std::size_t rows, std::size_t cols) {
  if (y.size() != rows)
    throw ArgumentError("labels: " + std::to_string(y.size()) + " entries for " +
                        std::to_string(rows) + " rows");
  if (y.kind == TaskKind::classification) {
    if (y.num_classes < 2) throw ArgumentError("classification needs at least 2 classes");
    if (cols != y.num_classes)
      throw ArgumentError("head produces " + std::to_string(cols) + " scores but labels have " +
                          std::to_string(y.num_classes) + " classes");
    for (std::size_t c : y.classes)
      if (c >= y.num_classes)
        throw ArgumentError("class index " + std::to_string(c) + " out of range");
  } else {
    if (cols != 1)
      throw ArgumentError("regression head must produce 1 score per row, got " +
                          std::to_string(cols));
  }
}

}  // namespace

Labels Labels::repeated(std::size_t k) const {
  Labels out;
  out.kind = kind;
  out.num_classes = num_classes;
  if (kind == TaskKind::classification) {
    out.classes.reserve(classes.size() * k);
    for (std::size_t c : classes)
      for (std::size_t r = 0; r < k; ++r) out.classes.push_back(c);
  } else {
    out.values.reserve(values.size() * k);
    for (double v : values)
      for (std::size_t r = 0; r < k; ++r) out.values.push_back(v);
  }
  return out;
}

Labels Labels::subset(const std::vector<std::size_t>& idx) const {
  Labels out;
  out.kind = kind;
  out.num_classes = num_classes;
  for (std::size_t i : idx) {
    if (i >= size()) throw ArgumentError("label subset index out of range");
    if (kind == TaskKind::classification)
      out.classes.push_back(classes[i]);
    else
      out.values.push_back(values[i]);
  }
  return out;
}

Tensor Labels::one_hot() const {
  if (kind != TaskKind::classification)
    throw ArgumentError("one_hot() requires classification labels");
  Tensor t({classes.size(), num_classes});
  for (std::size_t i = 0; i < classes.size(); ++i) t.at2(i, classes[i]) = 1.0;
  return t;
}

Tensor head_scores(const Tensor& z, const HeadParams& head) {
  Tensor s = matmul_nn(z, head.W);
  const std::size_t n = s.extent(0), m = s.extent(1);
  if (head.b.size() != m) throw ArgumentError("head bias does not match output width");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) s.at2(i, j) += head.b[j];
  return s;
}

Var head_scores(Tape& t, Var z, const HeadVars& head) {
  return t.add_row_broadcast(t.matmul(z, head.W), head.b);
}

double mean_log_likelihood(const Tensor& scores, const Labels& y) {
  check_labels(y, scores.extent(0), scores.extent(1));
  const std::size_t n = scores.extent(0);
  if (n == 0) throw ArgumentError("empty batch");
  if (y.kind == TaskKind::classification) {
    Tensor logp = log_softmax_rows(scores);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += logp.at2(i, y.classes[i]);
    return acc / static_cast<double>(n);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = scores[i] - y.values[i];
    acc += -0.5 * r * r;
  }
  return acc / static_cast<double>(n);
}

Var mean_log_likelihood(Tape& t, Var scores, const Labels& y) {
  check_labels(y, scores.value().extent(0), scores.value().extent(1));
  if (y.kind == TaskKind::classification) {
    Var logp = t.log_softmax_rows(scores);
    return t.mean(t.pick_per_row(logp, y.classes));
  }
  const std::size_t n = scores.value().extent(0);
  Var r = t.sub(t.reshape(scores, {n}), t.constant(Tensor({n}, y.values)));
  return t.scale(t.mean(t.square(r)), -0.5);
}

double task_loss_value(const Tensor& scores, const Labels& y) {
  if (y.kind == TaskKind::classification) return -mean_log_likelihood(scores, y);
  return -2.0 * mean_log_likelihood(scores, y);
}

Var task_loss(Tape& t, Var scores, const Labels& y) {
  check_labels(y, scores.value().extent(0), scores.value().extent(1));
  if (y.kind == TaskKind::classification) {
    Var logp = t.log_softmax_rows(scores);
    return t.scale(t.mean(t.pick_per_row(logp, y.classes)), -1.0);
  }
  const std::size_t n = scores.value().extent(0);
  Var r = t.sub(t.reshape(scores, {n}), t.constant(Tensor({n}, y.values)));
  return t.mean(t.square(r));
}

std::vector<double> head_predictions(const Tensor& scores, TaskKind kind) {
  const std::size_t n = scores.extent(0), m = scores.extent(1);
  std::vector<double> out(n);
  if (kind == TaskKind::classification) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < m; ++j)
        if (scores.at2(i, j) > scores.at2(i, best)) best = j;
      out[i] = static_cast<double>(best);
    }
  } else {
    if (m != 1) throw ArgumentError("regression predictions need a single output column");
    for (std::size_t i = 0; i < n; ++i) out[i] = scores[i];
  }
  return out;
}

}  // namespace camib
