#include "camib/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "camib/errors.hpp"

namespace camib {

namespace {

void check_paired(std::size_t preds, std::size_t labels, const char* who) {
  if (preds == 0) throw ArgumentError(std::string(who) + ": empty prediction list");
  if (preds != labels)
    throw ArgumentError(std::string(who) + ": prediction and label counts differ");
}

bool non_negative(double v) { return v >= 0.0; }

}  // namespace

Tensor confusion_matrix(const std::vector<std::size_t>& predictions,
                        const std::vector<std::size_t>& labels, std::size_t num_classes) {
  check_paired(predictions.size(), labels.size(), "confusion_matrix");
  if (num_classes < 2) throw ArgumentError("confusion_matrix: need at least 2 classes");
  Tensor counts({num_classes, num_classes});
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] >= num_classes || labels[i] >= num_classes)
      throw ArgumentError("confusion_matrix: class index out of range");
    counts.at2(labels[i], predictions[i]) += 1.0;
  }
  return counts;
}

double weighted_f1(const Tensor& confusion) {
  check_rank2(confusion, "weighted_f1");
  const std::size_t k = confusion.extent(0);
  if (confusion.extent(1) != k) throw ArgumentError("weighted_f1: confusion matrix not square");
  double total = 0.0;
  for (std::size_t i = 0; i < confusion.size(); ++i) total += confusion[i];
  if (total == 0.0) throw ArgumentError("weighted_f1: empty confusion matrix");
  double weighted = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = confusion.at2(c, c);
    double support = 0.0, predicted = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      support += confusion.at2(c, j);
      predicted += confusion.at2(j, c);
    }
    const double precision = predicted > 0.0 ? tp / predicted : 0.0;
    const double recall = support > 0.0 ? tp / support : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    weighted += (support / total) * f1;
  }
  return weighted;
}

double mean_absolute_error(const std::vector<double>& predictions,
                           const std::vector<double>& labels) {
  check_paired(predictions.size(), labels.size(), "mean_absolute_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    acc += std::abs(predictions[i] - labels[i]);
  return acc / static_cast<double>(predictions.size());
}

double pearson_corr(const std::vector<double>& x, const std::vector<double>& y) {
  check_paired(x.size(), y.size(), "pearson_corr");
  const auto constant = [](const std::vector<double>& v) {
    for (double e : v)
      if (e != v.front()) return false;
    return true;
  };
  if (constant(x) || constant(y)) return 0.0;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::size_t acc7_bin(double value) {
  const double shifted = (value + 3.0) * (7.0 / 6.0);
  const double floored = std::floor(shifted);
  if (floored < 0.0) return 0;
  if (floored > 6.0) return 6;
  return static_cast<std::size_t>(floored);
}

MetricsReport regression_metrics(const std::vector<double>& predictions,
                                 const std::vector<double>& labels) {
  check_paired(predictions.size(), labels.size(), "regression_metrics");
  const std::size_t n = predictions.size();
  MetricsReport report;

  std::size_t bin_hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (acc7_bin(predictions[i]) == acc7_bin(labels[i])) ++bin_hits;
  report.acc7 = static_cast<double>(bin_hits) / static_cast<double>(n);

  std::vector<std::size_t> bin_preds, bin_labels;
  bin_preds.reserve(n);
  bin_labels.reserve(n);
  std::size_t sign_hits = 0, nonzero = 0, nonzero_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool p = non_negative(predictions[i]);
    const bool l = non_negative(labels[i]);
    bin_preds.push_back(p ? 1 : 0);
    bin_labels.push_back(l ? 1 : 0);
    if (p == l) ++sign_hits;
    if (labels[i] != 0.0) {
      ++nonzero;
      if ((predictions[i] >= 0.0) == (labels[i] > 0.0)) ++nonzero_hits;
    }
  }
  report.acc2_incl_zero = static_cast<double>(sign_hits) / static_cast<double>(n);
  if (nonzero > 0)
    report.acc2_excl_zero = static_cast<double>(nonzero_hits) / static_cast<double>(nonzero);
  report.f1_weighted = weighted_f1(confusion_matrix(bin_preds, bin_labels, 2));
  report.mae = mean_absolute_error(predictions, labels);
  report.corr = pearson_corr(predictions, labels);
  return report;
}

MetricsReport classification_metrics(const std::vector<std::size_t>& predictions,
                                     const std::vector<std::size_t>& labels,
                                     std::size_t num_classes) {
  Tensor confusion = confusion_matrix(predictions, labels, num_classes);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == labels[i]) ++hits;
  MetricsReport report;
  report.acc2_incl_zero = static_cast<double>(hits) / static_cast<double>(predictions.size());
  report.f1_weighted = weighted_f1(confusion);
  return report;
}

}  // namespace camib
