#ifndef CAMIB_METRICS_HPP
#define CAMIB_METRICS_HPP

#include <cstddef>
#include <optional>
#include <vector>

#include "camib/tensor.hpp"

namespace camib {

// Evaluation metrics. Regression fills every field; classification fills
// only acc2_incl_zero (plain accuracy over class predictions) and
// f1_weighted — inapplicable metrics stay absent rather than zero.
struct MetricsReport {
  std::optional<double> acc7;            // 7 equal bins over [-3, 3]
  std::optional<double> acc2_incl_zero;  // negative vs non-negative, all samples
  std::optional<double> acc2_excl_zero;  // zero-valued labels dropped first
  std::optional<double> f1_weighted;     // support-weighted harmonic mean
  std::optional<double> mae;
  std::optional<double> corr;            // Pearson; 0.0 under zero variance
};

// K x K counts with rows indexed by true label and columns by prediction.
Tensor confusion_matrix(const std::vector<std::size_t>& predictions,
                        const std::vector<std::size_t>& labels, std::size_t num_classes);

// Per-class F1 weighted by true-class support. Classes without predictions
// or without support contribute zero F1 at their weight.
double weighted_f1(const Tensor& confusion);

double mean_absolute_error(const std::vector<double>& predictions,
                           const std::vector<double>& labels);

// Pearson correlation; returns 0.0 when either side has zero variance.
double pearson_corr(const std::vector<double>& x, const std::vector<double>& y);

// Bin index of a scalar in the 7-way partition of [-3, 3] (clamped outside).
std::size_t acc7_bin(double value);

MetricsReport regression_metrics(const std::vector<double>& predictions,
                                 const std::vector<double>& labels);

MetricsReport classification_metrics(const std::vector<std::size_t>& predictions,
                                     const std::vector<std::size_t>& labels,
                                     std::size_t num_classes);

}  // namespace camib

#endif  // CAMIB_METRICS_HPP
