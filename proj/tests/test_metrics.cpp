#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "camib/errors.hpp"
#include "camib/metrics.hpp"
#include "camib/rng.hpp"
#include "test_util.hpp"

using namespace camib;

namespace {

// Independent per-class F1 computed straight from the sample lists, without
// going through a confusion matrix.
double brute_force_weighted_f1(const std::vector<std::size_t>& preds,
                               const std::vector<std::size_t>& labels, std::size_t k) {
  double weighted = 0.0;
  const double total = static_cast<double>(labels.size());
  for (std::size_t c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) ++support;
      if (preds[i] == c && labels[i] == c) ++tp;
      if (preds[i] == c && labels[i] != c) ++fp;
      if (preds[i] != c && labels[i] == c) ++fn;
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    weighted += (support / total) * f1;
  }
  return weighted;
}

}  // namespace

TEST_CASE("confusion matrix counts match a brute-force tally on 1000 pairs") {
  RngStream rng(501);
  for (std::size_t k : {2, 3, 5}) {
    std::vector<std::size_t> preds(1000), labels(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      preds[i] = rng.uniform_below(k);
      labels[i] = rng.uniform_below(k);
    }
    Tensor confusion = confusion_matrix(preds, labels, k);
    double total = 0.0;
    for (std::size_t t = 0; t < k; ++t)
      for (std::size_t p = 0; p < k; ++p) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < 1000; ++i)
          if (labels[i] == t && preds[i] == p) ++count;
        CHECK(confusion.at2(t, p) == static_cast<double>(count));
        total += confusion.at2(t, p);
      }
    CHECK(total == 1000.0);
    CHECK(weighted_f1(confusion) ==
          doctest::Approx(brute_force_weighted_f1(preds, labels, k)).epsilon(1e-12));
  }
}

TEST_CASE("reference confusion counts give the expected binary accuracy") {
  // 3 true positives, 4 true negatives, 2 false positives, 1 false negative.
  std::vector<std::size_t> preds = {1, 1, 1, 0, 0, 0, 0, 1, 1, 0};
  std::vector<std::size_t> labels = {1, 1, 1, 0, 0, 0, 0, 0, 0, 1};
  MetricsReport report = classification_metrics(preds, labels, 2);
  REQUIRE(report.acc2_incl_zero.has_value());
  CHECK(*report.acc2_incl_zero == doctest::Approx(0.7).epsilon(1e-12));

  // Hand-computed weighted F1 for the same counts.
  const double p1 = 3.0 / 5.0, r1 = 3.0 / 4.0;
  const double p0 = 4.0 / 5.0, r0 = 4.0 / 6.0;
  const double f1_1 = 2.0 * p1 * r1 / (p1 + r1);
  const double f1_0 = 2.0 * p0 * r0 / (p0 + r0);
  const double expected = 0.6 * f1_0 + 0.4 * f1_1;
  REQUIRE(report.f1_weighted.has_value());
  CHECK(*report.f1_weighted == doctest::Approx(expected).epsilon(1e-12));

  CHECK_FALSE(report.acc7.has_value());
  CHECK_FALSE(report.mae.has_value());
  CHECK_FALSE(report.corr.has_value());
  CHECK_FALSE(report.acc2_excl_zero.has_value());
}

TEST_CASE("mean absolute error reference value") {
  CHECK(mean_absolute_error({1.0, 2.0}, {0.0, 4.0}) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(mean_absolute_error({2.5}, {2.5}) == 0.0);
}

TEST_CASE("pearson correlation identities") {
  RngStream rng(502);
  std::vector<double> x(64), y(64);
  for (std::size_t i = 0; i < 64; ++i) {
    x[i] = rng.uniform(-2.0, 2.0);
    y[i] = rng.uniform(-2.0, 2.0);
  }
  std::vector<double> neg(64);
  for (std::size_t i = 0; i < 64; ++i) neg[i] = -x[i];

  CHECK(std::abs(pearson_corr(x, x) - 1.0) <= 1e-12);
  CHECK(std::abs(pearson_corr(x, neg) + 1.0) <= 1e-12);
  CHECK(pearson_corr(x, y) == doctest::Approx(pearson_corr(y, x)).epsilon(1e-14));

  // Invariance under positive affine maps, sign flip under negative scale.
  std::vector<double> affine(64);
  for (std::size_t i = 0; i < 64; ++i) affine[i] = 3.0 * x[i] + 7.0;
  CHECK(pearson_corr(affine, y) == doctest::Approx(pearson_corr(x, y)).epsilon(1e-10));
  for (std::size_t i = 0; i < 64; ++i) affine[i] = -3.0 * x[i] + 7.0;
  CHECK(pearson_corr(affine, y) == doctest::Approx(-pearson_corr(x, y)).epsilon(1e-10));

  std::vector<double> constant(64, 4.2);
  CHECK(pearson_corr(constant, y) == 0.0);
  CHECK(pearson_corr(y, constant) == 0.0);
}

TEST_CASE("seven-way binning over the label range") {
  CHECK(acc7_bin(-3.0) == 0);
  CHECK(acc7_bin(3.0) == 6);
  CHECK(acc7_bin(-5.0) == 0);
  CHECK(acc7_bin(5.0) == 6);
  CHECK(acc7_bin(0.0) == 3);
  CHECK(acc7_bin(-3.0 + 6.0 / 7.0 + 1e-12) == 1);
  CHECK(acc7_bin(-3.0 + 6.0 / 7.0 - 1e-12) == 0);

  // All bins are reachable and contiguous.
  std::size_t previous = 0;
  for (double v = -3.0; v <= 3.0; v += 0.01) {
    const std::size_t bin = acc7_bin(v);
    CHECK(bin >= previous);
    CHECK(bin <= 6);
    previous = bin;
  }
  CHECK(previous == 6);
}

TEST_CASE("perfect regression predictions max out every metric") {
  std::vector<double> labels = {-2.5, -1.0, 0.0, 0.5, 1.5, 2.5};
  MetricsReport report = regression_metrics(labels, labels);
  CHECK(*report.acc7 == 1.0);
  CHECK(*report.acc2_incl_zero == 1.0);
  CHECK(*report.acc2_excl_zero == 1.0);
  CHECK(*report.f1_weighted == 1.0);
  CHECK(*report.mae == 0.0);
  CHECK(std::abs(*report.corr - 1.0) <= 1e-12);
}

TEST_CASE("zero labels are dropped only from the excluding variant") {
  std::vector<double> preds = {1.0, -1.0, 1.0};
  std::vector<double> labels = {0.0, 2.0, -2.0};
  MetricsReport report = regression_metrics(preds, labels);
  CHECK(*report.acc2_incl_zero == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(*report.acc2_excl_zero == 0.0);

  MetricsReport all_zero = regression_metrics({1.0, -1.0}, {0.0, 0.0});
  CHECK_FALSE(all_zero.acc2_excl_zero.has_value());
  CHECK(all_zero.acc2_incl_zero.has_value());
}

TEST_CASE("metric ranges hold on random prediction and label pairs") {
  RngStream rng(503);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_below(40);
    std::vector<double> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.uniform(-4.0, 4.0);
      labels[i] = rng.uniform(-4.0, 4.0);
    }
    MetricsReport report = regression_metrics(preds, labels);
    CHECK(*report.acc7 >= 0.0);
    CHECK(*report.acc7 <= 1.0);
    CHECK(*report.acc2_incl_zero >= 0.0);
    CHECK(*report.acc2_incl_zero <= 1.0);
    CHECK(*report.f1_weighted >= 0.0);
    CHECK(*report.f1_weighted <= 1.0);
    CHECK(*report.mae >= 0.0);
    CHECK(*report.corr >= -1.0 - 1e-12);
    CHECK(*report.corr <= 1.0 + 1e-12);
  }
}

TEST_CASE("metric input validation") {
  CHECK_THROWS_AS(mean_absolute_error({}, {}), ArgumentError);
  CHECK_THROWS_AS(mean_absolute_error({1.0}, {1.0, 2.0}), ArgumentError);
  CHECK_THROWS_AS(pearson_corr({}, {}), ArgumentError);
  CHECK_THROWS_AS(confusion_matrix({0}, {0}, 1), ArgumentError);
  CHECK_THROWS_AS(confusion_matrix({2}, {0}, 2), ArgumentError);
  CHECK_THROWS_AS(classification_metrics({}, {}, 2), ArgumentError);
  CHECK_THROWS_AS(regression_metrics({}, {}), ArgumentError);
  Tensor not_square({2, 3});
  CHECK_THROWS_AS(weighted_f1(not_square), ArgumentError);
  Tensor empty_conf({2, 2});
  CHECK_THROWS_AS(weighted_f1(empty_conf), ArgumentError);
}
