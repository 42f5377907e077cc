#ifndef CAMIB_TEST_UTIL_HPP
#define CAMIB_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "camib/errors.hpp"
#include "camib/rng.hpp"
#include "camib/tensor.hpp"

namespace camib::testutil {

// Relative error with a unit floor: |a-b| / max(1, |a|, |b|). Near zero this
// degrades gracefully into an absolute error.
inline double rel_err(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ArgumentError("max_rel_err: shape mismatch " + Tensor::shape_string(a.shape()) +
                        " vs " + Tensor::shape_string(b.shape()));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

inline double max_rel_err(const GradientMap& a, const GradientMap& b) {
  if (a.size() != b.size()) throw ArgumentError("max_rel_err: key count mismatch");
  double worst = 0.0;
  for (const auto& [name, ta] : a) {
    auto it = b.find(name);
    if (it == b.end()) throw ArgumentError("max_rel_err: missing key '" + name + "'");
    worst = std::max(worst, max_rel_err(ta, it->second));
  }
  return worst;
}

inline double max_abs(const Tensor& t) {
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(t[i]));
  return worst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ArgumentError("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline Tensor random_tensor(RngStream& rng, std::vector<std::size_t> shape, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_normal_tensor(RngStream& rng, std::vector<std::size_t> shape,
                                   double mean = 0.0, double sd = 1.0) {
  Tensor t(std::move(shape));
  rng.fill_normal(t.data(), t.size(), mean, sd);
  return t;
}

}  // namespace camib::testutil

#endif  // CAMIB_TEST_UTIL_HPP
