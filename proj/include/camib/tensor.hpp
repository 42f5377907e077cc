#ifndef CAMIB_TENSOR_HPP
#define CAMIB_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "camib/errors.hpp"

namespace camib {

// Dense row-major tensor of doubles. Values are immutable once a tensor is
// handed to the tape; mutation is only done while assembling inputs.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_)) {
      throw ArgumentError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({}, {v}); }

  static Tensor filled(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

  // Valid for rank-2 tensors (and rank-1 treated as a single row).
  std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() <= 1 ? 1 : shape_[0]); }
  std::size_t cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    if (rank() == 0) return 1;
    throw ArgumentError("cols() on rank-" + std::to_string(rank()) + " tensor");
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  double item() const {
    if (size() != 1) throw ArgumentError("item() on tensor of size " + std::to_string(size()));
    return data_[0];
  }

  Tensor reshaped(std::vector<std::size_t> new_shape) const {
    if (count(new_shape) != size()) {
      throw ArgumentError("reshape from " + shape_string(shape_) + " to " +
                          shape_string(new_shape) + " changes element count");
    }
    return Tensor(std::move(new_shape), data_);
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
  }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }

private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Named parameter collections. GradientMap entries mirror parameter shapes.
using ParameterSet = std::map<std::string, Tensor>;
using GradientMap = std::map<std::string, Tensor>;

inline void check_rank2(const Tensor& t, const char* who) {
  if (t.rank() != 2)
    throw ArgumentError(std::string(who) + ": expected rank-2 tensor, got " +
                        Tensor::shape_string(t.shape()));
}

// C = A * B
inline Tensor matmul_nn(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul");
  check_rank2(b, "matmul");
  const std::size_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
  if (b.extent(0) != k)
    throw ArgumentError("matmul: inner dimensions " + Tensor::shape_string(a.shape()) + " vs " +
                        Tensor::shape_string(b.shape()));
  Tensor c({n, m});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* brow = pb + l * m;
      double* crow = pc + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

// C = A * B^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul_nt");
  check_rank2(b, "matmul_nt");
  const std::size_t n = a.extent(0), k = a.extent(1), m = b.extent(0);
  if (b.extent(1) != k)
    throw ArgumentError("matmul_nt: inner dimensions " + Tensor::shape_string(a.shape()) +
                        " vs " + Tensor::shape_string(b.shape()));
  Tensor c({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] = acc;
    }
  }
  return c;
}

// C = A^T * B
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check_rank2(a, "matmul_tn");
  check_rank2(b, "matmul_tn");
  const std::size_t k = a.extent(0), n = a.extent(1), m = b.extent(1);
  if (b.extent(0) != k)
    throw ArgumentError("matmul_tn: inner dimensions " + Tensor::shape_string(a.shape()) +
                        " vs " + Tensor::shape_string(b.shape()));
  Tensor c({n, m});
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a.data() + l * n;
    const double* brow = b.data() + l * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

inline Tensor transposed(const Tensor& a) {
  check_rank2(a, "transpose");
  const std::size_t n = a.extent(0), m = a.extent(1);
  Tensor t({m, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) t.at2(j, i) = a.at2(i, j);
  return t;
}

// Row-stabilized softmax over the last dimension of a rank-2 tensor.
// Shift invariance per row is exact: subtracting the row max leaves the
// pairwise differences that feed exp() unchanged.
inline Tensor softmax_rows(const Tensor& scores) {
  check_rank2(scores, "softmax_rows");
  if (!scores.all_finite()) throw ArgumentError("softmax_rows: non-finite input");
  const std::size_t n = scores.extent(0), m = scores.extent(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.data() + i * m;
    double* orow = out.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < m; ++j) orow[j] /= sum;
  }
  return out;
}

inline Tensor log_softmax_rows(const Tensor& scores) {
  check_rank2(scores, "log_softmax_rows");
  if (!scores.all_finite()) throw ArgumentError("log_softmax_rows: non-finite input");
  const std::size_t n = scores.extent(0), m = scores.extent(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.data() + i * m;
    double* orow = out.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < m; ++j) orow[j] = row[j] - lse;
  }
  return out;
}

}  // namespace camib

#endif  // CAMIB_TENSOR_HPP
