#ifndef CAMIB_AUTOGRAD_HPP
#define CAMIB_AUTOGRAD_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "camib/tensor.hpp"

namespace camib {

class Tape;

// Lightweight handle to a node on a tape. Copying is cheap; the tape owns
// all values and gradients.
class Var {
public:
  Var() = default;
  const Tensor& value() const;
  const std::vector<std::size_t>& shape() const;
  std::size_t index() const { return idx_; }
  Tape* tape() const { return tape_; }
  explicit operator bool() const { return tape_ != nullptr; }

private:
  friend class Tape;
  Var(Tape* t, std::size_t i) : tape_(t), idx_(i) {}
  Tape* tape_ = nullptr;
  std::size_t idx_ = 0;
};

// Reverse-mode tape scoped to one loss evaluation. Every op validates its
// inputs, records a backward closure, and rejects non-finite outputs with an
// error naming the offending node. Single-threaded by construction.
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  // Elementwise, same shape.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var square(Var a) { return mul(a, a); }

  Var scale(Var a, double c);
  Var add_const(Var a, double c);

  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);

  // 2-D linear algebra.
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_row_broadcast(Var a, Var bias);  // a: n x m, bias: m (or 1 x m)

  // Row-stabilized softmax / log-softmax over the last axis of a 2-D tensor.
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);

  // Reductions.
  Var sum(Var a);
  Var mean(Var a);

  // Shape and indexing. Gather/slice/concat treat the first axis as rows of
  // a 2-D view; pick_per_row selects one column per row.
  Var reshape(Var a, std::vector<std::size_t> shape);
  Var slice_rows(Var a, std::size_t begin, std::size_t end);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var gather_rows(Var a, std::vector<std::size_t> idx);
  Var pick_per_row(Var a, std::vector<std::size_t> cols);
  // (n*group) x m -> n x m, averaging consecutive blocks of `group` rows.
  Var mean_pool_rows(Var a, std::size_t group);

  // Runs reverse accumulation from a scalar output. May be called once per
  // tape; gradients are then available through grad_of().
  void backward(Var output);
  Tensor grad_of(Var leaf) const;

  const Tensor& value(std::size_t idx) const { return nodes_[idx].value; }
  std::size_t node_count() const { return nodes_.size(); }
  const char* op_name(std::size_t idx) const { return nodes_[idx].op; }

private:
  friend class Var;

  struct Node {
    Tensor value;
    const char* op;
    bool requires_grad;
    // Accumulates parent gradients given this node's output gradient.
    std::function<void(Tape&, const Tensor&)> backward;
  };

  Var record(const char* op, Tensor value, bool requires_grad,
             std::function<void(Tape&, const Tensor&)> backward);
  void accumulate(std::size_t idx, const Tensor& g);
  void accumulate_scaled(std::size_t idx, const Tensor& g, double c);
  bool needs_grad(Var v) const { return nodes_[v.idx_].requires_grad; }
  void check_same_tape(Var a, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<bool> has_grad_;
  bool backward_done_ = false;
};

// A scalar objective expressed as tape construction over named parameters.
struct ParamVars {
  std::map<std::string, Var> vars;
  Var at(const std::string& name) const;
};

using TapeObjective = std::function<Var(Tape&, const ParamVars&)>;
using ScalarObjective = std::function<double(const ParameterSet&)>;

// Exact reverse-mode partials of a scalar objective w.r.t. every parameter.
GradientMap grad(const TapeObjective& objective, const ParameterSet& params);

// Forward value of a tape objective at the given parameters.
double eval_objective(const TapeObjective& objective, const ParameterSet& params);

// Central finite differences (f(p+h) - f(p-h)) / (2h), coordinate by
// coordinate. The oracle counterpart of grad().
GradientMap finite_diff_grad(const ScalarObjective& f, const ParameterSet& params, double step);
GradientMap finite_diff_grad(const TapeObjective& objective, const ParameterSet& params,
                             double step);

}  // namespace camib

#endif  // CAMIB_AUTOGRAD_HPP
