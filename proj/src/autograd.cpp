#include "camib/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace camib {

const Tensor& Var::value() const {
  if (!tape_) throw ArgumentError("value() on empty Var");
  return tape_->value(idx_);
}

const std::vector<std::size_t>& Var::shape() const { return value().shape(); }

Var ParamVars::at(const std::string& name) const {
  auto it = vars.find(name);
  if (it == vars.end()) throw ArgumentError("unknown parameter '" + name + "'");
  return it->second;
}

void Tape::check_same_tape(Var a, const char* op) const {
  if (a.tape() != this)
    throw ArgumentError(std::string(op) + ": operand belongs to a different tape");
}

Var Tape::record(const char* op, Tensor value, bool requires_grad,
                 std::function<void(Tape&, const Tensor&)> backward) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by op '") + op + "' (node " +
                       std::to_string(nodes_.size()) + ")");
  nodes_.push_back(Node{std::move(value), op, requires_grad, std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  return record(requires_grad ? "leaf" : "constant", std::move(value), requires_grad, nullptr);
}

void Tape::accumulate(std::size_t idx, const Tensor& g) { accumulate_scaled(idx, g, 1.0); }

void Tape::accumulate_scaled(std::size_t idx, const Tensor& g, double c) {
  if (!nodes_[idx].requires_grad) return;
  Tensor& dst = grads_[idx];
  if (!has_grad_[idx]) {
    dst = Tensor(nodes_[idx].value.shape());
    has_grad_[idx] = true;
  }
  double* d = dst.data();
  const double* s = g.data();
  const std::size_t n = dst.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += c * s[i];
}

void Tape::backward(Var output) {
  check_same_tape(output, "backward");
  if (output.value().size() != 1)
    throw ArgumentError("backward: output must be a scalar, got shape " +
                        Tensor::shape_string(output.shape()));
  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), false);
  const std::size_t out = output.index();
  grads_[out] = Tensor::filled(nodes_[out].value.shape(), 1.0);
  has_grad_[out] = true;
  for (std::size_t i = out + 1; i-- > 0;) {
    if (!has_grad_[i] || !nodes_[i].requires_grad || !nodes_[i].backward) continue;
    nodes_[i].backward(*this, grads_[i]);
  }
  backward_done_ = true;
}

Tensor Tape::grad_of(Var leaf) const {
  check_same_tape(leaf, "grad_of");
  if (!backward_done_) throw ArgumentError("grad_of before backward()");
  if (has_grad_[leaf.index()]) return grads_[leaf.index()];
  return Tensor(leaf.shape());
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ArgumentError(std::string(op) + ": shape mismatch " + Tensor::shape_string(a.shape()) +
                        " vs " + Tensor::shape_string(b.shape()));
}

}  // namespace

Var Tape::add(Var a, Var b) {
  check_same_tape(a, "add");
  check_same_tape(b, "add");
  check_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += pb[i];
  const std::size_t ia = a.index(), ib = b.index();
  const bool rg = needs_grad(a) || needs_grad(b);
  return record("add", std::move(out), rg, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var Tape::sub(Var a, Var b) {
  check_same_tape(a, "sub");
  check_same_tape(b, "sub");
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= pb[i];
  const std::size_t ia = a.index(), ib = b.index();
  const bool rg = needs_grad(a) || needs_grad(b);
  return record("sub", std::move(out), rg, [ia, ib](Tape& t, const Tensor& g) {
    t.accumulate(ia, g);
    t.accumulate_scaled(ib, g, -1.0);
  });
}

Var Tape::mul(Var a, Var b) {
  check_same_tape(a, "mul");
  check_same_tape(b, "mul");
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  const double* pb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= pb[i];
  const std::size_t ia = a.index(), ib = b.index();
  const bool rg = needs_grad(a) || needs_grad(b);
  return record("mul", std::move(out), rg, [ia, ib](Tape& t, const Tensor& g) {
    if (t.nodes_[ia].requires_grad) {
      Tensor ga = g;
      const double* pb2 = t.nodes_[ib].value.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= pb2[i];
      t.accumulate(ia, ga);
    }
    if (t.nodes_[ib].requires_grad) {
      Tensor gb = g;
      const double* pa2 = t.nodes_[ia].value.data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= pa2[i];
      t.accumulate(ib, gb);
    }
  });
}

Var Tape::scale(Var a, double c) {
  check_same_tape(a, "scale");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  const std::size_t ia = a.index();
  return record("scale", std::move(out), needs_grad(a),
                [ia, c](Tape& t, const Tensor& g) { t.accumulate_scaled(ia, g, c); });
}

Var Tape::add_const(Var a, double c) {
  check_same_tape(a, "add_const");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  const std::size_t ia = a.index();
  return record("add_const", std::move(out), needs_grad(a),
                [ia](Tape& t, const Tensor& g) { t.accumulate(ia, g); });
}

Var Tape::exp(Var a) {
  check_same_tape(a, "exp");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  const std::size_t ia = a.index();
  Var v = record("exp", std::move(out), needs_grad(a), nullptr);
  const std::size_t iv = v.index();
  nodes_[iv].backward = [ia, iv](Tape& t, const Tensor& g) {
    Tensor ga = g;
    const double* y = t.nodes_[iv].value.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i];
    t.accumulate(ia, ga);
  };
  return v;
}

Var Tape::log(Var a) {
  check_same_tape(a, "log");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(out[i]);
  const std::size_t ia = a.index();
  return record("log", std::move(out), needs_grad(a), [ia](Tape& t, const Tensor& g) {
    Tensor ga = g;
    const double* x = t.nodes_[ia].value.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] /= x[i];
    t.accumulate(ia, ga);
  });
}

Var Tape::tanh(Var a) {
  check_same_tape(a, "tanh");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  const std::size_t ia = a.index();
  Var v = record("tanh", std::move(out), needs_grad(a), nullptr);
  const std::size_t iv = v.index();
  nodes_[iv].backward = [ia, iv](Tape& t, const Tensor& g) {
    Tensor ga = g;
    const double* y = t.nodes_[iv].value.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= 1.0 - y[i] * y[i];
    t.accumulate(ia, ga);
  };
  return v;
}

Var Tape::sigmoid(Var a) {
  check_same_tape(a, "sigmoid");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  const std::size_t ia = a.index();
  Var v = record("sigmoid", std::move(out), needs_grad(a), nullptr);
  const std::size_t iv = v.index();
  nodes_[iv].backward = [ia, iv](Tape& t, const Tensor& g) {
    Tensor ga = g;
    const double* y = t.nodes_[iv].value.data();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i] * (1.0 - y[i]);
    t.accumulate(ia, ga);
  };
  return v;
}

Var Tape::matmul(Var a, Var b) {
  check_same_tape(a, "matmul");
  check_same_tape(b, "matmul");
  Tensor out = matmul_nn(a.value(), b.value());
  const std::size_t ia = a.index(), ib = b.index();
  const bool rg = needs_grad(a) || needs_grad(b);
  return record("matmul", std::move(out), rg, [ia, ib](Tape& t, const Tensor& g) {
    if (t.nodes_[ia].requires_grad) t.accumulate(ia, matmul_nt(g, t.nodes_[ib].value));
    if (t.nodes_[ib].requires_grad) t.accumulate(ib, matmul_tn(t.nodes_[ia].value, g));
  });
}

Var Tape::transpose(Var a) {
  check_same_tape(a, "transpose");
  Tensor out = transposed(a.value());
  const std::size_t ia = a.index();
  return record("transpose", std::move(out), needs_grad(a),
                [ia](Tape& t, const Tensor& g) { t.accumulate(ia, transposed(g)); });
}

Var Tape::add_row_broadcast(Var a, Var bias) {
  check_same_tape(a, "add_row_broadcast");
  check_same_tape(bias, "add_row_broadcast");
  check_rank2(a.value(), "add_row_broadcast");
  const Tensor& bv = bias.value();
  const std::size_t n = a.value().extent(0), m = a.value().extent(1);
  if (bv.size() != m)
    throw ArgumentError("add_row_broadcast: bias size " + std::to_string(bv.size()) +
                        " does not match " + std::to_string(m) + " columns");
  Tensor out = a.value();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) row[j] += bv[j];
  }
  const std::size_t ia = a.index(), ibias = bias.index();
  const bool rg = needs_grad(a) || needs_grad(bias);
  return record("add_row_broadcast", std::move(out), rg,
                [ia, ibias, n, m](Tape& t, const Tensor& g) {
                  t.accumulate(ia, g);
                  if (t.nodes_[ibias].requires_grad) {
                    Tensor gb(t.nodes_[ibias].value.shape());
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
                    t.accumulate(ibias, gb);
                  }
                });
}

Var Tape::softmax_rows(Var a) {
  check_same_tape(a, "softmax_rows");
  Tensor out = camib::softmax_rows(a.value());
  const std::size_t ia = a.index();
  Var v = record("softmax_rows", std::move(out), needs_grad(a), nullptr);
  const std::size_t iv = v.index();
  // d/ds of alpha: ga = alpha .* (g - <g, alpha>) per row.
  nodes_[iv].backward = [ia, iv](Tape& t, const Tensor& g) {
    const Tensor& alpha = t.nodes_[iv].value;
    const std::size_t n = alpha.extent(0), m = alpha.extent(1);
    Tensor ga({n, m});
    for (std::size_t i = 0; i < n; ++i) {
      const double* arow = alpha.data() + i * m;
      const double* grow = g.data() + i * m;
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += grow[j] * arow[j];
      double* orow = ga.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] = arow[j] * (grow[j] - dot);
    }
    t.accumulate(ia, ga);
  };
  return v;
}

Var Tape::log_softmax_rows(Var a) {
  check_same_tape(a, "log_softmax_rows");
  Tensor out = camib::log_softmax_rows(a.value());
  const std::size_t ia = a.index();
  Var v = record("log_softmax_rows", std::move(out), needs_grad(a), nullptr);
  const std::size_t iv = v.index();
  // ga = g - softmax .* rowsum(g)
  nodes_[iv].backward = [ia, iv](Tape& t, const Tensor& g) {
    const Tensor& logp = t.nodes_[iv].value;
    const std::size_t n = logp.extent(0), m = logp.extent(1);
    Tensor ga({n, m});
    for (std::size_t i = 0; i < n; ++i) {
      const double* lrow = logp.data() + i * m;
      const double* grow = g.data() + i * m;
      double gsum = 0.0;
      for (std::size_t j = 0; j < m; ++j) gsum += grow[j];
      double* orow = ga.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] = grow[j] - std::exp(lrow[j]) * gsum;
    }
    t.accumulate(ia, ga);
  };
  return v;
}

Var Tape::sum(Var a) {
  check_same_tape(a, "sum");
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i];
  const std::size_t ia = a.index();
  return record("sum", Tensor::scalar(s), needs_grad(a), [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, Tensor::filled(t.nodes_[ia].value.shape(), g[0]));
  });
}

Var Tape::mean(Var a) {
  check_same_tape(a, "mean");
  const std::size_t n = a.value().size();
  if (n == 0) throw ArgumentError("mean of empty tensor");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a.value()[i];
  const std::size_t ia = a.index();
  return record("mean", Tensor::scalar(s / static_cast<double>(n)), needs_grad(a),
                [ia, n](Tape& t, const Tensor& g) {
                  t.accumulate(
                      ia, Tensor::filled(t.nodes_[ia].value.shape(), g[0] / static_cast<double>(n)));
                });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  check_same_tape(a, "reshape");
  Tensor out = a.value().reshaped(shape);
  const std::size_t ia = a.index();
  return record("reshape", std::move(out), needs_grad(a), [ia](Tape& t, const Tensor& g) {
    t.accumulate(ia, g.reshaped(t.nodes_[ia].value.shape()));
  });
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t end) {
  check_same_tape(a, "slice_rows");
  check_rank2(a.value(), "slice_rows");
  const std::size_t n = a.value().extent(0), m = a.value().extent(1);
  if (begin > end || end > n)
    throw ArgumentError("slice_rows: range [" + std::to_string(begin) + ", " +
                        std::to_string(end) + ") out of " + std::to_string(n) + " rows");
  Tensor out({end - begin, m});
  std::copy(a.value().data() + begin * m, a.value().data() + end * m, out.data());
  const std::size_t ia = a.index();
  return record("slice_rows", std::move(out), needs_grad(a),
                [ia, begin, m](Tape& t, const Tensor& g) {
                  Tensor ga(t.nodes_[ia].value.shape());
                  std::copy(g.data(), g.data() + g.size(), ga.data() + begin * m);
                  t.accumulate(ia, ga);
                });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_rows: no parts");
  std::size_t total = 0;
  const std::size_t m = parts[0].value().extent(1);
  bool rg = false;
  for (Var p : parts) {
    check_same_tape(p, "concat_rows");
    check_rank2(p.value(), "concat_rows");
    if (p.value().extent(1) != m) throw ArgumentError("concat_rows: column mismatch");
    total += p.value().extent(0);
    rg = rg || needs_grad(p);
  }
  Tensor out({total, m});
  std::size_t row = 0;
  std::vector<std::size_t> idx, offs;
  for (Var p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + row * m);
    idx.push_back(p.index());
    offs.push_back(row);
    row += p.value().extent(0);
  }
  return record("concat_rows", std::move(out), rg,
                [idx, offs, m](Tape& t, const Tensor& g) {
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    const Tensor& pv = t.nodes_[idx[k]].value;
                    Tensor gp(pv.shape());
                    std::copy(g.data() + offs[k] * m, g.data() + offs[k] * m + pv.size(),
                              gp.data());
                    t.accumulate(idx[k], gp);
                  }
                });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no parts");
  const std::size_t n = parts[0].value().extent(0);
  std::size_t mtotal = 0;
  bool rg = false;
  for (Var p : parts) {
    check_same_tape(p, "concat_cols");
    check_rank2(p.value(), "concat_cols");
    if (p.value().extent(0) != n) throw ArgumentError("concat_cols: row mismatch");
    mtotal += p.value().extent(1);
    rg = rg || needs_grad(p);
  }
  Tensor out({n, mtotal});
  std::vector<std::size_t> idx, offs, widths;
  std::size_t off = 0;
  for (Var p : parts) {
    const std::size_t w = p.value().extent(1);
    for (std::size_t i = 0; i < n; ++i)
      std::copy(p.value().data() + i * w, p.value().data() + (i + 1) * w,
                out.data() + i * mtotal + off);
    idx.push_back(p.index());
    offs.push_back(off);
    widths.push_back(w);
    off += w;
  }
  return record("concat_cols", std::move(out), rg,
                [idx, offs, widths, n, mtotal](Tape& t, const Tensor& g) {
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    Tensor gp({n, widths[k]});
                    for (std::size_t i = 0; i < n; ++i)
                      std::copy(g.data() + i * mtotal + offs[k],
                                g.data() + i * mtotal + offs[k] + widths[k],
                                gp.data() + i * widths[k]);
                    t.accumulate(idx[k], gp);
                  }
                });
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> idx) {
  check_same_tape(a, "gather_rows");
  check_rank2(a.value(), "gather_rows");
  const std::size_t n = a.value().extent(0), m = a.value().extent(1);
  Tensor out({idx.size(), m});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n)
      throw ArgumentError("gather_rows: index " + std::to_string(idx[r]) + " out of " +
                          std::to_string(n));
    std::copy(a.value().data() + idx[r] * m, a.value().data() + (idx[r] + 1) * m,
              out.data() + r * m);
  }
  const std::size_t ia = a.index();
  return record("gather_rows", std::move(out), needs_grad(a),
                [ia, idx = std::move(idx), m](Tape& t, const Tensor& g) {
                  Tensor ga(t.nodes_[ia].value.shape());
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    double* dst = ga.data() + idx[r] * m;
                    const double* src = g.data() + r * m;
                    for (std::size_t j = 0; j < m; ++j) dst[j] += src[j];
                  }
                  t.accumulate(ia, ga);
                });
}

Var Tape::pick_per_row(Var a, std::vector<std::size_t> cols) {
  check_same_tape(a, "pick_per_row");
  check_rank2(a.value(), "pick_per_row");
  const std::size_t n = a.value().extent(0), m = a.value().extent(1);
  if (cols.size() != n)
    throw ArgumentError("pick_per_row: need one column index per row");
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    if (cols[i] >= m)
      throw ArgumentError("pick_per_row: column " + std::to_string(cols[i]) + " out of " +
                          std::to_string(m));
    out[i] = a.value()[i * m + cols[i]];
  }
  const std::size_t ia = a.index();
  return record("pick_per_row", std::move(out), needs_grad(a),
                [ia, cols = std::move(cols), m](Tape& t, const Tensor& g) {
                  Tensor ga(t.nodes_[ia].value.shape());
                  for (std::size_t i = 0; i < cols.size(); ++i) ga[i * m + cols[i]] = g[i];
                  t.accumulate(ia, ga);
                });
}

Var Tape::mean_pool_rows(Var a, std::size_t group) {
  check_same_tape(a, "mean_pool_rows");
  check_rank2(a.value(), "mean_pool_rows");
  const std::size_t n = a.value().extent(0), m = a.value().extent(1);
  if (group == 0 || n % group != 0)
    throw ArgumentError("mean_pool_rows: " + std::to_string(n) + " rows not divisible by group " +
                        std::to_string(group));
  const std::size_t out_n = n / group;
  Tensor out({out_n, m});
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t i = 0; i < out_n; ++i) {
    double* orow = out.data() + i * m;
    for (std::size_t k = 0; k < group; ++k) {
      const double* row = a.value().data() + (i * group + k) * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) orow[j] *= inv;
  }
  const std::size_t ia = a.index();
  return record("mean_pool_rows", std::move(out), needs_grad(a),
                [ia, group, m, inv](Tape& t, const Tensor& g) {
                  Tensor ga(t.nodes_[ia].value.shape());
                  const std::size_t out_n = g.size() / m;
                  for (std::size_t i = 0; i < out_n; ++i)
                    for (std::size_t k = 0; k < group; ++k) {
                      double* dst = ga.data() + (i * group + k) * m;
                      const double* src = g.data() + i * m;
                      for (std::size_t j = 0; j < m; ++j) dst[j] += src[j] * inv;
                    }
                  t.accumulate(ia, ga);
                });
}

GradientMap grad(const TapeObjective& objective, const ParameterSet& params) {
  Tape tape;
  ParamVars pv;
  for (const auto& [name, value] : params) pv.vars.emplace(name, tape.leaf(value, true));
  Var out = objective(tape, pv);
  if (out.value().size() != 1)
    throw ArgumentError("grad: objective must evaluate to a scalar");
  tape.backward(out);
  GradientMap g;
  for (const auto& [name, var] : pv.vars) g.emplace(name, tape.grad_of(var));
  return g;
}

double eval_objective(const TapeObjective& objective, const ParameterSet& params) {
  Tape tape;
  ParamVars pv;
  for (const auto& [name, value] : params) pv.vars.emplace(name, tape.leaf(value, true));
  return objective(tape, pv).value().item();
}

GradientMap finite_diff_grad(const ScalarObjective& f, const ParameterSet& params, double step) {
  if (!(step > 0.0)) throw ArgumentError("finite_diff_grad: step must be positive");
  ParameterSet work = params;
  GradientMap g;
  for (auto& [name, tensor] : work) {
    Tensor gt(tensor.shape());
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const double orig = tensor[i];
      tensor[i] = orig + step;
      const double fp = f(work);
      tensor[i] = orig - step;
      const double fm = f(work);
      tensor[i] = orig;
      gt[i] = (fp - fm) / (2.0 * step);
    }
    g.emplace(name, std::move(gt));
  }
  return g;
}

GradientMap finite_diff_grad(const TapeObjective& objective, const ParameterSet& params,
                             double step) {
  return finite_diff_grad(
      [&objective](const ParameterSet& p) { return eval_objective(objective, p); }, params, step);
}

}  // namespace camib
