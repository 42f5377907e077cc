#include "camib/gradient_checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "camib/autograd.hpp"
#include "camib/errors.hpp"
#include "camib/rng.hpp"

namespace camib {

namespace {

void check_probability_vector(const Tensor& p, const char* who) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0) throw ArgumentError(std::string(who) + ": negative probability entry");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-8)
    throw ArgumentError(std::string(who) + ": probabilities sum to " + std::to_string(sum));
}

void check_attended_consistency(const Tensor& alpha_row, const Tensor& values,
                                const Tensor& v_hat, const char* who) {
  check_rank2(values, who);
  const std::size_t n = values.extent(0), d = values.extent(1);
  if (alpha_row.size() != n)
    throw ArgumentError(std::string(who) + ": weight count does not match value rows");
  if (v_hat.size() != d)
    throw ArgumentError(std::string(who) + ": attended vector width mismatch");
  check_probability_vector(alpha_row, who);
  for (std::size_t a = 0; a < d; ++a) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += alpha_row[j] * values.at2(j, a);
    if (std::abs(acc - v_hat[a]) > 1e-10)
      throw ArgumentError(std::string(who) +
                          ": attended vector inconsistent with weights and values");
  }
}

struct ErrorStats {
  double max_abs = 0.0;
  double max_rel = 0.0;

  void add(double a, double b) {
    const double abs_err = std::abs(a - b);
    max_abs = std::max(max_abs, abs_err);
    max_rel = std::max(max_rel, abs_err / std::max({1.0, std::abs(a), std::abs(b)}));
  }

  void add(const Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) add(a[i], b[i]);
  }
};

Tensor random_uniform(RngStream& rng, std::vector<std::size_t> shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

struct Instance {
  std::size_t modalities, seq_len, width, tokens;
  Tensor z;
  AttentionParams params;
  AttentionTrace trace;
};

Instance draw_instance(RngStream& rng) {
  Instance inst;
  inst.modalities = 1 + rng.uniform_below(3);
  inst.seq_len = 1 + rng.uniform_below(4);
  inst.width = std::size_t{2} << rng.uniform_below(3);  // 2, 4, or 8
  inst.tokens = inst.modalities * inst.seq_len;
  inst.z = random_uniform(rng, {inst.tokens, inst.width}, -1.5, 1.5);
  inst.params.Wq = random_uniform(rng, {inst.width, inst.width}, -1.0, 1.0);
  inst.params.Wk = random_uniform(rng, {inst.width, inst.width}, -1.0, 1.0);
  inst.params.Wv = random_uniform(rng, {inst.width, inst.width}, -1.0, 1.0);
  inst.trace = attention_trace(inst.z, inst.params);
  return inst;
}

Tensor row_of(const Tensor& m, std::size_t i) {
  const std::size_t cols = m.extent(1);
  Tensor r({cols});
  for (std::size_t j = 0; j < cols; ++j) r[j] = m.at2(i, j);
  return r;
}

CheckResult finish(std::string name, std::size_t instances, const ErrorStats& err, double tol) {
  CheckResult r;
  r.name = std::move(name);
  r.instances = instances;
  r.max_abs_err = err.max_abs;
  r.max_rel_err = err.max_rel;
  r.tolerance = tol;
  r.pass = err.max_rel <= tol;
  return r;
}

}  // namespace

Tensor softmax_jacobian(const Tensor& alpha_row) {
  check_probability_vector(alpha_row, "softmax_jacobian");
  const std::size_t n = alpha_row.size();
  Tensor jac({n, n});
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t j = 0; j < n; ++j)
      jac.at2(m, j) = alpha_row[m] * ((m == j ? 1.0 : 0.0) - alpha_row[j]);
  return jac;
}

Tensor dvhat_ds(const Tensor& alpha_row, const Tensor& values, const Tensor& v_hat) {
  check_attended_consistency(alpha_row, values, v_hat, "dvhat_ds");
  const std::size_t n = values.extent(0), d = values.extent(1);
  Tensor out({n, d});
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t a = 0; a < d; ++a)
      out.at2(j, a) = alpha_row[j] * (values.at2(j, a) - v_hat[a]);
  return out;
}

Tensor dl_ds(const Tensor& upstream, const Tensor& alpha_row, const Tensor& values,
             const Tensor& v_hat) {
  check_attended_consistency(alpha_row, values, v_hat, "dl_ds");
  const std::size_t n = values.extent(0), d = values.extent(1);
  if (upstream.size() != d) throw ArgumentError("dl_ds: upstream width mismatch");
  Tensor out({n});
  for (std::size_t j = 0; j < n; ++j) {
    double dot = 0.0;
    for (std::size_t a = 0; a < d; ++a) dot += upstream[a] * (values.at2(j, a) - v_hat[a]);
    out[j] = alpha_row[j] * dot;
  }
  return out;
}

ScoreWeightGradients score_weight_gradients(const Tensor& z_i, const Tensor& z_j,
                                            const AttentionParams& params) {
  const std::size_t d = z_i.size();
  if (z_j.size() != d) throw ArgumentError("score_weight_gradients: token width mismatch");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor q({d}), k({d});
  for (std::size_t b = 0; b < d; ++b) {
    double qa = 0.0, ka = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      qa += z_i[a] * params.Wq.at2(a, b);
      ka += z_j[a] * params.Wk.at2(a, b);
    }
    q[b] = qa;
    k[b] = ka;
  }
  ScoreWeightGradients g;
  g.dWq = Tensor({d, d});
  g.dWk = Tensor({d, d});
  g.dWv = Tensor({d, d});
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      g.dWq.at2(a, b) = z_i[a] * k[b] * inv_sqrt_d;
      g.dWk.at2(a, b) = z_j[a] * q[b] * inv_sqrt_d;
    }
  return g;
}

KlUniformPair kl_uniform_identity(const Tensor& p, std::size_t num_classes) {
  if (num_classes < 2) throw ArgumentError("kl_uniform_identity: need at least 2 classes");
  if (p.size() != num_classes)
    throw ArgumentError("kl_uniform_identity: vector length does not match class count");
  check_probability_vector(p, "kl_uniform_identity");
  const double log_k = std::log(static_cast<double>(num_classes));
  double kl = 0.0, entropy = 0.0;
  for (std::size_t j = 0; j < num_classes; ++j) {
    if (p[j] > 0.0) {
      kl += p[j] * std::log(static_cast<double>(num_classes) * p[j]);
      entropy -= p[j] * std::log(p[j]);
    }
  }
  return {kl, log_k - entropy};
}

bool VerificationReport::all_pass() const {
  for (const CheckResult& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

std::string VerificationReport::to_text() const {
  std::string out;
  char line[192];
  std::snprintf(line, sizeof(line), "gradient verification  seed=%llu  instances=%zu\n",
                static_cast<unsigned long long>(seed), instances);
  out += line;
  std::snprintf(line, sizeof(line), "%-18s %10s %14s %14s %10s %7s\n", "check", "instances",
                "max_abs_err", "max_rel_err", "tolerance", "status");
  out += line;
  for (const CheckResult& c : checks) {
    std::snprintf(line, sizeof(line), "%-18s %10zu %14.6e %14.6e %10.1e %7s\n", c.name.c_str(),
                  c.instances, c.max_abs_err, c.max_rel_err, c.tolerance,
                  c.pass ? "pass" : "FAIL");
    out += line;
  }
  out += all_pass() ? "overall: pass\n" : "overall: FAIL\n";
  return out;
}

VerificationReport verify_all(const VerifyConfig& cfg) {
  if (cfg.instances == 0) throw ArgumentError("verification needs at least 1 instance");
  if (!(cfg.tolerance > 0.0)) throw ArgumentError("verification tolerance must be positive");
  RngStream root(cfg.seed);
  VerificationReport report;
  report.instances = cfg.instances;
  report.seed = cfg.seed;
  const double fd_step = 1e-4;

  // Softmax Jacobian of one attention row against reverse-mode and central
  // finite differences.
  {
    RngStream rng = root.split("softmax_jacobian");
    ErrorStats err;
    for (std::size_t it = 0; it < cfg.instances; ++it) {
      Instance inst = draw_instance(rng);
      const std::size_t i = rng.uniform_below(inst.tokens);
      const std::size_t n = inst.tokens;
      Tensor alpha = row_of(inst.trace.weights, i);
      Tensor analytic = softmax_jacobian(alpha);
      Tensor srow({1, n});
      for (std::size_t j = 0; j < n; ++j) srow.at2(0, j) = inst.trace.scores.at2(i, j);
      for (std::size_t m = 0; m < n; ++m) {
        ParameterSet params{{"s", srow}};
        TapeObjective pick_m = [m](Tape& t, const ParamVars& p) {
          return t.sum(t.pick_per_row(t.softmax_rows(p.at("s")), {m}));
        };
        GradientMap reverse = grad(pick_m, params);
        GradientMap fd = finite_diff_grad(pick_m, params, fd_step);
        for (std::size_t j = 0; j < n; ++j) {
          err.add(analytic.at2(m, j), reverse.at("s")[j]);
          err.add(analytic.at2(m, j), fd.at("s")[j]);
        }
      }
    }
    report.checks.push_back(finish("softmax_jacobian", cfg.instances, err, cfg.tolerance));
  }

  // Sensitivity of one attended vector to its own score row.
  {
    RngStream rng = root.split("dvhat_ds");
    ErrorStats err;
    for (std::size_t it = 0; it < cfg.instances; ++it) {
      Instance inst = draw_instance(rng);
      const std::size_t i = rng.uniform_below(inst.tokens);
      const std::size_t n = inst.tokens, d = inst.width;
      Tensor alpha = row_of(inst.trace.weights, i);
      Tensor vhat = row_of(inst.trace.attended, i);
      Tensor analytic = dvhat_ds(alpha, inst.trace.values, vhat);
      if (cfg.mutate)
        for (std::size_t x = 0; x < analytic.size(); ++x) analytic[x] = -analytic[x];
      Tensor srow({1, n});
      for (std::size_t j = 0; j < n; ++j) srow.at2(0, j) = inst.trace.scores.at2(i, j);
      const Tensor values = inst.trace.values;
      for (std::size_t a = 0; a < d; ++a) {
        ParameterSet params{{"s", srow}};
        TapeObjective coord_a = [a, &values](Tape& t, const ParamVars& p) {
          Var alpha_row = t.softmax_rows(p.at("s"));
          Var attended = t.matmul(alpha_row, t.constant(values));
          return t.sum(t.pick_per_row(attended, {a}));
        };
        GradientMap reverse = grad(coord_a, params);
        GradientMap fd = finite_diff_grad(coord_a, params, fd_step);
        for (std::size_t j = 0; j < n; ++j) {
          err.add(analytic.at2(j, a), reverse.at("s")[j]);
          err.add(analytic.at2(j, a), fd.at("s")[j]);
        }
      }
    }
    report.checks.push_back(finish("dvhat_ds", cfg.instances, err, cfg.tolerance));
  }

  // Chain rule through the attended vector for a scalar loss.
  {
    RngStream rng = root.split("dl_ds");
    ErrorStats err;
    for (std::size_t it = 0; it < cfg.instances; ++it) {
      Instance inst = draw_instance(rng);
      const std::size_t i = rng.uniform_below(inst.tokens);
      const std::size_t n = inst.tokens;
      Tensor upstream = random_uniform(rng, {inst.width}, -1.0, 1.0);
      Tensor alpha = row_of(inst.trace.weights, i);
      Tensor vhat = row_of(inst.trace.attended, i);
      Tensor analytic = dl_ds(upstream, alpha, inst.trace.values, vhat);
      Tensor srow({1, n});
      for (std::size_t j = 0; j < n; ++j) srow.at2(0, j) = inst.trace.scores.at2(i, j);
      const Tensor values = inst.trace.values;
      Tensor urow = upstream.reshaped({1, inst.width});
      ParameterSet params{{"s", srow}};
      TapeObjective loss = [&values, &urow](Tape& t, const ParamVars& p) {
        Var alpha_row = t.softmax_rows(p.at("s"));
        Var attended = t.matmul(alpha_row, t.constant(values));
        return t.sum(t.mul(attended, t.constant(urow)));
      };
      GradientMap reverse = grad(loss, params);
      GradientMap fd = finite_diff_grad(loss, params, fd_step);
      for (std::size_t j = 0; j < n; ++j) {
        err.add(analytic[j], reverse.at("s")[j]);
        err.add(analytic[j], fd.at("s")[j]);
      }
    }
    report.checks.push_back(finish("dl_ds", cfg.instances, err, cfg.tolerance));
  }

  // One score's derivative with respect to each projection matrix.
  {
    RngStream rng = root.split("score_weights");
    ErrorStats err_q, err_k, err_v;
    for (std::size_t it = 0; it < cfg.instances; ++it) {
      Instance inst = draw_instance(rng);
      const std::size_t i = rng.uniform_below(inst.tokens);
      const std::size_t j = rng.uniform_below(inst.tokens);
      ScoreWeightGradients analytic =
          score_weight_gradients(row_of(inst.z, i), row_of(inst.z, j), inst.params);
      ParameterSet params{{"Wq", inst.params.Wq}, {"Wk", inst.params.Wk},
                          {"Wv", inst.params.Wv}};
      const Tensor z = inst.z;
      TapeObjective score_ij = [&z, i, j](Tape& t, const ParamVars& p) {
        AttentionVars av{p.at("Wq"), p.at("Wk"), p.at("Wv")};
        Var s = attention_scores(t, t.constant(z), av);
        return t.sum(t.pick_per_row(t.slice_rows(s, i, i + 1), {j}));
      };
      GradientMap reverse = grad(score_ij, params);
      GradientMap fd = finite_diff_grad(score_ij, params, fd_step);
      err_q.add(analytic.dWq, reverse.at("Wq"));
      err_q.add(analytic.dWq, fd.at("Wq"));
      err_k.add(analytic.dWk, reverse.at("Wk"));
      err_k.add(analytic.dWk, fd.at("Wk"));
      err_v.add(analytic.dWv, reverse.at("Wv"));
      err_v.add(analytic.dWv, fd.at("Wv"));
    }
    report.checks.push_back(finish("dscore_dWq", cfg.instances, err_q, cfg.tolerance));
    report.checks.push_back(finish("dscore_dWk", cfg.instances, err_k, cfg.tolerance));
    report.checks.push_back(finish("dscore_dWv", cfg.instances, err_v, cfg.tolerance));
  }

  // Entropy identity for the uniformity objective.
  {
    RngStream rng = root.split("kl_uniform");
    ErrorStats err;
    for (std::size_t it = 0; it < cfg.instances; ++it) {
      const std::size_t k = 2 + rng.uniform_below(7);
      Tensor p({k});
      if (it % 10 == 9) {
        p[rng.uniform_below(k)] = 1.0;  // exercise the 0 log 0 convention
      } else {
        Tensor logits = random_uniform(rng, {1, k}, -4.0, 4.0);
        Tensor sm = softmax_rows(logits);
        for (std::size_t x = 0; x < k; ++x) p[x] = sm[x];
      }
      KlUniformPair pair = kl_uniform_identity(p, k);
      err.add(pair.kl, pair.logk_minus_h);
    }
    report.checks.push_back(
        finish("kl_uniform", cfg.instances, err, cfg.identity_tolerance));
  }

  return report;
}

}  // namespace camib
