#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "camib/attention.hpp"
#include "camib/errors.hpp"
#include "camib/gradient_checks.hpp"
#include "camib/rng.hpp"
#include "camib/tensor.hpp"
#include "test_util.hpp"

using namespace camib;
using namespace camib::testutil;

namespace {

// Central-difference Jacobian of softmax for one score row, step 1e-4.
Tensor softmax_jacobian_fd(const Tensor& scores_row) {
  const std::size_t n = scores_row.size();
  const double h = 1e-4;
  Tensor jac({n, n});
  for (std::size_t j = 0; j < n; ++j) {
    Tensor plus = scores_row.reshaped({1, n});
    Tensor minus = scores_row.reshaped({1, n});
    plus[j] += h;
    minus[j] -= h;
    Tensor ap = softmax_rows(plus);
    Tensor am = softmax_rows(minus);
    for (std::size_t m = 0; m < n; ++m) jac.at2(m, j) = (ap[m] - am[m]) / (2.0 * h);
  }
  return jac;
}

}  // namespace

TEST_CASE("softmax jacobian on reference rows") {
  Tensor uniform({2});
  uniform[0] = 0.5;
  uniform[1] = 0.5;
  Tensor jac = softmax_jacobian(uniform);
  CHECK(jac.at2(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(jac.at2(0, 1) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(jac.at2(1, 0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(jac.at2(1, 1) == doctest::Approx(0.25).epsilon(1e-12));

  Tensor onehot({3});
  onehot[1] = 1.0;
  Tensor jac1 = softmax_jacobian(onehot);
  CHECK(max_abs(jac1) == 0.0);
}

TEST_CASE("softmax jacobian matches finite differences on a random row") {
  RngStream rng(411);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor scores({5});
    for (std::size_t j = 0; j < 5; ++j) scores[j] = rng.uniform(-2.0, 2.0);
    Tensor alpha_mat = softmax_rows(scores.reshaped({1, 5}));
    Tensor alpha = alpha_mat.reshaped({5});
    Tensor analytic = softmax_jacobian(alpha);
    Tensor fd = softmax_jacobian_fd(scores);
    CHECK(max_abs_diff(analytic, fd) <= 1e-6);
  }
}

TEST_CASE("transposed jacobian rows sum to zero") {
  RngStream rng(412);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(6);
    Tensor scores({1, n});
    for (std::size_t j = 0; j < n; ++j) scores[j] = rng.uniform(-3.0, 3.0);
    Tensor alpha = softmax_rows(scores).reshaped({n});
    Tensor jac = softmax_jacobian(alpha);
    for (std::size_t j = 0; j < n; ++j) {
      double col_sum = 0.0;
      for (std::size_t m = 0; m < n; ++m) col_sum += jac.at2(m, j);
      CHECK(std::abs(col_sum) <= 1e-14);
    }
  }
}

TEST_CASE("softmax jacobian rejects non-probability rows") {
  Tensor bad({2});
  bad[0] = 0.5;
  bad[1] = 0.6;
  CHECK_THROWS_AS(softmax_jacobian(bad), ArgumentError);
  Tensor neg({2});
  neg[0] = 1.5;
  neg[1] = -0.5;
  CHECK_THROWS_AS(softmax_jacobian(neg), ArgumentError);
}

TEST_CASE("attended-vector sensitivity on reference cases") {
  SUBCASE("single token has zero sensitivity") {
    Tensor alpha({1});
    alpha[0] = 1.0;
    Tensor values({1, 3});
    values[0] = 0.3;
    values[1] = -0.7;
    values[2] = 2.0;
    Tensor vhat = values.reshaped({3});
    Tensor out = dvhat_ds(alpha, values, vhat);
    CHECK(max_abs(out) == 0.0);
  }
  SUBCASE("two opposite tokens under uniform weights") {
    Tensor alpha({2});
    alpha[0] = 0.5;
    alpha[1] = 0.5;
    Tensor values({2, 2});
    values.at2(0, 0) = 1.0;
    values.at2(0, 1) = -2.0;
    values.at2(1, 0) = -1.0;
    values.at2(1, 1) = 2.0;
    Tensor vhat({2});  // the two tokens cancel
    Tensor out = dvhat_ds(alpha, values, vhat);
    CHECK(out.at2(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.at2(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(out.at2(1, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(out.at2(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("inconsistent attended vector is rejected") {
    Tensor alpha({2});
    alpha[0] = 0.5;
    alpha[1] = 0.5;
    Tensor values({2, 1});
    values[0] = 1.0;
    values[1] = 3.0;
    Tensor wrong({1});
    wrong[0] = 1.0;  // true attended value is 2.0
    CHECK_THROWS_AS(dvhat_ds(alpha, values, wrong), ArgumentError);
  }
}

TEST_CASE("loss-to-score gradient on reference cases") {
  Tensor alpha({2});
  alpha[0] = 0.25;
  alpha[1] = 0.75;
  Tensor values({2, 2});
  values.at2(0, 0) = 1.0;
  values.at2(0, 1) = 0.0;
  values.at2(1, 0) = 0.0;
  values.at2(1, 1) = 1.0;
  Tensor vhat({2});
  vhat[0] = 0.25;
  vhat[1] = 0.75;

  SUBCASE("zero upstream gives zero gradient") {
    Tensor upstream({2});
    Tensor out = dl_ds(upstream, alpha, values, vhat);
    CHECK(max_abs(out) == 0.0);
  }
  SUBCASE("upstream orthogonal to every residual gives zero gradient") {
    // v_j - vhat is proportional to (1, -1) for both tokens here.
    Tensor upstream({2});
    upstream[0] = 1.0;
    upstream[1] = 1.0;
    Tensor out = dl_ds(upstream, alpha, values, vhat);
    CHECK(max_abs(out) <= 1e-15);
  }
  SUBCASE("hand-computed entries") {
    Tensor upstream({2});
    upstream[0] = 2.0;
    upstream[1] = 0.0;
    // entry j = alpha_j * upstream . (v_j - vhat)
    Tensor out = dl_ds(upstream, alpha, values, vhat);
    CHECK(out[0] == doctest::Approx(0.25 * 2.0 * 0.75).epsilon(1e-12));
    CHECK(out[1] == doctest::Approx(0.75 * 2.0 * -0.25).epsilon(1e-12));
  }
  SUBCASE("width mismatch is rejected") {
    Tensor upstream({3});
    CHECK_THROWS_AS(dl_ds(upstream, alpha, values, vhat), ArgumentError);
  }
}

TEST_CASE("score gradients with respect to projections") {
  RngStream rng(413);
  const std::size_t d = 4;
  AttentionParams params;
  params.Wq = random_tensor(rng, {d, d}, -1.0, 1.0);
  params.Wk = random_tensor(rng, {d, d}, -1.0, 1.0);
  params.Wv = random_tensor(rng, {d, d}, -1.0, 1.0);

  SUBCASE("zero query token kills the Wq gradient") {
    Tensor zi({d});
    Tensor zj = random_tensor(rng, {d}, -1.0, 1.0);
    ScoreWeightGradients g = score_weight_gradients(zi, zj, params);
    CHECK(max_abs(g.dWq) == 0.0);
    CHECK(max_abs(g.dWv) == 0.0);
  }
  SUBCASE("value projection gradient is identically zero") {
    Tensor zi = random_tensor(rng, {d}, -1.0, 1.0);
    Tensor zj = random_tensor(rng, {d}, -1.0, 1.0);
    ScoreWeightGradients g = score_weight_gradients(zi, zj, params);
    CHECK(max_abs(g.dWv) == 0.0);
  }
  SUBCASE("outer-product structure against a direct score evaluation") {
    Tensor zi = random_tensor(rng, {d}, -1.0, 1.0);
    Tensor zj = random_tensor(rng, {d}, -1.0, 1.0);
    ScoreWeightGradients g = score_weight_gradients(zi, zj, params);
    const double h = 1e-5;
    auto score = [&](const AttentionParams& pp) {
      Tensor z({2, d});
      for (std::size_t a = 0; a < d; ++a) {
        z.at2(0, a) = zi[a];
        z.at2(1, a) = zj[a];
      }
      return attention_scores(z, pp).at2(0, 1);
    };
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        AttentionParams plus = params, minus = params;
        plus.Wq.at2(a, b) += h;
        minus.Wq.at2(a, b) -= h;
        CHECK(rel_err(g.dWq.at2(a, b), (score(plus) - score(minus)) / (2.0 * h)) <= 1e-7);
        plus = params;
        minus = params;
        plus.Wk.at2(a, b) += h;
        minus.Wk.at2(a, b) -= h;
        CHECK(rel_err(g.dWk.at2(a, b), (score(plus) - score(minus)) / (2.0 * h)) <= 1e-7);
      }
  }
  SUBCASE("token width mismatch is rejected") {
    Tensor zi({d});
    Tensor zj({d + 1});
    CHECK_THROWS_AS(score_weight_gradients(zi, zj, params), ArgumentError);
  }
}

TEST_CASE("entropy identity for the uniformity objective") {
  SUBCASE("uniform distribution gives zero on both sides") {
    Tensor p({4});
    for (std::size_t j = 0; j < 4; ++j) p[j] = 0.25;
    KlUniformPair pair = kl_uniform_identity(p, 4);
    CHECK(std::abs(pair.kl) <= 1e-15);
    CHECK(std::abs(pair.logk_minus_h) <= 1e-15);
  }
  SUBCASE("two-class reference value") {
    Tensor p({2});
    p[0] = 0.9;
    p[1] = 0.1;
    KlUniformPair pair = kl_uniform_identity(p, 2);
    const double direct = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
    CHECK(pair.kl == doctest::Approx(direct).epsilon(1e-12));
    CHECK(pair.kl == doctest::Approx(0.36806).epsilon(1e-4));
    CHECK(std::abs(pair.kl - pair.logk_minus_h) <= 1e-12);
  }
  SUBCASE("one-hot distribution gives log K exactly") {
    Tensor p({4});
    p[2] = 1.0;
    KlUniformPair pair = kl_uniform_identity(p, 4);
    CHECK(pair.kl == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    CHECK(pair.logk_minus_h == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  }
  SUBCASE("identity holds across random distributions") {
    RngStream rng(414);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t k = 2 + rng.uniform_below(9);
      Tensor logits = random_tensor(rng, {1, k}, -5.0, 5.0);
      Tensor p = softmax_rows(logits).reshaped({k});
      KlUniformPair pair = kl_uniform_identity(p, k);
      CHECK(std::abs(pair.kl - pair.logk_minus_h) <= 1e-10);
    }
  }
  SUBCASE("invalid inputs are rejected") {
    Tensor p({3});
    p[0] = 0.5;
    p[1] = 0.5;
    CHECK_THROWS_AS(kl_uniform_identity(p, 2), ArgumentError);  // length mismatch
    Tensor unnorm({3});
    unnorm[0] = 0.5;
    unnorm[1] = 0.6;
    unnorm[2] = 0.2;
    CHECK_THROWS_AS(kl_uniform_identity(unnorm, 3), ArgumentError);
    Tensor one({1});
    one[0] = 1.0;
    CHECK_THROWS_AS(kl_uniform_identity(one, 1), ArgumentError);  // too few classes
    Tensor neg({2});
    neg[0] = 1.5;
    neg[1] = -0.5;
    CHECK_THROWS_AS(kl_uniform_identity(neg, 2), ArgumentError);
  }
}

TEST_CASE("full verification sweep passes at the default settings") {
  VerifyConfig cfg;
  VerificationReport report = verify_all(cfg);
  REQUIRE(report.checks.size() == 7);
  const std::vector<std::string> expected = {
      "softmax_jacobian", "dvhat_ds", "dl_ds", "dscore_dWq", "dscore_dWk",
      "dscore_dWv",       "kl_uniform"};
  for (std::size_t c = 0; c < expected.size(); ++c) {
    CHECK(report.checks[c].name == expected[c]);
    CHECK(report.checks[c].instances == 100);
    CHECK_MESSAGE(report.checks[c].pass, report.checks[c].name,
                  " max_rel_err=", report.checks[c].max_rel_err);
  }
  CHECK(report.all_pass());
  CHECK(report.to_text().find("overall: pass") != std::string::npos);
}

TEST_CASE("verification report bytes are deterministic for a fixed seed") {
  VerifyConfig cfg;
  cfg.instances = 20;
  VerificationReport a = verify_all(cfg);
  VerificationReport b = verify_all(cfg);
  CHECK(a.to_text() == b.to_text());
  REQUIRE(a.checks.size() == b.checks.size());
  for (std::size_t c = 0; c < a.checks.size(); ++c) {
    CHECK(a.checks[c].max_abs_err == b.checks[c].max_abs_err);
    CHECK(a.checks[c].max_rel_err == b.checks[c].max_rel_err);
  }
}

TEST_CASE("mutation mode flags exactly the corrupted check") {
  VerifyConfig cfg;
  cfg.instances = 25;
  cfg.mutate = true;
  VerificationReport report = verify_all(cfg);
  REQUIRE(report.checks.size() == 7);
  for (const CheckResult& c : report.checks) {
    if (c.name == "dvhat_ds")
      CHECK_FALSE(c.pass);
    else
      CHECK_MESSAGE(c.pass, c.name, " unexpectedly failed under mutation");
  }
  CHECK_FALSE(report.all_pass());
  CHECK(report.to_text().find("FAIL") != std::string::npos);
}

TEST_CASE("verification sweep rejects empty or degenerate configs") {
  VerifyConfig cfg;
  cfg.instances = 0;
  CHECK_THROWS_AS(verify_all(cfg), ArgumentError);
  VerifyConfig cfg2;
  cfg2.tolerance = 0.0;
  CHECK_THROWS_AS(verify_all(cfg2), ArgumentError);
}
