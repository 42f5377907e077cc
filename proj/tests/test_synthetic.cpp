#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "camib/errors.hpp"
#include "camib/synthetic.hpp"
#include "camib/tensor.hpp"
#include "test_util.hpp"

using namespace camib;
using namespace camib::testutil;

namespace {

BiasSpec tiny_spec() {
  BiasSpec spec;
  spec.n_train = 40;
  spec.n_eval = 16;
  spec.modalities = 2;
  spec.seq_len = 3;
  spec.input_dim = 6;
  spec.num_classes = 2;
  spec.seed = 99;
  return spec;
}

bool splits_identical(const ModalitySplit& a, const ModalitySplit& b) {
  if (a.batch != b.batch || a.seq_len != b.seq_len) return false;
  if (a.features.size() != b.features.size()) return false;
  for (std::size_t m = 0; m < a.features.size(); ++m)
    if (max_abs_diff(a.features[m], b.features[m]) != 0.0) return false;
  if (a.labels.classes != b.labels.classes) return false;
  if (a.labels.values != b.labels.values) return false;
  if (max_abs_diff(a.causal_factor, b.causal_factor) != 0.0) return false;
  if (max_abs_diff(a.shortcut_factor, b.shortcut_factor) != 0.0) return false;
  return true;
}

double match_fraction(const ModalitySplit& split) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < split.batch; ++i)
    if (split.causal_factor[i] == split.shortcut_factor[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(split.batch);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("spec validation rejects each broken invariant") {
  BiasSpec spec = tiny_spec();
  CHECK_NOTHROW(spec.validate());

  BiasSpec bad = spec;
  bad.rho_train = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.rho_test = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.causal_snr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.shortcut_snr = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.noise_sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.num_classes = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.num_classes = 5;  // one-hot blocks need 10 features, input_dim is 6
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.n_train = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.modalities = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.task_kind = TaskKind::regression;
  bad.input_dim = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("generated splits have the contracted shapes") {
  BiasSpec spec = tiny_spec();
  SyntheticDataset ds = generate(spec);
  for (const ModalitySplit* split : {&ds.train, &ds.val, &ds.test_id, &ds.test_ood}) {
    const std::size_t n = split == &ds.train ? spec.n_train : spec.n_eval;
    CHECK(split->batch == n);
    CHECK(split->seq_len == spec.seq_len);
    REQUIRE(split->features.size() == spec.modalities);
    for (const Tensor& feats : split->features) {
      CHECK(feats.extent(0) == n * spec.seq_len);
      CHECK(feats.extent(1) == spec.input_dim);
      CHECK(feats.all_finite());
    }
    CHECK(split->labels.size() == n);
    CHECK(split->causal_factor.size() == n);
    CHECK(split->shortcut_factor.size() == n);
  }
}

TEST_CASE("full coupling forces the shortcut to copy the causal factor") {
  BiasSpec spec = tiny_spec();
  spec.rho_train = 1.0;
  spec.n_train = 300;
  SyntheticDataset ds = generate(spec);
  CHECK(match_fraction(ds.train) == 1.0);

  BiasSpec reg = spec;
  reg.task_kind = TaskKind::regression;
  SyntheticDataset rds = generate(reg);
  CHECK(match_fraction(rds.train) == 1.0);
}

TEST_CASE("zero coupling with two classes anti-correlates the factors") {
  BiasSpec spec = tiny_spec();
  spec.rho_test = 0.0;
  spec.n_eval = 200;
  SyntheticDataset ds = generate(spec);
  for (std::size_t i = 0; i < ds.test_ood.batch; ++i)
    CHECK(ds.test_ood.shortcut_factor[i] == 1.0 - ds.test_ood.causal_factor[i]);
}

TEST_CASE("coupling at chance level decorrelates the factors") {
  BiasSpec spec;
  spec.n_train = 10000;
  spec.n_eval = 10;
  spec.modalities = 1;
  spec.seq_len = 1;
  spec.input_dim = 8;
  spec.num_classes = 4;
  spec.rho_train = 0.25;
  spec.seed = 7;
  SyntheticDataset ds = generate(spec);

  const double freq = match_fraction(ds.train);
  const double sd = std::sqrt(0.25 * 0.75 / 10000.0);
  CHECK(std::abs(freq - 0.25) <= 3.0 * sd);

  // Joint counts should be uniform over all 16 (c, s) cells.
  std::vector<std::size_t> joint(16, 0);
  for (std::size_t i = 0; i < ds.train.batch; ++i) {
    const auto c = static_cast<std::size_t>(ds.train.causal_factor[i]);
    const auto s = static_cast<std::size_t>(ds.train.shortcut_factor[i]);
    ++joint[c * 4 + s];
  }
  const double cell_p = 1.0 / 16.0;
  const double cell_sd = std::sqrt(cell_p * (1.0 - cell_p) * 10000.0);
  for (std::size_t cell = 0; cell < 16; ++cell)
    CHECK(std::abs(static_cast<double>(joint[cell]) - 625.0) <= 3.0 * cell_sd);
}

TEST_CASE("empirical coupling matches rho per split") {
  BiasSpec spec = tiny_spec();
  spec.n_train = 4000;
  spec.n_eval = 2000;
  spec.rho_train = 0.9;
  spec.rho_test = 0.1;
  SyntheticDataset ds = generate(spec);
  const double sd_train = std::sqrt(0.9 * 0.1 / 4000.0);
  const double sd_eval = std::sqrt(0.9 * 0.1 / 2000.0);
  CHECK(std::abs(match_fraction(ds.train) - 0.9) <= 3.0 * sd_train);
  CHECK(std::abs(match_fraction(ds.test_id) - 0.9) <= 3.0 * sd_eval);
  CHECK(std::abs(match_fraction(ds.test_ood) - 0.1) <= 3.0 * sd_eval);
}

TEST_CASE("signal blocks carry exactly the designated factors") {
  BiasSpec spec = tiny_spec();
  spec.noise_sigma = 1e-9;
  spec.causal_snr = 1.25;
  spec.shortcut_snr = 2.5;
  SyntheticDataset ds = generate(spec);
  const FeatureBlocks blocks = feature_blocks(spec);
  CHECK(blocks.causal_begin == 0);
  CHECK(blocks.causal_end == 2);
  CHECK(blocks.shortcut_begin == 2);
  CHECK(blocks.shortcut_end == 4);
  for (std::size_t i = 0; i < ds.train.batch; ++i) {
    const auto c = static_cast<std::size_t>(ds.train.causal_factor[i]);
    const auto s = static_cast<std::size_t>(ds.train.shortcut_factor[i]);
    for (std::size_t m = 0; m < spec.modalities; ++m) {
      const std::size_t causal_t = causal_token_position(spec, m);
      for (std::size_t t = 0; t < spec.seq_len; ++t) {
        const std::size_t row = i * spec.seq_len + t;
        for (std::size_t f = 0; f < spec.input_dim; ++f) {
          double expected = 0.0;
          // The causal one-hot appears only at the modality's designated
          // token; the shortcut one-hot repeats at every position.
          if (f == blocks.causal_begin + c && t == causal_t) expected = 1.25;
          if (f == blocks.shortcut_begin + s) expected = 2.5;
          CHECK(std::abs(ds.train.features[m].at2(row, f) - expected) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("regression embeds scaled scalar factors and near-noiseless labels") {
  BiasSpec spec = tiny_spec();
  spec.task_kind = TaskKind::regression;
  spec.noise_sigma = 1e-9;
  spec.causal_snr = 0.5;
  spec.shortcut_snr = 2.0;
  SyntheticDataset ds = generate(spec);
  for (std::size_t i = 0; i < ds.train.batch; ++i) {
    const double c = ds.train.causal_factor[i];
    const double s = ds.train.shortcut_factor[i];
    CHECK(c >= -3.0);
    CHECK(c <= 3.0);
    CHECK(std::abs(ds.train.labels.values[i] - c) <= 1e-8);
    const std::size_t row = i * spec.seq_len;
    CHECK(std::abs(ds.train.features[0].at2(row, 0) - 0.5 * c) <= 1e-6);
    CHECK(std::abs(ds.train.features[0].at2(row, 1) - 2.0 * s) <= 1e-6);
  }
}

TEST_CASE("classification labels equal the causal factor exactly") {
  BiasSpec spec = tiny_spec();
  SyntheticDataset ds = generate(spec);
  for (std::size_t i = 0; i < ds.train.batch; ++i)
    CHECK(static_cast<double>(ds.train.labels.classes[i]) == ds.train.causal_factor[i]);
}

TEST_CASE("regeneration with the same spec is bit-identical") {
  BiasSpec spec = tiny_spec();
  SyntheticDataset a = generate(spec);
  SyntheticDataset b = generate(spec);
  CHECK(splits_identical(a.train, b.train));
  CHECK(splits_identical(a.val, b.val));
  CHECK(splits_identical(a.test_id, b.test_id));
  CHECK(splits_identical(a.test_ood, b.test_ood));
}

TEST_CASE("ood shift changes only the out-of-distribution split") {
  BiasSpec base = tiny_spec();
  base.n_eval = 500;
  SyntheticDataset original = generate(base);
  BiasSpec shifted = ood_shift(base, 0.4);
  CHECK(shifted.rho_test == 0.4);
  CHECK(shifted.seed == base.seed);
  SyntheticDataset moved = generate(shifted);
  CHECK(splits_identical(original.train, moved.train));
  CHECK(splits_identical(original.val, moved.val));
  CHECK(splits_identical(original.test_id, moved.test_id));
  CHECK_FALSE(splits_identical(original.test_ood, moved.test_ood));

  // Shifting to the training coupling makes the OOD split statistically
  // like the ID split.
  SyntheticDataset flat = generate(ood_shift(base, base.rho_train));
  const double sd = std::sqrt(0.9 * 0.1 / 500.0);
  CHECK(std::abs(match_fraction(flat.test_ood) - match_fraction(flat.test_id)) <= 6.0 * sd);

  CHECK_THROWS_AS(ood_shift(base, 1.2), ConfigError);
}

TEST_CASE("shortcut probe calibration on the default bias configuration") {
  BiasSpec spec;  // defaults: rho 0.9/0.1, snr 4.6/1.0, noise 1.0, K=2
  spec.seed = 2024;
  SyntheticDataset ds = generate(spec);

  ProbeResult shortcut = linear_probe(ds, ProbeBlock::shortcut);
  CHECK(shortcut.id_accuracy >= 0.85);
  CHECK(shortcut.ood_accuracy <= 0.20);

  ProbeResult causal = linear_probe(ds, ProbeBlock::causal);
  CHECK(causal.id_accuracy >= 0.90);
  CHECK(causal.ood_accuracy >= 0.90);
}

TEST_CASE("linear probe rejects regression datasets") {
  BiasSpec spec = tiny_spec();
  spec.task_kind = TaskKind::regression;
  SyntheticDataset ds = generate(spec);
  CHECK_THROWS_AS(linear_probe(ds, ProbeBlock::shortcut), ArgumentError);
}

TEST_CASE("container round-trip preserves every array bit-for-bit") {
  const std::string path = "synthetic_roundtrip.camib";
  BiasSpec spec = tiny_spec();
  SUBCASE("classification") {}
  SUBCASE("regression") { spec.task_kind = TaskKind::regression; }
  SyntheticDataset ds = generate(spec);
  save_dataset(path, ds);
  SyntheticDataset back = load_dataset(path);
  CHECK(back.spec.n_train == spec.n_train);
  CHECK(back.spec.task_kind == spec.task_kind);
  CHECK(back.spec.rho_train == spec.rho_train);
  CHECK(back.spec.seed == spec.seed);
  CHECK(splits_identical(ds.train, back.train));
  CHECK(splits_identical(ds.val, back.val));
  CHECK(splits_identical(ds.test_id, back.test_id));
  CHECK(splits_identical(ds.test_ood, back.test_ood));
  std::remove(path.c_str());
}

TEST_CASE("container writes are byte-deterministic") {
  BiasSpec spec = tiny_spec();
  SyntheticDataset ds = generate(spec);
  save_dataset("synthetic_a.camib", ds);
  save_dataset("synthetic_b.camib", generate(spec));
  CHECK(slurp("synthetic_a.camib") == slurp("synthetic_b.camib"));
  std::remove("synthetic_a.camib");
  std::remove("synthetic_b.camib");
}

TEST_CASE("container loading rejects malformed files") {
  CHECK_THROWS_AS(load_dataset("does_not_exist.camib"), IoError);

  {
    std::ofstream out("bad_header.camib", std::ios::binary);
    out << "this is not json\n";
  }
  CHECK_THROWS_AS(load_dataset("bad_header.camib"), IoError);
  std::remove("bad_header.camib");

  {
    std::ofstream out("wrong_format.camib", std::ios::binary);
    out << "{\"format\":\"something-else\",\"version\":1}\n";
  }
  CHECK_THROWS_AS(load_dataset("wrong_format.camib"), IoError);
  std::remove("wrong_format.camib");

  BiasSpec spec = tiny_spec();
  SyntheticDataset ds = generate(spec);
  save_dataset("truncate_me.camib", ds);
  std::string bytes = slurp("truncate_me.camib");
  {
    std::ofstream out("truncate_me.camib", std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_dataset("truncate_me.camib"), IoError);
  std::remove("truncate_me.camib");

  save_dataset("trailing.camib", ds);
  {
    std::ofstream out("trailing.camib", std::ios::binary | std::ios::app);
    out << "x";
  }
  CHECK_THROWS_AS(load_dataset("trailing.camib"), IoError);
  std::remove("trailing.camib");
}
