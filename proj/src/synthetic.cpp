#include "camib/synthetic.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "camib/errors.hpp"

namespace camib {

namespace {

using nlohmann::json;

constexpr double kRegressionRange = 3.0;  // labels live in [-3, 3]

void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little)
    throw IoError("dataset container requires a little-endian host");
}

// Draw order per sample is fixed and documented: causal factor, coupling
// uniform, (shortcut redraw when decoupled), regression label noise, then one
// Gaussian per (modality, token, feature). Bit-identical regeneration relies
// on this order.
ModalitySplit generate_split(const BiasSpec& spec, double rho, std::size_t n, RngStream rng) {
  const std::size_t m_count = spec.modalities, L = spec.seq_len, d = spec.input_dim;
  const FeatureBlocks blocks = feature_blocks(spec);
  ModalitySplit split;
  split.batch = n;
  split.seq_len = L;
  split.causal_factor = Tensor({n});
  split.shortcut_factor = Tensor({n});
  split.labels.kind = spec.task_kind;
  split.labels.num_classes = spec.task_kind == TaskKind::classification ? spec.num_classes : 0;
  split.features.reserve(m_count);
  for (std::size_t m = 0; m < m_count; ++m) split.features.emplace_back(Tensor({n * L, d}));

  for (std::size_t i = 0; i < n; ++i) {
    double c_value = 0.0, s_value = 0.0;
    std::size_t c_class = 0, s_class = 0;
    if (spec.task_kind == TaskKind::classification) {
      c_class = rng.uniform_below(spec.num_classes);
      if (rng.uniform() < rho) {
        s_class = c_class;
      } else {
        const std::size_t other = rng.uniform_below(spec.num_classes - 1);
        s_class = other >= c_class ? other + 1 : other;
      }
      c_value = static_cast<double>(c_class);
      s_value = static_cast<double>(s_class);
      split.labels.classes.push_back(c_class);
    } else {
      c_value = rng.uniform(-kRegressionRange, kRegressionRange);
      s_value = rng.uniform() < rho ? c_value
                                    : rng.uniform(-kRegressionRange, kRegressionRange);
      split.labels.values.push_back(c_value + 0.1 * spec.noise_sigma * rng.normal());
    }
    split.causal_factor[i] = c_value;
    split.shortcut_factor[i] = s_value;

    for (std::size_t m = 0; m < m_count; ++m) {
      Tensor& feats = split.features[m];
      const std::size_t causal_t = causal_token_position(spec, m);
      for (std::size_t t = 0; t < L; ++t) {
        const std::size_t row = i * L + t;
        for (std::size_t f = 0; f < d; ++f)
          feats.at2(row, f) = spec.noise_sigma * rng.normal();
        if (spec.task_kind == TaskKind::classification) {
          if (t == causal_t) feats.at2(row, blocks.causal_begin + c_class) += spec.causal_snr;
          feats.at2(row, blocks.shortcut_begin + s_class) += spec.shortcut_snr;
        } else {
          if (t == causal_t) feats.at2(row, blocks.causal_begin) += spec.causal_snr * c_value;
          feats.at2(row, blocks.shortcut_begin) += spec.shortcut_snr * s_value;
        }
      }
    }
  }
  return split;
}

// Dense linear solve with partial pivoting for the tiny ridge systems
// (block width + bias, at most a dozen unknowns).
Tensor solve_linear(Tensor a, Tensor b) {
  const std::size_t p = a.extent(0), k = b.extent(1);
  for (std::size_t col = 0; col < p; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < p; ++r)
      if (std::abs(a.at2(r, col)) > std::abs(a.at2(pivot, col))) pivot = r;
    if (std::abs(a.at2(pivot, col)) < 1e-12)
      throw NumericError("linear probe normal equations are singular");
    if (pivot != col) {
      for (std::size_t j = 0; j < p; ++j) std::swap(a.at2(col, j), a.at2(pivot, j));
      for (std::size_t j = 0; j < k; ++j) std::swap(b.at2(col, j), b.at2(pivot, j));
    }
    const double inv = 1.0 / a.at2(col, col);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == col) continue;
      const double factor = a.at2(r, col) * inv;
      if (factor == 0.0) continue;
      for (std::size_t j = col; j < p; ++j) a.at2(r, j) -= factor * a.at2(col, j);
      for (std::size_t j = 0; j < k; ++j) b.at2(r, j) -= factor * b.at2(col, j);
    }
  }
  Tensor x({p, k});
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t j = 0; j < k; ++j) x.at2(r, j) = b.at2(r, j) / a.at2(r, r);
  return x;
}

// Per-sample probe input: the selected feature block averaged over all
// modalities and either every token position (shortcut block) or just the
// designated causal position of each modality, plus a bias column. The probe
// is an oracle reader — it knows where the signal lives, so its score
// reflects what the data contains rather than what pooling preserves.
Tensor probe_features(const ModalitySplit& split, const BiasSpec& spec, std::size_t begin,
                      std::size_t end, bool designated_only) {
  const std::size_t n = split.batch, L = split.seq_len, width = end - begin;
  const std::size_t m_count = split.features.size();
  Tensor x({n, width + 1});
  const double scale = 1.0 / static_cast<double>(designated_only ? m_count : m_count * L);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < width; ++b) {
      double acc = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) {
        if (designated_only) {
          acc += split.features[m].at2(i * L + causal_token_position(spec, m), begin + b);
        } else {
          for (std::size_t t = 0; t < L; ++t)
            acc += split.features[m].at2(i * L + t, begin + b);
        }
      }
      x.at2(i, b) = acc * scale;
    }
    x.at2(i, width) = 1.0;
  }
  return x;
}

double probe_split_accuracy(const ModalitySplit& split, const BiasSpec& spec, std::size_t begin,
                            std::size_t end, bool designated_only, const Tensor& w) {
  Tensor x = probe_features(split, spec, begin, end, designated_only);
  Tensor scores = matmul_nn(x, w);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < split.batch; ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.extent(1); ++k)
      if (scores.at2(i, k) > scores.at2(i, best)) best = k;
    if (best == split.labels.classes[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(split.batch);
}

json spec_to_json(const BiasSpec& spec) {
  return json{{"n_train", spec.n_train},
              {"n_eval", spec.n_eval},
              {"modalities", spec.modalities},
              {"seq_len", spec.seq_len},
              {"input_dim", spec.input_dim},
              {"task_kind",
               spec.task_kind == TaskKind::classification ? "classification" : "regression"},
              {"num_classes", spec.num_classes},
              {"rho_train", spec.rho_train},
              {"rho_test", spec.rho_test},
              {"causal_snr", spec.causal_snr},
              {"shortcut_snr", spec.shortcut_snr},
              {"noise_sigma", spec.noise_sigma},
              {"seed", spec.seed}};
}

BiasSpec spec_from_json(const json& j) {
  BiasSpec spec;
  spec.n_train = j.at("n_train").get<std::size_t>();
  spec.n_eval = j.at("n_eval").get<std::size_t>();
  spec.modalities = j.at("modalities").get<std::size_t>();
  spec.seq_len = j.at("seq_len").get<std::size_t>();
  spec.input_dim = j.at("input_dim").get<std::size_t>();
  const std::string kind = j.at("task_kind").get<std::string>();
  if (kind == "classification")
    spec.task_kind = TaskKind::classification;
  else if (kind == "regression")
    spec.task_kind = TaskKind::regression;
  else
    throw IoError("dataset header has unknown task_kind '" + kind + "'");
  spec.num_classes = j.at("num_classes").get<std::size_t>();
  spec.rho_train = j.at("rho_train").get<double>();
  spec.rho_test = j.at("rho_test").get<double>();
  spec.causal_snr = j.at("causal_snr").get<double>();
  spec.shortcut_snr = j.at("shortcut_snr").get<double>();
  spec.noise_sigma = j.at("noise_sigma").get<double>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

void write_doubles(std::ofstream& out, const double* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
}

void read_doubles(std::ifstream& in, double* data, std::size_t count, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
  if (static_cast<std::size_t>(in.gcount()) != count * 8)
    throw IoError(std::string("dataset container truncated while reading ") + what);
}

void write_split(std::ofstream& out, const ModalitySplit& split) {
  for (const Tensor& feats : split.features) write_doubles(out, feats.data(), feats.size());
  if (split.labels.kind == TaskKind::classification) {
    std::vector<double> as_double(split.labels.classes.begin(), split.labels.classes.end());
    write_doubles(out, as_double.data(), as_double.size());
  } else {
    write_doubles(out, split.labels.values.data(), split.labels.values.size());
  }
  write_doubles(out, split.causal_factor.data(), split.causal_factor.size());
  write_doubles(out, split.shortcut_factor.data(), split.shortcut_factor.size());
}

ModalitySplit read_split(std::ifstream& in, const BiasSpec& spec, std::size_t n,
                         const char* name) {
  ModalitySplit split;
  split.batch = n;
  split.seq_len = spec.seq_len;
  for (std::size_t m = 0; m < spec.modalities; ++m) {
    Tensor feats({n * spec.seq_len, spec.input_dim});
    read_doubles(in, feats.data(), feats.size(), name);
    split.features.push_back(std::move(feats));
  }
  std::vector<double> raw_labels(n);
  read_doubles(in, raw_labels.data(), n, name);
  split.labels.kind = spec.task_kind;
  if (spec.task_kind == TaskKind::classification) {
    split.labels.num_classes = spec.num_classes;
    for (double v : raw_labels) {
      const long long cls = std::llround(v);
      if (cls < 0 || static_cast<std::size_t>(cls) >= spec.num_classes)
        throw IoError("dataset container holds an out-of-range class label");
      split.labels.classes.push_back(static_cast<std::size_t>(cls));
    }
  } else {
    split.labels.values = std::move(raw_labels);
  }
  split.causal_factor = Tensor({n});
  read_doubles(in, split.causal_factor.data(), n, name);
  split.shortcut_factor = Tensor({n});
  read_doubles(in, split.shortcut_factor.data(), n, name);
  return split;
}

}  // namespace

void BiasSpec::validate() const {
  if (n_train == 0 || n_eval == 0) throw ConfigError("bias spec needs non-empty splits");
  if (modalities == 0) throw ConfigError("bias spec needs at least one modality");
  if (seq_len == 0) throw ConfigError("bias spec needs at least one token position");
  if (rho_train < 0.0 || rho_train > 1.0 || rho_test < 0.0 || rho_test > 1.0)
    throw ConfigError("coupling probabilities must lie in [0, 1]");
  if (!(causal_snr > 0.0) || !(shortcut_snr > 0.0))
    throw ConfigError("signal-to-noise ratios must be positive");
  if (!(noise_sigma > 0.0)) throw ConfigError("noise sigma must be positive");
  if (task_kind == TaskKind::classification) {
    if (num_classes < 2) throw ConfigError("classification needs at least 2 classes");
    if (2 * num_classes > input_dim)
      throw ConfigError("input_dim too small: the causal and shortcut one-hot blocks need " +
                        std::to_string(2 * num_classes) + " features");
  } else {
    if (input_dim < 2)
      throw ConfigError("regression needs input_dim >= 2 for the two signal features");
  }
}

FeatureBlocks feature_blocks(const BiasSpec& spec) {
  if (spec.task_kind == TaskKind::classification) {
    const std::size_t k = spec.num_classes;
    return {0, k, k, 2 * k};
  }
  return {0, 1, 1, 2};
}

std::size_t causal_token_position(const BiasSpec& spec, std::size_t modality) {
  return modality % spec.seq_len;
}

SyntheticDataset generate(const BiasSpec& spec) {
  spec.validate();
  RngStream root(spec.seed);
  SyntheticDataset ds;
  ds.spec = spec;
  ds.train = generate_split(spec, spec.rho_train, spec.n_train, root.split("train"));
  ds.val = generate_split(spec, spec.rho_train, spec.n_eval, root.split("val"));
  ds.test_id = generate_split(spec, spec.rho_train, spec.n_eval, root.split("test_id"));
  ds.test_ood = generate_split(spec, spec.rho_test, spec.n_eval, root.split("test_ood"));
  return ds;
}

BiasSpec ood_shift(const BiasSpec& spec, double rho_test) {
  if (rho_test < 0.0 || rho_test > 1.0)
    throw ConfigError("coupling probabilities must lie in [0, 1]");
  BiasSpec shifted = spec;
  shifted.rho_test = rho_test;
  return shifted;
}

ProbeResult linear_probe(const SyntheticDataset& dataset, ProbeBlock block) {
  if (dataset.spec.task_kind != TaskKind::classification)
    throw ArgumentError("linear probe is defined for classification datasets only");
  const FeatureBlocks blocks = feature_blocks(dataset.spec);
  const bool causal = block == ProbeBlock::causal;
  const std::size_t begin = causal ? blocks.causal_begin : blocks.shortcut_begin;
  const std::size_t end = causal ? blocks.causal_end : blocks.shortcut_end;
  Tensor x = probe_features(dataset.train, dataset.spec, begin, end, causal);
  Tensor targets = dataset.train.labels.one_hot();
  Tensor gram = matmul_tn(x, x);
  const double ridge = 1e-6 * static_cast<double>(dataset.train.batch);
  for (std::size_t j = 0; j < gram.extent(0); ++j) gram.at2(j, j) += ridge;
  Tensor w = solve_linear(std::move(gram), matmul_tn(x, targets));
  ProbeResult result;
  result.id_accuracy = probe_split_accuracy(dataset.test_id, dataset.spec, begin, end, causal, w);
  result.ood_accuracy =
      probe_split_accuracy(dataset.test_ood, dataset.spec, begin, end, causal, w);
  return result;
}

void save_dataset(const std::string& path, const SyntheticDataset& dataset) {
  require_little_endian();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  json header{{"format", "camib-dataset"},
              {"version", 1},
              {"spec", spec_to_json(dataset.spec)},
              {"value_type", "float64-le"}};
  out << header.dump() << '\n';
  write_split(out, dataset.train);
  write_split(out, dataset.val);
  write_split(out, dataset.test_id);
  write_split(out, dataset.test_ood);
  out.flush();
  if (!out) throw IoError("failed while writing '" + path + "'");
}

SyntheticDataset load_dataset(const std::string& path) {
  require_little_endian();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw IoError("dataset container at '" + path + "' has no header");
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded()) throw IoError("dataset header is not valid JSON");
  if (!header.contains("format") || header.at("format") != "camib-dataset")
    throw IoError("file is not a dataset container");
  if (header.at("version").get<int>() != 1)
    throw IoError("unsupported dataset container version");
  SyntheticDataset ds;
  ds.spec = spec_from_json(header.at("spec"));
  ds.spec.validate();
  ds.train = read_split(in, ds.spec, ds.spec.n_train, "train");
  ds.val = read_split(in, ds.spec, ds.spec.n_eval, "val");
  ds.test_id = read_split(in, ds.spec, ds.spec.n_eval, "test_id");
  ds.test_ood = read_split(in, ds.spec, ds.spec.n_eval, "test_ood");
  char extra = 0;
  in.read(&extra, 1);
  if (in.gcount() != 0) throw IoError("dataset container has trailing bytes");
  return ds;
}

}  // namespace camib
