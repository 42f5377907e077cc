#include "camib/model.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "camib/attention.hpp"
#include "camib/disentangle.hpp"
#include "camib/errors.hpp"
#include "camib/vib.hpp"

namespace camib {

namespace {

using nlohmann::json;

std::string vib_name(std::size_t m, const char* field) {
  return "vib" + std::to_string(m) + "." + field;
}

Tensor gaussian_weights(RngStream& rng, std::size_t rows, std::size_t cols) {
  Tensor w({rows, cols});
  const double sd = 1.0 / std::sqrt(static_cast<double>(rows));
  rng.fill_normal(w.data(), w.size(), 0.0, sd);
  return w;
}

EncoderVars encoder_vars(const ParamVars& vars, std::size_t m) {
  return {vars.at(vib_name(m, "W1")),  vars.at(vib_name(m, "b1")),
          vars.at(vib_name(m, "Wmu")), vars.at(vib_name(m, "bmu")),
          vars.at(vib_name(m, "Wlv")), vars.at(vib_name(m, "blv"))};
}

EncoderParams encoder_params(const ParameterSet& params, std::size_t m) {
  return {params.at(vib_name(m, "W1")),  params.at(vib_name(m, "b1")),
          params.at(vib_name(m, "Wmu")), params.at(vib_name(m, "bmu")),
          params.at(vib_name(m, "Wlv")), params.at(vib_name(m, "blv"))};
}

// Inverted dropout: kept entries are scaled by 1/(1-rate) so the expected
// activation is unchanged.
Tensor dropout_mask(RngStream& rng, std::size_t rows, std::size_t cols, double rate) {
  Tensor mask({rows, cols});
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform() >= rate ? keep_scale : 0.0;
  return mask;
}

Tensor mean_pool_plain(const Tensor& a, std::size_t group) {
  check_rank2(a, "mean_pool");
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  if (group == 0 || rows % group != 0)
    throw ArgumentError("mean_pool: row count is not a multiple of the group size");
  Tensor out({rows / group, cols});
  const double inv = 1.0 / static_cast<double>(group);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at2(r / group, c) += a.at2(r, c) * inv;
  return out;
}

// Deterministic forward to the fused mask-split stage (z = mu), shared by
// prediction and diagnostics.
SplitTensors causal_split(const Model& model, const std::vector<Tensor>& features,
                          std::size_t batch, Tensor* mask_out) {
  const ModelArch& arch = model.arch;
  if (features.size() != arch.modalities)
    throw ArgumentError("predict: expected " + std::to_string(arch.modalities) +
                        " modality tensors");
  std::vector<Tensor> z_tokens;
  z_tokens.reserve(arch.modalities);
  for (std::size_t m = 0; m < arch.modalities; ++m) {
    GaussianPosterior post =
        encode(features[m], encoder_params(model.params, m), batch, arch.seq_len);
    z_tokens.push_back(std::move(post.mu));
  }
  FusionParams fusion{model.params.at("fuse.W"), model.params.at("fuse.b")};
  MaskParams mask{model.params.at("mask.W1"), model.params.at("mask.b1"),
                  model.params.at("mask.W2"), model.params.at("mask.b2")};
  Tensor fused = fuse(z_tokens, fusion);
  Tensor m_c = mask_probabilities(fused, mask);
  if (mask_out != nullptr) *mask_out = m_c;
  return split(fused, m_c);
}

json arch_to_json(const ModelArch& arch) {
  return json{{"modalities", arch.modalities},
              {"seq_len", arch.seq_len},
              {"input_dim", arch.input_dim},
              {"d", arch.d},
              {"task_kind",
               arch.task_kind == TaskKind::classification ? "classification" : "regression"},
              {"num_classes", arch.num_classes}};
}

ModelArch arch_from_json(const json& j) {
  ModelArch arch;
  arch.modalities = j.at("modalities").get<std::size_t>();
  arch.seq_len = j.at("seq_len").get<std::size_t>();
  arch.input_dim = j.at("input_dim").get<std::size_t>();
  arch.d = j.at("d").get<std::size_t>();
  const std::string kind = j.at("task_kind").get<std::string>();
  if (kind == "classification")
    arch.task_kind = TaskKind::classification;
  else if (kind == "regression")
    arch.task_kind = TaskKind::regression;
  else
    throw IoError("model header has unknown task_kind '" + kind + "'");
  arch.num_classes = j.at("num_classes").get<std::size_t>();
  return arch;
}

}  // namespace

void ModelArch::validate() const {
  if (modalities == 0 || seq_len == 0 || input_dim == 0 || d == 0)
    throw ConfigError("model architecture dimensions must be positive");
  if (task_kind == TaskKind::classification && num_classes < 2)
    throw ConfigError("classification model needs at least 2 classes");
}

ModelArch arch_for(const BiasSpec& data_spec, std::size_t d) {
  ModelArch arch;
  arch.modalities = data_spec.modalities;
  arch.seq_len = data_spec.seq_len;
  arch.input_dim = data_spec.input_dim;
  arch.d = d;
  arch.task_kind = data_spec.task_kind;
  arch.num_classes = data_spec.task_kind == TaskKind::classification ? data_spec.num_classes : 0;
  arch.validate();
  return arch;
}

Model init_model(const ModelArch& arch, RngStream& rng) {
  arch.validate();
  Model model;
  model.arch = arch;
  ParameterSet& p = model.params;
  for (std::size_t m = 0; m < arch.modalities; ++m) {
    p[vib_name(m, "W1")] = gaussian_weights(rng, arch.input_dim, arch.d);
    p[vib_name(m, "b1")] = Tensor({arch.d});
    p[vib_name(m, "Wmu")] = gaussian_weights(rng, arch.d, arch.d);
    p[vib_name(m, "bmu")] = Tensor({arch.d});
    p[vib_name(m, "Wlv")] = gaussian_weights(rng, arch.d, arch.d);
    // Start the bottleneck quiet (sigma = e^-1): a fresh encoder's signal is
    // faint, and unit-variance latent noise at initialization can swamp it
    // for good. The divergence penalty pulls sigma back toward 1 as training
    // proceeds.
    Tensor blv({arch.d});
    for (std::size_t i = 0; i < blv.size(); ++i) blv[i] = -2.0;
    p[vib_name(m, "blv")] = blv;
    p[vib_name(m, "Wh")] = gaussian_weights(rng, arch.d, arch.head_width());
    p[vib_name(m, "bh")] = Tensor({arch.head_width()});
  }
  p["attn.Wq"] = gaussian_weights(rng, arch.d, arch.d);
  p["attn.Wk"] = gaussian_weights(rng, arch.d, arch.d);
  p["attn.Wv"] = gaussian_weights(rng, arch.d, arch.d);
  p["fuse.W"] = gaussian_weights(rng, arch.modalities * arch.d, arch.d);
  p["fuse.b"] = Tensor({arch.d});
  p["mask.W1"] = gaussian_weights(rng, arch.d, arch.d);
  p["mask.b1"] = Tensor({arch.d});
  p["mask.W2"] = gaussian_weights(rng, arch.d, arch.d);
  p["mask.b2"] = Tensor({arch.d});
  p["head.W"] = gaussian_weights(rng, arch.d, arch.head_width());
  p["head.b"] = Tensor({arch.head_width()});
  return model;
}

Batch slice_batch(const ModalitySplit& split, const std::vector<std::size_t>& sample_idx) {
  if (sample_idx.empty()) throw ArgumentError("slice_batch: empty sample selection");
  const std::size_t L = split.seq_len;
  Batch batch;
  batch.batch = sample_idx.size();
  batch.seq_len = L;
  batch.labels.kind = split.labels.kind;
  batch.labels.num_classes = split.labels.num_classes;
  for (const Tensor& feats : split.features) {
    Tensor sub({sample_idx.size() * L, feats.extent(1)});
    for (std::size_t i = 0; i < sample_idx.size(); ++i) {
      if (sample_idx[i] >= split.batch)
        throw ArgumentError("slice_batch: sample index out of range");
      for (std::size_t t = 0; t < L; ++t)
        for (std::size_t f = 0; f < feats.extent(1); ++f)
          sub.at2(i * L + t, f) = feats.at2(sample_idx[i] * L + t, f);
    }
    batch.features.push_back(std::move(sub));
  }
  for (std::size_t idx : sample_idx) {
    if (split.labels.kind == TaskKind::classification)
      batch.labels.classes.push_back(split.labels.classes[idx]);
    else
      batch.labels.values.push_back(split.labels.values[idx]);
  }
  return batch;
}

StepLoss training_loss(Tape& t, const Model& model, const ParamVars& vars, const Batch& batch,
                       const StepOptions& opts, RngStream& rng) {
  const ModelArch& arch = model.arch;
  const std::size_t n = batch.batch, L = batch.seq_len, m_count = arch.modalities;
  if (batch.features.size() != m_count)
    throw ArgumentError("training_loss: modality count mismatch");
  if (L != arch.seq_len) throw ArgumentError("training_loss: sequence length mismatch");
  if (opts.dropout_rate < 0.0 || opts.dropout_rate >= 1.0)
    throw ConfigError("dropout rate must lie in [0, 1)");
  const AblationFlags& ab = opts.ablation;

  HeadVars task_head{vars.at("head.W"), vars.at("head.b")};
  AttentionVars attn{vars.at("attn.Wq"), vars.at("attn.Wk"), vars.at("attn.Wv")};
  FusionVars fusion{vars.at("fuse.W"), vars.at("fuse.b")};
  MaskVars mask{vars.at("mask.W1"), vars.at("mask.b1"), vars.at("mask.W2"),
                vars.at("mask.b2")};

  // Stochastic draws happen in a fixed order: pipeline noise per modality,
  // bottleneck MC noise per modality, the two dropout masks, then the
  // recombination partners. Only live terms consume draws.
  std::vector<Var> z_tokens;
  std::vector<Var> x_inputs;
  z_tokens.reserve(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    Var x = t.constant(batch.features[m]);
    x_inputs.push_back(x);
    TapePosterior post = encode(t, x, encoder_vars(vars, m), n, L);
    if (ab.no_ib) {
      z_tokens.push_back(post.mu);
    } else {
      Tensor eps = sample_eps_like(post.mu.value(), rng);
      z_tokens.push_back(reparameterize(t, post, eps));
    }
  }

  Var ib = t.constant(0.0);
  if (!ab.no_ib) {
    VibConfig vib_cfg;
    vib_cfg.latent_dim = arch.d;
    vib_cfg.beta = opts.beta;
    vib_cfg.mc_samples = opts.mc_samples;
    for (std::size_t m = 0; m < m_count; ++m) {
      HeadVars aux_head{vars.at(vib_name(m, "Wh")), vars.at(vib_name(m, "bh"))};
      Var term = ib_loss(t, x_inputs[m], encoder_vars(vars, m), aux_head, batch.labels,
                         vib_cfg, n, L, rng);
      ib = m == 0 ? term : t.add(ib, term);
    }
  }

  Var fused = fuse(t, z_tokens, fusion);
  Var m_c = mask_probabilities(t, fused, mask);
  SplitVars parts = split(t, fused, m_c);

  Var pooled_causal = t.mean_pool_rows(parts.z_c, L);
  if (opts.dropout_rate > 0.0)
    pooled_causal =
        t.mul(pooled_causal, t.constant(dropout_mask(rng, n, arch.d, opts.dropout_rate)));
  Var caus = task_loss(t, head_scores(t, pooled_causal, task_head), batch.labels);

  Var unif = t.constant(0.0);
  if (!ab.no_unif) {
    Var pooled_shortcut = t.mean_pool_rows(parts.z_s, L);
    if (opts.dropout_rate > 0.0)
      pooled_shortcut =
          t.mul(pooled_shortcut, t.constant(dropout_mask(rng, n, arch.d, opts.dropout_rate)));
    // One head, two inputs: the same prediction head scores both the causal
    // and the shortcut side, so uniformity cannot be satisfied by a throwaway
    // auxiliary map.
    Var s_scores = head_scores(t, pooled_shortcut, task_head);
    if (ab.kl_to_mse) {
      if (arch.task_kind == TaskKind::classification) {
        Var probs = t.softmax_rows(s_scores);
        unif = t.mean(
            t.square(t.add_const(probs, -1.0 / static_cast<double>(arch.num_classes))));
      } else {
        unif = t.mean(t.square(s_scores));
      }
    } else {
      unif = uniformity_loss(t, s_scores, arch.task_kind, arch.num_classes, opts.prior_std);
    }
  }

  Var iv = t.constant(0.0);
  if (!ab.no_iv) {
    std::vector<Var> per_sample;
    per_sample.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<Var> sample_tokens;
      sample_tokens.reserve(m_count);
      for (std::size_t m = 0; m < m_count; ++m)
        sample_tokens.push_back(t.slice_rows(z_tokens[m], s * L, (s + 1) * L));
      Var z_flat = t.concat_rows(sample_tokens);
      per_sample.push_back(instrument(t, z_flat, attn, m_count, L, true));
    }
    Var v_tokens = n == 1 ? per_sample.front() : t.concat_rows(per_sample);
    iv = iv_alignment_loss(t, parts.z_c, v_tokens);
  }

  Var intv = t.constant(0.0);
  double lambda2 = opts.lambda2;
  if (ab.no_intv) {
    lambda2 = 0.0;
  } else if (n >= 2) {
    const std::size_t k = std::min(opts.k_shortcuts, n - 1);
    ShortcutDraw draw = sample_shortcut_set(n, k, rng);
    intv = intervention_loss(t, parts.z_c, parts.z_s, draw, batch.labels, task_head, L);
  }

  StepLoss out;
  out.total = total_loss(t, ib, caus, iv, unif, intv, opts.lambda1, lambda2);
  out.breakdown =
      total_loss(ib.value().item(), caus.value().item(), iv.value().item(),
                 unif.value().item(), intv.value().item(), opts.lambda1, lambda2, opts.beta);
  return out;
}

std::vector<double> predict(const Model& model, const std::vector<Tensor>& features,
                            std::size_t batch) {
  SplitTensors parts = causal_split(model, features, batch, nullptr);
  Tensor pooled = mean_pool_plain(parts.z_c, model.arch.seq_len);
  HeadParams head{model.params.at("head.W"), model.params.at("head.b")};
  return head_predictions(head_scores(pooled, head), model.arch.task_kind);
}

std::vector<double> predict(const Model& model, const ModalitySplit& split) {
  if (split.batch == 0) throw ArgumentError("predict: empty split");
  return predict(model, split.features, split.batch);
}

Tensor mean_causal_mask(const Model& model, const ModalitySplit& split) {
  if (split.batch == 0) throw ArgumentError("mean_causal_mask: empty split");
  Tensor mask;
  causal_split(model, split.features, split.batch, &mask);
  const std::size_t rows = mask.extent(0), cols = mask.extent(1);
  Tensor mean({cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) mean[c] += mask.at2(r, c);
  for (std::size_t c = 0; c < cols; ++c) mean[c] /= static_cast<double>(rows);
  return mean;
}

void save_model(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  json manifest = json::array();
  for (const auto& [name, tensor] : model.params)
    manifest.push_back(json{{"name", name}, {"shape", tensor.shape()}});
  json header{{"format", "camib-model"},
              {"version", 1},
              {"arch", arch_to_json(model.arch)},
              {"params", manifest}};
  out << header.dump() << '\n';
  for (const auto& [name, tensor] : model.params)
    out.write(reinterpret_cast<const char*>(tensor.data()),
              static_cast<std::streamsize>(tensor.size() * 8));
  out.flush();
  if (!out) throw IoError("failed while writing '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw IoError("model container at '" + path + "' has no header");
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded()) throw IoError("model header is not valid JSON");
  if (!header.contains("format") || header.at("format") != "camib-model")
    throw IoError("file is not a model container");
  if (header.at("version").get<int>() != 1) throw IoError("unsupported model container version");
  Model model;
  model.arch = arch_from_json(header.at("arch"));
  model.arch.validate();
  for (const json& entry : header.at("params")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    Tensor tensor(shape);
    in.read(reinterpret_cast<char*>(tensor.data()),
            static_cast<std::streamsize>(tensor.size() * 8));
    if (static_cast<std::size_t>(in.gcount()) != tensor.size() * 8)
      throw IoError("model container truncated while reading '" + name + "'");
    if (!tensor.all_finite()) throw IoError("model parameter '" + name + "' is not finite");
    model.params.emplace(name, std::move(tensor));
  }
  char extra = 0;
  in.read(&extra, 1);
  if (in.gcount() != 0) throw IoError("model container has trailing bytes");
  return model;
}

}  // namespace camib
