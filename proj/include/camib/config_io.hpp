#ifndef CAMIB_CONFIG_IO_HPP
#define CAMIB_CONFIG_IO_HPP

#include <string>

#include "camib/synthetic.hpp"
#include "camib/train.hpp"

namespace camib {

// Where a run writes its artifacts. `run_dir` receives config.json,
// model.bin, history.json, metrics.json and the text reports; an empty
// `dataset_path` means the dataset is regenerated from the `data` section
// (bit-identical to a saved copy, since generation is seeded).
struct OutputPaths {
  std::string run_dir = "runs/default";
  std::string dataset_path;
};

// One experiment description: generator settings, training settings, output
// locations. This is the single document every CLI subcommand consumes.
//
// JSON schema (all keys optional; omitted keys keep the defaults shown by
// `run_config_to_json(RunConfigFile{})`):
//   {
//     "data":   { n_train, n_eval, modalities, seq_len, input_dim, task,
//                 num_classes, rho_train, rho_test, causal_snr, shortcut_snr,
//                 noise_sigma, seed },
//     "train":  { epochs, batch_size, learning_rate, warmup_fraction,
//                 dropout_rate, d, lambda1, lambda2, beta, k_shortcuts, seed,
//                 mc_samples, weight_decay, prior_std,
//                 ablation: { no_iv, no_unif, kl_to_mse, no_intv, no_ib } },
//     "output": { run_dir, dataset_path }
//   }
// "task" is "classification" or "regression". Unknown keys anywhere are
// rejected with the offending path, so a typo in a lambda name cannot be
// silently ignored.
struct RunConfigFile {
  BiasSpec data;
  TrainConfig train;
  OutputPaths output;

  void validate() const;  // delegates to the section validators
};

// Strict parser: type mismatches and unknown keys throw ConfigError naming
// the JSON path. The empty document "{}" yields the defaults.
RunConfigFile parse_run_config(const std::string& json_text);

// Canonical serialization: two-space indent, keys sorted, '\n'-terminated.
// parse(to_json(c)) round-trips every field exactly.
std::string run_config_to_json(const RunConfigFile& config);

RunConfigFile load_run_config(const std::string& path);  // IoError if unreadable
void save_run_config(const std::string& path, const RunConfigFile& config);

}  // namespace camib

#endif  // CAMIB_CONFIG_IO_HPP
