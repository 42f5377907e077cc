#ifndef CAMIB_EXPERIMENT_HPP
#define CAMIB_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "camib/config_io.hpp"
#include "camib/synthetic.hpp"
#include "camib/train.hpp"

namespace camib {

// ----- ablation / sweep ------------------------------------------------

// Names accepted by ablate(): no_iv, no_unif, kl_to_mse, no_intv, no_ib.
const std::vector<std::string>& ablation_variant_names();

// Flags for one named variant ("full" = everything on). Unknown names throw
// ArgumentError listing the accepted set.
AblationFlags flags_for_variant(const std::string& name);

// Mean and standard deviation over seeds (population form: the seed list is
// the whole population of runs, not a sample from one).
struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
};

MetricStats summarize(const std::vector<double>& values);

// Per-metric stats; a field is absent when the underlying reports leave it
// absent (e.g. regression-only metrics on a classification task).
struct MetricSummary {
  std::optional<MetricStats> acc7, acc2_incl_zero, acc2_excl_zero, f1_weighted, mae, corr;
};

MetricSummary summarize_reports(const std::vector<MetricsReport>& reports);

struct VariantResult {
  std::string name;
  MetricSummary id;   // test-ID split
  MetricSummary ood;  // test-OOD split
  std::vector<MetricsReport> id_runs, ood_runs;  // one entry per seed
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<VariantResult> rows;  // "full" first, then the requested variants
};

// Trains the full model plus each requested variant once per seed and
// aggregates evaluation metrics. The base config's own seed is ignored in
// favour of the explicit list. Throws ArgumentError on an unknown variant
// or an empty seed list.
AblationReport ablate(const TrainConfig& base, const SyntheticDataset& data,
                      const std::vector<std::string>& variants,
                      const std::vector<std::uint64_t>& seeds);

// Hyperparameter grid: an empty axis holds at the base config's value.
struct SweepGrid {
  std::vector<double> lambda1s, lambda2s, betas;
};

struct SweepRow {
  double lambda1 = 0.0, lambda2 = 0.0, beta = 0.0;
  MetricSummary id, ood;
};

struct SweepReport {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepRow> rows;  // lambda1-major, then lambda2, then beta
};

SweepReport sweep(const TrainConfig& base, const SyntheticDataset& data, const SweepGrid& grid,
                  const std::vector<std::uint64_t>& seeds);

// Text renderings: fixed-width tables, stable column order, no timestamps,
// so identical inputs produce identical bytes.
std::string ablation_table(const AblationReport& report);
std::string sweep_table(const SweepReport& report);

// Machine-readable forms (canonical JSON, sorted keys, trailing newline).
std::string ablation_json(const AblationReport& report);
std::string sweep_json(const SweepReport& report);

// ----- run-directory jobs ----------------------------------------------

// Artifact layout under output.run_dir:
//   config.json    normalized copy of the config the run used
//   dataset.camib  only when output.dataset_path is empty (else that path)
//   model.bin      trained parameters
//   history.json   per-step loss breakdown series
//   metrics.json   val / test-ID / test-OOD metric reports
//   summary.txt    the text block the CLI prints
//   ablation.{json,txt}, sweep.{json,txt}  from their subcommands
//   report.txt, series.tsv  from the report subcommand
struct RunPaths {
  std::string run_dir, config, dataset, model, history, metrics, summary;
};

RunPaths run_paths(const RunConfigFile& config);

// Dataset for a config: loads output.dataset_path when set and present,
// otherwise regenerates from the data section (bit-identical either way).
SyntheticDataset dataset_for(const RunConfigFile& config);

// generate-data: write the dataset container + a normalized config copy.
// Returns the summary text (also saved). Every job creates run_dir.
std::string run_generate_job(const RunConfigFile& config);

// train: dataset -> train -> save model/history/metrics/summary.
std::string run_train_job(const RunConfigFile& config);

// evaluate: load a saved model, score one split (val / test_id / test_ood).
std::string run_evaluate_job(const RunConfigFile& config, const std::string& model_path,
                             const std::string& split);

// ablate / sweep: write ablation.* / sweep.* under run_dir.
std::string run_ablate_job(const RunConfigFile& config, const std::vector<std::string>& variants,
                           const std::vector<std::uint64_t>& seeds);
std::string run_sweep_job(const RunConfigFile& config, const SweepGrid& grid);

// report: consume a run directory produced by the jobs above, emit
// report.txt plus plot-ready series.tsv (step + each loss column).
std::string run_report_job(const std::string& run_dir);

}  // namespace camib

#endif  // CAMIB_EXPERIMENT_HPP
