#include "camib/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "camib/errors.hpp"
#include "camib/model.hpp"

namespace camib {
namespace {

using nlohmann::json;

std::vector<double> collect(const std::vector<MetricsReport>& reports,
                            std::optional<double> MetricsReport::*field) {
  std::vector<double> values;
  for (const MetricsReport& r : reports)
    if ((r.*field).has_value()) values.push_back(*(r.*field));
  return values;
}

std::optional<MetricStats> summarize_field(const std::vector<MetricsReport>& reports,
                                           std::optional<double> MetricsReport::*field) {
  std::vector<double> values = collect(reports, field);
  if (values.size() != reports.size() || values.empty()) return std::nullopt;
  return summarize(values);
}

TrainConfig config_for(const TrainConfig& base, const std::string& variant, std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.seed = seed;
  AblationFlags flags = flags_for_variant(variant);
  cfg.ablation.no_iv = cfg.ablation.no_iv || flags.no_iv;
  cfg.ablation.no_unif = cfg.ablation.no_unif || flags.no_unif;
  cfg.ablation.kl_to_mse = cfg.ablation.kl_to_mse || flags.kl_to_mse;
  cfg.ablation.no_intv = cfg.ablation.no_intv || flags.no_intv;
  cfg.ablation.no_ib = cfg.ablation.no_ib || flags.no_ib;
  return cfg;
}

VariantResult run_variant(const TrainConfig& base, const SyntheticDataset& data,
                          const std::string& name, const std::vector<std::uint64_t>& seeds) {
  VariantResult row;
  row.name = name;
  for (std::uint64_t seed : seeds) {
    TrainedModel tm = train(config_for(base, name, seed), data);
    row.id_runs.push_back(evaluate(tm.model, data.test_id));
    row.ood_runs.push_back(evaluate(tm.model, data.test_ood));
  }
  row.id = summarize_reports(row.id_runs);
  row.ood = summarize_reports(row.ood_runs);
  return row;
}

json stats_json(const std::optional<MetricStats>& stats) {
  if (!stats) return nullptr;
  return json{{"mean", stats->mean}, {"stddev", stats->stddev}};
}

json summary_json(const MetricSummary& summary) {
  json out = json::object();
  if (summary.acc7) out["acc7"] = stats_json(summary.acc7);
  if (summary.acc2_incl_zero) out["acc2_incl_zero"] = stats_json(summary.acc2_incl_zero);
  if (summary.acc2_excl_zero) out["acc2_excl_zero"] = stats_json(summary.acc2_excl_zero);
  if (summary.f1_weighted) out["f1_weighted"] = stats_json(summary.f1_weighted);
  if (summary.mae) out["mae"] = stats_json(summary.mae);
  if (summary.corr) out["corr"] = stats_json(summary.corr);
  return out;
}

// Headline number for tables: accuracy when present, else MAE.
std::string headline(const MetricSummary& summary) {
  char buf[64];
  if (summary.acc2_incl_zero) {
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", summary.acc2_incl_zero->mean,
                  summary.acc2_incl_zero->stddev);
  } else if (summary.mae) {
    std::snprintf(buf, sizeof buf, "mae %.4f ± %.4f", summary.mae->mean, summary.mae->stddev);
  } else {
    std::snprintf(buf, sizeof buf, "-");
  }
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out << text;
  if (!out) throw IoError("failed while writing file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json metrics_report_json(const MetricsReport& r) {
  json out = json::object();
  if (r.acc7) out["acc7"] = *r.acc7;
  if (r.acc2_incl_zero) out["acc2_incl_zero"] = *r.acc2_incl_zero;
  if (r.acc2_excl_zero) out["acc2_excl_zero"] = *r.acc2_excl_zero;
  if (r.f1_weighted) out["f1_weighted"] = *r.f1_weighted;
  if (r.mae) out["mae"] = *r.mae;
  if (r.corr) out["corr"] = *r.corr;
  return out;
}

std::string metrics_line(const MetricsReport& r) {
  std::ostringstream out;
  bool first = true;
  auto emit = [&](const char* name, const std::optional<double>& v) {
    if (!v) return;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s=%.4f", name, *v);
    out << (first ? "" : "  ") << buf;
    first = false;
  };
  emit("acc7", r.acc7);
  emit("acc2_incl_zero", r.acc2_incl_zero);
  emit("acc2_excl_zero", r.acc2_excl_zero);
  emit("f1_weighted", r.f1_weighted);
  emit("mae", r.mae);
  emit("corr", r.corr);
  if (first) out << "-";
  return out.str();
}

std::string seeds_text(const std::vector<std::uint64_t>& seeds) {
  std::ostringstream out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  return out.str();
}

void ensure_run_dir(const RunPaths& paths) {
  std::error_code ec;
  std::filesystem::create_directories(paths.run_dir, ec);
  if (ec) throw IoError("cannot create run directory: " + paths.run_dir + " (" + ec.message() + ")");
}

const ModalitySplit& split_by_name(const SyntheticDataset& data, const std::string& name) {
  if (name == "val") return data.val;
  if (name == "test_id") return data.test_id;
  if (name == "test_ood") return data.test_ood;
  if (name == "train") return data.train;
  throw ArgumentError("unknown split '" + name + "' (expected train, val, test_id or test_ood)");
}

}  // namespace

// ----- ablation / sweep ------------------------------------------------

const std::vector<std::string>& ablation_variant_names() {
  static const std::vector<std::string> names{"no_iv", "no_unif", "kl_to_mse", "no_intv",
                                              "no_ib"};
  return names;
}

AblationFlags flags_for_variant(const std::string& name) {
  AblationFlags flags;
  if (name == "full") return flags;
  if (name == "no_iv") {
    flags.no_iv = true;
  } else if (name == "no_unif") {
    flags.no_unif = true;
  } else if (name == "kl_to_mse") {
    flags.kl_to_mse = true;
  } else if (name == "no_intv") {
    flags.no_intv = true;
  } else if (name == "no_ib") {
    flags.no_ib = true;
  } else {
    std::string accepted;
    for (const std::string& n : ablation_variant_names()) accepted += " " + n;
    throw ArgumentError("unknown ablation variant '" + name + "'; accepted:" + accepted);
  }
  return flags;
}

MetricStats summarize(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("summarize: empty value list");
  MetricStats stats;
  for (double v : values) stats.mean += v;
  stats.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - stats.mean) * (v - stats.mean);
  stats.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return stats;
}

MetricSummary summarize_reports(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw ArgumentError("summarize_reports: no reports");
  MetricSummary s;
  s.acc7 = summarize_field(reports, &MetricsReport::acc7);
  s.acc2_incl_zero = summarize_field(reports, &MetricsReport::acc2_incl_zero);
  s.acc2_excl_zero = summarize_field(reports, &MetricsReport::acc2_excl_zero);
  s.f1_weighted = summarize_field(reports, &MetricsReport::f1_weighted);
  s.mae = summarize_field(reports, &MetricsReport::mae);
  s.corr = summarize_field(reports, &MetricsReport::corr);
  return s;
}

AblationReport ablate(const TrainConfig& base, const SyntheticDataset& data,
                      const std::vector<std::string>& variants,
                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ArgumentError("ablate: at least one seed is required");
  for (const std::string& v : variants) (void)flags_for_variant(v);  // validate up front

  AblationReport report;
  report.seeds = seeds;
  report.rows.push_back(run_variant(base, data, "full", seeds));
  for (const std::string& v : variants) report.rows.push_back(run_variant(base, data, v, seeds));
  return report;
}

SweepReport sweep(const TrainConfig& base, const SyntheticDataset& data, const SweepGrid& grid,
                  const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ArgumentError("sweep: at least one seed is required");
  const std::vector<double> l1s = grid.lambda1s.empty() ? std::vector<double>{base.lambda1}
                                                        : grid.lambda1s;
  const std::vector<double> l2s = grid.lambda2s.empty() ? std::vector<double>{base.lambda2}
                                                        : grid.lambda2s;
  const std::vector<double> bs = grid.betas.empty() ? std::vector<double>{base.beta} : grid.betas;

  SweepReport report;
  report.seeds = seeds;
  for (double l1 : l1s)
    for (double l2 : l2s)
      for (double b : bs) {
        SweepRow row;
        row.lambda1 = l1;
        row.lambda2 = l2;
        row.beta = b;
        std::vector<MetricsReport> id_runs, ood_runs;
        for (std::uint64_t seed : seeds) {
          TrainConfig cfg = base;
          cfg.lambda1 = l1;
          cfg.lambda2 = l2;
          cfg.beta = b;
          cfg.seed = seed;
          TrainedModel tm = train(cfg, data);
          id_runs.push_back(evaluate(tm.model, data.test_id));
          ood_runs.push_back(evaluate(tm.model, data.test_ood));
        }
        row.id = summarize_reports(id_runs);
        row.ood = summarize_reports(ood_runs);
        report.rows.push_back(row);
      }
  return report;
}

std::string ablation_table(const AblationReport& report) {
  std::ostringstream out;
  out << "ablation over seeds " << seeds_text(report.seeds) << "\n";
  out << "variant      ID                   OOD\n";
  for (const VariantResult& row : report.rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-20s %-20s\n", row.name.c_str(),
                  headline(row.id).c_str(), headline(row.ood).c_str());
    out << line;
  }
  return out.str();
}

std::string sweep_table(const SweepReport& report) {
  std::ostringstream out;
  out << "sweep over seeds " << seeds_text(report.seeds) << "\n";
  out << "lambda1  lambda2  beta         ID                   OOD\n";
  for (const SweepRow& row : report.rows) {
    char line[200];
    std::snprintf(line, sizeof line, "%-8.3g %-8.3g %-12.5g %-20s %-20s\n", row.lambda1,
                  row.lambda2, row.beta, headline(row.id).c_str(), headline(row.ood).c_str());
    out << line;
  }
  return out.str();
}

std::string ablation_json(const AblationReport& report) {
  json rows = json::array();
  for (const VariantResult& row : report.rows) {
    json id_runs = json::array(), ood_runs = json::array();
    for (const MetricsReport& r : row.id_runs) id_runs.push_back(metrics_report_json(r));
    for (const MetricsReport& r : row.ood_runs) ood_runs.push_back(metrics_report_json(r));
    rows.push_back(json{{"variant", row.name},
                        {"id", summary_json(row.id)},
                        {"ood", summary_json(row.ood)},
                        {"id_runs", id_runs},
                        {"ood_runs", ood_runs}});
  }
  json root{{"seeds", report.seeds}, {"rows", rows}};
  return root.dump(2) + "\n";
}

std::string sweep_json(const SweepReport& report) {
  json rows = json::array();
  for (const SweepRow& row : report.rows)
    rows.push_back(json{{"lambda1", row.lambda1},
                        {"lambda2", row.lambda2},
                        {"beta", row.beta},
                        {"id", summary_json(row.id)},
                        {"ood", summary_json(row.ood)}});
  json root{{"seeds", report.seeds}, {"rows", rows}};
  return root.dump(2) + "\n";
}

// ----- run-directory jobs ----------------------------------------------

RunPaths run_paths(const RunConfigFile& config) {
  RunPaths paths;
  paths.run_dir = config.output.run_dir;
  const std::string base = config.output.run_dir + "/";
  paths.config = base + "config.json";
  paths.dataset = config.output.dataset_path.empty() ? base + "dataset.camib"
                                                     : config.output.dataset_path;
  paths.model = base + "model.bin";
  paths.history = base + "history.json";
  paths.metrics = base + "metrics.json";
  paths.summary = base + "summary.txt";
  return paths;
}

SyntheticDataset dataset_for(const RunConfigFile& config) {
  if (!config.output.dataset_path.empty() &&
      std::filesystem::exists(config.output.dataset_path))
    return load_dataset(config.output.dataset_path);
  return generate(config.data);
}

std::string run_generate_job(const RunConfigFile& config) {
  config.validate();
  RunPaths paths = run_paths(config);
  ensure_run_dir(paths);
  SyntheticDataset data = generate(config.data);
  save_dataset(paths.dataset, data);
  save_run_config(paths.config, config);

  std::ostringstream out;
  out << "dataset written to " << paths.dataset << "\n";
  out << "train " << data.train.batch << "  val " << data.val.batch << "  test_id "
      << data.test_id.batch << "  test_ood " << data.test_ood.batch << "\n";
  if (config.data.task_kind == TaskKind::classification) {
    ProbeResult shortcut = linear_probe(data, ProbeBlock::shortcut);
    ProbeResult causal = linear_probe(data, ProbeBlock::causal);
    char line[160];
    std::snprintf(line, sizeof line,
                  "shortcut probe id=%.4f ood=%.4f\ncausal probe   id=%.4f ood=%.4f\n",
                  shortcut.id_accuracy, shortcut.ood_accuracy, causal.id_accuracy,
                  causal.ood_accuracy);
    out << line;
  }
  return out.str();
}

std::string run_train_job(const RunConfigFile& config) {
  config.validate();
  RunPaths paths = run_paths(config);
  ensure_run_dir(paths);
  SyntheticDataset data = dataset_for(config);

  TrainedModel tm = train(config.train, data);

  save_run_config(paths.config, config);
  save_model(paths.model, tm.model);

  json steps = json::array();
  for (std::size_t i = 0; i < tm.history.size(); ++i) {
    const LossBreakdown& b = tm.history[i];
    steps.push_back(json{{"step", i},
                         {"total", b.total},
                         {"ib", b.ib},
                         {"caus", b.caus},
                         {"iv_align", b.iv_align},
                         {"unif", b.unif},
                         {"intv", b.intv},
                         {"lambda1", b.lambda1},
                         {"lambda2", b.lambda2},
                         {"beta", b.beta}});
  }
  write_text_file(paths.history, json{{"steps", steps}}.dump(2) + "\n");

  MetricsReport val = evaluate(tm.model, data.val);
  MetricsReport id = evaluate(tm.model, data.test_id);
  MetricsReport ood = evaluate(tm.model, data.test_ood);
  json metrics{{"val", metrics_report_json(val)},
               {"test_id", metrics_report_json(id)},
               {"test_ood", metrics_report_json(ood)}};
  write_text_file(paths.metrics, metrics.dump(2) + "\n");

  std::ostringstream out;
  out << "trained " << tm.history.size() << " steps; artifacts in " << paths.run_dir << "\n";
  out << "final losses: ";
  {
    const LossBreakdown& b = tm.history.back();
    char line[220];
    std::snprintf(line, sizeof line,
                  "total=%.6f ib=%.6f caus=%.6f iv_align=%.6f unif=%.6f intv=%.6f\n", b.total,
                  b.ib, b.caus, b.iv_align, b.unif, b.intv);
    out << line;
  }
  out << "val      " << metrics_line(val) << "\n";
  out << "test_id  " << metrics_line(id) << "\n";
  out << "test_ood " << metrics_line(ood) << "\n";
  write_text_file(paths.summary, out.str());
  return out.str();
}

std::string run_evaluate_job(const RunConfigFile& config, const std::string& model_path,
                             const std::string& split) {
  config.validate();
  Model model = load_model(model_path);
  SyntheticDataset data = dataset_for(config);
  MetricsReport report = evaluate(model, split_by_name(data, split));
  std::ostringstream out;
  out << split << " " << metrics_line(report) << "\n";
  return out.str();
}

std::string run_ablate_job(const RunConfigFile& config, const std::vector<std::string>& variants,
                           const std::vector<std::uint64_t>& seeds) {
  config.validate();
  RunPaths paths = run_paths(config);
  ensure_run_dir(paths);
  SyntheticDataset data = dataset_for(config);
  AblationReport report = ablate(config.train, data, variants, seeds);
  write_text_file(paths.run_dir + "/ablation.json", ablation_json(report));
  std::string table = ablation_table(report);
  write_text_file(paths.run_dir + "/ablation.txt", table);
  return table;
}

std::string run_sweep_job(const RunConfigFile& config, const SweepGrid& grid) {
  config.validate();
  RunPaths paths = run_paths(config);
  ensure_run_dir(paths);
  SyntheticDataset data = dataset_for(config);
  SweepReport report = sweep(config.train, data, grid, {config.train.seed});
  write_text_file(paths.run_dir + "/sweep.json", sweep_json(report));
  std::string table = sweep_table(report);
  write_text_file(paths.run_dir + "/sweep.txt", table);
  return table;
}

std::string run_report_job(const std::string& run_dir) {
  const std::string history_path = run_dir + "/history.json";
  const std::string metrics_path = run_dir + "/metrics.json";
  if (!std::filesystem::exists(history_path))
    throw IoError("no history.json under " + run_dir + " (run `train` first)");

  json history = json::parse(read_text_file(history_path), nullptr, false);
  if (history.is_discarded() || !history.contains("steps"))
    throw IoError("history.json under " + run_dir + " is not a training history");

  std::ostringstream series;
  series << "step\ttotal\tib\tcaus\tiv_align\tunif\tintv\n";
  for (const json& row : history.at("steps")) {
    char line[220];
    std::snprintf(line, sizeof line, "%zu\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\t%.9g\n",
                  row.at("step").get<std::size_t>(), row.at("total").get<double>(),
                  row.at("ib").get<double>(), row.at("caus").get<double>(),
                  row.at("iv_align").get<double>(), row.at("unif").get<double>(),
                  row.at("intv").get<double>());
    series << line;
  }
  write_text_file(run_dir + "/series.tsv", series.str());

  std::ostringstream out;
  const json& steps = history.at("steps");
  out << "run " << run_dir << ": " << steps.size() << " steps\n";
  if (!steps.empty()) {
    const json& first = steps.front();
    const json& last = steps.back();
    char line[200];
    std::snprintf(line, sizeof line, "total %.6f -> %.6f  caus %.6f -> %.6f\n",
                  first.at("total").get<double>(), last.at("total").get<double>(),
                  first.at("caus").get<double>(), last.at("caus").get<double>());
    out << line;
  }
  if (std::filesystem::exists(metrics_path)) {
    json metrics = json::parse(read_text_file(metrics_path), nullptr, false);
    if (!metrics.is_discarded())
      for (const auto& item : metrics.items())
        out << item.key() << ": " << item.value().dump() << "\n";
  }
  out << "series written to " << run_dir << "/series.tsv\n";
  write_text_file(run_dir + "/report.txt", out.str());
  return out.str();
}

}  // namespace camib
