#include "camib.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>
#include <utility>

#include <json.hpp>

#include "camib/config_io.hpp"
#include "camib/errors.hpp"
#include "camib/experiment.hpp"
#include "camib/gradient_checks.hpp"
#include "camib/model.hpp"
#include "camib/synthetic.hpp"
#include "camib/train.hpp"

struct camib_run_config {
  camib::RunConfigFile value;
};

struct camib_dataset {
  camib::SyntheticDataset value;
};

struct camib_model {
  camib::Model value;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
camib_status wrap(F&& body) noexcept {
  try {
    body();
    g_last_error.clear();
    return CAMIB_OK;
  } catch (const camib::ArgumentError& e) {  // ConfigError is a subtype
    g_last_error = e.what();
    return CAMIB_INVALID_ARGUMENT;
  } catch (const camib::IoError& e) {
    g_last_error = e.what();
    return CAMIB_IO_ERROR;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CAMIB_RUNTIME_ERROR;
  } catch (...) {
    g_last_error = "unknown failure";
    return CAMIB_RUNTIME_ERROR;
  }
}

void require(bool ok, const char* message) {
  if (!ok) throw camib::ArgumentError(message);
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string part = text.substr(start, comma - start);
    // trim spaces
    while (!part.empty() && part.front() == ' ') part.erase(part.begin());
    while (!part.empty() && part.back() == ' ') part.pop_back();
    if (!part.empty()) parts.push_back(part);
    start = comma + 1;
  }
  return parts;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  for (const std::string& part : split_csv(csv)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(part, &used, 10);
    } catch (const std::exception&) {
      throw camib::ArgumentError("seed list: '" + part + "' is not an unsigned integer");
    }
    if (used != part.size())
      throw camib::ArgumentError("seed list: '" + part + "' is not an unsigned integer");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (seeds.empty()) throw camib::ArgumentError("seed list: at least one seed is required");
  return seeds;
}

std::vector<double> parse_values(const std::string& axis, const std::string& csv) {
  std::vector<double> values;
  for (const std::string& part : split_csv(csv)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(part, &used);
    } catch (const std::exception&) {
      throw camib::ArgumentError("sweep grid " + axis + ": '" + part + "' is not a number");
    }
    if (used != part.size())
      throw camib::ArgumentError("sweep grid " + axis + ": '" + part + "' is not a number");
    values.push_back(v);
  }
  if (values.empty()) throw camib::ArgumentError("sweep grid " + axis + ": no values given");
  return values;
}

camib::SweepGrid parse_grid(const std::string& spec) {
  camib::SweepGrid grid;
  std::size_t start = 0;
  while (start < spec.size()) {
    std::size_t semi = spec.find(';', start);
    if (semi == std::string::npos) semi = spec.size();
    std::string axis_spec = spec.substr(start, semi - start);
    start = semi + 1;
    if (axis_spec.empty()) continue;
    std::size_t eq = axis_spec.find('=');
    if (eq == std::string::npos)
      throw camib::ArgumentError("sweep grid: expected name=v1,v2 in '" + axis_spec + "'");
    std::string name = axis_spec.substr(0, eq);
    std::string values = axis_spec.substr(eq + 1);
    if (name == "lambda1") {
      grid.lambda1s = parse_values(name, values);
    } else if (name == "lambda2") {
      grid.lambda2s = parse_values(name, values);
    } else if (name == "beta") {
      grid.betas = parse_values(name, values);
    } else {
      throw camib::ArgumentError("sweep grid: unknown axis '" + name +
                                 "' (expected lambda1, lambda2 or beta)");
    }
  }
  return grid;
}

const camib::ModalitySplit& split_of(const camib::SyntheticDataset& data,
                                     const std::string& name) {
  if (name == "train") return data.train;
  if (name == "val") return data.val;
  if (name == "test_id") return data.test_id;
  if (name == "test_ood") return data.test_ood;
  throw camib::ArgumentError("unknown split '" + name +
                             "' (expected train, val, test_id or test_ood)");
}

}  // namespace

extern "C" {

const char* camib_last_error(void) { return g_last_error.c_str(); }

const char* camib_version(void) { return "0.1.0"; }

void camib_string_free(char* text) { std::free(text); }

camib_status camib_run_config_default(camib_run_config** out) {
  return wrap([&] {
    require(out != nullptr, "camib_run_config_default: out is NULL");
    *out = new camib_run_config{};
  });
}

camib_status camib_run_config_parse(const char* json_text, camib_run_config** out) {
  return wrap([&] {
    require(json_text != nullptr, "camib_run_config_parse: json_text is NULL");
    require(out != nullptr, "camib_run_config_parse: out is NULL");
    *out = new camib_run_config{camib::parse_run_config(json_text)};
  });
}

camib_status camib_run_config_load(const char* path, camib_run_config** out) {
  return wrap([&] {
    require(path != nullptr, "camib_run_config_load: path is NULL");
    require(out != nullptr, "camib_run_config_load: out is NULL");
    *out = new camib_run_config{camib::load_run_config(path)};
  });
}

camib_status camib_run_config_to_json(const camib_run_config* config, char** out_json) {
  return wrap([&] {
    require(config != nullptr, "camib_run_config_to_json: config is NULL");
    require(out_json != nullptr, "camib_run_config_to_json: out_json is NULL");
    *out_json = copy_string(camib::run_config_to_json(config->value));
  });
}

camib_status camib_run_config_save(const camib_run_config* config, const char* path) {
  return wrap([&] {
    require(config != nullptr, "camib_run_config_save: config is NULL");
    require(path != nullptr, "camib_run_config_save: path is NULL");
    camib::save_run_config(path, config->value);
  });
}

void camib_run_config_free(camib_run_config* config) { delete config; }

camib_status camib_dataset_generate(const camib_run_config* config, camib_dataset** out) {
  return wrap([&] {
    require(config != nullptr, "camib_dataset_generate: config is NULL");
    require(out != nullptr, "camib_dataset_generate: out is NULL");
    *out = new camib_dataset{camib::generate(config->value.data)};
  });
}

camib_status camib_dataset_load(const char* path, camib_dataset** out) {
  return wrap([&] {
    require(path != nullptr, "camib_dataset_load: path is NULL");
    require(out != nullptr, "camib_dataset_load: out is NULL");
    *out = new camib_dataset{camib::load_dataset(path)};
  });
}

camib_status camib_dataset_save(const camib_dataset* dataset, const char* path) {
  return wrap([&] {
    require(dataset != nullptr, "camib_dataset_save: dataset is NULL");
    require(path != nullptr, "camib_dataset_save: path is NULL");
    camib::save_dataset(path, dataset->value);
  });
}

void camib_dataset_free(camib_dataset* dataset) { delete dataset; }

camib_status camib_dataset_probe(const camib_dataset* dataset, int block, double* out_id_acc,
                                 double* out_ood_acc) {
  return wrap([&] {
    require(dataset != nullptr, "camib_dataset_probe: dataset is NULL");
    require(out_id_acc != nullptr && out_ood_acc != nullptr,
            "camib_dataset_probe: output pointer is NULL");
    require(block == 0 || block == 1, "camib_dataset_probe: block must be 0 or 1");
    camib::ProbeResult r = camib::linear_probe(
        dataset->value, block == 0 ? camib::ProbeBlock::causal : camib::ProbeBlock::shortcut);
    *out_id_acc = r.id_accuracy;
    *out_ood_acc = r.ood_accuracy;
  });
}

camib_status camib_train(const camib_run_config* config, const camib_dataset* dataset,
                         camib_model** out) {
  return wrap([&] {
    require(config != nullptr, "camib_train: config is NULL");
    require(dataset != nullptr, "camib_train: dataset is NULL");
    require(out != nullptr, "camib_train: out is NULL");
    camib::TrainedModel tm = camib::train(config->value.train, dataset->value);
    *out = new camib_model{std::move(tm.model)};
  });
}

camib_status camib_model_save(const camib_model* model, const char* path) {
  return wrap([&] {
    require(model != nullptr, "camib_model_save: model is NULL");
    require(path != nullptr, "camib_model_save: path is NULL");
    camib::save_model(path, model->value);
  });
}

camib_status camib_model_load(const char* path, camib_model** out) {
  return wrap([&] {
    require(path != nullptr, "camib_model_load: path is NULL");
    require(out != nullptr, "camib_model_load: out is NULL");
    *out = new camib_model{camib::load_model(path)};
  });
}

void camib_model_free(camib_model* model) { delete model; }

camib_status camib_evaluate(const camib_model* model, const camib_dataset* dataset,
                            const char* split, char** out_metrics_json) {
  return wrap([&] {
    require(model != nullptr, "camib_evaluate: model is NULL");
    require(dataset != nullptr, "camib_evaluate: dataset is NULL");
    require(split != nullptr, "camib_evaluate: split is NULL");
    require(out_metrics_json != nullptr, "camib_evaluate: out_metrics_json is NULL");
    camib::MetricsReport r = camib::evaluate(model->value, split_of(dataset->value, split));
    nlohmann::json out = nlohmann::json::object();
    if (r.acc7) out["acc7"] = *r.acc7;
    if (r.acc2_incl_zero) out["acc2_incl_zero"] = *r.acc2_incl_zero;
    if (r.acc2_excl_zero) out["acc2_excl_zero"] = *r.acc2_excl_zero;
    if (r.f1_weighted) out["f1_weighted"] = *r.f1_weighted;
    if (r.mae) out["mae"] = *r.mae;
    if (r.corr) out["corr"] = *r.corr;
    *out_metrics_json = copy_string(out.dump(2) + "\n");
  });
}

camib_status camib_run_generate(const camib_run_config* config, char** out_summary) {
  return wrap([&] {
    require(config != nullptr, "camib_run_generate: config is NULL");
    require(out_summary != nullptr, "camib_run_generate: out_summary is NULL");
    *out_summary = copy_string(camib::run_generate_job(config->value));
  });
}

camib_status camib_run_train(const camib_run_config* config, char** out_summary) {
  return wrap([&] {
    require(config != nullptr, "camib_run_train: config is NULL");
    require(out_summary != nullptr, "camib_run_train: out_summary is NULL");
    *out_summary = copy_string(camib::run_train_job(config->value));
  });
}

camib_status camib_run_evaluate(const camib_run_config* config, const char* model_path,
                                const char* split, char** out_summary) {
  return wrap([&] {
    require(config != nullptr, "camib_run_evaluate: config is NULL");
    require(model_path != nullptr, "camib_run_evaluate: model_path is NULL");
    require(split != nullptr, "camib_run_evaluate: split is NULL");
    require(out_summary != nullptr, "camib_run_evaluate: out_summary is NULL");
    *out_summary = copy_string(camib::run_evaluate_job(config->value, model_path, split));
  });
}

camib_status camib_run_ablate(const camib_run_config* config, const char* variants_csv,
                              const char* seeds_csv, char** out_summary) {
  return wrap([&] {
    require(config != nullptr, "camib_run_ablate: config is NULL");
    require(variants_csv != nullptr, "camib_run_ablate: variants_csv is NULL");
    require(seeds_csv != nullptr, "camib_run_ablate: seeds_csv is NULL");
    require(out_summary != nullptr, "camib_run_ablate: out_summary is NULL");
    *out_summary = copy_string(camib::run_ablate_job(config->value, split_csv(variants_csv),
                                                     parse_seeds(seeds_csv)));
  });
}

camib_status camib_run_sweep(const camib_run_config* config, const char* grid_spec,
                             char** out_summary) {
  return wrap([&] {
    require(config != nullptr, "camib_run_sweep: config is NULL");
    require(grid_spec != nullptr, "camib_run_sweep: grid_spec is NULL");
    require(out_summary != nullptr, "camib_run_sweep: out_summary is NULL");
    *out_summary = copy_string(camib::run_sweep_job(config->value, parse_grid(grid_spec)));
  });
}

camib_status camib_run_report(const char* run_dir, char** out_summary) {
  return wrap([&] {
    require(run_dir != nullptr, "camib_run_report: run_dir is NULL");
    require(out_summary != nullptr, "camib_run_report: out_summary is NULL");
    *out_summary = copy_string(camib::run_report_job(run_dir));
  });
}

camib_status camib_verify_gradients(size_t instances, double tolerance, int mutate,
                                    int* out_all_pass, char** out_report) {
  return wrap([&] {
    require(out_all_pass != nullptr, "camib_verify_gradients: out_all_pass is NULL");
    require(out_report != nullptr, "camib_verify_gradients: out_report is NULL");
    camib::VerifyConfig cfg;
    if (instances > 0) cfg.instances = instances;
    if (tolerance > 0.0) cfg.tolerance = tolerance;
    cfg.mutate = mutate != 0;
    camib::VerificationReport report = camib::verify_all(cfg);
    *out_all_pass = report.all_pass() ? 1 : 0;
    *out_report = copy_string(report.to_text());
  });
}

} /* extern "C" */
