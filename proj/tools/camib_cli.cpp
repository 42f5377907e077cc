// Command-line front end. Talks to the core exclusively through the C API in
// camib.h, so it doubles as a living example of driving the shared library.
//
// Exit codes: 0 success, 1 invalid input (bad flags, bad config, missing
// files), 2 runtime failure (training divergence, failed verification).

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "camib.h"

namespace {

enum class LogLevel { off = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("CAMIB_LOG");
  if (!env) return LogLevel::off;
  if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
  if (std::strcmp(env, "info") == 0) return LogLevel::info;
  return LogLevel::off;
}

void log_info(const std::string& message) {
  if (log_level() >= LogLevel::info) std::fprintf(stderr, "[camib] %s\n", message.c_str());
}

void log_debug(const std::string& message) {
  if (log_level() >= LogLevel::debug) std::fprintf(stderr, "[camib] %s\n", message.c_str());
}

// Maps a C-API status to the CLI exit code.
int exit_code_for(camib_status status) {
  switch (status) {
    case CAMIB_OK:
      return 0;
    case CAMIB_INVALID_ARGUMENT:
    case CAMIB_IO_ERROR:
      return 1;
    default:
      return 2;
  }
}

int fail(camib_status status) {
  std::fprintf(stderr, "error: %s\n", camib_last_error());
  return exit_code_for(status);
}

using ConfigPtr = std::unique_ptr<camib_run_config, decltype(&camib_run_config_free)>;

// Loads a config file, reporting the failure like any other command error.
int load_config(const std::string& path, ConfigPtr& out) {
  camib_run_config* raw = nullptr;
  camib_status status = camib_run_config_load(path.c_str(), &raw);
  if (status != CAMIB_OK) return fail(status);
  out = ConfigPtr(raw, &camib_run_config_free);
  if (log_level() >= LogLevel::debug) {
    char* json = nullptr;
    if (camib_run_config_to_json(raw, &json) == CAMIB_OK) {
      log_debug("effective config:\n" + std::string(json));
      camib_string_free(json);
    }
  }
  return 0;
}

// Runs a job returning a summary string; prints it and maps the status.
template <typename Job>
int run_text_job(Job&& job) {
  char* text = nullptr;
  camib_status status = job(&text);
  if (status != CAMIB_OK) return fail(status);
  std::fputs(text, stdout);
  camib_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CaMIB laboratory: synthetic multimodal debiasing experiments"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every subcommand");

  std::string config_path, model_path, split = "test_id", variants, seeds = "1",
              grid, run_dir;
  std::size_t instances = 0;
  double tolerance = 0.0;
  bool mutate = false;

  CLI::App* cmd_generate =
      app.add_subcommand("generate-data", "generate the synthetic dataset for a config");
  cmd_generate->add_option("config", config_path, "run configuration JSON file")->required();

  CLI::App* cmd_train = app.add_subcommand("train", "train a model and write run artifacts");
  cmd_train->add_option("config", config_path, "run configuration JSON file")->required();

  CLI::App* cmd_eval = app.add_subcommand("evaluate", "evaluate a saved model on one split");
  cmd_eval->add_option("config", config_path, "run configuration JSON file")->required();
  cmd_eval->add_option("--model", model_path, "path to a model.bin")->required();
  cmd_eval->add_option("--split", split, "train | val | test_id | test_ood");

  CLI::App* cmd_verify =
      app.add_subcommand("verify-gradients", "check closed-form derivatives against "
                                             "reverse mode and finite differences");
  cmd_verify->add_option("--instances", instances, "random instances per check");
  cmd_verify->add_option("--tol", tolerance, "relative tolerance for derivative checks");
  cmd_verify->add_flag("--mutate", mutate,
                       "corrupt one formula on purpose; the suite must catch it");

  CLI::App* cmd_ablate = app.add_subcommand("ablate", "train ablation variants across seeds");
  cmd_ablate->add_option("config", config_path, "run configuration JSON file")->required();
  cmd_ablate->add_option("--variants", variants,
                         "comma list from no_iv,no_unif,kl_to_mse,no_intv,no_ib (empty = "
                         "full model only)");
  cmd_ablate->add_option("--seeds", seeds, "comma list of seeds (default 1)");

  CLI::App* cmd_sweep = app.add_subcommand("sweep", "hyperparameter grid sweep");
  cmd_sweep->add_option("config", config_path, "run configuration JSON file")->required();
  cmd_sweep->add_option("--grid", grid,
                        "axes 'lambda1=...;lambda2=...;beta=...' (omitted axes fixed)");

  CLI::App* cmd_report = app.add_subcommand("report", "summarize a finished run directory");
  cmd_report->add_option("run_dir", run_dir, "directory written by train/ablate/sweep")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exits 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fprintf(stderr, "%s", app.help().c_str());
    return 1;
  }

  if (cmd_generate->parsed()) {
    ConfigPtr config(nullptr, &camib_run_config_free);
    if (int rc = load_config(config_path, config)) return rc;
    log_info("generating dataset");
    return run_text_job([&](char** out) { return camib_run_generate(config.get(), out); });
  }

  if (cmd_train->parsed()) {
    ConfigPtr config(nullptr, &camib_run_config_free);
    if (int rc = load_config(config_path, config)) return rc;
    log_info("training");
    return run_text_job([&](char** out) { return camib_run_train(config.get(), out); });
  }

  if (cmd_eval->parsed()) {
    ConfigPtr config(nullptr, &camib_run_config_free);
    if (int rc = load_config(config_path, config)) return rc;
    log_info("evaluating " + model_path + " on " + split);
    return run_text_job([&](char** out) {
      return camib_run_evaluate(config.get(), model_path.c_str(), split.c_str(), out);
    });
  }

  if (cmd_verify->parsed()) {
    log_info("running gradient verification");
    int all_pass = 0;
    char* report = nullptr;
    camib_status status =
        camib_verify_gradients(instances, tolerance, mutate ? 1 : 0, &all_pass, &report);
    if (status != CAMIB_OK) return fail(status);
    std::fputs(report, stdout);
    camib_string_free(report);
    if (mutate) {
      // The planted corruption must be detected; "all pass" is the failure.
      if (all_pass) {
        std::fprintf(stderr, "error: planted corruption went undetected\n");
        return 2;
      }
      std::printf("planted corruption detected as intended\n");
      return 0;
    }
    return all_pass ? 0 : 2;
  }

  if (cmd_ablate->parsed()) {
    ConfigPtr config(nullptr, &camib_run_config_free);
    if (int rc = load_config(config_path, config)) return rc;
    log_info("ablation over variants '" + variants + "' seeds " + seeds);
    return run_text_job([&](char** out) {
      return camib_run_ablate(config.get(), variants.c_str(), seeds.c_str(), out);
    });
  }

  if (cmd_sweep->parsed()) {
    ConfigPtr config(nullptr, &camib_run_config_free);
    if (int rc = load_config(config_path, config)) return rc;
    log_info("sweep over grid '" + grid + "'");
    return run_text_job(
        [&](char** out) { return camib_run_sweep(config.get(), grid.c_str(), out); });
  }

  if (cmd_report->parsed()) {
    log_info("reporting " + run_dir);
    return run_text_job([&](char** out) { return camib_run_report(run_dir.c_str(), out); });
  }

  std::fprintf(stderr, "%s", app.help().c_str());
  return 1;
}
