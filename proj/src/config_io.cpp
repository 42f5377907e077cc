#include "camib/config_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "camib/errors.hpp"

namespace camib {
namespace {

using nlohmann::json;

// Wraps one JSON object and tracks which keys were consumed, so anything
// left over can be reported as unknown.
class StrictObject {
 public:
  StrictObject(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) {
    consumed_.push_back(key);
    return node_.contains(key);
  }

  const json& at(const char* key) const { return node_.at(key); }

  template <typename T>
  void read(const char* key, T& out, const char* kind) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": expected " + kind);
    }
  }

  void read_count(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number_unsigned())
      throw ConfigError(path_ + "." + key + ": expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void read_seed(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number_unsigned())
      throw ConfigError(path_ + "." + key + ": expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void read_real(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
    out = v.get<double>();
  }

  void read_flag(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_boolean()) throw ConfigError(path_ + "." + key + ": expected true or false");
    out = v.get<bool>();
  }

  void read_string(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = node_.at(key);
    if (!v.is_string()) throw ConfigError(path_ + "." + key + ": expected a string");
    out = v.get<std::string>();
  }

  // Call after all reads: any key never asked about is unknown.
  void reject_unknown() const {
    for (const auto& item : node_.items()) {
      bool known = false;
      for (const std::string& k : consumed_)
        if (k == item.key()) known = true;
      if (!known) throw ConfigError(path_ + "." + item.key() + ": unknown key");
    }
  }

  std::string child_path(const char* key) const { return path_ + "." + key; }

 private:
  const json& node_;
  std::string path_;
  std::vector<std::string> consumed_;
};

void parse_data(const json& node, BiasSpec& spec) {
  StrictObject o(node, "data");
  o.read_count("n_train", spec.n_train);
  o.read_count("n_eval", spec.n_eval);
  o.read_count("modalities", spec.modalities);
  o.read_count("seq_len", spec.seq_len);
  o.read_count("input_dim", spec.input_dim);
  if (o.has("task")) {
    const json& v = o.at("task");
    if (!v.is_string()) throw ConfigError("data.task: expected a string");
    const std::string task = v.get<std::string>();
    if (task == "classification")
      spec.task_kind = TaskKind::classification;
    else if (task == "regression")
      spec.task_kind = TaskKind::regression;
    else
      throw ConfigError("data.task: expected \"classification\" or \"regression\"");
  }
  o.read_count("num_classes", spec.num_classes);
  o.read_real("rho_train", spec.rho_train);
  o.read_real("rho_test", spec.rho_test);
  o.read_real("causal_snr", spec.causal_snr);
  o.read_real("shortcut_snr", spec.shortcut_snr);
  o.read_real("noise_sigma", spec.noise_sigma);
  o.read_seed("seed", spec.seed);
  o.reject_unknown();
}

void parse_ablation(const json& node, AblationFlags& flags) {
  StrictObject o(node, "train.ablation");
  o.read_flag("no_iv", flags.no_iv);
  o.read_flag("no_unif", flags.no_unif);
  o.read_flag("kl_to_mse", flags.kl_to_mse);
  o.read_flag("no_intv", flags.no_intv);
  o.read_flag("no_ib", flags.no_ib);
  o.reject_unknown();
}

void parse_train(const json& node, TrainConfig& cfg) {
  StrictObject o(node, "train");
  o.read_count("epochs", cfg.epochs);
  o.read_count("batch_size", cfg.batch_size);
  o.read_real("learning_rate", cfg.learning_rate);
  o.read_real("warmup_fraction", cfg.warmup_fraction);
  o.read_real("dropout_rate", cfg.dropout_rate);
  o.read_count("d", cfg.d);
  o.read_real("lambda1", cfg.lambda1);
  o.read_real("lambda2", cfg.lambda2);
  o.read_real("beta", cfg.beta);
  o.read_count("k_shortcuts", cfg.k_shortcuts);
  o.read_seed("seed", cfg.seed);
  o.read_count("mc_samples", cfg.mc_samples);
  o.read_real("weight_decay", cfg.weight_decay);
  o.read_real("prior_std", cfg.prior_std);
  if (o.has("ablation")) parse_ablation(o.at("ablation"), cfg.ablation);
  o.reject_unknown();
}

void parse_output(const json& node, OutputPaths& out) {
  StrictObject o(node, "output");
  o.read_string("run_dir", out.run_dir);
  o.read_string("dataset_path", out.dataset_path);
  o.reject_unknown();
}

}  // namespace

void RunConfigFile::validate() const {
  data.validate();
  train.validate();
  if (output.run_dir.empty()) throw ConfigError("output.run_dir: must not be empty");
}

RunConfigFile parse_run_config(const std::string& json_text) {
  json root = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded()) throw ConfigError("config: not valid JSON");
  StrictObject o(root, "config");
  RunConfigFile cfg;
  if (o.has("data")) parse_data(o.at("data"), cfg.data);
  if (o.has("train")) parse_train(o.at("train"), cfg.train);
  if (o.has("output")) parse_output(o.at("output"), cfg.output);
  o.reject_unknown();
  return cfg;
}

std::string run_config_to_json(const RunConfigFile& config) {
  json data{
      {"n_train", config.data.n_train},
      {"n_eval", config.data.n_eval},
      {"modalities", config.data.modalities},
      {"seq_len", config.data.seq_len},
      {"input_dim", config.data.input_dim},
      {"task", config.data.task_kind == TaskKind::classification ? "classification"
                                                                 : "regression"},
      {"num_classes", config.data.num_classes},
      {"rho_train", config.data.rho_train},
      {"rho_test", config.data.rho_test},
      {"causal_snr", config.data.causal_snr},
      {"shortcut_snr", config.data.shortcut_snr},
      {"noise_sigma", config.data.noise_sigma},
      {"seed", config.data.seed},
  };
  json ablation{
      {"no_iv", config.train.ablation.no_iv},
      {"no_unif", config.train.ablation.no_unif},
      {"kl_to_mse", config.train.ablation.kl_to_mse},
      {"no_intv", config.train.ablation.no_intv},
      {"no_ib", config.train.ablation.no_ib},
  };
  json train{
      {"epochs", config.train.epochs},
      {"batch_size", config.train.batch_size},
      {"learning_rate", config.train.learning_rate},
      {"warmup_fraction", config.train.warmup_fraction},
      {"dropout_rate", config.train.dropout_rate},
      {"d", config.train.d},
      {"lambda1", config.train.lambda1},
      {"lambda2", config.train.lambda2},
      {"beta", config.train.beta},
      {"k_shortcuts", config.train.k_shortcuts},
      {"seed", config.train.seed},
      {"mc_samples", config.train.mc_samples},
      {"weight_decay", config.train.weight_decay},
      {"prior_std", config.train.prior_std},
      {"ablation", ablation},
  };
  json output{
      {"run_dir", config.output.run_dir},
      {"dataset_path", config.output.dataset_path},
  };
  json root{{"data", data}, {"train", train}, {"output", output}};
  return root.dump(2) + "\n";
}

RunConfigFile load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

void save_run_config(const std::string& path, const RunConfigFile& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write config file: " + path);
  out << run_config_to_json(config);
  if (!out) throw IoError("failed while writing config file: " + path);
}

}  // namespace camib
