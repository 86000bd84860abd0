#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ttp/attacks.hpp"
#include "ttp/baselines.hpp"
#include "ttp/certify.hpp"
#include "ttp/metrics.hpp"

namespace ttp {

enum class Pipeline { Pretrain, Retrain, Alg1, Alg2, Alg3, Alg4, Synthetic, GaussianUniform };

Pipeline pipeline_from_string(const std::string& s);

// Flat key=value configuration with dotted section prefixes ('#' comments).
// Unknown keys are errors, surfaced when parsing finishes.
class ConfigMap {
 public:
  static ConfigMap from_file(const std::string& path);
  static ConfigMap from_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key);
  std::string get_str(const std::string& key, const std::string& dflt);
  double get_double(const std::string& key, double dflt);
  long get_long(const std::string& key, long dflt);
  bool get_bool(const std::string& key, bool dflt);
  std::optional<double> get_opt_double(const std::string& key);
  std::optional<long> get_opt_long(const std::string& key);
  std::vector<int> get_int_list(const std::string& key);

  // throws ConfigError when any key was never read
  void finish() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
};

struct ExperimentResult {
  MetricRow retain, test, forget;
  std::optional<Certificate> certificate;
  History history;
  std::string out_dir;
  std::vector<std::string> files_written;
};

// Runs a full pipeline (load -> split -> pretrain/warmup -> method -> optional
// attack -> metrics) and writes metrics.csv, history.csv, checkpoint.ttp,
// certificate.txt and split.idx.txt into out.dir. Errors carry stage names.
ExperimentResult run_experiment(ConfigMap& cfg);

ExperimentResult run_experiment_file(const std::string& config_path);

}  // namespace ttp
