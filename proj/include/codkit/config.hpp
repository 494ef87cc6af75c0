#pragma once

#include "codkit/data.hpp"
#include "codkit/learning.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace codkit {

/// Flat key/value text: one `section.key = value` per line, `#` starts a
/// comment, blank lines ignored. Duplicate keys are an error.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& origin = "<config>");
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  /// Value for `key`; throws ConfigError naming the key when absent.
  const std::string& require(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

enum class DataOrigin { synthetic, csv };

/// Everything one experiment needs: where the data comes from, the metric
/// settings, the trainer settings and the seeds to run.
struct ExperimentConfig {
  DataOrigin origin = DataOrigin::synthetic;
  SynthSpec synth;
  std::uint64_t data_seed = 100;  // per run, the synthetic task uses data_seed + run seed
  std::filesystem::path source_csv, target_csv;
  std::vector<std::string> label_columns;
  TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "out";
  bool markdown = false;  // also write a markdown table next to report.json

  void validate() const;
  /// Canonical key/value echo of every setting that affects results. The
  /// output directory is not included.
  std::map<std::string, std::string> echo() const;
};

/// Builds a config from parsed keys. `data.origin` is required; unknown keys
/// are rejected.
ExperimentConfig experiment_from_keys(const KeyValueFile& kv);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// The reference rotation-curve task used by the end-to-end checks.
ExperimentConfig reference_experiment();

/// Formatting shared by config echoes and reports: shortest round-trip.
std::string format_double(double v);
double parse_double_strict(const std::string& text, const std::string& key);
std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& key);

}  // namespace codkit
