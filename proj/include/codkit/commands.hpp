#pragma once

#include "codkit/config.hpp"
#include "codkit/report.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace codkit {

/// Source and target data for one run seed.
std::pair<Dataset, Dataset> experiment_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct MetricOptions {
  std::filesystem::path source_csv, target_csv;
  std::vector<std::string> label_columns;
  std::vector<MetricKind> metrics;
  MetricConfig metric;  // kernel kinds, epsilon, ridge, variant
  BandwidthPolicy x_bandwidth{true, 1.0};
  BandwidthPolicy y_bandwidth{true, 0.5};
  std::uint64_t seed = 0;  // drives the subsample of the larger domain
};

/// Loads both files, subsamples the larger domain to the smaller size and
/// evaluates the requested metrics on the raw covariates.
Json run_metric(const MetricOptions& opts);

/// Writes source.csv, target.csv and manifest.json into `out_dir`.
Json run_synth(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir);
/// Spec and seed recorded in a manifest written by run_synth.
std::pair<SynthSpec, std::uint64_t> synth_from_manifest(const Json& manifest);

struct GradcheckResult {
  MetricKind metric = MetricKind::mmd2;
  double max_relative_error = 0.0;
  double tolerance = 1e-3;
  bool pass() const { return max_relative_error < tolerance; }
};

/// Random representation batches of size n x d drawn from `seed`, gaussian
/// x/y kernels at median bandwidths, epsilon = 0.1, lambda = 1e-2.
GradcheckResult run_gradcheck(MetricKind metric, Eigen::Index n, Eigen::Index d, std::uint64_t seed, double h);

/// Trains every seed in the config; writes report.json plus per-seed
/// checkpoint_seed<k>.json and embeddings_seed<k>.csv under `out_dir`.
Json run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// The five objective rows of the ablation table, in table order.
const std::vector<std::string>& ablation_rows();

/// Runs every ablation row across the config seeds; writes report.json and
/// ablation.md under `out_dir`.
Json run_ablate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Per-seed markdown table of a train report; written as summary.md when
/// output.markdown is set.
std::string train_markdown(const Json& report);

/// Markdown table of an ablation report.
std::string ablation_markdown(const Json& report);

}  // namespace codkit
