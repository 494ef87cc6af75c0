#include "codkit/commands.hpp"
#include "codkit/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <sstream>
#include <iomanip>
#include <iostream>
#include <optional>

using namespace codkit;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Interval interval_arg(const std::string& text, const char* name) {
  const auto parts = split_list(text);
  if (parts.size() != 2) throw ConfigError(std::string(name) + ": expected 'lo,hi'");
  return {parse_double_strict(parts[0], name), parse_double_strict(parts[1], name)};
}

void print_metrics(const Json& report) {
  std::cout << "rows compared: " << report["rows"].get<long>() << " (subsampled: "
            << report["subsampled"].get<std::string>() << ")\n";
  for (const auto& [name, value] : report["metrics"].items()) {
    std::cout << std::left << std::setw(10) << name << " " << std::setprecision(10) << value["total"].get<double>();
    if (value["components"].size() > 1) {
      std::cout << "  [";
      bool first = true;
      for (const auto& [c, v] : value["components"].items()) {
        std::cout << (first ? "" : ", ") << c << " " << std::setprecision(6) << v.get<double>();
        first = false;
      }
      std::cout << "]";
    }
    std::cout << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional operator discrepancy metrics and domain adaptation regression"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> config_path;
  app.add_option("--seed", seed, "Random seed (overrides run.seeds for train/ablate)");
  app.add_option("--out", out, "Output directory");
  app.add_option("--config", config_path, "Experiment config file (key = value)");

  // metric
  auto* metric = app.add_subcommand("metric", "Evaluate discrepancy metrics between two CSV files");
  metric->fallthrough();
  MetricOptions mopt;
  std::string labels = "y1", metrics_list = "mmd2,kgw2,cmmd2,cmmd_mod,cod2,cod_mod";
  std::string x_kernel = "gaussian", y_kernel = "gaussian", x_bw = "median", y_bw = "median*0.5", variant = "corrected";
  double delta_tol = 0.0;
  metric->add_option("--source", mopt.source_csv, "Source CSV")->required();
  metric->add_option("--target", mopt.target_csv, "Target CSV")->required();
  metric->add_option("--labels", labels, "Comma-separated label columns")->capture_default_str();
  metric->add_option("--metrics", metrics_list, "Comma-separated metric names")->capture_default_str();
  metric->add_option("--x-kernel", x_kernel, "gaussian | linear")->capture_default_str();
  metric->add_option("--y-kernel", y_kernel, "gaussian | linear | delta")->capture_default_str();
  metric->add_option("--x-bandwidth", x_bw, "Number, 'median' or 'median*<f>'")->capture_default_str();
  metric->add_option("--y-bandwidth", y_bw, "Number, 'median' or 'median*<f>'")->capture_default_str();
  metric->add_option("--epsilon", mopt.metric.epsilon, "Conditional covariance regularizer")->capture_default_str();
  metric->add_option("--ridge", mopt.metric.ridge_lambda, "Ridge on label kernel inverses")->capture_default_str();
  metric->add_option("--delta-tolerance", delta_tol, "Label equality tolerance of the delta kernel");
  metric->add_option("--mod-variant", variant, "corrected | literal")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic conditional-shift task");
  synth->fallthrough();
  SynthSpec spec;
  std::string source_law, target_law, curve, translation, manifest_path;
  std::optional<double> arc_span, rotation, scale, noise;
  std::optional<Eigen::Index> n_rows;
  synth->add_option("--n", n_rows, "Samples per domain (default 200)");
  synth->add_option("--source-law", source_law, "Source label interval 'lo,hi'");
  synth->add_option("--target-law", target_law, "Target label interval 'lo,hi'");
  synth->add_option("--curve", curve, "circle_arc | spiral | polynomial");
  synth->add_option("--arc-span", arc_span, "Radians swept over y in [0,1]");
  synth->add_option("--rotation", rotation, "Target rotation in radians");
  synth->add_option("--translation", translation, "Target translation 'x,y'");
  synth->add_option("--scale", scale, "Target scale factor");
  synth->add_option("--noise", noise, "Gaussian noise standard deviation");
  synth->add_option("--manifest", manifest_path, "Regenerate from a manifest.json written earlier");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train with the configured objective");
  train_cmd->fallthrough();

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic metric gradients with finite differences");
  grad->fallthrough();
  std::string grad_metric;
  Eigen::Index grad_n = 6, grad_d = 3;
  double grad_h = 1e-5;
  grad->add_option("--metric", grad_metric, "Metric name")->required();
  grad->add_option("--n", grad_n, "Batch size")->capture_default_str();
  grad->add_option("--d", grad_d, "Representation width")->capture_default_str();
  grad->add_option("--step", grad_h, "Finite-difference step")->capture_default_str();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Run the five-row objective ablation across seeds");
  ablate->fallthrough();
  std::string seeds_text;
  ablate->add_option("--seeds", seeds_text, "Seed list, e.g. '0,1,2' or '0-4'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (metric->parsed()) {
      mopt.label_columns = split_list(labels);
      for (const auto& name : split_list(metrics_list)) mopt.metrics.push_back(metric_from_string(name));
      mopt.metric.x_kernel.kind = kernel_kind_from_string(x_kernel);
      mopt.metric.y_kernel.kind = kernel_kind_from_string(y_kernel);
      mopt.metric.y_kernel.delta_tolerance = delta_tol;
      mopt.x_bandwidth = BandwidthPolicy::parse(x_bw);
      mopt.y_bandwidth = BandwidthPolicy::parse(y_bw);
      if (variant == "corrected") mopt.metric.mod_variant = ModVariant::corrected;
      else if (variant == "literal") mopt.metric.mod_variant = ModVariant::literal;
      else throw ConfigError("--mod-variant: expected corrected or literal");
      mopt.seed = seed.value_or(0);
      const Json report = run_metric(mopt);
      print_metrics(report);
      if (out) {
        write_json(std::filesystem::path(*out) / "report.json", report);
        std::cout << "report: " << (std::filesystem::path(*out) / "report.json").string() << "\n";
      }
      return 0;
    }

    if (synth->parsed()) {
      std::uint64_t synth_seed = seed.value_or(0);
      if (!manifest_path.empty()) {
        std::tie(spec, synth_seed) = synth_from_manifest(read_json(manifest_path));
        if (seed) synth_seed = *seed;
      } else if (config_path) {
        const ExperimentConfig c = load_experiment(*config_path);
        if (c.origin != DataOrigin::synthetic) throw ConfigError("synth needs data.origin = synthetic");
        spec = c.synth;
        synth_seed = seed.value_or(c.data_seed);
      }
      if (n_rows) spec.n = *n_rows;
      if (!source_law.empty()) spec.source_law = interval_arg(source_law, "--source-law");
      if (!target_law.empty()) spec.target_law = interval_arg(target_law, "--target-law");
      if (!curve.empty()) spec.curve = curve_from_string(curve);
      if (arc_span) spec.arc_span = *arc_span;
      if (rotation) spec.rotation = *rotation;
      if (!translation.empty()) {
        const Interval t = interval_arg(translation, "--translation");
        spec.translation_x = t.lo;
        spec.translation_y = t.hi;
      }
      if (scale) spec.scale = *scale;
      if (noise) spec.noise = *noise;
      const std::filesystem::path dir = out.value_or("synth");
      run_synth(spec, synth_seed, dir);
      std::cout << "wrote " << (dir / "source.csv").string() << ", " << (dir / "target.csv").string() << ", "
                << (dir / "manifest.json").string() << "\n";
      return 0;
    }

    if (grad->parsed()) {
      const MetricKind kind = metric_from_string(grad_metric);
      const GradcheckResult r = run_gradcheck(kind, grad_n, grad_d, seed.value_or(0), grad_h);
      std::cout << "gradcheck " << to_string(kind) << " n=" << grad_n << " d=" << grad_d
                << " max_relative_error=" << std::setprecision(6) << r.max_relative_error << " tolerance=" << r.tolerance
                << " " << (r.pass() ? "PASS" : "FAIL") << "\n";
      return r.pass() ? 0 : kExitNumerical;
    }

    // train and ablate share the experiment config
    if (!config_path) throw ConfigError("--config is required for this command");
    ExperimentConfig cfg = load_experiment(*config_path);
    if (seed) cfg.seeds = {*seed};
    if (ablate->parsed() && !seeds_text.empty()) cfg.seeds = parse_seed_list(seeds_text, "--seeds");
    if (out) cfg.out_dir = *out;
    cfg.validate();

    if (train_cmd->parsed()) {
      const Json report = run_train(cfg, cfg.out_dir);
      for (const Json& run : report["runs"])
        std::cout << "seed " << run["seed"].get<std::uint64_t>() << "  target MAE sum "
                  << std::setprecision(6) << run["final"]["target_mae"]["sum"].get<double>() << "\n";
      std::cout << "report: " << (cfg.out_dir / "report.json").string() << "\n";
      return 0;
    }

    const Json report = run_ablate(cfg, cfg.out_dir);
    std::cout << ablation_markdown(report);
    std::cout << "report: " << (cfg.out_dir / "report.json").string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
