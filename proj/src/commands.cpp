#include "codkit/commands.hpp"

#include "codkit/errors.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace codkit {

namespace {

using Clock = std::chrono::steady_clock;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix vstack(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

/// `count` distinct row indices of a size-`n` dataset, in increasing order.
std::vector<Eigen::Index> sample_rows(Eigen::Index n, Eigen::Index count, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (count < n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<size_t>(count));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

Json header(const std::string& command, const Json& config) {
  return Json{{"schema_version", kReportSchemaVersion},
              {"command", command},
              {"run_id", make_run_id(command, config)},
              {"config", config}};
}

Json seeds_json(const std::vector<std::uint64_t>& seeds) {
  Json s = Json::array();
  for (auto seed : seeds) s.push_back(seed);
  return s;
}

Json metric_kernels(const MetricConfig& m) {
  return Json{{"x_kernel", to_string(m.x_kernel.kind)},
              {"x_bandwidth", m.x_kernel.bandwidth},
              {"y_kernel", to_string(m.y_kernel.kind)},
              {"y_bandwidth", m.y_kernel.bandwidth}};
}

/// All six metrics on the learned representations of a trained model. Target
/// labels are the model's own predictions, as during training.
Json final_metrics(const TrainedModel& model, const Dataset& source, const Dataset& target, const TrainConfig& tc,
                   std::uint64_t seed) {
  constexpr Eigen::Index kMaxRows = 256;
  const Eigen::Index n = std::min({source.size(), target.size(), kMaxRows});
  std::mt19937_64 rng(seed);
  const Dataset s = source.subset(sample_rows(source.size(), n, rng));
  const Dataset t = target.subset(sample_rows(target.size(), n, rng));
  const Forward fs = forward(model.params, model.x_scaler.apply(s.X));
  const Forward ft = forward(model.params, model.x_scaler.apply(t.X));
  const Matrix ys = model.y_scaler.apply(s.Y);
  const MetricConfig mcfg = resolve_metric_config(tc, fs.Z, ft.Z, ys);
  const GramBundle b = make_bundle(mcfg.x_kernel, mcfg.y_kernel, fs.Z, ft.Z, ys, ft.yhat);
  Json values = Json::object();
  for (MetricKind kind : all_metrics()) values[to_string(kind)] = to_json(evaluate(kind, b, mcfg));
  return Json{{"rows", n}, {"kernels", metric_kernels(mcfg)}, {"values", values}};
}

struct SeedRun {
  Json record;
  Json epoch_seconds;
};

SeedRun train_one(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path* artifacts) {
  auto [source, target] = experiment_data(cfg, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const TrainResult result = train(source, target, tc);

  Json history = Json::array();
  Json seconds = Json::array();
  for (const EpochRecord& r : result.history.epochs) {
    history.push_back(to_json(r));
    seconds.push_back(r.seconds);
  }
  Json final = Json::object();
  if (!result.history.epochs.empty()) {
    const EpochRecord& last = result.history.epochs.back();
    final = Json{{"target_mae", to_json(last.target_mae)},
                 {"source_mae_sum", last.source_mae_sum},
                 {"source_mse", last.source_mse},
                 {"loss", last.loss}};
  } else {
    final = Json{{"target_mae", to_json(evaluate_mae(result.model, target))},
                 {"source_mae_sum", evaluate_mae(result.model, source).sum}};
  }

  Json record{{"seed", seed}, {"objective", tc.terms.to_string()}, {"final", final}};
  if (cfg.origin == DataOrigin::synthetic) record["data_seed"] = cfg.data_seed + seed;
  if (artifacts) {
    record["metrics"] = final_metrics(result.model, source, target, tc, seed);
    const std::string suffix = "_seed" + std::to_string(seed);
    write_json(*artifacts / ("checkpoint" + suffix + ".json"), checkpoint_json(result, cfg, seed));
    write_embeddings(*artifacts / ("embeddings" + suffix + ".csv"), result.model, source, target);
    record["files"] = {{"checkpoint", "checkpoint" + suffix + ".json"}, {"embeddings", "embeddings" + suffix + ".csv"}};
  }
  record["history"] = history;
  return {record, seconds};
}

}  // namespace

std::pair<Dataset, Dataset> experiment_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.origin == DataOrigin::synthetic) return gen_synthetic(cfg.synth, cfg.data_seed + seed);
  Dataset source = load_csv(cfg.source_csv, cfg.label_columns);
  Dataset target = load_csv(cfg.target_csv, cfg.label_columns);
  source.domain = Domain::source;
  target.domain = Domain::target;
  target.visibility = LabelVisibility::eval_only;
  return {std::move(source), std::move(target)};
}

Json run_metric(const MetricOptions& opts) {
  const auto start = Clock::now();
  const std::string started = utc_now();
  if (opts.metrics.empty()) throw ConfigError("no metrics requested");
  Dataset source = load_csv(opts.source_csv, opts.label_columns);
  Dataset target = load_csv(opts.target_csv, opts.label_columns);
  if (source.features() != target.features())
    throw ShapeError("source and target have different feature counts (" + std::to_string(source.features()) +
                     " vs " + std::to_string(target.features()) + ")");
  const Eigen::Index n = std::min(source.size(), target.size());
  if (n < 2) throw DataError("metric: need at least 2 rows in each domain");

  std::mt19937_64 rng(opts.seed);
  std::string subsampled = "none";
  if (source.size() > n) {
    source = source.subset(sample_rows(source.size(), n, rng));
    subsampled = "source";
  } else if (target.size() > n) {
    target = target.subset(sample_rows(target.size(), n, rng));
    subsampled = "target";
  }

  MetricConfig m = opts.metric;
  if (m.x_kernel.kind == KernelKind::gaussian) m.x_kernel.bandwidth = opts.x_bandwidth.resolve(vstack(source.X, target.X));
  if (m.y_kernel.kind == KernelKind::gaussian) m.y_kernel.bandwidth = opts.y_bandwidth.resolve(vstack(source.Y, target.Y));
  m.validate();
  const GramBundle b = make_bundle(m.x_kernel, m.y_kernel, source.X, target.X, source.Y, target.Y);

  Json names = Json::array();
  Json values = Json::object();
  for (MetricKind kind : opts.metrics) {
    names.push_back(to_string(kind));
    values[to_string(kind)] = to_json(evaluate(kind, b, m));
  }
  Json config{{"source_csv", opts.source_csv.string()},
              {"target_csv", opts.target_csv.string()},
              {"label_columns", opts.label_columns},
              {"metrics", names},
              {"metric.x_kernel", to_string(opts.metric.x_kernel.kind)},
              {"metric.y_kernel", to_string(opts.metric.y_kernel.kind)},
              {"metric.delta_tolerance", format_double(opts.metric.y_kernel.delta_tolerance)},
              {"metric.x_bandwidth", opts.x_bandwidth.to_string()},
              {"metric.y_bandwidth", opts.y_bandwidth.to_string()},
              {"metric.epsilon", format_double(opts.metric.epsilon)},
              {"metric.ridge_lambda", format_double(opts.metric.ridge_lambda)},
              {"metric.mod_variant", opts.metric.mod_variant == ModVariant::corrected ? "corrected" : "literal"},
              {"seed", opts.seed}};
  Json report = header("metric", config);
  report["seeds"] = Json::array({opts.seed});
  report["rows"] = n;
  report["subsampled"] = subsampled;
  report["kernels"] = metric_kernels(m);
  report["metrics"] = values;
  report["timing"] = {{"started_utc", started}, {"wall_seconds", seconds_since(start)}};
  require_finite_json(report);
  return report;
}

Json run_synth(const SynthSpec& spec, std::uint64_t seed, const std::filesystem::path& out_dir) {
  const auto [source, target] = gen_synthetic(spec, seed);
  std::filesystem::create_directories(out_dir);
  write_csv(source, out_dir / "source.csv");
  write_csv(target, out_dir / "target.csv");
  Json manifest{{"schema_version", kReportSchemaVersion},
                {"command", "synth"},
                {"seed", seed},
                {"spec",
                 {{"n", spec.n},
                  {"source_law", {spec.source_law.lo, spec.source_law.hi}},
                  {"target_law", {spec.target_law.lo, spec.target_law.hi}},
                  {"curve", to_string(spec.curve)},
                  {"arc_span", spec.arc_span},
                  {"rotation", spec.rotation},
                  {"translation", {spec.translation_x, spec.translation_y}},
                  {"scale", spec.scale},
                  {"noise", spec.noise}}},
                {"files", {{"source", "source.csv"}, {"target", "target.csv"}}},
                {"feature_columns", source.feature_names},
                {"label_columns", source.label_names}};
  write_json(out_dir / "manifest.json", manifest);
  return manifest;
}

std::pair<SynthSpec, std::uint64_t> synth_from_manifest(const Json& manifest) {
  try {
    const Json& s = manifest.at("spec");
    SynthSpec spec;
    spec.n = s.at("n").get<Eigen::Index>();
    spec.source_law = {s.at("source_law").at(0).get<double>(), s.at("source_law").at(1).get<double>()};
    spec.target_law = {s.at("target_law").at(0).get<double>(), s.at("target_law").at(1).get<double>()};
    spec.curve = curve_from_string(s.at("curve").get<std::string>());
    spec.arc_span = s.at("arc_span").get<double>();
    spec.rotation = s.at("rotation").get<double>();
    spec.translation_x = s.at("translation").at(0).get<double>();
    spec.translation_y = s.at("translation").at(1).get<double>();
    spec.scale = s.at("scale").get<double>();
    spec.noise = s.at("noise").get<double>();
    spec.validate();
    return {spec, manifest.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed synth manifest: ") + e.what());
  }
}

GradcheckResult run_gradcheck(MetricKind metric, Eigen::Index n, Eigen::Index d, std::uint64_t seed, double h) {
  if (n < 2 || d < 1) throw ConfigError("gradcheck needs n >= 2 and d >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  const Matrix Zs = draw(n, d), Zt = draw(n, d), ys = draw(n, 1), yt = draw(n, 1);
  MetricConfig cfg;
  cfg.x_kernel = KernelSpec::gaussian(median_heuristic(vstack(Zs, Zt)));
  cfg.y_kernel = KernelSpec::gaussian(median_heuristic(vstack(ys, yt)));
  cfg.epsilon = 0.1;
  cfg.ridge_lambda = 1e-2;
  GradcheckResult r;
  r.metric = metric;
  r.max_relative_error = finite_diff_check(metric, Zs, Zt, ys, yt, cfg, h);
  return r;
}

Json run_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const auto start = Clock::now();
  const std::string started = utc_now();
  std::filesystem::create_directories(out_dir);

  Json report = header("train", config_json(cfg));
  report["seeds"] = seeds_json(cfg.seeds);
  Json runs = Json::array();
  Json seconds = Json::object();
  std::vector<double> maes;
  for (auto seed : cfg.seeds) {
    SeedRun run = train_one(cfg, seed, &out_dir);
    maes.push_back(run.record["final"]["target_mae"]["sum"].get<double>());
    seconds[std::to_string(seed)] = run.epoch_seconds;
    runs.push_back(std::move(run.record));
  }
  report["runs"] = runs;
  report["aggregate"] = {{"objective", cfg.train.terms.to_string()}, {"target_mae_sum", to_json(summarize(maes))}};
  report["timing"] = {{"started_utc", started}, {"wall_seconds", seconds_since(start)}, {"epoch_seconds", seconds}};
  write_json(out_dir / "report.json", report);
  if (cfg.markdown) std::ofstream(out_dir / "summary.md", std::ios::binary) << train_markdown(report);
  return report;
}

const std::vector<std::string>& ablation_rows() {
  static const std::vector<std::string> rows{"mse", "mse+kgw", "mse+cod", "mse+kgw+cod", "mse+kgw+cod_mod"};
  return rows;
}

Json run_ablate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  const auto start = Clock::now();
  const std::string started = utc_now();
  std::filesystem::create_directories(out_dir);

  Json config = config_json(cfg);
  config.erase("train.terms");
  Json report = header("ablate", config);
  report["seeds"] = seeds_json(cfg.seeds);

  std::vector<std::uint64_t> seeds = cfg.seeds;
  std::sort(seeds.begin(), seeds.end());
  Json rows = Json::array();
  Json row_seconds = Json::object();
  for (const std::string& objective : ablation_rows()) {
    const auto row_start = Clock::now();
    ExperimentConfig row_cfg = cfg;
    row_cfg.train.terms = ObjectiveTerms::parse(objective);
    Json runs = Json::array();
    std::vector<double> maes;
    for (auto seed : seeds) {
      SeedRun run = train_one(row_cfg, seed, nullptr);
      maes.push_back(run.record["final"]["target_mae"]["sum"].get<double>());
      runs.push_back(std::move(run.record));
    }
    rows.push_back({{"objective", objective}, {"target_mae_sum", to_json(summarize(maes))}, {"runs", runs}});
    row_seconds[objective] = seconds_since(row_start);
  }
  report["rows"] = rows;
  report["timing"] = {{"started_utc", started}, {"wall_seconds", seconds_since(start)}, {"row_seconds", row_seconds}};
  write_json(out_dir / "report.json", report);
  std::ofstream(out_dir / "ablation.md", std::ios::binary) << ablation_markdown(report);
  return report;
}

std::string train_markdown(const Json& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "| Seed | Target MAE | Source MAE | Source MSE |\n";
  out << "|---|---|---|---|\n";
  for (const Json& run : report.at("runs")) {
    const Json& f = run.at("final");
    out << "| " << run.at("seed").get<std::uint64_t>() << " | " << f.at("target_mae").at("sum").get<double>() << " | "
        << f.at("source_mae_sum").get<double>() << " | ";
    if (f.contains("source_mse")) out << f.at("source_mse").get<double>();
    else out << "n/a";
    out << " |\n";
  }
  const Json& s = report.at("aggregate").at("target_mae_sum");
  out << "\nMedian target MAE " << s.at("median").get<double>() << " (IQR " << s.at("iqr").get<double>() << ")\n";
  return out.str();
}

std::string ablation_markdown(const Json& report) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "| Objective | Median target MAE | IQR | Per-seed target MAE |\n";
  out << "|---|---|---|---|\n";
  for (const Json& row : report.at("rows")) {
    const Json& s = row.at("target_mae_sum");
    out << "| " << row.at("objective").get<std::string>() << " | " << s.at("median").get<double>() << " | "
        << s.at("iqr").get<double>() << " | ";
    bool first = true;
    for (const Json& run : row.at("runs")) {
      out << (first ? "" : ", ") << run.at("final").at("target_mae").at("sum").get<double>();
      first = false;
    }
    out << " |\n";
  }
  return out.str();
}

}  // namespace codkit
