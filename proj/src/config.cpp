#include "codkit/config.hpp"

#include "codkit/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace codkit {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double_strict(const std::string& text, const std::string& key) {
  double v = 0.0;
  const std::string t = trim(text);
  const char* first = t.data();
  const char* last = first + t.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last || !std::isfinite(v))
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  return v;
}

namespace {

long long parse_int(const std::string& text, const std::string& key) {
  long long v = 0;
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  return v;
}

long long parse_count(const std::string& text, const std::string& key) {
  const long long v = parse_int(text, key);
  if (v < 0) throw ConfigError(key + ": expected a nonnegative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

/// Angles accept a plain number of radians or a multiple of pi ("0.5pi").
double parse_angle(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
    const std::string factor = t.substr(0, t.size() - 2);
    return (factor.empty() ? 1.0 : parse_double_strict(factor, key)) * std::numbers::pi;
  }
  return parse_double_strict(t, key);
}

Interval parse_interval(const std::string& text, const std::string& key) {
  const auto parts = split(text, ',');
  if (parts.size() != 2) throw ConfigError(key + ": expected 'lo, hi', got '" + text + "'");
  return {parse_double_strict(parts[0], key), parse_double_strict(parts[1], key)};
}

std::string interval_text(const Interval& i) { return format_double(i.lo) + "," + format_double(i.hi); }

KernelSpec parse_kernel(const std::string& text, const std::string& key) {
  try {
    KernelSpec k;
    k.kind = kernel_kind_from_string(trim(text));
    return k;
  } catch (const Error&) {
    throw ConfigError(key + ": unknown kernel '" + text + "' (expected gaussian, linear or delta)");
  }
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& text, const std::string& key) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split(text, ',')) {
    const auto dash = item.find('-', 1);
    if (dash != std::string::npos) {
      const long long lo = parse_int(item.substr(0, dash), key), hi = parse_int(item.substr(dash + 1), key);
      if (lo < 0 || hi < lo) throw ConfigError(key + ": bad seed range '" + item + "'");
      for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
    } else {
      const long long s = parse_int(item, key);
      if (s < 0) throw ConfigError(key + ": seeds must be nonnegative");
      seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (seeds.empty()) throw ConfigError(key + ": at least one seed is required");
  return seeds;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
    if (!kv.values_.emplace(key, value).second)
      throw ConfigError(origin + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::string& KeyValueFile::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required config field '" + key + "' in " + origin_);
  return it->second;
}

void ExperimentConfig::validate() const {
  if (origin == DataOrigin::synthetic) {
    synth.validate();
    if (!source_csv.empty() || !target_csv.empty())
      throw ConfigError("data.origin = synthetic does not take csv paths");
  } else {
    if (source_csv.empty()) throw ConfigError("missing required config field 'data.source_csv'");
    if (target_csv.empty()) throw ConfigError("missing required config field 'data.target_csv'");
    if (label_columns.empty()) throw ConfigError("missing required config field 'data.label_columns'");
  }
  train.validate();
  train.metric.validate();
  if (seeds.empty()) throw ConfigError("run.seeds: at least one seed is required");
}

namespace {

std::string hidden_text(const std::vector<Eigen::Index>& hidden) {
  std::vector<std::string> parts;
  for (auto h : hidden) parts.push_back(std::to_string(h));
  return parts.empty() ? "none" : join(parts, ",");
}

std::string mod_variant_text(ModVariant v) { return v == ModVariant::corrected ? "corrected" : "literal"; }

}  // namespace

std::map<std::string, std::string> ExperimentConfig::echo() const {
  std::map<std::string, std::string> e;
  e["data.origin"] = origin == DataOrigin::synthetic ? "synthetic" : "csv";
  if (origin == DataOrigin::synthetic) {
    e["synth.n"] = std::to_string(synth.n);
    e["synth.source_law"] = interval_text(synth.source_law);
    e["synth.target_law"] = interval_text(synth.target_law);
    e["synth.curve"] = to_string(synth.curve);
    e["synth.arc_span"] = format_double(synth.arc_span);
    e["synth.rotation"] = format_double(synth.rotation);
    e["synth.translation"] = format_double(synth.translation_x) + "," + format_double(synth.translation_y);
    e["synth.scale"] = format_double(synth.scale);
    e["synth.noise"] = format_double(synth.noise);
    e["synth.seed"] = std::to_string(data_seed);
  } else {
    e["data.source_csv"] = source_csv.string();
    e["data.target_csv"] = target_csv.string();
    e["data.label_columns"] = join(label_columns, ",");
  }
  const MetricConfig& m = train.metric;
  e["metric.x_kernel"] = to_string(m.x_kernel.kind);
  e["metric.y_kernel"] = to_string(m.y_kernel.kind);
  e["metric.delta_tolerance"] = format_double(m.y_kernel.delta_tolerance);
  e["metric.x_bandwidth"] = train.x_bandwidth.to_string();
  e["metric.y_bandwidth"] = train.y_bandwidth.to_string();
  e["metric.epsilon"] = format_double(m.epsilon);
  e["metric.ridge_lambda"] = format_double(m.ridge_lambda);
  e["metric.mod_variant"] = mod_variant_text(m.mod_variant);
  e["train.lambda1"] = format_double(train.lambda1);
  e["train.lambda2"] = format_double(train.lambda2);
  e["train.terms"] = train.terms.to_string();
  e["train.batch_size"] = std::to_string(train.batch_size);
  e["train.epochs"] = std::to_string(train.epochs);
  e["train.warmup_epochs"] = std::to_string(train.warmup_epochs);
  e["train.learning_rate"] = format_double(train.learning_rate);
  e["train.adam_beta1"] = format_double(train.adam_beta1);
  e["train.adam_beta2"] = format_double(train.adam_beta2);
  e["train.adam_eps"] = format_double(train.adam_eps);
  e["train.hidden"] = hidden_text(train.hidden);
  e["train.standardize_inputs"] = train.standardize_inputs ? "true" : "false";
  std::vector<std::string> s;
  for (auto seed : seeds) s.push_back(std::to_string(seed));
  e["run.seeds"] = join(s, ",");
  return e;
}

ExperimentConfig experiment_from_keys(const KeyValueFile& kv) {
  ExperimentConfig c;
  std::set<std::string> used;
  auto get = [&](const std::string& key) -> const std::string* {
    used.insert(key);
    const auto it = kv.values().find(key);
    return it == kv.values().end() ? nullptr : &it->second;
  };

  const std::string& origin = kv.require("data.origin");
  used.insert("data.origin");
  if (origin == "synthetic") c.origin = DataOrigin::synthetic;
  else if (origin == "csv") c.origin = DataOrigin::csv;
  else throw ConfigError("data.origin: expected synthetic or csv, got '" + origin + "'");

  if (c.origin == DataOrigin::csv) {
    c.source_csv = kv.require("data.source_csv");
    c.target_csv = kv.require("data.target_csv");
    c.label_columns = split(kv.require("data.label_columns"), ',');
    used.insert({"data.source_csv", "data.target_csv", "data.label_columns"});
    for (const auto& [key, value] : kv.values())
      if (key.rfind("synth.", 0) == 0)
        throw ConfigError("'" + key + "' conflicts with data.origin = csv (exactly one data origin is allowed)");
  } else {
    for (const char* key : {"data.source_csv", "data.target_csv", "data.label_columns"})
      if (kv.has(key))
        throw ConfigError(std::string("'") + key +
                          "' conflicts with data.origin = synthetic (exactly one data origin is allowed)");
    if (auto v = get("synth.n")) c.synth.n = parse_count(*v, "synth.n");
    if (auto v = get("synth.source_law")) c.synth.source_law = parse_interval(*v, "synth.source_law");
    if (auto v = get("synth.target_law")) c.synth.target_law = parse_interval(*v, "synth.target_law");
    if (auto v = get("synth.curve")) c.synth.curve = curve_from_string(*v);
    if (auto v = get("synth.arc_span")) c.synth.arc_span = parse_angle(*v, "synth.arc_span");
    if (auto v = get("synth.rotation")) c.synth.rotation = parse_angle(*v, "synth.rotation");
    if (auto v = get("synth.translation")) {
      const Interval t = parse_interval(*v, "synth.translation");
      c.synth.translation_x = t.lo;
      c.synth.translation_y = t.hi;
    }
    if (auto v = get("synth.scale")) c.synth.scale = parse_double_strict(*v, "synth.scale");
    if (auto v = get("synth.noise")) c.synth.noise = parse_double_strict(*v, "synth.noise");
    if (auto v = get("synth.seed")) {
      const long long s = parse_int(*v, "synth.seed");
      if (s < 0) throw ConfigError("synth.seed must be nonnegative");
      c.data_seed = static_cast<std::uint64_t>(s);
    }
  }

  MetricConfig& m = c.train.metric;
  m.x_kernel = KernelSpec::gaussian(1.0);
  m.y_kernel = KernelSpec::gaussian(1.0);
  if (auto v = get("metric.x_kernel")) m.x_kernel = parse_kernel(*v, "metric.x_kernel");
  if (auto v = get("metric.y_kernel")) m.y_kernel = parse_kernel(*v, "metric.y_kernel");
  if (auto v = get("metric.delta_tolerance"))
    m.y_kernel.delta_tolerance = parse_double_strict(*v, "metric.delta_tolerance");
  if (auto v = get("metric.x_bandwidth")) c.train.x_bandwidth = BandwidthPolicy::parse(*v);
  if (auto v = get("metric.y_bandwidth")) c.train.y_bandwidth = BandwidthPolicy::parse(*v);
  if (auto v = get("metric.epsilon")) m.epsilon = parse_double_strict(*v, "metric.epsilon");
  if (auto v = get("metric.ridge_lambda")) m.ridge_lambda = parse_double_strict(*v, "metric.ridge_lambda");
  if (auto v = get("metric.mod_variant")) {
    if (*v == "corrected") m.mod_variant = ModVariant::corrected;
    else if (*v == "literal") m.mod_variant = ModVariant::literal;
    else throw ConfigError("metric.mod_variant: expected corrected or literal, got '" + *v + "'");
  }

  TrainConfig& t = c.train;
  if (auto v = get("train.lambda1")) t.lambda1 = parse_double_strict(*v, "train.lambda1");
  if (auto v = get("train.lambda2")) t.lambda2 = parse_double_strict(*v, "train.lambda2");
  if (auto v = get("train.terms")) t.terms = ObjectiveTerms::parse(*v);
  if (auto v = get("train.batch_size")) t.batch_size = parse_count(*v, "train.batch_size");
  if (auto v = get("train.epochs")) t.epochs = static_cast<int>(parse_count(*v, "train.epochs"));
  if (auto v = get("train.warmup_epochs")) t.warmup_epochs = static_cast<int>(parse_count(*v, "train.warmup_epochs"));
  if (auto v = get("train.learning_rate")) t.learning_rate = parse_double_strict(*v, "train.learning_rate");
  if (auto v = get("train.adam_beta1")) t.adam_beta1 = parse_double_strict(*v, "train.adam_beta1");
  if (auto v = get("train.adam_beta2")) t.adam_beta2 = parse_double_strict(*v, "train.adam_beta2");
  if (auto v = get("train.adam_eps")) t.adam_eps = parse_double_strict(*v, "train.adam_eps");
  if (auto v = get("train.hidden")) {
    t.hidden.clear();
    if (trim(*v) != "none")
      for (const auto& part : split(*v, ',')) t.hidden.push_back(parse_count(part, "train.hidden"));
  }
  if (auto v = get("train.standardize_inputs")) t.standardize_inputs = parse_bool(*v, "train.standardize_inputs");

  if (auto v = get("run.seeds")) c.seeds = parse_seed_list(*v, "run.seeds");
  if (auto v = get("output.dir")) c.out_dir = *v;
  if (auto v = get("output.markdown")) c.markdown = parse_bool(*v, "output.markdown");

  for (const auto& [key, value] : kv.values())
    if (!used.count(key)) throw ConfigError("unknown config field '" + key + "'");

  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return experiment_from_keys(KeyValueFile::load(path));
}

ExperimentConfig reference_experiment() {
  ExperimentConfig c;
  c.origin = DataOrigin::synthetic;
  c.synth.n = 500;
  c.synth.noise = 0.05;
  c.synth.source_law = {0.0, 0.7};
  c.synth.target_law = {0.3, 1.0};
  c.synth.curve = Curve::circle_arc;
  c.synth.arc_span = std::numbers::pi;
  c.synth.rotation = std::numbers::pi;
  c.data_seed = 100;
  c.train.epochs = 50;
  c.seeds = {0, 1, 2, 3, 4};
  return c;
}

}  // namespace codkit
