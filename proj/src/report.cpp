#include "codkit/report.hpp"

#include "codkit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace codkit {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string make_run_id(const std::string& command, const Json& config_echo) {
  return fnv1a_hex(command + "\n" + config_echo.dump()).substr(0, 12);
}

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw DataError("summarize: no values");
  std::sort(values.begin(), values.end());
  auto quantile = [&values](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {quantile(0.5), quantile(0.25), quantile(0.75)};
}

Json to_json(const Summary& s) {
  return Json{{"median", s.median}, {"q1", s.q1}, {"q3", s.q3}, {"iqr", s.iqr()}};
}

Json to_json(const MetricValue& v) {
  Json c = Json::object();
  for (const auto& [name, value] : v.components) c[name] = value;
  return Json{{"total", v.total}, {"components", c}};
}

Json to_json(const MaeReport& m) {
  Json per = Json::array();
  for (Eigen::Index i = 0; i < m.per_output.size(); ++i) per.push_back(m.per_output(i));
  return Json{{"per_output", per}, {"sum", m.sum}};
}

Json to_json(const EpochRecord& r) {
  Json c = Json::object();
  for (const auto& [name, value] : r.components) c[name] = value;
  return Json{{"epoch", r.epoch},
              {"loss", r.loss},
              {"source_mse", r.source_mse},
              {"components", c},
              {"target_mae", to_json(r.target_mae)},
              {"source_mae_sum", r.source_mae_sum}};
}

Json config_json(const ExperimentConfig& cfg) {
  Json j = Json::object();
  for (const auto& [key, value] : cfg.echo()) j[key] = value;
  return j;
}

void require_finite_json(const Json& j, const std::string& path) {
  if (j.is_number_float()) {
    if (!std::isfinite(j.get<double>())) throw NumericalError("report value at " + path + " is not finite");
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) require_finite_json(it.value(), path + "." + it.key());
  } else if (j.is_array()) {
    for (size_t i = 0; i < j.size(); ++i) require_finite_json(j[i], path + "[" + std::to_string(i) + "]");
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  require_finite_json(j);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

namespace {

Json matrix_json(const std::string& name, const Eigen::Ref<const Matrix>& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return Json{{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", data}};
}

Matrix matrix_from_json(const Json& t) {
  const auto rows = t.at("shape").at(0).get<Eigen::Index>();
  const auto cols = t.at("shape").at(1).get<Eigen::Index>();
  const Json& data = t.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw DataError("checkpoint tensor '" + t.at("name").get<std::string>() + "' has the wrong element count");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<size_t>(r * cols + c)].get<double>();
  return m;
}

Json scaler_json(const Scaler& s) {
  return Json{{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
              {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

Scaler scaler_from_json(const Json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != scale.size()) throw DataError("checkpoint scaler has mismatched lengths");
  Scaler s;
  s.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.scale = Eigen::Map<const Vector>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  return s;
}

}  // namespace

Json checkpoint_json(const TrainResult& result, const ExperimentConfig& cfg, std::uint64_t seed) {
  const ModelParams& p = result.model.params;
  Json tensors = Json::array();
  p.for_each_tensor([&](const std::string& name, Eigen::Map<const Matrix> t) { tensors.push_back(matrix_json(name, t)); });
  Json hidden = Json::array();
  for (const auto& layer : p.extractor) hidden.push_back(layer.W.rows());
  return Json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"config", config_json(cfg)},
              {"seed", seed},
              {"architecture",
               {{"input_dim", p.input_dim()},
                {"hidden", hidden},
                {"output_dim", p.output_dim()},
                {"activation", "tanh"}}},
              {"tensors", tensors},
              {"x_scaler", scaler_json(result.model.x_scaler)},
              {"y_scaler", scaler_json(result.model.y_scaler)},
              {"rng_state", result.rng_state}};
}

TrainedModel model_from_checkpoint(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw DataError("not a codkit checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    const Json& arch = j.at("architecture");
    const auto in = arch.at("input_dim").get<Eigen::Index>();
    const auto out = arch.at("output_dim").get<Eigen::Index>();
    const auto hidden = arch.at("hidden").get<std::vector<Eigen::Index>>();
    std::mt19937_64 unused(0);
    TrainedModel m;
    m.params = ModelParams::init(in, hidden, out, unused);
    std::map<std::string, Matrix> by_name;
    for (const Json& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = matrix_from_json(t);
    m.params.for_each_tensor([&](const std::string& name, Eigen::Map<Matrix> t) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
      if (it->second.rows() != t.rows() || it->second.cols() != t.cols())
        throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
      t = it->second;
    });
    m.params.validate();
    m.x_scaler = scaler_from_json(j.at("x_scaler"));
    m.y_scaler = scaler_from_json(j.at("y_scaler"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_embeddings(const std::filesystem::path& path, const TrainedModel& model, const Dataset& source,
                      const Dataset& target) {
  const Eigen::Index m = source.outputs();
  const Eigen::Index d = model.params.representation_dim();
  std::string text = "domain";
  for (Eigen::Index i = 0; i < m; ++i) text += ",y" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < d; ++i) text += ",z" + std::to_string(i + 1);
  text += '\n';
  for (const Dataset* ds : {&source, &target}) {
    const Matrix Z = model.embed(ds->X);
    for (Eigen::Index r = 0; r < ds->size(); ++r) {
      text += to_string(ds->domain);
      for (Eigen::Index i = 0; i < m; ++i) text += "," + (ds->labeled() ? format_double(ds->Y(r, i)) : std::string());
      for (Eigen::Index i = 0; i < d; ++i) text += "," + format_double(Z(r, i));
      text += '\n';
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace codkit
