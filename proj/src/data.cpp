#include "codkit/data.hpp"

#include "codkit/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace codkit {

void Dataset::validate() const {
  if (X.rows() < 1) throw DataError("dataset is empty");
  if (Y.size() > 0 && Y.rows() != X.rows())
    throw DataError("dataset label rows (" + std::to_string(Y.rows()) + ") differ from sample rows (" +
                    std::to_string(X.rows()) + ")");
  require_finite(X, "dataset covariates");
  require_finite(Y, "dataset labels");
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& index) const {
  Dataset out;
  out.domain = domain;
  out.visibility = visibility;
  out.feature_names = feature_names;
  out.label_names = label_names;
  out.X.resize(static_cast<Eigen::Index>(index.size()), X.cols());
  out.Y.resize(static_cast<Eigen::Index>(index.size()), Y.cols());
  for (size_t r = 0; r < index.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = X.row(index[r]);
    if (Y.cols() > 0) out.Y.row(static_cast<Eigen::Index>(r)) = Y.row(index[r]);
  }
  return out;
}

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

std::string to_string(Curve c) {
  switch (c) {
    case Curve::circle_arc: return "circle_arc";
    case Curve::spiral: return "spiral";
    case Curve::polynomial: return "polynomial";
  }
  return "unknown";
}

Curve curve_from_string(const std::string& name) {
  if (name == "circle_arc") return Curve::circle_arc;
  if (name == "spiral") return Curve::spiral;
  if (name == "polynomial") return Curve::polynomial;
  throw ConfigError("unknown curve '" + name + "'");
}

void SynthSpec::validate() const {
  if (n < 1) throw ConfigError("synth.n must be at least 1");
  if (!(source_law.lo < source_law.hi)) throw ConfigError("synth source label interval is empty");
  if (!(target_law.lo < target_law.hi)) throw ConfigError("synth target label interval is empty");
  if (!(noise >= 0.0)) throw ConfigError("synth.noise must be nonnegative");
  if (!(scale > 0.0)) throw ConfigError("synth.scale must be positive");
  for (double v : {arc_span, rotation, translation_x, translation_y, scale, noise})
    if (!std::isfinite(v)) throw ConfigError("synth spec has a non-finite value");
}

Eigen::Vector2d curve_point(const SynthSpec& spec, double y) {
  switch (spec.curve) {
    case Curve::circle_arc:
      return {std::cos(spec.arc_span * y), std::sin(spec.arc_span * y)};
    case Curve::spiral: {
      const double r = 0.5 + y;
      return {r * std::cos(spec.arc_span * y), r * std::sin(spec.arc_span * y)};
    }
    case Curve::polynomial: {
      const double t = 2.0 * y - 1.0;
      return {t, t * t};
    }
  }
  return {0.0, 0.0};
}

namespace {

Dataset sample_domain(const SynthSpec& spec, const Interval& law, bool transformed, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> label(law.lo, law.hi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Eigen::Rotation2Dd rot(spec.rotation);
  const Eigen::Vector2d shift(spec.translation_x, spec.translation_y);

  Dataset d;
  d.X.resize(spec.n, 2);
  d.Y.resize(spec.n, 1);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const double y = label(rng);
    Eigen::Vector2d x = curve_point(spec, y);
    if (transformed) x = spec.scale * (rot * x) + shift;
    // Draw noise unconditionally so the stream layout does not depend on it.
    const double e0 = noise(rng);
    const double e1 = noise(rng);
    d.X(i, 0) = x(0) + spec.noise * e0;
    d.X(i, 1) = x(1) + spec.noise * e1;
    d.Y(i, 0) = y;
  }
  d.feature_names = {"x1", "x2"};
  d.label_names = {"y1"};
  return d;
}

}  // namespace

std::pair<Dataset, Dataset> gen_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Dataset source = sample_domain(spec, spec.source_law, false, rng);
  Dataset target = sample_domain(spec, spec.target_law, true, rng);
  source.domain = Domain::source;
  target.domain = Domain::target;
  target.visibility = LabelVisibility::eval_only;
  return {std::move(source), std::move(target)};
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && first != last;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& label_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError("'" + path.string() + "' is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_row(line);
  for (auto& h : header) h = trim(h);

  std::vector<int> label_index;
  for (const auto& name : label_columns) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("'" + path.string() + "' has no column named '" + name + "'");
    label_index.push_back(static_cast<int>(it - header.begin()));
  }
  std::vector<int> feature_index;
  for (int c = 0; c < static_cast<int>(header.size()); ++c)
    if (std::find(label_index.begin(), label_index.end(), c) == label_index.end()) feature_index.push_back(c);

  std::vector<std::vector<double>> rows;
  long row_number = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row_number;
    const std::vector<std::string> cells = split_row(line);
    if (cells.size() != header.size())
      throw DataError("'" + path.string() + "' row " + std::to_string(row_number) + ": expected " +
                      std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    std::vector<double> values(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (!parse_double(cell, values[c]) || !std::isfinite(values[c]))
        throw DataError("'" + path.string() + "' row " + std::to_string(row_number) + ", column '" +
                        header[c] + "': non-numeric value '" + cell + "'");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw DataError("'" + path.string() + "' has a header but no data rows");

  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.X.resize(n, static_cast<Eigen::Index>(feature_index.size()));
  d.Y.resize(n, static_cast<Eigen::Index>(label_index.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (size_t c = 0; c < feature_index.size(); ++c)
      d.X(r, static_cast<Eigen::Index>(c)) = rows[static_cast<size_t>(r)][static_cast<size_t>(feature_index[c])];
    for (size_t c = 0; c < label_index.size(); ++c)
      d.Y(r, static_cast<Eigen::Index>(c)) = rows[static_cast<size_t>(r)][static_cast<size_t>(label_index[c])];
  }
  for (int c : feature_index) d.feature_names.push_back(header[static_cast<size_t>(c)]);
  d.label_names = label_columns;
  return d;
}

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::vector<std::string> default_names(const std::vector<std::string>& names, Eigen::Index count,
                                       const char* prefix) {
  if (static_cast<Eigen::Index>(names.size()) == count) return names;
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

}  // namespace

void write_csv(const Dataset& d, const std::filesystem::path& path) {
  const auto fnames = default_names(d.feature_names, d.X.cols(), "x");
  const auto lnames = default_names(d.label_names, d.Y.cols(), "y");
  std::string text;
  bool first = true;
  for (const auto& name : fnames) { text += (first ? "" : ","); text += name; first = false; }
  for (const auto& name : lnames) { text += (first ? "" : ","); text += name; first = false; }
  text += '\n';
  for (Eigen::Index r = 0; r < d.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.X.cols(); ++c) {
      if (c > 0) text += ',';
      append_number(text, d.X(r, c));
    }
    for (Eigen::Index c = 0; c < d.Y.cols(); ++c) {
      if (d.X.cols() > 0 || c > 0) text += ',';
      append_number(text, d.Y(r, c));
    }
    text += '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

Scaler Scaler::fit(const Eigen::Ref<const Matrix>& m) {
  if (m.rows() < 1) throw DataError("cannot fit a scaler on an empty matrix");
  Scaler s;
  s.mean = m.colwise().mean().transpose();
  s.scale = Vector::Ones(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double var = (m.col(c).array() - s.mean(c)).square().mean();
    if (var > 0.0) {
      s.scale(c) = std::sqrt(var);
    } else {
      s.mean(c) = 0.0;
    }
  }
  return s;
}

Matrix Scaler::apply(const Eigen::Ref<const Matrix>& m) const {
  if (m.cols() != mean.size()) throw ShapeError("scaler: column count mismatch");
  return (m.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix Scaler::inverse(const Eigen::Ref<const Matrix>& m) const {
  if (m.cols() != mean.size()) throw ShapeError("scaler: column count mismatch");
  Matrix out = m.array().rowwise() * scale.transpose().array();
  out.rowwise() += mean.transpose();
  return out;
}

Dataset standardize(const Dataset& train_stats_from, const Dataset& apply_to) {
  if (train_stats_from.features() != apply_to.features())
    throw ShapeError("standardize: feature counts differ (" + std::to_string(train_stats_from.features()) +
                     " vs " + std::to_string(apply_to.features()) + ")");
  Dataset out = apply_to;
  out.X = Scaler::fit(train_stats_from.X).apply(apply_to.X);
  return out;
}

}  // namespace codkit
