#pragma once

#include "codkit/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace codkit {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

enum class Curve { circle_arc, spiral, polynomial };

std::string to_string(Curve c);
Curve curve_from_string(const std::string& name);

/// Two-domain synthetic regression task. Labels are drawn uniformly from a
/// per-domain interval; covariates follow a planar curve x = f(y), and the
/// target curve is scale * R(rotation) * f(y) + translation.
struct SynthSpec {
  Eigen::Index n = 200;  // samples per domain
  Interval source_law{0.0, 1.0};
  Interval target_law{0.0, 1.0};
  Curve curve = Curve::circle_arc;
  double arc_span = 2.0 * std::numbers::pi;  // radians swept over y in [0, 1]
  double rotation = 0.0;
  double translation_x = 0.0;
  double translation_y = 0.0;
  double scale = 1.0;
  double noise = 0.0;  // isotropic gaussian stddev

  void validate() const;
};

/// Noise-free curve point f(y).
Eigen::Vector2d curve_point(const SynthSpec& spec, double y);

std::pair<Dataset, Dataset> gen_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Reads a comma-separated file with a header row. Columns named in
/// `label_columns` become Y (in that order); the rest become X.
Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& label_columns);

/// Writes features then labels, with shortest round-trip formatting.
void write_csv(const Dataset& d, const std::filesystem::path& path);

/// Per-column affine standardization fitted on one matrix.
struct Scaler {
  Vector mean;
  Vector scale;  // 1 for zero-variance columns, which are left untouched

  static Scaler fit(const Eigen::Ref<const Matrix>& m);
  Matrix apply(const Eigen::Ref<const Matrix>& m) const;
  Matrix inverse(const Eigen::Ref<const Matrix>& m) const;
};

/// Standardizes the covariates of `apply_to` with statistics from
/// `train_stats_from`.
Dataset standardize(const Dataset& train_stats_from, const Dataset& apply_to);

}  // namespace codkit
