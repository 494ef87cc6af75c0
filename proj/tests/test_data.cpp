#include "codkit/data.hpp"
#include "codkit/errors.hpp"
#include "codkit/metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include <unistd.h>

using namespace codkit;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / ("codkit_test_data_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

MetricConfig raw_metric_cfg(const Dataset& s, const Dataset& t) {
  Matrix x(s.size() + t.size(), s.features());
  x << s.X, t.X;
  Matrix y(s.size() + t.size(), s.outputs());
  y << s.Y, t.Y;
  MetricConfig cfg;
  cfg.x_kernel = KernelSpec::gaussian(median_heuristic(x));
  cfg.y_kernel = KernelSpec::gaussian(0.5 * median_heuristic(y));
  return cfg;
}

}  // namespace

TEST_CASE("gen_synthetic: structure and determinism") {
  SynthSpec spec;
  spec.n = 50;
  spec.noise = 0.1;
  const auto [s1, t1] = gen_synthetic(spec, 7);
  const auto [s2, t2] = gen_synthetic(spec, 7);
  CHECK(s1.X == s2.X);
  CHECK(t1.Y == t2.Y);
  CHECK(s1.size() == 50);
  CHECK(s1.features() == 2);
  CHECK(s1.domain == Domain::source);
  CHECK(t1.domain == Domain::target);
  CHECK(t1.visibility == LabelVisibility::eval_only);
  const auto [s3, t3] = gen_synthetic(spec, 8);
  CHECK(s3.X != s1.X);
}

TEST_CASE("gen_synthetic: target transform is applied to the curve") {
  SynthSpec spec;
  spec.n = 20;
  spec.rotation = std::numbers::pi / 2;
  spec.translation_x = 1.0;
  spec.scale = 2.0;
  const auto [s, t] = gen_synthetic(spec, 3);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const Eigen::Vector2d f = curve_point(spec, t.Y(i, 0));
    CHECK(t.X(i, 0) == doctest::Approx(-2.0 * f(1) + 1.0));
    CHECK(t.X(i, 1) == doctest::Approx(2.0 * f(0)));
    const Eigen::Vector2d g = curve_point(spec, s.Y(i, 0));
    CHECK(s.X(i, 0) == g(0));
  }
}

TEST_CASE("gen_synthetic: label laws") {
  SynthSpec spec;
  spec.n = 200;
  spec.source_law = {0.0, 0.5};
  spec.target_law = {0.5, 1.0};
  const auto [s, t] = gen_synthetic(spec, 4);
  CHECK(s.Y.maxCoeff() <= 0.5);
  CHECK(t.Y.minCoeff() >= 0.5);
}

TEST_CASE("gen_synthetic: equal domains give a small conditional discrepancy") {
  SynthSpec spec;
  spec.n = 200;
  const auto [s, t] = gen_synthetic(spec, 11);
  const MetricConfig cfg = raw_metric_cfg(s, t);
  CHECK(evaluate(MetricKind::cod2, s.X, t.X, s.Y, t.Y, cfg).total < 0.05);
}

TEST_CASE("gen_synthetic: rotated circle separates conditional from marginal discrepancy") {
  SynthSpec spec;
  spec.n = 200;
  spec.noise = 0.05;
  spec.rotation = std::numbers::pi / 2;
  const auto [s, t] = gen_synthetic(spec, 12);
  const MetricConfig cfg = raw_metric_cfg(s, t);
  const double marginal = evaluate(MetricKind::mmd2, s.X, t.X, s.Y, t.Y, cfg).total;
  const double conditional = evaluate(MetricKind::cmmd2, s.X, t.X, s.Y, t.Y, cfg).total;
  CHECK(conditional >= 5.0 * marginal);
}

TEST_CASE("gen_synthetic: equal-domain discrepancy shrinks with n") {
  SynthSpec spec;
  std::vector<double> medians;
  for (Eigen::Index n : {50, 200, 800}) {
    spec.n = n;
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto [s, t] = gen_synthetic(spec, 100 + seed);
      v.push_back(evaluate(MetricKind::cod2, s.X, t.X, s.Y, t.Y, raw_metric_cfg(s, t)).total);
    }
    medians.push_back(oracle::median(v));
  }
  CHECK(medians[1] <= medians[0]);
  CHECK(medians[2] <= medians[1]);
}

TEST_CASE("gen_synthetic: invalid spec") {
  SynthSpec spec;
  spec.noise = -1.0;
  CHECK_THROWS_AS(gen_synthetic(spec, 0), ConfigError);
  spec = SynthSpec{};
  spec.source_law = {1.0, 1.0};
  CHECK_THROWS_AS(gen_synthetic(spec, 0), ConfigError);
  CHECK_THROWS_AS(curve_from_string("helix"), ConfigError);
}

TEST_CASE("load_csv") {
  SUBCASE("three rows, two features, one label") {
    const Dataset d = load_csv(write_file("ok.csv", "a,b,y\n1,2,3\n4,5,6\n7,8.5,-9e-1\n"), {"y"});
    CHECK(d.X.rows() == 3);
    CHECK(d.X.cols() == 2);
    CHECK(d.Y.cols() == 1);
    CHECK(d.X(2, 1) == 8.5);
    CHECK(d.Y(2, 0) == -0.9);
    CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  }
  SUBCASE("label column in the middle, BOM and CRLF") {
    const Dataset d = load_csv(write_file("mid.csv", "\xEF\xBB\xBFx1,y,x2\r\n1,2,3\r\n"), {"y"});
    CHECK(d.X(0, 1) == 3.0);
    CHECK(d.Y(0, 0) == 2.0);
  }
  SUBCASE("non-numeric cell names its row") {
    std::string text = "a,y\n";
    for (int r = 1; r <= 9; ++r) text += (r == 7 ? "abc" : std::to_string(r)) + ",0\n";
    try {
      load_csv(write_file("bad.csv", text), {"y"});
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("row 7") != std::string::npos);
    }
  }
  SUBCASE("missing column, empty file, ragged row") {
    CHECK_THROWS_AS(load_csv(write_file("nolabel.csv", "a,b\n1,2\n"), {"y"}), DataError);
    CHECK_THROWS_AS(load_csv(write_file("empty.csv", ""), {"y"}), DataError);
    CHECK_THROWS_AS(load_csv(write_file("header_only.csv", "a,y\n"), {"y"}), DataError);
    CHECK_THROWS_AS(load_csv(write_file("ragged.csv", "a,y\n1,2,3\n"), {"y"}), DataError);
    CHECK_THROWS_AS(load_csv(scratch_dir() / "does_not_exist.csv", {"y"}), DataError);
  }
}

TEST_CASE("write_csv round trip is bitwise") {
  std::mt19937_64 rng(61);
  Dataset d;
  d.X = oracle::random_matrix(25, 3, rng);
  d.Y = oracle::random_matrix(25, 2, rng) * 1e-7;
  d.X(0, 0) = 1.0 / 3.0;
  d.feature_names = {"f1", "f2", "f3"};
  d.label_names = {"y1", "y2"};
  const fs::path p = scratch_dir() / "round.csv";
  write_csv(d, p);
  const Dataset back = load_csv(p, {"y1", "y2"});
  CHECK(back.X == d.X);
  CHECK(back.Y == d.Y);
}

TEST_CASE("standardize") {
  std::mt19937_64 rng(62);
  Dataset d;
  d.X = oracle::random_matrix(30, 3, rng) * 4.0;
  d.X.col(2).setConstant(5.0);
  const Dataset z = standardize(d, d);
  CHECK(z.X.leftCols(2).colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
  const Matrix c = z.X.leftCols(2).rowwise() - z.X.leftCols(2).colwise().mean();
  CHECK(((c.array().square().colwise().sum() / 30.0) - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(z.X.col(2) == d.X.col(2));

  Dataset t;
  t.X = oracle::random_matrix(20, 3, rng) + Matrix::Constant(20, 3, 2.0);
  const Scaler sc = Scaler::fit(d.X);
  const Matrix applied = sc.apply(t.X);
  CHECK(applied.col(0).mean() != doctest::Approx(0.0));
  CHECK((sc.inverse(applied) - t.X).cwiseAbs().maxCoeff() < 1e-12);

  t.X = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(standardize(d, t), ShapeError);
}

TEST_CASE("Dataset validation and subsets") {
  Dataset d;
  CHECK_THROWS_AS(d.validate(), DataError);
  d.X = Matrix::Ones(3, 2);
  d.Y = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(d.validate(), DataError);
  d.Y = Matrix::Ones(3, 1);
  d.X(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(d.validate(), DataError);
  d.X(1, 1) = 4.0;
  const Dataset s = d.subset({1, 1});
  CHECK(s.size() == 2);
  CHECK(s.X(0, 1) == 4.0);
}
