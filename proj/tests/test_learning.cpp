#include "codkit/errors.hpp"
#include "codkit/learning.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace codkit;

namespace {

/// Straight-line re-evaluation of the network, one row at a time.
Matrix forward_rowwise(const ModelParams& p, const Matrix& X, Matrix* Z_out = nullptr) {
  Matrix Z(X.rows(), p.representation_dim()), Y(X.rows(), p.output_dim());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    std::vector<double> a(static_cast<size_t>(X.cols()));
    for (Eigen::Index c = 0; c < X.cols(); ++c) a[static_cast<size_t>(c)] = X(r, c);
    for (const DenseLayer& layer : p.extractor) {
      std::vector<double> next(static_cast<size_t>(layer.W.rows()));
      for (Eigen::Index o = 0; o < layer.W.rows(); ++o) {
        double s = layer.b(o);
        for (Eigen::Index i = 0; i < layer.W.cols(); ++i) s += layer.W(o, i) * a[static_cast<size_t>(i)];
        next[static_cast<size_t>(o)] = std::tanh(s);
      }
      a = next;
    }
    for (size_t i = 0; i < a.size(); ++i) Z(r, static_cast<Eigen::Index>(i)) = a[i];
    for (Eigen::Index o = 0; o < p.output_dim(); ++o) {
      double s = p.predictor.b(o);
      for (Eigen::Index i = 0; i < p.predictor.W.cols(); ++i) s += p.predictor.W(o, i) * a[static_cast<size_t>(i)];
      Y(r, o) = s;
    }
  }
  if (Z_out) *Z_out = Z;
  return Y;
}

Dataset realizable_task(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.X = oracle::random_matrix(n, 3, rng);
  Eigen::Vector3d w(0.5, -1.0, 0.25);
  d.Y = d.X * w;
  d.Y.array() += 0.3;
  return d;
}

}  // namespace

TEST_CASE("forward") {
  std::mt19937_64 rng(51);
  SUBCASE("zero parameters") {
    const ModelParams p = ModelParams::init(3, {4, 2}, 2, rng).zeros_like();
    const Forward f = forward(p, oracle::random_matrix(5, 3, rng));
    CHECK(f.Z.cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.yhat.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("no hidden layers: affine map reproduced exactly") {
    ModelParams p = ModelParams::init(2, {}, 1, rng);
    p.predictor.W << 2.0, -3.0;
    p.predictor.b << 0.5;
    Matrix X(2, 2);
    X << 1, 1, 0, 2;
    const Forward f = forward(p, X);
    CHECK(f.Z == X);
    CHECK(f.yhat(0, 0) == -0.5);
    CHECK(f.yhat(1, 0) == -5.5);
  }
  SUBCASE("random parameters match a layer-by-layer oracle") {
    const ModelParams p = ModelParams::init(4, {6, 3}, 2, rng);
    const Matrix X = oracle::random_matrix(7, 4, rng);
    Matrix Z;
    const Matrix Y = forward_rowwise(p, X, &Z);
    const Forward f = forward(p, X);
    CHECK((f.yhat - Y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((f.Z - Z).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("shape mismatch") {
    const ModelParams p = ModelParams::init(4, {3}, 1, rng);
    CHECK_THROWS_AS(forward(p, Matrix::Zero(2, 3)), ShapeError);
  }
}

TEST_CASE("source_mse") {
  std::mt19937_64 rng(52);
  const Matrix y = oracle::random_matrix(6, 2, rng);
  CHECK(source_mse(y, y) == 0.0);
  Matrix a(1, 1), b(1, 1);
  a << 2.0;
  b << 0.0;
  CHECK(source_mse(a, b) == 4.0);
  const Matrix yhat = oracle::random_matrix(6, 2, rng);
  double loop = 0.0;
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) loop += (yhat(i, j) - y(i, j)) * (yhat(i, j) - y(i, j));
  CHECK(source_mse(yhat, y) == doctest::Approx(loop / 6.0).epsilon(1e-14));
  CHECK_THROWS_AS(source_mse(yhat, y.leftCols(1)), ShapeError);
}

TEST_CASE("objective terms and bandwidth text forms") {
  CHECK(ObjectiveTerms::parse("mse+kgw+cod_mod").to_string() == "mse+kgw+cod_mod");
  CHECK(ObjectiveTerms::parse("mse,cod") == ObjectiveTerms{true, false, true, false});
  CHECK_THROWS_AS(ObjectiveTerms::parse("mse+cod+cod_mod"), ConfigError);
  CHECK_THROWS_AS(ObjectiveTerms::parse("mse+wasserstein"), ConfigError);

  CHECK(BandwidthPolicy::parse("median").median);
  CHECK(BandwidthPolicy::parse("median*0.5").value == 0.5);
  CHECK_FALSE(BandwidthPolicy::parse("0.3").median);
  CHECK(BandwidthPolicy::parse(BandwidthPolicy{true, 0.25}.to_string()).value == 0.25);
  CHECK_THROWS_AS(BandwidthPolicy::parse("-1"), ConfigError);
  CHECK_THROWS_AS(BandwidthPolicy::parse("median+1"), ConfigError);
}

TEST_CASE("objective") {
  std::mt19937_64 rng(53);
  const ModelParams p = ModelParams::init(2, {5, 3}, 1, rng);
  const Matrix Xs = oracle::random_matrix(8, 2, rng), Xt = oracle::random_matrix(8, 2, rng) + Matrix::Constant(8, 2, 0.5);
  const Matrix ys = oracle::random_matrix(8, 1, rng);

  SUBCASE("zero trade-offs reduce to the source MSE") {
    TrainConfig cfg;
    cfg.lambda1 = cfg.lambda2 = 0.0;
    const ObjectiveResult r = objective(p, Xs, ys, Xt, cfg);
    CHECK(r.loss == source_mse(forward(p, Xs).yhat, ys));
    REQUIRE(r.components.size() == 1);
    CHECK(r.components[0].first == "mse");
  }
  SUBCASE("lambda1 = 0 keeps only MSE and KGW") {
    TrainConfig cfg;
    cfg.lambda1 = 0.0;
    const ObjectiveResult r = objective(p, Xs, ys, Xt, cfg);
    REQUIRE(r.components.size() == 2);
    CHECK(r.components[0].first == "mse");
    CHECK(r.components[1].first == "kgw");
  }
  SUBCASE("components sum to the loss; pseudo-labels are current predictions") {
    TrainConfig cfg;
    const ObjectiveResult r = objective(p, Xs, ys, Xt, cfg);
    double s = 0.0;
    for (const auto& c : r.components) s += c.second;
    CHECK(std::abs(s - r.loss) < 1e-10);
    CHECK(r.pseudo_labels == forward(p, Xt).yhat);
  }
  SUBCASE("batch size mismatch") {
    TrainConfig cfg;
    CHECK_THROWS_AS(objective(p, Xs, ys, Xt.topRows(7), cfg), ShapeError);
  }
}

TEST_CASE("objective: parameter gradients match finite differences") {
  std::mt19937_64 rng(54);
  const ModelParams p = ModelParams::init(2, {4, 3}, 1, rng);
  const Matrix Xs = oracle::random_matrix(6, 2, rng), Xt = oracle::random_matrix(6, 2, rng);
  const Matrix ys = oracle::random_matrix(6, 1, rng);
  // Pseudo-labels and bandwidths are constants of the objective, so the
  // differences are taken with both held fixed.
  const Matrix yt = forward(p, Xt).yhat;

  for (const char* terms : {"mse+kgw+cod_mod", "mse+kgw+cod", "kgw+cod_mod"}) {
    TrainConfig cfg;
    cfg.terms = ObjectiveTerms::parse(terms);
    cfg.metric.epsilon = 0.1;
    cfg.metric.ridge_lambda = 1e-2;
    cfg.x_bandwidth = BandwidthPolicy{false, 1.3};
    cfg.y_bandwidth = BandwidthPolicy{false, 0.8};
    const ObjectiveResult r = objective(p, Xs, ys, Xt, cfg, true, &yt);

    ModelParams probe = p;
    std::vector<Eigen::Map<Matrix>> params;
    probe.for_each_tensor([&](const std::string&, Eigen::Map<Matrix> t) { params.push_back(t); });
    std::vector<Eigen::Map<const Matrix>> grads;
    const ModelParams& g = r.grads;
    g.for_each_tensor([&](const std::string&, Eigen::Map<const Matrix> t) { grads.push_back(t); });

    const double h = 1e-6;
    double worst = 0.0;
    for (size_t k = 0; k < params.size(); ++k) {
      for (Eigen::Index i = 0; i < params[k].size(); ++i) {
        const double orig = params[k].data()[i];
        params[k].data()[i] = orig + h;
        const double up = objective(probe, Xs, ys, Xt, cfg, true, &yt).loss;
        params[k].data()[i] = orig - h;
        const double down = objective(probe, Xs, ys, Xt, cfg, true, &yt).loss;
        params[k].data()[i] = orig;
        const double numeric = (up - down) / (2 * h);
        const double a = grads[k].data()[i];
        worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
      }
    }
    CHECK_MESSAGE(worst < 1e-3, terms);
  }
}

TEST_CASE("train: zero epochs returns the initial parameters") {
  const Dataset s = realizable_task(40, 1), t = realizable_task(40, 2);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 9;
  const TrainResult r = train(s, t, cfg);
  std::mt19937_64 rng(9);
  const ModelParams init = ModelParams::init(3, cfg.hidden, 1, rng);
  CHECK(r.model.params.predictor.W == init.predictor.W);
  CHECK(r.model.params.extractor[0].W == init.extractor[0].W);
  CHECK(r.history.epochs.empty());
}

TEST_CASE("train: realizable source task converges") {
  const Dataset s = realizable_task(128, 3), t = realizable_task(128, 4);
  TrainConfig cfg;
  cfg.lambda1 = cfg.lambda2 = 0.0;
  cfg.epochs = 200;
  cfg.hidden = {};
  cfg.learning_rate = 1e-2;
  const TrainResult r = train(s, t, cfg);
  REQUIRE(r.history.epochs.size() == 200);
  CHECK(r.history.epochs.back().source_mse < 1e-3);
  CHECK(r.history.epochs.back().target_mae.sum >= 0.0);
}

TEST_CASE("train: determinism and ablation consistency") {
  SynthSpec spec;
  spec.n = 64;
  spec.noise = 0.05;
  spec.rotation = 1.0;
  const auto [s, t] = gen_synthetic(spec, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 17;
  const TrainResult a = train(s, t, cfg);
  const TrainResult b = train(s, t, cfg);
  REQUIRE(a.history.epochs.size() == 3);
  for (size_t e = 0; e < 3; ++e) {
    CHECK(a.history.epochs[e].loss == b.history.epochs[e].loss);
    CHECK(a.history.epochs[e].target_mae.sum == b.history.epochs[e].target_mae.sum);
  }
  CHECK(a.model.params.predictor.W == b.model.params.predictor.W);
  CHECK(a.rng_state == b.rng_state);

  TrainConfig off = cfg, zero = cfg;
  off.terms.kgw = false;
  zero.lambda2 = 0.0;
  const TrainResult x = train(s, t, off), y = train(s, t, zero);
  for (size_t e = 0; e < 3; ++e) CHECK(x.history.epochs[e].loss == y.history.epochs[e].loss);
  CHECK(x.model.params.extractor[0].W == y.model.params.extractor[0].W);

  for (const EpochRecord& rec : a.history.epochs) {
    double s_sum = 0.0;
    for (const auto& c : rec.components) s_sum += c.second;
    CHECK(std::abs(s_sum - rec.loss) < 1e-10);
  }
}

TEST_CASE("train: warm-up keeps the metric terms off") {
  SynthSpec spec;
  spec.n = 64;
  const auto [s, t] = gen_synthetic(spec, 6);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.warmup_epochs = 1;
  const TrainResult r = train(s, t, cfg);
  CHECK(r.history.epochs[0].components.size() == 1);
  CHECK(r.history.epochs[1].components.size() == 3);
}

TEST_CASE("train: errors") {
  const Dataset s = realizable_task(10, 1), t = realizable_task(10, 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(s, t, cfg), DataError);
  cfg.batch_size = 2;
  CHECK_THROWS_AS(train(s, t, cfg), ConfigError);
  cfg.batch_size = 4;
  cfg.learning_rate = 1e6;
  cfg.lambda2 = 1e9;
  CHECK_THROWS_AS(train(s, t, cfg), NumericalError);
}

TEST_CASE("evaluate_mae") {
  std::mt19937_64 rng(55);
  ModelParams p = ModelParams::init(2, {}, 2, rng).zeros_like();
  Dataset d;
  d.X = oracle::random_matrix(4, 2, rng);
  d.Y.resize(4, 2);
  d.Y << 1, -1, -1, 1, 1, 1, -1, -1;
  const MaeReport zero = evaluate_mae(p, d);
  CHECK(zero.per_output(0) == 1.0);
  CHECK(zero.per_output(1) == 1.0);
  CHECK(zero.sum == 2.0);

  p = ModelParams::init(2, {3}, 2, rng);
  d.Y = forward(p, d.X).yhat;
  CHECK(evaluate_mae(p, d).sum == 0.0);

  d.Y = oracle::random_matrix(4, 2, rng);
  const Matrix pred = forward_rowwise(p, d.X);
  double loop = 0.0;
  for (Eigen::Index j = 0; j < 2; ++j)
    for (Eigen::Index i = 0; i < 4; ++i) loop += std::abs(pred(i, j) - d.Y(i, j)) / 4.0;
  CHECK(evaluate_mae(p, d).sum == doctest::Approx(loop).epsilon(1e-12));

  d.Y.resize(0, 0);
  CHECK_THROWS_AS(evaluate_mae(p, d), DataError);
}
