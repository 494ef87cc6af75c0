#include "codkit/learning.hpp"

#include "codkit/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace codkit {

Eigen::Index ModelParams::input_dim() const {
  return extractor.empty() ? predictor.W.cols() : extractor.front().W.cols();
}

Eigen::Index ModelParams::representation_dim() const { return predictor.W.cols(); }

ModelParams ModelParams::init(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                              Eigen::Index output_dim, std::mt19937_64& rng) {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("model dimensions must be positive");
  auto glorot = [&rng](Eigen::Index out, Eigen::Index in) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-a, a);
    DenseLayer layer{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < out; ++i) layer.W(i, j) = u(rng);
    return layer;
  };
  ModelParams p;
  Eigen::Index width = input_dim;
  for (Eigen::Index h : hidden) {
    if (h < 1) throw ConfigError("hidden layer widths must be positive");
    p.extractor.push_back(glorot(h, width));
    width = h;
  }
  p.predictor = glorot(output_dim, width);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& l : z.extractor) {
    l.W.setZero();
    l.b.setZero();
  }
  z.predictor.W.setZero();
  z.predictor.b.setZero();
  return z;
}

void ModelParams::validate() const {
  Eigen::Index width = input_dim();
  for (size_t i = 0; i < extractor.size(); ++i) {
    const auto& l = extractor[i];
    if (l.W.cols() != width || l.b.size() != l.W.rows())
      throw ShapeError("extractor layer " + std::to_string(i) + " does not chain");
    width = l.W.rows();
  }
  if (predictor.W.cols() != width || predictor.b.size() != predictor.W.rows())
    throw ShapeError("predictor does not chain with the extractor");
  for_each_tensor([](const std::string& name, Eigen::Map<const Matrix> t) {
    if (!t.allFinite()) throw NumericalError("parameter " + name + " is not finite");
  });
}

void ModelParams::for_each_tensor(const std::function<void(const std::string&, Eigen::Map<Matrix>)>& fn) {
  for (size_t i = 0; i < extractor.size(); ++i) {
    auto& l = extractor[i];
    fn("extractor." + std::to_string(i) + ".weight", Eigen::Map<Matrix>(l.W.data(), l.W.rows(), l.W.cols()));
    fn("extractor." + std::to_string(i) + ".bias", Eigen::Map<Matrix>(l.b.data(), l.b.size(), 1));
  }
  fn("predictor.weight", Eigen::Map<Matrix>(predictor.W.data(), predictor.W.rows(), predictor.W.cols()));
  fn("predictor.bias", Eigen::Map<Matrix>(predictor.b.data(), predictor.b.size(), 1));
}

void ModelParams::for_each_tensor(
    const std::function<void(const std::string&, Eigen::Map<const Matrix>)>& fn) const {
  for (size_t i = 0; i < extractor.size(); ++i) {
    const auto& l = extractor[i];
    fn("extractor." + std::to_string(i) + ".weight", Eigen::Map<const Matrix>(l.W.data(), l.W.rows(), l.W.cols()));
    fn("extractor." + std::to_string(i) + ".bias", Eigen::Map<const Matrix>(l.b.data(), l.b.size(), 1));
  }
  fn("predictor.weight", Eigen::Map<const Matrix>(predictor.W.data(), predictor.W.rows(), predictor.W.cols()));
  fn("predictor.bias", Eigen::Map<const Matrix>(predictor.b.data(), predictor.b.size(), 1));
}

namespace {

Matrix affine(const DenseLayer& l, const Eigen::Ref<const Matrix>& x) {
  return (x * l.W.transpose()).rowwise() + l.b.transpose();
}

// activations[0] = X, activations[k] = tanh(layer k-1), last = Z.
struct ForwardCache {
  std::vector<Matrix> activations;
  Matrix yhat;
  const Matrix& Z() const { return activations.back(); }
};

ForwardCache forward_cache(const ModelParams& p, const Eigen::Ref<const Matrix>& X) {
  if (X.cols() != p.input_dim())
    throw ShapeError("forward: input has " + std::to_string(X.cols()) + " columns, model expects " +
                     std::to_string(p.input_dim()));
  ForwardCache c;
  c.activations.emplace_back(X);
  for (const auto& l : p.extractor) c.activations.push_back(affine(l, c.activations.back()).array().tanh().matrix());
  c.yhat = affine(p.predictor, c.Z());
  if (!c.yhat.allFinite()) throw NumericalError("forward: non-finite activation");
  return c;
}

// Accumulates extractor gradients for upstream dZ into `grads`.
void backprop_extractor(const ModelParams& p, const ForwardCache& c, Matrix dA, ModelParams& grads) {
  for (size_t k = p.extractor.size(); k-- > 0;) {
    const Matrix& out = c.activations[k + 1];
    const Matrix dPre = dA.cwiseProduct((1.0 - out.array().square()).matrix());
    grads.extractor[k].W += dPre.transpose() * c.activations[k];
    grads.extractor[k].b += dPre.colwise().sum().transpose();
    if (k > 0) dA = dPre * p.extractor[k].W;
  }
}

Matrix vstack(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

}  // namespace

Forward forward(const ModelParams& params, const Eigen::Ref<const Matrix>& X) {
  ForwardCache c = forward_cache(params, X);
  return {c.Z(), std::move(c.yhat)};
}

double source_mse(const Eigen::Ref<const Matrix>& yhat, const Eigen::Ref<const Matrix>& y) {
  if (yhat.rows() != y.rows() || yhat.cols() != y.cols()) throw ShapeError("source_mse: shape mismatch");
  if (y.rows() == 0) throw ShapeError("source_mse: empty batch");
  return (yhat - y).squaredNorm() / static_cast<double>(y.rows());
}

std::string ObjectiveTerms::to_string() const {
  std::string out;
  auto add = [&out](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '+';
    out += name;
  };
  add(mse, "mse");
  add(kgw, "kgw");
  add(cod, "cod");
  add(cod_mod, "cod_mod");
  return out.empty() ? "none" : out;
}

ObjectiveTerms ObjectiveTerms::parse(const std::string& spec) {
  ObjectiveTerms t{false, false, false, false};
  std::string token;
  std::istringstream in(spec);
  while (std::getline(in, token, spec.find('+') != std::string::npos ? '+' : ',')) {
    token.erase(std::remove_if(token.begin(), token.end(), ::isspace), token.end());
    if (token == "mse") t.mse = true;
    else if (token == "kgw") t.kgw = true;
    else if (token == "cod") t.cod = true;
    else if (token == "cod_mod") t.cod_mod = true;
    else if (!token.empty()) throw ConfigError("unknown objective term '" + token + "'");
  }
  if (t.cod && t.cod_mod) throw ConfigError("objective terms cod and cod_mod are mutually exclusive");
  return t;
}

double BandwidthPolicy::resolve(const Eigen::Ref<const Matrix>& samples) const {
  return median ? value * median_heuristic(samples) : value;
}

std::string BandwidthPolicy::to_string() const {
  std::ostringstream out;
  out.precision(17);
  if (median) {
    out << "median";
    if (value != 1.0) out << '*' << value;
  } else {
    out << value;
  }
  return out.str();
}

BandwidthPolicy BandwidthPolicy::parse(const std::string& text) {
  BandwidthPolicy p{false, 1.0};
  std::string number = text;
  if (text.rfind("median", 0) == 0) {
    p.median = true;
    if (text.size() == 6) return p;
    if (text[6] != '*') throw ConfigError("bandwidth must look like 'median*<factor>', got '" + text + "'");
    number = text.substr(7);
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(number, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (number.empty() || used != number.size() || !(v > 0.0) || !std::isfinite(v))
    throw ConfigError("bandwidth must be a positive number, 'median' or 'median*<factor>', got '" + text + "'");
  p.value = v;
  return p;
}

void TrainConfig::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("lambda1 and lambda2 must be nonnegative");
  if (batch_size < 4) throw ConfigError("batch_size must be at least 4");
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be nonnegative");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (terms.cod && terms.cod_mod) throw ConfigError("objective terms cod and cod_mod are mutually exclusive");
  if (metric.x_kernel.kind == KernelKind::delta)
    throw ConfigError("the representation kernel must be gaussian or linear");
  if (!(metric.epsilon > 0.0) || !(metric.ridge_lambda > 0.0))
    throw ConfigError("metric epsilon and ridge_lambda must be positive");
}

MetricConfig resolve_metric_config(const TrainConfig& cfg, const Eigen::Ref<const Matrix>& Zs,
                                   const Eigen::Ref<const Matrix>& Zt, const Eigen::Ref<const Matrix>& ys) {
  MetricConfig m = cfg.metric;
  if (m.x_kernel.kind == KernelKind::gaussian)
    m.x_kernel.bandwidth = cfg.x_bandwidth.resolve(vstack(Zs, Zt));
  if (m.y_kernel.kind == KernelKind::gaussian) m.y_kernel.bandwidth = cfg.y_bandwidth.resolve(ys);
  return m;
}

ObjectiveResult objective(const ModelParams& params, const Eigen::Ref<const Matrix>& Xs,
                          const Eigen::Ref<const Matrix>& ys, const Eigen::Ref<const Matrix>& Xt,
                          const TrainConfig& cfg, bool metrics_active, const Matrix* pseudo_labels) {
  if (Xs.rows() != Xt.rows())
    throw ShapeError("objective: source and target batches differ in size (" + std::to_string(Xs.rows()) +
                     " vs " + std::to_string(Xt.rows()) + ")");
  if (ys.rows() != Xs.rows() || ys.cols() != params.output_dim())
    throw ShapeError("objective: source labels do not match the batch");

  const ForwardCache fs = forward_cache(params, Xs);
  const ForwardCache ft = forward_cache(params, Xt);
  const double n = static_cast<double>(Xs.rows());

  ObjectiveResult r;
  r.grads = params.zeros_like();
  if (pseudo_labels && (pseudo_labels->rows() != Xt.rows() || pseudo_labels->cols() != params.output_dim()))
    throw ShapeError("objective: pseudo-labels do not match the target batch");
  r.pseudo_labels = pseudo_labels ? *pseudo_labels : ft.yhat;
  Matrix dZs = Matrix::Zero(fs.Z().rows(), fs.Z().cols());
  Matrix dZt = Matrix::Zero(ft.Z().rows(), ft.Z().cols());

  r.source_mse = source_mse(fs.yhat, ys);
  if (cfg.terms.mse) {
    const double mse = r.source_mse;
    const Matrix dY = 2.0 / n * (fs.yhat - ys);
    r.grads.predictor.W += dY.transpose() * fs.Z();
    r.grads.predictor.b += dY.colwise().sum().transpose();
    dZs += dY * params.predictor.W;
    r.components.emplace_back("mse", mse);
  }

  const bool use_kgw = metrics_active && cfg.terms.kgw && cfg.lambda2 > 0.0;
  const bool use_cond = metrics_active && (cfg.terms.cod || cfg.terms.cod_mod) && cfg.lambda1 > 0.0;
  if (use_kgw || use_cond) {
    const MetricConfig mcfg = resolve_metric_config(cfg, fs.Z(), ft.Z(), ys);
    if (use_kgw) {
      const MetricGrad g = metric_grad(MetricKind::kgw2, fs.Z(), ft.Z(), ys, r.pseudo_labels, mcfg);
      r.components.emplace_back("kgw", cfg.lambda2 * g.value.total);
      dZs += cfg.lambda2 * g.grads.dZs;
      dZt += cfg.lambda2 * g.grads.dZt;
    }
    if (use_cond) {
      const MetricKind kind = cfg.terms.cod_mod ? MetricKind::cod_mod : MetricKind::cod2;
      const MetricGrad g = metric_grad(kind, fs.Z(), ft.Z(), ys, r.pseudo_labels, mcfg);
      r.components.emplace_back(cfg.terms.cod_mod ? "cod_mod" : "cod", cfg.lambda1 * g.value.total);
      dZs += cfg.lambda1 * g.grads.dZs;
      dZt += cfg.lambda1 * g.grads.dZt;
    }
  }

  r.loss = 0.0;
  for (const auto& [name, value] : r.components) r.loss += value;
  if (!std::isfinite(r.loss)) throw NumericalError("objective: non-finite loss");

  backprop_extractor(params, fs, std::move(dZs), r.grads);
  backprop_extractor(params, ft, std::move(dZt), r.grads);
  return r;
}

Matrix TrainedModel::predict(const Eigen::Ref<const Matrix>& X) const {
  return y_scaler.inverse(forward(params, x_scaler.apply(X)).yhat);
}

Matrix TrainedModel::embed(const Eigen::Ref<const Matrix>& X) const {
  return forward(params, x_scaler.apply(X)).Z;
}

namespace {

MaeReport mae_of(const Eigen::Ref<const Matrix>& pred, const Eigen::Ref<const Matrix>& y) {
  MaeReport r;
  r.per_output = (pred - y).cwiseAbs().colwise().mean().transpose();
  r.sum = r.per_output.sum();
  return r;
}

}  // namespace

MaeReport evaluate_mae(const ModelParams& params, const Dataset& d) {
  if (!d.labeled()) throw DataError("evaluate_mae: dataset has no labels");
  const Forward f = forward(params, d.X);
  if (f.yhat.cols() != d.Y.cols()) throw ShapeError("evaluate_mae: label width differs from model output");
  return mae_of(f.yhat, d.Y);
}

MaeReport evaluate_mae(const TrainedModel& model, const Dataset& d) {
  if (!d.labeled()) throw DataError("evaluate_mae: dataset has no labels");
  const Matrix pred = model.predict(d.X);
  if (pred.cols() != d.Y.cols()) throw ShapeError("evaluate_mae: label width differs from model output");
  return mae_of(pred, d.Y);
}

Adam::Adam(const ModelParams& shape, double lr, double beta1, double beta2, double eps)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ModelParams& params, const ModelParams& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::vector<Eigen::Map<Matrix>> p, m, v;
  std::vector<Eigen::Map<const Matrix>> g;
  params.for_each_tensor([&](const std::string&, Eigen::Map<Matrix> t) { p.push_back(t); });
  m_.for_each_tensor([&](const std::string&, Eigen::Map<Matrix> t) { m.push_back(t); });
  v_.for_each_tensor([&](const std::string&, Eigen::Map<Matrix> t) { v.push_back(t); });
  grads.for_each_tensor([&](const std::string&, Eigen::Map<const Matrix> t) { g.push_back(t); });
  for (size_t k = 0; k < p.size(); ++k) {
    m[k] = beta1_ * m[k] + (1.0 - beta1_) * g[k];
    v[k] = beta2_ * v[k] + (1.0 - beta2_) * g[k].cwiseAbs2();
    p[k].array() -= lr_ * (m[k].array() / c1) / ((v[k].array() / c2).sqrt() + eps_);
  }
}

TrainResult train(const Dataset& source, const Dataset& target, const TrainConfig& cfg) {
  cfg.validate();
  source.validate();
  target.validate();
  if (!source.labeled()) throw DataError("train: source domain needs labels");
  if (source.features() != target.features())
    throw ShapeError("train: source and target feature counts differ");
  const Eigen::Index n = cfg.batch_size;
  const Eigen::Index batches = std::min(source.size(), target.size()) / n;
  if (cfg.epochs > 0 && batches < 1)
    throw DataError("train: each domain needs at least batch_size = " + std::to_string(n) + " samples");

  TrainResult result;
  TrainedModel& model = result.model;
  model.x_scaler = cfg.standardize_inputs ? Scaler::fit(source.X)
                                          : Scaler{Vector::Zero(source.features()), Vector::Ones(source.features())};
  model.y_scaler = Scaler::fit(source.Y);
  const Matrix Xs = model.x_scaler.apply(source.X);
  const Matrix Ys = model.y_scaler.apply(source.Y);
  const Matrix Xt = model.x_scaler.apply(target.X);

  std::mt19937_64 rng(cfg.seed);
  model.params = ModelParams::init(source.features(), cfg.hidden, source.outputs(), rng);
  Adam adam(model.params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

  std::vector<Eigen::Index> src_order(static_cast<size_t>(source.size()));
  std::vector<Eigen::Index> tgt_order(static_cast<size_t>(target.size()));
  Matrix bxs(n, Xs.cols()), bys(n, Ys.cols()), bxt(n, Xt.cols());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(src_order.begin(), src_order.end(), Eigen::Index{0});
    std::iota(tgt_order.begin(), tgt_order.end(), Eigen::Index{0});
    std::shuffle(src_order.begin(), src_order.end(), rng);
    std::shuffle(tgt_order.begin(), tgt_order.end(), rng);
    const bool metrics_active = epoch >= cfg.warmup_epochs;

    EpochRecord rec;
    rec.epoch = epoch + 1;
    for (Eigen::Index b = 0; b < batches; ++b) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = src_order[static_cast<size_t>(b * n + i)];
        const auto ti = tgt_order[static_cast<size_t>(b * n + i)];
        bxs.row(i) = Xs.row(si);
        bys.row(i) = Ys.row(si);
        bxt.row(i) = Xt.row(ti);
      }
      ObjectiveResult r = objective(model.params, bxs, bys, bxt, cfg, metrics_active);
      if (!std::isfinite(r.loss) || std::abs(r.loss) > 1e6) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch + 1 << ", batch " << b + 1 << ": loss " << r.loss;
        for (const auto& [name, v] : r.components) msg << ", " << name << " " << v;
        throw NumericalError(msg.str());
      }
      rec.loss += r.loss;
      rec.source_mse += r.source_mse;
      for (const auto& [name, v] : r.components) {
        auto it = std::find_if(rec.components.begin(), rec.components.end(),
                               [&name = name](const auto& c) { return c.first == name; });
        if (it == rec.components.end()) rec.components.emplace_back(name, v);
        else it->second += v;
      }
      adam.step(model.params, r.grads);
    }
    const double inv = 1.0 / static_cast<double>(batches);
    rec.loss *= inv;
    rec.source_mse *= inv;
    for (auto& c : rec.components) c.second *= inv;
    model.params.validate();
    if (target.labeled()) rec.target_mae = evaluate_mae(model, target);
    rec.source_mae_sum = evaluate_mae(model, source).sum;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(std::move(rec));
  }

  std::ostringstream state;
  state << rng;
  result.rng_state = state.str();
  return result;
}

}  // namespace codkit
