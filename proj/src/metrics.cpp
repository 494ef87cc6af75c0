#include "codkit/metrics.hpp"

#include "codkit/errors.hpp"

namespace codkit {

void MetricConfig::validate() const {
  x_kernel.validate();
  y_kernel.validate();
  if (!(epsilon > 0.0)) throw ConfigError("metric epsilon must be positive");
  if (!(ridge_lambda > 0.0)) throw ConfigError("metric ridge_lambda must be positive");
}

double MetricValue::component(const std::string& name) const {
  for (const auto& [key, value] : components)
    if (key == name) return value;
  throw std::out_of_range("MetricValue has no component '" + name + "'");
}

std::string to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::mmd2: return "mmd2";
    case MetricKind::kgw2: return "kgw2";
    case MetricKind::cmmd2: return "cmmd2";
    case MetricKind::cmmd_mod: return "cmmd_mod";
    case MetricKind::cod2: return "cod2";
    case MetricKind::cod_mod: return "cod_mod";
  }
  return "unknown";
}

MetricKind metric_from_string(const std::string& name) {
  for (MetricKind k : all_metrics())
    if (to_string(k) == name) return k;
  throw ConfigError("unknown metric '" + name + "'");
}

const std::vector<MetricKind>& all_metrics() {
  static const std::vector<MetricKind> kinds{MetricKind::mmd2,     MetricKind::kgw2,
                                             MetricKind::cmmd2,    MetricKind::cmmd_mod,
                                             MetricKind::cod2,     MetricKind::cod_mod};
  return kinds;
}

namespace {

void require_conformable(Eigen::Index n, const Eigen::Ref<const Matrix>& m, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(n) + "x" + std::to_string(n) +
                     " matrix");
}

double inv_n(Eigen::Index n) { return 1.0 / static_cast<double>(n); }

/// sum_ij a_ij b_ij with an extended-precision accumulator. The weights from
/// ridge inverses are large and of mixed sign, so a plain double sum loses
/// the digits that finite differences rely on.
double weighted_sum(const Matrix& a, const Eigen::Ref<const Matrix>& b) {
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) acc += static_cast<long double>(a(i, j)) * b(i, j);
  return static_cast<double>(acc);
}

}  // namespace

MeanBlockTerms mean_block_terms(const GramBundle& b, double ridge_lambda) {
  b.validate();
  const Matrix Rs = reg_inverse(b.KYss, ridge_lambda);
  const Matrix Rt = reg_inverse(b.KYtt, ridge_lambda);
  MeanBlockTerms t;
  t.within_source = weighted_sum(Rs * b.KYss * Rs, b.KXss);
  t.within_target = weighted_sum(Rt * b.KYtt * Rt, b.KXtt);
  // tr(KYts Rs KXst Rt) = sum_ij (Rt KYts Rs)_ij (KXts)_ij
  t.cross = weighted_sum(Rt * b.KYts * Rs, b.KXts);
  return t;
}

double mmd2(const Eigen::Ref<const Matrix>& KXss, const Eigen::Ref<const Matrix>& KXtt,
            const Eigen::Ref<const Matrix>& KXts) {
  const Eigen::Index n = KXss.rows();
  require_conformable(n, KXss, "mmd2");
  require_conformable(n, KXtt, "mmd2");
  require_conformable(n, KXts, "mmd2");
  double v = (KXss.sum() + KXtt.sum() - 2.0 * KXts.sum()) * inv_n(n) * inv_n(n);
  if (v < 0.0 && v >= -1e-12) v = 0.0;
  return v;
}

double kernel_bures(const Eigen::Ref<const Matrix>& GXs, const Eigen::Ref<const Matrix>& GXt,
                    const Eigen::Ref<const Matrix>& KXts) {
  const Eigen::Index n = GXs.rows();
  require_conformable(n, GXs, "kernel_bures");
  require_conformable(n, GXt, "kernel_bures");
  require_conformable(n, KXts, "kernel_bures");
  return (GXs.trace() + GXt.trace() - 2.0 * nuclear_norm(center_gram(KXts))) * inv_n(n);
}

MetricValue kgw2(const GramBundle& b) {
  b.validate();
  const double mean = mmd2(b.KXss, b.KXtt, b.KXts);
  const double bures = kernel_bures(b.GXs, b.GXt, b.KXts);
  return {mean + bures, {{"mmd", mean}, {"bures", bures}}};
}

double cmmd2(const GramBundle& b, const MetricConfig& cfg) {
  const MeanBlockTerms t = mean_block_terms(b, cfg.ridge_lambda);
  return t.within_source + t.within_target - 2.0 * t.cross;
}

double cmmd_mod(const GramBundle& b, const MetricConfig& cfg) {
  const MeanBlockTerms t = mean_block_terms(b, cfg.ridge_lambda);
  if (cfg.mod_variant == ModVariant::literal) return -2.0 * t.within_target - 2.0 * t.cross;
  return -t.within_source - t.within_target - 2.0 * t.cross;
}

namespace {

// Groups rows of `y` by exact equality against the shared label table.
struct LabelGroups {
  std::vector<Vector> labels;
  std::vector<int> source_of, target_of;  // sample -> group
};

int find_or_add(std::vector<Vector>& labels, const Vector& y) {
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == y) return static_cast<int>(i);
  labels.push_back(y);
  return static_cast<int>(labels.size() - 1);
}

}  // namespace

double cmmd2_delta(const Dataset& source, const Dataset& target, const KernelSpec& x_kernel,
                   double ridge_lambda) {
  if (!(ridge_lambda > 0.0)) throw ConfigError("cmmd2_delta: ridge_lambda must be positive");
  if (!source.labeled() || !target.labeled())
    throw DataError("cmmd2_delta: both domains need labels to group by");
  if (source.outputs() != target.outputs() || source.features() != target.features())
    throw ShapeError("cmmd2_delta: domains disagree on feature or label dimension");

  LabelGroups g;
  for (Eigen::Index i = 0; i < source.size(); ++i)
    g.source_of.push_back(find_or_add(g.labels, source.Y.row(i).transpose()));
  const size_t source_groups = g.labels.size();
  for (Eigen::Index i = 0; i < target.size(); ++i)
    g.target_of.push_back(find_or_add(g.labels, target.Y.row(i).transpose()));
  if (g.labels.size() != source_groups)
    throw DataError("cmmd2_delta: a target label value never occurs in the source domain");

  const size_t c = g.labels.size();
  std::vector<double> ns(c, 0.0), nt(c, 0.0);
  for (int p : g.source_of) ns[static_cast<size_t>(p)] += 1.0;
  for (int p : g.target_of) nt[static_cast<size_t>(p)] += 1.0;
  for (size_t p = 0; p < c; ++p)
    if (nt[p] == 0.0) throw DataError("cmmd2_delta: a source label value never occurs in the target domain");

  const Matrix Kss = kernel_matrix(x_kernel, source.X, source.X);
  const Matrix Ktt = kernel_matrix(x_kernel, target.X, target.X);
  const Matrix Kst = kernel_matrix(x_kernel, source.X, target.X);

  std::vector<double> within_s(c, 0.0), within_t(c, 0.0), cross(c, 0.0);
  for (Eigen::Index i = 0; i < source.size(); ++i)
    for (Eigen::Index j = 0; j < source.size(); ++j)
      if (g.source_of[i] == g.source_of[j]) within_s[g.source_of[i]] += Kss(i, j);
  for (Eigen::Index i = 0; i < target.size(); ++i)
    for (Eigen::Index j = 0; j < target.size(); ++j)
      if (g.target_of[i] == g.target_of[j]) within_t[g.target_of[i]] += Ktt(i, j);
  for (Eigen::Index i = 0; i < source.size(); ++i)
    for (Eigen::Index j = 0; j < target.size(); ++j)
      if (g.source_of[i] == g.target_of[j]) cross[g.source_of[i]] += Kst(i, j);

  double total = 0.0;
  for (size_t p = 0; p < c; ++p) {
    const double as = ridge_lambda + ns[p];
    const double at = ridge_lambda + nt[p];
    total += within_s[p] / (as * as) + within_t[p] / (at * at) - 2.0 * cross[p] / (as * at);
  }
  return total;
}

CovarianceBlock covariance_block(const GramBundle& b, double epsilon) {
  b.validate();
  const ConditionalStats s = conditional_stats(b.GYs, epsilon);
  const ConditionalStats t = conditional_stats(b.GYt, epsilon);
  const double n = static_cast<double>(b.n());
  CovarianceBlock out;
  out.trace_block = (b.GXs.cwiseProduct(s.B).sum() + b.GXt.cwiseProduct(t.B).sum()) / n;
  out.cross_block = -cross_conditional_term(b.KXts, s.A, t.A);
  return out;
}

namespace {

MetricValue assemble_cod(double mean_block, const CovarianceBlock& cov) {
  return {mean_block + cov.trace_block + cov.cross_block,
          {{"mean_block", mean_block}, {"trace_block", cov.trace_block}, {"cross_block", cov.cross_block}}};
}

}  // namespace

MetricValue cod2(const GramBundle& b, const MetricConfig& cfg) {
  cfg.validate();
  return assemble_cod(cmmd2(b, cfg), covariance_block(b, cfg.epsilon));
}

MetricValue cod_mod(const GramBundle& b, const MetricConfig& cfg) {
  cfg.validate();
  return assemble_cod(cmmd_mod(b, cfg), covariance_block(b, cfg.epsilon));
}

MetricValue evaluate(MetricKind kind, const GramBundle& b, const MetricConfig& cfg) {
  switch (kind) {
    case MetricKind::mmd2: {
      const double v = mmd2(b.KXss, b.KXtt, b.KXts);
      return {v, {{"mmd2", v}}};
    }
    case MetricKind::kgw2: return kgw2(b);
    case MetricKind::cmmd2: {
      const double v = cmmd2(b, cfg);
      return {v, {{"cmmd2", v}}};
    }
    case MetricKind::cmmd_mod: {
      const double v = cmmd_mod(b, cfg);
      return {v, {{"cmmd_mod", v}}};
    }
    case MetricKind::cod2: return cod2(b, cfg);
    case MetricKind::cod_mod: return cod_mod(b, cfg);
  }
  throw ConfigError("unsupported metric");
}

MetricValue kgw2_linear(const Eigen::Ref<const Matrix>& Xs, const Eigen::Ref<const Matrix>& Xt) {
  if (Xs.rows() != Xt.rows() || Xs.cols() != Xt.cols())
    throw ShapeError("kgw2_linear: source and target batches must have the same shape");
  if (Xs.rows() == 0) throw ShapeError("kgw2_linear: empty batch");
  require_finite(Xs, "kgw2_linear input");
  require_finite(Xt, "kgw2_linear input");
  const Eigen::Index n = Xs.rows();
  const Vector ms = Xs.colwise().mean().transpose(), mt = Xt.colwise().mean().transpose();
  Matrix cs = Xs, ct = Xt;
  cs.rowwise() -= ms.transpose();
  ct.rowwise() -= mt.transpose();
  const double mean = (ms - mt).squaredNorm();
  // Upper-triangular factors; Q has orthonormal columns so singular values survive.
  auto r_factor = [](const Matrix& m) {
    Eigen::HouseholderQR<Matrix> qr(m);
    const Eigen::Index k = std::min(m.rows(), m.cols());
    return Matrix(qr.matrixQR().topRows(k).triangularView<Eigen::Upper>());
  };
  const double cross = nuclear_norm(r_factor(ct) * r_factor(cs).transpose());
  const double bures = (cs.squaredNorm() + ct.squaredNorm() - 2.0 * cross) * inv_n(n);
  return {mean + bures, {{"mmd", mean}, {"bures", bures}}};
}

MetricValue evaluate(MetricKind kind, const Eigen::Ref<const Matrix>& Xs,
                     const Eigen::Ref<const Matrix>& Xt, const Eigen::Ref<const Matrix>& Ys,
                     const Eigen::Ref<const Matrix>& Yt, const MetricConfig& cfg) {
  cfg.validate();
  const bool feature_space = cfg.x_kernel.kind == KernelKind::linear && Xs.cols() < Xs.rows();
  if (feature_space && (kind == MetricKind::mmd2 || kind == MetricKind::kgw2)) {
    if (Ys.rows() != Xs.rows() || Yt.rows() != Xt.rows())
      throw ShapeError("evaluate: label rows do not match sample rows");
    const MetricValue v = kgw2_linear(Xs, Xt);
    if (kind == MetricKind::kgw2) return v;
    const double m = v.component("mmd");
    return {m, {{"mmd2", m}}};
  }
  return evaluate(kind, make_bundle(cfg.x_kernel, cfg.y_kernel, Xs, Xt, Ys, Yt), cfg);
}

}  // namespace codkit
