#include "codkit/gradients.hpp"

#include "codkit/errors.hpp"

#include <cmath>
#include <limits>

namespace codkit {

namespace {

Matrix center_rows(const Eigen::Ref<const Matrix>& m) {
  Matrix out = m;
  out.rowwise() -= m.colwise().mean();
  return out;
}

double rank_threshold(const Vector& sv, double relative_rank_tol) {
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  return relative_rank_tol * std::max(top, std::numeric_limits<double>::min());
}

Eigen::JacobiSVD<Matrix> full_svd(const Eigen::Ref<const Matrix>& m) {
  if (!m.allFinite()) throw NumericalError("nuclear-norm site has non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed at a nuclear-norm site");
  return svd;
}

struct MeanAdjoint {
  Matrix within_s, within_t, cross;  // dK of each trace term
};

MeanAdjoint mean_adjoint(const GramBundle& b, double ridge_lambda) {
  const Matrix Rs = reg_inverse(b.KYss, ridge_lambda);
  const Matrix Rt = reg_inverse(b.KYtt, ridge_lambda);
  return {Rs * b.KYss * Rs, Rt * b.KYtt * Rt, Rt * b.KYts * Rs};
}

// Bures cross site: M = H KXts H.
Matrix bures_cross_adjoint(const GramBundle& b) {
  const Matrix G = nuclear_norm_grad(center_gram(b.KXts));
  return -2.0 / static_cast<double>(b.n()) * center_gram(G);
}

void add_covariance_adjoint(const GramBundle& b, double epsilon, KernelAdjoint& adj) {
  const double n = static_cast<double>(b.n());
  const ConditionalStats s = conditional_stats(b.GYs, epsilon);
  const ConditionalStats t = conditional_stats(b.GYt, epsilon);
  adj.ss += center_gram(s.B) / n;
  adj.tt += center_gram(t.B) / n;
  const Matrix HAs = center_rows(s.A);
  const Matrix HAt = center_rows(t.A);
  const Matrix G = nuclear_norm_grad(HAt.transpose() * b.KXts * HAs);
  adj.ts += -2.0 / n * (HAt * G * HAs.transpose());
}

}  // namespace

Matrix nuclear_norm_grad(const Eigen::Ref<const Matrix>& m, double relative_rank_tol) {
  const auto svd = full_svd(m);
  const Vector& sv = svd.singularValues();
  const double tol = rank_threshold(sv, relative_rank_tol);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  return svd.matrixU().leftCols(rank) * svd.matrixV().leftCols(rank).transpose();
}

std::pair<Matrix, Matrix> kernel_backward(const KernelSpec& spec, const Eigen::Ref<const Matrix>& W,
                                          const Eigen::Ref<const Matrix>& A,
                                          const Eigen::Ref<const Matrix>& B) {
  if (W.rows() != A.rows() || W.cols() != B.rows() || A.cols() != B.cols())
    throw ShapeError("kernel_backward: adjoint does not conform with the samples");
  switch (spec.kind) {
    case KernelKind::linear:
      return {W * B, W.transpose() * A};
    case KernelKind::gaussian: {
      const Matrix P = W.cwiseProduct(kernel_matrix(spec, A, B));
      const double c = -2.0 / (spec.bandwidth * spec.bandwidth);
      Matrix dA = c * (P.rowwise().sum().asDiagonal() * A - P * B);
      Matrix dB = c * (P.colwise().sum().transpose().asDiagonal() * B - P.transpose() * A);
      return {std::move(dA), std::move(dB)};
    }
    case KernelKind::delta:
      throw ConfigError("delta kernel on representations is not differentiable");
  }
  throw ConfigError("unsupported kernel kind");
}

KernelAdjoint metric_kernel_adjoint(MetricKind kind, const GramBundle& b, const MetricConfig& cfg) {
  b.validate();
  const Eigen::Index n = b.n();
  const double nn = static_cast<double>(n);
  KernelAdjoint adj{Matrix::Zero(n, n), Matrix::Zero(n, n), Matrix::Zero(n, n)};

  switch (kind) {
    case MetricKind::mmd2:
    case MetricKind::kgw2: {
      const double w = 1.0 / (nn * nn);
      adj.ss.setConstant(w);
      adj.tt.setConstant(w);
      adj.ts.setConstant(-2.0 * w);
      if (kind == MetricKind::kgw2) {
        const Matrix H = centering_matrix(n) / nn;
        adj.ss += H;
        adj.tt += H;
        adj.ts += bures_cross_adjoint(b);
      }
      return adj;
    }
    case MetricKind::cmmd2:
    case MetricKind::cod2: {
      MeanAdjoint m = mean_adjoint(b, cfg.ridge_lambda);
      adj.ss = std::move(m.within_s);
      adj.tt = std::move(m.within_t);
      adj.ts = -2.0 * m.cross;
      if (kind == MetricKind::cod2) add_covariance_adjoint(b, cfg.epsilon, adj);
      return adj;
    }
    case MetricKind::cmmd_mod:
    case MetricKind::cod_mod: {
      MeanAdjoint m = mean_adjoint(b, cfg.ridge_lambda);
      if (cfg.mod_variant == ModVariant::literal) {
        adj.tt = -2.0 * m.within_t;
      } else {
        adj.ss = -m.within_s;
        adj.tt = -m.within_t;
      }
      adj.ts = -2.0 * m.cross;
      if (kind == MetricKind::cod_mod) add_covariance_adjoint(b, cfg.epsilon, adj);
      return adj;
    }
  }
  throw ConfigError("unsupported metric");
}

MetricGrad metric_grad(MetricKind kind, const Eigen::Ref<const Matrix>& Zs,
                       const Eigen::Ref<const Matrix>& Zt, const Eigen::Ref<const Matrix>& ys,
                       const Eigen::Ref<const Matrix>& yt, const MetricConfig& cfg) {
  cfg.validate();
  if (Zs.cols() != Zt.cols()) throw ShapeError("metric_grad: representation widths differ");
  const GramBundle b = make_bundle(cfg.x_kernel, cfg.y_kernel, Zs, Zt, ys, yt);
  const KernelAdjoint adj = metric_kernel_adjoint(kind, b, cfg);

  // KXss depends on Zs through both arguments; KXts = k(Zt, Zs).
  auto [ss_a, ss_b] = kernel_backward(cfg.x_kernel, adj.ss, Zs, Zs);
  auto [tt_a, tt_b] = kernel_backward(cfg.x_kernel, adj.tt, Zt, Zt);
  auto [ts_t, ts_s] = kernel_backward(cfg.x_kernel, adj.ts, Zt, Zs);

  MetricGrad out;
  out.value = evaluate(kind, b, cfg);
  out.grads.dZs = ss_a + ss_b + ts_s;
  out.grads.dZt = tt_a + tt_b + ts_t;
  if (!out.grads.dZs.allFinite() || !out.grads.dZt.allFinite())
    throw NumericalError("metric_grad: non-finite gradient");
  return out;
}

namespace {

using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;

/// Metric values in extended precision for finite differences. Everything
/// that depends on the labels is held fixed in double; only the parts that
/// move with Zs and Zt are recomputed in long double, so the differences of
/// nearby values keep enough digits even when large label-side weights
/// cancel.
class ExtendedValue {
 public:
  ExtendedValue(MetricKind kind, const Eigen::Ref<const Matrix>& ys, const Eigen::Ref<const Matrix>& yt,
                const MetricConfig& cfg)
      : kind_(kind), cfg_(cfg) {
    const GramBundle b = make_bundle(KernelSpec::linear(), cfg.y_kernel, ys, yt, ys, yt);
    const MeanAdjoint w = mean_adjoint(b, cfg.ridge_lambda);
    ws_ = w.within_s.cast<long double>();
    wt_ = w.within_t.cast<long double>();
    wc_ = w.cross.cast<long double>();
    const ConditionalStats s = conditional_stats(b.GYs, cfg.epsilon);
    const ConditionalStats t = conditional_stats(b.GYt, cfg.epsilon);
    Bs_ = s.B.cast<long double>();
    Bt_ = t.B.cast<long double>();
    HAs_ = center_rows(s.A).cast<long double>();
    HAt_ = center_rows(t.A).cast<long double>();
  }

  long double operator()(const Matrix& Zs, const Matrix& Zt) const {
    const LMatrix Kss = kernel(Zs, Zs), Ktt = kernel(Zt, Zt), Kts = kernel(Zt, Zs);
    const long double n = static_cast<long double>(Zs.rows());
    auto mean_block = [&](bool modified) {
      const long double a = ws_.cwiseProduct(Kss).sum(), b = wt_.cwiseProduct(Ktt).sum(),
                        c = wc_.cwiseProduct(Kts).sum();
      if (!modified) return a + b - 2.0L * c;
      if (cfg_.mod_variant == ModVariant::literal) return -2.0L * b - 2.0L * c;
      return -a - b - 2.0L * c;
    };
    auto covariance = [&]() {
      const long double trace = (center(Kss).cwiseProduct(Bs_).sum() + center(Ktt).cwiseProduct(Bt_).sum()) / n;
      return trace - 2.0L / n * nuclear(HAt_.transpose() * Kts * HAs_);
    };
    switch (kind_) {
      case MetricKind::mmd2:
        return (Kss.sum() + Ktt.sum() - 2.0L * Kts.sum()) / (n * n);
      case MetricKind::kgw2:
        return (Kss.sum() + Ktt.sum() - 2.0L * Kts.sum()) / (n * n) +
               (center(Kss).trace() + center(Ktt).trace() - 2.0L * nuclear(center(Kts))) / n;
      case MetricKind::cmmd2: return mean_block(false);
      case MetricKind::cmmd_mod: return mean_block(true);
      case MetricKind::cod2: return mean_block(false) + covariance();
      case MetricKind::cod_mod: return mean_block(true) + covariance();
    }
    throw ConfigError("unsupported metric");
  }

 private:
  LMatrix kernel(const Matrix& a, const Matrix& b) const {
    const LMatrix la = a.cast<long double>(), lb = b.cast<long double>();
    if (cfg_.x_kernel.kind == KernelKind::linear) return la * lb.transpose();
    const long double inv = 1.0L / (static_cast<long double>(cfg_.x_kernel.bandwidth) * cfg_.x_kernel.bandwidth);
    LMatrix k(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      for (Eigen::Index i = 0; i < a.rows(); ++i) k(i, j) = std::exp(-(la.row(i) - lb.row(j)).squaredNorm() * inv);
    return k;
  }

  static LMatrix center(const LMatrix& k) {
    LMatrix g = k;
    g.rowwise() -= k.colwise().mean();
    g.colwise() -= g.rowwise().mean();
    return g;
  }

  static long double nuclear(const LMatrix& m) {
    Eigen::JacobiSVD<LMatrix> svd(m);
    return svd.singularValues().sum();
  }

  MetricKind kind_;
  MetricConfig cfg_;
  LMatrix ws_, wt_, wc_, Bs_, Bt_, HAs_, HAt_;
};

}  // namespace

double finite_diff_check(MetricKind kind, const Eigen::Ref<const Matrix>& Zs,
                         const Eigen::Ref<const Matrix>& Zt, const Eigen::Ref<const Matrix>& ys,
                         const Eigen::Ref<const Matrix>& yt, const MetricConfig& cfg, double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_check: step must be positive");
  if (cfg.x_kernel.kind == KernelKind::delta) throw ConfigError("finite_diff_check: delta kernel has no gradient");
  const MetricGrad analytic = metric_grad(kind, Zs, Zt, ys, yt, cfg);
  const ExtendedValue extended(kind, ys, yt, cfg);

  Matrix zs = Zs;
  Matrix zt = Zt;
  // The reference path must agree with the library at the base point.
  const long double base = extended(zs, zt);
  if (std::abs(static_cast<double>(base) - analytic.value.total) > 1e-8 * std::max(1.0, std::abs(analytic.value.total)))
    throw NumericalError("finite_diff_check: extended-precision value disagrees with evaluate()");

  auto value = [&]() {
    const long double v = extended(zs, zt);
    if (!std::isfinite(v)) throw NumericalError("finite_diff_check: non-finite metric at a perturbed point");
    return v;
  };
  double worst = 0.0;
  auto sweep = [&](Matrix& z, const Matrix& grad) {
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double saved = z(i, j);
        z(i, j) = saved + h;
        const long double up = value();
        z(i, j) = saved - h;
        const long double down = value();
        z(i, j) = saved;
        // Divide by the step actually taken after rounding saved +- h.
        const long double step = static_cast<long double>(saved + h) - static_cast<long double>(saved - h);
        const double numeric = static_cast<double>((up - down) / step);
        const double a = grad(i, j);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
  };
  sweep(zs, analytic.grads.dZs);
  sweep(zt, analytic.grads.dZt);
  return worst;
}

double min_active_singular_value(MetricKind kind, const GramBundle& b, const MetricConfig& cfg) {
  double best = std::numeric_limits<double>::infinity();
  auto visit = [&](const Matrix& site) {
    const auto svd = full_svd(site);
    const Vector& sv = svd.singularValues();
    const double tol = rank_threshold(sv, 1e-10);
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > tol) best = std::min(best, sv(i));
  };
  switch (kind) {
    case MetricKind::kgw2:
      visit(center_gram(b.KXts));
      break;
    case MetricKind::cod2:
    case MetricKind::cod_mod: {
      const ConditionalStats s = conditional_stats(b.GYs, cfg.epsilon);
      const ConditionalStats t = conditional_stats(b.GYt, cfg.epsilon);
      visit(center_rows(t.A).transpose() * b.KXts * center_rows(s.A));
      break;
    }
    default:
      break;
  }
  return best;
}

}  // namespace codkit
