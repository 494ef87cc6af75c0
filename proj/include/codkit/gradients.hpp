#pragma once

#include "codkit/metrics.hpp"

namespace codkit {

/// Gradients with respect to the source and target representation batches.
struct GradPair {
  Matrix dZs;
  Matrix dZt;
};

/// Partial derivatives of a metric with respect to its three X-kernel
/// matrices (KXss, KXtt, KXts). Label kernels are held constant.
struct KernelAdjoint {
  Matrix ss, tt, ts;
};

struct MetricGrad {
  MetricValue value;
  GradPair grads;
};

/// Derivative of |M|_* with respect to M: U_r V_r^T over the singular values
/// above `relative_rank_tol * max(sigma_max, tiny)`. Singular values below
/// the threshold are treated as exact zeros and contribute nothing.
Matrix nuclear_norm_grad(const Eigen::Ref<const Matrix>& m, double relative_rank_tol = 1e-10);

/// Backpropagates an adjoint W = dL/dK through K = k(A, B); returns
/// (dL/dA, dL/dB). The delta kernel has no derivative and is rejected.
std::pair<Matrix, Matrix> kernel_backward(const KernelSpec& spec, const Eigen::Ref<const Matrix>& W,
                                          const Eigen::Ref<const Matrix>& A,
                                          const Eigen::Ref<const Matrix>& B);

KernelAdjoint metric_kernel_adjoint(MetricKind kind, const GramBundle& b, const MetricConfig& cfg);

/// Value and exact gradient of `kind` at representations (Zs, Zt) with labels
/// (ys, yt) treated as constants.
MetricGrad metric_grad(MetricKind kind, const Eigen::Ref<const Matrix>& Zs,
                       const Eigen::Ref<const Matrix>& Zt, const Eigen::Ref<const Matrix>& ys,
                       const Eigen::Ref<const Matrix>& yt, const MetricConfig& cfg);

/// Central differences over every entry of Zs and Zt compared with
/// metric_grad. Returns max |a - f| / max(|a|, |f|, 1e-8).
double finite_diff_check(MetricKind kind, const Eigen::Ref<const Matrix>& Zs,
                         const Eigen::Ref<const Matrix>& Zt, const Eigen::Ref<const Matrix>& ys,
                         const Eigen::Ref<const Matrix>& yt, const MetricConfig& cfg, double h);

/// Smallest singular value, over every nuclear-norm site the metric touches,
/// that is not a structural zero (below the rank threshold). Finite
/// differences are unreliable when this is tiny. Returns +inf for metrics
/// without nuclear-norm sites.
double min_active_singular_value(MetricKind kind, const GramBundle& b, const MetricConfig& cfg);

}  // namespace codkit
