#pragma once

#include "codkit/numerics.hpp"

namespace codkit {

/// Kernel matrices for one source batch and one target batch of equal size n.
/// Cross matrices are oriented target-rows by source-columns.
struct GramBundle {
  Matrix KXss, KXtt, KXts;
  Matrix KYss, KYtt, KYts;
  Matrix GXs, GXt, GYs, GYt;

  Eigen::Index n() const { return KXss.rows(); }
  /// Checks the square/shared-n invariant; throws ShapeError.
  void validate() const;
};

/// Builds every kernel and centered matrix from raw samples. Xs/Xt are n x p,
/// Ys/Yt are n x m.
GramBundle make_bundle(const KernelSpec& x_kernel, const KernelSpec& y_kernel,
                       const Eigen::Ref<const Matrix>& Xs, const Eigen::Ref<const Matrix>& Xt,
                       const Eigen::Ref<const Matrix>& Ys, const Eigen::Ref<const Matrix>& Yt);

/// Same bundle with source and target exchanged.
GramBundle swapped(const GramBundle& b);

/// Per-domain conditional covariance statistics: B = eps n (G_Y + eps n I)^{-1}
/// and a factor A with B = A A^T.
struct ConditionalStats {
  Matrix B;
  Matrix A;
  double epsilon = 0.0;
};

Matrix compute_B(const Eigen::Ref<const Matrix>& GY, double epsilon);
Matrix factor_A(const Eigen::Ref<const Matrix>& B);
ConditionalStats conditional_stats(const Eigen::Ref<const Matrix>& GY, double epsilon);

/// eps tr[G_X (eps n I + G_Y)^{-1}], equivalently (1/n) tr(G_X B).
double conditional_trace_term(const Eigen::Ref<const Matrix>& GX, const Eigen::Ref<const Matrix>& GY,
                              double epsilon);

/// (2/n) |(H A_t)^T K_X^{ts} (H A_s)|_*
double cross_conditional_term(const Eigen::Ref<const Matrix>& KXts, const Eigen::Ref<const Matrix>& As,
                              const Eigen::Ref<const Matrix>& At);

}  // namespace codkit
