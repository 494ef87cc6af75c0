#pragma once

#include <Eigen/Dense>

#include <string>

namespace codkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class KernelKind { gaussian, linear, delta };

/// Kernel choice for one variable.
///
/// gaussian: k(a, b) = exp(-|a - b|^2 / bandwidth^2)
/// linear:   k(a, b) = <a, b>
/// delta:    k(a, b) = 1 if max_i |a_i - b_i| <= delta_tolerance, else 0
struct KernelSpec {
  KernelKind kind = KernelKind::gaussian;
  double bandwidth = 1.0;
  double delta_tolerance = 0.0;

  static KernelSpec gaussian(double bandwidth) { return {KernelKind::gaussian, bandwidth, 0.0}; }
  static KernelSpec linear() { return {KernelKind::linear, 1.0, 0.0}; }
  static KernelSpec delta(double tolerance = 0.0) { return {KernelKind::delta, 1.0, tolerance}; }

  void validate() const;
};

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// Throws DataError when any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& m, const char* what);

/// Gram matrix between the rows of `a` (n x d) and the rows of `b` (m x d).
Matrix kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& a,
                     const Eigen::Ref<const Matrix>& b);

/// H_n = I - (1/n) 1 1^T.
Matrix centering_matrix(Eigen::Index n);

/// G = H K H. Computed by subtracting row and column means.
Matrix center_gram(const Eigen::Ref<const Matrix>& k);

struct SymEig {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, matching `values`
};

/// Eigendecomposition of a symmetric matrix (symmetry checked to 1e-8,
/// relative to the largest entry).
SymEig sym_eig(const Eigen::Ref<const Matrix>& m);

/// Principal square root of a symmetric PSD matrix. Eigenvalues in
/// [-1e-6, 0) are clamped to zero; anything more negative is an error.
Matrix psd_sqrt(const Eigen::Ref<const Matrix>& m);

/// Sum of singular values.
double nuclear_norm(const Eigen::Ref<const Matrix>& m);

/// (M + rho I)^{-1} for symmetric PSD M and rho > 0.
Matrix reg_inverse(const Eigen::Ref<const Matrix>& m, double rho);

/// Square root of the median pairwise squared distance between distinct
/// rows. Returns 1.0 when that median is zero.
double median_heuristic(const Eigen::Ref<const Matrix>& x);

/// Tolerance below which an eigenvalue of a PSD input counts as rounding.
inline constexpr double kPsdClampTolerance = 1e-10;
/// Eigenvalues below -kPsdRejectTolerance signal a non-PSD input.
inline constexpr double kPsdRejectTolerance = 1e-6;

}  // namespace codkit
