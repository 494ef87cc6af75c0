#include "codkit/numerics.hpp"

#include "codkit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace codkit {

void KernelSpec::validate() const {
  if (kind == KernelKind::gaussian && !(bandwidth > 0.0 && std::isfinite(bandwidth)))
    throw ConfigError("gaussian kernel bandwidth must be positive and finite");
  if (kind == KernelKind::delta && !(delta_tolerance >= 0.0))
    throw ConfigError("delta kernel tolerance must be nonnegative");
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::gaussian: return "gaussian";
    case KernelKind::linear: return "linear";
    case KernelKind::delta: return "delta";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "gaussian") return KernelKind::gaussian;
  if (name == "linear") return KernelKind::linear;
  if (name == "delta") return KernelKind::delta;
  throw ConfigError("unknown kernel kind '" + name + "'");
}

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + " contains non-finite entries");
}

Matrix kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const Matrix>& a,
                     const Eigen::Ref<const Matrix>& b) {
  spec.validate();
  if (a.cols() != b.cols())
    throw ShapeError("kernel_matrix: column counts differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  require_finite(a, "kernel_matrix input");
  require_finite(b, "kernel_matrix input");

  switch (spec.kind) {
    case KernelKind::linear:
      return a * b.transpose();
    case KernelKind::gaussian: {
      // Direct differences rather than the |a|^2 + |b|^2 - 2ab expansion:
      // keeps k(x, x) exactly 1 and small distances accurate.
      const double inv = 1.0 / (spec.bandwidth * spec.bandwidth);
      Matrix k(a.rows(), b.rows());
      for (Eigen::Index j = 0; j < b.rows(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
          k(i, j) = std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
      return k;
    }
    case KernelKind::delta: {
      Matrix k(a.rows(), b.rows());
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
          k(i, j) = (a.row(i) - b.row(j)).cwiseAbs().maxCoeff() <= spec.delta_tolerance ? 1.0 : 0.0;
      return k;
    }
  }
  throw ConfigError("unsupported kernel kind");
}

Matrix centering_matrix(Eigen::Index n) {
  return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
}

Matrix center_gram(const Eigen::Ref<const Matrix>& k) {
  if (k.rows() != k.cols()) throw ShapeError("center_gram: matrix is not square");
  Matrix g = k;
  const Vector col_means = g.colwise().mean().transpose();
  g.rowwise() -= col_means.transpose();
  const Vector row_means = g.rowwise().mean();
  g.colwise() -= row_means;
  return g;
}

namespace {

void require_symmetric(const Eigen::Ref<const Matrix>& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + ": matrix is not square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw ShapeError(std::string(what) + ": matrix is not symmetric");
}

}  // namespace

SymEig sym_eig(const Eigen::Ref<const Matrix>& m) {
  require_symmetric(m, "sym_eig");
  require_finite(m, "sym_eig input");
  // Symmetrize so the solver sees exactly what the caller meant.
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("sym_eig: eigensolver did not converge");
  SymEig out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Matrix psd_sqrt(const Eigen::Ref<const Matrix>& m) {
  SymEig eig = sym_eig(m);
  if (eig.values.size() > 0 && eig.values.minCoeff() < -kPsdRejectTolerance)
    throw NumericalError("psd_sqrt: matrix has eigenvalue " + std::to_string(eig.values.minCoeff()));
  const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

double nuclear_norm(const Eigen::Ref<const Matrix>& m) {
  require_finite(m, "nuclear_norm input");
  if (m.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(m);
  if (svd.info() != Eigen::Success) throw NumericalError("nuclear_norm: SVD failed");
  return svd.singularValues().sum();
}

Matrix reg_inverse(const Eigen::Ref<const Matrix>& m, double rho) {
  if (!(rho > 0.0)) throw ConfigError("reg_inverse: ridge must be positive");
  if (m.rows() != m.cols()) throw ShapeError("reg_inverse: matrix is not square");
  require_finite(m, "reg_inverse input");
  const Eigen::Index n = m.rows();
  Matrix shifted = 0.5 * (m + m.transpose());
  shifted.diagonal().array() += rho;
  Eigen::LDLT<Matrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw NumericalError("reg_inverse: factorization failed");
  Matrix inv = ldlt.solve(Matrix::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

double median_heuristic(const Eigen::Ref<const Matrix>& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw DataError("median_heuristic: need at least two samples");
  require_finite(x, "median_heuristic input");
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((x.row(i) - x.row(j)).squaredNorm());
  const size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? std::sqrt(median) : 1.0;
}

}  // namespace codkit
