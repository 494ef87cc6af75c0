#include "codkit/condops.hpp"

#include "codkit/errors.hpp"

#include <string>

namespace codkit {

namespace {

void require_square(const Matrix& m, Eigen::Index n, const char* name) {
  if (m.rows() != n || m.cols() != n)
    throw ShapeError(std::string("GramBundle: ") + name + " is " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(n) + "x" +
                     std::to_string(n));
}

// H M: subtract column means.
Matrix center_rows(const Eigen::Ref<const Matrix>& m) {
  Matrix out = m;
  out.rowwise() -= m.colwise().mean();
  return out;
}

}  // namespace

void GramBundle::validate() const {
  const Eigen::Index size = KXss.rows();
  if (size == 0) throw ShapeError("GramBundle: empty batch");
  for (auto [m, name] : {std::pair{&KXss, "KXss"}, {&KXtt, "KXtt"}, {&KXts, "KXts"}, {&KYss, "KYss"},
                         {&KYtt, "KYtt"}, {&KYts, "KYts"}, {&GXs, "GXs"}, {&GXt, "GXt"},
                         {&GYs, "GYs"}, {&GYt, "GYt"}})
    require_square(*m, size, name);
}

GramBundle make_bundle(const KernelSpec& x_kernel, const KernelSpec& y_kernel,
                       const Eigen::Ref<const Matrix>& Xs, const Eigen::Ref<const Matrix>& Xt,
                       const Eigen::Ref<const Matrix>& Ys, const Eigen::Ref<const Matrix>& Yt) {
  if (Xs.rows() != Xt.rows())
    throw ShapeError("make_bundle: source and target batches differ in size (" +
                     std::to_string(Xs.rows()) + " vs " + std::to_string(Xt.rows()) + ")");
  if (Ys.rows() != Xs.rows() || Yt.rows() != Xt.rows())
    throw ShapeError("make_bundle: label rows do not match sample rows");
  GramBundle b;
  b.KXss = kernel_matrix(x_kernel, Xs, Xs);
  b.KXtt = kernel_matrix(x_kernel, Xt, Xt);
  b.KXts = kernel_matrix(x_kernel, Xt, Xs);
  b.KYss = kernel_matrix(y_kernel, Ys, Ys);
  b.KYtt = kernel_matrix(y_kernel, Yt, Yt);
  b.KYts = kernel_matrix(y_kernel, Yt, Ys);
  b.GXs = center_gram(b.KXss);
  b.GXt = center_gram(b.KXtt);
  b.GYs = center_gram(b.KYss);
  b.GYt = center_gram(b.KYtt);
  b.validate();
  return b;
}

GramBundle swapped(const GramBundle& b) {
  GramBundle s;
  s.KXss = b.KXtt;
  s.KXtt = b.KXss;
  s.KXts = b.KXts.transpose();
  s.KYss = b.KYtt;
  s.KYtt = b.KYss;
  s.KYts = b.KYts.transpose();
  s.GXs = b.GXt;
  s.GXt = b.GXs;
  s.GYs = b.GYt;
  s.GYt = b.GYs;
  return s;
}

Matrix compute_B(const Eigen::Ref<const Matrix>& GY, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("compute_B: epsilon must be positive");
  if (GY.rows() != GY.cols()) throw ShapeError("compute_B: G_Y is not square");
  const double scale = std::max(1.0, GY.cwiseAbs().maxCoeff());
  if ((GY - GY.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw ShapeError("compute_B: G_Y is not symmetric");
  const double shift = epsilon * static_cast<double>(GY.rows());
  return shift * reg_inverse(GY, shift);
}

Matrix factor_A(const Eigen::Ref<const Matrix>& B) {
  const SymEig eig = sym_eig(B);
  if (eig.values.size() > 0 && eig.values.minCoeff() < -kPsdRejectTolerance)
    throw NumericalError("factor_A: B has eigenvalue " + std::to_string(eig.values.minCoeff()));
  return eig.vectors * eig.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

ConditionalStats conditional_stats(const Eigen::Ref<const Matrix>& GY, double epsilon) {
  ConditionalStats s;
  s.B = compute_B(GY, epsilon);
  s.A = factor_A(s.B);
  s.epsilon = epsilon;
  return s;
}

double conditional_trace_term(const Eigen::Ref<const Matrix>& GX, const Eigen::Ref<const Matrix>& GY,
                              double epsilon) {
  if (GX.rows() != GY.rows() || GX.cols() != GY.cols() || GX.rows() != GX.cols())
    throw ShapeError("conditional_trace_term: G_X and G_Y must be square of equal size");
  const Matrix B = compute_B(GY, epsilon);
  // tr(G_X B) without forming the product.
  return GX.cwiseProduct(B).sum() / static_cast<double>(GX.rows());
}

double cross_conditional_term(const Eigen::Ref<const Matrix>& KXts, const Eigen::Ref<const Matrix>& As,
                              const Eigen::Ref<const Matrix>& At) {
  if (KXts.rows() != At.rows() || KXts.cols() != As.rows())
    throw ShapeError("cross_conditional_term: factors do not conform with K_X^{ts}");
  const Matrix inner = center_rows(At).transpose() * KXts * center_rows(As);
  return 2.0 / static_cast<double>(KXts.rows()) * nuclear_norm(inner);
}

}  // namespace codkit
