#pragma once

#include "codkit/condops.hpp"
#include "codkit/dataset.hpp"

#include <string>
#include <utility>
#include <vector>

namespace codkit {

/// How the within-domain terms of the modified conditional mean block are
/// assembled. `corrected` uses one source and one target term; `literal`
/// repeats the target term twice, exactly as the formula is printed.
enum class ModVariant { corrected, literal };

struct MetricConfig {
  KernelSpec x_kernel = KernelSpec::gaussian(1.0);
  KernelSpec y_kernel = KernelSpec::gaussian(1.0);
  double epsilon = 1e-2;
  double ridge_lambda = 1e-3;
  ModVariant mod_variant = ModVariant::corrected;

  void validate() const;
};

/// A metric total with its named additive parts.
struct MetricValue {
  double total = 0.0;
  std::vector<std::pair<std::string, double>> components;

  double component(const std::string& name) const;
};

enum class MetricKind { mmd2, kgw2, cmmd2, cmmd_mod, cod2, cod_mod };

std::string to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& name);
const std::vector<MetricKind>& all_metrics();

/// The three traces of the conditional mean block, with
/// R = (K_Y + lambda I)^{-1} per domain:
///   within_source = tr(KYss Rs KXss Rs)
///   within_target = tr(KYtt Rt KXtt Rt)
///   cross         = tr(KYts Rs KXst Rt)
struct MeanBlockTerms {
  double within_source = 0.0;
  double within_target = 0.0;
  double cross = 0.0;
};

MeanBlockTerms mean_block_terms(const GramBundle& b, double ridge_lambda);

/// Squared MMD from first-order statistics. Negative rounding within 1e-12
/// is clamped to zero.
double mmd2(const Eigen::Ref<const Matrix>& KXss, const Eigen::Ref<const Matrix>& KXtt,
            const Eigen::Ref<const Matrix>& KXts);

/// Empirical kernel Bures term:
/// (1/n) tr(GXs) + (1/n) tr(GXt) - (2/n) |H KXts H|_*.
double kernel_bures(const Eigen::Ref<const Matrix>& GXs, const Eigen::Ref<const Matrix>& GXt,
                    const Eigen::Ref<const Matrix>& KXts);

/// Kernel Gaussian Wasserstein distance (squared); components "mmd", "bures".
MetricValue kgw2(const GramBundle& b);

double cmmd2(const GramBundle& b, const MetricConfig& cfg);
double cmmd_mod(const GramBundle& b, const MetricConfig& cfg);

/// Class-grouped conditional mean discrepancy for labels under the Kronecker
/// delta kernel. Every distinct label row must occur in both domains. With
/// per-class counts n_p^s, n_p^t the weights are 1/(lambda + n_p^s)^2,
/// 1/(lambda + n_p^t)^2 and 1/((lambda + n_p^s)(lambda + n_p^t)).
double cmmd2_delta(const Dataset& source, const Dataset& target, const KernelSpec& x_kernel,
                   double ridge_lambda);

/// Covariance block of the conditional operator discrepancy:
/// trace_block = eps tr[GXs (eps n I + GYs)^{-1}] + eps tr[GXt (eps n I + GYt)^{-1}]
/// cross_block = -(2/n) |(H At)^T KXts (H As)|_*
struct CovarianceBlock {
  double trace_block = 0.0;
  double cross_block = 0.0;
  double total() const { return trace_block + cross_block; }
};

CovarianceBlock covariance_block(const GramBundle& b, double epsilon);

/// Components "mean_block", "trace_block", "cross_block".
MetricValue cod2(const GramBundle& b, const MetricConfig& cfg);
MetricValue cod_mod(const GramBundle& b, const MetricConfig& cfg);

/// Dispatch over every metric in the family; scalar metrics report a single
/// component named after themselves.
MetricValue evaluate(MetricKind kind, const GramBundle& b, const MetricConfig& cfg);

/// kgw2 under the linear kernel from the samples themselves, in O(n d^2):
/// with thin QR factors H Xt = Qt Rt and H Xs = Qs Rs,
/// |H KXts H|_* = |Rt Rs^T|_*. Equal to kgw2 on the Gram bundle.
MetricValue kgw2_linear(const Eigen::Ref<const Matrix>& Xs, const Eigen::Ref<const Matrix>& Xt);

/// Builds the bundle from samples and evaluates. mmd2 and kgw2 under a
/// linear x kernel with fewer features than samples take the feature-space
/// path instead.
MetricValue evaluate(MetricKind kind, const Eigen::Ref<const Matrix>& Xs,
                     const Eigen::Ref<const Matrix>& Xt, const Eigen::Ref<const Matrix>& Ys,
                     const Eigen::Ref<const Matrix>& Yt, const MetricConfig& cfg);

}  // namespace codkit
