#pragma once

#include "codkit/data.hpp"
#include "codkit/gradients.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace codkit {

/// y = x W^T + b, with W stored out x in.
struct DenseLayer {
  Matrix W;
  Vector b;
};

/// Extractor g (tanh after every layer; no layers means Z = X) followed by
/// an affine predictor h.
struct ModelParams {
  std::vector<DenseLayer> extractor;
  DenseLayer predictor;

  Eigen::Index input_dim() const;
  Eigen::Index representation_dim() const;
  Eigen::Index output_dim() const { return predictor.W.rows(); }

  /// Glorot-uniform weights, zero biases.
  static ModelParams init(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                          Eigen::Index output_dim, std::mt19937_64& rng);
  /// Same shapes, all entries zero.
  ModelParams zeros_like() const;

  /// Checks shape chaining and finiteness; throws ShapeError / NumericalError.
  void validate() const;

  /// Visits (name, tensor) for every parameter in a fixed order. Biases are
  /// visited as n x 1 column maps.
  void for_each_tensor(const std::function<void(const std::string&, Eigen::Map<Matrix>)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, Eigen::Map<const Matrix>)>& fn) const;
};

struct Forward {
  Matrix Z;     // n x d
  Matrix yhat;  // n x m
};

Forward forward(const ModelParams& params, const Eigen::Ref<const Matrix>& X);

/// (1/n) sum_i |yhat_i - y_i|^2
double source_mse(const Eigen::Ref<const Matrix>& yhat, const Eigen::Ref<const Matrix>& y);

/// Which loss terms are switched on.
struct ObjectiveTerms {
  bool mse = true;
  bool kgw = true;
  bool cod = false;
  bool cod_mod = true;

  std::string to_string() const;  // e.g. "mse+kgw+cod_mod"
  static ObjectiveTerms parse(const std::string& spec);  // '+' or ',' separated
  bool operator==(const ObjectiveTerms&) const = default;
};

/// Bandwidth for a gaussian kernel: a fixed value, or `value` times the
/// median heuristic evaluated on each mini-batch (treated as a constant for
/// differentiation). Text forms: "0.3", "median", "median*0.5".
struct BandwidthPolicy {
  bool median = true;
  double value = 1.0;

  double resolve(const Eigen::Ref<const Matrix>& samples) const;
  std::string to_string() const;
  static BandwidthPolicy parse(const std::string& text);
};

struct TrainConfig {
  double lambda1 = 1.0;  // conditional term (cod or cod_mod)
  double lambda2 = 1.0;  // kgw
  MetricConfig metric;   // kernel kinds, epsilon, ridge; gaussian widths come from the policies
  BandwidthPolicy x_bandwidth{true, 1.0};
  BandwidthPolicy y_bandwidth{true, 0.5};
  Eigen::Index batch_size = 32;
  int epochs = 100;
  int warmup_epochs = 0;  // metric terms stay off for this many epochs
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  ObjectiveTerms terms;
  std::vector<Eigen::Index> hidden{32, 16};
  bool standardize_inputs = true;

  void validate() const;
};

struct ObjectiveResult {
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> components;  // weighted, sum to loss
  double source_mse = 0.0;  // logged even when the mse term is off
  ModelParams grads;
  Matrix pseudo_labels;  // h(g(x_t)) used in the target label kernel
};

/// Loss on one source/target mini-batch pair: MSE + lambda1 * conditional
/// term + lambda2 * KGW, over representations Z = g(X). Target pseudo-labels
/// are the current predictions and are not differentiated through; passing
/// `pseudo_labels` substitutes fixed values for them.
ObjectiveResult objective(const ModelParams& params, const Eigen::Ref<const Matrix>& Xs,
                          const Eigen::Ref<const Matrix>& ys, const Eigen::Ref<const Matrix>& Xt,
                          const TrainConfig& cfg, bool metrics_active = true,
                          const Matrix* pseudo_labels = nullptr);

/// Metric configuration with gaussian bandwidths resolved for one batch.
MetricConfig resolve_metric_config(const TrainConfig& cfg, const Eigen::Ref<const Matrix>& Zs,
                                   const Eigen::Ref<const Matrix>& Zt, const Eigen::Ref<const Matrix>& ys);

struct MaeReport {
  Vector per_output;
  double sum = 0.0;
};

/// Parameters plus the source-fitted scalers the model was trained under.
struct TrainedModel {
  ModelParams params;
  Scaler x_scaler;
  Scaler y_scaler;

  /// Predictions in original label units for raw covariates.
  Matrix predict(const Eigen::Ref<const Matrix>& X) const;
  /// Representations for raw covariates.
  Matrix embed(const Eigen::Ref<const Matrix>& X) const;
};

MaeReport evaluate_mae(const ModelParams& params, const Dataset& d);
MaeReport evaluate_mae(const TrainedModel& model, const Dataset& d);

struct EpochRecord {
  int epoch = 0;
  double source_mse = 0.0;  // mean over batches, standardized label units
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> components;  // batch means
  MaeReport target_mae;      // original units, evaluation only
  double source_mae_sum = 0.0;
  double seconds = 0.0;      // wall clock
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  TrainedModel model;
  TrainHistory history;
  std::string rng_state;  // engine state after the last epoch
};

/// Adam on shuffled equal-size mini-batch pairs. Deterministic given
/// cfg.seed. Target labels are only read for evaluation.
TrainResult train(const Dataset& source, const Dataset& target, const TrainConfig& cfg);

class Adam {
 public:
  Adam(const ModelParams& shape, double lr, double beta1, double beta2, double eps);
  void step(ModelParams& params, const ModelParams& grads);

 private:
  ModelParams m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace codkit
