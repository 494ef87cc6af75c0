#pragma once

#include "codkit/numerics.hpp"

#include <string>
#include <vector>

namespace codkit {

enum class Domain { source, target };
enum class LabelVisibility { train_visible, eval_only };

/// Covariates and continuous labels for one domain.
struct Dataset {
  Matrix X;  // n x p
  Matrix Y;  // n x m
  Domain domain = Domain::source;
  LabelVisibility visibility = LabelVisibility::train_visible;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index features() const { return X.cols(); }
  Eigen::Index outputs() const { return Y.cols(); }
  bool labeled() const { return Y.rows() == X.rows() && Y.cols() > 0; }

  /// Checks row agreement, n >= 1 and finiteness; throws DataError.
  void validate() const;
  /// Rows selected by `index`, in that order.
  Dataset subset(const std::vector<Eigen::Index>& index) const;
};

std::string to_string(Domain d);

}  // namespace codkit
