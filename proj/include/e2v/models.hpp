#pragma once

#include "e2v/dataset.hpp"
#include "e2v/error.hpp"
#include "e2v/optim.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace e2v {

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rmse(const Eigen::MatrixBase<DerivedA>& y_true, const Eigen::MatrixBase<DerivedB>& y_pred) {
  if (y_true.size() != y_pred.size()) throw DataError("rmse: length mismatch");
  if (y_true.size() == 0) throw DataError("rmse: empty input");
  using std::sqrt;
  return sqrt((y_true.derived().array() - y_pred.derived().array()).square().mean());
}

struct LinearModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  SubsetId fitted_on = 0;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// Minimum-norm least squares on centered data through a thin SVD; singular
/// values below 1e-10 times the largest are treated as zero. The intercept
/// comes from the column and target means.
LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, SubsetId fitted_on = 0);

struct FeatureRanking {
  std::string property;
  std::vector<Eigen::Index> order;  // descending score, ties by ascending index
  Eigen::VectorXd scores;           // |standardized coefficient|
  SubsetId fitted_on = 0;

  /// The first k entries of `order`.
  std::vector<Eigen::Index> top(std::size_t k) const;
};

FeatureRanking rank_features(const LinearModel& model, std::string property = {});

struct MlpConfig {
  int hidden = 100;
  double alpha = 1e-4;
  int max_epochs = 500;
  AdamConfig adam{};
  bool early_stopping = true;
  double validation_fraction = 0.1;
  int patience = 10;
  std::uint64_t seed = 0;
};

/// One hidden rectifier layer: yhat = relu(x W1 + b1) w2 + b2.
struct MlpParams {
  Eigen::MatrixXd w1;  // input_dim x hidden
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;

  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& flat);
  Eigen::Index size() const { return w1.size() + b1.size() + w2.size() + 1; }
};

Eigen::VectorXd mlp_forward(const MlpParams& params, const Eigen::MatrixXd& x);

/// Loss sum((yhat - y)^2) / (2n) + alpha * (|W1|^2 + |w2|^2) / (2n); fills
/// `grad` (same shapes as params) when non-null.
double mlp_loss(const MlpParams& params, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                MlpParams* grad = nullptr);

enum class MlpStatus { Trained, EarlyStopped, NoTraining };

struct MlpEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_rmse = 0.0;
};

struct MlpModel {
  MlpParams params;
  MlpConfig config;
  std::vector<MlpEpoch> log;
  MlpStatus status = MlpStatus::NoTraining;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const { return mlp_forward(params, x); }
};

MlpParams init_mlp(Eigen::Index input_dim, int hidden, std::uint64_t seed);

/// Full-batch Adam; with early stopping, a seeded validation slice is held
/// out and the best validation parameters are restored at the end.
MlpModel fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpConfig& config = {});

struct SoftmaxConfig {
  int classes = 10;
  int epochs = 500;
  double step_size = 0.1;
  double l2 = 1e-4;
};

struct SoftmaxClassifier {
  Eigen::MatrixXd weights;  // dim x classes
  Eigen::VectorXd bias;

  static SoftmaxClassifier zeros(Eigen::Index dim, int classes);
  int classes() const { return static_cast<int>(bias.size()); }
  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const;
  std::vector<int> predict(const Eigen::MatrixXd& x) const;
};

/// Mean cross-entropy plus (l2/2)|W|^2; fills `grad` when non-null.
double softmax_loss(const SoftmaxClassifier& model, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                    double l2, SoftmaxClassifier* grad = nullptr);

/// Full-batch gradient descent from a zero initialization.
SoftmaxClassifier fit_softmax(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                              const SoftmaxConfig& config = {});

}  // namespace e2v
