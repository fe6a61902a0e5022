#include "e2v/models.hpp"

#include "e2v/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <numeric>

namespace e2v {

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights.size()) throw DataError("linear model: input dim mismatch");
  return (x * weights).array() + intercept;
}

LinearModel fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, SubsetId fitted_on) {
  if (x.rows() != y.size()) throw DataError("fit_linear: row count mismatch");
  if (x.rows() < 2) throw DataError("fit_linear needs at least 2 rows");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("fit_linear: non-finite input");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearModel model;
  model.fitted_on = fitted_on;
  model.weights = Eigen::VectorXd::Zero(x.cols());
  if (x.cols() > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = s.size() > 0 ? 1e-10 * s.maxCoeff() : 0.0;
    Eigen::VectorXd uty = svd.matrixU().transpose() * yc;
    for (Eigen::Index i = 0; i < s.size(); ++i) uty[i] = s[i] > cutoff ? uty[i] / s[i] : 0.0;
    model.weights = svd.matrixV() * uty;
  }
  model.intercept = y_mean - x_mean.dot(model.weights);
  return model;
}

std::vector<Eigen::Index> FeatureRanking::top(std::size_t k) const {
  if (k > order.size()) throw DataError("top-k larger than the ranked dimension count");
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)};
}

FeatureRanking rank_features(const LinearModel& model, std::string property) {
  FeatureRanking r;
  r.property = std::move(property);
  r.scores = model.weights.cwiseAbs();
  r.fitted_on = model.fitted_on;
  r.order.resize(static_cast<std::size_t>(r.scores.size()));
  std::iota(r.order.begin(), r.order.end(), Eigen::Index{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return r.scores[a] > r.scores[b]; });
  return r;
}

Eigen::VectorXd MlpParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index o = 0;
  flat.segment(o, w1.size()) = w1.reshaped();
  o += w1.size();
  flat.segment(o, b1.size()) = b1;
  o += b1.size();
  flat.segment(o, w2.size()) = w2;
  o += w2.size();
  flat[o] = b2;
  return flat;
}

void MlpParams::unflatten(const Eigen::VectorXd& flat) {
  Eigen::Index o = 0;
  w1.reshaped() = flat.segment(o, w1.size());
  o += w1.size();
  b1 = flat.segment(o, b1.size());
  o += b1.size();
  w2 = flat.segment(o, w2.size());
  o += w2.size();
  b2 = flat[o];
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd hidden = ((x * p.w1).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  return (hidden * p.w2).array() + p.b2;
}

double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                MlpParams* grad) {
  const auto n = static_cast<double>(x.rows());
  const Eigen::MatrixXd pre = (x * p.w1).rowwise() + p.b1.transpose();
  const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
  const Eigen::VectorXd yhat = (hidden * p.w2).array() + p.b2;
  const Eigen::VectorXd residual = yhat - y;
  const double loss =
      residual.squaredNorm() / (2.0 * n) + alpha * (p.w1.squaredNorm() + p.w2.squaredNorm()) / (2.0 * n);
  if (grad) {
    const Eigen::VectorXd d_out = residual / n;
    grad->w2 = hidden.transpose() * d_out + (alpha / n) * p.w2;
    grad->b2 = d_out.sum();
    const Eigen::MatrixXd d_hidden =
        (d_out * p.w2.transpose()).array() * (pre.array() > 0.0).cast<double>();
    grad->w1 = x.transpose() * d_hidden + (alpha / n) * p.w1;
    grad->b1 = d_hidden.colwise().sum().transpose();
  }
  return loss;
}

MlpParams init_mlp(Eigen::Index input_dim, int hidden, std::uint64_t seed) {
  Rng rng(seed);
  auto uniform = [&](double bound) { return rng.uniform(-bound, bound); };
  MlpParams p;
  const double bound1 = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  p.w1 = Eigen::MatrixXd::NullaryExpr(input_dim, hidden, [&] { return uniform(bound1); });
  p.b1 = Eigen::VectorXd::NullaryExpr(hidden, [&] { return uniform(bound1); });
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  p.w2 = Eigen::VectorXd::NullaryExpr(hidden, [&] { return uniform(bound2); });
  p.b2 = uniform(bound2);
  return p;
}

MlpModel fit_mlp(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpConfig& config) {
  if (x.rows() != y.size()) throw DataError("fit_mlp: row count mismatch");
  if (x.rows() < 5) throw DataError("fit_mlp needs at least 5 rows");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("fit_mlp: non-finite input");
  if (config.hidden < 1) throw ConfigError("MLP needs at least one hidden unit");

  MlpModel model;
  model.config = config;
  model.params = init_mlp(x.cols(), config.hidden, config.seed);
  model.status = MlpStatus::NoTraining;
  if (config.max_epochs <= 0) return model;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<Eigen::Index> train_rows = order;
  std::vector<Eigen::Index> val_rows;
  if (config.early_stopping) {
    Rng rng(config.seed ^ 0x5bd1e995ULL);
    rng.shuffle(std::span(order));
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(x.rows()) + 0.5)));
    val_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  }
  const Eigen::MatrixXd x_train = select_rows(x, train_rows);
  const Eigen::VectorXd y_train = select_rows(y, train_rows);
  const Eigen::MatrixXd x_val = select_rows(x, val_rows);
  const Eigen::VectorXd y_val = select_rows(y, val_rows);

  Adam<double> adam(model.params.size(), config.adam);
  Eigen::VectorXd flat = model.params.flatten();
  Eigen::VectorXd best = flat;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;
  MlpParams grad = model.params;
  model.status = MlpStatus::Trained;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double loss = mlp_loss(model.params, x_train, y_train, config.alpha, &grad);
    if (!std::isfinite(loss)) throw NumericalError("MLP loss became non-finite at epoch " + std::to_string(epoch));
    adam.step(flat, grad.flatten());
    model.params.unflatten(flat);

    MlpEpoch entry{epoch, loss, 0.0};
    if (config.early_stopping) {
      entry.validation_rmse = rmse(y_val, mlp_forward(model.params, x_val));
      if (entry.validation_rmse < best_val) {
        best_val = entry.validation_rmse;
        best = flat;
        stale = 0;
      } else if (++stale >= config.patience) {
        model.log.push_back(entry);
        model.status = MlpStatus::EarlyStopped;
        break;
      }
    }
    model.log.push_back(entry);
  }
  if (config.early_stopping) model.params.unflatten(best);
  return model;
}

SoftmaxClassifier SoftmaxClassifier::zeros(Eigen::Index dim, int classes) {
  return {Eigen::MatrixXd::Zero(dim, classes), Eigen::VectorXd::Zero(classes)};
}

Eigen::MatrixXd SoftmaxClassifier::predict_proba(const Eigen::MatrixXd& x) const {
  if (x.cols() != weights.rows()) throw DataError("softmax: input dim mismatch");
  if (!x.allFinite()) throw NumericalError("softmax: non-finite input");
  Eigen::MatrixXd logits = (x * weights).rowwise() + bias.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits = (logits.colwise() - row_max).array().exp();
  const Eigen::VectorXd row_sum = logits.rowwise().sum();
  return logits.array().colwise() / row_sum.array();
}

std::vector<int> SoftmaxClassifier::predict(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd p = predict_proba(x);
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index arg = 0;
    p.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

namespace {

Eigen::MatrixXd one_hot(const std::vector<int>& labels, int classes) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw DataError("class label out of range");
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

}  // namespace

double softmax_loss(const SoftmaxClassifier& model, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                    double l2, SoftmaxClassifier* grad) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw DataError("softmax: label count mismatch");
  const auto n = static_cast<double>(x.rows());
  const Eigen::MatrixXd y = one_hot(labels, model.classes());
  const Eigen::MatrixXd p = model.predict_proba(x);
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) loss -= std::log(p(static_cast<Eigen::Index>(i), labels[i]));
  loss = loss / n + 0.5 * l2 * model.weights.squaredNorm();
  if (grad) {
    const Eigen::MatrixXd diff = (p - y) / n;
    grad->weights = x.transpose() * diff + l2 * model.weights;
    grad->bias = diff.colwise().sum().transpose();
  }
  return loss;
}

SoftmaxClassifier fit_softmax(const Eigen::MatrixXd& x, const std::vector<int>& labels, const SoftmaxConfig& config) {
  if (!x.allFinite()) throw NumericalError("fit_softmax: non-finite input");
  auto model = SoftmaxClassifier::zeros(x.cols(), config.classes);
  if (labels.empty()) return model;
  SoftmaxClassifier grad = model;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double loss = softmax_loss(model, x, labels, config.l2, &grad);
    if (!std::isfinite(loss)) throw NumericalError("softmax loss became non-finite at epoch " + std::to_string(epoch));
    model.weights -= config.step_size * grad.weights;
    model.bias -= config.step_size * grad.bias;
  }
  return model;
}

}  // namespace e2v
