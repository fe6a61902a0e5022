#pragma once

#include "e2v/error.hpp"
#include "e2v/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace e2v {

/// Single-head self-attention regressor over a whole element sequence:
/// Q = X Wq, K = X Wk, V = X Wv, A = softmax_rows(Q K^T / sqrt(d_m)),
/// yhat = (A V) w + b. There is no positional encoding, so the map is
/// permutation-equivariant.
template <typename Scalar>
struct AttentionParams {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix wq;  // input_dim x model_dim
  Matrix wk;
  Matrix wv;
  Vector w;  // model_dim
  Scalar b = Scalar(0);

  static AttentionParams zeros(Eigen::Index input_dim, Eigen::Index model_dim) {
    return {Matrix::Zero(input_dim, model_dim), Matrix::Zero(input_dim, model_dim),
            Matrix::Zero(input_dim, model_dim), Vector::Zero(model_dim), Scalar(0)};
  }

  /// Projections ~ N(0, 1/input_dim), head zero.
  static AttentionParams init(Eigen::Index input_dim, Eigen::Index model_dim, std::uint64_t seed) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
    auto draw = [&] { return static_cast<Scalar>(scale * rng.normal()); };
    AttentionParams p = zeros(input_dim, model_dim);
    p.wq = Matrix::NullaryExpr(input_dim, model_dim, draw);
    p.wk = Matrix::NullaryExpr(input_dim, model_dim, draw);
    p.wv = Matrix::NullaryExpr(input_dim, model_dim, draw);
    return p;
  }

  Eigen::Index input_dim() const { return wq.rows(); }
  Eigen::Index model_dim() const { return wq.cols(); }
  Eigen::Index size() const { return 3 * wq.size() + w.size() + 1; }

  Vector flatten() const {
    Vector flat(size());
    Eigen::Index o = 0;
    for (const Matrix* m : {&wq, &wk, &wv}) {
      flat.segment(o, m->size()) = m->reshaped();
      o += m->size();
    }
    flat.segment(o, w.size()) = w;
    flat[o + w.size()] = b;
    return flat;
  }

  void unflatten(const Vector& flat) {
    Eigen::Index o = 0;
    for (Matrix* m : {&wq, &wk, &wv}) {
      m->reshaped() = flat.segment(o, m->size());
      o += m->size();
    }
    w = flat.segment(o, w.size());
    b = flat[o + w.size()];
  }
};

template <typename Scalar>
struct AttentionCache {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix q, k, v;
  Matrix attention;  // n x n, rows sum to 1
  Matrix mixed;      // attention * v
  Vector yhat;
};

template <typename Scalar>
AttentionCache<Scalar> attention_forward(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x,
                                         const AttentionParams<Scalar>& p) {
  if (x.rows() < 2) throw DataError("attention needs a sequence of at least 2");
  if (x.cols() != p.input_dim()) throw DataError("attention: input dim mismatch");
  using std::sqrt;
  AttentionCache<Scalar> c;
  c.q = x * p.wq;
  c.k = x * p.wk;
  c.v = x * p.wv;
  const Scalar scale = Scalar(1) / sqrt(static_cast<Scalar>(p.model_dim()));
  c.attention = (c.q * c.k.transpose()) * scale;
  for (Eigen::Index i = 0; i < c.attention.rows(); ++i) {
    auto row = c.attention.row(i);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  c.mixed = c.attention * c.v;
  c.yhat = (c.mixed * p.w).array() + p.b;
  if (!c.yhat.allFinite() || !c.attention.allFinite()) throw NumericalError("attention produced non-finite values");
  return c;
}

/// Mean squared error over supervised positions; writes dL/dyhat (zero off
/// the mask) into `d_yhat`.
template <typename Scalar>
Scalar supervised_mse(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& yhat,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& targets, const std::vector<bool>& mask,
                      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& d_yhat) {
  if (static_cast<std::size_t>(yhat.size()) != mask.size() || targets.size() != yhat.size()) {
    throw DataError("supervised_mse: length mismatch");
  }
  const auto m = std::count(mask.begin(), mask.end(), true);
  if (m == 0) throw DataError("supervision mask is empty");
  d_yhat = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(yhat.size());
  Scalar loss = Scalar(0);
  for (Eigen::Index i = 0; i < yhat.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const Scalar r = yhat[i] - targets[i];
    loss += r * r;
    d_yhat[i] = Scalar(2) * r / static_cast<Scalar>(m);
  }
  return loss / static_cast<Scalar>(m);
}

/// Exact gradients of a loss with respect to every parameter block, given
/// dL/dyhat for each position.
template <typename Scalar>
AttentionParams<Scalar> attention_backward(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x,
                                           const AttentionParams<Scalar>& p, const AttentionCache<Scalar>& c,
                                           const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& d_yhat) {
  using Matrix = typename AttentionParams<Scalar>::Matrix;
  using std::sqrt;
  AttentionParams<Scalar> g;
  g.w = c.mixed.transpose() * d_yhat;
  g.b = d_yhat.sum();
  const Matrix d_mixed = d_yhat * p.w.transpose();
  const Matrix d_attention = d_mixed * c.v.transpose();
  const Matrix d_v = c.attention.transpose() * d_mixed;
  // Row-wise softmax backward.
  const auto row_dot = (d_attention.array() * c.attention.array()).rowwise().sum();
  Matrix d_scores = c.attention.array() * (d_attention.array().colwise() - row_dot);
  d_scores *= Scalar(1) / sqrt(static_cast<Scalar>(p.model_dim()));
  const Matrix d_q = d_scores * c.k;
  const Matrix d_k = d_scores.transpose() * c.q;
  g.wq = x.transpose() * d_q;
  g.wk = x.transpose() * d_k;
  g.wv = x.transpose() * d_v;
  return g;
}

struct TttConfig {
  int model_dim = 64;
  int heads = 1;
  int steps = 2000;
  double step_size = 1e-3;
  std::uint64_t seed = 0;
  bool target_standardize = true;
  /// Early stop when the mean loss of consecutive windows fails to decrease
  /// this many times in a row.
  int window = 50;
  int stale_windows = 10;

  void validate() const;
};

struct SequenceItem {
  std::string symbol;
  int atomic_number = 0;
  Eigen::VectorXd embedding;
};

struct TttResult {
  std::map<std::string, double> predictions;
  std::vector<double> loss_trace;  // objective per step (standardized units)
  double final_train_rmse = 0.0;   // original units, supervised positions
  bool early_stopped = false;
  int steps_run = 0;
};

/// Trains the attention regressor on the full sequence (ascending atomic
/// number) supervising only elements with known values, then reads every
/// element's prediction from the final parameters.
TttResult ttt_impute(std::span<const SequenceItem> items, const std::map<std::string, double>& known_values,
                     const TttConfig& config);

}  // namespace e2v
