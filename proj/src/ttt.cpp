#include "e2v/ttt.hpp"

#include "e2v/optim.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace e2v {

void TttConfig::validate() const {
  if (model_dim < 2) throw ConfigError("TTT model_dim must be at least 2");
  if (heads != 1) throw ConfigError("TTT supports a single attention head");
  if (steps < 1) throw ConfigError("TTT needs at least one step");
  if (!(step_size > 0.0)) throw ConfigError("TTT step size must be positive");
  if (window < 1 || stale_windows < 1) throw ConfigError("TTT early-stop window settings must be positive");
}

TttResult ttt_impute(std::span<const SequenceItem> items, const std::map<std::string, double>& known_values,
                     const TttConfig& config) {
  config.validate();
  if (items.size() < 2) throw DataError("TTT needs at least 2 sequence elements");
  if (known_values.size() < 2) throw DataError("TTT needs at least 2 known values");

  std::vector<const SequenceItem*> seq;
  for (const auto& item : items) seq.push_back(&item);
  std::stable_sort(seq.begin(), seq.end(), [](const SequenceItem* a, const SequenceItem* b) {
    return a->atomic_number != b->atomic_number ? a->atomic_number < b->atomic_number : a->symbol < b->symbol;
  });

  const auto n = static_cast<Eigen::Index>(seq.size());
  const Eigen::Index dim = seq.front()->embedding.size();
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (seq[static_cast<std::size_t>(i)]->embedding.size() != dim) throw DataError("TTT: embeddings differ in dim");
    x.row(i) = seq[static_cast<std::size_t>(i)]->embedding.transpose();
  }
  if (!x.allFinite()) throw NumericalError("TTT: non-finite embeddings");

  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  Eigen::VectorXd raw_targets = Eigen::VectorXd::Zero(n);
  std::size_t matched = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = known_values.find(seq[static_cast<std::size_t>(i)]->symbol);
    if (it == known_values.end()) continue;
    if (!std::isfinite(it->second)) throw NumericalError("TTT: non-finite known value");
    mask[static_cast<std::size_t>(i)] = true;
    raw_targets[i] = it->second;
    ++matched;
  }
  if (matched != known_values.size()) throw DataError("TTT: a known value names an element outside the sequence");

  double mean = 0.0;
  double sd = 1.0;
  if (config.target_standardize) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask[static_cast<std::size_t>(i)]) mean += raw_targets[i];
    }
    mean /= static_cast<double>(matched);
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask[static_cast<std::size_t>(i)]) var += (raw_targets[i] - mean) * (raw_targets[i] - mean);
    }
    var /= static_cast<double>(matched);
    const double s = std::sqrt(var);
    sd = s <= 1e-12 * std::max(1.0, std::abs(mean)) ? 1.0 : s;
  }
  Eigen::VectorXd targets = (raw_targets.array() - mean) / sd;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) targets[i] = 0.0;
  }

  auto params = AttentionParams<double>::init(dim, config.model_dim, config.seed);
  Adam<double> adam(params.size(), AdamConfig{config.step_size});
  Eigen::VectorXd flat = params.flatten();
  Eigen::VectorXd d_yhat;

  TttResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.steps));
  double previous_window = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int step = 1; step <= config.steps; ++step) {
    const auto cache = attention_forward(x, params);
    const double loss = supervised_mse(cache.yhat, targets, mask, d_yhat);
    if (!std::isfinite(loss)) throw NumericalError("TTT loss became non-finite at step " + std::to_string(step));
    result.loss_trace.push_back(loss);
    adam.step(flat, attention_backward(x, params, cache, d_yhat).flatten());
    params.unflatten(flat);
    result.steps_run = step;

    if (step % config.window == 0) {
      const auto end = result.loss_trace.end();
      const double window_mean = std::accumulate(end - config.window, end, 0.0) / config.window;
      stale = window_mean >= previous_window ? stale + 1 : 0;
      previous_window = window_mean;
      if (stale >= config.stale_windows) {
        result.early_stopped = true;
        break;
      }
    }
  }

  const auto final_pass = attention_forward(x, params);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pred = final_pass.yhat[i] * sd + mean;
    result.predictions[seq[static_cast<std::size_t>(i)]->symbol] = pred;
    if (mask[static_cast<std::size_t>(i)]) sq += (pred - raw_targets[i]) * (pred - raw_targets[i]);
  }
  result.final_train_rmse = std::sqrt(sq / static_cast<double>(matched));
  return result;
}

}  // namespace e2v
