#pragma once

#include "e2v/dataset.hpp"
#include "e2v/error.hpp"
#include "e2v/models.hpp"
#include "e2v/ttt.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace e2v {

inline constexpr double kEntropyGuard = 1e-9;

/// -sum p log2(p + 1e-9) over every entry, zeros included.
template <typename Derived>
double entropy(const Eigen::MatrixBase<Derived>& probs) {
  double total = 0.0;
  double h = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double p = static_cast<double>(probs.derived().coeff(k));
    if (!std::isfinite(p)) throw NumericalError("entropy: non-finite probability");
    if (p < 0.0) throw DataError("entropy: negative probability");
    total += p;
    h -= p * std::log2(p + kEntropyGuard);
  }
  if (std::abs(total - 1.0) > 1e-6) throw DataError("entropy: probabilities do not sum to 1");
  return h;
}

struct KdeCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian KDE, Silverman bandwidth 1.06 * sd * n^(-1/5) floored at 1e-3,
/// on `points` evenly spaced positions over [min - 3h, max + 3h].
KdeCurve kde(std::span<const double> values, int points = 256);
double kde_density(std::span<const double> values, double bandwidth, double at);
double trapezoid(std::span<const double> x, std::span<const double> y);

struct TsneConfig {
  double perplexity = 10.0;
  int iterations = 1000;
  double step_size = 10.0;
  double exaggeration = 12.0;
  int exaggeration_steps = 250;
  double momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double init_scale = 1e-4;
  std::uint64_t seed = 0;
};

struct Projection2D {
  Eigen::MatrixXd coords;        // n x 2
  std::vector<double> kl_trace;  // KL(P || Q) after every iteration
  TsneConfig settings;
};

/// Conditional affinities p_{j|i}; each row is fitted by bisection on the
/// precision until exp(H_i) is within 1e-4 of the perplexity. Rows whose
/// distances are all equal get uniform affinities.
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& x, double perplexity);

/// Exact t-SNE.
Projection2D tsne(const Eigen::MatrixXd& x, const TsneConfig& config = {});

struct RmseCurve {
  std::vector<int> budgets;  // ascending; the last entry is the full dimension
  std::vector<double> rmse;
  double best_tail_average = 0.0;
  int saturation_dim = 0;
  double tau = 0.02;
};

/// Mean from the first minimum through the end.
double best_tail_average(std::span<const double> rmse);
/// Smallest budget whose RMSE is within (1 + tau) of the minimum.
int saturation_dimension(std::span<const int> budgets, std::span<const double> rmse, double tau = 0.02);
/// Divides by the curve's own maximum.
std::vector<double> normalize_curve(std::span<const double> rmse);

/// 100, 110, ..., below dim, then dim.
std::vector<int> default_budgets(int dim, int start = 100, int step = 10);

struct BudgetSweep {
  RmseCurve curve;
  std::vector<FeatureRanking> fold_rankings;
  std::vector<std::vector<double>> fold_rmse;  // [fold][budget]
};

/// Per fold: standardize on train, fit full OLS, rank, refit on the top-k
/// train columns per budget and score the validation rows. The full-feature
/// point is appended when the budgets stop short of it.
BudgetSweep feature_budget_sweep(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int> budgets,
                                 std::span<const Fold> folds, double tau = 0.02, const std::string& property = {});

enum class Predictor { Ols, Mlp, Ttt };
std::string_view to_string(Predictor predictor);
Predictor parse_predictor(std::string_view text);

struct SweepInput {
  std::vector<std::string> symbols;  // every sequence element
  std::vector<int> atomic_numbers;
  Eigen::MatrixXd x;                 // one row per symbol
  std::map<std::string, double> known;
};

struct SweepConfig {
  std::vector<double> ratios;
  int repeats = 5;
  std::vector<std::uint64_t> seeds;  // defaults to 0..repeats-1
  MlpConfig mlp{};
  TttConfig ttt{};
  std::size_t concurrency = 1;
};

struct SweepPoint {
  double ratio = 0.0;
  std::vector<double> rmse;  // one per repeat
  double mean = 0.0;
  double ci = 0.0;  // 1.96 * sample std / sqrt(repeats)
};

struct SweepReport {
  Predictor predictor = Predictor::Ols;
  std::vector<SweepPoint> points;
  std::vector<std::string> warnings;
};

/// Mean and 1.96 * sample std / sqrt(n); the half-width is 0 for n < 2.
std::pair<double, double> mean_ci(std::span<const double> values);

/// Test-set RMSE of one predictor on one split.
double split_rmse(Predictor predictor, const SweepInput& input, const SplitSpec& split, const SweepConfig& config,
                  std::uint64_t seed);

SweepReport missing_ratio_sweep(Predictor predictor, const SweepInput& input, const SweepConfig& config);

struct OverlapMatrix {
  std::vector<std::string> names;
  std::size_t k = 0;
  Eigen::MatrixXi counts;
  std::vector<std::size_t> cluster_order;
};

/// Pairwise top-k intersection sizes; rows are clustered by average linkage
/// on k - overlap (ties merge the lowest positions first).
OverlapMatrix overlap_matrix(std::span<const FeatureRanking> rankings, std::size_t k);

/// Leaf order of average-linkage clustering over a symmetric distance matrix.
std::vector<std::size_t> average_linkage_order(const Eigen::MatrixXd& distance);

struct FamilyReport {
  std::string variant;
  std::vector<std::string> symbols;  // elements scored held-out
  Eigen::MatrixXd posteriors;        // one row per symbol
  std::vector<double> entropies;
  KdeCurve kde;
  std::vector<std::string> warnings;
  SoftmaxConfig classifier;
};

/// Per fold: standardize on train, fit the softmax classifier and record the
/// validation posteriors. Folds with fewer than two train classes are
/// skipped with a warning.
FamilyReport classify_families(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                               const std::vector<std::string>& symbols, std::span<const Fold> folds,
                               const std::string& variant, const SoftmaxConfig& config = {});

}  // namespace e2v
