#include "e2v/analysis.hpp"

#include "e2v/io.hpp"
#include "e2v/parallel.hpp"
#include "e2v/random.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

namespace e2v {

namespace {

double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

// ---- entropy / kde -------------------------------------------------------

double kde_density(std::span<const double> values, double bandwidth, double at) {
  const double norm = 1.0 / (static_cast<double>(values.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  double sum = 0.0;
  for (double v : values) {
    const double u = (at - v) / bandwidth;
    sum += std::exp(-0.5 * u * u);
  }
  return sum * norm;
}

KdeCurve kde(std::span<const double> values, int points) {
  if (values.size() < 2) throw DataError("kde needs at least 2 values");
  if (points < 2) throw ConfigError("kde grid needs at least 2 points");
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError("kde: non-finite value");
  }
  KdeCurve c;
  c.bandwidth = std::max(1e-3, 1.06 * sample_stddev(values) * std::pow(static_cast<double>(values.size()), -0.2));
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it - 3.0 * c.bandwidth;
  const double hi = *hi_it + 3.0 * c.bandwidth;
  c.grid.resize(static_cast<std::size_t>(points));
  c.density.resize(c.grid.size());
  for (int i = 0; i < points; ++i) {
    const double x = lo + (hi - lo) * i / (points - 1);
    c.grid[static_cast<std::size_t>(i)] = x;
    c.density[static_cast<std::size_t>(i)] = kde_density(values, c.bandwidth, x);
  }
  return c;
}

double trapezoid(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("trapezoid: length mismatch");
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return area;
}

// ---- t-SNE ---------------------------------------------------------------

namespace {

Eigen::MatrixXd pairwise_sq_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = (x.row(i) - x.row(j)).squaredNorm();
    }
  }
  return d;
}

// Row i of p_{j|i} at precision beta; returns the entropy in nats.
double affinity_row(const Eigen::MatrixXd& d, Eigen::Index i, double beta, double d_min, Eigen::RowVectorXd& row) {
  const Eigen::Index n = d.rows();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    row[j] = j == i ? 0.0 : std::exp(-beta * (d(i, j) - d_min));
    sum += row[j];
  }
  double h = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) continue;
    row[j] /= sum;
    if (row[j] > 0.0) h -= row[j] * std::log(row[j]);
  }
  return h;
}

}  // namespace

Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& x, double perplexity) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd d = pairwise_sq_distances(x);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::RowVectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    double d_max = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      d_min = std::min(d_min, d(i, j));
      d_max = std::max(d_max, d(i, j));
    }
    if (d_max - d_min <= 1e-12 * std::max(1.0, d_max)) {
      p.row(i).setConstant(1.0 / static_cast<double>(n - 1));
      p(i, i) = 0.0;
      continue;
    }
    double beta = 1.0 / std::max(1e-12, d_max - d_min);
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double best_gap = std::numeric_limits<double>::infinity();
    Eigen::RowVectorXd best = row;
    for (int it = 0; it < 200; ++it) {
      const double h = affinity_row(d, i, beta, d_min, row);
      const double gap = std::exp(h) - perplexity;
      if (std::abs(gap) < best_gap) {
        best_gap = std::abs(gap);
        best = row;
      }
      if (std::abs(gap) < 1e-4) break;
      if (gap > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = best;
  }
  return p;
}

Projection2D tsne(const Eigen::MatrixXd& x, const TsneConfig& config) {
  const Eigen::Index n = x.rows();
  if (n < 5) throw DataError("t-SNE needs at least 5 points");
  if (!(config.perplexity > 0.0) || config.perplexity >= static_cast<double>(n - 1) / 3.0) {
    throw ConfigError("t-SNE perplexity must be positive and below (n - 1) / 3 = " +
                      std::to_string(static_cast<double>(n - 1) / 3.0));
  }
  if (config.iterations < 1) throw ConfigError("t-SNE needs at least one iteration");
  if (!x.allFinite()) throw NumericalError("t-SNE: non-finite input");

  const Eigen::MatrixXd cond = conditional_affinities(x, config.perplexity);
  Eigen::MatrixXd p = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  Projection2D out;
  out.settings = config;
  Rng rng(config.seed);
  Eigen::MatrixXd y = Eigen::MatrixXd::NullaryExpr(n, 2, [&] { return config.init_scale * rng.normal(); });
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);
  out.kl_trace.reserve(static_cast<std::size_t>(config.iterations));

  auto student = [&] {
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        num(i, j) = num(j, i) = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        z += 2.0 * num(i, j);
      }
    }
    return z;
  };

  for (int iter = 0; iter < config.iterations; ++iter) {
    const double exag = iter < config.exaggeration_steps ? config.exaggeration : 1.0;
    const double momentum = iter < config.momentum_switch ? config.momentum : config.final_momentum;
    const double z = student();
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double mult = (exag * p(i, j) - num(i, j) / z) * num(i, j);
        grad.row(i) += 4.0 * mult * (y.row(i) - y.row(j));
      }
    }
    // adaptive gains only while exaggerating; plain momentum afterwards
    if (iter == config.exaggeration_steps) gains.setOnes();
    for (Eigen::Index k = 0; iter < config.exaggeration_steps && k < grad.size(); ++k) {
      double& g = gains.data()[k];
      g = (grad.data()[k] > 0.0) != (update.data()[k] > 0.0) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
    }
    update = momentum * update - config.step_size * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean();

    const double z_new = student();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        kl += p(i, j) * std::log(p(i, j) / std::max(num(i, j) / z_new, 1e-300));
      }
    }
    if (!std::isfinite(kl) || !y.allFinite()) {
      throw NumericalError("t-SNE diverged at iteration " + std::to_string(iter + 1));
    }
    out.kl_trace.push_back(kl);
  }
  out.coords = y;
  return out;
}

// ---- budget curves -------------------------------------------------------

double best_tail_average(std::span<const double> rmse) {
  if (rmse.empty()) throw DataError("best_tail_average: empty curve");
  const auto best = std::min_element(rmse.begin(), rmse.end());
  return std::accumulate(best, rmse.end(), 0.0) / static_cast<double>(rmse.end() - best);
}

int saturation_dimension(std::span<const int> budgets, std::span<const double> rmse, double tau) {
  if (rmse.empty()) throw DataError("saturation_dimension: empty curve");
  if (budgets.size() != rmse.size()) throw DataError("saturation_dimension: length mismatch");
  const double threshold = (1.0 + tau) * *std::min_element(rmse.begin(), rmse.end());
  for (std::size_t i = 0; i < rmse.size(); ++i) {
    if (rmse[i] <= threshold) return budgets[i];
  }
  return budgets.back();
}

std::vector<double> normalize_curve(std::span<const double> rmse) {
  if (rmse.empty()) return {};
  const double peak = *std::max_element(rmse.begin(), rmse.end());
  if (!(peak > 0.0)) throw NumericalError("normalize_curve: maximum is not positive");
  std::vector<double> out(rmse.begin(), rmse.end());
  for (double& v : out) v /= peak;
  return out;
}

std::vector<int> default_budgets(int dim, int start, int step) {
  std::vector<int> b;
  for (int k = start; k < dim; k += step) b.push_back(k);
  b.push_back(dim);
  return b;
}

BudgetSweep feature_budget_sweep(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<int> budgets,
                                 std::span<const Fold> folds, double tau, const std::string& property) {
  const int d = static_cast<int>(x.cols());
  if (x.rows() != y.size()) throw DataError("budget sweep: row count mismatch");
  if (folds.empty()) throw ConfigError("budget sweep needs at least one fold");
  if (!std::is_sorted(budgets.begin(), budgets.end()) ||
      std::adjacent_find(budgets.begin(), budgets.end()) != budgets.end()) {
    throw ConfigError("budgets must be strictly ascending");
  }
  for (int b : budgets) {
    if (b < 1) throw ConfigError("budgets must be positive");
    if (b > d) throw ConfigError("budget " + std::to_string(b) + " exceeds dimension " + std::to_string(d));
  }
  if (budgets.empty() || budgets.back() != d) budgets.push_back(d);

  BudgetSweep out;
  out.fold_rankings.resize(folds.size());
  out.fold_rmse.assign(folds.size(), std::vector<double>(budgets.size(), 0.0));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const Fold& fold = folds[f];
    const SubsetId train_id = subset_id(fold.train);
    const auto scaler = Standardizer::fit(x, fold.train);
    if (scaler.fitted_on() != train_id) throw Error("standardizer fitted outside the train fold", 1);
    const Eigen::MatrixXd z = scaler.apply(x);
    const Eigen::MatrixXd z_train = select_rows(z, fold.train);
    const Eigen::MatrixXd z_val = select_rows(z, fold.validation);
    const Eigen::VectorXd y_train = select_rows(y, fold.train);
    const Eigen::VectorXd y_val = select_rows(y, fold.validation);

    const LinearModel full = fit_linear(z_train, y_train, train_id);
    out.fold_rankings[f] = rank_features(full, property);
    if (out.fold_rankings[f].fitted_on != train_id) throw Error("ranking fitted outside the train fold", 1);

    for (std::size_t b = 0; b < budgets.size(); ++b) {
      auto cols = out.fold_rankings[f].top(static_cast<std::size_t>(budgets[b]));
      std::sort(cols.begin(), cols.end());
      const LinearModel m = fit_linear(select_cols(z_train, cols), y_train, train_id);
      out.fold_rmse[f][b] = rmse(y_val, m.predict(select_cols(z_val, cols)));
    }
  }

  out.curve.budgets = budgets;
  out.curve.tau = tau;
  out.curve.rmse.assign(budgets.size(), 0.0);
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    for (const auto& fr : out.fold_rmse) out.curve.rmse[b] += fr[b];
    out.curve.rmse[b] /= static_cast<double>(folds.size());
  }
  out.curve.best_tail_average = best_tail_average(out.curve.rmse);
  out.curve.saturation_dim = saturation_dimension(out.curve.budgets, out.curve.rmse, tau);
  return out;
}

// ---- missing-ratio sweep -------------------------------------------------

std::string_view to_string(Predictor predictor) {
  switch (predictor) {
    case Predictor::Ols: return "ols";
    case Predictor::Mlp: return "mlp";
    case Predictor::Ttt: return "ttt";
  }
  return "?";
}

Predictor parse_predictor(std::string_view text) {
  if (text == "ols") return Predictor::Ols;
  if (text == "mlp") return Predictor::Mlp;
  if (text == "ttt") return Predictor::Ttt;
  throw ConfigError("unknown predictor '" + std::string(text) + "' (expected ols, mlp or ttt)");
}

std::pair<double, double> mean_ci(std::span<const double> values) {
  if (values.empty()) throw DataError("mean_ci: no values");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  return {mean, 1.96 * sample_stddev(values) / std::sqrt(static_cast<double>(values.size()))};
}

double split_rmse(Predictor predictor, const SweepInput& input, const SplitSpec& split, const SweepConfig& config,
                  std::uint64_t seed) {
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < input.symbols.size(); ++i) row_of[input.symbols[i]] = static_cast<Eigen::Index>(i);
  auto rows_for = [&](const std::set<std::string>& syms) {
    std::vector<Eigen::Index> rows;
    for (const auto& s : syms) {
      const auto it = row_of.find(s);
      if (it == row_of.end()) throw DataError("no embedding for " + s);
      rows.push_back(it->second);
    }
    return rows;
  };
  auto targets_for = [&](const std::set<std::string>& syms) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(syms.size()));
    Eigen::Index i = 0;
    for (const auto& s : syms) t[i++] = input.known.at(s);
    return t;
  };
  const auto train_rows = rows_for(split.train);
  const auto test_rows = rows_for(split.test);
  const Eigen::VectorXd y_train = targets_for(split.train);
  const Eigen::VectorXd y_test = targets_for(split.test);

  switch (predictor) {
    case Predictor::Ols: {
      const LinearModel m = fit_linear(select_rows(input.x, train_rows), y_train, subset_id(train_rows));
      return rmse(y_test, m.predict(select_rows(input.x, test_rows)));
    }
    case Predictor::Mlp: {
      const auto scaler = Standardizer::fit(input.x, train_rows);
      const Eigen::MatrixXd z = scaler.apply(input.x);
      MlpConfig mc = config.mlp;
      mc.seed = seed;
      if (train_rows.size() < 5) throw DataError("MLP needs at least 5 training elements");
      const MlpModel m = fit_mlp(select_rows(z, train_rows), y_train, mc);
      return rmse(y_test, m.predict(select_rows(z, test_rows)));
    }
    case Predictor::Ttt: {
      std::vector<SequenceItem> items;
      items.reserve(input.symbols.size());
      for (std::size_t i = 0; i < input.symbols.size(); ++i) {
        items.push_back({input.symbols[i], input.atomic_numbers[i], input.x.row(static_cast<Eigen::Index>(i)).transpose()});
      }
      std::map<std::string, double> known;
      for (const auto& s : split.train) known[s] = input.known.at(s);
      TttConfig tc = config.ttt;
      tc.seed = seed;
      const TttResult r = ttt_impute(items, known, tc);
      Eigen::VectorXd pred(y_test.size());
      Eigen::Index i = 0;
      for (const auto& s : split.test) pred[i++] = r.predictions.at(s);
      return rmse(y_test, pred);
    }
  }
  throw ConfigError("unknown predictor");
}

SweepReport missing_ratio_sweep(Predictor predictor, const SweepInput& input, const SweepConfig& config) {
  if (input.symbols.size() != static_cast<std::size_t>(input.x.rows()) ||
      input.atomic_numbers.size() != input.symbols.size()) {
    throw DataError("sweep input: symbols, atomic numbers and rows disagree");
  }
  if (input.known.size() < 5) throw DataError("sweep needs at least 5 known values");
  if (config.repeats < 1) throw ConfigError("sweep needs at least one repeat");
  if (config.ratios.empty()) throw ConfigError("sweep needs at least one ratio");
  for (double r : config.ratios) {
    if (!(r > 0.0 && r <= 0.9)) throw ConfigError("missing ratios must lie in (0, 0.9]; got " + std::to_string(r));
  }
  std::vector<std::uint64_t> seeds = config.seeds;
  if (seeds.empty()) {
    for (int i = 0; i < config.repeats; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (seeds.size() != static_cast<std::size_t>(config.repeats)) throw ConfigError("seed count must equal repeats");

  std::set<std::string> known;
  std::set<std::string> unknown;
  for (const auto& [s, v] : input.known) known.insert(s);
  for (const auto& s : input.symbols) {
    if (!known.contains(s)) unknown.insert(s);
  }

  SweepReport report;
  report.predictor = predictor;
  std::vector<double> usable;
  for (double r : config.ratios) {
    const auto n_test = static_cast<std::size_t>(std::floor(r * static_cast<double>(known.size()) + 0.5));
    const std::size_t n_train = known.size() - std::min(n_test, known.size());
    const std::size_t needed = predictor == Predictor::Mlp ? 5 : 2;
    if (n_train < needed || n_test == 0) {
      report.warnings.push_back("ratio " + io::format_double(r) + " skipped: " + std::to_string(n_train) +
                                " training and " + std::to_string(n_test) + " test elements");
      continue;
    }
    usable.push_back(r);
  }

  const std::size_t jobs = usable.size() * seeds.size();
  std::vector<double> results(jobs, 0.0);
  parallel_for(jobs, config.concurrency, [&](std::size_t j) {
    const double ratio = usable[j / seeds.size()];
    const std::uint64_t seed = seeds[j % seeds.size()];
    const SplitSpec split = make_split(known, ratio, seed, unknown);
    results[j] = split_rmse(predictor, input, split, config, seed);
  });

  for (std::size_t r = 0; r < usable.size(); ++r) {
    SweepPoint pt;
    pt.ratio = usable[r];
    pt.rmse.assign(results.begin() + static_cast<std::ptrdiff_t>(r * seeds.size()),
                   results.begin() + static_cast<std::ptrdiff_t>((r + 1) * seeds.size()));
    std::tie(pt.mean, pt.ci) = mean_ci(pt.rmse);
    report.points.push_back(std::move(pt));
  }
  return report;
}

// ---- overlap -------------------------------------------------------------

std::vector<std::size_t> average_linkage_order(const Eigen::MatrixXd& distance) {
  const auto n = static_cast<std::size_t>(distance.rows());
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  while (clusters.size() > 1) {
    std::size_t best_a = 0;
    std::size_t best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double sum = 0.0;
        for (auto i : clusters[a]) {
          for (auto j : clusters[b]) sum += distance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        const double avg = sum / static_cast<double>(clusters[a].size() * clusters[b].size());
        if (avg < best) {
          best = avg;
          best_a = a;
          best_b = b;
        }
      }
    }
    clusters[best_a].insert(clusters[best_a].end(), clusters[best_b].begin(), clusters[best_b].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(best_b));
  }
  return n == 0 ? std::vector<std::size_t>{} : clusters.front();
}

OverlapMatrix overlap_matrix(std::span<const FeatureRanking> rankings, std::size_t k) {
  if (rankings.empty()) throw DataError("overlap matrix needs at least one ranking");
  const std::size_t dim = rankings.front().order.size();
  std::vector<std::vector<bool>> member(rankings.size(), std::vector<bool>(dim, false));
  OverlapMatrix out;
  out.k = k;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (rankings[i].order.size() != dim) throw DataError("rankings cover different dimensions");
    if (k > dim) throw DataError("k exceeds the ranked dimension count");
    for (auto c : rankings[i].top(k)) member[i][static_cast<std::size_t>(c)] = true;
    out.names.push_back(rankings[i].property);
  }
  const auto m = static_cast<Eigen::Index>(rankings.size());
  out.counts = Eigen::MatrixXi::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      int c = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        c += member[static_cast<std::size_t>(i)][d] && member[static_cast<std::size_t>(j)][d];
      }
      out.counts(i, j) = out.counts(j, i) = c;
    }
  }
  const Eigen::MatrixXd distance = (static_cast<double>(k) - out.counts.cast<double>().array()).matrix();
  out.cluster_order = average_linkage_order(distance);
  return out;
}

// ---- family classification -----------------------------------------------

FamilyReport classify_families(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                               const std::vector<std::string>& symbols, std::span<const Fold> folds,
                               const std::string& variant, const SoftmaxConfig& config) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n || symbols.size() != n) throw DataError("classify_families: input sizes disagree");
  for (int l : labels) {
    if (l < 0 || l >= config.classes) throw DataError("family label out of range");
  }
  std::vector<int> seen(n, 0);
  for (const auto& f : folds) {
    for (auto i : f.validation) ++seen.at(static_cast<std::size_t>(i));
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw DataError("folds must partition the elements");
  }

  FamilyReport report;
  report.variant = variant;
  report.classifier = config;
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(x.rows(), config.classes);
  std::vector<bool> scored(n, false);
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    const Fold& f = folds[fi];
    std::set<int> classes;
    std::vector<int> train_labels;
    for (auto i : f.train) {
      classes.insert(labels[static_cast<std::size_t>(i)]);
      train_labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    if (classes.size() < 2) {
      report.warnings.push_back("fold " + std::to_string(fi) + " skipped: fewer than 2 classes in train");
      continue;
    }
    const auto scaler = Standardizer::fit(x, f.train);
    const Eigen::MatrixXd z = scaler.apply(x);
    const SoftmaxClassifier clf = fit_softmax(select_rows(z, f.train), train_labels, config);
    const Eigen::MatrixXd p = clf.predict_proba(select_rows(z, f.validation));
    for (std::size_t r = 0; r < f.validation.size(); ++r) {
      post.row(f.validation[r]) = p.row(static_cast<Eigen::Index>(r));
      scored[static_cast<std::size_t>(f.validation[r])] = true;
    }
  }

  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (!scored[i]) continue;
    rows.push_back(static_cast<Eigen::Index>(i));
    report.symbols.push_back(symbols[i]);
  }
  report.posteriors = select_rows(post, rows);
  for (Eigen::Index r = 0; r < report.posteriors.rows(); ++r) {
    report.entropies.push_back(entropy(report.posteriors.row(r)));
  }
  if (report.entropies.size() >= 2) report.kde = kde(report.entropies);
  return report;
}

}  // namespace e2v
