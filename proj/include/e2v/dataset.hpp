#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace e2v {

/// Identifies the row subset a fitted object was trained on.
using SubsetId = std::uint64_t;

/// Order-insensitive id of a row-index subset.
SubsetId subset_id(std::span<const Eigen::Index> rows);

struct PropertyTable {
  std::string name;
  std::string units;
  std::map<std::string, std::optional<double>> values;

  std::vector<std::string> known_symbols() const;
  std::size_t known_count() const;
  /// Throws DataError when fewer than two values are known.
  void require_regression_ready() const;
};

/// Reads `symbol,value` CSV (blank value = missing) and the optional sibling
/// `<stem>.meta.json` {name, units}. When `allowed_symbols` is non-empty every
/// symbol must belong to it.
PropertyTable load_property_table(const std::filesystem::path& path, const std::set<std::string>& allowed_symbols = {});

/// All `*.csv` tables in a directory, sorted by name.
std::vector<PropertyTable> load_property_dir(const std::filesystem::path& dir,
                                             const std::set<std::string>& allowed_symbols = {});

struct SplitSpec {
  std::set<std::string> known;
  std::set<std::string> unknown;
  std::set<std::string> train;
  std::set<std::string> test;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;

  /// Partition, disjointness and exact missing-rate checks; throws on violation.
  void check_invariants() const;
};

/// Draws round(rate * |known|) test symbols (half-up) without replacement.
SplitSpec make_split(const std::set<std::string>& known, double missing_rate, std::uint64_t seed,
                     const std::set<std::string>& unknown = {});

struct Fold {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};

/// Seeded shuffle of 0..n-1, then k contiguous folds; the first n % k folds
/// carry one extra item. Index lists are returned sorted.
std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed);

struct SymbolFold {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

std::vector<SymbolFold> kfold(const std::vector<std::string>& symbols, std::size_t k, std::uint64_t seed);

/// Per-column z-scoring with population standard deviation. Near-constant
/// columns get std 1.
class Standardizer {
 public:
  static Standardizer fit(const Eigen::MatrixXd& rows, std::span<const Eigen::Index> subset);
  static Standardizer fit(const Eigen::MatrixXd& rows);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& row) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  SubsetId fitted_on() const { return fitted_on_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
  SubsetId fitted_on_ = 0;
};

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows);
Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows);
Eigen::MatrixXd select_cols(const Eigen::MatrixXd& m, std::span<const Eigen::Index> cols);

}  // namespace e2v
