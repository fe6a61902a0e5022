#include "e2v/dataset.hpp"

#include "e2v/error.hpp"
#include "e2v/io.hpp"
#include "e2v/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>

namespace e2v {

SubsetId subset_id(std::span<const Eigen::Index> rows) {
  std::vector<Eigen::Index> sorted(rows.begin(), rows.end());
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index r : sorted) {
    auto v = static_cast<std::uint64_t>(r);
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  }
  return h ^ sorted.size();
}

std::vector<std::string> PropertyTable::known_symbols() const {
  std::vector<std::string> out;
  for (const auto& [symbol, value] : values) {
    if (value) out.push_back(symbol);
  }
  return out;
}

std::size_t PropertyTable::known_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](const auto& kv) { return kv.second.has_value(); }));
}

void PropertyTable::require_regression_ready() const {
  if (known_count() < 2) throw DataError("property " + name + " has fewer than 2 known values");
}

PropertyTable load_property_table(const std::filesystem::path& path, const std::set<std::string>& allowed_symbols) {
  const auto rows = io::parse_csv(io::read_file(path));
  if (rows.empty() || rows.front() != io::CsvRow{"symbol", "value"}) {
    throw DataError(path.string() + ": header must be symbol,value");
  }
  PropertyTable table;
  table.name = path.stem().string();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = path.string() + " row " + std::to_string(r + 1);
    if (row.empty() || row.size() > 2) throw DataError(where + ": expected symbol,value");
    const std::string& symbol = row[0];
    if (!allowed_symbols.empty() && !allowed_symbols.contains(symbol)) {
      throw DataError(where + ": symbol '" + symbol + "' is not in the manifest");
    }
    if (table.values.contains(symbol)) throw DataError(where + ": duplicate symbol " + symbol);
    std::string raw = row.size() == 2 ? row[1] : "";
    raw.erase(0, raw.find_first_not_of(" \t"));
    raw.erase(raw.find_last_not_of(" \t") + 1);
    if (raw.empty()) {
      table.values[symbol] = std::nullopt;
      continue;
    }
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(raw.c_str(), &end);
    if (end != raw.c_str() + raw.size() || errno == ERANGE || !std::isfinite(v)) {
      throw DataError(where + ": value '" + raw + "' is not a finite number");
    }
    table.values[symbol] = v;
  }
  auto meta_path = path;
  meta_path.replace_extension(".meta.json");
  if (std::filesystem::exists(meta_path)) {
    const auto meta = nlohmann::json::parse(io::read_file(meta_path), nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) throw DataError(meta_path.string() + ": invalid JSON");
    table.name = meta.value("name", table.name);
    table.units = meta.value("units", std::string{});
  }
  return table;
}

std::vector<PropertyTable> load_property_dir(const std::filesystem::path& dir,
                                             const std::set<std::string>& allowed_symbols) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("properties directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<PropertyTable> tables;
  for (const auto& f : files) tables.push_back(load_property_table(f, allowed_symbols));
  return tables;
}

void SplitSpec::check_invariants() const {
  for (const auto& s : known) {
    if (unknown.contains(s)) throw Error("split: " + s + " is both known and unknown");
    if (train.contains(s) == test.contains(s)) throw Error("split: " + s + " must be in exactly one of train/test");
  }
  if (train.size() + test.size() != known.size()) throw Error("split: train/test do not cover the known set");
  if (known.empty() || missing_rate != static_cast<double>(test.size()) / static_cast<double>(known.size())) {
    throw Error("split: missing rate is not |test|/|known|");
  }
}

SplitSpec make_split(const std::set<std::string>& known, double missing_rate, std::uint64_t seed,
                     const std::set<std::string>& unknown) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw ConfigError("missing rate must lie in [0, 1)");
  if (known.size() < 2) throw DataError("a split needs at least 2 known elements");
  const auto n = known.size();
  const auto n_test = static_cast<std::size_t>(std::floor(missing_rate * static_cast<double>(n) + 0.5));
  if (n - n_test < 1) throw DataError("missing rate leaves no training elements");

  std::vector<std::string> order(known.begin(), known.end());
  Rng rng(seed);
  rng.shuffle(std::span(order));

  SplitSpec split;
  split.known = known;
  split.unknown = unknown;
  split.test.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  split.train.insert(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  split.missing_rate = static_cast<double>(n_test) / static_cast<double>(n);
  split.seed = seed;
  split.check_invariants();
  return split;
}

std::vector<Fold> kfold(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (k > n) throw ConfigError("k-fold with k=" + std::to_string(k) + " exceeds " + std::to_string(n) + " items");
  std::vector<Eigen::Index> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);
  Rng rng(seed);
  rng.shuffle(std::span(order));

  std::vector<Fold> folds(k);
  std::size_t begin = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    auto& fold = folds[f];
    for (std::size_t i = 0; i < n; ++i) {
      (i >= begin && i < begin + size ? fold.validation : fold.train).push_back(order[i]);
    }
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.train.begin(), fold.train.end());
    begin += size;
  }
  return folds;
}

std::vector<SymbolFold> kfold(const std::vector<std::string>& symbols, std::size_t k, std::uint64_t seed) {
  std::vector<SymbolFold> out;
  for (const auto& f : kfold(symbols.size(), k, seed)) {
    SymbolFold sf;
    for (auto i : f.train) sf.train.push_back(symbols[static_cast<std::size_t>(i)]);
    for (auto i : f.validation) sf.validation.push_back(symbols[static_cast<std::size_t>(i)]);
    out.push_back(std::move(sf));
  }
  return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows, std::span<const Eigen::Index> subset) {
  if (subset.empty()) throw DataError("standardizer needs a non-empty subset");
  const Eigen::MatrixXd sub = select_rows(rows, subset);
  Standardizer s;
  s.mean_ = sub.colwise().mean().transpose();
  s.stddev_.resize(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (sub.col(j).array() - s.mean_[j]).square().mean();
    const double sd = std::sqrt(var);
    s.stddev_[j] = sd <= 1e-12 * std::max(1.0, std::abs(s.mean_[j])) ? 1.0 : sd;
  }
  s.fitted_on_ = subset_id(subset);
  return s;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(rows.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
  return fit(rows, all);
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
  if (rows.cols() != mean_.size()) throw DataError("standardizer dim mismatch");
  return (rows.rowwise() - mean_.transpose()).array().rowwise() / stddev_.transpose().array();
}

Eigen::VectorXd Standardizer::apply_row(const Eigen::VectorXd& row) const {
  if (row.size() != mean_.size()) throw DataError("standardizer dim mismatch");
  return (row - mean_).cwiseQuotient(stddev_);
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, std::span<const Eigen::Index> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd select_rows(const Eigen::VectorXd& v, std::span<const Eigen::Index> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& m, std::span<const Eigen::Index> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

}  // namespace e2v
