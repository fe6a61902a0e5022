#include <doctest.h>

#include "test_support.hpp"

#include "e2v/dataset.hpp"
#include "e2v/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

using namespace e2v;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const std::set<std::string> kFixture = {"He", "C", "Ar", "Ca", "Br", "Nb", "Sm", "Au"};

std::set<std::string> symbols(std::size_t n) {
  std::set<std::string> s;
  for (std::size_t i = 0; i < n; ++i) s.insert("E" + std::to_string(i));
  return s;
}

}  // namespace

TEST_CASE("vdW fixture table loads exactly") {
  const auto t = load_property_table(test::fixture_dir() / "properties/vdw_radius.csv", kFixture);
  CHECK(t.name == "vdw_radius");
  CHECK(t.units == "\xc3\x85");
  CHECK(t.known_count() == 8);
  const std::map<std::string, double> expected = {{"He", 1.40}, {"C", 1.70}, {"Ca", 2.31}, {"Ar", 1.88},
                                                  {"Br", 1.85}, {"Au", 2.14}, {"Nb", 2.18}, {"Sm", 2.36}};
  for (const auto& [sym, v] : expected) CHECK(t.values.at(sym).value() == v);
}

TEST_CASE("property table edge cases") {
  test::TempDir dir("props");
  write(dir / "two.csv", "symbol,value\nHe,1.40\nC,1.70\nAr,\n");
  const auto two = load_property_table(dir / "two.csv", kFixture);
  CHECK(two.name == "two");
  CHECK(two.known_count() == 2);
  CHECK(two.known_symbols() == std::vector<std::string>{"C", "He"});
  CHECK_FALSE(two.values.at("Ar").has_value());
  CHECK_NOTHROW(two.require_regression_ready());

  write(dir / "xx.csv", "symbol,value\nXx,1.0\n");
  CHECK_THROWS_AS(load_property_table(dir / "xx.csv", kFixture), DataError);
  CHECK(load_property_table(dir / "xx.csv").known_count() == 1);

  write(dir / "blank.csv", "symbol,value\nHe,\nC,\n");
  const auto blank = load_property_table(dir / "blank.csv", kFixture);
  CHECK(blank.known_count() == 0);
  CHECK_THROWS_AS(blank.require_regression_ready(), DataError);

  write(dir / "nan.csv", "symbol,value\nHe,abc\n");
  CHECK_THROWS_AS(load_property_table(dir / "nan.csv"), DataError);
  write(dir / "dup.csv", "symbol,value\nHe,1\nHe,2\n");
  CHECK_THROWS_AS(load_property_table(dir / "dup.csv"), DataError);

  std::filesystem::remove(dir / "xx.csv");
  std::filesystem::remove(dir / "nan.csv");
  std::filesystem::remove(dir / "dup.csv");
  const auto all = load_property_dir(dir.path(), kFixture);
  REQUIRE(all.size() == 2);
  CHECK(all[0].name == "blank");
  CHECK(all[1].name == "two");
  CHECK_THROWS_AS(load_property_dir(dir / "missing"), ConfigError);
}

TEST_CASE("split examples") {
  const auto ten = symbols(10);
  const auto s = make_split(ten, 0.2, 42);
  CHECK(s.test.size() == 2);
  CHECK(s.train.size() == 8);
  CHECK(s.missing_rate == 0.2);

  const auto none = make_split(ten, 0.0, 42);
  CHECK(none.test.empty());
  CHECK(none.train == ten);

  const auto again = make_split(ten, 0.2, 42);
  CHECK(again.test == s.test);
  CHECK(again.train == s.train);
  CHECK(make_split(ten, 0.5, 1).test != make_split(ten, 0.5, 2).test);

  CHECK_THROWS_AS(make_split(ten, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(make_split(ten, -0.1, 0), ConfigError);
  CHECK_THROWS_AS(make_split(symbols(1), 0.0, 0), DataError);
  CHECK_THROWS_AS(make_split(symbols(2), 0.8, 0), DataError);  // rounds to 2 of 2
  CHECK_THROWS_AS(make_split(ten, 0.2, 0, {"E3"}), Error);      // known and unknown overlap

  SplitSpec broken = s;
  broken.missing_rate = 0.25;
  CHECK_THROWS(broken.check_invariants());
  broken = s;
  broken.train.insert(*s.test.begin());
  CHECK_THROWS(broken.check_invariants());
}

TEST_CASE("split invariants under randomized construction") {
  Rng rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(150);
    const double rate = rng.uniform(0.0, 0.95);
    const auto known = symbols(n);
    std::set<std::string> unknown;
    for (std::size_t u = 0; u < rng.uniform_index(5); ++u) unknown.insert("U" + std::to_string(u));
    const auto n_test = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 0.5));
    if (n_test >= n) {
      CHECK_THROWS_AS(make_split(known, rate, trial, unknown), DataError);
      continue;
    }
    const auto s = make_split(known, rate, static_cast<std::uint64_t>(trial), unknown);
    REQUIRE(s.test.size() == n_test);
    REQUIRE(s.train.size() + s.test.size() == n);
    std::vector<std::string> both;
    std::set_intersection(s.train.begin(), s.train.end(), s.test.begin(), s.test.end(), std::back_inserter(both));
    REQUIRE(both.empty());
    std::set<std::string> merged = s.train;
    merged.insert(s.test.begin(), s.test.end());
    REQUIRE(merged == known);
    REQUIRE(s.unknown == unknown);
    REQUIRE(s.missing_rate == static_cast<double>(n_test) / static_cast<double>(n));
  }
}

TEST_CASE("kfold sizes and partition") {
  const auto folds = kfold(96, 10, 0);
  REQUIRE(folds.size() == 10);
  std::vector<std::size_t> sizes;
  std::vector<Eigen::Index> all;
  for (const auto& f : folds) {
    sizes.push_back(f.validation.size());
    CHECK(f.train.size() + f.validation.size() == 96);
    CHECK(std::is_sorted(f.validation.begin(), f.validation.end()));
    CHECK(std::is_sorted(f.train.begin(), f.train.end()));
    all.insert(all.end(), f.validation.begin(), f.validation.end());
  }
  CHECK(std::count(sizes.begin(), sizes.end(), 10) == 6);
  CHECK(std::count(sizes.begin(), sizes.end(), 9) == 4);
  std::sort(all.begin(), all.end());
  std::vector<Eigen::Index> expect(96);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);

  for (const auto& f : kfold(7, 7, 3)) CHECK(f.validation.size() == 1);
  CHECK_THROWS_AS(kfold(3, 4, 0), ConfigError);
  CHECK_THROWS_AS(kfold(3, 1, 0), ConfigError);

  const auto a = kfold(20, 4, 9);
  const auto b = kfold(20, 4, 9);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].validation == b[i].validation);

  const std::vector<std::string> syms = {"He", "C", "Ar", "Ca", "Br"};
  const auto sf = kfold(syms, 5, 0);
  std::set<std::string> seen;
  for (const auto& f : sf) seen.insert(f.validation.begin(), f.validation.end());
  CHECK(seen.size() == 5);
}

TEST_CASE("standardizer examples") {
  Eigen::MatrixXd col(2, 1);
  col << 1, 3;
  const auto s = Standardizer::fit(col);
  CHECK(s.mean()[0] == 2.0);
  CHECK(s.stddev()[0] == 1.0);
  CHECK(s.apply(col)(0, 0) == -1.0);
  CHECK(s.apply(col)(1, 0) == 1.0);

  const Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(3, 1, 5.0);
  const auto f = Standardizer::fit(flat);
  CHECK(f.stddev()[0] == 1.0);
  CHECK(f.apply(flat).isZero(0.0));

  const Eigen::MatrixXd x = test::random_matrix(20, 8, 5) * 3.0 + Eigen::MatrixXd::Constant(20, 8, 7.0);
  const auto z = Standardizer::fit(x).apply(x);
  for (Eigen::Index j = 0; j < 8; ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-9);
    const double var = (z.col(j).array() - z.col(j).mean()).square().mean();
    CHECK(std::abs(var - 1.0) < 1e-9);
  }
  CHECK((Standardizer::fit(x).apply_row(x.row(4).transpose()) - z.row(4).transpose()).norm() < 1e-12);
  CHECK_THROWS_AS(Standardizer::fit(x).apply(Eigen::MatrixXd::Zero(2, 3)), DataError);
}

TEST_CASE("standardizer remembers which rows it was fitted on") {
  const Eigen::MatrixXd x = test::random_matrix(10, 3, 1);
  const std::vector<Eigen::Index> train = {0, 2, 4, 6};
  const std::vector<Eigen::Index> shuffled = {6, 4, 0, 2};
  const auto s = Standardizer::fit(x, train);
  CHECK(s.fitted_on() == subset_id(train));
  CHECK(subset_id(train) == subset_id(shuffled));
  CHECK(subset_id(train) != subset_id(std::vector<Eigen::Index>{0, 2, 4}));
  CHECK((s.mean() - select_rows(x, train).colwise().mean().transpose()).norm() < 1e-12);
  CHECK_THROWS_AS(Standardizer::fit(x, std::vector<Eigen::Index>{}), DataError);

  const std::vector<Eigen::Index> cols = {2, 0};
  const auto sc = select_cols(x, cols);
  CHECK(sc.col(0) == x.col(2));
  CHECK(sc.col(1) == x.col(0));
}
