#include <doctest.h>

#include "test_support.hpp"

#include "e2v/error.hpp"
#include "e2v/models.hpp"
#include "e2v/ttt.hpp"

#include <cmath>
#include <numeric>

using namespace e2v;

using Params = AttentionParams<double>;

namespace {

// Scalar loops, no Eigen products.
Eigen::VectorXd oracle_forward(const Eigen::MatrixXd& x, const Params& p) {
  const auto n = x.rows(), d = x.cols(), m = p.model_dim();
  auto project = [&](const Eigen::MatrixXd& w) {
    Eigen::MatrixXd out(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        double s = 0;
        for (Eigen::Index k = 0; k < d; ++k) s += x(i, k) * w(k, j);
        out(i, j) = s;
      }
    return out;
  };
  const auto q = project(p.wq), k = project(p.wk), v = project(p.wv);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> score(static_cast<std::size_t>(n));
    double top = -1e300;
    for (Eigen::Index j = 0; j < n; ++j) {
      double s = 0;
      for (Eigen::Index c = 0; c < m; ++c) s += q(i, c) * k(j, c);
      score[static_cast<std::size_t>(j)] = s / std::sqrt(static_cast<double>(m));
      top = std::max(top, score[static_cast<std::size_t>(j)]);
    }
    double z = 0;
    for (auto& s : score) z += (s = std::exp(s - top));
    double out = p.b;
    for (Eigen::Index c = 0; c < m; ++c) {
      double h = 0;
      for (Eigen::Index j = 0; j < n; ++j) h += score[static_cast<std::size_t>(j)] / z * v(j, c);
      out += h * p.w[c];
    }
    y[i] = out;
  }
  return y;
}

Params random_params(Eigen::Index d, Eigen::Index m, std::uint64_t seed) {
  auto p = Params::init(d, m, seed);
  p.w = test::random_vector(m, seed + 1000);
  p.b = 0.3;
  return p;
}

double masked_loss(const Eigen::MatrixXd& x, const Params& p, const Eigen::VectorXd& y, const std::vector<bool>& mask,
                   Params* grad = nullptr) {
  const auto c = attention_forward(x, p);
  Eigen::VectorXd d;
  const double loss = supervised_mse(c.yhat, y, mask, d);
  if (grad) *grad = attention_backward(x, p, c, d);
  return loss;
}

std::vector<SequenceItem> sequence(const Eigen::MatrixXd& x) {
  std::vector<SequenceItem> items;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    items.push_back({"E" + std::to_string(i), static_cast<int>(i) + 1, x.row(i).transpose()});
  }
  return items;
}

}  // namespace

TEST_CASE("forward basics") {
  Eigen::MatrixXd twin(2, 4);
  twin.row(0) = test::random_vector(4, 1).transpose();
  twin.row(1) = twin.row(0);
  const auto p = random_params(4, 3, 2);
  const auto c = attention_forward(twin, p);
  CHECK(c.yhat[0] == c.yhat[1]);

  const auto x = test::random_matrix(9, 5, 3);
  const auto cx = attention_forward(x, random_params(5, 4, 4));
  for (Eigen::Index i = 0; i < 9; ++i) CHECK(std::abs(cx.attention.row(i).sum() - 1.0) < 1e-9);

  CHECK_THROWS_AS(attention_forward(Eigen::MatrixXd(test::random_matrix(1, 5, 1)), random_params(5, 4, 4)), DataError);
  CHECK_THROWS_AS(attention_forward(x, random_params(6, 4, 4)), DataError);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(attention_forward(bad, random_params(5, 4, 4)), NumericalError);
}

TEST_CASE("forward matches a scalar-loop oracle") {
  const auto x = test::random_matrix(5, 8, 42);
  const auto p = random_params(8, 6, 43);
  CHECK((attention_forward(x, p).yhat - oracle_forward(x, p)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("backward at the origin") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 3);
  const auto p = Params::zeros(3, 2);
  const Eigen::Vector4d y(1, 2, 3, 10);
  const std::vector<bool> mask = {true, true, true, false};
  Params g;
  masked_loss(x, p, y, mask, &g);
  CHECK(g.wq.isZero(0));
  CHECK(g.wk.isZero(0));
  CHECK(g.wv.isZero(0));
  CHECK(g.w.isZero(0));
  CHECK(std::abs(g.b - (-2.0 * 2.0)) < 1e-12);
  Eigen::VectorXd d;
  CHECK_THROWS_AS(supervised_mse(Eigen::VectorXd(Eigen::Vector4d::Zero()), Eigen::VectorXd(y),
                                 std::vector<bool>(4, false), d),
                  DataError);
}

TEST_CASE("backward matches central differences on every block") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    CAPTURE(seed);
    const auto x = test::random_matrix(7, 5, seed);
    const auto y = test::random_vector(7, seed + 10);
    const std::vector<bool> mask = {true, false, true, true, false, true, true};
    const auto p = random_params(5, 4, seed + 20);
    Params g;
    masked_loss(x, p, y, mask, &g);
    Eigen::VectorXd flat = p.flatten();
    Eigen::VectorXd fd(flat.size());
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Params q = p;
      Eigen::VectorXd f = flat;
      f[i] += h;
      q.unflatten(f);
      const double up = masked_loss(x, q, y, mask);
      f[i] -= 2 * h;
      q.unflatten(f);
      fd[i] = (up - masked_loss(x, q, y, mask)) / (2 * h);
    }
    Params gfd = p;
    gfd.unflatten(fd);
    CHECK(test::max_rel_err(g.wq.reshaped(), gfd.wq.reshaped()) < 1e-4);
    CHECK(test::max_rel_err(g.wk.reshaped(), gfd.wk.reshaped()) < 1e-4);
    CHECK(test::max_rel_err(g.wv.reshaped(), gfd.wv.reshaped()) < 1e-4);
    CHECK(test::max_rel_err(g.w, gfd.w) < 1e-4);
    CHECK(test::rel_err(g.b, gfd.b) < 1e-4);
  }
}

TEST_CASE("unsupervised rows shape the gradient but their targets are never read") {
  const auto x = test::random_matrix(6, 4, 7);
  const auto y = test::random_vector(6, 8);
  const std::vector<bool> mask = {true, true, true, false, false, true};
  const auto p = random_params(4, 3, 9);
  Params g;
  const double loss = masked_loss(x, p, y, mask, &g);

  Eigen::VectorXd y2 = y;
  y2[3] = 0.0;
  y2[4] = 1e6;
  Params g2;
  CHECK(masked_loss(x, p, y2, mask, &g2) == loss);
  CHECK(g2.flatten() == g.flatten());

  // duplicate an unsupervised row: same supervised targets, different context
  Eigen::MatrixXd xd(7, 4);
  xd << x, x.row(3);
  Eigen::VectorXd yd(7);
  yd << y, 0.0;
  std::vector<bool> md = mask;
  md.push_back(false);
  Params gd;
  masked_loss(xd, p, yd, md, &gd);
  CHECK((gd.flatten() - g.flatten()).norm() > 0.0);

  // removing an unsupervised row moves supervised outputs
  Eigen::MatrixXd xr(5, 4);
  xr << x.topRows(4), x.row(5);
  const auto full = attention_forward(x, p).yhat;
  const auto less = attention_forward(xr, p).yhat;
  CHECK(std::abs(full[0] - less[0]) > 1e-8);
}

TEST_CASE("forward is permutation equivariant") {
  const auto x = test::random_matrix(8, 5, 11);
  const auto p = random_params(5, 4, 12);
  std::vector<Eigen::Index> perm(8);
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  Rng rng(13);
  rng.shuffle(std::span(perm));
  Eigen::MatrixXd xp(8, 5);
  for (Eigen::Index i = 0; i < 8; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  const auto y = attention_forward(x, p).yhat;
  const auto yp = attention_forward(xp, p).yhat;
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(std::abs(yp[i] - y[perm[static_cast<std::size_t>(i)]]) < 1e-12);
}

TEST_CASE("ttt_impute: constant targets") {
  const auto x = test::random_matrix(12, 6, 21);
  const auto items = sequence(x);
  for (double c : {0.0, 2.5, -40.0}) {
    std::map<std::string, double> known;
    for (int i = 0; i < 8; ++i) known["E" + std::to_string(i)] = c;
    TttConfig cfg;
    cfg.steps = 200;
    const auto r = ttt_impute(items, known, cfg);
    REQUIRE(r.predictions.size() == 12);
    for (int i = 8; i < 12; ++i) CHECK(std::abs(r.predictions.at("E" + std::to_string(i)) - c) <= std::abs(c) * 1e-2 + 1e-3);
  }
}

TEST_CASE("ttt_impute: fits a linear task with nothing missing") {
  const auto x = test::random_matrix(40, 8, 31);
  const auto beta = test::random_vector(8, 32);
  const Eigen::VectorXd y = x * beta;
  std::map<std::string, double> known;
  for (int i = 0; i < 40; ++i) known["E" + std::to_string(i)] = y[i];
  const auto r = ttt_impute(sequence(x), known, {});
  CHECK(r.final_train_rmse < 0.05);
  CHECK(r.steps_run == static_cast<int>(r.loss_trace.size()));
  for (double l : r.loss_trace) REQUIRE(std::isfinite(l));
}

TEST_CASE("ttt_impute: determinism, coverage, order independence") {
  const auto x = test::random_matrix(10, 4, 41);
  const auto y = test::random_vector(10, 42);
  auto items = sequence(x);
  std::map<std::string, double> known;
  for (int i = 0; i < 10; i += 2) known["E" + std::to_string(i)] = y[i];
  TttConfig cfg;
  cfg.steps = 150;
  const auto a = ttt_impute(items, known, cfg);
  const auto b = ttt_impute(items, known, cfg);
  CHECK(a.predictions == b.predictions);
  CHECK(a.loss_trace == b.loss_trace);
  std::set<std::string> keys;
  for (const auto& [k, _] : a.predictions) keys.insert(k);
  CHECK(keys.size() == 10);

  // the sequence is ordered by atomic number, so input order is irrelevant
  std::reverse(items.begin(), items.end());
  CHECK(ttt_impute(items, known, cfg).predictions == a.predictions);

  // relabelling atomic numbers permutes the sequence; outputs follow the symbol
  auto shuffled = sequence(x);
  std::vector<int> z(10);
  std::iota(z.begin(), z.end(), 1);
  Rng rng(5);
  rng.shuffle(std::span(z));
  for (std::size_t i = 0; i < 10; ++i) shuffled[i].atomic_number = z[i];
  const auto c = ttt_impute(shuffled, known, cfg);
  for (const auto& [sym, v] : a.predictions) CHECK(std::abs(c.predictions.at(sym) - v) < 1e-6);
}

TEST_CASE("ttt_impute preconditions") {
  const auto items = sequence(test::random_matrix(5, 3, 1));
  CHECK_THROWS_AS(ttt_impute(items, {{"E0", 1.0}}, {}), DataError);
  CHECK_THROWS_AS(ttt_impute(items, {{"E0", 1.0}, {"Zz", 2.0}}, {}), DataError);
  TttConfig bad;
  bad.model_dim = 1;
  CHECK_THROWS_AS(ttt_impute(items, {{"E0", 1.0}, {"E1", 2.0}}, bad), ConfigError);
  bad = {};
  bad.steps = 0;
  CHECK_THROWS_AS(ttt_impute(items, {{"E0", 1.0}, {"E1", 2.0}}, bad), ConfigError);
}

TEST_CASE("adam step") {
  Adam<double> adam(2, {0.1});
  Eigen::VectorXd p = Eigen::Vector2d(1.0, -1.0);
  adam.step(p, Eigen::Vector2d(4.0, -0.5));
  // first step moves every coordinate by ~step_size against the gradient sign
  CHECK(std::abs(p[0] - 0.9) < 1e-6);
  CHECK(std::abs(p[1] + 0.9) < 1e-6);
  CHECK(adam.steps() == 1);
}
