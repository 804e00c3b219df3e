#include <algorithm>
#include <cmath>
#include <numeric>

#include "cmr/error.hpp"
#include "cmr/rng.hpp"
#include "cmr/selection.hpp"
#include "doctest.h"
#include "selection_support.hpp"

using namespace cmr;
using cmr::testing::random_matrix;

namespace {

double soft(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

Eigen::VectorXd pm_labels(const Eigen::VectorXd& score) {
  Eigen::VectorXd b(score.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = score[i] > 0 ? 1.0 : -1.0;
  return b;
}

}  // namespace

TEST_CASE("lasso on orthonormal centered designs matches soft-thresholding") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto Q = cmr::testing::centered_orthonormal(rng, 40, 10);
    Eigen::VectorXd y(40);
    for (auto& v : y) v = 3.0 * rng.normal() + 1.5;
    const Eigen::VectorXd ols = Q.transpose() * y;
    const double lambda = rng.uniform(0.0, 2.0 * ols.cwiseAbs().maxCoeff());
    const auto fit = lasso_fit(Q, y, lambda);
    CHECK(fit.converged);
    for (int j = 0; j < 10; ++j) CHECK(std::abs(fit.beta[j] - soft(ols[j], lambda / 2)) < 1e-6);
    CHECK(fit.intercept == doctest::Approx(y.mean()));
  }
}

TEST_CASE("lasso at lambda zero solves the normal equations") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto X = random_matrix(rng, 40, 10);
    Eigen::VectorXd y = X * Eigen::VectorXd::Random(10) + 0.1 * random_matrix(rng, 40, 1).col(0);
    Eigen::MatrixXd A(40, 11);
    A << X, Eigen::VectorXd::Ones(40);
    const Eigen::VectorXd ls = (A.transpose() * A).ldlt().solve(A.transpose() * y);
    const auto fit = lasso_fit(X, y, 0.0);
    CHECK((fit.beta - ls.head(10)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(fit.intercept - ls[10]) < 1e-6);
  }
}

TEST_CASE("lasso lambda_max gives an exactly zero solution") {
  Rng rng(9);
  const auto X = random_matrix(rng, 30, 6);
  const Eigen::VectorXd y = X.col(2) * 2.0 + random_matrix(rng, 30, 1).col(0);
  const double lmax = lasso_lambda_max(X, y);
  CHECK(lasso_fit(X, y, lmax).beta.isZero(0.0));
  CHECK(lasso_fit(X, y, 10 * lmax).beta.isZero(0.0));
  CHECK_FALSE(lasso_fit(X, y, 0.9 * lmax).beta.isZero(0.0));
}

TEST_CASE("lasso subgradient conditions hold on general problems") {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 20 + static_cast<int>(rng.below(40)), p = 2 + static_cast<int>(rng.below(15));
    const auto X = random_matrix(rng, n, p);
    Eigen::VectorXd y = X * Eigen::VectorXd::Random(p) + random_matrix(rng, n, 1).col(0);
    const double lambda = rng.uniform(0.01, 1.0) * lasso_lambda_max(X, y);
    const auto fit = lasso_fit(X, y, lambda);
    REQUIRE(fit.converged);
    const Eigen::VectorXd r = y - X * fit.beta - Eigen::VectorXd::Constant(n, fit.intercept);
    CHECK(std::abs(r.sum()) < 1e-8);
    for (int j = 0; j < p; ++j) {
      const double g = 2.0 * X.col(j).dot(r);
      if (fit.beta[j] == 0.0) {
        CHECK(std::abs(g) <= lambda + 1e-6);
      } else {
        CHECK(std::abs(g - lambda * (fit.beta[j] > 0 ? 1.0 : -1.0)) <= 1e-6);
      }
    }
    CHECK(lasso_objective(X, y, fit.beta, fit.intercept, lambda) <=
          lasso_objective(X, y, Eigen::VectorXd::Zero(p), y.mean(), lambda) + 1e-12);
  }
}

TEST_CASE("lasso objective decreases along sweeps") {
  Rng rng(11);
  const auto X = random_matrix(rng, 30, 8);
  const Eigen::VectorXd y = X * Eigen::VectorXd::Random(8) + random_matrix(rng, 30, 1).col(0);
  const double lambda = 0.1 * lasso_lambda_max(X, y);
  double prev = INFINITY;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(8);
  for (int s = 0; s < 30; ++s) {
    const auto step = lasso_fit(X, y, lambda, {0.0, 1}, &beta);
    beta = step.beta;
    const double obj = lasso_objective(X, y, step.beta, step.intercept, lambda);
    CHECK(obj <= prev + 1e-10);
    prev = obj;
  }
}

TEST_CASE("lasso rejects bad input") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(4, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Ones(4);
  X(1, 1) = NAN;
  CHECK_THROWS_AS(lasso_fit(X, y, 1.0), DataError);
  CHECK_THROWS_AS(lasso_fit(Eigen::MatrixXd::Ones(4, 2), y, -1.0), UsageError);
  CHECK_THROWS_AS(lasso_fit(Eigen::MatrixXd::Ones(3, 2), y, 1.0), DataError);
}

TEST_CASE("logistic smooth gradient matches central differences") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto X = random_matrix(rng, 25, 5);
    const Eigen::VectorXd b = pm_labels(random_matrix(rng, 25, 1).col(0));
    Eigen::VectorXd w(5);
    for (auto& v : w) v = rng.normal();
    const double v0 = rng.normal();
    const auto g = logistic_smooth_gradient(X, b, w, v0);
    const double h = 1e-6;
    for (int j = 0; j <= 5; ++j) {
      Eigen::VectorXd wp = w, wm = w;
      double vp = v0, vm = v0;
      if (j < 5) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        vp += h;
        vm -= h;
      }
      const double fd = (logistic_smooth_loss(X, b, wp, vp) - logistic_smooth_loss(X, b, wm, vm)) / (2 * h);
      CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(std::abs(fd), 1e-3));
    }
  }
}

TEST_CASE("l1 logistic objective is monotone and large lambda gives the prior intercept") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto X = random_matrix(rng, 40, 6);
    const Eigen::VectorXd b = pm_labels(X.col(0) + 0.8 * random_matrix(rng, 40, 1).col(0));
    std::vector<double> trace;
    const double lambda = rng.uniform(0.001, 0.05);
    const auto fit = l1_logistic_fit(X, b, lambda, {}, {}, nullptr, &trace);
    CHECK(fit.converged);
    REQUIRE(trace.size() >= 2);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    CHECK(trace.back() == doctest::Approx(l1_logistic_objective(X, b, fit.w, fit.v, lambda)));

    const double n_pos = static_cast<double>((b.array() > 0).count());
    const auto big = l1_logistic_fit(X, b, 2.0 * logistic_lambda_max(X, b));
    CHECK(big.w.isZero(0.0));
    CHECK(std::abs(big.v - std::log(n_pos / (40 - n_pos))) < 1e-4);
  }
}

TEST_CASE("l1 logistic sign symmetry, separable data and degenerate labels") {
  Rng rng(14);
  const auto X = random_matrix(rng, 30, 4);
  const Eigen::VectorXd b = pm_labels(X.col(1) - X.col(3) + 0.5 * random_matrix(rng, 30, 1).col(0));
  const auto a = l1_logistic_fit(X, b, 0.02);
  const auto neg = l1_logistic_fit(X, -b, 0.02);
  CHECK((a.w + neg.w).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(std::abs(a.v + neg.v) < 1e-5);

  // Two separated clusters in the plane.
  Eigen::MatrixXd S(40, 2);
  Eigen::VectorXd sb(40);
  for (int i = 0; i < 40; ++i) {
    const double side = i < 20 ? 1.0 : -1.0;
    S(i, 0) = side * rng.uniform(0.5, 2.0);
    S(i, 1) = rng.uniform(-1.0, 1.0);
    sb[i] = side;
  }
  const auto sep = l1_logistic_fit(S, sb, 1e-3);
  const Eigen::VectorXd margin = (S * sep.w).array() + sep.v;
  CHECK((margin.array() * sb.array() > 0).all());

  const auto deg = l1_logistic_fit(X, Eigen::VectorXd::Ones(30), 0.1);
  CHECK(deg.degenerate);
  CHECK(deg.w.isZero(0.0));
  CHECK(deg.v == 30.0);
  CHECK(l1_logistic_fit(X, -Eigen::VectorXd::Ones(30), 0.1).v == -30.0);
  CHECK_THROWS_AS(l1_logistic_fit(X, Eigen::VectorXd::Zero(30), 0.1), DataError);
}

TEST_CASE("randomized logistic degenerate resampling and determinism") {
  Rng rng(15);
  const auto X = random_matrix(rng, 50, 8);
  const Eigen::VectorXd b = pm_labels(X.col(0) + X.col(5) + 0.5 * random_matrix(rng, 50, 1).col(0));
  const double lambda = 0.05;
  const auto plain = l1_logistic_fit(X, b, lambda);
  const auto f = randomized_logistic(X, b, {lambda}, {1, 1.0, 1.0, 3});
  for (int j = 0; j < 8; ++j) CHECK(f[j] == (std::abs(plain.w[j]) > 1e-9 ? 1.0 : 0.0));

  const RandomizedParams rp{20, 0.75, 0.5, 99};
  const auto r1 = randomized_logistic(X, b, {0.02, 0.05}, rp);
  const auto r2 = randomized_logistic(X, b, {0.02, 0.05}, rp);
  CHECK(r1 == r2);
  for (double v : r1) CHECK((v >= 0.0 && v <= 1.0));

  CHECK_THROWS_AS(randomized_logistic(X, b, {}, rp), UsageError);
  CHECK_THROWS_AS(randomized_logistic(X, b, {0.1}, {1, 0.02, 0.5, 0}), UsageError);
  CHECK_THROWS_AS(randomized_logistic(X, b, {0.1}, {1, 0.5, 0.0, 0}), UsageError);
}

TEST_CASE("one-vs-rest frequencies") {
  Rng rng(16);
  SUBCASE("two classes give identical supports") {
    const auto X = random_matrix(rng, 40, 6);
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) labels[i] = X(i, 2) + 0.3 * rng.normal() > 0 ? 1 : 0;
    for (auto method : {SelectionMethod::kLasso, SelectionMethod::kL1Logistic}) {
      SelectionParams sp;
      sp.method = method;
      sp.lambda_ratios = {0.3};
      for (double f : ovr_frequencies(X, labels, 2, sp)) CHECK((f == 0.0 || f == 1.0));
    }
  }
  SUBCASE("counting definition and zero columns") {
    // Feature 0 separates classes 0,1,2 from the rest; feature 1 is all zero.
    const int n = 50;
    Eigen::MatrixXd X = random_matrix(rng, n, 4);
    X.col(1).setZero();
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = i % 5;
    for (int i = 0; i < n; ++i) X(i, 0) = (labels[i] == 0 ? 10.0 : labels[i] == 1 ? 20.0 : labels[i] == 2 ? -10.0 : 0.0) + 0.01 * rng.normal();
    SelectionParams sp;
    sp.lambda_ratios = {0.5};
    const auto f = ovr_frequencies(X, labels, 5, sp);
    CHECK(f[1] == 0.0);
    // Each class problem counts once, so frequencies are multiples of 1/K.
    for (double v : f) CHECK(std::abs(v * 5 - std::round(v * 5)) < 1e-12);
    CHECK(f[0] >= 0.6);
  }
  SUBCASE("errors") {
    const auto X = random_matrix(rng, 10, 3);
    std::vector<int> labels = {0, 0, 0, 0, 0, 1, 1, 1, 1, 2};
    CHECK_THROWS_AS(ovr_frequencies(X, labels, 3, {}), DataError);
    CHECK_THROWS_AS(ovr_frequencies(X, labels, 1, {}), UsageError);
  }
}

TEST_CASE("top_by_frequency ordering") {
  CHECK(top_by_frequency({0.2, 0.5, 0.5, 0.1, 0.5}, 3) == std::vector<int>{1, 2, 4});
  CHECK(top_by_frequency({0.0, 0.0}, 5) == std::vector<int>{0, 1});
}

TEST_CASE("lambda grid") {
  SelectionParams sp;
  const auto g = lambda_ratio_grid(sp);
  REQUIRE(g.size() == 20);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == doctest::Approx(1e-4));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
  sp.lambda_ratios = {0.1, 0.5};
  CHECK(lambda_ratio_grid(sp) == std::vector<double>{0.5, 0.1});
  sp.lambda_ratios = {-1};
  CHECK_THROWS_AS(lambda_ratio_grid(sp), UsageError);
}

TEST_CASE("support shrinks as lambda grows") {
  Rng rng(17);
  const auto X = random_matrix(rng, 60, 20);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(20);
  for (int j = 0; j < 6; ++j) beta[j] = 1.0 + j * 0.3;
  const Eigen::VectorXd y = X * beta + random_matrix(rng, 60, 1).col(0);
  const Eigen::VectorXd b = pm_labels(y.array() - y.mean());
  const double lmax = lasso_lambda_max(X, y), gmax = logistic_lambda_max(X, b);
  std::vector<double> lasso_sizes, logit_sizes;
  for (int i = 0; i < 10; ++i) {
    const double ratio = std::pow(10.0, -3.0 + 3.0 * i / 9.0);
    lasso_sizes.push_back(static_cast<double>((lasso_fit(X, y, ratio * lmax).beta.array() != 0).count()));
    logit_sizes.push_back(static_cast<double>((l1_logistic_fit(X, b, ratio * gmax).w.array().abs() > 1e-9).count()));
  }
  for (const auto* sizes : {&lasso_sizes, &logit_sizes}) {
    const auto iso = cmr::testing::isotonic_nonincreasing(*sizes);
    for (std::size_t i = 0; i < sizes->size(); ++i) CHECK(std::abs(iso[i] - (*sizes)[i]) <= 1.0);
    for (std::size_t i = 1; i < sizes->size(); ++i) CHECK((*sizes)[i] <= (*sizes)[i - 1] + 1.0);
    CHECK(sizes->front() > sizes->back());
  }
}

TEST_CASE("two-stage selection") {
  Rng rng(18);
  const auto data = cmr::testing::planted_feature_matrix(rng, 100, 5, {3, 7, 10});
  std::vector<int> labels(data.labels.begin(), data.labels.end());
  SelectionParams sp;
  sp.lambda_ratios = {0.6, 0.4, 0.25, 0.15, 0.1};
  const auto report = two_stage_select(data.matrix, labels, 5, sp);
  CHECK(report.stage1.candidates.size() == 113);
  CHECK(report.stage1.selected.size() == 30);
  CHECK(report.stage2.candidates.size() == 42);
  CHECK(std::is_sorted(report.stage2.candidates.begin(), report.stage2.candidates.end()));
  REQUIRE(report.selected().size() == 20);
  for (int planted : {3, 7, 10}) {
    CHECK(std::find(report.selected().begin(), report.selected().end(), planted) != report.selected().end());
  }
  // Descending frequency, ties by ascending index.
  std::vector<double> freq_of(data.matrix.cols(), -1.0);
  for (std::size_t i = 0; i < report.stage2.candidates.size(); ++i) freq_of[report.stage2.candidates[i]] = report.stage2.frequencies[i];
  for (std::size_t i = 1; i < report.selected().size(); ++i) {
    const int a = report.selected()[i - 1], b = report.selected()[i];
    CHECK((freq_of[a] > freq_of[b] || (freq_of[a] == freq_of[b] && a < b)));
  }

  const auto again = two_stage_select(data.matrix, labels, 5, sp);
  CHECK(again.selected() == report.selected());

  // Column permutation within groups permutes the result.
  std::vector<int> perm(data.matrix.cols());
  std::iota(perm.begin(), perm.end(), 0);
  // Only the volumetric block moves, so stage 1 sees the same columns and the
  // stage-2 pool is the same set.
  std::reverse(perm.begin(), perm.begin() + 12);
  const auto shuffled = data.matrix.select_cols(perm);
  const auto rep2 = two_stage_select(shuffled, labels, 5, sp);
  // Frequencies follow their columns; selected sets agree except for ties at
  // the cut, which break by (now different) column index.
  std::vector<double> f1(data.matrix.cols(), -1.0), f2(data.matrix.cols(), -1.0);
  for (std::size_t i = 0; i < report.stage1.candidates.size(); ++i) f1[report.stage1.candidates[i]] = report.stage1.frequencies[i];
  for (std::size_t i = 0; i < rep2.stage1.candidates.size(); ++i) f2[perm[rep2.stage1.candidates[i]]] = rep2.stage1.frequencies[i];
  CHECK(f1 == f2);
  const double cut = freq_of[report.selected().back()];
  for (int j : report.selected()) {
    if (freq_of[j] <= cut) continue;
    bool found = false;
    for (int k : rep2.selected()) found = found || perm[k] == j;
    CHECK(found);
  }

  // Full column permutation at the frequency level.
  std::vector<int> all(data.matrix.cols());
  std::iota(all.begin(), all.end(), 0);
  Rng(5).shuffle(all);
  const auto fa = ovr_frequencies(data.matrix.X, labels, 5, sp);
  const auto fb = ovr_frequencies(data.matrix.select_cols(all).X, labels, 5, sp);
  for (std::size_t j = 0; j < all.size(); ++j) CHECK(fb[j] == doctest::Approx(fa[all[j]]));

  auto small = data.matrix.select_cols({0, 1, 2, 12, 13});
  CHECK_THROWS_AS(two_stage_select(small, labels, 5, sp), DataError);
}
