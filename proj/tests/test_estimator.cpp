#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "lrb/errors.hpp"
#include "lrb/estimator.hpp"

using lrb::Matrix;
using lrb::MultiTaskData;
using lrb::Vector;

namespace {

MultiTaskData one_point() {
  MultiTaskData data(2, 1);
  Matrix x(2, 1);
  x << 1.0, 0.0;
  const double y[] = {2.0};
  data.append_round(x, y);
  return data;
}

}  // namespace

TEST_CASE("objective by hand") {
  const MultiTaskData data = one_point();
  Matrix a(2, 1);
  a << 1.0, 0.0;
  CHECK(lrb::objective(a, data, 1.0) == doctest::Approx(2.0));
  CHECK(lrb::objective(Matrix::Zero(2, 1), data, 0.0) == doctest::Approx(4.0));
}

TEST_CASE("objective vanishes at the truth on noiseless data") {
  std::mt19937_64 gen(1);
  const Matrix w = testing::gaussian(4, 3, gen);
  const MultiTaskData data = testing::synthetic_data(w, 8, 0.0, gen);
  CHECK(lrb::objective(w, data, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lrb::smooth_gradient(w, data).norm() < 1e-12);
}

TEST_CASE("gradient by hand and by finite differences") {
  const Matrix g = lrb::smooth_gradient(Matrix::Zero(2, 1), one_point());
  CHECK(g(0, 0) == doctest::Approx(-4.0));
  CHECK(g(1, 0) == doctest::Approx(0.0));

  std::mt19937_64 gen(2);
  const Matrix w = testing::gaussian(4, 3, gen);
  const MultiTaskData data = testing::synthetic_data(w, 10, 1.0, gen);
  const Matrix a = testing::gaussian(4, 3, gen);
  const Matrix grad = lrb::smooth_gradient(a, data);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      Matrix up = a, down = a;
      up(i, j) += h;
      down(i, j) -= h;
      const double fd = (lrb::objective(up, data, 0.0) - lrb::objective(down, data, 0.0)) / (2 * h);
      CHECK(std::abs(fd - grad(i, j)) < 1e-6);
    }
  }
}

TEST_CASE("lipschitz constant") {
  MultiTaskData eye(3, 2);
  for (int i = 0; i < 3; ++i) {
    Matrix x = Matrix::Zero(3, 2);
    x(i, 0) = 1.0;
    x(i, 1) = 1.0;
    const double y[] = {0.0, 0.0};
    eye.append_round(x, y);
  }
  CHECK(lrb::lipschitz_estimate(eye) == doctest::Approx(2.0 / 3.0));

  MultiTaskData padded(2, 1);
  Matrix x(2, 1);
  x << 3.0, 0.0;
  const double y[] = {1.0};
  padded.append_round(x, y);
  x << 0.0, 0.0;
  padded.append_round(x, y);
  CHECK(lrb::lipschitz_estimate(padded) == doctest::Approx(9.0));

  std::mt19937_64 gen(3);
  const Matrix w = testing::gaussian(5, 3, gen);
  const MultiTaskData data = testing::synthetic_data(w, 12, 1.0, gen);
  const double lip = lrb::lipschitz_estimate(data);
  for (int k = 0; k < 100; ++k) {
    const Matrix a = testing::gaussian(5, 3, gen);
    const Matrix b = testing::gaussian(5, 3, gen);
    const double fa = lrb::objective(a, data, 0.0);
    const double fb = lrb::objective(b, data, 0.0);
    const double bound =
        fa + (lrb::smooth_gradient(a, data).array() * (b - a).array()).sum() +
        0.5 * lip * (b - a).squaredNorm();
    CHECK(fb <= bound + 1e-9 * (1.0 + std::abs(bound)));
  }
}

TEST_CASE("large lambda gives the zero solution") {
  std::mt19937_64 gen(4);
  const Matrix w = testing::gaussian(4, 3, gen);
  const MultiTaskData data = testing::synthetic_data(w, 6, 0.5, gen);
  const double threshold = lrb::zero_solution_threshold(data);
  const auto fit = lrb::fit_trace_norm(data, threshold * 1.0001);
  CHECK(fit.estimate.isZero(0.0));
  CHECK(lrb::kkt_certificate(Matrix::Zero(4, 3), data, threshold * 1.0001).residual() == 0.0);
  CHECK(lrb::kkt_certificate(Matrix::Zero(4, 3), data, threshold * 0.9).residual() > 0.0);
}

TEST_CASE("lambda zero reduces to per-task least squares") {
  std::mt19937_64 gen(5);
  const Matrix w = testing::gaussian(3, 2, gen);
  const MultiTaskData data = testing::synthetic_data(w, 30, 1.0, gen);
  lrb::SolverOptions opts;
  opts.max_iterations = 5000;
  opts.objective_tolerance = 1e-15;
  const auto fit = lrb::fit_trace_norm(data, 0.0, opts);
  Matrix ls(3, 2);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& h = data.task(t);
    ls.col(static_cast<Eigen::Index>(t)) =
        (h.design().transpose() * h.design()).ldlt().solve(h.design().transpose() * h.rewards());
  }
  CHECK((fit.estimate - ls).norm() < 1e-6);
}

TEST_CASE("noiseless rank-one recovery") {
  std::mt19937_64 gen(6);
  const Matrix w = testing::gaussian(6, 1, gen) * testing::gaussian(1, 5, gen);
  const MultiTaskData data = testing::synthetic_data(w, 60, 0.0, gen);
  lrb::SolverOptions opts;
  opts.max_iterations = 5000;
  opts.objective_tolerance = 1e-14;
  const auto fit = lrb::fit_trace_norm(data, 1e-3, opts);
  CHECK((fit.estimate - w).norm() / w.norm() < 0.05);
}

TEST_CASE("solver objective history, certificate and warm starts") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix w = testing::gaussian(6, 2, gen) * testing::gaussian(2, 4, gen);
    const MultiTaskData data = testing::synthetic_data(w, 25, 1.0, gen);
    const double lambda = 0.1 * (1 + trial % 3);
    lrb::SolverOptions opts;
    opts.max_iterations = 20000;
    opts.objective_tolerance = 1e-14;
    const auto fit = lrb::fit_trace_norm(data, lambda, opts);
    for (std::size_t k = 1; k < fit.objective_history.size(); ++k) {
      CHECK(fit.objective_history[k] <= fit.objective_history[k - 1]);
    }
    CHECK(fit.objective <= lrb::objective(Matrix::Zero(6, 4), data, lambda));
    CHECK(fit.objective <= lrb::objective(w, data, lambda) + 1e-6 * (1 + std::abs(fit.objective)));
    CHECK(lrb::kkt_certificate(fit.estimate, data, lambda).residual() <= 1e-4);

    opts.warm_start = testing::gaussian(6, 4, gen);
    const double warm_obj = lrb::objective(*opts.warm_start, data, lambda);
    const auto other = lrb::fit_trace_norm(data, lambda, opts);
    CHECK(other.objective <= warm_obj);
    CHECK(std::abs(other.objective - fit.objective) <= 1e-6 * std::abs(fit.objective));
  }
}

TEST_CASE("iteration cap is reported, not thrown") {
  std::mt19937_64 gen(9);
  const Matrix w = testing::gaussian(5, 4, gen);
  const MultiTaskData data = testing::synthetic_data(w, 10, 1.0, gen);
  lrb::SolverOptions opts;
  opts.max_iterations = 2;
  opts.objective_tolerance = 1e-300;
  const auto fit = lrb::fit_trace_norm(data, 0.01, opts);
  CHECK_FALSE(fit.converged);
  CHECK(lrb::linalg::all_finite(fit.estimate));
}

TEST_CASE("solver rejects bad input") {
  MultiTaskData data(2, 1);
  Matrix x(2, 1);
  x << std::numeric_limits<double>::infinity(), 0.0;
  const double y[] = {1.0};
  CHECK_THROWS_AS(data.append_round(x, y), lrb::InputError);
  Matrix bad_design(1, 2);
  bad_design << 1.0, 0.0;
  Vector bad_reward(1);
  bad_reward << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lrb::TaskHistory(bad_design, bad_reward), lrb::InputError);
  CHECK_THROWS(lrb::fit_trace_norm(one_point(), -1.0));
  CHECK_THROWS(lrb::fit_trace_norm(MultiTaskData(2, 1), 1.0));
}

TEST_CASE("lambda schedule values") {
  CHECK(lrb::experimental_lambda(1.0, 1.0, 1.0, 1.0) == doctest::Approx(2.0));

  lrb::LambdaRule rule;
  // Frozen from an independent evaluation of the formula at d=20, T=10, n=40.
  CHECK(std::abs(lrb::lambda_schedule(rule, 40, 20, 10, 40) - 1.1396918190400374) < 1e-12);

  rule.delta = 2.0 / std::exp(1.0);
  // T + d = n = 2: max(1 + 1/2, 1 + sqrt(1/2))
  CHECK(lrb::lambda_schedule(rule, 2, 1, 1, 2) == doctest::Approx(1.0 + std::sqrt(0.5)));

  rule.delta = 1.0;
  CHECK_THROWS_AS(lrb::lambda_schedule(rule, 10, 20, 10, 40), lrb::ConfigError);
  rule.delta = 0.0;
  CHECK_THROWS_AS(lrb::lambda_schedule(rule, 10, 20, 10, 40), lrb::ConfigError);
}

TEST_CASE("lambda schedule decreases in n") {
  for (auto variant : {lrb::LambdaVariant::experimental, lrb::LambdaVariant::theoretical}) {
    lrb::LambdaRule rule;
    rule.variant = variant;
    double prev = lrb::lambda_schedule(rule, 1, 20, 10, 10000);
    for (std::size_t n = 2; n <= 10000; ++n) {
      const double cur = lrb::lambda_schedule(rule, n, 20, 10, 10000);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("certificate-driven stopping reaches the requested accuracy") {
  std::mt19937_64 gen(10);
  const Matrix w = testing::gaussian(6, 1, gen) * testing::gaussian(1, 3, gen);
  const MultiTaskData data = testing::synthetic_data(w, 2, 0.5, gen);
  lrb::SolverOptions opts;
  opts.max_iterations = 200000;
  opts.objective_tolerance = 1e-12;
  opts.kkt_tolerance = 1e-7;
  const auto fit = lrb::fit_trace_norm(data, 1e-3, opts);
  CHECK(fit.converged);
  CHECK(lrb::kkt_certificate(fit.estimate, data, 1e-3).residual() <= 1e-7);
  CHECK(fit.objective <= fit.objective_history.front());
}
