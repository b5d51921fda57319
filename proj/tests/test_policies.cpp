#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lrb/errors.hpp"
#include "lrb/policies.hpp"

using lrb::Matrix;
using lrb::MultiTaskData;
using lrb::Vector;

namespace {

template <class P>
concept exposes_rank = requires(const P& p) { p.rank; } || requires(const P& p) {
  p.rank_parameter();
};

// Greedy choices of `policy` against random sets after `rounds` random observations.
void feed(lrb::Policy& policy, const Matrix& w, std::size_t rounds, double sigma,
          std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  std::vector<double> y(static_cast<std::size_t>(w.cols()));
  for (std::size_t n = 0; n < rounds; ++n) {
    const Matrix x = testing::gaussian(w.rows(), w.cols(), gen);
    for (Eigen::Index t = 0; t < w.cols(); ++t) {
      y[static_cast<std::size_t>(t)] = x.col(t).dot(w.col(t)) + sigma * nd(gen);
    }
    policy.observe(x, y);
  }
}

}  // namespace

static_assert(!exposes_rank<lrb::TraceNormPolicy::Settings>);
static_assert(!exposes_rank<lrb::TraceNormPolicy>);
static_assert(exposes_rank<lrb::MLinGreedyPolicy>);

TEST_CASE("policy names round-trip") {
  for (auto k : {lrb::PolicyKind::tracenorm, lrb::PolicyKind::itl, lrb::PolicyKind::oracle,
                 lrb::PolicyKind::mlingreedy}) {
    CHECK(lrb::parse_policy_kind(lrb::to_string(k)) == k);
  }
  CHECK_THROWS_AS(lrb::parse_policy_kind("ucb"), lrb::ConfigError);
  CHECK(lrb::parse_rank_mode("over") == lrb::RankMode::over);
}

TEST_CASE("fresh policies start at zero") {
  lrb::TraceNormPolicy tn(4, 3, {});
  CHECK(tn.round() == 0);
  CHECK(tn.estimate() == Matrix::Zero(4, 3));
  lrb::ItlPolicy itl(4, 3);
  CHECK(itl.estimate() == Matrix::Zero(4, 3));
}

TEST_CASE("arm selection") {
  lrb::ItlPolicy policy(3, 1);
  const double y[] = {1.0};
  policy.observe(Matrix::Identity(3, 1), y);
  const std::vector<lrb::DecisionSet> sets{{Matrix::Identity(3, 3)}};
  const std::size_t first[] = {2};
  CHECK(policy.select_arms(sets, first)[0] == 0);

  lrb::ItlPolicy fresh(3, 1);
  CHECK(fresh.select_arms(sets, first)[0] == 2);

  std::mt19937_64 gen(1);
  lrb::ItlPolicy busy(4, 3);
  feed(busy, testing::gaussian(4, 3, gen), 6, 0.5, gen);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<lrb::DecisionSet> ds;
    for (int t = 0; t < 3; ++t) ds.push_back({testing::gaussian(5, 4, gen)});
    const auto chosen = busy.select_arms(ds, first);
    for (std::size_t t = 0; t < 3; ++t) {
      const Vector col = busy.estimate().col(static_cast<Eigen::Index>(t));
      const auto best = lrb::best_arm(ds[t], col);
      CHECK(chosen[t] == best.index);
      CHECK(lrb::best_arm(ds[t], 3.7 * col).index == best.index);
    }
  }
}

TEST_CASE("trace-norm update is a soft threshold in one dimension") {
  // l = 1/3, delta = 2/e, T + d = 2, n = 1: lambda_1 = (1/3) * max(2 + 1, sqrt(2) + 1) = 1.
  lrb::TraceNormPolicy::Settings s;
  s.lambda.scale = 1.0 / 3.0;
  s.lambda.delta = 2.0 / std::exp(1.0);
  s.solver.max_iterations = 10000;
  s.solver.objective_tolerance = 1e-15;
  lrb::TraceNormPolicy policy(1, 1, s);
  const double y[] = {2.0};
  policy.observe(Matrix::Ones(1, 1), y);
  CHECK(*policy.last_lambda() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(policy.estimate()(0, 0) == doctest::Approx(1.5).epsilon(1e-8));
}

TEST_CASE("trace-norm update stays at zero for a huge lambda") {
  lrb::TraceNormPolicy::Settings s;
  s.lambda.scale = 1e6;
  lrb::TraceNormPolicy policy(4, 3, s);
  std::mt19937_64 gen(2);
  feed(policy, testing::gaussian(4, 3, gen), 5, 1.0, gen);
  CHECK(policy.estimate().isZero(0.0));
  CHECK(policy.last_update_converged());
}

TEST_CASE("itl ridge") {
  lrb::ItlPolicy policy(3, 1);
  const double y[] = {3.0};
  policy.observe(Matrix::Identity(3, 1), y);
  CHECK(policy.estimate()(0, 0) == doctest::Approx(1.5));
  CHECK(policy.estimate().bottomRows(2).isZero(0.0));
  CHECK(lrb::ridge_estimate(lrb::TaskHistory(3), 1.0) == Vector::Zero(3));

  std::mt19937_64 gen(3);
  lrb::TaskHistory h(3);
  const Vector w = testing::gaussian(3, 1, gen);
  for (int i = 0; i < 20; ++i) {
    const Vector x = testing::gaussian(3, 1, gen);
    h.append(x, x.dot(w));
  }
  CHECK((lrb::ridge_estimate(h, 1e-12) - w).norm() < 1e-6);
}

TEST_CASE("oracle basis and updates") {
  std::mt19937_64 gen(4);
  const Matrix w = testing::gaussian(8, 5, gen) * testing::gaussian(5, 6, gen);
  const auto basis = lrb::OracleBasis::from_task_matrix(w, 5);
  CHECK(basis.b.cols() == 5);
  CHECK((basis.b.transpose() * basis.b - Matrix::Identity(5, 5)).norm() < 1e-10);
  CHECK((w - basis.b * basis.b.transpose() * w).norm() < 1e-8);

  // Full basis reduces to ITL.
  lrb::OraclePolicy full(3, {Matrix::Identity(4, 4)});
  lrb::ItlPolicy itl(4, 3);
  std::mt19937_64 g1(5), g2(5);
  const Matrix w2 = testing::gaussian(4, 3, gen);
  feed(full, w2, 7, 1.0, g1);
  feed(itl, w2, 7, 1.0, g2);
  CHECK((full.estimate() - itl.estimate()).norm() < 1e-12);

  // Estimates live in span(b): arms orthogonal to it score zero.
  Matrix b = Matrix::Zero(4, 1);
  b(0, 0) = 1.0;
  lrb::OraclePolicy one(2, {b});
  std::mt19937_64 g3(6);
  feed(one, testing::gaussian(4, 2, gen), 4, 1.0, g3);
  Vector ortho = Vector::Zero(4);
  ortho(2) = 1.0;
  CHECK(ortho.transpose() * one.estimate() == Matrix::Zero(1, 2));

  Matrix bad = Matrix::Ones(4, 1);
  CHECK_THROWS_AS(lrb::OraclePolicy(2, {bad}), lrb::ConfigError);
}

TEST_CASE("oracle recovers rank-one tasks") {
  std::mt19937_64 gen(7);
  const Vector u = testing::gaussian(5, 1, gen).normalized();
  const Matrix w = u * testing::gaussian(1, 3, gen);
  lrb::OraclePolicy policy(3, {u}, 1e-12);
  feed(policy, w, 4, 0.0, gen);
  CHECK((policy.estimate() - w).norm() < 1e-6);
}

TEST_CASE("factor rank modes") {
  using lrb::RankMode;
  CHECK(lrb::factor_rank(RankMode::true_rank, 5, 20, 10) == 5);
  CHECK(lrb::factor_rank(RankMode::over, 5, 20, 10) == 10);
  CHECK(lrb::factor_rank(RankMode::over, 5, 8, 10) == 8);
  CHECK(lrb::factor_rank(RankMode::under, 5, 20, 10) == 2);
  CHECK(lrb::factor_rank(RankMode::under, 1, 20, 10) == 1);
}

TEST_CASE("alternating least squares") {
  std::mt19937_64 gen(8);
  const Matrix low = testing::gaussian(6, 2, gen) * testing::gaussian(2, 4, gen);
  const MultiTaskData exact = testing::synthetic_data(low, 30, 0.0, gen);
  const auto fit = lrb::factorize(exact, 2, 15);
  CHECK(fit.objective < 1e-8);
  CHECK_FALSE(fit.diverged);

  // Full rank factorization equals per-task least squares.
  const Matrix w = testing::gaussian(4, 3, gen);
  const MultiTaskData noisy = testing::synthetic_data(w, 20, 1.0, gen);
  const auto full = lrb::factorize(noisy, 3, 15);
  double ls = 0.0;
  for (const auto& h : noisy.all()) {
    const Vector c = h.design().colPivHouseholderQr().solve(h.rewards());
    ls += (h.rewards() - h.design() * c).squaredNorm();
  }
  CHECK(std::abs(full.objective - ls) < 1e-4);
}

TEST_CASE("mlingreedy refits on powers of two") {
  using P = lrb::MLinGreedyPolicy;
  CHECK(P::is_epoch_end(1));
  CHECK(P::is_epoch_end(2));
  CHECK_FALSE(P::is_epoch_end(3));
  CHECK(P::is_epoch_end(32));
  CHECK_FALSE(P::is_epoch_end(40));

  std::mt19937_64 gen(9);
  P policy(6, 4, 1);
  const Matrix w = testing::gaussian(6, 2, gen) * testing::gaussian(2, 4, gen);
  Matrix previous = policy.estimate();
  std::normal_distribution<double> nd;
  std::vector<double> y(4);
  for (std::size_t n = 1; n <= 9; ++n) {
    const Matrix x = testing::gaussian(6, 4, gen);
    for (Eigen::Index t = 0; t < 4; ++t) y[static_cast<std::size_t>(t)] = x.col(t).dot(w.col(t)) + nd(gen);
    policy.observe(x, y);
    CHECK((policy.estimate() != previous) == P::is_epoch_end(n));
    CHECK(lrb::linalg::numerical_rank(policy.estimate()) <= 1);
    previous = policy.estimate();
  }
}
