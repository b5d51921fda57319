#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lrb/environment.hpp"
#include "lrb/errors.hpp"

using lrb::ArmDistribution;
using lrb::ArmKind;
using lrb::Matrix;
using lrb::RngStream;
using lrb::Vector;

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 1), b(42, 1), c(42, 2), e(43, 1);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs_stream |= x != c.normal();
    differs_seed |= x != e.normal();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
  CHECK_THROWS_AS(a.uniform_index(0), lrb::InputError);
}

TEST_CASE("task matrix structure") {
  RngStream rng(1, 0);
  const Matrix w1 = lrb::generate_task_matrix({6, 8, 1, 1.0}, rng);
  for (Eigen::Index i = 0; i < w1.cols(); ++i) {
    for (Eigen::Index j = 0; j < w1.cols(); ++j) {
      const double cosine = w1.col(i).normalized().dot(w1.col(j).normalized());
      CHECK(std::abs(std::abs(cosine) - 1.0) < 1e-9);
    }
  }
  const Matrix full = lrb::generate_task_matrix({5, 7, 5, 1.0}, rng);
  CHECK(lrb::linalg::numerical_rank(full) == 5);

  const Matrix w = lrb::generate_task_matrix({20, 30, 5, 2.5}, rng);
  const auto s = lrb::linalg::svd(w);
  CHECK(lrb::linalg::numerical_rank(s) == 5);
  CHECK(w.colwise().norm().maxCoeff() == doctest::Approx(2.5).epsilon(1e-14));
  CHECK((w.colwise().norm().array() <= 2.5 + 1e-12).all());

  CHECK_THROWS_AS(lrb::generate_task_matrix({3, 2, 3, 1.0}, rng), lrb::ConfigError);
  CHECK_THROWS_AS(lrb::generate_task_matrix({3, 2, 1, 0.0}, rng), lrb::ConfigError);
}

TEST_CASE("gaussian arms match their moments") {
  const std::size_t draws = 10000;  // x 10 arms = 1e5 samples
  RngStream rng(5, 1);
  const ArmDistribution dist(ArmKind::gaussian_iid, 20, 10);
  Vector mean = Vector::Zero(20);
  Matrix second = Matrix::Zero(20, 20);
  std::size_t count = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto ds = dist.sample(rng);
    for (Eigen::Index k = 0; k < ds.arms.rows(); ++k) {
      const Vector x = ds.arms.row(k).transpose();
      mean += x;
      second += x * x.transpose();
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  second /= static_cast<double>(count);
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
  CHECK(lrb::linalg::operator_norm(second - Matrix::Identity(20, 20)) < 0.05);
}

TEST_CASE("non-identity and correlated arm covariances") {
  Matrix cov(3, 3);
  cov << 2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 0.5;
  for (auto kind : {ArmKind::gaussian_iid, ArmKind::gaussian_correlated}) {
    const ArmDistribution dist(kind, std::vector<Matrix>{cov, cov});
    RngStream rng(9, 3);
    Matrix second = Matrix::Zero(3, 3);
    const int draws = 50000;
    for (int i = 0; i < draws; ++i) {
      const auto ds = dist.sample(rng);
      const Vector x = ds.arms.row(1).transpose();
      second += x * x.transpose();
    }
    CHECK(lrb::linalg::operator_norm(second / draws - cov) < 0.05);
    CHECK(dist.sigma_op_max() == doctest::Approx(std::sqrt(lrb::linalg::svd(cov).singular_values(0))));
  }
}

TEST_CASE("sphere arms have unit norm") {
  RngStream rng(3, 1);
  const ArmDistribution dist(ArmKind::uniform_sphere, 7, 5);
  for (int i = 0; i < 100; ++i) {
    const auto ds = dist.sample(rng);
    for (Eigen::Index k = 0; k < ds.arms.rows(); ++k) {
      CHECK(ds.arms.row(k).norm() == doctest::Approx(1.0).epsilon(1e-15));
    }
  }
  CHECK(dist.second_moment(0).isApprox(Matrix::Identity(7, 7) / 7.0));
}

TEST_CASE("arm generators are symmetric under negation") {
  Matrix cov(2, 2);
  cov << 1.0, 0.3, 0.3, 2.0;
  std::mt19937_64 gen(4);
  for (auto kind : {ArmKind::gaussian_iid, ArmKind::gaussian_correlated, ArmKind::uniform_sphere}) {
    const ArmDistribution dist(kind, std::vector<Matrix>{cov, cov, cov});
    const Matrix z = testing::gaussian(static_cast<Eigen::Index>(dist.draw_rows()), 2, gen);
    CHECK(dist.from_standard(-z).arms == -dist.from_standard(z).arms);
  }
}

TEST_CASE("covariance validation") {
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(ArmDistribution(ArmKind::gaussian_iid, std::vector<Matrix>{asym}), lrb::ConfigError);
  Matrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(ArmDistribution(ArmKind::gaussian_iid, std::vector<Matrix>{indefinite}),
                  lrb::ConfigError);
  CHECK_THROWS_AS(ArmDistribution(ArmKind::gaussian_iid, std::vector<Matrix>{}), lrb::ConfigError);
}

TEST_CASE("rewards") {
  RngStream rng(8, 2);
  Vector x(3), w(3);
  x << 1.0, 2.0, -1.0;
  w << 0.5, 0.25, 1.0;
  CHECK(lrb::reward(x, w, {0.0}, rng) == 0.0);

  const int draws = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double y = lrb::reward(Vector::Zero(3), w, {1.5}, rng);
    sum += y;
    sq += y * y;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sq / draws - mean * mean);
  CHECK(std::abs(sd - 1.5) < 0.02 * 1.5);

  RngStream r1(8, 5), r2(8, 5);
  for (int i = 0; i < 10; ++i) CHECK(lrb::reward(x, w, {1.0}, r1) == lrb::reward(x, w, {1.0}, r2));
}

TEST_CASE("best arm") {
  lrb::DecisionSet one{Matrix::Ones(1, 3)};
  CHECK(lrb::best_arm(one, Vector::Ones(3)).index == 0);
  lrb::DecisionSet many{Matrix::Identity(4, 4)};
  CHECK(lrb::best_arm(many, Vector::Zero(4)).index == 0);

  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 200; ++trial) {
    lrb::DecisionSet ds{testing::gaussian(6, 3, gen)};
    const Vector w = testing::gaussian(3, 1, gen);
    std::size_t arg = 0;
    for (std::size_t k = 1; k < 6; ++k) {
      if (ds.arm(k).dot(w) > ds.arm(arg).dot(w)) arg = k;
    }
    const auto best = lrb::best_arm(ds, w);
    CHECK(best.index == arg);
    CHECK(best.value == ds.arm(arg).dot(w));
  }
}

TEST_CASE("environment replay is a pure function of the seed") {
  lrb::EnvironmentSetting setting{{5, 4, 2, 1.0}, ArmDistribution(ArmKind::gaussian_iid, 5, 3),
                                  {0.7}, 12, false};
  const auto a = lrb::make_replay(setting, 99, 2);
  const auto b = lrb::make_replay(setting, 99, 2);
  const auto c = lrb::make_replay(setting, 99, 3);
  CHECK(a.task_matrix == b.task_matrix);
  CHECK(a.noise == b.noise);
  CHECK(a.first_round_choices == b.first_round_choices);
  for (std::size_t n = 0; n < a.rounds(); ++n) {
    CHECK(lrb::checksum(a.sets[n]) == lrb::checksum(b.sets[n]));
  }
  CHECK(a.task_matrix != c.task_matrix);

  setting.fix_task_matrix = true;
  CHECK(lrb::make_replay(setting, 99, 0).task_matrix == lrb::make_replay(setting, 99, 7).task_matrix);

  CHECK(a.observed_reward(3, 1, 2) == a.expected_reward(3, 1, 2) + a.noise(3, 1));
}
