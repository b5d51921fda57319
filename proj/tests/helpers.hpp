#pragma once

#include <random>

#include "lrb/linalg.hpp"

namespace testing {

inline lrb::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  lrb::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = nd(gen);
  return m;
}

// Reference SVT through Eigen's own SVD, independent of the in-repo Jacobi code.
inline lrb::Matrix reference_svt(const lrb::Matrix& m, double tau) {
  Eigen::JacobiSVD<lrb::Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const lrb::Vector s = (svd.singularValues().array() - tau).cwiseMax(0.0).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace testing

#include <vector>

#include "lrb/estimator.hpp"

namespace testing {

// n rounds of Gaussian contexts for T tasks, rewards x.w_t + sigma * noise.
inline lrb::MultiTaskData synthetic_data(const lrb::Matrix& w, std::size_t n, double sigma,
                                         std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  const auto d = static_cast<std::size_t>(w.rows());
  const auto tasks = static_cast<std::size_t>(w.cols());
  lrb::MultiTaskData data(d, tasks);
  std::vector<double> y(tasks);
  for (std::size_t i = 0; i < n; ++i) {
    const lrb::Matrix x = gaussian(w.rows(), w.cols(), gen);
    for (std::size_t t = 0; t < tasks; ++t) {
      const auto c = static_cast<Eigen::Index>(t);
      y[t] = x.col(c).dot(w.col(c)) + sigma * nd(gen);
    }
    data.append_round(x, y);
  }
  return data;
}

}  // namespace testing
