#ifndef SSGRN_TESTS_PROJECTION_MSTEP_HPP
#define SSGRN_TESTS_PROJECTION_MSTEP_HPP

// Second route to the M-step. Sufficient statistics are realised as explicit
// stacked matrices whose columns are observation terms; posterior
// covariances are folded in as extra columns (a Cholesky factor, with the
// observed rows zero), so products of the stacked matrices reproduce the
// expected second moments. B is then obtained from the projection form
//   B = y M L' (L M L')^{-1},  M = I - T'(T T')^{-1} T
// and Z by substituting back, one equation after the other.

#include <Eigen/Dense>

#include <random>

#include "ssgrn/em.hpp"

namespace oracle {

using ssgrn::Index;
using ssgrn::Matrix;
using ssgrn::Vector;

struct StackedMoments {
  Matrix theta;      // k x n   E[theta_t] columns, then covariance factor columns
  Matrix theta_lag;  // k x n
  Matrix y;          // p x n
  Matrix y_lag;      // p x n
  std::int64_t count = 0;

  ssgrn::SufficientStats stats() const {
    ssgrn::SufficientStats s;
    s.theta_theta = theta * theta.transpose();
    s.theta_sum = theta.leftCols(count).rowwise().sum();
    s.y_theta = y * theta.transpose();
    s.ylag_theta = y_lag * theta.transpose();
    s.y_ylag = y * y_lag.transpose();
    s.ylag_ylag = y_lag * y_lag.transpose();
    s.y_y = y * y.transpose();
    s.theta_thetalag = theta * theta_lag.transpose();
    s.thetalag_thetalag = theta_lag * theta_lag.transpose();
    s.thetalag_ylag = theta_lag * y_lag.transpose();
    s.count = count;
    return s;
  }
};

/// Random moments: `terms` observed columns plus a random 2k x 2k joint
/// covariance of (theta_t, theta_{t-1}) scaled by `cov_scale`.
inline StackedMoments random_moments(Index p, Index k, Index terms, std::mt19937_64& rng,
                                     double cov_scale = 1.0) {
  std::normal_distribution<double> n01;
  auto randm = [&](Index r, Index c) {
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) m(i, j) = n01(rng);
    return m;
  };
  const Matrix root = randm(2 * k, 2 * k);
  const Matrix joint = cov_scale * (root * root.transpose() + 0.1 * Matrix::Identity(2 * k, 2 * k));
  const Matrix L = Eigen::LLT<Matrix>(joint).matrixL();

  StackedMoments s;
  const Index n = terms + 2 * k;
  s.count = terms;
  s.theta = Matrix::Zero(k, n);
  s.theta_lag = Matrix::Zero(k, n);
  s.y = Matrix::Zero(p, n);
  s.y_lag = Matrix::Zero(p, n);
  s.theta.leftCols(terms) = randm(k, terms);
  s.theta_lag.leftCols(terms) = randm(k, terms);
  s.y_lag.leftCols(terms) = randm(p, terms);
  // Observations correlated with the regressors so the solution is not trivial.
  s.y.leftCols(terms) = randm(p, k) * s.theta.leftCols(terms) +
                        randm(p, p) * s.y_lag.leftCols(terms) + randm(p, terms);
  s.theta.rightCols(2 * k) = L.topRows(k);
  s.theta_lag.rightCols(2 * k) = L.bottomRows(k);
  return s;
}

struct ProjectionSolution {
  Matrix first;   // coefficient of the state regressor (Z or F)
  Matrix second;  // coefficient of the lagged observations (B or A)
};

/// Solves lhs ~ W1 X1 + W2 X2 by first eliminating X1 with the projection M.
inline ProjectionSolution projection_solve(const Matrix& lhs, const Matrix& X1, const Matrix& X2) {
  const Index n = lhs.cols();
  const Matrix X1X1_inv = (X1 * X1.transpose()).inverse();
  const Matrix M = Matrix::Identity(n, n) - X1.transpose() * X1X1_inv * X1;
  const Matrix LML_inv = (X2 * M * X2.transpose()).inverse();
  ProjectionSolution s;
  s.second = lhs * M * X2.transpose() * LML_inv;
  s.first = lhs * (Matrix::Identity(n, n) - M * X2.transpose() * LML_inv * X2) * X1.transpose() *
            X1X1_inv;
  return s;
}

struct ProjectionMStep {
  Matrix Z, B, F, A;
  double sigma2_xi = 0.0;
};

inline ProjectionMStep projection_mstep(const StackedMoments& s) {
  ProjectionMStep out;
  const auto obs = projection_solve(s.y, s.theta, s.y_lag);
  out.Z = obs.first;
  out.B = obs.second;
  const auto state = projection_solve(s.theta, s.theta_lag, s.y_lag);
  out.F = state.first;
  out.A = state.second;
  const Matrix resid = s.y - out.Z * s.theta - out.B * s.y_lag;
  out.sigma2_xi = resid.squaredNorm() / (static_cast<double>(s.y.rows()) * static_cast<double>(s.count));
  return out;
}

}  // namespace oracle

#endif  // SSGRN_TESTS_PROJECTION_MSTEP_HPP
