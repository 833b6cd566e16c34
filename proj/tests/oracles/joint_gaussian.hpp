#ifndef SSGRN_TESTS_JOINT_GAUSSIAN_HPP
#define SSGRN_TESTS_JOINT_GAUSSIAN_HPP

// Brute-force reference for one replicate: every theta_t and y_t is a linear
// map of the independent Gaussian vector x = (theta_0, eta_1..eta_T,
// xi_1..xi_T). Building the full joint covariance and conditioning on the
// stacked observations gives exact posterior moments and the marginal
// density without any recursion.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "ssgrn/model.hpp"

namespace oracle {

using ssgrn::Index;
using ssgrn::Matrix;
using ssgrn::Vector;

struct JointGaussian {
  Index k = 0, p = 0, T = 0;
  Matrix theta_map;  // k(T+1) x dim(x): rows of theta_0..theta_T
  Matrix y_map;      // pT x dim(x):     rows of y_1..y_T
  Vector x_var;      // diagonal covariance of x

  JointGaussian(const ssgrn::ModelParams& m, Index T_) : k(m.k()), p(m.p()), T(T_) {
    const Index dx = k + T * k + T * p;
    x_var.resize(dx);
    x_var.head(k) = m.q0_diag;
    x_var.segment(k, T * k).setOnes();
    x_var.tail(T * p).setConstant(m.sigma2_xi);

    theta_map = Matrix::Zero(k * (T + 1), dx);
    y_map = Matrix::Zero(p * T, dx);
    theta_map.topRows(k).leftCols(k).setIdentity();
    Matrix y_prev = Matrix::Zero(p, dx);
    for (Index t = 1; t <= T; ++t) {
      Matrix th = m.F * theta_map.middleRows(k * (t - 1), k) + m.A * y_prev;
      th.middleCols(k + (t - 1) * k, k) += Matrix::Identity(k, k);
      theta_map.middleRows(k * t, k) = th;
      Matrix yt = m.Z * th + m.B * y_prev;
      yt.middleCols(k + T * k + (t - 1) * p, p) += Matrix::Identity(p, p);
      y_map.middleRows(p * (t - 1), p) = yt;
      y_prev = yt;
    }
  }

  static Vector stack(const Matrix& y) { return Eigen::Map<const Vector>(y.data(), y.size()); }

  Matrix y_cov() const { return y_map * x_var.asDiagonal() * y_map.transpose(); }

  /// log N(vec(y); 0, Cov(vec(y))).
  double loglik(const Matrix& y) const {
    const Vector v = stack(y);
    const Eigen::LLT<Matrix> llt(y_cov());
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(v.size()) * std::log(2.0 * std::numbers::pi) + logdet +
                   v.dot(llt.solve(v)));
  }

  struct Posterior {
    Vector mean;  // stacked theta_0..theta_T
    Matrix cov;

    Vector mean_at(Index t, Index k) const { return mean.segment(k * t, k); }
    Matrix cov_at(Index t, Index s, Index k) const { return cov.block(k * t, k * s, k, k); }
  };

  /// Posterior of all states given y_1..y_upto (upto = T for smoothing).
  Posterior condition(const Matrix& y, Index upto) const {
    const Matrix Sx = x_var.asDiagonal();
    const Matrix ym = y_map.topRows(p * upto);
    const Matrix c_ty = theta_map * Sx * ym.transpose();
    const Matrix c_yy = ym * Sx * ym.transpose();
    const Matrix c_tt = theta_map * Sx * theta_map.transpose();
    const Vector v = stack(y.leftCols(upto));
    const Eigen::LDLT<Matrix> ldlt(c_yy);
    Posterior post;
    post.mean = c_ty * ldlt.solve(v);
    post.cov = c_tt - c_ty * ldlt.solve(c_ty.transpose());
    return post;
  }
};

}  // namespace oracle

#endif  // SSGRN_TESTS_JOINT_GAUSSIAN_HPP
