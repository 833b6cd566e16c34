#ifndef SSGRN_KALMAN_HPP
#define SSGRN_KALMAN_HPP

// Forward filter and fixed-interval (RTS) smoother for the input-feedback
// model in model.hpp. The lagged observation y_{t-1} enters both equations
// as a known input, so the recursions are the standard ones with a
// deterministic offset A y_{t-1} in the state prediction and B y_{t-1} in
// the observation prediction.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "ssgrn/errors.hpp"
#include "ssgrn/model.hpp"

namespace ssgrn {

/// Per-time quantities are indexed 0..T-1 for t = 1..T.
struct FilterResult {
  std::vector<Vector> predicted_mean;  // E[theta_t | y_{1:t-1}]
  std::vector<Matrix> predicted_cov;
  std::vector<Vector> filtered_mean;   // E[theta_t | y_{1:t}]
  std::vector<Matrix> filtered_cov;
  std::vector<Vector> innovation;      // y_t - E[y_t | y_{1:t-1}]
  std::vector<Matrix> innovation_cov;
  double loglik = 0.0;
};

struct SmoothedMoments {
  std::vector<Vector> mean;     // E[theta_t | y_{1:T}], t = 1..T
  std::vector<Matrix> cov;      // Var[theta_t | y_{1:T}]
  std::vector<Matrix> lag_cov;  // Cov(theta_t, theta_{t-1} | y_{1:T}); entry 0 pairs theta_1 with theta_0
  Vector initial_mean;          // E[theta_0 | y_{1:T}]
  Matrix initial_cov;
};

namespace detail {

inline void symmetrize(Matrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

inline void check_replicate(const ModelParams& params, const Matrix& y) {
  if (y.rows() != params.p()) throw DataError("replicate has wrong number of genes");
  if (y.cols() < 1) throw DataError("replicate has no time points");
}

}  // namespace detail

inline FilterResult filter(const ModelParams& params, const Matrix& y) {
  detail::check_replicate(params, y);
  const Index p = params.p(), k = params.k(), T = y.cols();
  const double log2pi = std::log(2.0 * std::numbers::pi);

  FilterResult out;
  out.predicted_mean.reserve(T);
  out.predicted_cov.reserve(T);
  out.filtered_mean.reserve(T);
  out.filtered_cov.reserve(T);
  out.innovation.reserve(T);
  out.innovation_cov.reserve(T);

  Vector m = Vector::Zero(k);
  Matrix P = params.Q0();
  Vector y_prev = Vector::Zero(p);
  const Matrix I_k = Matrix::Identity(k, k);

  for (Index t = 0; t < T; ++t) {
    Vector m_pred = params.F * m + params.A * y_prev;
    Matrix P_pred = params.F * P * params.F.transpose() + I_k;
    detail::symmetrize(P_pred);

    Vector v = y.col(t) - params.Z * m_pred - params.B * y_prev;
    Matrix S = params.Z * P_pred * params.Z.transpose();
    S.diagonal().array() += params.sigma2_xi;
    detail::symmetrize(S);

    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw NumericalError("filter: innovation covariance is not positive definite");
    const Vector Sinv_v = llt.solve(v);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.loglik += -0.5 * (static_cast<double>(p) * log2pi + logdet + v.dot(Sinv_v));

    // K = P_pred Z' S^{-1}
    const Matrix K = llt.solve(params.Z * P_pred).transpose();
    m = m_pred + K * v;
    const Matrix IKZ = I_k - K * params.Z;
    P = IKZ * P_pred * IKZ.transpose() + params.sigma2_xi * K * K.transpose();
    detail::symmetrize(P);

    out.predicted_mean.push_back(std::move(m_pred));
    out.predicted_cov.push_back(std::move(P_pred));
    out.filtered_mean.push_back(m);
    out.filtered_cov.push_back(P);
    out.innovation.push_back(std::move(v));
    out.innovation_cov.push_back(std::move(S));
    y_prev = y.col(t);
  }
  if (!std::isfinite(out.loglik)) throw NumericalError("filter: non-finite log-likelihood");
  return out;
}

inline SmoothedMoments smooth(const ModelParams& params, const Matrix& y, const FilterResult& f) {
  detail::check_replicate(params, y);
  const Index T = y.cols();
  if (static_cast<Index>(f.filtered_mean.size()) != T)
    throw DataError("smooth: filter result does not match replicate length");

  SmoothedMoments s;
  s.mean.resize(T);
  s.cov.resize(T);
  s.lag_cov.resize(T);
  s.mean[T - 1] = f.filtered_mean[T - 1];
  s.cov[T - 1] = f.filtered_cov[T - 1];

  // Gain J = P_prev F' P_pred^{-1}; returned as J.
  auto gain = [&](const Matrix& P_prev, const Matrix& P_pred) -> Matrix {
    Eigen::LLT<Matrix> llt(P_pred);
    if (llt.info() != Eigen::Success)
      throw NumericalError("smooth: predicted covariance is not positive definite");
    return llt.solve(params.F * P_prev).transpose();
  };

  for (Index t = T - 1; t >= 1; --t) {
    const Matrix J = gain(f.filtered_cov[t - 1], f.predicted_cov[t]);
    s.mean[t - 1] = f.filtered_mean[t - 1] + J * (s.mean[t] - f.predicted_mean[t]);
    s.cov[t - 1] = f.filtered_cov[t - 1] + J * (s.cov[t] - f.predicted_cov[t]) * J.transpose();
    detail::symmetrize(s.cov[t - 1]);
    s.lag_cov[t] = s.cov[t] * J.transpose();
  }

  const Matrix Q0 = params.Q0();
  const Matrix J0 = gain(Q0, f.predicted_cov[0]);
  s.initial_mean = J0 * (s.mean[0] - f.predicted_mean[0]);
  s.initial_cov = Q0 + J0 * (s.cov[0] - f.predicted_cov[0]) * J0.transpose();
  detail::symmetrize(s.initial_cov);
  s.lag_cov[0] = s.cov[0] * J0.transpose();
  return s;
}

inline SmoothedMoments smooth(const ModelParams& params, const Matrix& y) {
  return smooth(params, y, filter(params, y));
}

/// Filter and smoother covariances. They do not depend on the data, so one
/// schedule serves every replicate of length T.
struct CovarianceSchedule {
  std::vector<Matrix> predicted_cov;        // P_{t|t-1}
  std::vector<Matrix> filtered_cov;         // P_{t|t}
  std::vector<Matrix> gain;                 // Kalman gain K_t, k x p
  std::vector<Matrix> innovation_precision; // S_t^{-1}
  std::vector<Matrix> smoother_gain;        // entry t is J_{t-1}; entry 0 is J_0 for theta_0
  std::vector<Matrix> smoothed_cov;
  std::vector<Matrix> lag_cov;
  Matrix initial_cov;
  double logdet_sum = 0.0;                  // sum_t log det S_t
};

inline CovarianceSchedule covariance_schedule(const ModelParams& params, Index T) {
  if (T < 1) throw DataError("covariance_schedule: T must be >= 1");
  const Index p = params.p(), k = params.k();
  const Matrix I_k = Matrix::Identity(k, k);
  const Matrix I_p = Matrix::Identity(p, p);
  CovarianceSchedule c;
  c.predicted_cov.resize(T);
  c.filtered_cov.resize(T);
  c.gain.resize(T);
  c.innovation_precision.resize(T);
  c.smoother_gain.resize(T);
  c.smoothed_cov.resize(T);
  c.lag_cov.resize(T);

  Matrix P = params.Q0();
  for (Index t = 0; t < T; ++t) {
    Matrix P_pred = params.F * P * params.F.transpose() + I_k;
    detail::symmetrize(P_pred);
    Matrix S = params.Z * P_pred * params.Z.transpose();
    S.diagonal().array() += params.sigma2_xi;
    detail::symmetrize(S);
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success)
      throw NumericalError("filter: innovation covariance is not positive definite");
    c.logdet_sum += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    c.innovation_precision[t] = llt.solve(I_p);
    detail::symmetrize(c.innovation_precision[t]);
    Matrix K = llt.solve(params.Z * P_pred).transpose();
    const Matrix IKZ = I_k - K * params.Z;
    P = IKZ * P_pred * IKZ.transpose() + params.sigma2_xi * K * K.transpose();
    detail::symmetrize(P);
    c.predicted_cov[t] = std::move(P_pred);
    c.filtered_cov[t] = P;
    c.gain[t] = std::move(K);
  }

  auto gain = [&](const Matrix& P_prev, const Matrix& P_pred) -> Matrix {
    Eigen::LLT<Matrix> llt(P_pred);
    if (llt.info() != Eigen::Success)
      throw NumericalError("smooth: predicted covariance is not positive definite");
    return llt.solve(params.F * P_prev).transpose();
  };
  c.smoothed_cov[T - 1] = c.filtered_cov[T - 1];
  for (Index t = T - 1; t >= 1; --t) {
    Matrix J = gain(c.filtered_cov[t - 1], c.predicted_cov[t]);
    c.smoothed_cov[t - 1] =
        c.filtered_cov[t - 1] + J * (c.smoothed_cov[t] - c.predicted_cov[t]) * J.transpose();
    detail::symmetrize(c.smoothed_cov[t - 1]);
    c.lag_cov[t] = c.smoothed_cov[t] * J.transpose();
    c.smoother_gain[t] = std::move(J);
  }
  const Matrix Q0 = params.Q0();
  Matrix J0 = gain(Q0, c.predicted_cov[0]);
  c.initial_cov = Q0 + J0 * (c.smoothed_cov[0] - c.predicted_cov[0]) * J0.transpose();
  detail::symmetrize(c.initial_cov);
  c.lag_cov[0] = c.smoothed_cov[0] * J0.transpose();
  c.smoother_gain[0] = std::move(J0);
  return c;
}

/// Smoothed state means for all replicates at once: column r of mean[t] is
/// E[theta_t | y^(r)_{1:T}].
struct BatchSmoothed {
  std::vector<Matrix> observed;  // y_t for every replicate, p x n_R
  std::vector<Matrix> mean;      // k x n_R per time point
  Matrix initial_mean;           // k x n_R
  double loglik = 0.0;
};

inline std::vector<Matrix> stack_by_time(const ExpressionDataset& data) {
  const Index p = data.genes(), T = data.time_points(), n = data.replicate_count();
  std::vector<Matrix> out(T, Matrix(p, n));
  for (Index r = 0; r < n; ++r) {
    const Matrix& y = data.replicate(r);
    for (Index t = 0; t < T; ++t) out[t].col(r) = y.col(t);
  }
  return out;
}

inline BatchSmoothed batch_smooth(const ModelParams& params, const CovarianceSchedule& c,
                                  std::vector<Matrix> observed) {
  const Index T = static_cast<Index>(observed.size());
  if (T < 1 || static_cast<Index>(c.gain.size()) != T)
    throw DataError("batch_smooth: schedule does not match series length");
  const Index p = params.p(), k = params.k(), n = observed.front().cols();
  const double log2pi = std::log(2.0 * std::numbers::pi);

  BatchSmoothed out;
  std::vector<Matrix> predicted(T), filtered(T);
  Matrix m = Matrix::Zero(k, n);
  Matrix y_prev = Matrix::Zero(p, n);
  double quad = 0.0;
  for (Index t = 0; t < T; ++t) {
    Matrix m_pred = params.F * m;
    m_pred.noalias() += params.A * y_prev;
    Matrix v = observed[t] - params.B * y_prev;
    v.noalias() -= params.Z * m_pred;
    quad += (v.array() * (c.innovation_precision[t] * v).array()).sum();
    m = m_pred;
    m.noalias() += c.gain[t] * v;
    predicted[t] = std::move(m_pred);
    filtered[t] = m;
    y_prev = observed[t];
  }
  out.loglik = -0.5 * (static_cast<double>(n) * (static_cast<double>(T * p) * log2pi + c.logdet_sum) + quad);
  if (!std::isfinite(out.loglik)) throw NumericalError("filter: non-finite log-likelihood");

  out.mean.resize(T);
  out.mean[T - 1] = filtered[T - 1];
  for (Index t = T - 1; t >= 1; --t) {
    out.mean[t - 1] = filtered[t - 1];
    out.mean[t - 1].noalias() += c.smoother_gain[t] * (out.mean[t] - predicted[t]);
  }
  out.initial_mean = c.smoother_gain[0] * (out.mean[0] - predicted[0]);
  out.observed = std::move(observed);
  return out;
}

/// Sum over replicates of the prediction-error log-likelihood.
inline double marginal_loglik(const ModelParams& params, const ExpressionDataset& data) {
  if (data.genes() != params.p()) throw DataError("marginal_loglik: gene count mismatch");
  const CovarianceSchedule c = covariance_schedule(params, data.time_points());
  return batch_smooth(params, c, stack_by_time(data)).loglik;
}

}  // namespace ssgrn

#endif  // SSGRN_KALMAN_HPP
