#ifndef SSGRN_EM_HPP
#define SSGRN_EM_HPP

// Maximum-likelihood estimation of {F, A, Z, B, sigma2_xi} by EM.
//
// E-step: per-replicate Kalman smoothing, accumulated into expected
// cross-product sums. M-step: both equations are linear regressions on
// stacked regressors, solved from their block normal equations
//
//   [Z B] [[S_tt,  S_tly ], [S_lyt,  S_lyly]] = [S_yt,  S_yly ]
//   [F A] [[S_ltlt, S_ltly], [S_lylt, S_lyly]] = [S_tlt, S_tly ]
//
// using full second moments E[theta theta'] = V + m m', which makes the
// M-step exact and the likelihood trace monotone.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "ssgrn/errors.hpp"
#include "ssgrn/kalman.hpp"
#include "ssgrn/model.hpp"

namespace ssgrn {

inline constexpr double kSigma2Floor = 1e-12;

/// Sums over replicates r and t = 1..T of expected cross-products.
/// "lag" quantities refer to time t-1 (y_0 = 0, theta_0 smoothed).
struct SufficientStats {
  Matrix theta_theta;          // sum E[theta_t theta_t']            k x k
  Vector theta_sum;            // sum E[theta_t]                     k
  Matrix y_theta;              // sum y_t E[theta_t]'                p x k
  Matrix ylag_theta;           // sum y_{t-1} E[theta_t]'            p x k
  Matrix y_ylag;               // sum y_t y_{t-1}'                   p x p
  Matrix ylag_ylag;            // sum y_{t-1} y_{t-1}'               p x p
  Matrix y_y;                  // sum y_t y_t'                       p x p
  Matrix theta_thetalag;       // sum E[theta_t theta_{t-1}']        k x k
  Matrix thetalag_thetalag;    // sum E[theta_{t-1} theta_{t-1}']    k x k
  Matrix thetalag_ylag;        // sum E[theta_{t-1}] y_{t-1}'        k x p
  std::int64_t count = 0;      // number of (replicate, time) terms

  static SufficientStats zeros(Index p, Index k) {
    return SufficientStats{Matrix::Zero(k, k), Vector::Zero(k),    Matrix::Zero(p, k),
                           Matrix::Zero(p, k), Matrix::Zero(p, p), Matrix::Zero(p, p),
                           Matrix::Zero(p, p), Matrix::Zero(k, k), Matrix::Zero(k, k),
                           Matrix::Zero(k, p), 0};
  }

  Index p() const { return y_y.rows(); }
  Index k() const { return theta_theta.rows(); }

  /// sum E[theta_t] y_{t-1}'
  Matrix theta_ylag() const { return ylag_theta.transpose(); }

  SufficientStats& operator+=(const SufficientStats& o) {
    theta_theta += o.theta_theta;
    theta_sum += o.theta_sum;
    y_theta += o.y_theta;
    ylag_theta += o.ylag_theta;
    y_ylag += o.y_ylag;
    ylag_ylag += o.ylag_ylag;
    y_y += o.y_y;
    theta_thetalag += o.theta_thetalag;
    thetalag_thetalag += o.thetalag_thetalag;
    thetalag_ylag += o.thetalag_ylag;
    count += o.count;
    return *this;
  }

  friend SufficientStats operator+(SufficientStats a, const SufficientStats& b) { return a += b; }

  /// Gram matrix of the observation-equation regressors [theta_t; y_{t-1}].
  Matrix observation_gram() const {
    const Index kk = k(), pp = p();
    Matrix g(kk + pp, kk + pp);
    g.topLeftCorner(kk, kk) = theta_theta;
    g.topRightCorner(kk, pp) = ylag_theta.transpose();
    g.bottomLeftCorner(pp, kk) = ylag_theta;
    g.bottomRightCorner(pp, pp) = ylag_ylag;
    return g;
  }

  /// Cross-products of y_t with [theta_t; y_{t-1}].
  Matrix observation_cross() const {
    Matrix c(p(), k() + p());
    c << y_theta, y_ylag;
    return c;
  }

  /// Gram matrix of the state-equation regressors [theta_{t-1}; y_{t-1}].
  Matrix state_gram() const {
    const Index kk = k(), pp = p();
    Matrix g(kk + pp, kk + pp);
    g.topLeftCorner(kk, kk) = thetalag_thetalag;
    g.topRightCorner(kk, pp) = thetalag_ylag;
    g.bottomLeftCorner(pp, kk) = thetalag_ylag.transpose();
    g.bottomRightCorner(pp, pp) = ylag_ylag;
    return g;
  }

  /// Cross-products of theta_t with [theta_{t-1}; y_{t-1}].
  Matrix state_cross() const {
    Matrix c(k(), k() + p());
    c << theta_thetalag, theta_ylag();
    return c;
  }
};

/// Adds one replicate's contribution given its smoothed moments.
inline void accumulate(SufficientStats& st, const Matrix& y, const SmoothedMoments& s) {
  const Index T = y.cols(), p = y.rows();
  Vector y_prev = Vector::Zero(p);
  for (Index t = 0; t < T; ++t) {
    const auto yt = y.col(t);
    const Vector& m = s.mean[t];
    const Vector& m_prev = t == 0 ? s.initial_mean : s.mean[t - 1];
    const Matrix& V_prev = t == 0 ? s.initial_cov : s.cov[t - 1];

    st.theta_theta.noalias() += s.cov[t] + m * m.transpose();
    st.theta_sum += m;
    st.y_theta.noalias() += yt * m.transpose();
    st.ylag_theta.noalias() += y_prev * m.transpose();
    st.y_ylag.noalias() += yt * y_prev.transpose();
    st.ylag_ylag.noalias() += y_prev * y_prev.transpose();
    st.y_y.noalias() += yt * yt.transpose();
    st.theta_thetalag.noalias() += s.lag_cov[t] + m * m_prev.transpose();
    st.thetalag_thetalag.noalias() += V_prev + m_prev * m_prev.transpose();
    st.thetalag_ylag.noalias() += m_prev * y_prev.transpose();
    y_prev = yt;
  }
  st.count += T;
}

struct EStepResult {
  SufficientStats stats;
  double loglik = 0.0;
};

/// Adds every replicate's contribution from batched smoothed means and the
/// shared covariance schedule.
inline void accumulate(SufficientStats& st, const BatchSmoothed& b, const CovarianceSchedule& c) {
  const Index T = static_cast<Index>(b.observed.size());
  const Index p = st.p(), n = b.observed.front().cols();
  const double nd = static_cast<double>(n);
  const Matrix zero_lag = Matrix::Zero(p, n);
  for (Index t = 0; t < T; ++t) {
    const Matrix& yt = b.observed[t];
    const Matrix& y_prev = t == 0 ? zero_lag : b.observed[t - 1];
    const Matrix& m = b.mean[t];
    const Matrix& m_prev = t == 0 ? b.initial_mean : b.mean[t - 1];
    const Matrix& V_prev = t == 0 ? c.initial_cov : c.smoothed_cov[t - 1];

    st.theta_theta += nd * c.smoothed_cov[t];
    st.theta_theta.noalias() += m * m.transpose();
    st.theta_sum += m.rowwise().sum();
    st.y_theta.noalias() += yt * m.transpose();
    st.ylag_theta.noalias() += y_prev * m.transpose();
    st.y_ylag.noalias() += yt * y_prev.transpose();
    st.ylag_ylag.noalias() += y_prev * y_prev.transpose();
    st.y_y.noalias() += yt * yt.transpose();
    st.theta_thetalag += nd * c.lag_cov[t];
    st.theta_thetalag.noalias() += m * m_prev.transpose();
    st.thetalag_thetalag += nd * V_prev;
    st.thetalag_thetalag.noalias() += m_prev * m_prev.transpose();
    st.thetalag_ylag.noalias() += m_prev * y_prev.transpose();
  }
  st.count += T * n;
}

inline EStepResult estep(const ModelParams& params, const ExpressionDataset& data) {
  if (data.genes() != params.p()) throw DataError("estep: gene count mismatch");
  EStepResult out{SufficientStats::zeros(params.p(), params.k()), 0.0};
  const CovarianceSchedule c = covariance_schedule(params, data.time_points());
  const BatchSmoothed b = batch_smooth(params, c, stack_by_time(data));
  out.loglik = b.loglik;
  accumulate(out.stats, b, c);
  return out;
}

namespace detail {

// Solves W * gram = cross for W. gram must be symmetric positive definite.
inline Matrix solve_normal_equations(const Matrix& gram, const Matrix& cross, const char* what) {
  if (gram.rows() == 0) return Matrix::Zero(cross.rows(), 0);
  Eigen::LLT<Matrix> llt(0.5 * (gram + gram.transpose()));
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
    throw NumericalError(std::string("singular ") + what + " Gram matrix");
  return llt.solve(cross.transpose()).transpose();
}

// Expected residual sum of squares sum E||lhs_t - W x_t||^2 from second moments.
inline double expected_rss(double lhs_trace, const Matrix& W, const Matrix& gram,
                           const Matrix& cross) {
  return lhs_trace - 2.0 * (W.array() * cross.array()).sum() +
         (W.array() * (W * gram).array()).sum();
}

}  // namespace detail

/// Closed-form maximizer of the expected complete-data log-likelihood.
/// `base` supplies the fixed quantities (Q0).
inline ModelParams mstep(const SufficientStats& st, const ModelParams& base) {
  const Index p = st.p(), k = st.k();
  if (st.count <= 0) throw DataError("mstep: empty statistics");
  ModelParams out = base;

  const Matrix obs_gram = st.observation_gram();
  const Matrix obs_cross = st.observation_cross();
  const Matrix W_obs = detail::solve_normal_equations(obs_gram, obs_cross, "observation");
  out.Z = W_obs.leftCols(k);
  out.B = W_obs.rightCols(p);

  const double rss = detail::expected_rss(st.y_y.trace(), W_obs, obs_gram, obs_cross);
  out.sigma2_xi =
      std::max(rss / (static_cast<double>(p) * static_cast<double>(st.count)), kSigma2Floor);

  if (k > 0) {
    const Matrix W_state = detail::solve_normal_equations(st.state_gram(), st.state_cross(), "state");
    out.F = W_state.leftCols(k);
    out.A = W_state.rightCols(p);
  } else {
    out.F = Matrix::Zero(0, 0);
    out.A = Matrix::Zero(0, p);
  }
  return out;
}

inline ModelParams mstep(const SufficientStats& st) {
  return mstep(st, ModelParams::zeros(st.p(), st.k()));
}

/// Expected complete-data log-likelihood Q(params | stats), omitting the
/// theta_0 prior term, which does not depend on the estimated parameters.
inline double expected_complete_loglik(const SufficientStats& st, const ModelParams& params) {
  const Index p = st.p(), k = st.k();
  const double n = static_cast<double>(st.count);
  const double log2pi = std::log(2.0 * std::numbers::pi);

  Matrix W_obs(p, k + p);
  W_obs << params.Z, params.B;
  const double rss_obs =
      detail::expected_rss(st.y_y.trace(), W_obs, st.observation_gram(), st.observation_cross());
  double q = -0.5 * rss_obs / params.sigma2_xi -
             0.5 * n * static_cast<double>(p) * (log2pi + std::log(params.sigma2_xi));
  if (k > 0) {
    Matrix W_state(k, k + p);
    W_state << params.F, params.A;
    const double rss_state = detail::expected_rss(st.theta_theta.trace(), W_state,
                                                  st.state_gram(), st.state_cross());
    q += -0.5 * rss_state - 0.5 * n * static_cast<double>(k) * log2pi;
  }
  return q;
}

struct LagRegression {
  Matrix B;
  double residual_variance = 0.0;
};

/// Pooled least squares of y_t on y_{t-1} over t = 2..T and all replicates.
inline LagRegression lag_regression(const ExpressionDataset& data) {
  const Index p = data.genes();
  if (data.time_points() < 2) throw DataError("lag regression needs at least 2 time points");
  Matrix xx = Matrix::Zero(p, p), yx = Matrix::Zero(p, p);
  double yy = 0.0;
  Index pairs = 0;
  for (const auto& y : data.replicates()) {
    const auto cur = y.rightCols(y.cols() - 1);
    const auto lag = y.leftCols(y.cols() - 1);
    xx.noalias() += lag * lag.transpose();
    yx.noalias() += cur * lag.transpose();
    yy += cur.squaredNorm();
    pairs += cur.cols();
  }
  LagRegression out;
  out.B = detail::solve_normal_equations(xx, yx, "lag-regression");
  const double rss = detail::expected_rss(yy, out.B, xx, yx);
  out.residual_variance =
      std::max(rss / (static_cast<double>(p) * static_cast<double>(pairs)), kSigma2Floor);
  return out;
}

/// Deterministic starting point: F = I, Z = rectangular identity, A = 0, B and
/// sigma2_xi from the pooled lag-1 regression, Q0 = q0_scale * I.
inline ModelParams init(const ExpressionDataset& data, Index k, double q0_scale = 1.0) {
  const Index p = data.genes();
  if (k < 0) throw DataError("init: k must be non-negative");
  const LagRegression reg = lag_regression(data);
  ModelParams m;
  m.F = Matrix::Identity(k, k);
  m.A = Matrix::Zero(k, p);
  m.Z = Matrix::Identity(p, k);
  m.B = reg.B;
  m.sigma2_xi = reg.residual_variance;
  m.q0_diag = Vector::Constant(k, q0_scale);
  return m;
}

struct FitConfig {
  int max_iter = 500;
  double tol = 1e-6;
  // Recorded for reproducibility; the default initialisation is deterministic.
  std::uint64_t seed = 0;
  double q0_scale = 1.0;
};

struct FitResult {
  ModelParams params;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;

  double loglik() const { return loglik_trace.back(); }
};

/// Runs EM from `start`. The trace holds the marginal log-likelihood of the
/// starting point followed by one value per M-step; `params` matches the
/// last trace entry.
inline FitResult fit_from(const ExpressionDataset& data, ModelParams start, const FitConfig& cfg) {
  if (cfg.max_iter < 1) throw DataError("fit: max_iter must be >= 1");
  if (!(cfg.tol > 0.0)) throw DataError("fit: tol must be positive");
  start.validate();

  FitResult out;
  out.params = std::move(start);
  EStepResult e = estep(out.params, data);
  out.loglik_trace.push_back(e.loglik);

  for (int it = 1; it <= cfg.max_iter; ++it) {
    ModelParams next = mstep(e.stats, out.params);
    EStepResult e_next = estep(next, data);
    const double prev = e.loglik, cur = e_next.loglik;
    if (cur < prev - 1e-8 * (1.0 + std::abs(prev)))
      throw NumericalError("fit: log-likelihood decreased from " + std::to_string(prev) + " to " +
                           std::to_string(cur));
    out.params = std::move(next);
    e = std::move(e_next);
    out.loglik_trace.push_back(cur);
    out.iterations = it;
    if (std::abs(cur - prev) < cfg.tol * (1.0 + std::abs(cur))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

inline FitResult fit(const ExpressionDataset& data, Index k, const FitConfig& cfg = {}) {
  const Dims d = data.dims(k);
  if (!is_feasible(d))
    throw InfeasibleError("fit: " + std::to_string(param_count(d)) + " parameters need more than " +
                          std::to_string(d.observation_count()) + " observations");
  return fit_from(data, init(data, k, cfg.q0_scale), cfg);
}

}  // namespace ssgrn

#endif  // SSGRN_EM_HPP
