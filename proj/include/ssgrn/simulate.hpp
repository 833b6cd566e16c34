#ifndef SSGRN_SIMULATE_HPP
#define SSGRN_SIMULATE_HPP

// Synthetic replicated time courses drawn from the state-space model, random
// sparse ground-truth networks, and confusion-matrix scores for recovered
// edges.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ssgrn/errors.hpp"
#include "ssgrn/model.hpp"

namespace ssgrn {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Independent 64-bit stream for (seed, stream, tag).
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

struct GroundTruth {
  ModelParams params;
  Mask adjacency;  // (p+k) x (p+k), true where G is nonzero

  static GroundTruth from(ModelParams params) {
    const auto g = GenomicGraphMatrix::assemble(params);
    Mask adj = g.matrix().array().abs() > 0.0;
    return GroundTruth{std::move(params), std::move(adj)};
  }
};

struct SimulatedData {
  ExpressionDataset dataset;
  GroundTruth truth;
};

inline std::vector<std::string> default_gene_names(Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) names.push_back("g" + std::to_string(i + 1));
  return names;
}

/// Draws n_R replicates of length T. Replicate r uses its own stream derived
/// from (seed, r), so the output is a pure function of the arguments.
inline SimulatedData generate(const ModelParams& params, Index T, Index n_R, std::uint64_t seed,
                              std::vector<std::string> gene_names = {}) {
  params.validate();
  if (T < 2) throw DataError("generate: T must be >= 2");
  if (n_R < 1) throw DataError("generate: n_R must be >= 1");
  const Index p = params.p(), k = params.k();
  if (gene_names.empty()) gene_names = default_gene_names(p);

  const double obs_sd = std::sqrt(params.sigma2_xi);
  const Vector q0_sd = params.q0_diag.array().sqrt();
  std::vector<Matrix> reps;
  reps.reserve(static_cast<std::size_t>(n_R));
  for (Index r = 0; r < n_R; ++r) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(r), 0x5eed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](Index n) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) v[i] = normal(rng);
      return v;
    };
    Vector theta = q0_sd.cwiseProduct(draw(k));
    Vector y_prev = Vector::Zero(p);
    Matrix y(p, T);
    for (Index t = 0; t < T; ++t) {
      theta = params.F * theta + params.A * y_prev + draw(k);
      y.col(t) = params.Z * theta + params.B * y_prev + obs_sd * draw(p);
      y_prev = y.col(t);
    }
    reps.push_back(std::move(y));
  }
  return SimulatedData{ExpressionDataset(std::move(gene_names), std::move(reps)),
                       GroundTruth::from(params)};
}

struct GroundTruthOptions {
  double density = 0.3;          // probability an off-diagonal entry is nonzero
  double min_abs = 0.3;          // nonzero magnitudes ~ U[min_abs, max_abs], random sign
  double max_abs = 0.8;
  double diagonal = 0.5;         // diagonals of F and B
  double max_spectral_radius = 0.95;
  double rescaled_radius = 0.9;  // target radius when the limit is exceeded
  double sigma2_xi = 0.1;
  double q0_scale = 1.0;
  bool observable_regulators = true;  // every column of Z gets a nonzero entry
};

/// Transition matrix of the stacked process (theta_t, y_t):
/// [[F, A], [Z F, Z A + B]].
inline Matrix companion_matrix(const ModelParams& m) {
  const Index p = m.p(), k = m.k();
  Matrix c(k + p, k + p);
  c.topLeftCorner(k, k) = m.F;
  c.topRightCorner(k, p) = m.A;
  c.bottomLeftCorner(p, k) = m.Z * m.F;
  c.bottomRightCorner(p, p) = m.Z * m.A + m.B;
  return c;
}

inline double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Sparse random network. Scaling F, A and B by c scales the companion
/// matrix by c, so an unstable draw is shrunk to `rescaled_radius` without
/// changing its zero pattern.
inline ModelParams random_ground_truth(Index p, Index k, std::uint64_t seed,
                                       const GroundTruthOptions& opt = {}) {
  if (p < 1 || k < 0) throw DataError("random_ground_truth: bad dimensions");
  auto rng = make_stream(seed, 0, 0x6d0de1);
  std::bernoulli_distribution present(opt.density), positive(0.5);
  std::uniform_real_distribution<double> magnitude(opt.min_abs, opt.max_abs);
  auto entry = [&]() { return (positive(rng) ? 1.0 : -1.0) * magnitude(rng); };
  auto fill = [&](Matrix& m, bool diagonal) {
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) {
        if (diagonal && i == j)
          m(i, j) = opt.diagonal;
        else
          m(i, j) = present(rng) ? entry() : 0.0;
      }
  };

  ModelParams m = ModelParams::zeros(p, k);
  fill(m.B, true);
  fill(m.Z, false);
  fill(m.A, false);
  fill(m.F, true);
  if (opt.observable_regulators) {
    std::uniform_int_distribution<Index> row(0, p - 1);
    for (Index j = 0; j < k; ++j)
      if ((m.Z.col(j).array() == 0.0).all()) m.Z(row(rng), j) = entry();
  }
  m.sigma2_xi = opt.sigma2_xi;
  m.q0_diag = Vector::Constant(k, opt.q0_scale);

  const double rho = spectral_radius(companion_matrix(m));
  if (rho >= opt.max_spectral_radius) {
    const double c = opt.rescaled_radius / rho;
    m.F *= c;
    m.A *= c;
    m.B *= c;
  }
  return m;
}

struct RecoveryMetrics {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double tpr = 0.0, fpr = 0.0, f1 = 0.0;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

/// Confusion counts over the entries of G, optionally restricted to one block.
/// Undefined rates (empty denominators) are reported as 0.
inline RecoveryMetrics recovery_metrics(const Mask& truth, const Mask& inferred, Index p,
                                        std::optional<Block> only = std::nullopt) {
  if (truth.rows() != inferred.rows() || truth.cols() != inferred.cols())
    throw DataError("recovery_metrics: mask shapes differ");
  if (truth.rows() != truth.cols() || p < 1 || p > truth.rows())
    throw DataError("recovery_metrics: masks must be (p+k) x (p+k)");
  const GenomicGraphMatrix layout(Matrix::Zero(truth.rows(), truth.cols()), p);
  RecoveryMetrics r;
  for (Index i = 0; i < truth.rows(); ++i)
    for (Index j = 0; j < truth.cols(); ++j) {
      if (only && layout.block_of(i, j) != *only) continue;
      const bool t = truth(i, j), e = inferred(i, j);
      if (t && e) ++r.tp;
      else if (!t && e) ++r.fp;
      else if (!t && !e) ++r.tn;
      else ++r.fn;
    }
  const auto ratio = [](std::int64_t a, std::int64_t b) {
    return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  r.tpr = ratio(r.tp, r.tp + r.fn);
  r.fpr = ratio(r.fp, r.fp + r.tn);
  r.f1 = ratio(2 * r.tp, 2 * r.tp + r.fp + r.fn);
  return r;
}

}  // namespace ssgrn

#endif  // SSGRN_SIMULATE_HPP
