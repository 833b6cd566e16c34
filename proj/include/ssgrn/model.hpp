#ifndef SSGRN_MODEL_HPP
#define SSGRN_MODEL_HPP

// Core value types shared by every stage of the pipeline: dataset
// dimensions, the replicated expression tensor, the state-space
// parameters and the block "genomic graph" matrix built from them.
//
// Model, for replicate r and t = 1..T (y_0 = 0, theta_0 ~ N(0, Q0)):
//
//   theta_t = F theta_{t-1} + A y_{t-1} + eta_t,   eta_t ~ N(0, I)
//   y_t     = Z theta_t     + B y_{t-1} + xi_t,    xi_t  ~ N(0, sigma2_xi I)

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssgrn/errors.hpp"

namespace ssgrn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Dims {
  Index p = 1;    // genes
  Index k = 0;    // hidden regulators
  Index T = 2;    // time points per replicate
  Index n_R = 1;  // replicates

  Index observation_count() const { return p * T * n_R; }
};

/// Number of free interaction parameters, p^2 + 2kp + k^2.
inline Index param_count(Index p, Index k) { return p * p + 2 * k * p + k * k; }
inline Index param_count(const Dims& d) { return param_count(d.p, d.k); }

/// p*T*n_R > p^2 + 2kp + k^2.
inline bool is_feasible(const Dims& d) {
  return d.p >= 1 && d.T >= 2 && d.n_R >= 1 && d.k >= 0 &&
         param_count(d) < d.observation_count();
}

namespace detail {

// floor(sqrt(n)) for n >= 0 without floating-point edge effects.
inline std::uint64_t isqrt(std::uint64_t n) {
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

}  // namespace detail

/// Largest k with 0 <= k < -p + sqrt(p*T*n_R), or nullopt when even k = 0
/// violates the bound. Evaluated exactly as (p + k)^2 < p*T*n_R.
inline std::optional<Index> max_hidden_k(Index p, Index T, Index n_R) {
  if (p < 1 || T < 1 || n_R < 1) throw DataError("max_hidden_k: p, T and n_R must be >= 1");
  const auto n = static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(T) *
                 static_cast<std::uint64_t>(n_R);
  const auto s = static_cast<Index>(detail::isqrt(n - 1));
  if (s < p) return std::nullopt;
  return s - p;
}

/// Replicated time-course expression data. Each replicate is a p x T matrix
/// whose column t-1 holds y_t.
class ExpressionDataset {
 public:
  ExpressionDataset() = default;

  ExpressionDataset(std::vector<std::string> gene_names, std::vector<Matrix> replicates)
      : gene_names_(std::move(gene_names)), replicates_(std::move(replicates)) {
    validate();
  }

  Index genes() const { return static_cast<Index>(gene_names_.size()); }
  Index time_points() const { return replicates_.empty() ? 0 : replicates_.front().cols(); }
  Index replicate_count() const { return static_cast<Index>(replicates_.size()); }

  Dims dims(Index k = 0) const { return Dims{genes(), k, time_points(), replicate_count()}; }

  const std::vector<std::string>& gene_names() const { return gene_names_; }
  const std::vector<Matrix>& replicates() const { return replicates_; }
  const Matrix& replicate(Index r) const { return replicates_[static_cast<std::size_t>(r)]; }

  // Zero-based gene, time and replicate.
  double value(Index gene, Index time, Index rep) const { return replicate(rep)(gene, time); }

  bool operator==(const ExpressionDataset& other) const {
    if (gene_names_ != other.gene_names_ || replicates_.size() != other.replicates_.size())
      return false;
    for (std::size_t r = 0; r < replicates_.size(); ++r)
      if (replicates_[r].rows() != other.replicates_[r].rows() ||
          replicates_[r].cols() != other.replicates_[r].cols() ||
          replicates_[r] != other.replicates_[r])
        return false;
    return true;
  }

 private:
  void validate() const {
    if (gene_names_.empty()) throw DataError("dataset has no genes");
    if (replicates_.empty()) throw DataError("dataset has no replicates");
    std::set<std::string_view> seen;
    for (const auto& g : gene_names_)
      if (!seen.insert(g).second) throw DataError("duplicate gene name: " + g);
    const Index T = replicates_.front().cols();
    if (T < 1) throw DataError("dataset has no time points");
    for (const auto& y : replicates_) {
      if (y.rows() != genes() || y.cols() != T)
        throw DataError("replicate shape does not match p x T");
      if (!y.allFinite()) throw DataError("dataset contains non-finite values");
    }
  }

  std::vector<std::string> gene_names_;
  std::vector<Matrix> replicates_;
};

/// phi = {F, A, Z, B, sigma2_xi} plus the fixed quantities (Q = I, Q0, a0 = 0).
struct ModelParams {
  Matrix F;  // k x k  regulator -> regulator, lag 1
  Matrix A;  // k x p  gene -> regulator, lag 1
  Matrix Z;  // p x k  regulator -> gene, same time point
  Matrix B;  // p x p  gene -> gene, lag 1
  double sigma2_xi = 1.0;
  Vector q0_diag;  // diagonal of Q0, length k

  static constexpr double sigma2_eta = 1.0;

  Index p() const { return B.rows(); }
  Index k() const { return F.rows(); }

  static ModelParams zeros(Index p, Index k) {
    return ModelParams{Matrix::Zero(k, k), Matrix::Zero(k, p), Matrix::Zero(p, k),
                       Matrix::Zero(p, p), 1.0, Vector::Ones(k)};
  }

  Matrix Q0() const { return q0_diag.asDiagonal(); }

  void validate() const {
    const Index p_ = p(), k_ = k();
    if (p_ < 1) throw DataError("ModelParams: p must be >= 1");
    if (B.cols() != p_ || F.cols() != k_ || A.rows() != k_ || A.cols() != p_ ||
        Z.rows() != p_ || Z.cols() != k_ || q0_diag.size() != k_)
      throw DataError("ModelParams: inconsistent block dimensions");
    if (!(sigma2_xi > 0.0) || !std::isfinite(sigma2_xi))
      throw DataError("ModelParams: sigma2_xi must be positive and finite");
    if (k_ > 0 && !(q0_diag.array() > 0.0).all())
      throw DataError("ModelParams: Q0 diagonal must be positive");
    if (!F.allFinite() || !A.allFinite() || !Z.allFinite() || !B.allFinite())
      throw DataError("ModelParams: non-finite matrix entry");
  }
};

enum class Block { B, Z, A, F };

inline constexpr std::string_view block_name(Block b) {
  switch (b) {
    case Block::B: return "B";
    case Block::Z: return "Z";
    case Block::A: return "A";
    case Block::F: return "F";
  }
  return "?";
}

inline std::optional<Block> parse_block(std::string_view s) {
  if (s == "B") return Block::B;
  if (s == "Z") return Block::Z;
  if (s == "A") return Block::A;
  if (s == "F") return Block::F;
  return std::nullopt;
}

/// G = [[B, Z], [A, F]]. Rows/columns [0, p) are genes, [p, p+k) regulators.
/// Entry (i, j) means "node j influences node i".
class GenomicGraphMatrix {
 public:
  GenomicGraphMatrix() = default;
  GenomicGraphMatrix(Matrix g, Index p) : g_(std::move(g)), p_(p) {
    if (g_.rows() != g_.cols() || p_ < 1 || p_ > g_.rows())
      throw DataError("GenomicGraphMatrix: bad shape");
  }

  static GenomicGraphMatrix assemble(const ModelParams& m) {
    const Index p = m.p(), k = m.k();
    Matrix g(p + k, p + k);
    g.topLeftCorner(p, p) = m.B;
    g.topRightCorner(p, k) = m.Z;
    g.bottomLeftCorner(k, p) = m.A;
    g.bottomRightCorner(k, k) = m.F;
    return {std::move(g), p};
  }

  /// Writes the four blocks back into a copy of `base` (noise terms kept).
  ModelParams disassemble(const ModelParams& base) const {
    ModelParams m = base;
    m.B = g_.topLeftCorner(p_, p_);
    m.Z = g_.topRightCorner(p_, k());
    m.A = g_.bottomLeftCorner(k(), p_);
    m.F = g_.bottomRightCorner(k(), k());
    return m;
  }

  ModelParams disassemble() const {
    ModelParams base = ModelParams::zeros(p_, k());
    return disassemble(base);
  }

  const Matrix& matrix() const { return g_; }
  Index p() const { return p_; }
  Index k() const { return g_.rows() - p_; }
  Index size() const { return g_.rows(); }

  bool is_gene(Index node) const { return node < p_; }

  Block block_of(Index row, Index col) const {
    const bool gene_row = is_gene(row), gene_col = is_gene(col);
    if (gene_row) return gene_col ? Block::B : Block::Z;
    return gene_col ? Block::A : Block::F;
  }

 private:
  Matrix g_;
  Index p_ = 0;
};

}  // namespace ssgrn

#endif  // SSGRN_MODEL_HPP
