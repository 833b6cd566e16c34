#ifndef SSGRN_BOOTSTRAP_HPP
#define SSGRN_BOOTSTRAP_HPP

// Replicate-resampling bootstrap of the EM estimate, percentile confidence
// intervals for every entry of G, and the directed network of entries whose
// interval excludes zero.

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ssgrn/em.hpp"
#include "ssgrn/errors.hpp"
#include "ssgrn/model.hpp"
#include "ssgrn/simulate.hpp"

namespace ssgrn {

inline std::vector<Index> resample_indices(Index n_R, std::uint64_t seed) {
  if (n_R < 1) throw DataError("resample: need at least one replicate");
  auto rng = make_stream(seed, 0, 0xb007);
  std::uniform_int_distribution<Index> pick(0, n_R - 1);
  std::vector<Index> idx(static_cast<std::size_t>(n_R));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

/// n_R replicates drawn uniformly with replacement.
inline ExpressionDataset resample(const ExpressionDataset& data, std::uint64_t seed) {
  std::vector<Matrix> reps;
  reps.reserve(static_cast<std::size_t>(data.replicate_count()));
  for (Index i : resample_indices(data.replicate_count(), seed)) reps.push_back(data.replicate(i));
  return ExpressionDataset(data.gene_names(), std::move(reps));
}

namespace detail {

// Minimum-cost perfect assignment (Hungarian method, O(n^3)).
// Returns assign[row] = column.
inline std::vector<Index> min_cost_assignment(const Matrix& cost) {
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> match(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const Index i0 = match[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assign(n, 0);
  for (Index j = 1; j <= n; ++j) assign[match[j] - 1] = j - 1;
  return assign;
}

}  // namespace detail

/// Relabels the hidden states of `m` by the signed permutation whose Z
/// columns best match those of `reference` (maximal total |cosine|).
/// The likelihood is unchanged by this transformation.
inline ModelParams align_hidden_states(const ModelParams& m, const ModelParams& reference) {
  const Index k = m.k();
  if (reference.k() != k || reference.p() != m.p())
    throw DataError("align_hidden_states: dimension mismatch");
  if (k == 0) return m;

  Matrix cosine(k, k);  // (reference column i, candidate column j)
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      const double denom = reference.Z.col(i).norm() * m.Z.col(j).norm();
      cosine(i, j) = denom > 0.0 ? reference.Z.col(i).dot(m.Z.col(j)) / denom : 0.0;
    }
  const std::vector<Index> assign = detail::min_cost_assignment(-cosine.cwiseAbs());

  // New state i is s_i * old state assign[i]: theta* = P theta.
  Matrix P = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) P(i, assign[i]) = cosine(i, assign[i]) < 0.0 ? -1.0 : 1.0;

  ModelParams out = m;
  out.F = P * m.F * P.transpose();
  out.A = P * m.A;
  out.Z = m.Z * P.transpose();
  out.q0_diag = (P.cwiseAbs() * m.q0_diag).eval();
  return out;
}

struct BootstrapConfig {
  int n_boot = 200;
  std::uint64_t seed = 0;
  FitConfig fit;
  unsigned threads = 1;
  double max_failure_fraction = 0.2;
};

struct BootstrapDistribution {
  Index p = 0;
  Index k = 0;
  FitResult reference;
  std::vector<Matrix> samples;          // aligned G for each successful fit
  std::vector<std::uint64_t> seeds;     // per-sample seed, all N_b of them
  std::vector<bool> succeeded;          // parallel to seeds
  int failures = 0;

  GenomicGraphMatrix reference_graph() const {
    return GenomicGraphMatrix::assemble(reference.params);
  }
};

/// Seed of bootstrap sample b, derived from the master seed alone.
inline std::uint64_t bootstrap_sample_seed(std::uint64_t master, int b) {
  auto rng = make_stream(master, static_cast<std::uint64_t>(b), 0x5a4d);
  return rng();
}

namespace detail {

template <class Fn>
void parallel_for(int n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(n));
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

inline BootstrapDistribution bootstrap_fit(const ExpressionDataset& data, Index k,
                                           const BootstrapConfig& cfg = {}) {
  if (cfg.n_boot < 2) throw DataError("bootstrap: N_b must be >= 2");
  BootstrapDistribution dist;
  dist.p = data.genes();
  dist.k = k;
  dist.reference = fit(data, k, cfg.fit);

  const auto n = static_cast<std::size_t>(cfg.n_boot);
  dist.seeds.resize(n);
  for (int b = 0; b < cfg.n_boot; ++b) dist.seeds[b] = bootstrap_sample_seed(cfg.seed, b);

  std::vector<Matrix> graphs(n);
  std::vector<char> ok(n, 0);
  detail::parallel_for(cfg.n_boot, cfg.threads, [&](int b) {
    try {
      const ExpressionDataset sample = resample(data, dist.seeds[b]);
      const FitResult r = fit(sample, k, cfg.fit);
      const ModelParams aligned = align_hidden_states(r.params, dist.reference.params);
      graphs[b] = GenomicGraphMatrix::assemble(aligned).matrix();
      ok[b] = 1;
    } catch (const Error&) {
      ok[b] = 0;
    }
  });

  dist.succeeded.assign(n, false);
  for (std::size_t b = 0; b < n; ++b) {
    dist.succeeded[b] = ok[b] != 0;
    if (ok[b]) dist.samples.push_back(std::move(graphs[b]));
    else ++dist.failures;
  }
  if (dist.failures > cfg.max_failure_fraction * cfg.n_boot)
    throw NumericalError("bootstrap: " + std::to_string(dist.failures) + " of " +
                         std::to_string(cfg.n_boot) + " resampled fits failed");
  return dist;
}

/// Quantile by linear interpolation between order statistics:
/// h = (n - 1) q, x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct EdgeDecision {
  Index row = 0;  // target node
  Index col = 0;  // source node
  Block block = Block::B;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool significant = false;
};

/// Percentile intervals for every entry of G, row-major over (row, col).
inline std::vector<EdgeDecision> confidence_intervals(const std::vector<Matrix>& samples,
                                                      const GenomicGraphMatrix& reference,
                                                      double level) {
  if (!(level > 0.0 && level < 1.0)) throw DataError("confidence level must lie in (0, 1)");
  if (samples.size() < 2) throw DataError("confidence intervals need at least 2 samples");
  const Index n = reference.size();
  for (const auto& s : samples)
    if (s.rows() != n || s.cols() != n) throw DataError("bootstrap sample has wrong shape");

  const double alpha = 1.0 - level;
  std::vector<EdgeDecision> out;
  out.reserve(static_cast<std::size_t>(n * n));
  std::vector<double> values(samples.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      for (std::size_t b = 0; b < samples.size(); ++b) values[b] = samples[b](i, j);
      std::sort(values.begin(), values.end());
      EdgeDecision e;
      e.row = i;
      e.col = j;
      e.block = reference.block_of(i, j);
      e.estimate = reference.matrix()(i, j);
      e.lower = quantile_sorted(values, alpha / 2.0);
      e.upper = quantile_sorted(values, 1.0 - alpha / 2.0);
      e.significant = e.lower > 0.0 || e.upper < 0.0;
      out.push_back(e);
    }
  return out;
}

inline std::vector<EdgeDecision> confidence_intervals(const BootstrapDistribution& dist,
                                                      double level) {
  return confidence_intervals(dist.samples, dist.reference_graph(), level);
}

inline Mask significance_mask(const std::vector<EdgeDecision>& decisions, Index size) {
  Mask m = Mask::Constant(size, size, false);
  for (const auto& e : decisions) m(e.row, e.col) = e.significant;
  return m;
}

struct NetworkNode {
  std::string name;
  bool regulator = false;  // hidden state rather than gene
};

struct NetworkEdge {
  Index source = 0;
  Index target = 0;
  Block block = Block::B;
  double weight = 0.0;

  bool activation() const { return weight > 0.0; }
};

struct NetworkGraph {
  std::vector<NetworkNode> nodes;
  std::vector<NetworkEdge> edges;
};

inline std::string regulator_name(Index i) { return "TF" + std::to_string(i + 1); }

inline std::vector<NetworkNode> network_nodes(const std::vector<std::string>& gene_names, Index k) {
  std::vector<NetworkNode> nodes;
  for (const auto& g : gene_names) nodes.push_back({g, false});
  for (Index i = 0; i < k; ++i) nodes.push_back({regulator_name(i), true});
  return nodes;
}

/// One edge col -> row for every significant entry (row, col) of G.
inline NetworkGraph significant_network(const std::vector<EdgeDecision>& decisions,
                                        const std::vector<std::string>& gene_names, Index k) {
  NetworkGraph g;
  g.nodes = network_nodes(gene_names, k);
  const auto n = static_cast<Index>(g.nodes.size());
  if (static_cast<Index>(decisions.size()) != n * n)
    throw DataError("significant_network: decisions must cover every entry of G");
  for (const auto& e : decisions)
    if (e.significant) g.edges.push_back({e.col, e.row, e.block, e.estimate});
  return g;
}

/// Nodes by out-degree, highest first; ties in name order.
inline std::vector<std::pair<std::string, Index>> out_degree_ranking(const NetworkGraph& g) {
  std::vector<Index> degree(g.nodes.size(), 0);
  for (const auto& e : g.edges) ++degree[static_cast<std::size_t>(e.source)];
  std::vector<std::pair<std::string, Index>> ranking;
  ranking.reserve(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) ranking.emplace_back(g.nodes[i].name, degree[i]);
  std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return ranking;
}

}  // namespace ssgrn

#endif  // SSGRN_BOOTSTRAP_HPP
