#ifndef SSGRN_SELECTION_HPP
#define SSGRN_SELECTION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ssgrn/em.hpp"
#include "ssgrn/errors.hpp"
#include "ssgrn/model.hpp"

namespace ssgrn {

inline double aic(double loglik, Index P) { return -2.0 * loglik + 2.0 * static_cast<double>(P); }

/// -2 loglik + 2 P N / (N - P - 1); requires N > P + 1.
inline double aicc(double loglik, Index N, Index P) {
  if (P < 0 || N <= P + 1)
    throw InfeasibleError("aicc: need N > P + 1 (N=" + std::to_string(N) +
                          ", P=" + std::to_string(P) + ")");
  const double n = static_cast<double>(N), q = static_cast<double>(P);
  return -2.0 * loglik + 2.0 * q * n / (n - q - 1.0);
}

struct SelectionEntry {
  Index k = 0;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  Index P = 0;
  Index N = 0;
  double aicc = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
};

struct SelectionReport {
  std::vector<SelectionEntry> entries;  // ascending k
  Index chosen_k = 0;
};

/// Fits every feasible candidate and picks the AICc minimizer among
/// converged fits; ties go to the smaller k. Candidates violating the
/// hidden-dimension bound are dropped.
inline SelectionReport select_k(const ExpressionDataset& data, std::vector<Index> ks,
                                const FitConfig& cfg = {}) {
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const auto k_max = max_hidden_k(data.genes(), data.time_points(), data.replicate_count());
  const Index N = data.dims().observation_count();

  SelectionReport report;
  for (Index k : ks) {
    if (k < 0 || !k_max || k > *k_max) continue;
    const Index P = param_count(data.genes(), k);
    if (N <= P + 1) continue;
    SelectionEntry e;
    e.k = k;
    e.P = P;
    e.N = N;
    try {
      const FitResult r = fit(data, k, cfg);
      e.loglik = r.loglik();
      e.aicc = aicc(e.loglik, N, P);
      e.converged = r.converged;
      e.iterations = r.iterations;
    } catch (const NumericalError&) {
      // Reported with NaN scores and never chosen.
    }
    report.entries.push_back(e);
  }
  if (report.entries.empty()) throw InfeasibleError("select_k: no feasible candidate k");

  auto pick = [&](bool require_converged) -> const SelectionEntry* {
    const SelectionEntry* best = nullptr;
    for (const auto& e : report.entries) {
      if (!std::isfinite(e.aicc) || (require_converged && !e.converged)) continue;
      if (!best || e.aicc < best->aicc) best = &e;
    }
    return best;
  };
  const SelectionEntry* best = pick(true);
  if (!best) best = pick(false);
  if (!best) throw NumericalError("select_k: every candidate fit failed");
  report.chosen_k = best->k;
  return report;
}

}  // namespace ssgrn

#endif  // SSGRN_SELECTION_HPP
