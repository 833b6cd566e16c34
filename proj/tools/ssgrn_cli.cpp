// ssgrn: batch command-line front end.
//
//   ssgrn simulate       --p --k --T --nr --seed --out DIR      data.csv + truth.json
//   ssgrn fit            --input CSV --k                        parameter JSON
//   ssgrn select-k       --input CSV --k-range a..b             selection TSV
//   ssgrn bootstrap      --input CSV --k --nb --level --seed    edge TSV
//   ssgrn export-network --input EDGES.tsv                      DOT
//   ssgrn eval           --truth JSON --input EDGES.tsv|JSON    metrics TSV
//
// Results go to --out (a file; a directory for simulate) or stdout.
// Failures print one line "error\t<kind>\t<message>" on stderr and exit with
// 1 (usage), 2 (data) or 3 (numerical).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ssgrn/io.hpp"
#include "ssgrn/ssgrn.hpp"

namespace {

using namespace ssgrn;
namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input;
  std::string truth;
  std::string out;
  Index k = 1;
  std::string k_range = "0..4";
  int max_iter = 500;
  double tol = 1e-6;
  int nb = 200;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string block = "all";
  unsigned threads = 1;
  // simulate
  Index p = 2;
  Index T = 10;
  Index nr = 50;
  double sigma2 = 0.1;
  double density = 0.3;
  // export-network
  Index min_out_degree = 0;
};

void emit(const Options& o, const std::string& content) {
  if (o.out.empty() || o.out == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    io::detail::write_file(o.out, content);
  }
}

FitConfig fit_config(const Options& o) {
  if (o.max_iter < 1) throw UsageError("--max-iter must be >= 1");
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");
  FitConfig cfg;
  cfg.max_iter = o.max_iter;
  cfg.tol = o.tol;
  cfg.seed = o.seed;
  return cfg;
}

std::vector<Index> parse_k_range(const std::string& s) {
  static const std::regex range(R"(\s*(\d+)\s*\.\.\s*(\d+)\s*)");
  std::smatch m;
  std::vector<Index> ks;
  if (std::regex_match(s, m, range)) {
    const Index a = std::stol(m[1]), b = std::stol(m[2]);
    if (a > b) throw UsageError("--k-range: empty range " + s);
    for (Index k = a; k <= b; ++k) ks.push_back(k);
    return ks;
  }
  // Comma-separated list.
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(',', start);
    const std::string item = s.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      ks.push_back(v);
    } catch (const std::logic_error&) {
      throw UsageError("--k-range: expected a..b or a comma list, got '" + s + "'");
    }
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return ks;
}

std::optional<Block> block_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  if (auto b = parse_block(s)) return b;
  throw UsageError("--block must be one of all, B, Z, A, F");
}

Mask nonzero_mask(const ModelParams& m) {
  return GenomicGraphMatrix::assemble(m).matrix().array().abs() > 0.0;
}

int run_simulate(const Options& o) {
  if (o.out.empty()) throw UsageError("simulate: --out DIR is required");
  if (o.p < 1 || o.k < 0 || o.T < 2 || o.nr < 1) throw UsageError("simulate: need p >= 1, k >= 0, T >= 2, nr >= 1");
  GroundTruthOptions gopt;
  gopt.sigma2_xi = o.sigma2;
  gopt.density = o.density;
  const ModelParams truth = random_ground_truth(o.p, o.k, o.seed, gopt);
  const SimulatedData sim = generate(truth, o.T, o.nr, o.seed);
  fs::create_directories(o.out);
  io::export_csv(sim.dataset, (fs::path(o.out) / "data.csv").string());
  io::ParamsDocument doc{truth, sim.dataset.dims(o.k), sim.dataset.gene_names(), std::nullopt};
  io::detail::write_file((fs::path(o.out) / "truth.json").string(), io::params_to_string(doc));
  return kOk;
}

int run_fit(const Options& o) {
  const ExpressionDataset data = io::ingest_csv(o.input);
  const FitResult r = fit(data, o.k, fit_config(o));
  io::ParamsDocument doc{r.params, data.dims(o.k), data.gene_names(), r};
  emit(o, io::params_to_string(doc));
  return kOk;
}

int run_select(const Options& o) {
  const ExpressionDataset data = io::ingest_csv(o.input);
  const SelectionReport r = select_k(data, parse_k_range(o.k_range), fit_config(o));
  emit(o, io::selection_to_tsv(r));
  return kOk;
}

int run_bootstrap(const Options& o) {
  if (o.nb < 2) throw UsageError("--nb must be >= 2");
  if (!(o.level > 0.0 && o.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  const ExpressionDataset data = io::ingest_csv(o.input);
  BootstrapConfig cfg;
  cfg.n_boot = o.nb;
  cfg.seed = o.seed;
  cfg.fit = fit_config(o);
  cfg.threads = o.threads;
  const BootstrapDistribution dist = bootstrap_fit(data, o.k, cfg);
  const auto decisions = confidence_intervals(dist, o.level);
  emit(o, io::edges_to_tsv(decisions, network_nodes(data.gene_names(), o.k)));
  return kOk;
}

int run_export(const Options& o) {
  const io::EdgeTable table = io::read_edges(o.input);
  const NetworkGraph g = significant_network(table.decisions, table.gene_names(), table.k());
  emit(o, io::network_to_dot(g, o.min_out_degree));
  return kOk;
}

int run_eval(const Options& o) {
  if (o.truth.empty()) throw UsageError("eval: --truth is required");
  const io::ParamsDocument truth = io::read_params(o.truth);
  const Mask truth_mask = nonzero_mask(truth.params);
  Mask inferred;
  if (fs::path(o.input).extension() == ".json") {
    inferred = nonzero_mask(io::read_params(o.input).params);
  } else {
    const io::EdgeTable table = io::read_edges(o.input);
    if (table.p != truth.dims.p) throw DataError("eval: gene count differs between truth and edges");
    inferred = significance_mask(table.decisions, static_cast<Index>(table.nodes.size()));
  }
  const RecoveryMetrics m = recovery_metrics(truth_mask, inferred, truth.dims.p, block_filter(o.block));
  emit(o, io::metrics_to_tsv(m));
  return kOk;
}

int fail(ExitCode code, const char* kind, const std::string& msg) {
  std::string flat = msg;
  for (char& c : flat)
    if (c == '\n' || c == '\t') c = ' ';
  std::cerr << "error\t" << kind << '\t' << flat << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"State-space inference of gene regulatory networks"};
  app.require_subcommand(1);

  auto add_fit_flags = [&](CLI::App* c) {
    c->add_option("--max-iter", o.max_iter, "EM iteration limit")->capture_default_str();
    c->add_option("--tol", o.tol, "relative log-likelihood tolerance")->capture_default_str();
    c->add_option("--seed", o.seed, "master seed")->capture_default_str();
  };

  auto* sim = app.add_subcommand("simulate", "draw a random network and replicated time courses");
  sim->add_option("--p", o.p, "genes")->capture_default_str();
  sim->add_option("--k", o.k, "hidden regulators")->capture_default_str();
  sim->add_option("--T", o.T, "time points")->capture_default_str();
  sim->add_option("--nr", o.nr, "replicates")->capture_default_str();
  sim->add_option("--sigma2", o.sigma2, "observation noise variance")->capture_default_str();
  sim->add_option("--density", o.density, "off-diagonal edge probability")->capture_default_str();
  sim->add_option("--seed", o.seed, "seed")->capture_default_str();
  sim->add_option("--out", o.out, "output directory")->required();

  auto* fitc = app.add_subcommand("fit", "fit the model by EM");
  fitc->add_option("--input", o.input, "long-format CSV")->required()->check(CLI::ExistingFile);
  fitc->add_option("--k", o.k, "hidden dimension")->required();
  fitc->add_option("--out", o.out, "parameter JSON (default stdout)");
  add_fit_flags(fitc);

  auto* sel = app.add_subcommand("select-k", "choose the hidden dimension by AICc");
  sel->add_option("--input", o.input, "long-format CSV")->required()->check(CLI::ExistingFile);
  sel->add_option("--k-range", o.k_range, "a..b or comma list")->capture_default_str();
  sel->add_option("--out", o.out, "report TSV (default stdout)");
  add_fit_flags(sel);

  auto* boot = app.add_subcommand("bootstrap", "bootstrap confidence intervals for every entry of G");
  boot->add_option("--input", o.input, "long-format CSV")->required()->check(CLI::ExistingFile);
  boot->add_option("--k", o.k, "hidden dimension")->required();
  boot->add_option("--nb", o.nb, "bootstrap samples")->capture_default_str();
  boot->add_option("--level", o.level, "confidence level")->capture_default_str();
  boot->add_option("--threads", o.threads, "worker threads")->capture_default_str();
  boot->add_option("--out", o.out, "edge TSV (default stdout)");
  add_fit_flags(boot);

  auto* exp = app.add_subcommand("export-network", "write the significant network as DOT");
  exp->add_option("--input", o.input, "edge TSV from bootstrap")->required()->check(CLI::ExistingFile);
  exp->add_option("--min-out-degree", o.min_out_degree, "keep edges from nodes with this many out-edges")
      ->capture_default_str();
  exp->add_option("--out", o.out, "DOT file (default stdout)");

  auto* ev = app.add_subcommand("eval", "score inferred edges against a ground truth");
  ev->add_option("--truth", o.truth, "truth JSON from simulate")->required()->check(CLI::ExistingFile);
  ev->add_option("--input", o.input, "edge TSV or parameter JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--block", o.block, "all, B, Z, A or F")->capture_default_str();
  ev->add_option("--out", o.out, "metrics TSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kUsage, "usage", e.what());
  }

  try {
    if (*sim) return run_simulate(o);
    if (*fitc) return run_fit(o);
    if (*sel) return run_select(o);
    if (*boot) return run_bootstrap(o);
    if (*exp) return run_export(o);
    if (*ev) return run_eval(o);
    return fail(kUsage, "usage", "no subcommand");
  } catch (const UsageError& e) {
    return fail(kUsage, "usage", e.what());
  } catch (const NumericalError& e) {
    return fail(kNumerical, "numerical", e.what());
  } catch (const DataError& e) {
    return fail(kData, "data", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kData, "data", e.what());
  } catch (const std::exception& e) {
    return fail(kNumerical, "internal", e.what());
  }
}
