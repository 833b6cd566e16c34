#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstring>
#include <random>
#include <string>

#include "ssgrn/io.hpp"
#include "test_util.hpp"

using namespace ssgrn;

TEST_CASE("csv parsing", "[io]") {
  SECTION("two genes, two time points, one replicate") {
    const auto d = io::parse_csv(
        "gene,replicate,time,value\n"
        "g2,r1,2,4.5\n"
        "g1,r1,1,1.0\n"
        "g2,r1,1,3.25\n"
        "g1,r1,2,-2\n");
    REQUIRE(d.genes() == 2);
    REQUIRE(d.time_points() == 2);
    REQUIRE(d.replicate_count() == 1);
    CHECK(d.gene_names() == std::vector<std::string>{"g2", "g1"});
    Matrix expected(2, 2);
    expected << 3.25, 4.5, 1.0, -2.0;
    CHECK(d.replicate(0) == expected);
  }
  SECTION("times sort numerically, not lexically") {
    const auto d = io::parse_csv(
        "gene,replicate,time,value\n"
        "a,1,10,3\n"
        "a,1,2,2\n"
        "a,1,1,1\n");
    CHECK(d.replicate(0) == Matrix{{1.0, 2.0, 3.0}});
  }
  SECTION("missing cell names the gene, time and replicate") {
    try {
      io::parse_csv(
          "gene,replicate,time,value\n"
          "a,r1,1,1\na,r1,2,1\nb,r1,1,1\nb,r1,2,1\n"
          "a,r2,1,1\na,r2,2,1\nb,r2,1,1\n");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("gene=b") != std::string::npos);
      CHECK(msg.find("time=2") != std::string::npos);
      CHECK(msg.find("replicate=r2") != std::string::npos);
    }
  }
  SECTION("malformed input") {
    CHECK_THROWS_AS(io::parse_csv(""), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,rep,time,value\na,1,1,1\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,replicate,time,value\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,replicate,time,value\na,1,1,x\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,replicate,time,value\na,1,t,1\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,replicate,time,value\na,1,1\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,replicate,time,value\na,1,1,1\na,1,1,2\n"), DataError);
    CHECK_THROWS_AS(io::parse_csv("gene,replicate,time,value\na,1,1,nan\n"), DataError);
  }
  SECTION("CRLF and blank lines") {
    const auto d = io::parse_csv("gene,replicate,time,value\r\n\r\na,1,1,5\r\n");
    CHECK(d.replicate(0)(0, 0) == 5.0);
  }
}

TEST_CASE("csv export then ingest is the identity", "[io][property]") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = 1 + trial % 4, T = 1 + trial % 5, n = 1 + trial % 3;
    std::vector<std::string> names;
    for (Index g = 0; g < p; ++g) names.push_back("gene_" + std::to_string(g));
    std::vector<Matrix> reps;
    for (Index r = 0; r < n; ++r) reps.push_back(testutil::random_matrix(p, T, rng) * 1e3);
    const ExpressionDataset d(names, reps);
    CHECK(io::parse_csv(io::to_csv(d)) == d);
  }
}

TEST_CASE("parameter json", "[io]") {
  std::mt19937_64 rng(5);
  const ModelParams m = testutil::random_params(3, 2, rng);
  const Dims dims{3, 2, 7, 4};
  FitResult fit{m, {-10.0, -9.5, -9.25}, 2, true};
  const io::ParamsDocument doc{m, dims, {"x", "y", "z"}, fit};

  const auto j = io::params_to_json(doc);
  CHECK(j.at("format") == "ssgrn-params/1");
  CHECK(j.at("Z").at("rows") == 3);
  CHECK(j.at("Z").at("cols") == 2);
  CHECK(j.at("fit").at("iterations") == 2);
  CHECK(j.at("fit").at("loglik_trace").size() == 3);

  const auto back = io::params_from_json(nlohmann::json::parse(io::params_to_string(doc)));
  CHECK(back.dims.T == 7);
  CHECK(back.dims.n_R == 4);
  CHECK(back.gene_names == doc.gene_names);
  CHECK(testutil::rel_err(back.params.F, m.F) < 1e-9);
  CHECK(testutil::rel_err(back.params.A, m.A) < 1e-9);
  CHECK(testutil::rel_err(back.params.Z, m.Z) < 1e-9);
  CHECK(testutil::rel_err(back.params.B, m.B) < 1e-9);
  CHECK(testutil::rel_err(back.params.sigma2_xi, m.sigma2_xi) < 1e-9);
  CHECK(testutil::rel_err(Matrix(back.params.q0_diag), Matrix(m.q0_diag)) < 1e-9);

  SECTION("serialisation is stable") {
    REQUIRE(back.fit.has_value());
    CHECK(back.fit->iterations == 2);
    CHECK(back.fit->converged);
    CHECK(io::params_to_string(back) == io::params_to_string(doc));
  }
  SECTION("shape errors") {
    auto bad = j;
    bad["Z"]["rows"] = 2;
    CHECK_THROWS_AS(io::params_from_json(bad), DataError);
    bad = j;
    bad.erase("B");
    CHECK_THROWS_AS(io::params_from_json(bad), DataError);
    bad = j;
    bad["sigma2_xi"] = -1.0;
    CHECK_THROWS_AS(io::params_from_json(bad), DataError);
  }
}

TEST_CASE("format_number", "[io]") {
  CHECK(io::format_number(-0.0) == "0");
  CHECK(io::format_number(0.1) == "0.1");
  CHECK(io::format_number(1.0 / 3.0) == "0.3333333333");
  CHECK(io::round_significant(1.0 / 3.0) == 0.3333333333);
}

namespace {

std::vector<EdgeDecision> sample_decisions(Index p, Index k) {
  ModelParams m = ModelParams::zeros(p, k);
  std::mt19937_64 rng(9);
  m = testutil::random_params(p, k, rng);
  const GenomicGraphMatrix g = GenomicGraphMatrix::assemble(m);
  std::vector<Matrix> samples;
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int b = 0; b < 40; ++b) {
    Matrix s = g.matrix();
    for (Index i = 0; i < s.size(); ++i) s.data()[i] += noise(rng);
    samples.push_back(s);
  }
  return confidence_intervals(samples, g, 0.9);
}

}  // namespace

TEST_CASE("edge table", "[io]") {
  const Index p = 3, k = 2;
  const auto decisions = sample_decisions(p, k);
  const auto nodes = network_nodes({"a", "b", "c"}, k);
  const std::string tsv = io::edges_to_tsv(decisions, nodes);

  SECTION("layout") {
    CHECK(tsv.rfind(io::kEdgeHeader, 0) == 0);
    const auto lines = std::count(tsv.begin(), tsv.end(), '\n');
    CHECK(lines == 1 + (p + k) * (p + k));
    // Second row is entry (0, 1): source b, target a, block B.
    const auto second = tsv.substr(tsv.find('\n', std::strlen(io::kEdgeHeader)) + 1);
    CHECK(second.rfind("b\ta\tB\t", 0) == 0);
  }
  SECTION("round trip") {
    const auto table = io::parse_edges_tsv(tsv);
    CHECK(table.p == p);
    CHECK(table.k() == k);
    CHECK(table.gene_names() == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(table.decisions.size() == decisions.size());
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      CHECK(table.decisions[i].row == decisions[i].row);
      CHECK(table.decisions[i].col == decisions[i].col);
      CHECK(table.decisions[i].block == decisions[i].block);
      CHECK(table.decisions[i].significant == decisions[i].significant);
      CHECK(table.decisions[i].lower == Catch::Approx(decisions[i].lower).epsilon(1e-9));
    }
    CHECK(io::edges_to_tsv(table.decisions, table.nodes) == tsv);
  }
  SECTION("rejects tables that are not square") {
    const auto cut = tsv.substr(0, tsv.rfind('\n', tsv.size() - 2) + 1);
    CHECK_THROWS_AS(io::parse_edges_tsv(cut), DataError);
    CHECK_THROWS_AS(io::parse_edges_tsv("nope\n"), DataError);
  }
}

TEST_CASE("dot export", "[io]") {
  std::vector<EdgeDecision> d;
  const Index n = 3;  // two genes, one regulator
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) d.push_back({i, j, Block::B, 0.0, -1.0, 1.0, false});
  auto set = [&](Index i, Index j, Block b, double est) {
    auto& e = d[static_cast<std::size_t>(i * n + j)];
    e = {i, j, b, est, est - 0.1, est + 0.1, true};
  };
  set(0, 2, Block::Z, 0.7);   // TF1 -> g1, activation
  set(1, 2, Block::Z, -0.4);  // TF1 -> g2, repression
  set(0, 1, Block::B, 0.3);   // g2 -> g1
  const NetworkGraph g = significant_network(d, {"g1", "g2"}, 1);
  REQUIRE(g.edges.size() == 3);

  const std::string dot = io::network_to_dot(g);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("\"TF1\" -> \"g1\" [style=solid") != std::string::npos);
  CHECK(dot.find("\"TF1\" -> \"g2\" [style=dashed") != std::string::npos);
  CHECK(dot.find("\"g2\" -> \"g1\" [style=solid") != std::string::npos);
  CHECK(dot.find("\"TF1\" [style=solid, fillcolor=white]") != std::string::npos);
  CHECK(dot.find("\"g1\" [style=filled") != std::string::npos);

  const std::string hubs = io::network_to_dot(g, 2);
  CHECK(hubs.find("\"TF1\" -> \"g1\"") != std::string::npos);
  CHECK(hubs.find("\"g2\" -> \"g1\"") == std::string::npos);

  const auto ranking = out_degree_ranking(g);
  CHECK(ranking.front() == std::pair<std::string, Index>{"TF1", 2});
  CHECK(ranking[1] == std::pair<std::string, Index>{"g2", 1});
  CHECK(ranking[2] == std::pair<std::string, Index>{"g1", 0});
}

TEST_CASE("selection and metrics tables", "[io]") {
  SelectionReport r;
  r.entries.push_back({0, -50.0, 4, 40, 109.1, true, 3});
  r.entries.push_back({1, -45.0, 9, 40, 114.0, true, 20});
  r.chosen_k = 0;
  CHECK(io::selection_to_tsv(r) ==
        "k\tloglik\tP\tN\taicc\tconverged\titerations\tchosen\n"
        "0\t-50\t4\t40\t109.1\t1\t3\t1\n"
        "1\t-45\t9\t40\t114\t1\t20\t0\n");

  RecoveryMetrics m;
  m.tp = 3;
  m.fp = 1;
  m.tn = 10;
  m.fn = 2;
  m.tpr = 0.6;
  m.fpr = 1.0 / 11.0;
  m.f1 = 2.0 / 3.0;
  CHECK(io::metrics_to_tsv(m) == "TP\tFP\tTN\tFN\tTPR\tFPR\tF1\n3\t1\t10\t2\t0.6\t0.09090909091\t0.6666666667\n");
}
