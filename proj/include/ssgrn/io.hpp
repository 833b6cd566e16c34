#ifndef SSGRN_IO_HPP
#define SSGRN_IO_HPP

// File formats used by the command-line tool:
//   expression data   long CSV  gene,replicate,time,value
//   parameters        JSON      dims header + named row-major matrix blocks
//   edge decisions    TSV       source target block estimate lower upper significant
//   selection report  TSV
//   recovery metrics  TSV
//   network           DOT
// Result files print numbers with 10 significant digits so that repeated
// runs are byte-identical. Expression CSV uses 17 digits so that
// export -> ingest is exact.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ssgrn/bootstrap.hpp"
#include "ssgrn/em.hpp"
#include "ssgrn/errors.hpp"
#include "ssgrn/model.hpp"
#include "ssgrn/selection.hpp"
#include "ssgrn/simulate.hpp"

namespace ssgrn::io {

using json = nlohmann::json;

inline std::string format_number(double x, int digits = 10) {
  if (x == 0.0) return "0";  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

inline double round_significant(double x, int digits = 10) {
  return std::stod(format_number(x, digits));
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace detail

// ---------------------------------------------------------------- CSV

/// Parses long-format expression data. Genes and replicates are ordered by
/// first appearance, time points by numeric value. The grid must be complete.
inline ExpressionDataset parse_csv(std::string_view text) {
  std::vector<std::string> genes, reps;
  std::unordered_map<std::string, Index> gene_ix, rep_ix;
  std::map<double, std::string> times;  // value -> label as written
  struct Cell {
    Index gene, rep;
    double time, value;
  };
  std::vector<Cell> cells;

  std::size_t line_no = 0, pos = 0;
  bool header_seen = false;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (!header_seen) {
      if (f.size() != 4 || f[0] != "gene" || f[1] != "replicate" || f[2] != "time" || f[3] != "value")
        throw DataError(where + "expected header gene,replicate,time,value");
      header_seen = true;
      continue;
    }
    if (f.size() != 4) throw DataError(where + "expected 4 fields");
    if (f[0].empty() || f[1].empty()) throw DataError(where + "empty gene or replicate");
    const auto t = detail::parse_double(f[2]);
    if (!t || !std::isfinite(*t)) throw DataError(where + "non-numeric time '" + std::string(f[2]) + "'");
    const auto v = detail::parse_double(f[3]);
    if (!v) throw DataError(where + "non-numeric value '" + std::string(f[3]) + "'");
    if (!std::isfinite(*v)) throw DataError(where + "non-finite value");

    std::string g(f[0]), r(f[1]);
    auto [git, gnew] = gene_ix.try_emplace(g, static_cast<Index>(genes.size()));
    if (gnew) genes.push_back(g);
    auto [rit, rnew] = rep_ix.try_emplace(r, static_cast<Index>(reps.size()));
    if (rnew) reps.push_back(r);
    times.try_emplace(*t, std::string(f[2]));
    cells.push_back({git->second, rit->second, *t, *v});
  }
  if (!header_seen) throw DataError("empty CSV");
  if (cells.empty()) throw DataError("CSV has no data rows");

  std::map<double, Index> time_ix;
  for (const auto& [t, label] : times) time_ix.emplace(t, static_cast<Index>(time_ix.size()));
  const Index p = static_cast<Index>(genes.size()), T = static_cast<Index>(times.size()),
              n_R = static_cast<Index>(reps.size());

  std::vector<Matrix> data(static_cast<std::size_t>(n_R), Matrix::Zero(p, T));
  std::vector<char> filled(static_cast<std::size_t>(p * T * n_R), 0);
  for (const auto& c : cells) {
    const Index t = time_ix.at(c.time);
    auto& flag = filled[static_cast<std::size_t>((c.gene * T + t) * n_R + c.rep)];
    if (flag)
      throw DataError("duplicate cell (gene=" + genes[c.gene] + ", time=" + times.at(c.time) +
                      ", replicate=" + reps[c.rep] + ")");
    flag = 1;
    data[static_cast<std::size_t>(c.rep)](c.gene, t) = c.value;
  }
  for (Index g = 0; g < p; ++g) {
    Index t = 0;
    for (const auto& [tv, label] : times) {
      for (Index r = 0; r < n_R; ++r)
        if (!filled[static_cast<std::size_t>((g * T + t) * n_R + r)])
          throw DataError("missing cell (gene=" + genes[g] + ", time=" + label +
                          ", replicate=" + reps[r] + ")");
      ++t;
    }
  }
  return ExpressionDataset(std::move(genes), std::move(data));
}

inline ExpressionDataset ingest_csv(const std::string& path) { return parse_csv(detail::read_file(path)); }

/// Replicates are labelled 1..n_R and time points 1..T.
inline std::string to_csv(const ExpressionDataset& d) {
  std::string out = "gene,replicate,time,value\n";
  for (Index g = 0; g < d.genes(); ++g)
    for (Index r = 0; r < d.replicate_count(); ++r)
      for (Index t = 0; t < d.time_points(); ++t) {
        out += d.gene_names()[static_cast<std::size_t>(g)];
        out += ',' + std::to_string(r + 1) + ',' + std::to_string(t + 1) + ',';
        out += format_number(d.value(g, t, r), 17);
        out += '\n';
      }
  return out;
}

inline void export_csv(const ExpressionDataset& d, const std::string& path) {
  detail::write_file(path, to_csv(d));
}

// ---------------------------------------------------------------- JSON

inline json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(round_significant(m(i, j)));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const json& j, Index rows, Index cols, const std::string& name) {
  try {
    if (j.at("rows").get<Index>() != rows || j.at("cols").get<Index>() != cols)
      throw DataError("parameter block " + name + " has wrong shape");
    const auto& data = j.at("data");
    if (static_cast<Index>(data.size()) != rows * cols)
      throw DataError("parameter block " + name + " has wrong length");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index jx = 0; jx < cols; ++jx) m(i, jx) = data.at(static_cast<std::size_t>(i * cols + jx)).get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError("parameter block " + name + ": " + e.what());
  }
}

struct ParamsDocument {
  ModelParams params;
  Dims dims;
  std::vector<std::string> gene_names;
  std::optional<FitResult> fit;  // params duplicated inside are ignored on write
};

inline json params_to_json(const ParamsDocument& doc) {
  const ModelParams& m = doc.params;
  json q0 = json::array();
  for (Index i = 0; i < m.q0_diag.size(); ++i) q0.push_back(round_significant(m.q0_diag[i]));
  json j{{"format", "ssgrn-params/1"},
         {"dims", {{"p", doc.dims.p}, {"k", doc.dims.k}, {"T", doc.dims.T}, {"n_R", doc.dims.n_R}}},
         {"gene_names", doc.gene_names},
         {"F", matrix_to_json(m.F)},
         {"A", matrix_to_json(m.A)},
         {"Z", matrix_to_json(m.Z)},
         {"B", matrix_to_json(m.B)},
         {"sigma2_xi", round_significant(m.sigma2_xi)},
         {"sigma2_eta", ModelParams::sigma2_eta},
         {"Q0_diag", std::move(q0)}};
  if (doc.fit) {
    json trace = json::array();
    for (double v : doc.fit->loglik_trace) trace.push_back(round_significant(v));
    j["fit"] = {{"loglik", round_significant(doc.fit->loglik())},
                {"iterations", doc.fit->iterations},
                {"converged", doc.fit->converged},
                {"loglik_trace", std::move(trace)}};
  }
  return j;
}

inline std::string params_to_string(const ParamsDocument& doc) { return params_to_json(doc).dump(2) + "\n"; }

inline ParamsDocument params_from_json(const json& j) {
  try {
    ParamsDocument doc;
    const auto& d = j.at("dims");
    doc.dims = Dims{d.at("p").get<Index>(), d.at("k").get<Index>(), d.at("T").get<Index>(),
                    d.at("n_R").get<Index>()};
    const Index p = doc.dims.p, k = doc.dims.k;
    if (p < 1 || k < 0) throw DataError("parameter file has invalid dims");
    doc.gene_names = j.at("gene_names").get<std::vector<std::string>>();
    if (static_cast<Index>(doc.gene_names.size()) != p)
      throw DataError("parameter file gene_names length differs from p");
    doc.params.F = matrix_from_json(j.at("F"), k, k, "F");
    doc.params.A = matrix_from_json(j.at("A"), k, p, "A");
    doc.params.Z = matrix_from_json(j.at("Z"), p, k, "Z");
    doc.params.B = matrix_from_json(j.at("B"), p, p, "B");
    doc.params.sigma2_xi = j.at("sigma2_xi").get<double>();
    const auto q0 = j.at("Q0_diag").get<std::vector<double>>();
    if (static_cast<Index>(q0.size()) != k) throw DataError("Q0_diag length differs from k");
    doc.params.q0_diag = Eigen::Map<const Vector>(q0.data(), k);
    doc.params.validate();
    if (const auto it = j.find("fit"); it != j.end()) {
      FitResult r;
      r.params = doc.params;
      r.loglik_trace = it->at("loglik_trace").get<std::vector<double>>();
      r.iterations = it->at("iterations").get<int>();
      r.converged = it->at("converged").get<bool>();
      if (r.loglik_trace.empty()) throw DataError("parameter file has an empty loglik_trace");
      doc.fit = std::move(r);
    }
    return doc;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed parameter file: ") + e.what());
  }
}

inline ParamsDocument read_params(const std::string& path) {
  const std::string text = detail::read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  return params_from_json(j);
}

// ---------------------------------------------------------------- edges TSV

inline const char* kEdgeHeader = "source\ttarget\tblock\testimate\tlower\tupper\tsignificant\n";

inline std::string edges_to_tsv(const std::vector<EdgeDecision>& decisions,
                                const std::vector<NetworkNode>& nodes) {
  std::string out = kEdgeHeader;
  for (const auto& e : decisions) {
    out += nodes[static_cast<std::size_t>(e.col)].name + '\t' +
           nodes[static_cast<std::size_t>(e.row)].name + '\t';
    out += block_name(e.block);
    out += '\t' + format_number(e.estimate) + '\t' + format_number(e.lower) + '\t' +
           format_number(e.upper) + '\t' + (e.significant ? "1" : "0") + '\n';
  }
  return out;
}

struct EdgeTable {
  std::vector<NetworkNode> nodes;  // genes first, then regulators
  Index p = 0;
  std::vector<EdgeDecision> decisions;  // row-major over (target, source)

  Index k() const { return static_cast<Index>(nodes.size()) - p; }
  std::vector<std::string> gene_names() const {
    std::vector<std::string> g;
    for (Index i = 0; i < p; ++i) g.push_back(nodes[static_cast<std::size_t>(i)].name);
    return g;
  }
};

/// Reads a file written by edges_to_tsv. Node order and the gene/regulator
/// split are recovered from the row-major layout and the block column.
inline EdgeTable parse_edges_tsv(std::string_view text) {
  std::vector<std::vector<std::string_view>> rows;
  std::size_t pos = 0, line_no = 0;
  bool header = false;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty()) continue;
    auto f = detail::split(line, '\t');
    if (!header) {
      if (f.size() != 7 || f[0] != "source" || f[6] != "significant")
        throw DataError("edge table: unexpected header");
      header = true;
      continue;
    }
    if (f.size() != 7) throw DataError("edge table line " + std::to_string(line_no) + ": expected 7 fields");
    rows.push_back(std::move(f));
  }
  const auto total = static_cast<Index>(rows.size());
  const auto n = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(total))));
  if (n < 1 || n * n != total) throw DataError("edge table must have (p+k)^2 rows");

  EdgeTable table;
  for (Index j = 0; j < n; ++j) {
    const auto& f = rows[static_cast<std::size_t>(j)];
    const auto b = parse_block(f[2]);
    if (!b) throw DataError("edge table: unknown block '" + std::string(f[2]) + "'");
    const bool regulator = *b == Block::Z || *b == Block::F;
    table.nodes.push_back({std::string(f[0]), regulator});
    if (!regulator) table.p = j + 1;
  }
  std::unordered_map<std::string_view, Index> ix;
  for (Index i = 0; i < n; ++i) ix.emplace(table.nodes[static_cast<std::size_t>(i)].name, i);
  for (Index i = 0; i < n; ++i)
    if (table.nodes[static_cast<std::size_t>(i)].regulator != (i >= table.p))
      throw DataError("edge table: genes must precede regulators");
  if (table.p < 1) throw DataError("edge table: no gene nodes");

  for (Index r = 0; r < total; ++r) {
    const auto& f = rows[static_cast<std::size_t>(r)];
    EdgeDecision e;
    e.row = r / n;
    e.col = r % n;
    const auto src = ix.find(f[0]), dst = ix.find(f[1]);
    if (src == ix.end() || dst == ix.end() || src->second != e.col || dst->second != e.row)
      throw DataError("edge table row " + std::to_string(r + 1) + " is out of order");
    const auto b = parse_block(f[2]);
    const auto est = detail::parse_double(f[3]), lo = detail::parse_double(f[4]),
               hi = detail::parse_double(f[5]);
    if (!b || !est || !lo || !hi || (f[6] != "0" && f[6] != "1"))
      throw DataError("edge table row " + std::to_string(r + 1) + " is malformed");
    e.block = *b;
    e.estimate = *est;
    e.lower = *lo;
    e.upper = *hi;
    e.significant = f[6] == "1";
    table.decisions.push_back(e);
  }
  return table;
}

inline EdgeTable read_edges(const std::string& path) { return parse_edges_tsv(detail::read_file(path)); }

// ---------------------------------------------------------------- other tables

inline std::string selection_to_tsv(const SelectionReport& r) {
  std::string out = "k\tloglik\tP\tN\taicc\tconverged\titerations\tchosen\n";
  for (const auto& e : r.entries) {
    out += std::to_string(e.k) + '\t' + format_number(e.loglik) + '\t' + std::to_string(e.P) + '\t' +
           std::to_string(e.N) + '\t' + format_number(e.aicc) + '\t' + (e.converged ? "1" : "0") +
           '\t' + std::to_string(e.iterations) + '\t' + (e.k == r.chosen_k ? "1" : "0") + '\n';
  }
  return out;
}

inline std::string metrics_to_tsv(const RecoveryMetrics& m) {
  return "TP\tFP\tTN\tFN\tTPR\tFPR\tF1\n" + std::to_string(m.tp) + '\t' + std::to_string(m.fp) +
         '\t' + std::to_string(m.tn) + '\t' + std::to_string(m.fn) + '\t' + format_number(m.tpr) +
         '\t' + format_number(m.fpr) + '\t' + format_number(m.f1) + '\n';
}

// ---------------------------------------------------------------- DOT

/// Solid edges are activations, dashed repressions; regulators are empty
/// circles. With min_out_degree > 0 only edges leaving nodes of at least that
/// out-degree are drawn, together with their endpoints.
inline std::string network_to_dot(const NetworkGraph& g, Index min_out_degree = 0) {
  std::vector<Index> degree(g.nodes.size(), 0);
  for (const auto& e : g.edges) ++degree[static_cast<std::size_t>(e.source)];
  std::vector<bool> keep(g.nodes.size(), min_out_degree <= 0);
  std::vector<const NetworkEdge*> edges;
  for (const auto& e : g.edges)
    if (degree[static_cast<std::size_t>(e.source)] >= min_out_degree) {
      edges.push_back(&e);
      keep[static_cast<std::size_t>(e.source)] = keep[static_cast<std::size_t>(e.target)] = true;
    }

  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') q += '\\';
      q += c;
    }
    return q + '"';
  };
  std::string out = "digraph ssgrn {\n  node [shape=circle];\n";
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!keep[i]) continue;
    out += "  " + quote(g.nodes[i].name) +
           (g.nodes[i].regulator ? " [style=solid, fillcolor=white];\n"
                                 : " [style=filled, fillcolor=lightgrey];\n");
  }
  for (const NetworkEdge* e : edges) {
    out += "  " + quote(g.nodes[static_cast<std::size_t>(e->source)].name) + " -> " +
           quote(g.nodes[static_cast<std::size_t>(e->target)].name) + " [style=" +
           (e->activation() ? "solid" : "dashed") + ", label=\"" + std::string(block_name(e->block)) +
           " " + format_number(e->weight, 4) + "\"];\n";
  }
  out += "}\n";
  return out;
}

}  // namespace ssgrn::io

#endif  // SSGRN_IO_HPP
