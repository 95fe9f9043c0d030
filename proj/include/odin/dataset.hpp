#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "odin/edge_index.hpp"
#include "odin/error.hpp"

namespace odin {

using EdgeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using AdjacencyMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Reads the strict lower triangle of a symmetric hollow binary matrix.
inline Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> vectorize(const AdjacencyMatrix& A, std::size_t nodes) {
  require(static_cast<std::size_t>(A.rows()) == nodes && static_cast<std::size_t>(A.cols()) == nodes,
          Errc::dimension_mismatch,
          "adjacency matrix is " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
              ", atlas has " + std::to_string(nodes) + " ROIs");
  const auto V = static_cast<Eigen::Index>(nodes);
  for (Eigen::Index u = 0; u < V; ++u) {
    require(A(u, u) == 0, Errc::nonzero_diagonal, "adjacency matrix has a nonzero diagonal entry");
    for (Eigen::Index v = 0; v < V; ++v) {
      require(A(u, v) <= 1, Errc::non_binary, "adjacency matrix has a non-binary entry");
      require(A(u, v) == A(v, u), Errc::asymmetric, "adjacency matrix is not symmetric");
    }
  }
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> a(static_cast<Eigen::Index>(edge_count(nodes)));
  Eigen::Index l = 0;
  for (Eigen::Index u = 1; u < V; ++u)
    for (Eigen::Index v = 0; v < u; ++v) a(l++) = A(u, v);
  return a;
}

template <typename Derived>
AdjacencyMatrix devectorize(const Eigen::MatrixBase<Derived>& a) {
  const std::size_t nodes = node_count_for_edges(static_cast<std::size_t>(a.size()));
  AdjacencyMatrix A = AdjacencyMatrix::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
  Eigen::Index l = 0;
  for (Eigen::Index u = 1; u < A.rows(); ++u)
    for (Eigen::Index v = 0; v < u; ++v) {
      A(u, v) = A(v, u) = static_cast<std::uint8_t>(a(l++));
    }
  return A;
}

/// N subjects by L binary edge indicators. Immutable once built.
class NetworkDataset {
 public:
  NetworkDataset() = default;

  NetworkDataset(std::size_t nodes, std::vector<std::string> subject_ids, EdgeMatrix edges)
      : nodes_(nodes), ids_(std::move(subject_ids)), edges_(std::move(edges)) {
    require(nodes_ >= 2, Errc::dimension_mismatch, "dataset needs at least 2 nodes");
    require(static_cast<std::size_t>(edges_.rows()) == ids_.size(), Errc::dimension_mismatch,
            "subject id count does not match edge rows");
    require(static_cast<std::size_t>(edges_.cols()) == edge_count(nodes_), Errc::row_length,
            "edge rows have length " + std::to_string(edges_.cols()) + ", expected " +
                std::to_string(edge_count(nodes_)));
    require((edges_.array() <= 1).all(), Errc::non_binary, "edge matrix has a non-binary entry");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids_) {
      require(!id.empty() && id.find_first_of("\t\n") == std::string::npos, Errc::malformed,
              "subject id is empty or contains whitespace separators");
      require(seen.insert(id).second, Errc::duplicate_id, "duplicate subject id '" + id + "'");
    }
  }

  std::size_t nodes() const { return nodes_; }
  std::size_t subjects() const { return ids_.size(); }
  std::size_t edges() const { return edge_count(nodes_); }
  const std::vector<std::string>& subject_ids() const { return ids_; }
  const EdgeMatrix& edge_matrix() const { return edges_; }

  /// Edge data as doubles, one column per subject (L x N).
  Eigen::MatrixXd edges_by_subject() const { return edges_.transpose().cast<double>(); }

  /// Rows selected by index, in the given order.
  NetworkDataset subset(const std::vector<std::size_t>& rows) const {
    EdgeMatrix e(static_cast<Eigen::Index>(rows.size()), edges_.cols());
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      e.row(static_cast<Eigen::Index>(k)) = edges_.row(static_cast<Eigen::Index>(rows[k]));
      ids.push_back(ids_[rows[k]]);
    }
    return NetworkDataset(nodes_, std::move(ids), std::move(e));
  }

  bool operator==(const NetworkDataset& o) const {
    return nodes_ == o.nodes_ && ids_ == o.ids_ && edges_ == o.edges_;
  }

 private:
  std::size_t nodes_ = 0;
  std::vector<std::string> ids_;
  EdgeMatrix edges_;
};

// Text format:
//   V=<int> N=<int>
//   <subject_id>\t<L characters of 0/1 in edge order>

inline NetworkDataset read_dataset(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::malformed, "dataset file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  long long v = -1, n = -1;
  {
    std::istringstream hs(line);
    std::string tv, tn, extra;
    hs >> tv >> tn;
    require(tv.rfind("V=", 0) == 0 && tn.rfind("N=", 0) == 0 && !(hs >> extra), Errc::malformed,
            "dataset header must be 'V=<int> N=<int>'");
    try {
      std::size_t pos = 0;
      v = std::stoll(tv.substr(2), &pos);
      require(pos == tv.size() - 2, Errc::malformed, "bad V in dataset header");
      n = std::stoll(tn.substr(2), &pos);
      require(pos == tn.size() - 2, Errc::malformed, "bad N in dataset header");
    } catch (const std::logic_error&) {
      fail(Errc::malformed, "dataset header must be 'V=<int> N=<int>'");
    }
  }
  require(v >= 2 && n >= 0, Errc::malformed, "dataset header values out of range");
  const std::size_t nodes = static_cast<std::size_t>(v);
  const std::size_t L = edge_count(nodes);

  EdgeMatrix edges(n, static_cast<Eigen::Index>(L));
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    require(ids.size() < static_cast<std::size_t>(n), Errc::malformed,
            "dataset has more subject lines than N=" + std::to_string(n));
    const auto tab = line.find('\t');
    require(tab != std::string::npos, Errc::malformed,
            "dataset line " + std::to_string(lineno) + ": missing TAB separator");
    const std::string_view bits(line.data() + tab + 1, line.size() - tab - 1);
    require(bits.size() == L, Errc::row_length,
            "dataset line " + std::to_string(lineno) + ": edge field has length " + std::to_string(bits.size()) +
                ", expected " + std::to_string(L));
    const auto row = static_cast<Eigen::Index>(ids.size());
    for (std::size_t l = 0; l < L; ++l) {
      const char c = bits[l];
      require(c == '0' || c == '1', Errc::non_binary,
              "dataset line " + std::to_string(lineno) + ": non-binary character '" + std::string(1, c) + "'");
      edges(row, static_cast<Eigen::Index>(l)) = static_cast<std::uint8_t>(c - '0');
    }
    ids.emplace_back(line.substr(0, tab));
  }
  require(ids.size() == static_cast<std::size_t>(n), Errc::malformed,
          "dataset declares N=" + std::to_string(n) + " but has " + std::to_string(ids.size()) + " subject lines");
  return NetworkDataset(nodes, std::move(ids), std::move(edges));
}

inline NetworkDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open dataset file '" + path + "'");
  return read_dataset(in);
}

inline void write_dataset(const NetworkDataset& data, std::ostream& out) {
  out << "V=" << data.nodes() << " N=" << data.subjects() << '\n';
  std::string bits(data.edges(), '0');
  const auto& e = data.edge_matrix();
  for (std::size_t i = 0; i < data.subjects(); ++i) {
    for (std::size_t l = 0; l < bits.size(); ++l)
      bits[l] = static_cast<char>('0' + e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)));
    out << data.subject_ids()[i] << '\t' << bits << '\n';
  }
}

inline void write_dataset(const NetworkDataset& data, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write dataset file '" + path + "'");
  write_dataset(data, out);
}

}  // namespace odin
