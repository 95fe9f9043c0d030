#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "odin/atlas.hpp"
#include "odin/edge_index.hpp"
#include "odin/error.hpp"

namespace odin {

struct DesignColumn {
  enum class Block { hemisphere, lobe };
  Block block;
  std::string first;   // lexicographically smaller label
  std::string second;

  std::string label() const {
    return std::string(block == Block::hemisphere ? "hemi:" : "lobe:") + first + "-" + second;
  }
  bool operator==(const DesignColumn&) const = default;
};

/// How columns of the two-block indicator matrix are dropped to get full
/// column rank.
enum class ReferenceCoding {
  /// Drop the first hemisphere-pair column, then any later column that is
  /// linearly dependent on the columns kept before it. Keeps the column
  /// space of the full indicator matrix, including a per-subject intercept.
  minimal,
  /// Drop the first hemisphere-pair and the first lobe-pair column.
  per_block,
};

struct DesignMatrix {
  Eigen::MatrixXd X;                    // L x p, entries 0/1
  std::vector<DesignColumn> columns;    // kept, in column order
  std::vector<DesignColumn> dropped;    // reference columns removed
  ReferenceCoding coding = ReferenceCoding::minimal;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }
};

/// The two-block indicator matrix before any reference coding: hemisphere
/// pairs first, then lobe pairs, each block in lexicographic order of the
/// unordered label pairs realised by some edge.
struct FullDesign {
  Eigen::MatrixXd X;
  std::vector<DesignColumn> columns;
  std::size_t hemisphere_columns = 0;
};

inline FullDesign build_full_design(const Atlas& atlas) {
  const std::size_t V = atlas.size();
  const std::size_t L = edge_count(V);
  auto ordered = [](const std::string& a, const std::string& b) {
    return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
  };
  std::map<std::pair<std::string, std::string>, std::size_t> hemi_pairs, lobe_pairs;
  for (std::size_t l = 0; l < L; ++l) {
    auto [u, v] = edge_pair(l);
    hemi_pairs.emplace(ordered(atlas[u].hemisphere, atlas[v].hemisphere), 0);
    lobe_pairs.emplace(ordered(atlas[u].lobe, atlas[v].lobe), 0);
  }
  FullDesign d;
  std::size_t c = 0;
  for (auto& [key, col] : hemi_pairs) {
    col = c++;
    d.columns.push_back({DesignColumn::Block::hemisphere, key.first, key.second});
  }
  d.hemisphere_columns = c;
  for (auto& [key, col] : lobe_pairs) {
    col = c++;
    d.columns.push_back({DesignColumn::Block::lobe, key.first, key.second});
  }
  d.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(c));
  for (std::size_t l = 0; l < L; ++l) {
    auto [u, v] = edge_pair(l);
    const auto row = static_cast<Eigen::Index>(l);
    d.X(row, static_cast<Eigen::Index>(hemi_pairs.at(ordered(atlas[u].hemisphere, atlas[v].hemisphere)))) = 1.0;
    d.X(row, static_cast<Eigen::Index>(lobe_pairs.at(ordered(atlas[u].lobe, atlas[v].lobe)))) = 1.0;
  }
  return d;
}

namespace detail {

// Greedy column selection by Gram-Schmidt (applied twice for stability).
// Returns, for each candidate in order, whether it was kept.
inline std::vector<bool> independent_columns(const Eigen::MatrixXd& X, const std::vector<bool>& eligible) {
  std::vector<bool> keep(static_cast<std::size_t>(X.cols()), false);
  std::vector<Eigen::VectorXd> basis;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (!eligible[static_cast<std::size_t>(c)]) continue;
    Eigen::VectorXd r = X.col(c);
    const double norm0 = r.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : basis) r -= q.dot(r) * q;
    if (r.norm() > 1e-9 * norm0) {
      basis.push_back(r / r.norm());
      keep[static_cast<std::size_t>(c)] = true;
    }
  }
  return keep;
}

}  // namespace detail

inline DesignMatrix build_design(const Atlas& atlas, ReferenceCoding coding = ReferenceCoding::minimal) {
  FullDesign full = build_full_design(atlas);
  const auto ncol = full.columns.size();
  std::vector<bool> eligible(ncol, true);
  eligible[0] = false;
  if (coding == ReferenceCoding::per_block && full.hemisphere_columns < ncol)
    eligible[full.hemisphere_columns] = false;
  std::vector<bool> keep = detail::independent_columns(full.X, eligible);
  if (coding == ReferenceCoding::per_block) {
    for (std::size_t c = 0; c < ncol; ++c)
      require(keep[c] == eligible[c], Errc::degenerate_atlas,
              "per-block reference coding leaves a rank-deficient design for this atlas");
  }

  DesignMatrix d;
  d.coding = coding;
  std::vector<Eigen::Index> kept;
  for (std::size_t c = 0; c < ncol; ++c) {
    if (keep[c]) {
      kept.push_back(static_cast<Eigen::Index>(c));
      d.columns.push_back(full.columns[c]);
    } else {
      d.dropped.push_back(full.columns[c]);
    }
  }
  require(!kept.empty(), Errc::degenerate_atlas, "design matrix has no columns for this atlas");
  d.X = full.X(Eigen::all, kept);
  return d;
}

}  // namespace odin
