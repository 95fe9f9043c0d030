#pragma once

// Influence of each subject on the fit.
//
// IM1 approximates |Z_{-i} - Z| by one Newton step on the leave-one-out
// objective from the full-sample estimate, with the subject-dependent
// curvature matrix replaced by a single matrix shared by all subjects:
//
//   Gamma = (N-1)/N [lambda N I + sum_j W_j - sum_j W_j X (X'W_j X)^{-1} X'W_j]
//   IM1(i) = | Gamma^{-1} ((a_i - pi_i) - lambda Z) |_2
//
// IM2 is the squared Mahalanobis distance of beta_i from the mean beta.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "odin/dataset.hpp"
#include "odin/error.hpp"
#include "odin/mm.hpp"
#include "odin/model.hpp"
#include "odin/parallel.hpp"

namespace odin {

struct InfluenceScores {
  std::vector<double> im1;
  std::vector<double> im2;
  bool im2_fallback = false;  // sample covariance of the betas was singular

  std::size_t size() const { return im1.size(); }
};

namespace detail {

inline void check_fit(const ModelFit& fit, const Eigen::MatrixXd& X) {
  require(fit.Z.size() == X.rows() && fit.betas.cols() == X.cols(), Errc::dimension_mismatch,
          "fit does not match the design matrix");
  require(fit.lambda > 0.0, Errc::invalid_argument, "fit has a non-positive lambda");
}

/// Fitted probabilities (unclamped) for subjects [start, start + count), L x count.
inline Eigen::MatrixXd fitted_probabilities(const ModelFit& fit, const Eigen::MatrixXd& X, Eigen::Index start,
                                            Eigen::Index count) {
  Eigen::MatrixXd eta = X * fit.betas.middleRows(start, count).transpose();
  eta.colwise() += fit.Z;
  return eta.unaryExpr([](double e) { return sigmoid(e); });
}

inline Eigen::VectorXd curvature_weights(const Eigen::VectorXd& pi) {
  return pi.unaryExpr([](double p) {
    const double c = clamp_probability(p);
    return c * (1.0 - c);
  });
}

/// U_j with U_j U_j' = W_j X (X'W_j X)^{-1} X'W_j.
inline Eigen::MatrixXd projected_weight_factor(const Eigen::MatrixXd& X, const Eigen::VectorXd& w, Eigen::Index subject) {
  const Eigen::MatrixXd WX = w.asDiagonal() * X;
  const Eigen::MatrixXd Qj = X.transpose() * WX;
  Eigen::LLT<Eigen::MatrixXd> llt(Qj);
  require(llt.info() == Eigen::Success, Errc::singular,
          "X'W X is singular for subject " + std::to_string(subject));
  return llt.matrixL().solve(WX.transpose()).transpose();
}

/// Residuals (a_i - pi_i) - lambda Z for subjects [start, start + count).
inline Eigen::MatrixXd score_residuals(const NetworkDataset& data, const ModelFit& fit, const Eigen::MatrixXd& X,
                                       Eigen::Index start, Eigen::Index count) {
  Eigen::MatrixXd r = data.edge_matrix().middleRows(start, count).transpose().cast<double>() -
                      fitted_probabilities(fit, X, start, count);
  r.colwise() -= fit.lambda * fit.Z;
  return r;
}

}  // namespace detail

/// Gamma, assembled once and held as a Cholesky factorization.
class GammaOperator {
 public:
  GammaOperator(Eigen::MatrixXd gamma, double scale) : gamma_(std::move(gamma)), scale_(scale), llt_(gamma_) {
    require(llt_.info() == Eigen::Success, Errc::factorization, "Gamma is not numerically positive definite");
  }

  const Eigen::MatrixXd& matrix() const { return gamma_; }
  /// gamma_N = (N - 1) / N
  double scale() const { return scale_; }
  std::size_t size() const { return static_cast<std::size_t>(gamma_.rows()); }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const { return llt_.solve(rhs); }

 private:
  Eigen::MatrixXd gamma_;
  double scale_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline GammaOperator build_gamma(const ModelFit& fit, const Eigen::MatrixXd& X, int threads = 1) {
  detail::check_fit(fit, X);
  const Eigen::Index L = X.rows();
  const Eigen::Index p = X.cols();
  const Eigen::Index N = fit.betas.rows();
  require(N >= 2, Errc::invalid_argument, "Gamma needs at least 2 subjects ((N-1)/N vanishes at N = 1)");

  // lower triangle of -sum_j U_j U_j', accumulated chunk by chunk in subject
  // order; tiles within a chunk are independent
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(L, L);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(L);
  constexpr std::size_t kChunk = 128;
  constexpr Eigen::Index kTile = 256;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> tiles;
  for (Eigen::Index c = 0; c < L; c += kTile)
    for (Eigen::Index r = c; r < L; r += kTile) tiles.emplace_back(r, c);

  for (const auto& chunk : fixed_blocks(static_cast<std::size_t>(N), kChunk)) {
    const auto s = static_cast<Eigen::Index>(chunk.begin);
    const auto m = static_cast<Eigen::Index>(chunk.size);
    const Eigen::MatrixXd pi = detail::fitted_probabilities(fit, X, s, m);
    Eigen::MatrixXd W(L, m);
    Eigen::MatrixXd U(L, m * p);
    parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t k) {
      const auto j = static_cast<Eigen::Index>(k);
      W.col(j) = detail::curvature_weights(pi.col(j));
      U.middleCols(j * p, p) = detail::projected_weight_factor(X, W.col(j), s + j);
    });
    wsum += W.rowwise().sum();
    parallel_for(tiles.size(), threads, [&](std::size_t t) {
      const auto [r, c] = tiles[t];
      const Eigen::Index rows = std::min(kTile, L - r);
      const Eigen::Index cols = std::min(kTile, L - c);
      G.block(r, c, rows, cols).noalias() -= U.middleRows(r, rows) * U.middleRows(c, cols).transpose();
    });
  }

  const double n = static_cast<double>(N);
  const double scale = (n - 1.0) / n;
  G.diagonal() += Eigen::VectorXd::Constant(L, fit.lambda * n) + wsum;
  G *= scale;
  for (Eigen::Index c = 1; c < L; ++c)
    for (Eigen::Index r = 0; r < c; ++r) G(r, c) = G(c, r);
  return GammaOperator(std::move(G), scale);
}

/// IM1 for every subject: one solve per subject against the shared factorization.
inline std::vector<double> im1(const NetworkDataset& data, const ModelFit& fit, const Eigen::MatrixXd& X,
                               const GammaOperator& gamma, int threads = 1) {
  detail::check_fit(fit, X);
  require(static_cast<Eigen::Index>(data.subjects()) == fit.betas.rows() &&
              static_cast<Eigen::Index>(data.edges()) == fit.Z.size(),
          Errc::dimension_mismatch, "fit does not match dataset");
  std::vector<double> out(data.subjects());
  const auto blocks = fixed_blocks(data.subjects(), 64);
  parallel_for(blocks.size(), threads, [&](std::size_t b) {
    const auto s = static_cast<Eigen::Index>(blocks[b].begin);
    const auto m = static_cast<Eigen::Index>(blocks[b].size);
    const Eigen::MatrixXd x = gamma.solve(detail::score_residuals(data, fit, X, s, m));
    for (Eigen::Index j = 0; j < m; ++j) out[static_cast<std::size_t>(s + j)] = x.col(j).norm();
  });
  return out;
}

struct Im2Result {
  std::vector<double> scores;
  bool fallback = false;
};

/// IM2: squared Mahalanobis distance of each beta_i from the mean beta under
/// the 1/N sample covariance. A singular covariance gets a ridge of
/// 1e-8 trace(S)/p; a zero covariance gives all-zero scores.
inline Im2Result im2(const ModelFit& fit) {
  const Eigen::Index N = fit.betas.rows();
  const Eigen::Index p = fit.betas.cols();
  Im2Result out;
  out.scores.assign(static_cast<std::size_t>(N), 0.0);
  if (N == 0) return out;
  const Eigen::RowVectorXd mean = fit.betas.colwise().mean();
  const Eigen::MatrixXd D = fit.betas.rowwise() - mean;
  Eigen::MatrixXd S = D.transpose() * D / static_cast<double>(N);
  const double tr = S.trace();
  // spread at rounding level of the mean counts as none
  const double floor = 1e-26 * mean.squaredNorm();
  if (!(tr > floor)) {
    out.fallback = true;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() <= 1e-12 * eig.eigenvalues().maxCoeff()) {
    out.fallback = true;
    S.diagonal().array() += 1e-8 * tr / static_cast<double>(p);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(S);
  require(llt.info() == Eigen::Success, Errc::factorization, "beta covariance factorization failed");
  const Eigen::MatrixXd white = llt.matrixL().solve(D.transpose());  // p x N
  for (Eigen::Index i = 0; i < N; ++i) out.scores[static_cast<std::size_t>(i)] = white.col(i).squaredNorm();
  return out;
}

inline InfluenceScores score(const NetworkDataset& data, const ModelFit& fit, const Eigen::MatrixXd& X,
                             int threads = 1) {
  const GammaOperator gamma = build_gamma(fit, X, threads);
  InfluenceScores s;
  s.im1 = im1(data, fit, X, gamma, threads);
  Im2Result r = im2(fit);
  s.im2 = std::move(r.scores);
  s.im2_fallback = r.fallback;
  return s;
}

/// Exact one-step Newton change in Z after deleting subject i:
///   -[lambda (N-1) I + sum_{j!=i} (W_j - W_j X Q_j^{-1} X'W_j)]^{-1} ((a_i - pi_i) - lambda Z).
/// O(N L^2 p + L^3) per call; meant for checking IM1, not for production use.
inline Eigen::VectorXd newton_loo_delta(std::size_t i, const NetworkDataset& data, const ModelFit& fit,
                                        const Eigen::MatrixXd& X) {
  detail::check_fit(fit, X);
  const Eigen::Index N = fit.betas.rows();
  const Eigen::Index L = X.rows();
  require(N >= 3, Errc::invalid_argument, "leave-one-out step needs at least 3 subjects");
  require(static_cast<Eigen::Index>(i) < N, Errc::invalid_argument, "subject index out of range");
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(L, L) * (fit.lambda * static_cast<double>(N - 1));
  for (Eigen::Index j = 0; j < N; ++j) {
    if (j == static_cast<Eigen::Index>(i)) continue;
    const Eigen::VectorXd w = detail::curvature_weights(detail::fitted_probabilities(fit, X, j, 1).col(0));
    const Eigen::MatrixXd U = detail::projected_weight_factor(X, w, j);
    M.diagonal() += w;
    M.noalias() -= U * U.transpose();
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  require(llt.info() == Eigen::Success, Errc::factorization, "leave-one-out curvature matrix is not invertible");
  const Eigen::VectorXd r = detail::score_residuals(data, fit, X, static_cast<Eigen::Index>(i), 1).col(0);
  return -llt.solve(r);
}

inline void write_scores_csv(const std::vector<std::string>& ids, const InfluenceScores& s, std::ostream& out) {
  require(ids.size() == s.im1.size() && ids.size() == s.im2.size(), Errc::dimension_mismatch,
          "scores and subject ids differ in length");
  out << "subject_id,im1,im2\n";
  char buf[64];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    std::snprintf(buf, sizeof buf, ",%.17g", s.im1[i]);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g\n", s.im2[i]);
    out << buf;
  }
}

inline void write_scores_csv(const std::vector<std::string>& ids, const InfluenceScores& s, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write scores file '" + path + "'");
  write_scores_csv(ids, s, out);
}

}  // namespace odin
