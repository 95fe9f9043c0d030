#pragma once

// Minorize-maximize fitting of (Z, beta_1..beta_N).
//
// The surrogate replaces every Bernoulli curvature pi(1-pi) by its bound 1/4,
// which turns the Hessian into an arrowhead matrix whose inverse splits into
// an L x L block for Z and independent p x p blocks for each beta_i. Solving
// that system with the block-inverse formulas gives
//
//   dZ      = R (-lambda Z + Q mu),        mu = mean_i (a_i - pi_i)
//   dbeta_i = (X'X)^{-1} X' (4 (a_i - pi_i) - dZ)
//
// with H = X (X'X)^{-1} X', Q = I - H, R = 4 (Q + 4 lambda I)^{-1}.
// Because H is a rank-p projector, R = 4 [Q / (1 + 4 lambda) + H / (4 lambda)],
// so one iteration costs O(N L p) and never touches an L x L matrix.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "odin/dataset.hpp"
#include "odin/design.hpp"
#include "odin/error.hpp"
#include "odin/model.hpp"
#include "odin/parallel.hpp"

namespace odin {

enum class InitPolicy {
  marginal,  // Z = logit(clamped edge frequency), beta = 0
  zero,      // Z = 0, beta = 0
};

struct FitConfig {
  double lambda = 0.01;
  double tol = 1e-8;        // relative objective change
  int max_iter = 5000;
  double grad_tol = 0.0;    // if > 0, also require |grad|_inf < grad_tol to stop
  InitPolicy init = InitPolicy::marginal;
  int threads = 1;

  void validate() const {
    require(std::isfinite(lambda) && lambda > 0.0, Errc::invalid_config, "lambda must be > 0");
    require(std::isfinite(tol) && tol > 0.0, Errc::invalid_config, "tol must be > 0");
    require(max_iter > 0, Errc::invalid_config, "max_iter must be positive");
    require(grad_tol >= 0.0, Errc::invalid_config, "grad_tol must be >= 0");
    require(threads >= 1, Errc::invalid_config, "threads must be >= 1");
  }
};

struct ModelFit {
  Eigen::VectorXd Z;         // length L
  Eigen::MatrixXd betas;     // N x p
  double lambda = 0.0;
  std::vector<double> trace; // objective at iterate 0, 1, ..., iterations
  bool converged = false;
  int iterations = 0;

  double final_objective() const { return trace.empty() ? std::numeric_limits<double>::quiet_NaN() : trace.back(); }
};

/// Fixed per-fit operators {H, Q, R, S}. H, Q and R are applied through the
/// projector structure; dense forms are available for inspection.
class MmOperators {
 public:
  MmOperators(const Eigen::MatrixXd& X, double lambda) : X_(X), lambda_(lambda) {
    require(std::isfinite(lambda) && lambda > 0.0, Errc::invalid_config,
            "lambda must be > 0 (Q + 4 lambda I is singular at lambda = 0)");
    require(X.cols() > 0 && X.rows() >= X.cols(), Errc::dimension_mismatch, "design matrix must be L x p with L >= p");
    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    require(llt.info() == Eigen::Success, Errc::singular, "X'X is singular");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx, Eigen::EigenvaluesOnly);
    require(eig.eigenvalues().minCoeff() > 1e-10 * eig.eigenvalues().maxCoeff(), Errc::singular,
            "X'X is numerically singular");
    xtx_inv_ = llt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    S_ = 4.0 * xtx_inv_ * X.transpose();
  }

  double lambda() const { return lambda_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& xtx_inverse() const { return xtx_inv_; }
  /// S = 4 (X'X)^{-1} X'  (p x L)
  const Eigen::MatrixXd& S() const { return S_; }

  Eigen::VectorXd apply_H(const Eigen::VectorXd& v) const { return X_ * (xtx_inv_ * (X_.transpose() * v)); }
  Eigen::VectorXd apply_Q(const Eigen::VectorXd& v) const { return v - apply_H(v); }
  Eigen::VectorXd apply_R(const Eigen::VectorXd& v) const {
    const Eigen::VectorXd h = apply_H(v);
    return 4.0 * ((v - h) / (1.0 + 4.0 * lambda_) + h / (4.0 * lambda_));
  }

  Eigen::MatrixXd H_dense() const { return X_ * xtx_inv_ * X_.transpose(); }
  Eigen::MatrixXd Q_dense() const {
    return Eigen::MatrixXd::Identity(X_.rows(), X_.rows()) - H_dense();
  }
  Eigen::MatrixXd R_dense() const {
    const Eigen::MatrixXd H = H_dense();
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(X_.rows(), X_.rows()) - H;
    return 4.0 * (Q / (1.0 + 4.0 * lambda_) + H / (4.0 * lambda_));
  }

 private:
  Eigen::MatrixXd X_;
  double lambda_;
  Eigen::MatrixXd xtx_inv_;
  Eigen::MatrixXd S_;
};

inline MmOperators mm_precompute(const Eigen::MatrixXd& X, double lambda) { return MmOperators(X, lambda); }

/// Iteration state of the MM algorithm. fit() drives it; benchmarks time
/// step() directly.
class MmSolver {
 public:
  static constexpr std::size_t kBlock = 64;  // subjects per work item

  MmSolver(const NetworkDataset& data, const Eigen::MatrixXd& X, const FitConfig& config)
      : ops_(X, config.lambda), config_(config) {
    config.validate();
    require(data.subjects() >= 1, Errc::invalid_argument, "dataset has no subjects");
    require(static_cast<std::size_t>(X.rows()) == data.edges(), Errc::dimension_mismatch,
            "design matrix has " + std::to_string(X.rows()) + " rows but the dataset has " +
                std::to_string(data.edges()) + " edges");
    A_ = data.edge_matrix().transpose();
    const auto L = static_cast<Eigen::Index>(data.edges());
    const auto N = static_cast<Eigen::Index>(data.subjects());
    blocks_ = fixed_blocks(static_cast<std::size_t>(N), kBlock);
    B_ = Eigen::MatrixXd::Zero(X.cols(), N);
    Z_ = Eigen::VectorXd::Zero(L);
    if (config.init == InitPolicy::marginal) {
      const double n = static_cast<double>(N);
      const double lo = 1.0 / (n + 2.0);
      for (Eigen::Index l = 0; l < L; ++l) {
        double f = A_.row(l).cast<double>().sum() / n;
        f = std::clamp(f, lo, 1.0 - lo);
        Z_(l) = std::log(f / (1.0 - f));
      }
    }
    residual_.resize(L, N);
    block_objective_.resize(blocks_.size());
    block_rowsum_.resize(L, static_cast<Eigen::Index>(blocks_.size()));
    evaluate();
  }

  /// One MM update of Z and all beta_i, followed by re-evaluation.
  void step() {
    const double lambda = config_.lambda;
    const Eigen::VectorXd dZ = ops_.apply_R(-lambda * Z_ + ops_.apply_Q(mu_));
    Z_ += dZ;
    const Eigen::VectorXd shift = 0.25 * (ops_.S() * dZ);
    parallel_for(blocks_.size(), config_.threads, [&](std::size_t b) {
      const auto [start, size] = blocks_[b];
      auto Bb = B_.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(size));
      Bb.noalias() += ops_.S() * residual_.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(size));
      Bb.colwise() -= shift;
    });
    evaluate();
  }

  double objective() const { return objective_; }
  const Eigen::VectorXd& Z() const { return Z_; }
  /// betas, p x N (one column per subject)
  const Eigen::MatrixXd& B() const { return B_; }
  /// mean residual over subjects
  const Eigen::VectorXd& mu() const { return mu_; }
  const MmOperators& operators() const { return ops_; }

  /// Infinity norm of the gradient of the objective.
  double gradient_inf_norm() const {
    double g = (mu_ - config_.lambda * Z_).cwiseAbs().maxCoeff();
    const double n = static_cast<double>(B_.cols());
    std::vector<double> block_max(blocks_.size(), 0.0);
    parallel_for(blocks_.size(), config_.threads, [&](std::size_t b) {
      const auto [start, size] = blocks_[b];
      block_max[b] = (ops_.X().transpose() *
                      residual_.middleCols(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(size)))
                         .cwiseAbs()
                         .maxCoeff() /
                     n;
    });
    for (double m : block_max) g = std::max(g, m);
    return g;
  }

 private:
  void evaluate() {
    const Eigen::MatrixXd& X = ops_.X();
    parallel_for(blocks_.size(), config_.threads, [&](std::size_t b) {
      const auto [start, size] = blocks_[b];
      const auto s = static_cast<Eigen::Index>(start);
      const auto m = static_cast<Eigen::Index>(size);
      Eigen::MatrixXd eta = X * B_.middleCols(s, m);
      eta.colwise() += Z_;
      CompensatedSum loglik;
      for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index l = 0; l < eta.rows(); ++l) {
          const double e = eta(l, j);
          const bool a = A_(l, s + j) != 0;
          // one exp serves both the probability and log(1 + e^eta)
          const double t = std::exp(-std::abs(e));
          const double pi = e >= 0.0 ? 1.0 / (1.0 + t) : t / (1.0 + t);
          loglik.add((a ? e : 0.0) - (std::max(e, 0.0) + std::log1p(t)));
          residual_(l, s + j) = (a ? 1.0 : 0.0) - pi;
        }
      }
      block_objective_[b] = loglik.value();
      block_rowsum_.col(static_cast<Eigen::Index>(b)) = residual_.middleCols(s, m).rowwise().sum();
    });
    const double n = static_cast<double>(B_.cols());
    CompensatedSum total;
    for (double v : block_objective_) total.add(v);
    mu_ = block_rowsum_.rowwise().sum() / n;
    objective_ = total.value() / n - 0.5 * config_.lambda * Z_.squaredNorm();
  }

  MmOperators ops_;
  FitConfig config_;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> A_;  // L x N
  std::vector<BlockRange> blocks_;
  Eigen::VectorXd Z_;
  Eigen::MatrixXd B_;
  Eigen::MatrixXd residual_;      // L x N
  std::vector<double> block_objective_;
  Eigen::MatrixXd block_rowsum_;  // L x blocks
  Eigen::VectorXd mu_;
  double objective_ = 0.0;
};

inline ModelFit fit(const NetworkDataset& data, const Eigen::MatrixXd& X, const FitConfig& config = {}) {
  config.validate();
  MmSolver solver(data, X, config);
  ModelFit out;
  out.lambda = config.lambda;
  out.trace.push_back(solver.objective());
  require(std::isfinite(solver.objective()), Errc::non_finite, "objective is not finite at the initial values");
  for (int k = 1; k <= config.max_iter; ++k) {
    const double prev = solver.objective();
    solver.step();
    const double cur = solver.objective();
    out.iterations = k;
    require(std::isfinite(cur), Errc::non_finite,
            "objective became non-finite at iteration " + std::to_string(k) + " (previous value " +
                std::to_string(prev) + ")");
    out.trace.push_back(cur);
    const double rel = std::abs(cur - prev) / std::max(std::abs(prev), 1e-300);
    if (rel < config.tol && (config.grad_tol <= 0.0 || solver.gradient_inf_norm() < config.grad_tol)) {
      out.converged = true;
      break;
    }
  }
  out.Z = solver.Z();
  out.betas = solver.B().transpose();
  return out;
}

inline ModelFit fit(const NetworkDataset& data, const DesignMatrix& design, const FitConfig& config = {}) {
  return fit(data, design.X, config);
}

}  // namespace odin
