#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "odin/dataset.hpp"
#include "odin/error.hpp"

namespace odin {

/// Probability floor used wherever a probability feeds a log or a weight.
inline constexpr double kProbabilityFloor = 1e-12;

/// log(1 + e^eta) without overflow.
inline double softplus(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

inline double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// eta_i = Z + X beta_i for one subject.
inline Eigen::VectorXd linear_predictor(const Eigen::VectorXd& Z, const Eigen::VectorXd& beta,
                                        const Eigen::MatrixXd& X) {
  require(X.rows() == Z.size() && X.cols() == beta.size(), Errc::dimension_mismatch,
          "linear predictor: dimensions of Z, beta and X disagree");
  return Z + X * beta;
}

/// Logistic probabilities, clamped to [1e-12, 1 - 1e-12].
inline Eigen::VectorXd probabilities(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double e) { return clamp_probability(sigmoid(e)); });
}

namespace detail {

inline void check_shapes(const NetworkDataset& data, const Eigen::MatrixXd& X, const Eigen::VectorXd& Z,
                         const Eigen::MatrixXd& betas) {
  require(static_cast<std::size_t>(X.rows()) == data.edges() && Z.size() == X.rows(), Errc::dimension_mismatch,
          "design matrix / Z length does not match the dataset edge count");
  require(static_cast<std::size_t>(betas.rows()) == data.subjects() && betas.cols() == X.cols(),
          Errc::dimension_mismatch, "betas must be N x p");
}

inline void check_finite(const Eigen::VectorXd& Z, const Eigen::MatrixXd& betas, double lambda) {
  require(Z.allFinite() && betas.allFinite() && std::isfinite(lambda), Errc::non_finite,
          "non-finite parameter value");
}

}  // namespace detail

/// Penalized log-likelihood
///   (1/N) sum_i sum_l [a_il eta_il - log(1 + e^eta_il)] - (lambda/2) |Z|^2.
/// betas is N x p (one row per subject).
inline double objective(const NetworkDataset& data, const Eigen::MatrixXd& X, const Eigen::VectorXd& Z,
                        const Eigen::MatrixXd& betas, double lambda) {
  detail::check_shapes(data, X, Z, betas);
  detail::check_finite(Z, betas, lambda);
  const auto& A = data.edge_matrix();
  CompensatedSum total;
  for (Eigen::Index i = 0; i < betas.rows(); ++i) {
    const Eigen::VectorXd eta = Z + X * betas.row(i).transpose();
    for (Eigen::Index l = 0; l < eta.size(); ++l) total.add((A(i, l) ? eta(l) : 0.0) - softplus(eta(l)));
  }
  const double n = static_cast<double>(data.subjects());
  return total.value() / n - 0.5 * lambda * Z.squaredNorm();
}

/// Gradient of the objective, stacked as (Z; beta_1; ...; beta_N).
inline Eigen::VectorXd gradient(const NetworkDataset& data, const Eigen::MatrixXd& X, const Eigen::VectorXd& Z,
                                const Eigen::MatrixXd& betas, double lambda) {
  detail::check_shapes(data, X, Z, betas);
  detail::check_finite(Z, betas, lambda);
  const auto L = Z.size();
  const auto p = X.cols();
  const auto N = betas.rows();
  const double n = static_cast<double>(N);
  const auto& A = data.edge_matrix();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(L + N * p);
  Eigen::VectorXd zsum = Eigen::VectorXd::Zero(L);
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::VectorXd eta = Z + X * betas.row(i).transpose();
    Eigen::VectorXd r(L);
    for (Eigen::Index l = 0; l < L; ++l) r(l) = static_cast<double>(A(i, l)) - sigmoid(eta(l));
    zsum += r;
    g.segment(L + i * p, p) = X.transpose() * r / n;
  }
  g.head(L) = zsum / n - lambda * Z;
  return g;
}

}  // namespace odin
