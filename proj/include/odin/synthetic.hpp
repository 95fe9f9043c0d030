#pragma once

// Seeded simulation designs:
//  * simulate_model: draws data from the hierarchical logistic model and
//    corrupts a fraction of subjects by flipping a fixed share of their edges;
//  * simulate_tnpca: embeds a base sample with tensor-network PCA, perturbs
//    the embeddings of a fraction of subjects, and rounds the reconstructions
//    back to binary networks.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "odin/atlas.hpp"
#include "odin/dataset.hpp"
#include "odin/design.hpp"
#include "odin/edge_index.hpp"
#include "odin/error.hpp"
#include "odin/model.hpp"
#include "odin/parallel.hpp"
#include "odin/random.hpp"

namespace odin {

struct SimConfig {
  std::size_t subjects = 500;
  std::size_t nodes = 70;
  std::size_t hemispheres = 2;
  std::size_t lobes_per_hemisphere = 5;
  double outlier_fraction = 0.10;
  double flip_fraction = 0.10;
  double z_clamp = 30.0;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    require(subjects >= 1, Errc::invalid_config, "subjects must be >= 1");
    require(nodes >= 3, Errc::invalid_config, "nodes must be >= 3");
    require(hemispheres >= 1 && lobes_per_hemisphere >= 1, Errc::invalid_config,
            "hemispheres and lobes_per_hemisphere must be >= 1");
    require(hemispheres >= 2 || lobes_per_hemisphere >= 2, Errc::invalid_config,
            "need two hemispheres or two lobes for a non-empty design");
    require(nodes >= hemispheres * lobes_per_hemisphere, Errc::invalid_config,
            "nodes must be at least hemispheres * lobes_per_hemisphere");
    require(outlier_fraction >= 0.0 && outlier_fraction < 1.0, Errc::invalid_config,
            "outlier_fraction must be in [0, 1)");
    require(flip_fraction >= 0.0 && flip_fraction <= 1.0, Errc::invalid_config, "flip_fraction must be in [0, 1]");
    require(z_clamp > 0.0, Errc::invalid_config, "z_clamp must be > 0");
    require(threads >= 1, Errc::invalid_config, "threads must be >= 1");
  }
};

inline nlohmann::json to_json(const SimConfig& c) {
  return {{"subjects", c.subjects},
          {"nodes", c.nodes},
          {"hemispheres", c.hemispheres},
          {"lobes_per_hemisphere", c.lobes_per_hemisphere},
          {"outlier_fraction", c.outlier_fraction},
          {"flip_fraction", c.flip_fraction},
          {"z_clamp", c.z_clamp},
          {"seed", c.seed}};
}

struct LabeledDataset {
  NetworkDataset data;
  Atlas atlas;
  std::vector<bool> is_outlier;

  std::size_t outlier_count() const {
    return static_cast<std::size_t>(std::count(is_outlier.begin(), is_outlier.end(), true));
  }
};

/// ceil(fraction * n), robust to representation error in the product.
inline std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

inline std::string subject_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub%05zu", i + 1);
  return buf;
}

/// Hemispheres in contiguous ROI blocks; each hemisphere split into
/// contiguous lobe blocks. Lobe labels are shared across hemispheres.
inline Atlas make_balanced_atlas(std::size_t nodes, std::size_t hemispheres, std::size_t lobes) {
  std::vector<Roi> rois(nodes);
  std::vector<std::size_t> hemi_of(nodes), per_hemi(hemispheres, 0);
  for (std::size_t r = 0; r < nodes; ++r) {
    hemi_of[r] = r * hemispheres / nodes;
    ++per_hemi[hemi_of[r]];
  }
  std::vector<std::size_t> seen(hemispheres, 0);
  for (std::size_t r = 0; r < nodes; ++r) {
    const std::size_t h = hemi_of[r];
    const std::size_t lobe = seen[h]++ * lobes / per_hemi[h];
    rois[r].id = "roi" + std::to_string(r + 1);
    rois[r].hemisphere = hemispheres == 2 ? (h == 0 ? "L" : "R") : "H" + std::to_string(h + 1);
    rois[r].lobe = "lobe" + std::to_string(lobe + 1);
  }
  return Atlas(std::move(rois));
}

template <typename Vec>
void flip_edges(Vec& edges, const std::vector<std::size_t>& positions) {
  for (std::size_t l : positions) edges(static_cast<Eigen::Index>(l)) = static_cast<std::uint8_t>(1 - edges(static_cast<Eigen::Index>(l)));
}

inline LabeledDataset simulate_model(const SimConfig& config) {
  config.validate();
  Atlas atlas = make_balanced_atlas(config.nodes, config.hemispheres, config.lobes_per_hemisphere);
  const DesignMatrix design = build_design(atlas);
  const auto L = static_cast<Eigen::Index>(edge_count(config.nodes));
  const auto p = static_cast<Eigen::Index>(design.cols());
  const std::size_t N = config.subjects;

  Eigen::VectorXd Z(L);
  {
    RandomStream rng = substream(config.seed, "model-z");
    for (Eigen::Index l = 0; l < L; ++l) Z(l) = std::clamp(rng.cauchy(), -config.z_clamp, config.z_clamp);
  }
  std::vector<bool> outlier(N, false);
  {
    RandomStream rng = substream(config.seed, "model-outliers");
    for (std::size_t i : rng.sample_without_replacement(N, fraction_count(config.outlier_fraction, N))) outlier[i] = true;
  }
  const std::size_t flips = fraction_count(config.flip_fraction, static_cast<std::size_t>(L));

  EdgeMatrix edges(static_cast<Eigen::Index>(N), L);
  parallel_for(N, config.threads, [&](std::size_t i) {
    RandomStream rng = substream(config.seed, "model-subject", i);
    Eigen::VectorXd beta(p);
    for (Eigen::Index c = 0; c < p; ++c) beta(c) = rng.normal();
    const Eigen::VectorXd eta = Z + design.X * beta;
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> a(L);
    for (Eigen::Index l = 0; l < L; ++l) a(l) = rng.bernoulli(sigmoid(eta(l))) ? 1 : 0;
    if (outlier[i]) flip_edges(a, rng.sample_without_replacement(static_cast<std::size_t>(L), flips));
    edges.row(static_cast<Eigen::Index>(i)) = a.transpose();
  });

  std::vector<std::string> ids(N);
  for (std::size_t i = 0; i < N; ++i) ids[i] = subject_id(i);
  return {NetworkDataset(config.nodes, std::move(ids), std::move(edges)), std::move(atlas), std::move(outlier)};
}

// ---- tensor-network PCA ----

struct TnpcaOptions {
  double tol = 1e-9;   // relative objective change per alternation
  int max_iter = 500;  // alternations per component
};

struct TnpcaModel {
  std::size_t nodes = 0;
  Eigen::MatrixXd components;  // V x K, orthonormal columns
  Eigen::MatrixXd embeddings;  // N x K
  /// sum_i |A_i - sum_k lambda_ik v_k v_k'|^2 after every alternation, per component
  std::vector<std::vector<double>> objective_history;
  double initial_objective = 0.0;

  std::size_t rank() const { return static_cast<std::size_t>(components.cols()); }

  Eigen::MatrixXd reconstruct(std::size_t subject) const {
    return components * embeddings.row(static_cast<Eigen::Index>(subject)).asDiagonal() * components.transpose();
  }
  double final_objective() const {
    return objective_history.empty() ? initial_objective : objective_history.back().back();
  }
};

namespace detail {

// products of endpoint coordinates per edge, so v'A_i v = 2 a_i . e(v)
inline Eigen::VectorXd edge_products(const Eigen::VectorXd& v) {
  const auto V = v.size();
  Eigen::VectorXd e(V * (V - 1) / 2);
  Eigen::Index l = 0;
  for (Eigen::Index u = 1; u < V; ++u)
    for (Eigen::Index w = 0; w < u; ++w) e(l++) = v(u) * v(w);
  return e;
}

inline Eigen::MatrixXd symmetric_from_edges(const Eigen::VectorXd& m, Eigen::Index V) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(V, V);
  Eigen::Index l = 0;
  for (Eigen::Index u = 1; u < V; ++u)
    for (Eigen::Index w = 0; w < u; ++w) M(u, w) = M(w, u) = m(l++);
  return M;
}

// eigenvector of B'MB with the largest algebraic eigenvalue, mapped back by B
inline Eigen::VectorXd top_direction(const Eigen::MatrixXd& M, const Eigen::MatrixXd& B) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B.transpose() * M * B);
  Eigen::VectorXd v = B * eig.eigenvectors().col(eig.eigenvectors().cols() - 1);
  v.normalize();
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v(imax) < 0.0) v = -v;
  return v;
}

}  // namespace detail

/// Greedy rank-one deflation. For each component, alternates between the
/// exact best unit direction (top eigenvector of sum_i lambda_i R_i on the
/// orthogonal complement of earlier components) and the exact best
/// coefficients lambda_i = v'R_i v, so the objective never increases.
inline TnpcaModel tnpca_fit(const NetworkDataset& data, std::size_t K, const TnpcaOptions& options = {}) {
  require(data.subjects() >= 1, Errc::invalid_argument, "TN-PCA needs a non-empty dataset");
  require(K <= data.nodes(), Errc::invalid_argument,
          "TN-PCA rank K=" + std::to_string(K) + " exceeds the node count " + std::to_string(data.nodes()));
  const auto V = static_cast<Eigen::Index>(data.nodes());
  const auto N = static_cast<Eigen::Index>(data.subjects());
  const Eigen::MatrixXd A = data.edge_matrix().cast<double>();  // N x L

  TnpcaModel model;
  model.nodes = data.nodes();
  model.components.resize(V, static_cast<Eigen::Index>(K));
  model.embeddings.resize(N, static_cast<Eigen::Index>(K));
  double residual = 2.0 * A.sum();  // sum_i |A_i|_F^2 for hollow binary A_i
  model.initial_objective = residual;

  const Eigen::VectorXd mean_edges = A.colwise().mean().transpose();
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k) {
    Eigen::MatrixXd B;
    if (k == 0) {
      B = Eigen::MatrixXd::Identity(V, V);
    } else {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(model.components.leftCols(k));
      B = (qr.householderQ() * Eigen::MatrixXd::Identity(V, V)).rightCols(V - k);
    }
    Eigen::VectorXd v = detail::top_direction(detail::symmetric_from_edges(mean_edges, V), B);
    Eigen::VectorXd lam = 2.0 * (A * detail::edge_products(v));
    double obj = residual - lam.squaredNorm();
    std::vector<double> history{obj};
    for (int it = 0; it < options.max_iter; ++it) {
      const Eigen::VectorXd m = A.transpose() * lam;
      v = detail::top_direction(detail::symmetric_from_edges(m, V), B);
      lam = 2.0 * (A * detail::edge_products(v));
      const double next = residual - lam.squaredNorm();
      history.push_back(next);
      const double change = std::abs(obj - next) / std::max(std::abs(obj), 1e-300);
      obj = next;
      if (change < options.tol) break;
    }
    model.components.col(k) = v;
    model.embeddings.col(k) = lam;
    residual = obj;
    model.objective_history.push_back(std::move(history));
  }
  return model;
}

namespace detail {

inline nlohmann::json matrix_rows(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(M.cols()));
    for (Eigen::Index c = 0; c < M.cols(); ++c) row[static_cast<std::size_t>(c)] = M(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows, Eigen::Index cols) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    const auto row = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    require(static_cast<Eigen::Index>(row.size()) == cols, Errc::malformed, "TN-PCA document: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)];
  }
  return M;
}

}  // namespace detail

/// components are stored one unit vector per row
inline nlohmann::json tnpca_to_json(const TnpcaModel& m, const std::vector<std::string>& ids) {
  return {{"format", "odin-tnpca"},
          {"version", 1},
          {"nodes", m.nodes},
          {"rank", m.rank()},
          {"subject_ids", ids},
          {"components", detail::matrix_rows(m.components.transpose())},
          {"embeddings", detail::matrix_rows(m.embeddings)},
          {"initial_objective", m.initial_objective},
          {"objective_history", m.objective_history}};
}

inline TnpcaModel tnpca_from_json(const nlohmann::json& j, std::vector<std::string>* ids = nullptr) {
  try {
    require(j.at("format") == "odin-tnpca", Errc::malformed, "not an odin TN-PCA document");
    TnpcaModel m;
    m.nodes = j.at("nodes").get<std::size_t>();
    const auto K = static_cast<Eigen::Index>(j.at("rank").get<std::size_t>());
    m.components = detail::matrix_from_rows(j.at("components"), static_cast<Eigen::Index>(m.nodes)).transpose();
    require(m.components.cols() == K, Errc::malformed, "TN-PCA document: rank does not match components");
    m.embeddings = detail::matrix_from_rows(j.at("embeddings"), K);
    m.initial_objective = j.at("initial_objective").get<double>();
    m.objective_history = j.at("objective_history").get<std::vector<std::vector<double>>>();
    if (ids) *ids = j.at("subject_ids").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::malformed, std::string("TN-PCA document: ") + e.what());
  }
}

/// Nearest of {0, 1} for each lower-triangle entry; exactly 0.5 rounds to 1.
inline Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> binarize(const Eigen::MatrixXd& S) {
  const auto V = S.rows();
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> a(V * (V - 1) / 2);
  Eigen::Index l = 0;
  for (Eigen::Index u = 1; u < V; ++u)
    for (Eigen::Index w = 0; w < u; ++w) a(l++) = S(u, w) >= 0.5 ? 1 : 0;
  return a;
}

/// Perturbs the embeddings of ceil(fraction * N) random subjects by
/// N(0, sigma^2 I) noise and rebuilds every subject from its embedding.
inline LabeledDataset simulate_tnpca(const TnpcaModel& model, const std::vector<std::string>& ids, const Atlas& atlas,
                                     double sigma, double outlier_fraction, std::uint64_t seed) {
  require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_config, "sigma must be >= 0");
  require(outlier_fraction >= 0.0 && outlier_fraction < 1.0, Errc::invalid_config,
          "outlier_fraction must be in [0, 1)");
  const auto N = static_cast<std::size_t>(model.embeddings.rows());
  require(ids.size() == N, Errc::dimension_mismatch, "subject ids do not match the TN-PCA embeddings");
  require(atlas.size() == model.nodes, Errc::dimension_mismatch, "atlas does not match the TN-PCA model");
  const auto K = model.components.cols();

  std::vector<bool> outlier(N, false);
  {
    RandomStream rng = substream(seed, "tnpca-outliers");
    for (std::size_t i : rng.sample_without_replacement(N, fraction_count(outlier_fraction, N))) outlier[i] = true;
  }
  EdgeMatrix edges(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(edge_count(model.nodes)));
  for (std::size_t i = 0; i < N; ++i) {
    Eigen::VectorXd lam = model.embeddings.row(static_cast<Eigen::Index>(i)).transpose();
    if (outlier[i]) {
      RandomStream rng = substream(seed, "tnpca-noise", i);
      for (Eigen::Index k = 0; k < K; ++k) lam(k) += sigma * rng.normal();
    }
    const Eigen::MatrixXd S = model.components * lam.asDiagonal() * model.components.transpose();
    edges.row(static_cast<Eigen::Index>(i)) = binarize(S).transpose();
  }
  return {NetworkDataset(model.nodes, ids, std::move(edges)), atlas, std::move(outlier)};
}

inline LabeledDataset simulate_tnpca(const NetworkDataset& base, const Atlas& atlas, std::size_t K, double sigma,
                                     double outlier_fraction, std::uint64_t seed) {
  return simulate_tnpca(tnpca_fit(base, K), base.subject_ids(), atlas, sigma, outlier_fraction, seed);
}

inline void write_labels_csv(const LabeledDataset& d, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Errc::io, "cannot write labels file '" + path + "'");
  out << "subject_id,is_outlier\n";
  for (std::size_t i = 0; i < d.is_outlier.size(); ++i)
    out << d.data.subject_ids()[i] << ',' << int(d.is_outlier[i]) << '\n';
}

inline std::vector<bool> read_labels_csv(const std::string& path, const std::vector<std::string>& ids) {
  std::ifstream in(path);
  require(in.good(), Errc::io, "cannot open labels file '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), Errc::malformed, "labels file is empty");
  std::vector<bool> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    detail::strip_cr(line);
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    require(f.size() == 2 && (f[1] == "0" || f[1] == "1"), Errc::malformed, "bad labels line: " + line);
    require(row < ids.size() && f[0] == ids[row], Errc::dimension_mismatch, "labels do not match dataset subjects");
    out.push_back(f[1] == "1");
    ++row;
  }
  require(out.size() == ids.size(), Errc::dimension_mismatch, "labels do not match dataset subjects");
  return out;
}

}  // namespace odin
