#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "test_support.hpp"

using namespace odin;

namespace {

SimConfig small_config(std::uint64_t seed) {
  SimConfig c;
  c.subjects = 40;
  c.nodes = 14;
  c.lobes_per_hemisphere = 2;
  c.outlier_fraction = 0.2;
  c.flip_fraction = 0.1;
  c.seed = seed;
  return c;
}

NetworkDataset complete_graphs(std::size_t V, std::size_t N) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back(subject_id(i));
  return NetworkDataset(V, ids, EdgeMatrix::Ones(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(edge_count(V))));
}

double residual(const NetworkDataset& d, const TnpcaModel& m) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.subjects(); ++i) {
    const Eigen::MatrixXd A = devectorize(d.edge_matrix().row(static_cast<Eigen::Index>(i))).cast<double>();
    total += (A - m.reconstruct(i)).squaredNorm();
  }
  return total;
}

}  // namespace

TEST(Atlas, BalancedBlocks) {
  const Atlas a = make_balanced_atlas(70, 2, 5);
  ASSERT_EQ(a.size(), 70u);
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& r : a.rois()) ++counts[{r.hemisphere, r.lobe}];
  EXPECT_EQ(counts.size(), 10u);
  for (const auto& [key, n] : counts) EXPECT_EQ(n, 7);
}

TEST(SimulateModel, LabelCountsAndShapes) {
  const LabeledDataset d = simulate_model(small_config(1));
  EXPECT_EQ(d.data.subjects(), 40u);
  EXPECT_EQ(d.data.nodes(), 14u);
  EXPECT_EQ(d.is_outlier.size(), 40u);
  EXPECT_EQ(d.outlier_count(), 8u);
  EXPECT_EQ(d.atlas.size(), 14u);
}

TEST(SimulateModel, ReproducibleAndThreadIndependent) {
  SimConfig c = small_config(9);
  const LabeledDataset a = simulate_model(c);
  const LabeledDataset b = simulate_model(c);
  c.threads = 4;
  const LabeledDataset t = simulate_model(c);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.data, t.data);
  EXPECT_EQ(a.is_outlier, t.is_outlier);
  c.seed = 10;
  EXPECT_FALSE(simulate_model(c).data == a.data);
}

TEST(SimulateModel, ZeroFlipLeavesOutliersUncontaminated) {
  SimConfig c = small_config(4);
  c.flip_fraction = 0.0;
  const LabeledDataset flipped0 = simulate_model(c);
  c.outlier_fraction = 0.0;
  const LabeledDataset clean = simulate_model(c);
  EXPECT_EQ(flipped0.outlier_count(), 8u);
  EXPECT_EQ(flipped0.data, clean.data);
}

TEST(SimulateModel, FlipChangesExactlyTheRequestedCount) {
  SimConfig c = small_config(5);
  const LabeledDataset dirty = simulate_model(c);
  c.flip_fraction = 0.0;
  const LabeledDataset clean = simulate_model(c);
  const std::size_t want = fraction_count(0.1, edge_count(14));
  for (std::size_t i = 0; i < 40; ++i) {
    const auto diff = (dirty.data.edge_matrix().row(static_cast<Eigen::Index>(i)).cast<int>() -
                       clean.data.edge_matrix().row(static_cast<Eigen::Index>(i)).cast<int>())
                          .cwiseAbs()
                          .sum();
    EXPECT_EQ(static_cast<std::size_t>(diff), dirty.is_outlier[i] ? want : 0u);
  }
}

TEST(SimulateModel, FullFlipGivesComplements) {
  SimConfig c = small_config(6);
  c.flip_fraction = 1.0;
  const LabeledDataset dirty = simulate_model(c);
  c.flip_fraction = 0.0;
  const LabeledDataset clean = simulate_model(c);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const auto sum = dirty.data.edge_matrix().row(i).cast<int>() + clean.data.edge_matrix().row(i).cast<int>();
    if (dirty.is_outlier[static_cast<std::size_t>(i)])
      EXPECT_TRUE((sum.array() == 1).all());
    else
      EXPECT_EQ(dirty.data.edge_matrix().row(i), clean.data.edge_matrix().row(i));
  }
}

TEST(SimulateModel, FlipIsAnInvolution) {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1> a(6);
  a << 1, 0, 0, 1, 1, 0;
  const auto orig = a;
  std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  flip_edges(a, all);
  EXPECT_EQ((a.cast<int>() + orig.cast<int>()).minCoeff(), 1);
  flip_edges(a, all);
  EXPECT_EQ(a, orig);
}

TEST(SimulateModel, InvalidConfigsRejected) {
  SimConfig c = small_config(1);
  c.outlier_fraction = 1.0;
  EXPECT_THROW(simulate_model(c), Error);
  c = small_config(1);
  c.flip_fraction = 1.5;
  EXPECT_THROW(simulate_model(c), Error);
  c = small_config(1);
  c.nodes = 3;
  EXPECT_THROW(simulate_model(c), Error);
}

TEST(Tnpca, CompleteGraphOnThreeNodes) {
  const TnpcaModel m = tnpca_fit(complete_graphs(3, 5), 1);
  const Eigen::VectorXd v = m.components.col(0);
  const Eigen::VectorXd want = Eigen::VectorXd::Constant(3, 1.0 / std::sqrt(3.0));
  EXPECT_LT((v - want).cwiseAbs().maxCoeff(), 1e-12);  // sign convention makes it positive
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(m.embeddings(i, 0), 2.0, 1e-12);
}

TEST(Tnpca, ZeroComponents) {
  const LabeledDataset d = simulate_model(small_config(2));
  const TnpcaModel m = tnpca_fit(d.data, 0);
  EXPECT_EQ(m.rank(), 0u);
  EXPECT_EQ(m.reconstruct(3), Eigen::MatrixXd::Zero(14, 14));
  EXPECT_EQ(m.final_objective(), m.initial_objective);
}

TEST(Tnpca, RejectsTooManyComponents) {
  const LabeledDataset d = simulate_model(small_config(2));
  EXPECT_THROW(tnpca_fit(d.data, 15), Error);
}

TEST(Tnpca, OrthonormalComponents) {
  const LabeledDataset d = simulate_model(small_config(3));
  const TnpcaModel m = tnpca_fit(d.data, 10);
  const Eigen::MatrixXd G = m.components.transpose() * m.components;
  for (Eigen::Index a = 0; a < 10; ++a) {
    EXPECT_NEAR(G(a, a), 1.0, 1e-12);
    for (Eigen::Index b = 0; b < a; ++b) EXPECT_LT(std::abs(G(a, b)), 1e-8);
  }
}

TEST(Tnpca, ObjectiveNeverIncreases) {
  const LabeledDataset d = simulate_model(small_config(4));
  const TnpcaModel m = tnpca_fit(d.data, 8);
  double prev = m.initial_objective;
  for (const auto& h : m.objective_history)
    for (double v : h) {
      EXPECT_LE(v, prev + 1e-9 * prev);
      prev = v;
    }
  EXPECT_NEAR(m.final_objective(), residual(d.data, m), 1e-8 * m.initial_objective);
}

TEST(Tnpca, ErrorNonIncreasingInRank) {
  const LabeledDataset d = simulate_model(small_config(5));
  double prev = residual(d.data, tnpca_fit(d.data, 0));
  for (std::size_t K = 1; K <= 14; K += 3) {
    const double r = residual(d.data, tnpca_fit(d.data, K));
    EXPECT_LE(r, prev * (1.0 + 1e-12));
    prev = r;
  }
}

TEST(Tnpca, JsonRoundTrip) {
  const LabeledDataset d = simulate_model(small_config(6));
  const TnpcaModel m = tnpca_fit(d.data, 4);
  std::vector<std::string> ids;
  const TnpcaModel back = tnpca_from_json(tnpca_to_json(m, d.data.subject_ids()), &ids);
  EXPECT_EQ(back.components, m.components);
  EXPECT_EQ(back.embeddings, m.embeddings);
  EXPECT_EQ(ids, d.data.subject_ids());
}

TEST(Binarize, TieRoundsUp) {
  Eigen::MatrixXd S(3, 3);
  S << 0.0, 0.5, 0.49999999, 0.5, 0.0, 0.7, 0.49999999, 0.7, 0.0;
  const auto a = binarize(S);
  // lower triangle in edge order: (1,0), (2,0), (2,1)
  EXPECT_EQ(a(0), 1);
  EXPECT_EQ(a(1), 0);
  EXPECT_EQ(a(2), 1);
}

TEST(SimulateTnpca, ZeroNoiseMakesOutliersIndistinguishable) {
  SimConfig c = small_config(7);
  c.outlier_fraction = 0.0;
  const LabeledDataset base = simulate_model(c);
  const TnpcaModel m = tnpca_fit(base.data, 6);
  const LabeledDataset noisy = simulate_tnpca(m, base.data.subject_ids(), base.atlas, 0.0, 0.25, 3);
  const LabeledDataset none = simulate_tnpca(m, base.data.subject_ids(), base.atlas, 0.0, 0.0, 3);
  EXPECT_EQ(noisy.outlier_count(), 10u);
  EXPECT_EQ(noisy.data, none.data);
}

TEST(SimulateTnpca, NoiseOnlyTouchesOutliersAndIsReproducible) {
  SimConfig c = small_config(8);
  c.outlier_fraction = 0.0;
  const LabeledDataset base = simulate_model(c);
  const TnpcaModel m = tnpca_fit(base.data, 6);
  const LabeledDataset clean = simulate_tnpca(m, base.data.subject_ids(), base.atlas, 0.0, 0.0, 1);
  const LabeledDataset a = simulate_tnpca(m, base.data.subject_ids(), base.atlas, 0.5, 0.25, 1);
  const LabeledDataset b = simulate_tnpca(m, base.data.subject_ids(), base.atlas, 0.5, 0.25, 1);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.is_outlier, b.is_outlier);
  std::size_t changed = 0;
  for (Eigen::Index i = 0; i < 40; ++i) {
    const bool same = a.data.edge_matrix().row(i) == clean.data.edge_matrix().row(i);
    if (!a.is_outlier[static_cast<std::size_t>(i)]) { EXPECT_TRUE(same); }
    changed += !same;
  }
  EXPECT_GT(changed, 0u);
}

TEST(SimulateTnpca, BinarizedOutputIsAValidDataset) {
  SimConfig c = small_config(9);
  const LabeledDataset base = simulate_model(c);
  const LabeledDataset t = simulate_tnpca(base.data, base.atlas, 5, 0.1, 0.1, 2);
  EXPECT_EQ(t.data.subjects(), 40u);
  EXPECT_EQ(t.data.nodes(), 14u);
  EXPECT_EQ(t.outlier_count(), 4u);
}

TEST(Labels, CsvRoundTrip) {
  const LabeledDataset d = simulate_model(small_config(11));
  testing_support::TempDir dir("labels");
  write_labels_csv(d, dir.file("labels.csv"));
  EXPECT_EQ(read_labels_csv(dir.file("labels.csv"), d.data.subject_ids()), d.is_outlier);
  EXPECT_EQ(testing_support::slurp(dir.file("labels.csv")).substr(0, 21), "subject_id,is_outlier");
}

TEST(Random, SubstreamsAreStableAndDistinct) {
  RandomStream a = substream(1, "x", 0), b = substream(1, "x", 0), c = substream(1, "x", 1), d = substream(1, "y", 0);
  const auto va = a.next();
  EXPECT_EQ(va, b.next());
  EXPECT_NE(va, c.next());
  EXPECT_NE(va, d.next());
}

TEST(Random, SampleWithoutReplacement) {
  RandomStream rng(3);
  const auto s = rng.sample_without_replacement(50, 20);
  std::set<std::size_t> uniq(s.begin(), s.end());
  EXPECT_EQ(uniq.size(), 20u);
  EXPECT_LT(*uniq.rbegin(), 50u);
  EXPECT_THROW(rng.sample_without_replacement(5, 6), Error);
}

TEST(Random, NormalMoments) {
  RandomStream rng(11);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
