#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "topicgraph/common.hpp"
#include "topicgraph/graph.hpp"

using namespace topicgraph;

namespace {

oracle::EdgeSet as_set(const std::vector<NodePair>& pairs) { return {pairs.begin(), pairs.end()}; }

Eigen::MatrixXd random_similarities(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
  }
  return oracle::cosine(x);
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("n" + std::to_string(i));
  return out;
}

double tree_distance(const Eigen::MatrixXd& s, const std::vector<NodePair>& tree) {
  double total = 0.0;
  for (const auto& [i, j] : tree) total += 1.0 - s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return total;
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, 0, 2, -3, 0, 0, 0;
  ScopedWarningCapture w;
  const auto s = cosine_similarity(EmbeddingMatrix(ids(4), x, EmbeddingKind::external));
  CHECK(s(0, 1) == doctest::Approx(0.0));
  CHECK(s(0, 2) == doctest::Approx(-1.0));
  CHECK(s(0, 3) == 0.0);
  CHECK(s(3, 3) == 1.0);
  CHECK(s.isApprox(s.transpose()));
}

TEST_CASE("cosine similarity agrees with pairwise computation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(25, 6);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
  }
  const auto s = cosine_similarity(EmbeddingMatrix(ids(25), x, EmbeddingKind::external));
  CHECK((s - oracle::cosine(x)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(s.maxCoeff() <= 1.0);
  CHECK(s.minCoeff() >= -1.0);
}

TEST_CASE("MST matches Kruskal and the exhaustive minimum") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
    const auto s = random_similarities(n, 3, rng);
    const auto tree = minimum_spanning_tree(s);
    CHECK(tree.size() == n - 1);
    CHECK(as_set(tree) == oracle::kruskal_mst(s));
    CHECK(tree_distance(s, tree) == doctest::Approx(oracle::min_spanning_tree_weight(s)).epsilon(1e-12));
  }
}

TEST_CASE("MST on larger inputs matches Kruskal") {
  std::mt19937_64 rng(23);
  for (std::size_t n : {20u, 57u, 120u}) {
    const auto s = random_similarities(n, 5, rng);
    CHECK(as_set(minimum_spanning_tree(s)) == oracle::kruskal_mst(s));
  }
}

TEST_CASE("MST of two nodes is their edge") {
  Eigen::MatrixXd s(2, 2);
  s << 1, 0.3, 0.3, 1;
  CHECK(minimum_spanning_tree(s) == std::vector<NodePair>{{0, 1}});
}

TEST_CASE("MST ties among duplicate rows resolve by index") {
  // Four identical vectors: every distance is 0, so the tree is a star on 0.
  const Eigen::MatrixXd s = Eigen::MatrixXd::Ones(4, 4);
  CHECK(as_set(minimum_spanning_tree(s)) == oracle::EdgeSet{{0, 1}, {0, 2}, {0, 3}});
  CHECK(as_set(minimum_spanning_tree(s)) == oracle::kruskal_mst(s));
}

TEST_CASE("kNN matches brute force") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial);
    const auto s = random_similarities(n, 4, rng);
    for (std::size_t k : {1u, 3u, 13u}) {
      if (k < n) CHECK(as_set(knn_edges(s, k)) == oracle::knn(s, k));
    }
    CHECK_THROWS_AS(knn_edges(s, n), InputError);
    CHECK_THROWS_AS(knn_edges(s, 0), InputError);
  }
}

TEST_CASE("kNN with k = N-1 is complete") {
  std::mt19937_64 rng(31);
  const auto s = random_similarities(9, 3, rng);
  CHECK(knn_edges(s, 8).size() == 9 * 8 / 2);
}

TEST_CASE("kNN star example") {
  // Node 0 is everyone's nearest neighbour; the leaves are mutually far apart.
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(5, 5, -0.5);
  s.diagonal().setOnes();
  for (Eigen::Index i = 1; i < 5; ++i) s(0, i) = s(i, 0) = 0.1 * static_cast<double>(i);
  // Node 0 keeps its single best (node 4); each leaf keeps node 0.
  CHECK(as_set(knn_edges(s, 1)) == oracle::EdgeSet{{0, 1}, {0, 2}, {0, 3}, {0, 4}});
}

TEST_CASE("kNN ties go to the lower index") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(4, 4, 0.5);
  s.diagonal().setOnes();
  // Every node picks its lowest-index other node.
  CHECK(as_set(knn_edges(s, 1)) == oracle::EdgeSet{{0, 1}, {0, 2}, {0, 3}});
}

TEST_CASE("MST-kNN graph properties") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10 + 7 * static_cast<std::size_t>(trial);
    const auto s = random_similarities(n, 3, rng);
    std::size_t previous_edges = 0;
    for (std::size_t k : {1u, 3u, 13u}) {
      const auto g = mst_knn(s, k);
      CHECK(g.n_nodes() == n);
      CHECK(g.is_connected());
      oracle::EdgeSet expected = oracle::kruskal_mst(s);
      const auto nn = oracle::knn(s, std::min(k, n - 1));
      expected.insert(nn.begin(), nn.end());
      CHECK(as_set(g.edge_pairs()) == expected);
      CHECK(g.edges().size() <= (n - 1) + n * k);
      CHECK(g.edges().size() >= previous_edges);
      previous_edges = g.edges().size();
      for (const auto& e : g.edges()) {
        const double sim = s(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j));
        CHECK(e.weight == std::max(sim, kDefaultWeightFloor));
        CHECK(e.weight > 0.0);
      }
    }
  }
}

TEST_CASE("mst_knn rejects k = 0") {
  CHECK_THROWS_AS(mst_knn(Eigen::MatrixXd::Identity(3, 3), 0), InputError);
}

TEST_CASE("weight floor applies to non-positive similarities") {
  Eigen::MatrixXd s(3, 3);
  s << 1, -0.4, 0.0, -0.4, 1, 0.2, 0.0, 0.2, 1;
  const auto g = mst_knn(s, 2, 1e-3);
  for (const auto& e : g.edges()) CHECK(e.weight >= 1e-3);
  CHECK(g.edges().size() == 3);
}

TEST_CASE("graph TSV round trip") {
  TempDir dir("graph_tsv");
  std::mt19937_64 rng(41);
  const auto g = mst_knn(random_similarities(30, 4, rng), 3);
  save_graph(g, dir / "g.tsv");
  const auto back = load_graph(dir / "g.tsv");
  CHECK(back.n_nodes() == g.n_nodes());
  CHECK(back.edges() == g.edges());
  CHECK(back.total_weight() == g.total_weight());
}

TEST_CASE("similarity graph validation") {
  CHECK_THROWS_AS(SimilarityGraph(3, {{1, 1, 1.0}}), InputError);
  CHECK_THROWS_AS(SimilarityGraph(3, {{0, 1, 1.0}, {1, 0, 2.0}}), InputError);
  CHECK_THROWS_AS(SimilarityGraph(3, {{0, 3, 1.0}}), InputError);
  CHECK_THROWS_AS(SimilarityGraph(3, {{0, 1, 0.0}}), InputError);
  CHECK_THROWS_AS(SimilarityGraph(3, {{0, 1, std::nan("")}}), InputError);
  const SimilarityGraph g(3, {{2, 0, 1.5}, {0, 1, 0.5}});
  CHECK(g.edges()[0] == Edge{0, 1, 0.5});
  CHECK(g.edges()[1] == Edge{0, 2, 1.5});
  CHECK(g.degree() == std::vector<double>{2.0, 0.5, 1.5});
  CHECK(g.total_weight() == 4.0);
  CHECK(g.is_connected());
  CHECK_FALSE(SimilarityGraph(3, {{0, 1, 1.0}}).is_connected());
}
