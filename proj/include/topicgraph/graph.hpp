#pragma once

#include <cstddef>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "topicgraph/features.hpp"

namespace topicgraph {

struct Edge {
  std::size_t i = 0;  // i < j
  std::size_t j = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

using NodePair = std::pair<std::size_t, std::size_t>;  // first < second

/// Undirected weighted graph, each unordered pair stored once.
///
/// Construction orients every edge as i < j, sorts edges lexicographically,
/// and rejects self-loops, duplicate pairs, out-of-range nodes and
/// non-positive or non-finite weights.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;
  SimilarityGraph(std::size_t n_nodes, std::vector<Edge> edges);

  std::size_t n_nodes() const { return n_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Weighted degree d_i.
  const std::vector<double>& degree() const { return degree_; }
  /// 2m = sum of weighted degrees.
  double total_weight() const { return total_weight_; }

  bool is_connected() const;
  std::vector<NodePair> edge_pairs() const;

 private:
  std::size_t n_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> degree_;
  double total_weight_ = 0.0;
};

/// Dense symmetric cosine similarities, clamped to [-1, 1]. The diagonal is 1;
/// a zero row has similarity 0 to every other row.
Eigen::MatrixXd cosine_similarity(const EmbeddingMatrix& m);

/// Minimum spanning tree over distances 1 - s_ij. Equal distances are ordered
/// by the (i, j) index pair, which makes the tree unique and reproducible.
std::vector<NodePair> minimum_spanning_tree(const Eigen::MatrixXd& similarities);

/// Each node linked to its k most similar other nodes (ties to the lower
/// index), symmetrized and deduplicated.
std::vector<NodePair> knn_edges(const Eigen::MatrixXd& similarities, std::size_t k);

inline constexpr std::size_t kDefaultNeighbours = 13;
inline constexpr double kDefaultWeightFloor = 1e-6;

/// MST union kNN with weights max(s_ij, weight_floor).
SimilarityGraph mst_knn(const Eigen::MatrixXd& similarities, std::size_t k = kDefaultNeighbours,
                        double weight_floor = kDefaultWeightFloor);
SimilarityGraph mst_knn(const EmbeddingMatrix& m, std::size_t k = kDefaultNeighbours,
                        double weight_floor = kDefaultWeightFloor);

void save_graph(const SimilarityGraph& g, const std::filesystem::path& path);
SimilarityGraph load_graph(const std::filesystem::path& path);

}  // namespace topicgraph
