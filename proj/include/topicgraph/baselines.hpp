#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "topicgraph/features.hpp"
#include "topicgraph/partition.hpp"

namespace topicgraph {

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;  // stop when no centroid moves farther than this
  std::size_t n_init = 10;
};

struct KMeansResult {
  Partition partition;
  Eigen::MatrixXd centroids;  // row c is the centroid of cluster c
  double inertia = 0.0;
  std::size_t iterations = 0;
  /// Inertia after each assignment step of the winning initialization.
  std::vector<double> inertia_history;
};

/// k-means++ seeding followed by Lloyd iterations on Euclidean distance; the
/// best of n_init seeded restarts is returned. Empty clusters are refilled
/// with the point farthest from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});
KMeansResult kmeans(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

struct Merge {
  std::size_t a = 0;  // cluster ids: leaves are 0..N-1, merge k creates N+k
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

class Dendrogram {
 public:
  Dendrogram(std::size_t n_leaves, std::vector<Merge> merges);

  std::size_t n_leaves() const { return n_leaves_; }
  const std::vector<Merge>& merges() const { return merges_; }
  /// Applies the first N-k merges.
  Partition cut(std::size_t k) const;

 private:
  std::size_t n_leaves_;
  std::vector<Merge> merges_;
};

/// Ward agglomeration via the nearest-neighbour chain with Lance-Williams
/// updates. Heights are Ward distances sqrt(2 n_a n_b / (n_a + n_b)) |c_a - c_b|.
Dendrogram ward_linkage(const Eigen::MatrixXd& x);

Partition ward(const Eigen::MatrixXd& x, std::size_t k);
Partition ward(const EmbeddingMatrix& m, std::size_t k);

}  // namespace topicgraph
