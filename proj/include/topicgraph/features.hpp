#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "topicgraph/corpus.hpp"

namespace topicgraph {

enum class EmbeddingKind { tf, tfidf, tfidf_lsa, external };

std::string_view to_string(EmbeddingKind kind);

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// N x D document feature matrix, row-aligned with a corpus.
///
/// Storage is either dense or row-major sparse. Construction rejects
/// non-finite entries and a doc id count that disagrees with the row count.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::vector<std::string> doc_ids, Eigen::MatrixXd rows, EmbeddingKind kind);
  EmbeddingMatrix(std::vector<std::string> doc_ids, SparseRows rows, EmbeddingKind kind);

  std::size_t rows() const { return doc_ids_.size(); }
  std::size_t dim() const;
  bool is_sparse() const { return sparse_; }
  EmbeddingKind kind() const { return kind_; }
  bool l2_normalized() const { return l2_normalized_; }
  const std::vector<std::string>& doc_ids() const { return doc_ids_; }

  const Eigen::MatrixXd& dense() const { return dense_; }
  const SparseRows& sparse() const { return sparse_rows_; }
  /// Dense copy regardless of storage.
  Eigen::MatrixXd to_dense() const;

  /// Row indices whose every entry is zero.
  std::vector<std::size_t> zero_rows() const;
  Eigen::VectorXd row_norms() const;

  EmbeddingMatrix& mark_l2_normalized() {
    l2_normalized_ = true;
    return *this;
  }

 private:
  void check_finite() const;

  std::vector<std::string> doc_ids_;
  Eigen::MatrixXd dense_;
  SparseRows sparse_rows_;
  bool sparse_ = false;
  EmbeddingKind kind_ = EmbeddingKind::external;
  bool l2_normalized_ = false;
};

/// Bag-of-words counts over `vocab` (out-of-vocabulary tokens ignored).
EmbeddingMatrix term_frequency(const Corpus& corpus, const Vocabulary& vocab);

/// tf(d,t) * ln(N/df(t)) with raw or 1+ln sublinear tf, rows L2-normalized.
/// Documents without in-vocabulary tokens become zero rows and are reported.
EmbeddingMatrix tfidf(const Corpus& corpus, const Vocabulary& vocab, bool sublinear = false);

/// Scales every nonzero row to unit norm; zero rows are kept and reported.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

struct RandomizedSvdOptions {
  std::size_t oversampling = 10;
  std::size_t min_power_iterations = 4;
  std::size_t max_power_iterations = 64;
  /// Stop once the leading subspace moves by less than this between iterations.
  double subspace_tolerance = 1e-10;
};

struct TruncatedSvd {
  Eigen::MatrixXd u;                // N x k
  Eigen::VectorXd singular_values;  // non-increasing
  Eigen::MatrixXd v;                // D x k
  std::size_t power_iterations = 0;
};

/// Randomized range finder with normalized power iterations, followed by an
/// exact SVD of the projected matrix. Deterministic given the seed; column
/// signs are fixed so the largest-magnitude entry of each u column is positive.
TruncatedSvd randomized_svd(const Eigen::MatrixXd& a, std::size_t k, std::uint64_t seed,
                            const RandomizedSvdOptions& options = {});
TruncatedSvd randomized_svd(const SparseRows& a, std::size_t k, std::uint64_t seed,
                            const RandomizedSvdOptions& options = {});

/// Projects rows onto the top target_dim singular directions scaled by the
/// singular values (U_k * S_k). Columns beyond the matrix rank are zero.
EmbeddingMatrix lsa_reduce(const EmbeddingMatrix& m, std::size_t target_dim = 300, std::uint64_t seed = 0,
                           const RandomizedSvdOptions& options = {});

/// Reads the TSV embedding format and reorders rows into corpus order.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Corpus& corpus);

/// Reads the TSV embedding format in file order.
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);

}  // namespace topicgraph
