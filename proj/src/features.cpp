#include "topicgraph/features.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "topicgraph/common.hpp"

namespace topicgraph {

std::string_view to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::tf: return "tf";
    case EmbeddingKind::tfidf: return "tfidf";
    case EmbeddingKind::tfidf_lsa: return "tfidf_lsa";
    case EmbeddingKind::external: return "external";
  }
  return "external";
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> doc_ids, Eigen::MatrixXd rows, EmbeddingKind kind)
    : doc_ids_(std::move(doc_ids)), dense_(std::move(rows)), sparse_(false), kind_(kind) {
  if (static_cast<std::size_t>(dense_.rows()) != doc_ids_.size()) {
    throw InputError("embedding row count does not match the number of document ids");
  }
  check_finite();
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> doc_ids, SparseRows rows, EmbeddingKind kind)
    : doc_ids_(std::move(doc_ids)), sparse_rows_(std::move(rows)), sparse_(true), kind_(kind) {
  if (static_cast<std::size_t>(sparse_rows_.rows()) != doc_ids_.size()) {
    throw InputError("embedding row count does not match the number of document ids");
  }
  sparse_rows_.makeCompressed();
  check_finite();
}

std::size_t EmbeddingMatrix::dim() const {
  return static_cast<std::size_t>(sparse_ ? sparse_rows_.cols() : dense_.cols());
}

Eigen::MatrixXd EmbeddingMatrix::to_dense() const {
  return sparse_ ? Eigen::MatrixXd(sparse_rows_) : dense_;
}

void EmbeddingMatrix::check_finite() const {
  const bool finite = sparse_ ? std::all_of(sparse_rows_.valuePtr(),
                                            sparse_rows_.valuePtr() + sparse_rows_.nonZeros(),
                                            [](double v) { return std::isfinite(v); })
                              : dense_.allFinite();
  if (!finite) throw InputError("embedding matrix contains NaN or Inf entries");
}

Eigen::VectorXd EmbeddingMatrix::row_norms() const {
  if (!sparse_) return dense_.rowwise().norm();
  Eigen::VectorXd norms(sparse_rows_.rows());
  for (Eigen::Index r = 0; r < sparse_rows_.outerSize(); ++r) {
    double sq = 0.0;
    for (SparseRows::InnerIterator it(sparse_rows_, r); it; ++it) sq += it.value() * it.value();
    norms(r) = std::sqrt(sq);
  }
  return norms;
}

std::vector<std::size_t> EmbeddingMatrix::zero_rows() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows(); ++i) {
    bool zero = true;
    if (sparse_) {
      for (SparseRows::InnerIterator it(sparse_rows_, static_cast<Eigen::Index>(i)); it; ++it) {
        if (it.value() != 0.0) {
          zero = false;
          break;
        }
      }
    } else {
      zero = dense_.row(static_cast<Eigen::Index>(i)).isZero(0.0);
    }
    if (zero) out.push_back(i);
  }
  return out;
}

namespace {

void report_zero_rows(const EmbeddingMatrix& m, std::string_view context) {
  const auto zeros = m.zero_rows();
  if (zeros.empty()) return;
  std::string ids;
  for (std::size_t k = 0; k < zeros.size() && k < 5; ++k) {
    ids += (k ? ", " : "") + m.doc_ids()[zeros[k]];
  }
  if (zeros.size() > 5) ids += ", ...";
  warn(std::string(context) + ": " + std::to_string(zeros.size()) + " zero rows (" + ids + ")");
}

SparseRows count_matrix(const Corpus& corpus, const Vocabulary& vocab) {
  std::unordered_map<std::string_view, int> column;
  column.reserve(vocab.size());
  for (std::size_t t = 0; t < vocab.size(); ++t) column.emplace(vocab.terms[t], static_cast<int>(t));
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    for (const auto& token : corpus[d].tokens) {
      if (auto it = column.find(token); it != column.end()) {
        triplets.emplace_back(static_cast<int>(d), it->second, 1.0);
      }
    }
  }
  SparseRows counts(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(vocab.size()));
  counts.setFromTriplets(triplets.begin(), triplets.end());  // duplicates summed
  return counts;
}

void normalize_rows(SparseRows& m) {
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    double sq = 0.0;
    for (SparseRows::InnerIterator it(m, r); it; ++it) sq += it.value() * it.value();
    if (sq == 0.0) continue;
    const double inv = 1.0 / std::sqrt(sq);
    for (SparseRows::InnerIterator it(m, r); it; ++it) it.valueRef() *= inv;
  }
}

}  // namespace

EmbeddingMatrix term_frequency(const Corpus& corpus, const Vocabulary& vocab) {
  return EmbeddingMatrix(corpus.ids(), count_matrix(corpus, vocab), EmbeddingKind::tf);
}

EmbeddingMatrix tfidf(const Corpus& corpus, const Vocabulary& vocab, bool sublinear) {
  SparseRows m = count_matrix(corpus, vocab);
  const double n = static_cast<double>(corpus.size());
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    for (SparseRows::InnerIterator it(m, r); it; ++it) {
      const double tf = sublinear ? 1.0 + std::log(it.value()) : it.value();
      const double df = static_cast<double>(vocab.document_frequency[static_cast<std::size_t>(it.col())]);
      it.valueRef() = tf * std::log(n / df);
    }
  }
  m.prune(0.0);
  normalize_rows(m);
  EmbeddingMatrix out(corpus.ids(), std::move(m), EmbeddingKind::tfidf);
  out.mark_l2_normalized();
  report_zero_rows(out, "tfidf");
  return out;
}

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out;
  if (m.is_sparse()) {
    SparseRows rows = m.sparse();
    normalize_rows(rows);
    out = EmbeddingMatrix(m.doc_ids(), std::move(rows), m.kind());
  } else {
    Eigen::MatrixXd rows = m.dense();
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
      const double norm = rows.row(r).norm();
      if (norm > 0.0) rows.row(r) /= norm;
    }
    out = EmbeddingMatrix(m.doc_ids(), std::move(rows), m.kind());
  }
  out.mark_l2_normalized();
  report_zero_rows(out, "l2_normalize");
  return out;
}

EmbeddingMatrix lsa_reduce(const EmbeddingMatrix& m, std::size_t target_dim, std::uint64_t seed,
                           const RandomizedSvdOptions& options) {
  if (target_dim == 0) throw InputError("lsa target dimension must be positive");
  const std::size_t max_rank = std::min(m.rows(), m.dim());
  const std::size_t k = std::min(target_dim, max_rank);
  if (k == 0) throw InputError("cannot reduce an empty matrix");
  const TruncatedSvd svd = m.is_sparse() ? randomized_svd(m.sparse(), k, seed, options)
                                         : randomized_svd(m.dense(), k, seed, options);

  // Numerical rank: directions with negligible singular value carry no signal.
  const double cutoff = svd.singular_values.size() > 0
                            ? svd.singular_values(0) * static_cast<double>(std::max(m.rows(), m.dim())) *
                                  std::numeric_limits<double>::epsilon()
                            : 0.0;
  std::size_t rank = 0;
  while (rank < k && svd.singular_values(static_cast<Eigen::Index>(rank)) > cutoff) ++rank;

  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.rows()),
                                                 static_cast<Eigen::Index>(target_dim));
  for (std::size_t c = 0; c < rank; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    coords.col(col) = svd.u.col(col) * svd.singular_values(col);
  }
  if (rank < target_dim) {
    warn("lsa_reduce: target dimension " + std::to_string(target_dim) + " exceeds matrix rank " +
         std::to_string(rank) + "; padding with zero columns");
  }
  return EmbeddingMatrix(m.doc_ids(), std::move(coords), EmbeddingKind::tfidf_lsa);
}

namespace {

struct TsvRow {
  std::string id;
  std::vector<double> values;
};

std::vector<TsvRow> read_embedding_tsv(const std::filesystem::path& path, std::size_t& dim_out) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file: " + path.string());
  std::vector<TsvRow> rows;
  std::optional<std::size_t> declared_dim;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  const auto fail = [&](std::string_view what) {
    throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": " + std::string(what));
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#dim=", 0) == 0) {
      std::size_t d = 0;
      auto [p, ec] = std::from_chars(line.data() + 5, line.data() + line.size(), d);
      if (ec != std::errc{} || p != line.data() + line.size()) fail("malformed #dim header");
      declared_dim = d;
      continue;
    }
    if (line[0] == '#') continue;
    TsvRow row;
    std::size_t start = 0;
    std::size_t tab = line.find('\t');
    row.id = line.substr(0, tab);
    if (row.id.empty()) fail("empty id");
    while (tab != std::string::npos) {
      start = tab + 1;
      tab = line.find('\t', start);
      const std::string_view field(line.data() + start, (tab == std::string::npos ? line.size() : tab) - start);
      double value = 0.0;
      auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (ec != std::errc{} || p != field.data() + field.size()) {
        fail("non-numeric value '" + std::string(field) + "'");
      }
      if (!std::isfinite(value)) fail("non-finite value for id '" + row.id + "'");
      row.values.push_back(value);
    }
    if (!dim) {
      dim = row.values.size();
      if (*dim == 0) fail("row without values");
      if (declared_dim && *declared_dim != *dim) fail("inconsistent dimension: header declares " +
                                                      std::to_string(*declared_dim));
    } else if (row.values.size() != *dim) {
      fail("inconsistent dimension: expected " + std::to_string(*dim) + ", got " +
           std::to_string(row.values.size()));
    }
    rows.push_back(std::move(row));
  }
  dim_out = dim.value_or(declared_dim.value_or(0));
  return rows;
}

}  // namespace

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Corpus& corpus) {
  std::size_t dim = 0;
  auto rows = read_embedding_tsv(path, dim);
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(dim));
  std::vector<bool> seen(corpus.size(), false);
  std::size_t unknown = 0;
  for (const auto& row : rows) {
    auto index = corpus.index_of(row.id);
    if (!index) {
      ++unknown;
      continue;
    }
    if (seen[*index]) throw InputError("duplicate embedding for id '" + row.id + "'");
    seen[*index] = true;
    for (std::size_t c = 0; c < dim; ++c) {
      matrix(static_cast<Eigen::Index>(*index), static_cast<Eigen::Index>(c)) = row.values[c];
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!seen[i]) throw InputError("missing embedding for id '" + corpus[i].id + "'");
  }
  if (unknown > 0) warn("load_embeddings: ignored " + std::to_string(unknown) + " rows with unknown ids");
  return EmbeddingMatrix(corpus.ids(), std::move(matrix), EmbeddingKind::external);
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::size_t dim = 0;
  auto rows = read_embedding_tsv(path, dim);
  std::vector<std::string> ids;
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!seen.insert(rows[r].id).second) throw InputError("duplicate embedding for id '" + rows[r].id + "'");
    ids.push_back(rows[r].id);
    for (std::size_t c = 0; c < dim; ++c) {
      matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].values[c];
    }
  }
  return EmbeddingMatrix(std::move(ids), std::move(matrix), EmbeddingKind::external);
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  const Eigen::MatrixXd dense = m.to_dense();
  std::string out = "#dim=" + std::to_string(m.dim()) + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += m.doc_ids()[r];
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      out += '\t';
      out += format_double(dense(static_cast<Eigen::Index>(r), c));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

}  // namespace topicgraph
