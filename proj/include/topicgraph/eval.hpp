#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topicgraph/corpus.hpp"
#include "topicgraph/partition.hpp"

namespace topicgraph {

struct WordCount {
  std::string word;
  std::size_t count = 0;

  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Token counts within one cluster, by count descending then word ascending.
/// `n_words == 0` returns every word. A cluster without tokens yields an
/// empty list and a warning.
std::vector<WordCount> top_words(const Corpus& corpus, const Partition& partition, std::size_t cluster,
                                 std::size_t n_words = 10);

/// Full ranked word counts for every cluster at once, without warnings.
std::vector<std::vector<WordCount>> cluster_word_counts(const Corpus& corpus, const Partition& partition);

/// Document-level occurrence counts over a reference corpus.
class ReferenceStats {
 public:
  ReferenceStats() = default;
  /// `terms` sorted and unique; `pairs` keyed by (a, b) term indices with a < b.
  ReferenceStats(std::size_t n_docs, std::vector<std::string> terms, std::vector<std::size_t> occur,
                 std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>> pairs);

  std::size_t n_docs() const { return n_docs_; }
  const std::vector<std::string>& terms() const { return terms_; }
  std::optional<std::size_t> term_index(std::string_view term) const;

  /// 0 for terms outside the reference vocabulary.
  std::size_t occur(std::string_view term) const;
  /// Documents containing both terms; 0 for a == b or unknown terms.
  std::size_t cooccur(std::string_view a, std::string_view b) const;

  const std::vector<std::size_t>& occurrences() const { return occur_; }
  const std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>>& pairs() const {
    return pairs_;
  }

  friend bool operator==(const ReferenceStats&, const ReferenceStats&) = default;

 private:
  std::size_t n_docs_ = 0;
  std::vector<std::string> terms_;
  std::vector<std::size_t> occur_;
  std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>> pairs_;  // sorted by key
};

/// Restricts to the `vocabulary_cap` terms with highest document frequency
/// (ties broken lexicographically); 0 keeps every term.
ReferenceStats build_reference_stats(const Corpus& reference, std::size_t vocabulary_cap);

/// Sections `#ndocs`, `#terms` (term TAB count) and `#pairs` (a TAB b TAB count).
void save_reference_stats(const ReferenceStats& stats, const std::filesystem::path& path);
ReferenceStats load_reference_stats(const std::filesystem::path& path);

inline constexpr double kPmiSmoothing = 1.0;

/// Mean over unordered word pairs of ln((cooccur + eps) n / (occur_a occur_b)).
/// Pairs involving a word absent from the reference are skipped with a warning.
double pmi_coherence(const std::vector<std::string>& words, const ReferenceStats& ref);

struct ClusterCoherence {
  std::size_t cluster = 0;
  std::vector<WordCount> top_words;
  std::optional<double> pmi;  // empty when fewer than two words could be scored
};

struct CoherenceReport {
  std::vector<ClusterCoherence> clusters;
  double aggregate_pmi = 0.0;  // mean over scored clusters
  std::size_t scored_clusters = 0;
};

CoherenceReport aggregate_pmi(const Corpus& corpus, const Partition& partition, const ReferenceStats& ref,
                              std::size_t n_words = 10);

/// 2 I / (H1 + H2); 1 when both entropies vanish.
double nmi(const Partition& a, const Partition& b);
/// Hubert-Arabie adjusted Rand index; 1 when the expected and maximal indices coincide.
double ari(const Partition& a, const Partition& b);

struct ExternalLabels {
  std::string name;
  std::vector<std::string> ids;
  std::vector<std::string> labels;
};

/// CSV `doc_id,label` with header. Every id must exist in `corpus`.
ExternalLabels load_external_labels(const std::filesystem::path& path, const Corpus& corpus);

struct LabelAgreement {
  std::string name;
  std::size_t covered = 0;  // labelled documents scored
  double nmi = 0.0;
  double ari = 0.0;
};

/// Scores `partition` (aligned with `corpus`) on the labelled subset only.
LabelAgreement score_against_labels(const Corpus& corpus, const Partition& partition, const ExternalLabels& labels);

}  // namespace topicgraph
