#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace topicgraph {

struct Document {
  std::string id;
  std::optional<std::chrono::year_month_day> date;
  std::string raw_text;
  std::vector<std::string> tokens;
};

/// Ordered, id-unique collection of documents.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::string provenance) : provenance_(std::move(provenance)) {}

  /// Throws InputError on an empty or duplicate id.
  void add(Document doc);

  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }
  const std::vector<Document>& documents() const { return documents_; }
  const std::string& provenance() const { return provenance_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::vector<std::string> ids() const;

  auto begin() const { return documents_.begin(); }
  auto end() const { return documents_.end(); }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::string provenance_;
};

enum class CorpusFormat { jsonl, csv, pre_tokenized_jsonl };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format);

/// Errors name the offending line number, or the id for duplicates.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Writes tokens as pre_tokenized_jsonl (with dates when present).
void save_corpus_tokens(const Corpus& corpus, const std::filesystem::path& path);

/// The common-word list removed after tokenization.
const std::vector<std::string>& default_stoplist();

struct NormalizeConfig {
  std::unordered_set<std::string> stoplist{default_stoplist().begin(), default_stoplist().end()};
  std::size_t min_token_length = 2;
  std::size_t min_tokens = 30;
};

/// Strips markup and control characters, folds accents to ASCII, splits on
/// word characters, lowercases, and drops stoplisted and short tokens.
Document normalize(Document doc, const NormalizeConfig& config);

/// Normalizes every document that carries raw text (pre-tokenized documents
/// keep their tokens) and drops documents with fewer than min_tokens tokens.
Corpus normalize_corpus(const Corpus& corpus, const NormalizeConfig& config);

/// Folds UTF-8 text to ASCII. Latin letters with diacritics map to their base
/// letters, combining marks disappear, Unicode spaces and punctuation become a
/// space, and anything else without an ASCII counterpart is dropped.
std::string fold_to_ascii(std::string_view utf8);

struct Vocabulary {
  std::vector<std::string> terms;  // lexicographic
  std::vector<std::size_t> document_frequency;

  std::size_t size() const { return terms.size(); }
  std::optional<std::size_t> index_of(std::string_view term) const;
};

/// Keeps terms with min_df <= df <= max_df_ratio * N. Throws InputError if none survive.
Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_df, double max_df_ratio);

std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view text);
std::string format_iso_date(const std::chrono::year_month_day& date);

}  // namespace topicgraph
