#include "topicgraph/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "topicgraph/common.hpp"

namespace topicgraph {

using nlohmann::json;

void Corpus::add(Document doc) {
  if (doc.id.empty()) throw InputError("duplicate/empty id: document has an empty id");
  if (index_.contains(doc.id)) throw InputError("duplicate/empty id: duplicate id '" + doc.id + "'");
  index_.emplace(doc.id, documents_.size());
  documents_.push_back(std::move(doc));
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  if (auto it = index_.find(std::string(id)); it != index_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(documents_.size());
  for (const auto& d : documents_) out.push_back(d.id);
  return out;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "csv") return CorpusFormat::csv;
  if (name == "pre_tokenized_jsonl") return CorpusFormat::pre_tokenized_jsonl;
  throw InputError("unknown corpus format '" + std::string(name) + "'");
}

std::string_view to_string(CorpusFormat format) {
  switch (format) {
    case CorpusFormat::jsonl: return "jsonl";
    case CorpusFormat::csv: return "csv";
    case CorpusFormat::pre_tokenized_jsonl: return "pre_tokenized_jsonl";
  }
  return "jsonl";
}

std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view text) {
  // YYYY-MM-DD, optionally followed by a 'T' or ' ' time part.
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return std::nullopt;
  auto digits = [&](std::size_t from, std::size_t len, int& out) {
    out = 0;
    for (std::size_t i = from; i < from + len; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int y = 0, m = 0, d = 0;
  if (!digits(0, 4, y) || !digits(5, 2, m) || !digits(8, 2, d)) return std::nullopt;
  std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                   std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(const std::chrono::year_month_day& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

namespace {

std::string line_error(const std::filesystem::path& path, std::size_t line, std::string_view what) {
  return path.filename().string() + ":" + std::to_string(line) + ": " + std::string(what);
}

std::optional<std::chrono::year_month_day> date_field(const std::filesystem::path& path, std::size_t line,
                                                      std::string_view text) {
  if (text.empty()) return std::nullopt;
  auto date = parse_iso_date(text);
  if (!date) throw InputError(line_error(path, line, "malformed date '" + std::string(text) + "'"));
  return date;
}

void add_checked(Corpus& corpus, Document doc, const std::filesystem::path& path, std::size_t line) {
  try {
    corpus.add(std::move(doc));
  } catch (const InputError& e) {
    throw InputError(line_error(path, line, e.what()));
  }
}

Corpus load_jsonl(const std::filesystem::path& path, bool pre_tokenized) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path.string());
  Corpus corpus(path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error&) {
      throw InputError(line_error(path, line_no, "malformed record (invalid JSON)"));
    }
    if (!record.is_object()) throw InputError(line_error(path, line_no, "malformed record (not an object)"));
    Document doc;
    auto id = record.find("id");
    if (id == record.end() || !id->is_string()) {
      throw InputError(line_error(path, line_no, "malformed record (missing string 'id')"));
    }
    doc.id = id->get<std::string>();
    if (auto date = record.find("date"); date != record.end() && !date->is_null()) {
      if (!date->is_string()) throw InputError(line_error(path, line_no, "malformed record ('date' not a string)"));
      doc.date = date_field(path, line_no, date->get<std::string>());
    }
    if (pre_tokenized) {
      auto tokens = record.find("tokens");
      if (tokens == record.end() || !tokens->is_array()) {
        throw InputError(line_error(path, line_no, "malformed record (missing array 'tokens')"));
      }
      for (const auto& t : *tokens) {
        if (!t.is_string()) throw InputError(line_error(path, line_no, "malformed record (non-string token)"));
        doc.tokens.push_back(t.get<std::string>());
      }
    } else {
      auto text = record.find("text");
      if (text == record.end() || !text->is_string()) {
        throw InputError(line_error(path, line_no, "malformed record (missing string 'text')"));
      }
      doc.raw_text = text->get<std::string>();
    }
    add_checked(corpus, std::move(doc), path, line_no);
  }
  return corpus;
}

// RFC 4180 records; quoted fields may span lines. Reports the starting line of each record.
class CsvReader {
 public:
  explicit CsvReader(std::string text) : text_(std::move(text)) {}

  bool next(std::vector<std::string>& fields, std::size_t& start_line) {
    fields.clear();
    if (pos_ >= text_.size()) return false;
    start_line = line_;
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_++];
      if (quoted) {
        if (c == '"') {
          if (pos_ < text_.size() && text_[pos_] == '"') {
            field.push_back('"');
            ++pos_;
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
      } else if (c == '"' && field.empty() && !field_was_quoted) {
        quoted = true;
        field_was_quoted = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
      } else if (c == '\n') {
        ++line_;
        break;
      } else if (c != '\r') {
        field.push_back(c);
      }
    }
    if (quoted) throw InputError("line " + std::to_string(start_line) + ": unterminated quoted field");
    fields.push_back(std::move(field));
    return true;
  }

 private:
  std::string text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

Corpus load_csv(const std::filesystem::path& path) {
  CsvReader reader(read_file(path));
  Corpus corpus(path.string());
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!reader.next(fields, line_no)) throw InputError(line_error(path, 1, "missing header row"));
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = i;
  for (const char* required : {"id", "text"}) {
    if (!column.contains(required)) {
      throw InputError(line_error(path, line_no, std::string("header lacks column '") + required + "'"));
    }
  }
  const auto date_col = column.find("date");
  while (true) {
    bool more = false;
    try {
      more = reader.next(fields, line_no);
    } catch (const InputError& e) {
      throw InputError(path.filename().string() + ": malformed record, " + e.what());
    }
    if (!more) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != column.size()) {
      throw InputError(line_error(path, line_no, "malformed record (expected " + std::to_string(column.size()) +
                                                     " fields, got " + std::to_string(fields.size()) + ")"));
    }
    Document doc;
    doc.id = fields[column["id"]];
    doc.raw_text = fields[column["text"]];
    if (date_col != column.end()) doc.date = date_field(path, line_no, fields[date_col->second]);
    add_checked(corpus, std::move(doc), path, line_no);
  }
  return corpus;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  if (!std::filesystem::exists(path)) throw InputError("corpus file not found: " + path.string());
  switch (format) {
    case CorpusFormat::jsonl: return load_jsonl(path, false);
    case CorpusFormat::pre_tokenized_jsonl: return load_jsonl(path, true);
    case CorpusFormat::csv: return load_csv(path);
  }
  throw InputError("unknown corpus format");
}

void save_corpus_tokens(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const auto& doc : corpus) {
    json record = {{"id", doc.id}};
    if (doc.date) record["date"] = format_iso_date(*doc.date);
    record["tokens"] = doc.tokens;
    out += record.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

const std::vector<std::string>& default_stoplist() {
  static const std::vector<std::string> words = {"be",   "have", "do",    "make", "get",  "more",
                                                 "even", "also", "just",  "much", "other", "n't",
                                                 "not",  "say",  "tell",  "re"};
  return words;
}

namespace {

std::string strip_markup(std::string_view text) {
  static const std::pair<std::string_view, std::string_view> kEntities[] = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"}, {"&nbsp;", " "}};
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    if (c == '<') {
      // A tag runs to the next '>'; a lone '<' is kept as text.
      auto close = text.find('>', i + 1);
      if (close != std::string_view::npos && close > i + 1 &&
          (std::isalpha(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '/' || text[i + 1] == '!')) {
        out.push_back(' ');
        i = close + 1;
        continue;
      }
    } else if (c == '&') {
      bool matched = false;
      for (const auto& [entity, replacement] : kEntities) {
        if (text.substr(i, entity.size()) == entity) {
          out.append(replacement);
          i += entity.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    const auto uc = static_cast<unsigned char>(c);
    out.push_back(uc < 0x20 || uc == 0x7F ? ' ' : c);
    ++i;
  }
  return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

Document normalize(Document doc, const NormalizeConfig& config) {
  const std::string ascii = fold_to_ascii(strip_markup(doc.raw_text));
  doc.tokens.clear();
  for (std::size_t i = 0; i < ascii.size();) {
    if (!is_word_char(ascii[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::string token;
    while (j < ascii.size() && is_word_char(ascii[j])) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ascii[j]))));
      ++j;
    }
    i = j;
    if (token.size() < config.min_token_length || config.stoplist.contains(token)) continue;
    doc.tokens.push_back(std::move(token));
  }
  return doc;
}

Corpus normalize_corpus(const Corpus& corpus, const NormalizeConfig& config) {
  Corpus out(corpus.provenance());
  std::size_t excluded = 0;
  for (const auto& doc : corpus) {
    Document normalized = doc.raw_text.empty() && !doc.tokens.empty() ? doc : normalize(doc, config);
    if (normalized.tokens.size() < config.min_tokens) {
      ++excluded;
      continue;
    }
    out.add(std::move(normalized));
  }
  if (excluded > 0) {
    warn("excluded " + std::to_string(excluded) + " documents with fewer than " +
         std::to_string(config.min_tokens) + " tokens");
  }
  return out;
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view term) const {
  auto it = std::lower_bound(terms.begin(), terms.end(), term);
  if (it == terms.end() || *it != term) return std::nullopt;
  return static_cast<std::size_t>(it - terms.begin());
}

Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_df, double max_df_ratio) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : corpus) {
    std::vector<std::string> unique(doc.tokens.begin(), doc.tokens.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (auto& t : unique) ++df[std::move(t)];
  }
  const double max_df = max_df_ratio * static_cast<double>(corpus.size());
  Vocabulary vocab;
  for (const auto& [term, count] : df) {
    if (count < min_df || static_cast<double>(count) > max_df) continue;
    vocab.terms.push_back(term);
    vocab.document_frequency.push_back(count);
  }
  if (vocab.terms.empty()) throw InputError("empty vocabulary after document-frequency filtering");
  return vocab;
}

}  // namespace topicgraph
