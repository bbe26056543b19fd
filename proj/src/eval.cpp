#include "topicgraph/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "topicgraph/common.hpp"

namespace topicgraph {
namespace {

std::vector<WordCount> ranked(const std::unordered_map<std::string_view, std::size_t>& counts) {
  std::vector<WordCount> out;
  out.reserve(counts.size());
  for (const auto& [w, c] : counts) out.push_back({std::string(w), c});
  std::sort(out.begin(), out.end(), [](const WordCount& a, const WordCount& b) {
    return a.count != b.count ? a.count > b.count : a.word < b.word;
  });
  return out;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

std::vector<WordCount> top_words(const Corpus& corpus, const Partition& partition, std::size_t cluster,
                                 std::size_t n_words) {
  if (partition.size() != corpus.size()) throw InputError("top_words: partition and corpus differ in length");
  if (cluster >= partition.n_clusters()) throw InputError("top_words: no cluster " + std::to_string(cluster));
  std::unordered_map<std::string_view, std::size_t> counts;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (static_cast<std::size_t>(partition[i]) != cluster) continue;
    for (const auto& tok : corpus[i].tokens) ++counts[tok];
  }
  if (counts.empty()) {
    warn("cluster " + std::to_string(cluster) + " has no tokens");
    return {};
  }
  auto out = ranked(counts);
  if (n_words > 0 && out.size() > n_words) out.resize(n_words);
  return out;
}

std::vector<std::vector<WordCount>> cluster_word_counts(const Corpus& corpus, const Partition& partition) {
  if (partition.size() != corpus.size()) throw InputError("partition and corpus differ in length");
  std::vector<std::unordered_map<std::string_view, std::size_t>> counts(partition.n_clusters());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& m = counts[static_cast<std::size_t>(partition[i])];
    for (const auto& tok : corpus[i].tokens) ++m[tok];
  }
  std::vector<std::vector<WordCount>> out;
  out.reserve(counts.size());
  for (const auto& m : counts) out.push_back(ranked(m));
  return out;
}

ReferenceStats::ReferenceStats(std::size_t n_docs, std::vector<std::string> terms, std::vector<std::size_t> occur,
                               std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>> pairs)
    : n_docs_(n_docs), terms_(std::move(terms)), occur_(std::move(occur)), pairs_(std::move(pairs)) {
  if (n_docs_ == 0) throw InputError("reference statistics need at least one document");
  if (occur_.size() != terms_.size()) throw InputError("reference statistics: term and count lists differ");
  if (!std::is_sorted(terms_.begin(), terms_.end()) ||
      std::adjacent_find(terms_.begin(), terms_.end()) != terms_.end()) {
    throw InputError("reference statistics: terms must be sorted and unique");
  }
  for (auto c : occur_) {
    if (c > n_docs_) throw InputError("reference statistics: occurrence exceeds document count");
  }
  std::sort(pairs_.begin(), pairs_.end());
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const auto [a, b] = pairs_[k].first;
    if (a >= b || b >= terms_.size()) throw InputError("reference statistics: bad term pair");
    if (k > 0 && pairs_[k - 1].first == pairs_[k].first) throw InputError("reference statistics: duplicate pair");
    if (pairs_[k].second > std::min(occur_[a], occur_[b])) {
      throw InputError("reference statistics: co-occurrence of '" + terms_[a] + "' and '" + terms_[b] +
                       "' exceeds an occurrence count");
    }
  }
}

std::optional<std::size_t> ReferenceStats::term_index(std::string_view term) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term);
  if (it == terms_.end() || *it != term) return std::nullopt;
  return static_cast<std::size_t>(it - terms_.begin());
}

std::size_t ReferenceStats::occur(std::string_view term) const {
  auto idx = term_index(term);
  return idx ? occur_[*idx] : 0;
}

std::size_t ReferenceStats::cooccur(std::string_view a, std::string_view b) const {
  auto ia = term_index(a);
  auto ib = term_index(b);
  if (!ia || !ib || *ia == *ib) return 0;
  std::pair<std::uint32_t, std::uint32_t> key{static_cast<std::uint32_t>(std::min(*ia, *ib)),
                                               static_cast<std::uint32_t>(std::max(*ia, *ib))};
  auto it = std::lower_bound(pairs_.begin(), pairs_.end(), key,
                             [](const auto& entry, const auto& k) { return entry.first < k; });
  return it != pairs_.end() && it->first == key ? it->second : 0;
}

ReferenceStats build_reference_stats(const Corpus& reference, std::size_t vocabulary_cap) {
  if (reference.empty()) throw InputError("empty reference corpus");
  std::unordered_map<std::string_view, std::size_t> df;
  for (const auto& doc : reference) {
    std::vector<std::string_view> uniq(doc.tokens.begin(), doc.tokens.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto t : uniq) ++df[t];
  }
  std::vector<std::pair<std::string_view, std::size_t>> by_df(df.begin(), df.end());
  std::sort(by_df.begin(), by_df.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (vocabulary_cap > 0 && by_df.size() > vocabulary_cap) by_df.resize(vocabulary_cap);
  std::sort(by_df.begin(), by_df.end());

  std::vector<std::string> terms;
  std::vector<std::size_t> occur;
  std::unordered_map<std::string_view, std::uint32_t> index;
  for (const auto& [t, c] : by_df) {
    index.emplace(t, static_cast<std::uint32_t>(terms.size()));
    terms.emplace_back(t);
    occur.push_back(c);
  }

  std::unordered_map<std::uint64_t, std::size_t> co;
  std::vector<std::uint32_t> present;
  for (const auto& doc : reference) {
    present.clear();
    for (const auto& tok : doc.tokens) {
      if (auto it = index.find(tok); it != index.end()) present.push_back(it->second);
    }
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    for (std::size_t x = 0; x < present.size(); ++x) {
      for (std::size_t y = x + 1; y < present.size(); ++y) {
        ++co[(static_cast<std::uint64_t>(present[x]) << 32) | present[y]];
      }
    }
  }
  std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>> pairs;
  pairs.reserve(co.size());
  for (const auto& [key, c] : co) {
    pairs.push_back({{static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key & 0xffffffffu)}, c});
  }
  return ReferenceStats(reference.size(), std::move(terms), std::move(occur), std::move(pairs));
}

void save_reference_stats(const ReferenceStats& stats, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "#ndocs\n" << stats.n_docs() << "\n#terms\n";
  for (std::size_t k = 0; k < stats.terms().size(); ++k) {
    out << stats.terms()[k] << '\t' << stats.occurrences()[k] << '\n';
  }
  out << "#pairs\n";
  for (const auto& [key, c] : stats.pairs()) {
    out << stats.terms()[key.first] << '\t' << stats.terms()[key.second] << '\t' << c << '\n';
  }
  write_file_atomic(path, out.str());
}

ReferenceStats load_reference_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("reference statistics file not found: " + path.string());
  enum class Section { none, ndocs, terms, pairs } section = Section::none;
  std::size_t n_docs = 0;
  bool have_ndocs = false;
  std::vector<std::string> terms;
  std::vector<std::size_t> occur;
  std::vector<std::tuple<std::string, std::string, std::size_t>> raw_pairs;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": " + what);
  };
  auto parse_count = [&](const std::string& s) -> std::size_t {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      fail("malformed count '" + s + "'");
    }
    if (pos != s.size()) fail("malformed count '" + s + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "#ndocs") {
      section = Section::ndocs;
      continue;
    }
    if (line == "#terms") {
      section = Section::terms;
      continue;
    }
    if (line == "#pairs") {
      section = Section::pairs;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    switch (section) {
      case Section::none: fail("data before the first section header");
        break;
      case Section::ndocs:
        if (fields.size() != 1 || have_ndocs) fail("expected a single document count");
        n_docs = parse_count(fields[0]);
        have_ndocs = true;
        break;
      case Section::terms:
        if (fields.size() != 2) fail("expected term<TAB>count");
        terms.push_back(fields[0]);
        occur.push_back(parse_count(fields[1]));
        break;
      case Section::pairs:
        if (fields.size() != 3) fail("expected termA<TAB>termB<TAB>count");
        raw_pairs.emplace_back(fields[0], fields[1], parse_count(fields[2]));
        break;
    }
  }
  if (!have_ndocs) throw InputError(path.string() + ": missing #ndocs section");

  // Terms may arrive in any order; sort them together with their counts.
  std::vector<std::size_t> order(terms.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return terms[a] < terms[b]; });
  std::vector<std::string> sorted_terms;
  std::vector<std::size_t> sorted_occur;
  for (auto k : order) {
    sorted_terms.push_back(terms[k]);
    sorted_occur.push_back(occur[k]);
  }
  auto find = [&](const std::string& t) -> std::uint32_t {
    auto it = std::lower_bound(sorted_terms.begin(), sorted_terms.end(), t);
    if (it == sorted_terms.end() || *it != t) {
      throw InputError(path.string() + ": pair term '" + t + "' missing from #terms");
    }
    return static_cast<std::uint32_t>(it - sorted_terms.begin());
  };
  std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>> pairs;
  for (const auto& [a, b, c] : raw_pairs) {
    auto ia = find(a);
    auto ib = find(b);
    if (ia == ib) throw InputError(path.string() + ": self pair for '" + a + "'");
    pairs.push_back({{std::min(ia, ib), std::max(ia, ib)}, c});
  }
  return ReferenceStats(n_docs, std::move(sorted_terms), std::move(sorted_occur), std::move(pairs));
}

double pmi_coherence(const std::vector<std::string>& words, const ReferenceStats& ref) {
  if (words.size() < 2) throw InputError("pmi_coherence needs at least two words");
  const double n = static_cast<double>(ref.n_docs());
  double total = 0.0;
  std::size_t scored = 0;
  std::size_t skipped = 0;
  for (std::size_t x = 0; x < words.size(); ++x) {
    for (std::size_t y = x + 1; y < words.size(); ++y) {
      const auto oa = ref.occur(words[x]);
      const auto ob = ref.occur(words[y]);
      if (oa == 0 || ob == 0) {
        ++skipped;
        continue;
      }
      const double co = static_cast<double>(ref.cooccur(words[x], words[y]));
      total += std::log((co + kPmiSmoothing) * n / (static_cast<double>(oa) * static_cast<double>(ob)));
      ++scored;
    }
  }
  if (scored == 0) throw Error("no reference coverage for any word pair");
  if (skipped > 0) {
    warn("pmi_coherence: skipped " + std::to_string(skipped) + " of " + std::to_string(scored + skipped) +
         " word pairs absent from the reference");
  }
  return total / static_cast<double>(scored);
}

CoherenceReport aggregate_pmi(const Corpus& corpus, const Partition& partition, const ReferenceStats& ref,
                              std::size_t n_words) {
  const auto counts = cluster_word_counts(corpus, partition);
  CoherenceReport report;
  double sum = 0.0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    ClusterCoherence cc;
    cc.cluster = c;
    cc.top_words = counts[c];
    if (n_words > 0 && cc.top_words.size() > n_words) cc.top_words.resize(n_words);
    if (cc.top_words.empty()) warn("cluster " + std::to_string(c) + " has no tokens");
    std::vector<std::string> words;
    std::size_t covered = 0;
    for (const auto& w : cc.top_words) {
      words.push_back(w.word);
      if (ref.occur(w.word) > 0) ++covered;
    }
    if (covered >= 2) {
      cc.pmi = pmi_coherence(words, ref);
      sum += *cc.pmi;
      ++report.scored_clusters;
    }
    report.clusters.push_back(std::move(cc));
  }
  if (report.scored_clusters == 0) throw Error("no reference coverage: no cluster has two scored words");
  report.aggregate_pmi = sum / static_cast<double>(report.scored_clusters);
  return report;
}

double nmi(const Partition& a, const Partition& b) {
  const auto table = contingency(a, b);
  const double h1 = entropy(a);
  const double h2 = entropy(b);
  if (h1 + h2 == 0.0) return 1.0;
  return std::clamp(2.0 * mutual_information(table) / (h1 + h2), 0.0, 1.0);
}

double ari(const Partition& a, const Partition& b) {
  const auto table = contingency(a, b);
  double index = 0.0;
  for (const auto& cell : table.cells) index += choose2(static_cast<double>(cell.count));
  double sa = 0.0;
  double sb = 0.0;
  for (auto r : table.row_sums) sa += choose2(static_cast<double>(r));
  for (auto c : table.col_sums) sb += choose2(static_cast<double>(c));
  const double total = choose2(static_cast<double>(table.n));
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ExternalLabels load_external_labels(const std::filesystem::path& path, const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw InputError("label file not found: " + path.string());
  ExternalLabels out;
  out.name = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, std::size_t> seen;
  std::vector<std::string> unknown;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "doc_id,label") {
        throw InputError(path.filename().string() + ":1: expected header 'doc_id,label'");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0) {
      throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    std::string id = line.substr(0, comma);
    if (!seen.emplace(id, line_no).second) {
      throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": duplicate id '" + id + "'");
    }
    if (!corpus.index_of(id)) unknown.push_back(id);
    out.ids.push_back(std::move(id));
    out.labels.push_back(line.substr(comma + 1));
  }
  if (!unknown.empty()) {
    std::string msg = path.filename().string() + ": " + std::to_string(unknown.size()) +
                      " labelled ids are not in the corpus:";
    for (std::size_t k = 0; k < std::min<std::size_t>(unknown.size(), 10); ++k) msg += " " + unknown[k];
    if (unknown.size() > 10) msg += " ...";
    throw InputError(msg);
  }
  return out;
}

LabelAgreement score_against_labels(const Corpus& corpus, const Partition& partition, const ExternalLabels& labels) {
  if (partition.size() != corpus.size()) throw InputError("partition and corpus differ in length");
  std::vector<int> predicted;
  std::vector<int> truth;
  std::map<std::string, int> label_ids;
  for (std::size_t k = 0; k < labels.ids.size(); ++k) {
    const auto idx = corpus.index_of(labels.ids[k]);
    if (!idx) throw InputError("labelled id '" + labels.ids[k] + "' is not in the corpus");
    predicted.push_back(partition[*idx]);
    truth.push_back(label_ids.try_emplace(labels.labels[k], static_cast<int>(label_ids.size())).first->second);
  }
  if (predicted.empty()) throw InputError("label set '" + labels.name + "' covers no documents");
  if (predicted.size() < corpus.size()) {
    warn("labels '" + labels.name + "' cover " + std::to_string(predicted.size()) + " of " +
         std::to_string(corpus.size()) + " documents; scoring the labelled subset");
  }
  const Partition p(predicted);
  const Partition q(truth);
  return {labels.name, predicted.size(), nmi(p, q), ari(p, q)};
}

}  // namespace topicgraph
