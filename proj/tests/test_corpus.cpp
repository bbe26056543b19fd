#include <doctest.h>

#include <algorithm>
#include <cctype>

#include "temp_dir.hpp"
#include "topicgraph/common.hpp"
#include "topicgraph/corpus.hpp"

using namespace topicgraph;

namespace {

NormalizeConfig no_stoplist() {
  NormalizeConfig c;
  c.stoplist.clear();
  c.min_tokens = 0;
  return c;
}

Document text_doc(std::string id, std::string text) {
  Document d;
  d.id = std::move(id);
  d.raw_text = std::move(text);
  return d;
}

Corpus token_corpus(const std::vector<std::vector<std::string>>& docs) {
  Corpus c;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Document d;
    d.id = "d" + std::to_string(i);
    d.tokens = docs[i];
    c.add(std::move(d));
  }
  return c;
}

using Tokens = std::vector<std::string>;

}  // namespace

TEST_CASE("jsonl records load in file order") {
  TempDir dir("corpus_jsonl");
  write_file_atomic(dir / "c.jsonl",
                    R"({"id":"x","date":"2016-03-01","text":"first"})"
                    "\n"
                    R"({"id":"a","text":"second"})"
                    "\n\n"
                    R"({"id":"m","date":null,"text":"third"})"
                    "\n");
  const auto c = load_corpus(dir / "c.jsonl", CorpusFormat::jsonl);
  REQUIRE(c.size() == 3);
  CHECK(c.ids() == std::vector<std::string>{"x", "a", "m"});
  CHECK(c[0].raw_text == "first");
  REQUIRE(c[0].date.has_value());
  CHECK(format_iso_date(*c[0].date) == "2016-03-01");
  CHECK_FALSE(c[1].date.has_value());
  CHECK(c.index_of("m") == 2u);
}

TEST_CASE("malformed and duplicate records are reported") {
  TempDir dir("corpus_errors");
  write_file_atomic(dir / "bad.jsonl", "{\"id\":\"a\",\"text\":\"ok\"}\n{not json}\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "bad.jsonl", CorpusFormat::jsonl), doctest::Contains("bad.jsonl:2:"),
                       InputError);
  write_file_atomic(dir / "dup.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "dup.jsonl", CorpusFormat::jsonl), doctest::Contains("'a'"), InputError);
  write_file_atomic(dir / "empty.jsonl", "{\"id\":\"\",\"text\":\"x\"}\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "empty.jsonl", CorpusFormat::jsonl),
                       doctest::Contains("duplicate/empty id"), InputError);
  CHECK_THROWS_WITH_AS(load_corpus(dir / "missing.jsonl", CorpusFormat::jsonl), doctest::Contains("missing.jsonl"),
                       InputError);
  write_file_atomic(dir / "date.jsonl", "{\"id\":\"a\",\"date\":\"2016-13-40\",\"text\":\"x\"}\n");
  CHECK_THROWS_WITH_AS(load_corpus(dir / "date.jsonl", CorpusFormat::jsonl), doctest::Contains(":1:"), InputError);
}

TEST_CASE("pre-tokenized records keep their tokens") {
  TempDir dir("corpus_pretok");
  write_file_atomic(dir / "t.jsonl", R"({"id":"a","tokens":["gun","control"]})" "\n");
  const auto c = load_corpus(dir / "t.jsonl", CorpusFormat::pre_tokenized_jsonl);
  REQUIRE(c.size() == 1);
  CHECK(c[0].tokens == Tokens{"gun", "control"});
  NormalizeConfig cfg;
  cfg.min_tokens = 0;
  CHECK(normalize_corpus(c, cfg)[0].tokens == Tokens{"gun", "control"});
}

TEST_CASE("csv with quoted fields") {
  TempDir dir("corpus_csv");
  write_file_atomic(dir / "c.csv",
                    "id,date,text\n"
                    "a,2016-01-02,\"Hello, world\"\n"
                    "b,,\"multi\nline \"\"quoted\"\"\"\n");
  const auto c = load_corpus(dir / "c.csv", CorpusFormat::csv);
  REQUIRE(c.size() == 2);
  CHECK(c[0].raw_text == "Hello, world");
  CHECK(c[1].raw_text == "multi\nline \"quoted\"");
  CHECK_FALSE(c[1].date.has_value());
}

TEST_CASE("token save and reload round trip") {
  TempDir dir("corpus_roundtrip");
  auto c = token_corpus({{"alpha", "beta"}, {"gamma"}});
  save_corpus_tokens(c, dir / "t.jsonl");
  const auto back = load_corpus(dir / "t.jsonl", CorpusFormat::pre_tokenized_jsonl);
  REQUIRE(back.size() == 2);
  CHECK(back[0].tokens == c[0].tokens);
  CHECK(back[1].tokens == c[1].tokens);
  CHECK(back.ids() == c.ids());
}

TEST_CASE("normalization splits on word characters and lowercases") {
  CHECK(normalize(text_doc("a", "Gun Control, gun-control!"), no_stoplist()).tokens ==
        Tokens{"gun", "control", "gun", "control"});
}

TEST_CASE("default stoplist removes common words") {
  NormalizeConfig cfg;
  cfg.min_tokens = 0;
  CHECK(normalize(text_doc("a", "He didn't say much"), cfg).tokens == Tokens{"he", "didn"});
  CHECK(default_stoplist().size() == 16);
}

TEST_CASE("accents fold to ASCII") {
  CHECK(normalize(text_doc("a", "Café déjà vu"), no_stoplist()).tokens == Tokens{"cafe", "deja", "vu"});
  CHECK(fold_to_ascii("Ærøskøbing") == "AEroskobing");
  CHECK(fold_to_ascii("naïve “quotes”") == "naive  quotes ");
  // Combining acute accent disappears.
  CHECK(fold_to_ascii("e\xCC\x81t\xC3\xA9") == "ete");
}

TEST_CASE("markup and control characters are stripped") {
  const auto d = normalize(text_doc("a", "<p>Hello&nbsp;<b>bold</b></p>\tworld\x01x"), no_stoplist());
  CHECK(d.tokens == Tokens{"hello", "bold", "world"});
}

TEST_CASE("normalized tokens are lowercase word characters of length >= 2") {
  const auto d = normalize(text_doc("a", "A b CD e_f 12 ÜBER x9 ?!"), no_stoplist());
  for (const auto& t : d.tokens) {
    CHECK(t.size() >= 2);
    CHECK(std::all_of(t.begin(), t.end(), [](unsigned char ch) {
      return std::isdigit(ch) || std::islower(ch) || ch == '_';
    }));
  }
  CHECK(d.tokens == Tokens{"cd", "e_f", "12", "uber", "x9"});
}

TEST_CASE("normalization is deterministic") {
  const auto doc = text_doc("a", "Some <i>repeated</i> text, repeated twice.");
  CHECK(normalize(doc, no_stoplist()).tokens == normalize(doc, no_stoplist()).tokens);
}

TEST_CASE("short documents are excluded with a warning") {
  Corpus raw;
  raw.add(text_doc("short", "too few words"));
  raw.add(text_doc("long", "word word word word"));
  NormalizeConfig cfg;
  cfg.stoplist.clear();
  cfg.min_tokens = 4;
  ScopedWarningCapture warnings;
  const auto c = normalize_corpus(raw, cfg);
  REQUIRE(c.size() == 1);
  CHECK(c[0].id == "long");
  CHECK(warnings.contains("excluded 1"));
}

TEST_CASE("vocabulary document frequencies") {
  const auto c = token_corpus({{"a", "b"}, {"b", "c"}});
  const auto v = build_vocabulary(c, 1, 1.0);
  CHECK(v.terms == Tokens{"a", "b", "c"});
  CHECK(v.document_frequency == std::vector<std::size_t>{1, 2, 1});
  CHECK(v.index_of("b") == 1u);
  CHECK_FALSE(v.index_of("z").has_value());
  CHECK(build_vocabulary(c, 2, 1.0).terms == Tokens{"b"});
  CHECK_THROWS_WITH_AS(build_vocabulary(c, 3, 1.0), doctest::Contains("empty vocabulary"), InputError);
}

TEST_CASE("terms present in every document survive only max_df_ratio = 1") {
  const auto c = token_corpus({{"all", "x"}, {"all", "y"}, {"all", "all", "z"}});
  CHECK(build_vocabulary(c, 1, 1.0).index_of("all").has_value());
  CHECK_FALSE(build_vocabulary(c, 1, 0.99).index_of("all").has_value());
}

TEST_CASE("every token is in the vocabulary iff it passes the df filters") {
  const auto c = token_corpus({{"a", "b", "b"}, {"b", "c"}, {"c", "d"}, {"b", "e"}});
  const auto v = build_vocabulary(c, 2, 0.5);
  for (const auto& doc : c) {
    for (const auto& tok : doc.tokens) {
      std::size_t df = 0;
      for (const auto& other : c) df += std::count(other.tokens.begin(), other.tokens.end(), tok) > 0 ? 1 : 0;
      const bool passes = df >= 2 && static_cast<double>(df) <= 0.5 * static_cast<double>(c.size());
      CHECK(v.index_of(tok).has_value() == passes);
    }
  }
}
