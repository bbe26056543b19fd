#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "topicgraph/common.hpp"
#include "topicgraph/eval.hpp"

using namespace topicgraph;

namespace {

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

std::vector<std::string> words_of(const std::vector<WordCount>& counts) {
  std::vector<std::string> out;
  for (const auto& wc : counts) out.push_back(wc.word);
  return out;
}

// Two terms a < b with the given counts over n documents.
ReferenceStats pair_stats(std::size_t n, std::size_t occur_a, std::size_t occur_b, std::size_t both) {
  std::vector<std::pair<std::pair<std::uint32_t, std::uint32_t>, std::size_t>> pairs;
  if (both > 0) pairs.push_back({{0, 1}, both});
  return ReferenceStats(n, {"a", "b"}, {occur_a, occur_b}, pairs);
}

const Partition kP1(std::vector<int>{0, 0, 1, 1});
const Partition kP2(std::vector<int>{0, 1, 1, 1});

using Words = std::vector<std::string>;

}  // namespace

TEST_CASE("top words by frequency with lexicographic ties") {
  const auto c = token_corpus({{"a", "a", "b"}, {"c", "b", "x"}, {"y"}});
  const Partition p(std::vector<int>{0, 1, 1});
  CHECK(words_of(top_words(c, p, 0, 2)) == Words{"a", "b"});
  CHECK(top_words(c, p, 0, 2)[0] == WordCount{"a", 2});
  CHECK(words_of(top_words(c, p, 1, 10)) == Words{"b", "c", "x", "y"});
  CHECK(top_words(c, p, 1, 0).size() == 4);
  CHECK(words_of(top_words(c, p, 1, 1)) == Words{"b"});
  CHECK_THROWS_AS(top_words(c, p, 2), InputError);
}

TEST_CASE("a cluster without tokens yields an empty list and a warning") {
  const auto c = token_corpus({{"a"}, {}});
  ScopedWarningCapture w;
  CHECK(top_words(c, Partition(std::vector<int>{0, 1}), 1).empty());
  CHECK(w.contains("has no tokens"));
}

TEST_CASE("PMI of two words that always co-occur") {
  // 4 documents; a in 2, b in 2, together in 2.
  CHECK(pmi_coherence({"a", "b"}, pair_stats(4, 2, 2, 2)) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
}

TEST_CASE("PMI approaches zero for independent words") {
  const std::size_t n = 1000000;
  const double v = pmi_coherence({"a", "b"}, pair_stats(n, n / 2, n / 2, n / 4));
  CHECK(std::abs(v) < 1e-5);
}

TEST_CASE("PMI of words that never co-occur uses the smoothing floor") {
  const double v = pmi_coherence({"a", "b"}, pair_stats(10, 5, 5, 0));
  CHECK(v == doctest::Approx(std::log(10.0 / 25.0)).epsilon(1e-15));
  CHECK(v < 0.0);
}

TEST_CASE("PMI skips uncovered pairs and fails without coverage") {
  const auto ref = pair_stats(4, 2, 2, 2);
  {
    ScopedWarningCapture w;
    CHECK(pmi_coherence({"a", "b", "zz"}, ref) == doctest::Approx(std::log(3.0)));
    CHECK(w.contains("skipped 2 of 3"));
  }
  CHECK_THROWS_WITH(pmi_coherence({"a", "zz"}, ref), doctest::Contains("no reference coverage"));
  CHECK_THROWS_AS(pmi_coherence({"a"}, ref), InputError);
}

TEST_CASE("reference statistics from a corpus") {
  const auto c = token_corpus({{"a", "b", "a"}, {"b", "c"}});
  const auto s = build_reference_stats(c, 0);
  CHECK(s.n_docs() == 2);
  CHECK(s.terms() == Words{"a", "b", "c"});
  CHECK(s.occur("a") == 1);
  CHECK(s.occur("b") == 2);
  CHECK(s.occur("zz") == 0);
  CHECK(s.cooccur("a", "b") == 1);
  CHECK(s.cooccur("b", "a") == 1);
  CHECK(s.cooccur("b", "c") == 1);
  CHECK(s.cooccur("a", "c") == 0);
  CHECK(s.cooccur("a", "a") == 0);
  for (const auto& [key, count] : s.pairs()) {
    CHECK(count <= std::min(s.occurrences()[key.first], s.occurrences()[key.second]));
  }

  const auto capped = build_reference_stats(c, 1);
  CHECK(capped.terms() == Words{"b"});
  CHECK(capped.pairs().empty());
  CHECK_THROWS_WITH(build_reference_stats(Corpus{}, 0), doctest::Contains("empty reference corpus"));
}

TEST_CASE("reference statistics validate their inputs") {
  CHECK_THROWS_AS(pair_stats(4, 2, 2, 3), InputError);
  CHECK_THROWS_AS(pair_stats(4, 5, 2, 0), InputError);
  CHECK_THROWS_AS(ReferenceStats(4, {"b", "a"}, {1, 1}, {}), InputError);
}

TEST_CASE("reference statistics file round trip") {
  TempDir dir("eval_refstats");
  const auto c = token_corpus({{"alpha", "beta", "gamma"}, {"beta", "gamma"}, {"delta"}, {"alpha", "delta"}});
  const auto s = build_reference_stats(c, 0);
  save_reference_stats(s, dir / "ref.tsv");
  CHECK(load_reference_stats(dir / "ref.tsv") == s);
  write_file_atomic(dir / "bad.tsv", "#terms\na\t1\n");
  CHECK_THROWS_AS(load_reference_stats(dir / "bad.tsv"), InputError);
}

TEST_CASE("aggregate PMI over clusters") {
  const auto ref = build_reference_stats(
      token_corpus({{"a", "b"}, {"a", "b"}, {"c", "d"}, {"c", "d"}, {"a", "c"}, {"b", "d"}}), 0);
  SUBCASE("a single cluster scores its own PMI") {
    const auto c = token_corpus({{"a", "b", "c"}});
    const auto report = aggregate_pmi(c, Partition::all_in_one(1), ref);
    CHECK(report.scored_clusters == 1);
    CHECK(report.aggregate_pmi == doctest::Approx(pmi_coherence({"a", "b", "c"}, ref)).epsilon(1e-15));
  }
  SUBCASE("identical clusters share the score") {
    const auto c = token_corpus({{"a", "b"}, {"a", "b"}});
    const auto report = aggregate_pmi(c, Partition::singletons(2), ref);
    REQUIRE(report.clusters.size() == 2);
    CHECK(*report.clusters[0].pmi == *report.clusters[1].pmi);
    CHECK(report.aggregate_pmi == doctest::Approx(*report.clusters[0].pmi).epsilon(1e-15));
  }
  SUBCASE("clusters with fewer than two covered words are not scored") {
    const auto c = token_corpus({{"a", "b"}, {"a", "zz"}, {"c", "d"}});
    ScopedWarningCapture w;
    const auto report = aggregate_pmi(c, Partition::singletons(3), ref);
    CHECK(report.scored_clusters == 2);
    CHECK_FALSE(report.clusters[1].pmi.has_value());
    CHECK(report.aggregate_pmi ==
          doctest::Approx(0.5 * (*report.clusters[0].pmi + *report.clusters[2].pmi)).epsilon(1e-15));
  }
  SUBCASE("no scored cluster is an error") {
    const auto c = token_corpus({{"xx", "yy"}});
    ScopedWarningCapture w;
    CHECK_THROWS_WITH(aggregate_pmi(c, Partition::all_in_one(1), ref), doctest::Contains("no reference coverage"));
  }
}

TEST_CASE("NMI and ARI hand values") {
  const double h1 = std::log(2.0);
  const double h2 = std::log(4.0) - 0.75 * std::log(3.0);
  const double mi = 0.25 * std::log(2.0) + 0.25 * std::log(2.0 / 3.0) + 0.5 * std::log(4.0 / 3.0);
  CHECK(nmi(kP1, kP2) == doctest::Approx(2 * mi / (h1 + h2)).epsilon(1e-14));
  CHECK(nmi(kP1, kP2) == doctest::Approx(0.343711).epsilon(1e-6));
  CHECK(std::abs(ari(kP1, kP2)) <= 1e-15);
  CHECK(nmi(kP1, kP1) == 1.0);
  CHECK(ari(kP1, kP1) == 1.0);
  CHECK(nmi(Partition::all_in_one(5), Partition::all_in_one(5)) == 1.0);
  CHECK(ari(Partition::all_in_one(5), Partition::all_in_one(5)) == 1.0);
  CHECK_THROWS_AS(nmi(kP1, Partition::all_in_one(3)), InputError);
  CHECK_THROWS_AS(ari(kP1, Partition::all_in_one(3)), InputError);
}

TEST_CASE("NMI and ARI are invariant under relabeling") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = oracle::random_labels(20, 5, rng);
    const auto b = oracle::random_labels(20, 5, rng);
    auto relabeled = a;
    for (int& l : relabeled) l = 100 - 3 * l;
    CHECK(nmi(Partition(a), Partition(b)) == doctest::Approx(nmi(Partition(relabeled), Partition(b))).epsilon(1e-14));
    CHECK(ari(Partition(a), Partition(b)) == doctest::Approx(ari(Partition(relabeled), Partition(b))).epsilon(1e-14));
    CHECK(ari(Partition(a), Partition(relabeled)) == 1.0);
  }
}

TEST_CASE("NMI of independent large partitions is near zero") {
  std::mt19937_64 rng(2);
  const auto a = oracle::random_labels(10000, 5, rng);
  const auto b = oracle::random_labels(10000, 5, rng);
  CHECK(nmi(Partition(a), Partition(b)) < 0.01);
  CHECK(std::abs(ari(Partition(a), Partition(b))) < 0.01);
}

TEST_CASE("NMI, ARI and VI agree with the contingency oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 11;
    const Partition a(oracle::random_labels(n, 4, rng));
    const Partition b(oracle::random_labels(n, 4, rng));
    const auto s = oracle::partition_scores(a.assignment(), b.assignment());
    CHECK(std::abs(nmi(a, b) - s.nmi) <= 1e-12);
    CHECK(std::abs(ari(a, b) - s.ari) <= 1e-12);
    CHECK(std::abs(variation_of_information(a, b) - s.vi) <= 1e-12);
    CHECK(nmi(a, b) >= 0.0);
    CHECK(nmi(a, b) <= 1.0);
  }
}

TEST_CASE("external labels") {
  TempDir dir("eval_labels");
  const auto c = token_corpus({{"a"}, {"b"}, {"c"}, {"d"}});
  write_file_atomic(dir / "topics.csv", "doc_id,label\nd0,x\nd1,x\nd3,y\n");
  const auto labels = load_external_labels(dir / "topics.csv", c);
  CHECK(labels.ids == Words{"d0", "d1", "d3"});
  ScopedWarningCapture w;
  const auto agree = score_against_labels(c, Partition(std::vector<int>{0, 0, 5, 1}), labels);
  CHECK(agree.covered == 3);
  CHECK(agree.nmi == 1.0);
  CHECK(agree.ari == 1.0);
  CHECK(w.contains("cover 3 of 4"));

  write_file_atomic(dir / "unknown.csv", "doc_id,label\nd0,x\nnope,y\n");
  CHECK_THROWS_WITH_AS(load_external_labels(dir / "unknown.csv", c), doctest::Contains("nope"), InputError);
  write_file_atomic(dir / "dup.csv", "doc_id,label\nd0,x\nd0,y\n");
  CHECK_THROWS_WITH_AS(load_external_labels(dir / "dup.csv", c), doctest::Contains("duplicate id"), InputError);
  write_file_atomic(dir / "header.csv", "id,topic\nd0,x\n");
  CHECK_THROWS_AS(load_external_labels(dir / "header.csv", c), InputError);
}
