#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "temp_dir.hpp"
#include "topicgraph/common.hpp"
#include "topicgraph/eval.hpp"
#include "topicgraph/pipeline.hpp"

using namespace topicgraph;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Writes a 120-document fixture and a quick config into `dir`.
fs::path write_fixture(const fs::path& dir, json overrides = json::object()) {
  SyntheticCorpusOptions opts;
  opts.n_docs = 120;
  write_synthetic_corpus(synthetic_corpus(3, opts), dir);
  json cfg = {{"corpus", "corpus.jsonl"},
              {"min_tokens", 5},
              {"lsa_dim", 40},
              {"t_points", 30},
              {"n_runs", 8},
              {"kmeans_n_init", 2},
              {"external_labels", {"labels.csv", "sublabels.csv"}},
              {"seed", 11},
              {"output_dir", "out"}};
  cfg.update(overrides);
  write_file_atomic(dir / "config.json", cfg.dump(2));
  return dir / "config.json";
}

struct CliResult {
  int code = -1;
  std::string err;
  std::string out;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const auto err = scratch / "stderr.txt";
  const auto out = scratch / "stdout.txt";
  const std::string cmd = std::string(TOPICGRAPH_CLI) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = read_file(err);
  r.out = read_file(out);
  return r;
}

}  // namespace

TEST_CASE("config defaults and resolution") {
  const auto c = parse_config(json{{"corpus", "c.jsonl"}}, "/base");
  const auto r = c.resolved();
  CHECK(r["k"] == 13);
  CHECK(r["lsa_dim"] == 300);
  CHECK(r["features"] == "tfidf_lsa");
  CHECK(r["t_points"] == 200);
  CHECK(r["n_runs"] == 50);
  CHECK(r["variant"] == "linearized");
  CHECK(c.corpus == fs::path("/base/c.jsonl"));
  CHECK(c.t_grid().size() == 200);
  CHECK(c.source == json{{"corpus", "c.jsonl"}});
}

TEST_CASE("config errors") {
  CHECK_THROWS_WITH_AS(parse_config(json{{"corpus", "c"}, {"kk", 3}}), doctest::Contains("unknown key 'kk'"),
                       ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"k", 3}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"corpus", "c"}, {"k", -1}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"corpus", "c"}, {"variant", "cubic"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"corpus", "c"}, {"features", "bag"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"corpus", "c"}, {"t_min", 5.0}, {"t_max", 1.0}}), ConfigError);
  CHECK(parse_config(json{{"corpus", "c"}, {"features", "external:e.tsv"}}, "/x").external_features_path() ==
        fs::path("/x/e.tsv"));
}

TEST_CASE("stage names") {
  for (auto s : kAllStages) CHECK(parse_stage(to_string(s)) == s);
  CHECK(parse_stage("export") == Stage::export_);
  CHECK_FALSE(parse_stage("nope").has_value());
}

TEST_CASE("missing corpus exits with code 2 naming the path") {
  TempDir dir("pipeline_missing");
  write_file_atomic(dir / "config.json", json{{"corpus", "absent.jsonl"}, {"output_dir", "out"}}.dump());
  const auto r = run_cli("run --config '" + (dir / "config.json").string() + "'", dir.path());
  CHECK(r.code == 2);
  CHECK(r.err.find("absent.jsonl") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out" / "manifest.json"));

  write_file_atomic(dir / "bad.json", json{{"corpus", "x"}, {"bogus", 1}}.dump());
  CHECK(run_cli("run --config '" + (dir / "bad.json").string() + "'", dir.path()).code == 2);
  CHECK(run_cli("run", dir.path()).code == 2);
}

TEST_CASE("stage failure exits with code 3 naming the stage") {
  TempDir dir("pipeline_stage_fail");
  const auto cfg = write_fixture(dir.path(), {{"features", "external:emb.tsv"}});
  write_file_atomic(dir / "emb.tsv", "doc0000\t1\t2\n");
  const auto r = run_cli("run --config '" + cfg.string() + "'", dir.path());
  CHECK(r.code == 3);
  CHECK(r.err.find("stage 'embed' failed") != std::string::npos);
  CHECK(r.err.find("missing embedding for id") != std::string::npos);
}

TEST_CASE("pipeline run: determinism, caching, manifest and comparison") {
  TempDir dir("pipeline_run");
  const auto cfg_path = write_fixture(dir.path());

  const auto r1 = run_cli("run --config '" + cfg_path.string() + "' --out '" + (dir / "a").string() + "'", dir.path());
  REQUIRE_MESSAGE(r1.code == 0, r1.err);
  const auto r2 = run_cli("run --config '" + cfg_path.string() + "' --out '" + (dir / "b").string() + "'", dir.path());
  REQUIRE_MESSAGE(r2.code == 0, r2.err);

  const auto manifest = json::parse(read_file(dir / "a" / "manifest.json"));
  CHECK(manifest["tool"] == "topicgraph");
  CHECK(manifest["resolved_config"]["k"] == 13);
  CHECK(manifest["config"]["seed"] == 11);
  CHECK(manifest.contains("eigen_version"));
  CHECK(manifest["stages"].size() == std::size(kAllStages));
  REQUIRE(manifest["artifacts"].is_array());
  CHECK(manifest["artifacts"].size() > 10);

  SUBCASE("every artifact exists, parses and is reproducible") {
    std::size_t partitions = 0;
    for (const auto& a : manifest["artifacts"]) {
      const fs::path rel = a.get<std::string>();
      const auto pa = dir / "a" / rel;
      const auto pb = dir / "b" / rel;
      REQUIRE_MESSAGE(fs::exists(pa), rel.string());
      CHECK_MESSAGE(fs::file_size(pa) > 0, rel.string());
      if (rel.extension() == ".json") CHECK_NOTHROW(json::parse(read_file(pa)));
      if (rel.parent_path() == "partitions") {
        ++partitions;
        CHECK_NOTHROW(load_partition_csv(pa));
        CHECK_MESSAGE(read_file(pa) == read_file(pb), rel.string());
      }
      if (rel == "scan.csv" || rel == "cross_vi.csv" || rel == "scales.json" || rel == "embeddings.tsv" ||
          rel == "graph.tsv") {
        CHECK_MESSAGE(read_file(pa) == read_file(pb), rel.string());
      }
    }
    CHECK(partitions >= 3);
  }

  SUBCASE("a rerun hits the cache") {
    const auto r3 = run_cli("run --config '" + cfg_path.string() + "' --out '" + (dir / "a").string() + "'", dir.path());
    REQUIRE(r3.code == 0);
    const auto m = json::parse(read_file(dir / "a" / "manifest.json"));
    for (auto s : kAllStages) CHECK(m["stages"][std::string(to_string(s))]["cached"] == true);

    // A changed seed invalidates from the embedding onwards.
    const auto r4 =
        run_cli("run --config '" + cfg_path.string() + "' --seed 12 --out '" + (dir / "a").string() + "'", dir.path());
    REQUIRE(r4.code == 0);
    const auto m4 = json::parse(read_file(dir / "a" / "manifest.json"));
    CHECK(m4["stages"]["ingest"]["cached"] == true);
    CHECK(m4["stages"]["scan"]["cached"] == false);
  }

  SUBCASE("a held lock blocks a second run") {
    write_file_atomic(dir / "a" / ".lock", "");
    const auto r = run_cli("run --config '" + cfg_path.string() + "' --out '" + (dir / "a").string() + "'", dir.path());
    CHECK(r.code == 3);
    CHECK(r.err.find("locked") != std::string::npos);
    fs::remove(dir / "a" / ".lock");
  }

  SUBCASE("the scales file describes the chosen partitions") {
    const auto scales = json::parse(read_file(dir / "a" / "scales.json"));
    REQUIRE(scales["scales"].size() >= 1);
    for (const auto& s : scales["scales"]) {
      const auto p = load_partition_csv(dir / "a" / s["file"].get<std::string>());
      CHECK(p.partition.n_clusters() == s["n_clusters"].get<std::size_t>());
    }
  }

  SUBCASE("compare") {
    const auto parts = dir / "a" / "partitions";
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(parts)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    REQUIRE(files.size() >= 2);

    const auto self = compare_partitions({files[0], files[0]});
    CHECK(self.nmi(0, 1) == 1.0);
    CHECK(self.ari(0, 1) == 1.0);
    CHECK(self.vi(0, 1) == 0.0);

    const auto cmp = compare_partitions(files);
    const auto a = load_partition_csv(files[0]);
    const auto b = load_partition_csv(files[1]);
    CHECK(cmp.nmi(0, 1) == doctest::Approx(nmi(a.partition, b.partition)).epsilon(1e-14));
    CHECK(cmp.ari(0, 1) == doctest::Approx(ari(a.partition, b.partition)).epsilon(1e-14));
    CHECK(cmp.vi(0, 1) == doctest::Approx(variation_of_information(a.partition, b.partition)).epsilon(1e-14));

    const auto r = run_cli("compare '" + files[0].string() + "' '" + files[1].string() + "'", dir.path());
    CHECK(r.code == 0);
    CHECK(r.out.starts_with("a,b,nmi,ari,vi\n"));
    CHECK(r.out == comparison_csv(compare_partitions({files[0], files[1]})));

    write_file_atomic(dir / "other.csv", "doc_id,cluster\nzzz,0\nyyy,1\n");
    CHECK_THROWS_WITH_AS(compare_partitions({files[0], dir / "other.csv"}), doctest::Contains("zzz"), InputError);
  }
}

TEST_CASE("stages can run one at a time in process") {
  TempDir dir("pipeline_stages");
  auto config = load_config(write_fixture(dir.path(), {{"features", "tfidf"}, {"baseline_ks", {3}}}));
  validate_inputs(config);
  Pipeline p(std::move(config));
  CHECK(fs::exists(dir / "out" / ".lock"));
  CHECK_THROWS_WITH_AS(Pipeline(load_config(dir / "config.json")), doctest::Contains("locked"), Error);
  for (auto s : kAllStages) {
    const auto rec = p.run_stage(s);
    CHECK_FALSE(rec.cached);
    for (const auto& f : rec.outputs) CHECK_MESSAGE(fs::exists(dir / "out" / f), f);
  }
  CHECK(fs::exists(dir / "out" / "partitions" / "kmeans_3.csv"));
  CHECK(fs::exists(dir / "out" / "partitions" / "ward_3.csv"));
  const auto eval = json::parse(read_file(dir / "out" / "evaluation.json"));
  CHECK(eval["features"] == "tfidf");
  CHECK(eval["labels"].is_array());
  CHECK(p.run_stage(Stage::graph).cached);
}

TEST_CASE("synthetic fixture") {
  const auto a = synthetic_corpus(1);
  const auto b = synthetic_corpus(1);
  CHECK(a.corpus.size() == 200);
  CHECK(a.corpus.ids() == b.corpus.ids());
  CHECK(a.corpus[5].raw_text == b.corpus[5].raw_text);
  CHECK(a.topic == b.topic);
  for (std::size_t i = 0; i < a.topic.size(); ++i) CHECK(a.subtopic[i] / 3 == a.topic[i]);
}
