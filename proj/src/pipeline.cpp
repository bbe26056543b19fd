#include "topicgraph/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <Eigen/Core>

#include "topicgraph/baselines.hpp"
#include "topicgraph/eval.hpp"
#include "topicgraph/export.hpp"
#include "topicgraph/features.hpp"
#include "topicgraph/graph.hpp"
#include "topicgraph/partition.hpp"

namespace topicgraph {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kCorpusFile = "corpus.jsonl";
constexpr const char* kEmbeddingsFile = "embeddings.tsv";
constexpr const char* kGraphFile = "graph.tsv";
constexpr const char* kScanFile = "scan.csv";
constexpr const char* kCrossViFile = "cross_vi.csv";
constexpr const char* kScanPartitionsFile = "scan_partitions.tsv";
constexpr const char* kScalesFile = "scales.json";
constexpr const char* kBaselinesFile = "baselines.json";
constexpr const char* kEvaluationFile = "evaluation.json";
constexpr const char* kSankeyFile = "sankey.json";
constexpr const char* kReferenceFile = "reference_stats.tsv";
constexpr const char* kCacheFile = ".stage_cache.json";
constexpr const char* kManifestFile = "manifest.json";

// Seed streams per stage.
enum : std::uint64_t { kEmbedStream = 1, kScanStream = 2, kBaselineStream = 3 };

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_file(const fs::path& path) {
  if (!fs::exists(path)) return 0;
  return fnv1a(read_file(path));
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// --- config parsing -------------------------------------------------------

class ConfigReader {
 public:
  ConfigReader(const json& doc, fs::path base) : doc_(doc), base_(std::move(base)) {}

  bool has(const char* key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

  std::size_t count(const char* key, std::size_t fallback, std::size_t min_value = 0) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    const auto n = v.get<std::uint64_t>();
    if (n < min_value) fail(key, "must be at least " + std::to_string(min_value));
    return static_cast<std::size_t>(n);
  }

  double real(const char* key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  std::optional<double> optional_real(const char* key) {
    if (!has(key)) {
      seen_.insert(key);
      return std::nullopt;
    }
    return real(key, 0.0);
  }

  bool boolean(const char* key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, std::string fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  fs::path path(const std::string& text) const {
    fs::path p(text);
    return p.is_relative() && !base_.empty() ? base_ / p : p;
  }

  std::optional<fs::path> optional_path(const char* key) {
    if (!has(key)) {
      seen_.insert(key);
      return std::nullopt;
    }
    return path(string(key, ""));
  }

  std::vector<std::string> strings(const char* key) {
    seen_.insert(key);
    std::vector<std::string> out;
    if (!has(key)) return out;
    const auto& v = doc_.at(key);
    if (!v.is_array()) fail(key, "expected an array of strings");
    for (const auto& e : v) {
      if (!e.is_string()) fail(key, "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  std::vector<std::size_t> counts(const char* key) {
    seen_.insert(key);
    std::vector<std::size_t> out;
    if (!has(key)) return out;
    const auto& v = doc_.at(key);
    if (!v.is_array()) fail(key, "expected an array of positive integers");
    for (const auto& e : v) {
      if (!e.is_number_unsigned() || e.get<std::uint64_t>() == 0) fail(key, "expected an array of positive integers");
      out.push_back(static_cast<std::size_t>(e.get<std::uint64_t>()));
    }
    return out;
  }

  void mark(const char* key) { seen_.insert(key); }

  void reject_unknown() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) throw ConfigError("config: unknown key '" + key + "'");
    }
  }

  [[noreturn]] static void fail(const std::string& key, const std::string& what) {
    throw ConfigError("config: '" + key + "': " + what);
  }

 private:
  const json& doc_;
  fs::path base_;
  std::set<std::string> seen_;
};

// --- stage helpers --------------------------------------------------------

struct ScaleEntry {
  std::string name;  // fine, medium, coarse, other_<t index>
  std::string file;  // relative to the output directory
  std::size_t n_clusters = 0;
  double t = 0.0;
};

std::vector<ScaleEntry> read_scales(const fs::path& out) {
  const json j = read_json(out / kScalesFile);
  std::vector<ScaleEntry> scales;
  for (const auto& s : j.at("scales")) {
    scales.push_back({s.at("name").get<std::string>(), s.at("file").get<std::string>(),
                      s.at("n_clusters").get<std::size_t>(), s.at("t").get<double>()});
  }
  return scales;
}

struct MethodPartition {
  std::string method;  // ms, kmeans, ward
  std::string level;   // scale name or cluster count
  std::string file;
};

std::vector<MethodPartition> listed_partitions(const fs::path& out) {
  std::vector<MethodPartition> parts;
  for (const auto& s : read_scales(out)) parts.push_back({"ms", s.name, s.file});
  if (fs::exists(out / kBaselinesFile)) {
    const json j = read_json(out / kBaselinesFile);
    for (const auto& b : j.at("partitions")) {
      parts.push_back({b.at("method").get<std::string>(), std::to_string(b.at("k").get<std::size_t>()),
                       b.at("file").get<std::string>()});
    }
  }
  return parts;
}

/// Loads a partition file and aligns it with corpus order.
Partition aligned_partition(const fs::path& path, const Corpus& corpus) {
  const auto lp = load_partition_csv(path);
  if (lp.ids.size() != corpus.size()) {
    throw InputError(path.string() + ": " + std::to_string(lp.ids.size()) + " rows for " +
                     std::to_string(corpus.size()) + " documents");
  }
  std::vector<int> labels(corpus.size(), -1);
  for (std::size_t k = 0; k < lp.ids.size(); ++k) {
    auto idx = corpus.index_of(lp.ids[k]);
    if (!idx) throw InputError(path.string() + ": unknown document id '" + lp.ids[k] + "'");
    labels[*idx] = lp.partition[k];
  }
  return Partition(labels);
}

Corpus load_stage_corpus(const fs::path& out) {
  const auto path = out / kCorpusFile;
  if (!fs::exists(path)) throw InputError("missing " + path.string() + " (run the ingest stage first)");
  return load_corpus(path, CorpusFormat::pre_tokenized_jsonl);
}

void require(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw InputError("missing " + path.string() + " (run the " + std::string(producer) + " stage first)");
  }
}

}  // namespace

// --- config ---------------------------------------------------------------

json PipelineConfig::resolved() const {
  json j;
  j["corpus"] = corpus.string();
  j["corpus_format"] = std::string(to_string(corpus_format));
  j["min_tokens"] = min_tokens;
  j["min_token_length"] = min_token_length;
  j["stoplist"] = stoplist ? json(*stoplist) : json(default_stoplist());
  j["features"] = features;
  j["lsa_dim"] = lsa_dim;
  j["sublinear_tf"] = sublinear_tf;
  j["min_df"] = min_df;
  j["max_df_ratio"] = max_df_ratio;
  j["k"] = k;
  j["weight_floor"] = weight_floor;
  j["t_min"] = t_min;
  j["t_max"] = t_max;
  j["t_points"] = t_points;
  j["n_runs"] = n_runs;
  j["variant"] = std::string(to_string(variant));
  j["n_scales"] = n_scales;
  j["vi_threshold"] = vi_threshold ? json(*vi_threshold) : json(nullptr);
  j["baseline_ks"] = baseline_ks;
  j["kmeans_n_init"] = kmeans_n_init;
  j["reference_stats"] = reference_stats ? json(reference_stats->string()) : json(nullptr);
  j["reference_vocabulary_cap"] = reference_vocabulary_cap;
  std::vector<std::string> labels;
  for (const auto& p : external_labels) labels.push_back(p.string());
  j["external_labels"] = labels;
  j["top_words"] = top_words;
  j["wordcloud_words"] = wordcloud_words;
  j["seed"] = seed;
  j["output_dir"] = output_dir.string();
  j["jobs"] = jobs;
  return j;
}

PipelineConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  ConfigReader r(doc, base_dir);
  PipelineConfig c;
  c.source = doc;

  if (!r.has("corpus")) throw ConfigError("config: 'corpus' is required");
  c.corpus = r.path(r.string("corpus", ""));
  try {
    c.corpus_format = parse_corpus_format(r.string("corpus_format", "jsonl"));
  } catch (const InputError& e) {
    ConfigReader::fail("corpus_format", e.what());
  }
  c.min_tokens = r.count("min_tokens", c.min_tokens);
  c.min_token_length = r.count("min_token_length", c.min_token_length, 1);
  if (r.has("stoplist")) {
    c.stoplist = r.strings("stoplist");
  } else {
    r.mark("stoplist");
  }

  c.features = r.string("features", c.features);
  if (c.features.starts_with("external:")) {
    if (c.features.size() == 9) ConfigReader::fail("features", "external features need a path");
    c.features = "external:" + r.path(c.features.substr(9)).string();
  } else if (c.features != "tfidf" && c.features != "tfidf_lsa") {
    ConfigReader::fail("features", "expected tfidf, tfidf_lsa or external:<path>, got '" + c.features + "'");
  }
  c.lsa_dim = r.count("lsa_dim", c.lsa_dim, 1);
  c.sublinear_tf = r.boolean("sublinear_tf", c.sublinear_tf);
  c.min_df = r.count("min_df", c.min_df, 1);
  c.max_df_ratio = r.real("max_df_ratio", c.max_df_ratio);
  if (!(c.max_df_ratio > 0.0 && c.max_df_ratio <= 1.0)) ConfigReader::fail("max_df_ratio", "must lie in (0, 1]");

  c.k = r.count("k", c.k, 1);
  c.weight_floor = r.real("weight_floor", c.weight_floor);
  if (!(c.weight_floor > 0.0)) ConfigReader::fail("weight_floor", "must be positive");

  c.t_min = r.real("t_min", c.t_min);
  c.t_max = r.real("t_max", c.t_max);
  c.t_points = r.count("t_points", c.t_points, 1);
  if (!(c.t_min > 0.0) || !(c.t_max >= c.t_min)) ConfigReader::fail("t_min", "need 0 < t_min <= t_max");
  c.n_runs = r.count("n_runs", c.n_runs, 1);
  try {
    c.variant = parse_variant(r.string("variant", "linearized"));
  } catch (const InputError& e) {
    ConfigReader::fail("variant", e.what());
  }
  c.n_scales = r.count("n_scales", c.n_scales, 1);
  c.vi_threshold = r.optional_real("vi_threshold");
  if (c.vi_threshold && !(*c.vi_threshold > 0.0)) ConfigReader::fail("vi_threshold", "must be positive");

  c.baseline_ks = r.counts("baseline_ks");
  c.kmeans_n_init = r.count("kmeans_n_init", c.kmeans_n_init, 1);

  c.reference_stats = r.optional_path("reference_stats");
  c.reference_vocabulary_cap = r.count("reference_vocabulary_cap", c.reference_vocabulary_cap);
  for (const auto& p : r.strings("external_labels")) c.external_labels.push_back(r.path(p));
  c.top_words = r.count("top_words", c.top_words, 2);
  c.wordcloud_words = r.count("wordcloud_words", c.wordcloud_words, 1);

  c.seed = r.count("seed", 0);
  c.output_dir = r.path(r.string("output_dir", c.output_dir.string()));
  c.jobs = r.count("jobs", c.jobs, 1);

  r.reject_unknown();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

void validate_inputs(const PipelineConfig& config) {
  auto check = [](const fs::path& p, std::string_view what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  check(config.corpus, "corpus file");
  if (config.external_features()) check(config.external_features_path(), "embedding file");
  if (config.reference_stats) check(*config.reference_stats, "reference statistics file");
  for (const auto& p : config.external_labels) check(p, "label file");
}

// --- stages ---------------------------------------------------------------

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingest: return "ingest";
    case Stage::embed: return "embed";
    case Stage::graph: return "graph";
    case Stage::scan: return "scan";
    case Stage::select: return "select";
    case Stage::baseline: return "baseline";
    case Stage::evaluate: return "evaluate";
    case Stage::export_: return "export";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (auto s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  fs::create_directories(config_.output_dir);
  lock_path_ = config_.output_dir / ".lock";
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    const auto path = lock_path_;
    lock_path_.clear();
    throw Error("output directory is locked by another run (remove " + path.string() + " if it is stale)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

Pipeline::~Pipeline() {
  if (!lock_path_.empty()) {
    std::error_code ec;
    fs::remove(lock_path_, ec);
  }
}

std::string Pipeline::stage_key(Stage stage) const {
  const auto& c = config_;
  const auto& o = out();
  json k;
  k["stage"] = std::string(to_string(stage));
  k["version"] = TOPICGRAPH_VERSION;
  auto file = [&](const fs::path& p) { return hex64(hash_file(p)); };
  switch (stage) {
    case Stage::ingest:
      k["corpus"] = file(c.corpus);
      k["format"] = std::string(to_string(c.corpus_format));
      k["min_tokens"] = c.min_tokens;
      k["min_token_length"] = c.min_token_length;
      k["stoplist"] = c.resolved()["stoplist"];
      break;
    case Stage::embed:
      k["corpus"] = file(o / kCorpusFile);
      k["features"] = c.features;
      if (c.external_features()) k["external"] = file(c.external_features_path());
      k["lsa_dim"] = c.lsa_dim;
      k["sublinear_tf"] = c.sublinear_tf;
      k["min_df"] = c.min_df;
      k["max_df_ratio"] = c.max_df_ratio;
      k["seed"] = c.seed;
      break;
    case Stage::graph:
      k["embeddings"] = file(o / kEmbeddingsFile);
      k["corpus"] = file(o / kCorpusFile);
      k["k"] = c.k;
      k["weight_floor"] = c.weight_floor;
      break;
    case Stage::scan:
      k["graph"] = file(o / kGraphFile);
      k["t"] = {c.t_min, c.t_max, c.t_points};
      k["n_runs"] = c.n_runs;
      k["variant"] = std::string(to_string(c.variant));
      k["seed"] = c.seed;
      break;
    case Stage::select:
      k["scan"] = {file(o / kScanFile), file(o / kCrossViFile), file(o / kScanPartitionsFile)};
      k["corpus"] = file(o / kCorpusFile);
      k["n_scales"] = c.n_scales;
      k["vi_threshold"] = c.resolved()["vi_threshold"];
      break;
    case Stage::baseline:
      k["embeddings"] = file(o / kEmbeddingsFile);
      k["scales"] = file(o / kScalesFile);
      k["baseline_ks"] = c.baseline_ks;
      k["kmeans_n_init"] = c.kmeans_n_init;
      k["seed"] = c.seed;
      break;
    case Stage::evaluate: {
      k["corpus"] = file(o / kCorpusFile);
      k["scales"] = file(o / kScalesFile);
      k["baselines"] = file(o / kBaselinesFile);
      json parts = json::array();
      if (fs::exists(o / kScalesFile)) {
        for (const auto& p : listed_partitions(o)) parts.push_back(file(o / p.file));
      }
      k["partitions"] = parts;
      k["reference"] = c.reference_stats ? file(*c.reference_stats) : std::string("corpus");
      k["reference_vocabulary_cap"] = c.reference_vocabulary_cap;
      json labels = json::array();
      for (const auto& p : c.external_labels) labels.push_back({p.string(), file(p)});
      k["labels"] = labels;
      k["top_words"] = c.top_words;
      k["features"] = c.features;
      break;
    }
    case Stage::export_: {
      k["corpus"] = file(o / kCorpusFile);
      k["scales"] = file(o / kScalesFile);
      json parts = json::array();
      if (fs::exists(o / kScalesFile)) {
        for (const auto& s : read_scales(o)) parts.push_back(file(o / s.file));
      }
      k["partitions"] = parts;
      k["wordcloud_words"] = c.wordcloud_words;
      break;
    }
  }
  return hex64(fnv1a(k.dump()));
}

StageRecord Pipeline::run_stage(Stage stage) {
  const std::string name(to_string(stage));
  StageRecord record{stage, false, 0.0, {}, {}};
  const auto start = std::chrono::steady_clock::now();
  try {
    record.key = stage_key(stage);
    json cache = fs::exists(out() / kCacheFile) ? read_json(out() / kCacheFile) : json::object();
    bool hit = false;
    if (cache.contains(name) && cache[name].value("key", "") == record.key) {
      hit = true;
      for (const auto& f : cache[name].at("outputs")) {
        if (!fs::exists(out() / f.get<std::string>())) hit = false;
      }
      if (hit) record.outputs = cache[name].at("outputs").get<std::vector<std::string>>();
    }
    if (hit) {
      record.cached = true;
    } else {
      record.outputs = execute(stage);
      cache[name] = {{"key", record.key}, {"outputs", record.outputs}};
      write_file_atomic(out() / kCacheFile, cache.dump(1) + "\n");
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
  record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::erase_if(records_, [&](const StageRecord& r) { return r.stage == stage; });
  records_.push_back(record);
  return record;
}

std::vector<StageRecord> Pipeline::run_all() {
  std::vector<StageRecord> out;
  for (auto s : kAllStages) {
    try {
      out.push_back(run_stage(s));
    } catch (...) {
      write_manifest();
      throw;
    }
  }
  write_manifest();
  return out;
}

std::vector<std::string> Pipeline::execute(Stage stage) {
  switch (stage) {
    case Stage::ingest: return do_ingest();
    case Stage::embed: return do_embed();
    case Stage::graph: return do_graph();
    case Stage::scan: return do_scan();
    case Stage::select: return do_select();
    case Stage::baseline: return do_baseline();
    case Stage::evaluate: return do_evaluate();
    case Stage::export_: return do_export();
  }
  return {};
}

std::vector<std::string> Pipeline::do_ingest() {
  const Corpus raw = load_corpus(config_.corpus, config_.corpus_format);
  NormalizeConfig nc;
  if (config_.stoplist) nc.stoplist = {config_.stoplist->begin(), config_.stoplist->end()};
  nc.min_token_length = config_.min_token_length;
  nc.min_tokens = config_.min_tokens;
  const Corpus corpus = normalize_corpus(raw, nc);
  if (corpus.size() < 2) {
    throw InputError("only " + std::to_string(corpus.size()) + " documents survive normalization (min_tokens=" +
                     std::to_string(config_.min_tokens) + ")");
  }
  save_corpus_tokens(corpus, out() / kCorpusFile);
  return {kCorpusFile};
}

std::vector<std::string> Pipeline::do_embed() {
  const Corpus corpus = load_stage_corpus(out());
  EmbeddingMatrix m;
  if (config_.external_features()) {
    m = load_embeddings(config_.external_features_path(), corpus);
  } else {
    const auto vocab = build_vocabulary(corpus, config_.min_df, config_.max_df_ratio);
    m = tfidf(corpus, vocab, config_.sublinear_tf);
    if (config_.features == "tfidf_lsa") m = lsa_reduce(m, config_.lsa_dim, mix_seed(config_.seed, kEmbedStream));
  }
  save_embeddings(m, out() / kEmbeddingsFile);
  return {kEmbeddingsFile};
}

std::vector<std::string> Pipeline::do_graph() {
  const Corpus corpus = load_stage_corpus(out());
  require(out() / kEmbeddingsFile, "embed");
  const auto m = load_embeddings(out() / kEmbeddingsFile, corpus);
  const auto g = mst_knn(m, config_.k, config_.weight_floor);
  save_graph(g, out() / kGraphFile);
  return {kGraphFile};
}

std::vector<std::string> Pipeline::do_scan() {
  require(out() / kGraphFile, "graph");
  const auto g = load_graph(out() / kGraphFile);
  const RandomWalkContext ctx(g);
  ScanOptions so;
  so.t_grid = config_.t_grid();
  so.n_runs = config_.n_runs;
  so.seed = mix_seed(config_.seed, kScanStream);
  so.stability.variant = config_.variant;
  so.jobs = config_.jobs;
  const auto result = scan(ctx, so);
  save_scan_csv(result, out() / kScanFile);
  save_cross_vi_csv(result, out() / kCrossViFile);
  save_scan_partitions(result, out() / kScanPartitionsFile);
  return {kScanFile, kCrossViFile, kScanPartitionsFile};
}

std::vector<std::string> Pipeline::do_select() {
  const Corpus corpus = load_stage_corpus(out());
  require(out() / kScanFile, "scan");
  const auto result = load_scan(out() / kScanFile, out() / kCrossViFile, out() / kScanPartitionsFile);
  if (!result.points.empty() && result.points.front().partition.size() != corpus.size()) {
    throw InputError("scan covers " + std::to_string(result.points.front().partition.size()) + " nodes but corpus has " +
                     std::to_string(corpus.size()) + " documents");
  }
  SelectionOptions opts;
  opts.n_scales = config_.n_scales;
  opts.vi_threshold = config_.vi_threshold;
  const auto selection = select_robust_scales(result, opts);
  if (selection.chosen.empty()) throw InputError("no robust scale found in the scan");

  fs::create_directories(out() / "partitions");
  const auto ids = corpus.ids();
  json scales = json::array();
  std::vector<std::string> outputs;
  for (const auto& s : selection.chosen) {
    std::string name(to_string(s.label));
    if (s.label == ScaleLabel::other) name += "_" + std::to_string(s.t_index);
    const std::string file = "partitions/ms_" + name + ".csv";
    save_partition_csv(out() / file, ids, s.partition);
    outputs.push_back(file);
    scales.push_back({{"name", name},
                      {"label", std::string(to_string(s.label))},
                      {"file", file},
                      {"t", s.t},
                      {"t_index", s.t_index},
                      {"n_clusters", s.n_clusters},
                      {"ensemble_vi", s.ensemble_vi},
                      {"stability", result.points[s.t_index].stability},
                      {"plateau", {s.plateau_begin, s.plateau_end}},
                      {"plateau_log_length", s.plateau_log_length},
                      {"from_plateau", s.from_plateau}});
  }
  const double threshold =
      config_.vi_threshold.value_or(0.1 * std::log(static_cast<double>(result.points.front().partition.size())));
  write_file_atomic(out() / kScalesFile, json{{"vi_threshold", threshold}, {"scales", scales}}.dump(1) + "\n");
  outputs.insert(outputs.begin(), kScalesFile);
  return outputs;
}

std::vector<std::string> Pipeline::do_baseline() {
  const Corpus corpus = load_stage_corpus(out());
  require(out() / kEmbeddingsFile, "embed");
  std::vector<std::size_t> ks = config_.baseline_ks;
  if (ks.empty()) {
    require(out() / kScalesFile, "select");
    for (const auto& s : read_scales(out())) {
      if (std::find(ks.begin(), ks.end(), s.n_clusters) == ks.end()) ks.push_back(s.n_clusters);
    }
  }
  // Unit rows, so Euclidean distances order pairs like cosine similarity.
  const auto m = l2_normalize(load_embeddings(out() / kEmbeddingsFile, corpus));
  const Eigen::MatrixXd x = m.to_dense();
  const auto ids = corpus.ids();
  fs::create_directories(out() / "partitions");
  json parts = json::array();
  std::vector<std::string> outputs{kBaselinesFile};
  KMeansOptions ko;
  ko.n_init = config_.kmeans_n_init;
  std::optional<Dendrogram> dendrogram;
  for (auto k : ks) {
    const auto km = kmeans(x, k, mix_seed(config_.seed, kBaselineStream, k), ko);
    const std::string kfile = "partitions/kmeans_" + std::to_string(k) + ".csv";
    save_partition_csv(out() / kfile, ids, km.partition);
    parts.push_back({{"method", "kmeans"}, {"k", k}, {"file", kfile}, {"inertia", km.inertia}});
    outputs.push_back(kfile);

    if (k > corpus.size()) throw InputError("ward: k=" + std::to_string(k) + " exceeds N");
    if (!dendrogram) dendrogram = ward_linkage(x);
    const std::string wfile = "partitions/ward_" + std::to_string(k) + ".csv";
    save_partition_csv(out() / wfile, ids, dendrogram->cut(k));
    parts.push_back({{"method", "ward"}, {"k", k}, {"file", wfile}});
    outputs.push_back(wfile);
  }
  write_file_atomic(out() / kBaselinesFile, json{{"partitions", parts}}.dump(1) + "\n");
  return outputs;
}

std::vector<std::string> Pipeline::do_evaluate() {
  const Corpus corpus = load_stage_corpus(out());
  require(out() / kScalesFile, "select");
  std::vector<std::string> outputs{kEvaluationFile};

  ReferenceStats ref;
  json reference;
  if (config_.reference_stats) {
    ref = load_reference_stats(*config_.reference_stats);
    reference["source"] = config_.reference_stats->string();
  } else {
    warn("no reference statistics configured; scoring coherence against the analysed corpus itself");
    ref = build_reference_stats(corpus, config_.reference_vocabulary_cap);
    save_reference_stats(ref, out() / kReferenceFile);
    outputs.push_back(kReferenceFile);
    reference["source"] = "corpus";
    reference["file"] = kReferenceFile;
  }
  reference["n_docs"] = ref.n_docs();
  reference["n_terms"] = ref.terms().size();

  std::vector<ExternalLabels> labels;
  for (const auto& p : config_.external_labels) labels.push_back(load_external_labels(p, corpus));

  json coherence = json::array();
  json agreement = json::array();
  for (const auto& mp : listed_partitions(out())) {
    const auto p = aligned_partition(out() / mp.file, corpus);
    json entry{{"method", mp.method}, {"level", mp.level}, {"file", mp.file}, {"features", config_.features},
               {"n_clusters", p.n_clusters()}};
    try {
      const auto report = aggregate_pmi(corpus, p, ref, config_.top_words);
      entry["aggregate_pmi"] = report.aggregate_pmi;
      entry["scored_clusters"] = report.scored_clusters;
      json clusters = json::array();
      for (const auto& cc : report.clusters) {
        json words = json::array();
        for (const auto& w : cc.top_words) words.push_back(w.word);
        clusters.push_back({{"id", cc.cluster}, {"pmi", cc.pmi ? json(*cc.pmi) : json(nullptr)}, {"top_words", words}});
      }
      entry["clusters"] = clusters;
    } catch (const Error& e) {
      warn(mp.file + ": " + e.what());
      entry["aggregate_pmi"] = nullptr;
      entry["error"] = e.what();
    }
    coherence.push_back(std::move(entry));
    for (const auto& l : labels) {
      const auto a = score_against_labels(corpus, p, l);
      agreement.push_back({{"labels", l.name}, {"method", mp.method}, {"level", mp.level}, {"file", mp.file},
                           {"covered", a.covered}, {"nmi", a.nmi}, {"ari", a.ari}});
    }
  }
  const json report{{"features", config_.features}, {"reference", reference}, {"coherence", coherence},
                    {"labels", agreement}};
  write_file_atomic(out() / kEvaluationFile, report.dump(1) + "\n");
  return outputs;
}

std::vector<std::string> Pipeline::do_export() {
  const Corpus corpus = load_stage_corpus(out());
  require(out() / kScalesFile, "select");
  auto scales = read_scales(out());
  // Finest level first.
  std::sort(scales.begin(), scales.end(), [](const ScaleEntry& a, const ScaleEntry& b) { return a.t < b.t; });
  std::vector<NamedPartition> levels;
  std::vector<std::string> outputs{kSankeyFile};
  for (const auto& s : scales) {
    auto p = aligned_partition(out() / s.file, corpus);
    const std::string file = "wordclouds_" + s.name + ".json";
    export_wordclouds(corpus, p, out() / file, config_.wordcloud_words);
    outputs.push_back(file);
    levels.emplace_back("ms_" + s.name, std::move(p));
  }
  export_sankey(levels, out() / kSankeyFile);
  return outputs;
}

void Pipeline::write_manifest() const {
  const auto path = out() / kManifestFile;
  json stages = json::object();
  if (fs::exists(path)) {
    try {
      stages = read_json(path).value("stages", json::object());
    } catch (const InputError&) {
      stages = json::object();
    }
  }
  for (const auto& r : records_) {
    stages[std::string(to_string(r.stage))] = {
        {"cached", r.cached}, {"seconds", r.seconds}, {"key", r.key}, {"outputs", r.outputs}};
  }
  json artifacts = json::array();
  for (auto s : kAllStages) {
    const std::string name(to_string(s));
    if (!stages.contains(name)) continue;
    for (const auto& f : stages[name].at("outputs")) artifacts.push_back(f);
  }
  json manifest;
  manifest["tool"] = "topicgraph";
  manifest["version"] = TOPICGRAPH_VERSION;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  manifest["compiler"] = __VERSION__;
  manifest["config"] = config_.source;
  manifest["resolved_config"] = config_.resolved();
  manifest["seeds"] = {{"base", config_.seed},
                       {"embed", mix_seed(config_.seed, kEmbedStream)},
                       {"scan", mix_seed(config_.seed, kScanStream)},
                       {"baseline", "mix(seed, 3, k)"}};
  manifest["stages"] = stages;
  manifest["artifacts"] = artifacts;
  write_file_atomic(path, manifest.dump(1) + "\n");
}

// --- comparison -----------------------------------------------------------

PartitionComparison compare_partitions(const std::vector<fs::path>& paths) {
  if (paths.size() < 2) throw InputError("compare needs at least two partition files");
  std::vector<LabeledPartition> files;
  for (const auto& p : paths) files.push_back(load_partition_csv(p));
  const auto& ref_ids = files[0].ids;
  std::map<std::string, std::size_t> position;
  for (std::size_t k = 0; k < ref_ids.size(); ++k) position.emplace(ref_ids[k], k);

  PartitionComparison cmp;
  std::vector<Partition> aligned;
  for (std::size_t f = 0; f < files.size(); ++f) {
    cmp.names.push_back(paths[f].stem().string());
    std::vector<int> labels(ref_ids.size(), -1);
    std::vector<std::string> extra;
    for (std::size_t k = 0; k < files[f].ids.size(); ++k) {
      auto it = position.find(files[f].ids[k]);
      if (it == position.end()) {
        extra.push_back(files[f].ids[k]);
      } else {
        labels[it->second] = files[f].partition[k];
      }
    }
    std::vector<std::string> missing;
    for (std::size_t k = 0; k < ref_ids.size(); ++k) {
      if (labels[k] < 0) missing.push_back(ref_ids[k]);
    }
    if (!missing.empty() || !extra.empty()) {
      std::string msg = "document ids differ between " + paths[0].string() + " and " + paths[f].string() + ";";
      auto list = [&](const char* what, const std::vector<std::string>& ids) {
        if (ids.empty()) return;
        msg += std::string(" ") + what + ":";
        for (std::size_t k = 0; k < std::min<std::size_t>(ids.size(), 20); ++k) msg += " " + ids[k];
        if (ids.size() > 20) msg += " ... (" + std::to_string(ids.size()) + " total)";
      };
      list("missing from the second", missing);
      list("missing from the first", extra);
      throw InputError(msg);
    }
    aligned.emplace_back(labels);
  }
  const auto n = static_cast<Eigen::Index>(aligned.size());
  cmp.nmi.resize(n, n);
  cmp.ari.resize(n, n);
  cmp.vi.resize(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a; b < n; ++b) {
      const auto& pa = aligned[static_cast<std::size_t>(a)];
      const auto& pb = aligned[static_cast<std::size_t>(b)];
      cmp.nmi(a, b) = cmp.nmi(b, a) = nmi(pa, pb);
      cmp.ari(a, b) = cmp.ari(b, a) = ari(pa, pb);
      cmp.vi(a, b) = cmp.vi(b, a) = variation_of_information(pa, pb);
    }
  }
  return cmp;
}

std::string comparison_csv(const PartitionComparison& cmp) {
  std::string out = "a,b,nmi,ari,vi\n";
  for (std::size_t a = 0; a < cmp.names.size(); ++a) {
    for (std::size_t b = 0; b < cmp.names.size(); ++b) {
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      out += cmp.names[a] + ',' + cmp.names[b] + ',' + format_double(cmp.nmi(ia, ib)) + ',' +
             format_double(cmp.ari(ia, ib)) + ',' + format_double(cmp.vi(ia, ib)) + '\n';
    }
  }
  return out;
}

void save_comparison_csv(const PartitionComparison& cmp, const fs::path& path) {
  write_file_atomic(path, comparison_csv(cmp));
}

// --- synthetic fixture ----------------------------------------------------

namespace {

std::vector<std::string> pseudo_words(std::size_t count, std::mt19937_64& rng, std::set<std::string>& taken) {
  static constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u"};
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string w;
    const std::size_t syllables = 2 + rng() % 2;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng() % std::size(kOnsets)];
      w += kVowels[rng() % std::size(kVowels)];
    }
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

SyntheticCorpus synthetic_corpus(std::uint64_t seed, const SyntheticCorpusOptions& o) {
  const std::size_t groups = o.n_topics * std::max<std::size_t>(1, o.subtopics_per_topic);
  if (o.n_topics == 0 || o.n_docs < groups) throw InputError("synthetic corpus needs n_docs >= number of subtopics");
  const std::size_t per_topic = std::max<std::size_t>(1, o.subtopics_per_topic);
  std::mt19937_64 rng(seed);
  std::set<std::string> taken(default_stoplist().begin(), default_stoplist().end());
  std::vector<std::vector<std::string>> topic_words;
  std::vector<std::vector<std::string>> subtopic_words;
  for (std::size_t t = 0; t < o.n_topics; ++t) topic_words.push_back(pseudo_words(o.words_per_topic, rng, taken));
  for (std::size_t s = 0; s < groups; ++s) subtopic_words.push_back(pseudo_words(o.words_per_subtopic, rng, taken));
  const auto background = pseudo_words(o.background_words, rng, taken);

  SyntheticCorpus out{Corpus("synthetic:" + std::to_string(seed)), {}, {}};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::chrono::sys_days start = std::chrono::year{2016} / std::chrono::January / 1;
  for (std::size_t i = 0; i < o.n_docs; ++i) {
    const auto group = i % groups;
    const auto topic = group / per_topic;
    std::string text;
    for (std::size_t w = 0; w < o.doc_length; ++w) {
      const std::vector<std::string>* pool = &background;
      if (unit(rng) < o.topic_share) {
        pool = (o.words_per_subtopic > 0 && unit(rng) < o.subtopic_share) ? &subtopic_words[group]
                                                                          : &topic_words[topic];
      }
      std::string word = (*pool)[rng() % pool->size()];
      if (w % 12 == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
      text += word;
      text += (w % 12 == 11 || w + 1 == o.doc_length) ? ". " : " ";
    }
    text.pop_back();
    Document doc;
    char id[32];
    std::snprintf(id, sizeof id, "doc%04zu", i);
    doc.id = id;
    doc.date = std::chrono::year_month_day{start + std::chrono::days(static_cast<int>(i % 366))};
    doc.raw_text = std::move(text);
    out.corpus.add(std::move(doc));
    out.topic.push_back(static_cast<int>(topic));
    out.subtopic.push_back(static_cast<int>(group));
  }
  return out;
}

void write_synthetic_corpus(const SyntheticCorpus& data, const fs::path& dir) {
  fs::create_directories(dir);
  std::string jsonl;
  std::string labels = "doc_id,label\n";
  std::string sublabels = labels;
  for (std::size_t i = 0; i < data.corpus.size(); ++i) {
    const auto& d = data.corpus[i];
    json rec{{"id", d.id}, {"text", d.raw_text}};
    if (d.date) rec["date"] = format_iso_date(*d.date);
    jsonl += rec.dump() + "\n";
    labels += d.id + ",topic" + std::to_string(data.topic[i]) + "\n";
    sublabels += d.id + ",subtopic" + std::to_string(data.subtopic[i]) + "\n";
  }
  write_file_atomic(dir / "corpus.jsonl", jsonl);
  write_file_atomic(dir / "labels.csv", labels);
  write_file_atomic(dir / "sublabels.csv", sublabels);
}

}  // namespace topicgraph
