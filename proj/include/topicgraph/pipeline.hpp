#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "topicgraph/common.hpp"
#include "topicgraph/corpus.hpp"
#include "topicgraph/markov_stability.hpp"

namespace topicgraph {

/// Invalid or inconsistent configuration; the CLI maps it to exit code 2.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// A pipeline stage failed; the CLI maps it to exit code 3.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::filesystem::path corpus;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  std::size_t min_tokens = 30;
  std::size_t min_token_length = 2;
  std::optional<std::vector<std::string>> stoplist;  // default stoplist when empty

  /// "tfidf", "tfidf_lsa" or "external:<path>".
  std::string features = "tfidf_lsa";
  std::size_t lsa_dim = 300;
  bool sublinear_tf = false;
  std::size_t min_df = 1;
  double max_df_ratio = 1.0;

  std::size_t k = 13;
  double weight_floor = 1e-6;

  double t_min = 1e-2;
  double t_max = 1e2;
  std::size_t t_points = 200;
  std::size_t n_runs = 50;
  Variant variant = Variant::linearized;
  std::size_t n_scales = 3;
  std::optional<double> vi_threshold;

  /// Cluster counts for the baselines; empty means the MS-selected counts.
  std::vector<std::size_t> baseline_ks;
  std::size_t kmeans_n_init = 10;

  std::optional<std::filesystem::path> reference_stats;
  std::size_t reference_vocabulary_cap = 0;
  std::vector<std::filesystem::path> external_labels;
  std::size_t top_words = 10;
  std::size_t wordcloud_words = 50;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "topicgraph_out";
  std::size_t jobs = 1;

  /// The configuration document exactly as supplied.
  nlohmann::json source = nlohmann::json::object();

  bool external_features() const { return features.starts_with("external:"); }
  std::filesystem::path external_features_path() const { return features.substr(9); }
  std::vector<double> t_grid() const { return log_grid(t_min, t_max, t_points); }

  /// Every key with its effective value.
  nlohmann::json resolved() const;
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Throws ConfigError on unknown keys, wrong types and invalid values.
PipelineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
/// Checks that the configured inputs exist; errors name the missing path.
void validate_inputs(const PipelineConfig& config);

enum class Stage { ingest, embed, graph, scan, select, baseline, evaluate, export_ };

inline constexpr Stage kAllStages[] = {Stage::ingest, Stage::embed,    Stage::graph,    Stage::scan,
                                       Stage::select, Stage::baseline, Stage::evaluate, Stage::export_};

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view name);

struct StageRecord {
  Stage stage;
  bool cached = false;
  double seconds = 0.0;
  std::string key;  // content hash of the stage inputs
  std::vector<std::string> outputs;  // relative to the output directory
};

/// Runs stages against one output directory, holding its lock file for its
/// lifetime. Each stage reads its inputs from artifacts of earlier stages, so
/// stages may also be run one at a time. A stage whose input hash matches the
/// cached key and whose outputs still exist is skipped.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const PipelineConfig& config() const { return config_; }
  const std::filesystem::path& out() const { return config_.output_dir; }

  /// Throws StageError naming the stage on failure.
  StageRecord run_stage(Stage stage);
  std::vector<StageRecord> run_all();

  /// Writes manifest.json describing the config, seeds, versions and the
  /// stages run so far.
  void write_manifest() const;

 private:
  std::string stage_key(Stage stage) const;
  std::vector<std::string> execute(Stage stage);

  std::vector<std::string> do_ingest();
  std::vector<std::string> do_embed();
  std::vector<std::string> do_graph();
  std::vector<std::string> do_scan();
  std::vector<std::string> do_select();
  std::vector<std::string> do_baseline();
  std::vector<std::string> do_evaluate();
  std::vector<std::string> do_export();

  PipelineConfig config_;
  std::filesystem::path lock_path_;
  std::vector<StageRecord> records_;
};

/// Pairwise agreement between partition files over the same document ids.
struct PartitionComparison {
  std::vector<std::string> names;
  Eigen::MatrixXd nmi;
  Eigen::MatrixXd ari;
  Eigen::MatrixXd vi;
};

/// Throws InputError listing ids missing from any file.
PartitionComparison compare_partitions(const std::vector<std::filesystem::path>& paths);
/// Long format `a,b,nmi,ari,vi` over all ordered pairs.
std::string comparison_csv(const PartitionComparison& cmp);
void save_comparison_csv(const PartitionComparison& cmp, const std::filesystem::path& path);

/// Synthetic corpus with planted topics split into subtopics. Each topic and
/// each subtopic owns a private vocabulary; documents mix words of their
/// topic, their subtopic and a shared background.
struct SyntheticCorpus {
  Corpus corpus;
  std::vector<int> topic;     // planted label per document
  std::vector<int> subtopic;  // globally numbered, nested in topic
};

struct SyntheticCorpusOptions {
  std::size_t n_docs = 200;
  std::size_t n_topics = 3;
  std::size_t subtopics_per_topic = 3;
  std::size_t words_per_topic = 40;
  std::size_t words_per_subtopic = 20;
  std::size_t background_words = 60;
  std::size_t doc_length = 60;
  double topic_share = 0.75;     // tokens drawn from the topic side
  double subtopic_share = 0.25;  // of those, drawn from the subtopic pool
};

SyntheticCorpus synthetic_corpus(std::uint64_t seed, const SyntheticCorpusOptions& options = {});
/// Writes `corpus.jsonl` (raw text records), `labels.csv` (topics) and
/// `sublabels.csv` (subtopics) into `dir`.
void write_synthetic_corpus(const SyntheticCorpus& data, const std::filesystem::path& dir);

}  // namespace topicgraph
