// Command-line front end: one verb per pipeline stage, `run` for all of them,
// `compare` for partition files and `make-fixture` for the synthetic corpus.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "topicgraph/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline config (JSON)")->required();
  cmd->add_option("--seed", f.seed, "Override the config seed");
  cmd->add_option("--out", f.out, "Override the output directory");
  cmd->add_option("--jobs", f.jobs, "Worker threads for the scan")->check(CLI::PositiveNumber);
}

topicgraph::PipelineConfig resolve(const CommonFlags& f) {
  auto config = topicgraph::load_config(f.config);
  if (f.seed) config.seed = *f.seed;
  if (f.out) config.output_dir = *f.out;
  if (f.jobs) config.jobs = *f.jobs;
  topicgraph::validate_inputs(config);
  return config;
}

int run_stages(const CommonFlags& flags, std::optional<topicgraph::Stage> only) {
  auto config = resolve(flags);
  topicgraph::Pipeline pipeline(std::move(config));
  std::vector<topicgraph::StageRecord> records;
  if (only) {
    try {
      records.push_back(pipeline.run_stage(*only));
    } catch (...) {
      pipeline.write_manifest();
      throw;
    }
    pipeline.write_manifest();
  } else {
    records = pipeline.run_all();
  }
  for (const auto& r : records) {
    std::cerr << to_string(r.stage) << (r.cached ? " (cached)" : "") << ": " << r.seconds << " s\n";
  }
  std::cerr << "artifacts in " << pipeline.out().string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-based multiscale topic extraction"};
  app.set_version_flag("--version", std::string(TOPICGRAPH_VERSION));
  app.require_subcommand(1);

  CommonFlags flags;
  std::optional<topicgraph::Stage> selected;
  bool run_all = false;
  for (auto stage : topicgraph::kAllStages) {
    auto* cmd = app.add_subcommand(std::string(to_string(stage)), "Run the " + std::string(to_string(stage)) + " stage");
    add_common(cmd, flags);
    cmd->callback([&selected, stage] { selected = stage; });
  }
  auto* run = app.add_subcommand("run", "Run every stage in order");
  add_common(run, flags);
  run->callback([&run_all] { run_all = true; });

  std::vector<std::string> compare_files;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "Pairwise NMI, ARI and VI between partition CSV files");
  compare->add_option("files", compare_files, "Partition CSV files (doc_id,cluster)")->required()->expected(2, -1);
  compare->add_option("--out", compare_out, "Write the table here instead of stdout");

  std::string fixture_dir;
  std::uint64_t fixture_seed = 0;
  std::size_t fixture_docs = 200;
  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic corpus with planted topics and its labels");
  fixture->add_option("--out", fixture_dir, "Target directory")->required();
  fixture->add_option("--seed", fixture_seed, "Generator seed");
  fixture->add_option("--docs", fixture_docs, "Number of documents")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (selected || run_all) return run_stages(flags, run_all ? std::nullopt : selected);
    if (compare->parsed()) {
      std::vector<std::filesystem::path> paths(compare_files.begin(), compare_files.end());
      const auto table = topicgraph::compare_partitions(paths);
      if (compare_out.empty()) {
        std::cout << topicgraph::comparison_csv(table);
      } else {
        topicgraph::save_comparison_csv(table, compare_out);
      }
      return 0;
    }
    if (fixture->parsed()) {
      topicgraph::SyntheticCorpusOptions opts;
      opts.n_docs = fixture_docs;
      topicgraph::write_synthetic_corpus(topicgraph::synthetic_corpus(fixture_seed, opts), fixture_dir);
      return 0;
    }
  } catch (const topicgraph::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
