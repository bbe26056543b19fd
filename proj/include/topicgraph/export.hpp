#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "topicgraph/corpus.hpp"
#include "topicgraph/partition.hpp"

namespace topicgraph {

struct SankeyLevel {
  std::string name;
  std::vector<std::size_t> cluster_sizes;  // indexed by cluster id

  friend bool operator==(const SankeyLevel&, const SankeyLevel&) = default;
};

struct SankeyFlow {
  std::size_t from_level = 0;
  std::size_t from_cluster = 0;
  std::size_t to_level = 0;
  std::size_t to_cluster = 0;
  std::size_t count = 0;

  friend bool operator==(const SankeyFlow&, const SankeyFlow&) = default;
};

struct SankeyData {
  std::vector<SankeyLevel> levels;
  std::vector<SankeyFlow> flows;  // nonzero contingency cells of consecutive levels

  friend bool operator==(const SankeyData&, const SankeyData&) = default;
};

using NamedPartition = std::pair<std::string, Partition>;

SankeyData build_sankey(const std::vector<NamedPartition>& levels);
/// Builds the flows and writes them as JSON.
SankeyData export_sankey(const std::vector<NamedPartition>& levels, const std::filesystem::path& path);
SankeyData load_sankey(const std::filesystem::path& path);

struct WordcloudCluster {
  std::size_t id = 0;
  std::vector<std::pair<std::string, std::size_t>> words;  // descending weight

  friend bool operator==(const WordcloudCluster&, const WordcloudCluster&) = default;
};

struct WordcloudData {
  std::vector<WordcloudCluster> clusters;

  friend bool operator==(const WordcloudData&, const WordcloudData&) = default;
};

inline constexpr std::size_t kDefaultWordcloudWords = 50;

WordcloudData build_wordclouds(const Corpus& corpus, const Partition& partition,
                               std::size_t n_words = kDefaultWordcloudWords);
WordcloudData export_wordclouds(const Corpus& corpus, const Partition& partition, const std::filesystem::path& path,
                                std::size_t n_words = kDefaultWordcloudWords);
WordcloudData load_wordclouds(const std::filesystem::path& path);

}  // namespace topicgraph
