#include "topicgraph/export.hpp"

#include <json.hpp>

#include "topicgraph/common.hpp"
#include "topicgraph/eval.hpp"

namespace topicgraph {

using nlohmann::json;

namespace {

json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

SankeyData build_sankey(const std::vector<NamedPartition>& levels) {
  SankeyData out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& p = levels[l].second;
    if (l > 0 && p.size() != levels[0].second.size()) {
      throw InputError("sankey level '" + levels[l].first + "' has " + std::to_string(p.size()) +
                       " items, expected " + std::to_string(levels[0].second.size()));
    }
    out.levels.push_back({levels[l].first, p.cluster_sizes()});
    if (l == 0) continue;
    for (const auto& cell : contingency(levels[l - 1].second, p).cells) {
      out.flows.push_back({l - 1, static_cast<std::size_t>(cell.row), l, static_cast<std::size_t>(cell.col),
                           static_cast<std::size_t>(cell.count)});
    }
  }
  return out;
}

SankeyData export_sankey(const std::vector<NamedPartition>& levels, const std::filesystem::path& path) {
  auto data = build_sankey(levels);
  json j;
  j["levels"] = json::array();
  for (const auto& level : data.levels) {
    json clusters = json::array();
    for (std::size_t c = 0; c < level.cluster_sizes.size(); ++c) {
      clusters.push_back({{"id", c}, {"size", level.cluster_sizes[c]}});
    }
    j["levels"].push_back({{"name", level.name}, {"clusters", clusters}});
  }
  j["flows"] = json::array();
  for (const auto& f : data.flows) {
    j["flows"].push_back({{"from", {f.from_level, f.from_cluster}},
                          {"to", {f.to_level, f.to_cluster}},
                          {"count", f.count}});
  }
  write_file_atomic(path, j.dump(1) + "\n");
  return data;
}

SankeyData load_sankey(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  SankeyData out;
  try {
    for (const auto& level : j.at("levels")) {
      SankeyLevel l;
      l.name = level.at("name").get<std::string>();
      for (const auto& c : level.at("clusters")) {
        const auto id = c.at("id").get<std::size_t>();
        if (id != l.cluster_sizes.size()) throw InputError(path.string() + ": cluster ids must be 0..C-1 in order");
        l.cluster_sizes.push_back(c.at("size").get<std::size_t>());
      }
      out.levels.push_back(std::move(l));
    }
    for (const auto& f : j.at("flows")) {
      const auto& from = f.at("from");
      const auto& to = f.at("to");
      out.flows.push_back({from.at(0).get<std::size_t>(), from.at(1).get<std::size_t>(), to.at(0).get<std::size_t>(),
                           to.at(1).get<std::size_t>(), f.at("count").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return out;
}

WordcloudData build_wordclouds(const Corpus& corpus, const Partition& partition, std::size_t n_words) {
  WordcloudData out;
  const auto counts = cluster_word_counts(corpus, partition);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    WordcloudCluster wc{c, {}};
    if (counts[c].empty()) warn("wordcloud: cluster " + std::to_string(c) + " has no tokens");
    for (std::size_t k = 0; k < counts[c].size() && (n_words == 0 || k < n_words); ++k) {
      wc.words.emplace_back(counts[c][k].word, counts[c][k].count);
    }
    out.clusters.push_back(std::move(wc));
  }
  return out;
}

WordcloudData export_wordclouds(const Corpus& corpus, const Partition& partition, const std::filesystem::path& path,
                                std::size_t n_words) {
  auto data = build_wordclouds(corpus, partition, n_words);
  json j;
  j["clusters"] = json::array();
  for (const auto& c : data.clusters) {
    json words = json::array();
    for (const auto& [w, n] : c.words) words.push_back({w, n});
    j["clusters"].push_back({{"id", c.id}, {"words", words}});
  }
  write_file_atomic(path, j.dump(1) + "\n");
  return data;
}

WordcloudData load_wordclouds(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  WordcloudData out;
  try {
    for (const auto& c : j.at("clusters")) {
      WordcloudCluster wc;
      wc.id = c.at("id").get<std::size_t>();
      for (const auto& w : c.at("words")) wc.words.emplace_back(w.at(0).get<std::string>(), w.at(1).get<std::size_t>());
      out.clusters.push_back(std::move(wc));
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace topicgraph
