#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace topicgraph {

/// Hard assignment of N items to C clusters.
///
/// Labels are always stored in canonical form: clusters are numbered
/// 0..C-1 in order of first appearance, so two partitions that differ only
/// by a relabeling compare equal.
class Partition {
 public:
  Partition() = default;

  /// Accepts arbitrary integer labels and canonicalizes them.
  explicit Partition(std::span<const int> labels);
  explicit Partition(const std::vector<int>& labels)
      : Partition(std::span<const int>(labels)) {}

  static Partition singletons(std::size_t n);
  static Partition all_in_one(std::size_t n);

  std::size_t size() const { return assignment_.size(); }
  std::size_t n_clusters() const { return n_clusters_; }
  const std::vector<int>& assignment() const { return assignment_; }
  int operator[](std::size_t i) const { return assignment_[i]; }

  std::vector<std::size_t> cluster_sizes() const;
  /// Member indices per cluster, each list increasing.
  std::vector<std::vector<std::size_t>> members() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<int> assignment_;
  std::size_t n_clusters_ = 0;
};

/// Sparse contingency table between two partitions of the same items.
struct ContingencyTable {
  struct Cell {
    int row;
    int col;
    std::int64_t count;
  };
  std::int64_t n = 0;
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::vector<Cell> cells;  // nonzero cells, sorted by (row, col)
};

/// Throws InputError when the partitions have different lengths.
ContingencyTable contingency(const Partition& a, const Partition& b);

/// Shannon entropy in nats.
double entropy(const Partition& p);
double mutual_information(const ContingencyTable& table);

/// VI = H(a) + H(b) - 2 I(a,b) in nats.
double variation_of_information(const Partition& a, const Partition& b);

struct LabeledPartition {
  std::vector<std::string> ids;
  Partition partition;
};

/// `doc_id,cluster` with a header row.
void save_partition_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                        const Partition& partition);
LabeledPartition load_partition_csv(const std::filesystem::path& path);

}  // namespace topicgraph
