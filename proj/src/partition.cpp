#include "topicgraph/partition.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "topicgraph/common.hpp"

namespace topicgraph {

Partition::Partition(std::span<const int> labels) {
  assignment_.resize(labels.size());
  std::unordered_map<int, int> remap;
  remap.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    assignment_[i] = it->second;
  }
  n_clusters_ = remap.size();
}

Partition Partition::singletons(std::size_t n) {
  Partition p;
  p.assignment_.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.assignment_[i] = static_cast<int>(i);
  p.n_clusters_ = n;
  return p;
}

Partition Partition::all_in_one(std::size_t n) {
  Partition p;
  p.assignment_.assign(n, 0);
  p.n_clusters_ = n > 0 ? 1 : 0;
  return p;
}

std::vector<std::size_t> Partition::cluster_sizes() const {
  std::vector<std::size_t> sizes(n_clusters_, 0);
  for (int c : assignment_) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

std::vector<std::vector<std::size_t>> Partition::members() const {
  std::vector<std::vector<std::size_t>> out(n_clusters_);
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    out[static_cast<std::size_t>(assignment_[i])].push_back(i);
  }
  return out;
}

ContingencyTable contingency(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) {
    throw InputError("partition length mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  ContingencyTable table;
  table.n = static_cast<std::int64_t>(a.size());
  table.row_sums.assign(a.n_clusters(), 0);
  table.col_sums.assign(b.n_clusters(), 0);
  const auto rows = a.n_clusters();
  const auto cols = b.n_clusters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++table.row_sums[static_cast<std::size_t>(a[i])];
    ++table.col_sums[static_cast<std::size_t>(b[i])];
  }

  if (rows * cols <= 4 * a.size() + 64) {
    std::vector<std::int64_t> dense(rows * cols, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
      ++dense[static_cast<std::size_t>(a[i]) * cols + static_cast<std::size_t>(b[i])];
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (auto count = dense[r * cols + c]; count > 0) {
          table.cells.push_back({static_cast<int>(r), static_cast<int>(c), count});
        }
      }
    }
    return table;
  }

  std::vector<std::uint64_t> keys(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    keys[i] = (static_cast<std::uint64_t>(a[i]) << 32) | static_cast<std::uint32_t>(b[i]);
  }
  std::sort(keys.begin(), keys.end());
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    table.cells.push_back({static_cast<int>(keys[i] >> 32),
                           static_cast<int>(keys[i] & 0xffffffffULL),
                           static_cast<std::int64_t>(j - i)});
    i = j;
  }
  return table;
}

namespace {

double entropy_of_counts(const std::vector<std::int64_t>& counts, std::int64_t n) {
  if (n == 0) return 0.0;
  const double total = static_cast<double>(n);
  double h = 0.0;
  for (auto c : counts) {
    if (c > 0) {
      const double p = static_cast<double>(c) / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

}  // namespace

double entropy(const Partition& p) {
  std::vector<std::int64_t> counts;
  for (auto s : p.cluster_sizes()) counts.push_back(static_cast<std::int64_t>(s));
  return entropy_of_counts(counts, static_cast<std::int64_t>(p.size()));
}

double mutual_information(const ContingencyTable& table) {
  if (table.n == 0) return 0.0;
  const double n = static_cast<double>(table.n);
  double mi = 0.0;
  for (const auto& cell : table.cells) {
    const double nij = static_cast<double>(cell.count);
    const double ai = static_cast<double>(table.row_sums[static_cast<std::size_t>(cell.row)]);
    const double bj = static_cast<double>(table.col_sums[static_cast<std::size_t>(cell.col)]);
    mi += (nij / n) * std::log(nij * n / (ai * bj));
  }
  return std::max(mi, 0.0);
}

double variation_of_information(const Partition& a, const Partition& b) {
  const auto table = contingency(a, b);
  if (table.n == 0) return 0.0;
  // VI = 2 H(a,b) - H(a) - H(b), evaluated cell-wise for accuracy near zero.
  const double n = static_cast<double>(table.n);
  double vi = 0.0;
  for (const auto& cell : table.cells) {
    const double nij = static_cast<double>(cell.count);
    const double ai = static_cast<double>(table.row_sums[static_cast<std::size_t>(cell.row)]);
    const double bj = static_cast<double>(table.col_sums[static_cast<std::size_t>(cell.col)]);
    vi -= (nij / n) * (std::log(nij / ai) + std::log(nij / bj));
  }
  return std::max(vi, 0.0);
}

void save_partition_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                        const Partition& partition) {
  if (ids.size() != partition.size()) throw InputError("partition and id list differ in length");
  std::string out = "doc_id,cluster\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out += ids[i];
    out += ',';
    out += std::to_string(partition[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

LabeledPartition load_partition_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open partition file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  LabeledPartition out;
  std::vector<int> labels;
  const auto fail = [&](std::string_view what) {
    throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": " + std::string(what));
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "doc_id,cluster") fail("expected header 'doc_id,cluster'");
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0) fail("malformed row");
    int label = 0;
    auto [p, ec] = std::from_chars(line.data() + comma + 1, line.data() + line.size(), label);
    if (ec != std::errc{} || p != line.data() + line.size()) fail("malformed cluster label");
    out.ids.push_back(line.substr(0, comma));
    labels.push_back(label);
  }
  out.partition = Partition(labels);
  return out;
}

}  // namespace topicgraph
