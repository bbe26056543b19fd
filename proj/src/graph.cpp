#include "topicgraph/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

#include "topicgraph/common.hpp"

namespace topicgraph {

SimilarityGraph::SimilarityGraph(std::size_t n_nodes, std::vector<Edge> edges)
    : n_nodes_(n_nodes), edges_(std::move(edges)), degree_(n_nodes, 0.0) {
  for (auto& e : edges_) {
    if (e.i == e.j) throw InputError("self-loop on node " + std::to_string(e.i));
    if (e.i > e.j) std::swap(e.i, e.j);
    if (e.j >= n_nodes_) throw InputError("edge endpoint " + std::to_string(e.j) + " out of range");
    if (!std::isfinite(e.weight) || e.weight <= 0.0) {
      throw InputError("edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ") has non-positive weight");
    }
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  for (std::size_t k = 1; k < edges_.size(); ++k) {
    if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
      throw InputError("duplicate edge (" + std::to_string(edges_[k].i) + "," + std::to_string(edges_[k].j) + ")");
    }
  }
  for (const auto& e : edges_) {
    degree_[e.i] += e.weight;
    degree_[e.j] += e.weight;
  }
  total_weight_ = std::accumulate(degree_.begin(), degree_.end(), 0.0);
}

bool SimilarityGraph::is_connected() const {
  if (n_nodes_ <= 1) return true;
  std::vector<std::size_t> parent(n_nodes_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n_nodes_;
  for (const auto& e : edges_) {
    auto a = find(e.i), b = find(e.j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

std::vector<NodePair> SimilarityGraph::edge_pairs() const {
  std::vector<NodePair> out;
  out.reserve(edges_.size());
  for (const auto& e : edges_) out.emplace_back(e.i, e.j);
  return out;
}

Eigen::MatrixXd cosine_similarity(const EmbeddingMatrix& m) {
  const auto n = static_cast<Eigen::Index>(m.rows());
  const Eigen::VectorXd norms = m.row_norms();
  Eigen::VectorXd inv(n);
  for (Eigen::Index i = 0; i < n; ++i) inv(i) = norms(i) > 0.0 ? 1.0 / norms(i) : 0.0;

  Eigen::MatrixXd s(n, n);
  if (m.is_sparse()) {
    const SparseRows x = inv.asDiagonal() * m.sparse();
    constexpr Eigen::Index kBlock = 512;
    for (Eigen::Index b = 0; b < n; b += kBlock) {
      const Eigen::Index len = std::min(kBlock, n - b);
      const SparseRows block = x.middleRows(b, len);
      s.middleRows(b, len) = Eigen::MatrixXd(block * x.transpose());
    }
  } else {
    const Eigen::MatrixXd x = inv.asDiagonal() * m.dense();
    s.noalias() = x * x.transpose();
  }
  // Exact symmetry and the fixed diagonal.
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::clamp(s(i, j), -1.0, 1.0);
      s(i, j) = v;
      s(j, i) = v;
    }
  }
  return s;
}

std::vector<NodePair> minimum_spanning_tree(const Eigen::MatrixXd& similarities) {
  const auto n = static_cast<std::size_t>(similarities.rows());
  if (n < 2) throw InputError("minimum spanning tree needs at least two nodes");

  // Dense Prim. With the key (distance, i, j) all edge keys are distinct, so
  // the MST is unique and equals the one Kruskal finds under the same order.
  using Key = std::tuple<double, std::size_t, std::size_t>;
  const Key infinite{std::numeric_limits<double>::infinity(), n, n};
  std::vector<Key> best(n, infinite);
  std::vector<std::size_t> via(n, n);
  std::vector<bool> in_tree(n, false);
  std::vector<NodePair> tree;
  tree.reserve(n - 1);

  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double dist = 1.0 - similarities(static_cast<Eigen::Index>(current), static_cast<Eigen::Index>(v));
      const Key key{dist, std::min(current, v), std::max(current, v)};
      if (key < best[v]) {
        best[v] = key;
        via[v] = current;
      }
    }
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (!in_tree[v] && (next == n || best[v] < best[next])) next = v;
    }
    in_tree[next] = true;
    tree.emplace_back(std::min(next, via[next]), std::max(next, via[next]));
    current = next;
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

std::vector<NodePair> knn_edges(const Eigen::MatrixXd& similarities, std::size_t k) {
  const auto n = static_cast<std::size_t>(similarities.rows());
  if (k < 1 || k + 1 > n) throw InputError("knn: k must lie in [1, N-1]");
  std::vector<NodePair> edges;
  edges.reserve(n * k);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    const auto row = static_cast<Eigen::Index>(i);
    auto closer = [&](std::size_t a, std::size_t b) {
      const double sa = similarities(row, static_cast<Eigen::Index>(a));
      const double sb = similarities(row, static_cast<Eigen::Index>(b));
      return sa > sb || (sa == sb && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), closer);
    for (std::size_t r = 0; r < k; ++r) edges.emplace_back(std::min(i, order[r]), std::max(i, order[r]));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

SimilarityGraph mst_knn(const Eigen::MatrixXd& similarities, std::size_t k, double weight_floor) {
  if (!(weight_floor > 0.0)) throw InputError("weight floor must be positive");
  const auto n = static_cast<std::size_t>(similarities.rows());
  if (k < 1) throw InputError("mst_knn: k must be at least 1");
  auto pairs = minimum_spanning_tree(similarities);
  auto knn = knn_edges(similarities, std::min(k, n - 1));
  pairs.insert(pairs.end(), knn.begin(), knn.end());
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    const double s = similarities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    edges.push_back({i, j, std::max(s, weight_floor)});
  }
  return SimilarityGraph(n, std::move(edges));
}

SimilarityGraph mst_knn(const EmbeddingMatrix& m, std::size_t k, double weight_floor) {
  return mst_knn(cosine_similarity(m), k, weight_floor);
}

void save_graph(const SimilarityGraph& g, const std::filesystem::path& path) {
  std::string out = "#nodes=" + std::to_string(g.n_nodes()) + "\n";
  for (const auto& e : g.edges()) {
    out += std::to_string(e.i) + '\t' + std::to_string(e.j) + '\t' + format_double(e.weight) + '\n';
  }
  write_file_atomic(path, out);
}

SimilarityGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> nodes;
  std::vector<Edge> edges;
  const auto fail = [&](std::string_view what) {
    throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": " + std::string(what));
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#nodes=", 0) == 0) {
      std::size_t value = 0;
      auto [p, ec] = std::from_chars(line.data() + 7, line.data() + line.size(), value);
      if (ec != std::errc{} || p != line.data() + line.size()) fail("malformed #nodes header");
      nodes = value;
      continue;
    }
    if (line[0] == '#') continue;
    Edge e;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto r1 = std::from_chars(p, end, e.i);
    if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != '\t') fail("malformed edge line");
    auto r2 = std::from_chars(r1.ptr + 1, end, e.j);
    if (r2.ec != std::errc{} || r2.ptr == end || *r2.ptr != '\t') fail("malformed edge line");
    auto r3 = std::from_chars(r2.ptr + 1, end, e.weight);
    if (r3.ec != std::errc{} || r3.ptr != end) fail("malformed edge weight");
    edges.push_back(e);
  }
  if (!nodes) throw InputError(path.filename().string() + ": missing #nodes header");
  return SimilarityGraph(*nodes, std::move(edges));
}

}  // namespace topicgraph
