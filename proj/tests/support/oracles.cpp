#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>

namespace oracle {

std::vector<std::vector<int>> all_set_partitions(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> rgs(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int max_label) {
    if (i == n) {
      out.push_back(rgs);
      return;
    }
    for (int c = 0; c <= max_label + 1; ++c) {
      rgs[i] = c;
      rec(i + 1, std::max(max_label, c));
    }
  };
  if (n == 0) return {{}};
  rgs[0] = 0;
  rec(1, 0);
  return out;
}

Eigen::MatrixXd adjacency(const topicgraph::SimilarityGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.n_nodes());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : g.edges()) {
    a(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = e.weight;
    a(static_cast<Eigen::Index>(e.j), static_cast<Eigen::Index>(e.i)) = e.weight;
  }
  return a;
}

Eigen::MatrixXd exp_transition(const Eigen::MatrixXd& a, double t) {
  const Eigen::VectorXd d = a.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = d.array().rsqrt();
  const Eigen::VectorXd sqrt_d = d.array().sqrt();
  const Eigen::MatrixXd s = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::VectorXd f = (-t * (1.0 - eig.eigenvalues().array())).exp();
  const Eigen::MatrixXd e = eig.eigenvectors() * f.asDiagonal() * eig.eigenvectors().transpose();
  return inv_sqrt.asDiagonal() * e * sqrt_d.asDiagonal();
}

double stability(const Eigen::MatrixXd& a, const std::vector<int>& labels, double t, bool exponential) {
  const auto n = a.rows();
  const Eigen::VectorXd d = a.rowwise().sum();
  const double two_m = d.sum();
  const Eigen::VectorXd pi = d / two_m;
  Eigen::MatrixXd mt;
  if (exponential) {
    mt = exp_transition(a, t);
  } else {
    const Eigen::MatrixXd m = d.cwiseInverse().asDiagonal() * a;
    mt = (1.0 - t) * Eigen::MatrixXd::Identity(n, n) + t * m;
  }
  const Eigen::MatrixXd b = pi.asDiagonal() * mt - pi * pi.transpose();
  const int c = *std::max_element(labels.begin(), labels.end()) + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, c);
  for (Eigen::Index i = 0; i < n; ++i) h(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  return (h.transpose() * b * h).trace();
}

double best_stability(const Eigen::MatrixXd& a, double t, bool exponential) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& p : all_set_partitions(static_cast<std::size_t>(a.rows()))) {
    best = std::max(best, stability(a, p, t, exponential));
  }
  return best;
}

namespace {

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t v) { return parent[v] == v ? v : parent[v] = find(parent[v]); }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

EdgeSet kruskal_mst(const Eigen::MatrixXd& s) {
  const auto n = static_cast<std::size_t>(s.rows());
  struct E {
    double d;
    std::size_t i, j;
  };
  std::vector<E> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      edges.push_back({1.0 - s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), i, j});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const E& a, const E& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  UnionFind uf(n);
  EdgeSet out;
  for (const auto& e : edges) {
    if (uf.unite(e.i, e.j)) out.insert({e.i, e.j});
  }
  return out;
}

double min_spanning_tree_weight(const Eigen::MatrixXd& s) {
  const auto n = static_cast<std::size_t>(s.rows());
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  }
  double best = std::numeric_limits<double>::infinity();
  // Choose n-1 of the edges via a bitmask walk.
  const std::size_t m = all.size();
  std::vector<bool> pick(m, false);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(n - 1), pick.end(), true);
  do {
    UnionFind uf(n);
    bool tree = true;
    double w = 0.0;
    for (std::size_t e = 0; e < m && tree; ++e) {
      if (!pick[e]) continue;
      tree = uf.unite(all[e].first, all[e].second);
      w += 1.0 - s(static_cast<Eigen::Index>(all[e].first), static_cast<Eigen::Index>(all[e].second));
    }
    if (tree) best = std::min(best, w);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

EdgeSet knn(const Eigen::MatrixXd& s, std::size_t k) {
  const auto n = static_cast<std::size_t>(s.rows());
  EdgeSet out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      const double sa = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      const double sb = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
      return sa != sb ? sa > sb : a < b;
    });
    for (std::size_t r = 0; r < std::min(k, others.size()); ++r) {
      out.insert({std::min(i, others[r]), std::max(i, others[r])});
    }
  }
  return out;
}

Eigen::MatrixXd cosine(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double ni = x.row(i).norm();
      const double nj = x.row(j).norm();
      if (i == j) {
        s(i, j) = 1.0;
      } else if (ni == 0.0 || nj == 0.0) {
        s(i, j) = 0.0;
      } else {
        s(i, j) = std::clamp(x.row(i).dot(x.row(j)) / (ni * nj), -1.0, 1.0);
      }
    }
  }
  return s;
}

Scores partition_scores(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size();
  std::map<int, double> pa, pb;
  std::map<std::pair<int, int>, double> pab;
  for (std::size_t i = 0; i < n; ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    pab[{a[i], b[i]}] += 1.0;
  }
  for (auto* m : {&pa, &pb}) {
    for (auto& [k, p] : *m) p /= static_cast<double>(n);
  }
  for (auto& [k, p] : pab) p /= static_cast<double>(n);
  double ha = 0.0, hb = 0.0, mi = 0.0;
  for (const auto& [k, p] : pa) ha -= p * std::log(p);
  for (const auto& [k, p] : pb) hb -= p * std::log(p);
  for (const auto& [k, p] : pab) mi += p * std::log(p / (pa[k.first] * pb[k.second]));
  Scores s;
  s.vi = ha + hb - 2.0 * mi;
  s.nmi = (ha + hb == 0.0) ? 1.0 : 2.0 * mi / (ha + hb);

  // Pair counting: same-same, same-in-a-only, same-in-b-only.
  double both = 0.0, only_a = 0.0, only_b = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      both += (sa && sb) ? 1.0 : 0.0;
      only_a += (sa && !sb) ? 1.0 : 0.0;
      only_b += (!sa && sb) ? 1.0 : 0.0;
      pairs += 1.0;
    }
  }
  const double same_a = both + only_a;
  const double same_b = both + only_b;
  const double expected = pairs > 0.0 ? same_a * same_b / pairs : 0.0;
  const double max_index = 0.5 * (same_a + same_b);
  s.ari = (max_index == expected) ? 1.0 : (both - expected) / (max_index - expected);
  return s;
}

std::vector<int> random_labels(std::size_t n, std::size_t max_clusters, std::mt19937_64& rng) {
  const std::size_t c = 1 + rng() % max_clusters;
  std::vector<int> labels(n);
  for (auto& l : labels) l = static_cast<int>(rng() % c);
  return labels;
}

topicgraph::SimilarityGraph random_connected_graph(std::size_t n, double extra_edge_prob, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.1, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<topicgraph::Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    const std::size_t u = rng() % v;
    seen.insert({u, v});
    edges.push_back({u, v, weight(rng)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!seen.contains({i, j}) && unit(rng) < extra_edge_prob) edges.push_back({i, j, weight(rng)});
    }
  }
  return topicgraph::SimilarityGraph(n, std::move(edges));
}

namespace {

// Bernoulli(p) over the ordered pair list (i < j) via geometric skips.
template <class Visit>
void sample_pairs(std::size_t n, double p, std::mt19937_64& rng, Visit&& visit) {
  if (p <= 0.0) return;
  if (p >= 1.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) visit(i, j);
    }
    return;
  }
  std::geometric_distribution<std::uint64_t> skip(p);
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t idx = skip(rng);
  // Map a linear index to (i, j) by walking rows.
  std::size_t i = 0;
  std::uint64_t row_start = 0;
  while (idx < total) {
    while (idx >= row_start + (n - 1 - i)) {
      row_start += n - 1 - i;
      ++i;
    }
    visit(i, i + 1 + static_cast<std::size_t>(idx - row_start));
    idx += 1 + skip(rng);
  }
}

topicgraph::SimilarityGraph connect(std::size_t n, std::vector<topicgraph::Edge> edges) {
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
    return parent[v] == v ? v : parent[v] = find(parent[v]);
  };
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    parent[find(e.i)] = find(e.j);
    seen.insert({std::min(e.i, e.j), std::max(e.i, e.j)});
  }
  for (std::size_t v = 1; v < n; ++v) {
    if (find(v) != find(0)) {
      edges.push_back({0, v, 1.0});
      parent[find(v)] = find(0);
    }
  }
  return topicgraph::SimilarityGraph(n, std::move(edges));
}

}  // namespace

topicgraph::SimilarityGraph sbm(const std::vector<int>& blocks, double p_in, double p_out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = blocks.size();
  std::vector<topicgraph::Edge> edges;
  // Sample with the larger probability, then thin the cross-block pairs.
  const double p_max = std::max(p_in, p_out);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  sample_pairs(n, p_max, rng, [&](std::size_t i, std::size_t j) {
    const double p = blocks[i] == blocks[j] ? p_in : p_out;
    if (p == p_max || unit(rng) < p / p_max) edges.push_back({i, j, 1.0});
  });
  return connect(n, std::move(edges));
}

Hierarchy planted_hierarchy(std::size_t leaf_size, std::size_t leaves_per_group, std::size_t groups, double p_leaf,
                            double p_group, double p_out, std::uint64_t seed) {
  Hierarchy h;
  const std::size_t n = leaf_size * leaves_per_group * groups;
  for (std::size_t v = 0; v < n; ++v) {
    h.leaf.push_back(static_cast<int>(v / leaf_size));
    h.group.push_back(static_cast<int>(v / (leaf_size * leaves_per_group)));
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<topicgraph::Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = h.leaf[i] == h.leaf[j] ? p_leaf : (h.group[i] == h.group[j] ? p_group : p_out);
      if (unit(rng) < p) edges.push_back({i, j, 1.0});
    }
  }
  h.graph = connect(n, std::move(edges));
  return h;
}

}  // namespace oracle
