#include "topicgraph/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "topicgraph/common.hpp"

namespace topicgraph {
namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& x, std::size_t k, std::mt19937_64& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(k), x.cols());
  std::vector<bool> chosen(n, false);
  std::size_t first = rng() % n;
  chosen[first] = true;
  centroids.row(0) = x.row(static_cast<Eigen::Index>(first));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (x.row(static_cast<Eigen::Index>(i)) - centroids.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // Every point coincides with a centroid: take any unused point.
      std::vector<std::size_t> free;
      for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) free.push_back(i);
      }
      pick = free[rng() % free.size()];
    }
    chosen[pick] = true;
    centroids.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centroids;
}

double assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centroids, std::vector<int>& labels,
              std::vector<double>& cost) {
  const auto n = x.rows();
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    const double d = (centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    cost[static_cast<std::size_t>(i)] = d;
    inertia += d;
  }
  return inertia;
}

KMeansResult lloyd(const Eigen::MatrixXd& x, std::size_t k, std::mt19937_64& rng, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  KMeansResult result;
  Eigen::MatrixXd centroids = kmeans_plus_plus(x, k, rng);
  std::vector<int> labels(n);
  std::vector<double> cost(n);

  for (std::size_t iter = 0;; ++iter) {
    const double inertia = assign(x, centroids, labels, cost);
    if (!result.inertia_history.empty()) {
      const double prev = result.inertia_history.back();
      if (inertia > prev + 1e-9 * std::max(1.0, prev)) throw std::logic_error("kmeans: inertia increased");
    }
    result.inertia_history.push_back(inertia);
    result.iterations = iter;
    if (iter >= options.max_iter) break;

    Eigen::MatrixXd updated = Eigen::MatrixXd::Zero(centroids.rows(), centroids.cols());
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      updated.row(labels[i]) += x.row(static_cast<Eigen::Index>(i));
      ++sizes[static_cast<std::size_t>(labels[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Refill from the point that currently pays the most, taken from a cluster that can spare it.
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (sizes[static_cast<std::size_t>(labels[i])] > 1 && (far == n || cost[i] > cost[far])) far = i;
        }
        const auto old = static_cast<std::size_t>(labels[far]);
        updated.row(static_cast<Eigen::Index>(old)) -= x.row(static_cast<Eigen::Index>(far));
        --sizes[old];
        labels[far] = static_cast<int>(c);
        cost[far] = 0.0;
        updated.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
        sizes[c] = 1;
      }
    }
    for (std::size_t c = 0; c < k; ++c) updated.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(sizes[c]);
    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    if (shift < options.tol) {
      const double final_inertia = assign(x, centroids, labels, cost);
      if (final_inertia > result.inertia_history.back() + 1e-9 * std::max(1.0, result.inertia_history.back())) {
        throw std::logic_error("kmeans: inertia increased");
      }
      result.inertia_history.push_back(final_inertia);
      result.iterations = iter + 1;
      break;
    }
  }

  // Every cluster owns a point here, so relabeling is a permutation.
  result.partition = Partition(labels);
  result.centroids.resize(centroids.rows(), centroids.cols());
  std::vector<bool> placed(k, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto canonical = static_cast<std::size_t>(result.partition[i]);
    if (!placed[canonical]) {
      result.centroids.row(static_cast<Eigen::Index>(canonical)) = centroids.row(labels[i]);
      placed[canonical] = true;
    }
  }
  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    result.inertia += (x.row(static_cast<Eigen::Index>(i)) -
                       result.centroids.row(static_cast<Eigen::Index>(result.partition[i])))
                          .squaredNorm();
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1 || k > n) throw InputError("kmeans: k must lie in [1, N] (k=" + std::to_string(k) + ", N=" +
                                       std::to_string(n) + ")");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  for (std::size_t run = 0; run < std::max<std::size_t>(1, options.n_init); ++run) {
    KMeansResult candidate = lloyd(x, k, rng, options);
    if (run == 0 || candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

KMeansResult kmeans(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
  return kmeans(m.to_dense(), k, seed, options);
}

Dendrogram::Dendrogram(std::size_t n_leaves, std::vector<Merge> merges)
    : n_leaves_(n_leaves), merges_(std::move(merges)) {
  if (n_leaves_ > 0 && merges_.size() != n_leaves_ - 1) throw InputError("dendrogram needs N-1 merges");
}

Partition Dendrogram::cut(std::size_t k) const {
  if (k < 1 || k > n_leaves_) throw InputError("dendrogram cut: k must lie in [1, N]");
  std::vector<std::size_t> parent(2 * n_leaves_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t s = 0; s < n_leaves_ - k; ++s) {
    const auto created = n_leaves_ + s;
    parent[find(merges_[s].a)] = created;
    parent[find(merges_[s].b)] = created;
  }
  std::vector<int> labels(n_leaves_);
  for (std::size_t i = 0; i < n_leaves_; ++i) labels[i] = static_cast<int>(find(i));
  return Partition(labels);
}

Dendrogram ward_linkage(const Eigen::MatrixXd& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw InputError("ward: empty input");
  if (n == 1) return Dendrogram(1, {});

  // Condensed squared distances; under the Lance-Williams recurrence the
  // entries become 2 n_a n_b / (n_a + n_b) |c_a - c_b|^2.
  auto index = [n](std::size_t i, std::size_t j) {
    if (i > j) std::swap(i, j);
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  };
  std::vector<double> dist(n * (n - 1) / 2);
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      dist[index(i, j)] = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).squaredNorm();
    }
  }

  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<Merge> found;  // in slot ids: each merge keeps the result in the larger slot
  found.reserve(n - 1);
  std::vector<std::size_t> chain;
  chain.reserve(n);

  for (std::size_t step = 0; step < n - 1; ++step) {
    if (chain.empty()) {
      std::size_t start = 0;
      while (!active[start]) ++start;
      chain.push_back(start);
    }
    std::size_t a = 0, b = 0;
    double best = 0.0;
    while (true) {
      a = chain.back();
      // Ties keep the previous chain element, then prefer the lowest index.
      std::size_t nearest = n;
      best = std::numeric_limits<double>::infinity();
      if (chain.size() >= 2) {
        nearest = chain[chain.size() - 2];
        best = dist[index(a, nearest)];
      }
      for (std::size_t c = 0; c < n; ++c) {
        if (!active[c] || c == a) continue;
        const double d = dist[index(a, c)];
        if (d < best) {
          best = d;
          nearest = c;
        }
      }
      if (chain.size() >= 2 && nearest == chain[chain.size() - 2]) {
        b = nearest;
        chain.pop_back();
        chain.pop_back();
        break;
      }
      chain.push_back(nearest);
    }
    if (a > b) std::swap(a, b);
    found.push_back({a, b, std::sqrt(std::max(best, 0.0)), size[a] + size[b]});

    // Merge a into b.
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    const double dab = dist[index(a, b)];
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == a || c == b) continue;
      const double nc = static_cast<double>(size[c]);
      const double updated = ((na + nc) * dist[index(a, c)] + (nb + nc) * dist[index(b, c)] - nc * dab) /
                             (na + nb + nc);
      dist[index(b, c)] = updated;
    }
    active[a] = false;
    size[b] += size[a];
  }

  // Order by height (stable, so equal heights keep discovery order) and
  // rename slots to dendrogram cluster ids.
  std::vector<std::size_t> order(found.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return found[l].height < found[r].height; });
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<Merge> merges;
  merges.reserve(found.size());
  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto& m = found[order[s]];
    std::size_t ca = find(m.a);
    std::size_t cb = find(m.b);
    if (ca > cb) std::swap(ca, cb);
    const std::size_t created = n + s;
    parent[ca] = created;
    parent[cb] = created;
    merges.push_back({ca, cb, m.height, m.size});
  }
  return Dendrogram(n, std::move(merges));
}

Partition ward(const Eigen::MatrixXd& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1 || k > n) throw InputError("ward: k must lie in [1, N] (k=" + std::to_string(k) + ", N=" +
                                       std::to_string(n) + ")");
  return ward_linkage(x).cut(k);
}

Partition ward(const EmbeddingMatrix& m, std::size_t k) { return ward(m.to_dense(), k); }

}  // namespace topicgraph
