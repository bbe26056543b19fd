// Louvain on a generalized modularity matrix B = W - m m^T, where W is
// symmetric (stored as off-diagonal adjacency plus a diagonal) and m holds
// node masses. The objective of a partition is
//   Q = sum_c [ sum_{i,j in c} W_ij - (sum_{i in c} m_i)^2 ].
// Aggregating clusters into nodes preserves Q, so the same local-move
// routine runs at every level.

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "topicgraph/markov_stability.hpp"

namespace topicgraph {
namespace {

using Level = MarkovOperator::Flow;

constexpr double kMinImprovement = 1e-12;
constexpr std::size_t kMaxSweeps = 10000;

double objective(const Level& level, const std::vector<int>& labels) {
  const std::size_t n = level.mass.size();
  std::size_t clusters = 0;
  for (int c : labels) clusters = std::max(clusters, static_cast<std::size_t>(c) + 1);
  std::vector<double> internal(clusters, 0.0);
  std::vector<double> mass(clusters, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    mass[c] += level.mass[i];
    internal[c] += level.self[i];
    for (std::size_t e = level.offsets[i]; e < level.offsets[i + 1]; ++e) {
      if (labels[level.targets[e]] == labels[i]) internal[c] += level.weights[e];
    }
  }
  double q = 0.0;
  for (std::size_t c = 0; c < clusters; ++c) q += internal[c] - mass[c] * mass[c];
  return q;
}

class LocalMover {
 public:
  LocalMover(const Level& level, std::mt19937_64& rng, const LouvainOptions& options)
      : level_(level), rng_(rng), options_(options) {}

  // Returns the cluster label per node (not compacted) and whether any node moved.
  bool run(std::vector<int>& labels, std::vector<double>& sweep_objective) {
    const std::size_t n = level_.mass.size();
    labels.resize(n);
    std::vector<double> total(n);
    std::vector<std::size_t> count(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(i);
      total[i] = level_.mass[i];
    }
    std::vector<int> empty_ids;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng_() % i]);

    std::vector<double> link(n, 0.0);
    std::vector<int> touched;
    double current = options_.verify_each_move ? objective(level_, labels) : 0.0;
    bool moved_any = false;

    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
      bool moved = false;
      for (std::size_t i : order) {
        const int from = labels[i];
        const double mi = level_.mass[i];
        touched.clear();
        for (std::size_t e = level_.offsets[i]; e < level_.offsets[i + 1]; ++e) {
          const int c = labels[level_.targets[e]];
          if (link[static_cast<std::size_t>(c)] == 0.0) touched.push_back(c);
          link[static_cast<std::size_t>(c)] += level_.weights[e];
        }
        total[static_cast<std::size_t>(from)] -= mi;
        --count[static_cast<std::size_t>(from)];

        // Gain of joining c relative to standing alone; the objective changes by twice the difference.
        auto gain = [&](int c) { return link[static_cast<std::size_t>(c)] - mi * total[static_cast<std::size_t>(c)]; };
        const double stay = gain(from);
        int best = from;
        double best_gain = stay;
        for (int c : touched) {
          if (c == from) continue;
          const double g = gain(c);
          if (g > best_gain) {
            best_gain = g;
            best = c;
          }
        }
        if (count[static_cast<std::size_t>(from)] > 0 && 0.0 > best_gain) {
          best_gain = 0.0;
          best = -1;  // open a new cluster
        }
        if (2.0 * (best_gain - stay) <= kMinImprovement) best = from;
        if (best == -1) {
          while (count[static_cast<std::size_t>(empty_ids.back())] != 0) empty_ids.pop_back();
          best = empty_ids.back();
          empty_ids.pop_back();
        }

        total[static_cast<std::size_t>(best)] += mi;
        ++count[static_cast<std::size_t>(best)];
        if (count[static_cast<std::size_t>(from)] == 0) empty_ids.push_back(from);
        for (int c : touched) link[static_cast<std::size_t>(c)] = 0.0;

        if (best != from) {
          labels[i] = best;
          moved = true;
          moved_any = true;
          if (options_.verify_each_move) {
            const double next = objective(level_, labels);
            if (next < current - 1e-12 * std::max(1.0, std::abs(current))) {
              throw std::logic_error("louvain: objective decreased after a move");
            }
            current = next;
          }
        }
      }
      sweep_objective.push_back(objective(level_, labels));
      if (!moved) break;
    }
    return moved_any;
  }

 private:
  const Level& level_;
  std::mt19937_64& rng_;
  const LouvainOptions& options_;
};

// Renumbers labels to 0..C-1 by first appearance and returns C.
std::size_t compact(std::vector<int>& labels) {
  std::vector<int> remap(labels.size(), -1);
  int next = 0;
  for (int& c : labels) {
    auto& r = remap[static_cast<std::size_t>(c)];
    if (r < 0) r = next++;
    c = r;
  }
  return static_cast<std::size_t>(next);
}

Level aggregate(const Level& level, const std::vector<int>& labels, std::size_t clusters) {
  Level out;
  out.mass.assign(clusters, 0.0);
  out.self.assign(clusters, 0.0);
  out.offsets.assign(clusters + 1, 0);
  std::vector<std::vector<std::size_t>> members(clusters);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    members[c].push_back(i);
    out.mass[c] += level.mass[i];
    out.self[c] += level.self[i];
  }
  std::vector<double> acc(clusters, 0.0);
  std::vector<std::uint32_t> touched;
  for (std::size_t c = 0; c < clusters; ++c) {
    touched.clear();
    for (std::size_t i : members[c]) {
      for (std::size_t e = level.offsets[i]; e < level.offsets[i + 1]; ++e) {
        const auto d = static_cast<std::size_t>(labels[level.targets[e]]);
        if (d == c) {
          out.self[c] += level.weights[e];
        } else {
          if (acc[d] == 0.0) touched.push_back(static_cast<std::uint32_t>(d));
          acc[d] += level.weights[e];
        }
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto d : touched) {
      out.targets.push_back(d);
      out.weights.push_back(acc[d]);
      acc[d] = 0.0;
    }
    out.offsets[c + 1] = out.targets.size();
  }
  return out;
}

}  // namespace

LouvainResult louvain_optimize(const MarkovOperator& op, std::uint64_t seed, const LouvainOptions& options) {
  std::mt19937_64 rng(seed);
  const Level* level = &op.flow();
  Level owned;
  std::vector<int> global(op.size());
  for (std::size_t i = 0; i < global.size(); ++i) global[i] = static_cast<int>(i);

  LouvainResult result;
  while (true) {
    std::vector<int> labels;
    LocalMover mover(*level, rng, options);
    const bool moved = mover.run(labels, result.sweep_objective);
    if (!moved) break;
    const std::size_t clusters = compact(labels);
    for (int& g : global) g = labels[static_cast<std::size_t>(g)];
    if (clusters == level->mass.size()) break;
    owned = aggregate(*level, labels, clusters);
    level = &owned;
  }
  for (std::size_t k = 1; k < result.sweep_objective.size(); ++k) {
    const double prev = result.sweep_objective[k - 1];
    if (result.sweep_objective[k] < prev - 1e-10 * std::max(1.0, std::abs(prev))) {
      throw std::logic_error("louvain: objective decreased between sweeps");
    }
  }
  result.partition = Partition(global);
  result.stability = op.stability(result.partition);
  // All-in-one scores exactly 0; a result not measurably above it collapses to it.
  if (result.stability <= kMinImprovement && result.partition.n_clusters() > 1) {
    result.partition = Partition::all_in_one(op.size());
    result.stability = 0.0;
  }
  return result;
}

LouvainResult louvain_optimize(const RandomWalkContext& ctx, double t, const StabilityOptions& stability_options,
                               std::uint64_t seed, const LouvainOptions& options) {
  const MarkovOperator op(ctx, t, stability_options);
  return louvain_optimize(op, seed, options);
}

}  // namespace topicgraph
