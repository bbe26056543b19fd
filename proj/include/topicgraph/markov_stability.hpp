#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "topicgraph/graph.hpp"
#include "topicgraph/partition.hpp"

namespace topicgraph {

/// Random walk on a connected weighted graph: M = D^-1 A, pi_i = d_i / 2m.
class RandomWalkContext {
 public:
  /// Throws InputError if the graph is disconnected or has fewer than two nodes.
  explicit RandomWalkContext(const SimilarityGraph& g);

  std::size_t size() const { return degree_.size(); }
  double total_weight() const { return total_weight_; }
  const std::vector<double>& degree() const { return degree_; }
  const Eigen::VectorXd& stationary() const { return stationary_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& adjacency() const { return adjacency_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& transition() const { return transition_; }

 private:
  Eigen::SparseMatrix<double, Eigen::RowMajor> adjacency_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> transition_;
  std::vector<double> degree_;  // row sums of adjacency_, in row order
  double total_weight_ = 0.0;   // sum of degree_ in index order
  Eigen::VectorXd stationary_;
};

/// linearized: M_t = (1-t) I + t M. exponential: M_t = exp(-t (I - M)), dense.
enum class Variant { linearized, exponential };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant variant);

inline constexpr std::size_t kDefaultExponentialNodeLimit = 5000;

struct StabilityOptions {
  Variant variant = Variant::linearized;
  std::size_t exponential_node_limit = kDefaultExponentialNodeLimit;
};

/// Markov Stability r(t,H) = trace[H^T (Pi M_t - pi pi^T) H].
///
/// Evaluated as sum_c (pi_c - pi_c^2) - sum_i pi_i P_t(i leaves its cluster),
/// using that M_t is row-stochastic, so the all-in-one partition scores
/// exactly zero.
double stability(const RandomWalkContext& ctx, const Partition& p, double t,
                 const StabilityOptions& options = {});
double stability(const RandomWalkContext& ctx, const Partition& p, double t, Variant variant);

/// The generalized modularity matrix Pi M_t - pi pi^T at one Markov time,
/// prepared once and shared by repeated optimizations.
class MarkovOperator {
 public:
  MarkovOperator(const RandomWalkContext& ctx, double t, const StabilityOptions& options = {});

  double time() const { return t_; }
  Variant variant() const { return variant_; }
  std::size_t size() const { return ctx_->size(); }
  double stability(const Partition& p) const;

  /// Off-diagonal entries of Pi M_t (both orientations), its diagonal, and pi.
  struct Flow {
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> weights;
    std::vector<double> self;
    std::vector<double> mass;
  };
  const Flow& flow() const { return flow_; }

 private:
  const RandomWalkContext* ctx_;
  double t_;
  Variant variant_;
  Eigen::MatrixXd transition_t_;  // exp(-t(I-M)); exponential variant only
  Flow flow_;
};

struct LouvainOptions {
  /// Recompute the full objective after every move and throw std::logic_error
  /// if it ever decreases. Quadratic cost; meant for tests.
  bool verify_each_move = false;
};

struct LouvainResult {
  Partition partition;
  double stability = 0.0;
  /// Objective after each local-move sweep, in order (non-decreasing).
  std::vector<double> sweep_objective;
};

/// Greedy Louvain maximization of Markov Stability at time t. Starts from
/// singletons; node visit order is shuffled by the seed at every level.
LouvainResult louvain_optimize(const MarkovOperator& op, std::uint64_t seed, const LouvainOptions& options = {});
LouvainResult louvain_optimize(const RandomWalkContext& ctx, double t, const StabilityOptions& stability_options,
                               std::uint64_t seed, const LouvainOptions& options = {});

struct ScanPoint {
  double t = 0.0;
  Partition partition;  // best-by-stability over the ensemble
  double stability = 0.0;
  std::size_t n_clusters = 0;
  double ensemble_vi = 0.0;  // mean pairwise VI over the ensemble
};

struct MSScanResult {
  std::vector<ScanPoint> points;
  Eigen::MatrixXd cross_vi;  // VI between kept partitions across t

  std::vector<double> t_grid() const;
};

struct ScanOptions {
  std::vector<double> t_grid;
  std::size_t n_runs = 50;
  std::uint64_t seed = 0;
  StabilityOptions stability;
  std::size_t jobs = 1;
};

/// `points` values spaced logarithmically in [lo, hi], inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t points);
/// 200 points in [1e-2, 1e2].
std::vector<double> default_t_grid();

/// Mean VI over all unordered pairs (0 for fewer than two partitions).
double mean_pairwise_vi(std::span<const Partition> partitions);

/// Runs n_runs seeded optimizations per Markov time. Output depends only on
/// (graph, t_grid, n_runs, seed, variant), never on `jobs`.
MSScanResult scan(const RandomWalkContext& ctx, const ScanOptions& options);

enum class ScaleLabel { fine, medium, coarse, other };
std::string_view to_string(ScaleLabel label);

struct SelectedScale {
  std::size_t t_index = 0;
  double t = 0.0;
  Partition partition;
  ScaleLabel label = ScaleLabel::other;
  std::size_t n_clusters = 0;
  double ensemble_vi = 0.0;
  std::size_t plateau_begin = 0;  // t-grid indices, inclusive
  std::size_t plateau_end = 0;
  double plateau_log_length = 0.0;  // ln(t_end / t_begin)
  bool from_plateau = true;         // false when chosen by the ensemble-VI fallback
};

struct ScaleSelection {
  std::vector<SelectedScale> chosen;  // ordered by descending t
};

struct SelectionOptions {
  std::size_t n_scales = 3;
  /// Cross-time VI bound for plateau membership; defaults to 0.1 ln N.
  std::optional<double> vi_threshold;
};

/// A plateau is a maximal run of consecutive t values with a constant,
/// non-trivial cluster count (1 < C < N) whose kept partitions are pairwise
/// within vi_threshold. Each plateau of length > 1 contributes the point with
/// the lowest ensemble VI; candidates are ranked by plateau length in log t,
/// then by ensemble VI. Without any such plateau, local minima of the
/// ensemble VI are used instead.
ScaleSelection select_robust_scales(const MSScanResult& scan, const SelectionOptions& options = {});

struct Plateau {
  std::size_t begin = 0;
  std::size_t end = 0;  // inclusive
};
std::vector<Plateau> find_plateaux(const MSScanResult& scan, double vi_threshold);

void save_scan_csv(const MSScanResult& scan, const std::filesystem::path& path);
void save_cross_vi_csv(const MSScanResult& scan, const std::filesystem::path& path);
/// One row per t: the kept partition's labels, tab-separated.
void save_scan_partitions(const MSScanResult& scan, const std::filesystem::path& path);
MSScanResult load_scan(const std::filesystem::path& scan_csv, const std::filesystem::path& cross_vi_csv,
                       const std::filesystem::path& partitions_tsv);

}  // namespace topicgraph
