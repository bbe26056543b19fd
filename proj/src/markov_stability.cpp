#include "topicgraph/markov_stability.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "topicgraph/common.hpp"
#include "topicgraph/expm.hpp"

namespace topicgraph {

RandomWalkContext::RandomWalkContext(const SimilarityGraph& g) {
  const auto n = g.n_nodes();
  if (n < 2) throw InputError("random walk needs at least two nodes");
  if (!g.is_connected()) throw InputError("similarity graph is disconnected");

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(2 * g.edges().size());
  for (const auto& e : g.edges()) {
    triplets.emplace_back(static_cast<int>(e.i), static_cast<int>(e.j), e.weight);
    triplets.emplace_back(static_cast<int>(e.j), static_cast<int>(e.i), e.weight);
  }
  adjacency_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  adjacency_.setFromTriplets(triplets.begin(), triplets.end());
  adjacency_.makeCompressed();

  degree_.assign(n, 0.0);
  for (Eigen::Index i = 0; i < adjacency_.outerSize(); ++i) {
    double d = 0.0;
    for (decltype(adjacency_)::InnerIterator it(adjacency_, i); it; ++it) d += it.value();
    degree_[static_cast<std::size_t>(i)] = d;
  }
  total_weight_ = 0.0;
  for (double d : degree_) total_weight_ += d;

  stationary_.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) stationary_(static_cast<Eigen::Index>(i)) = degree_[i] / total_weight_;

  transition_ = adjacency_;
  for (Eigen::Index i = 0; i < transition_.outerSize(); ++i) {
    const double inv = 1.0 / degree_[static_cast<std::size_t>(i)];
    for (decltype(transition_)::InnerIterator it(transition_, i); it; ++it) it.valueRef() *= inv;
  }
}

Variant parse_variant(std::string_view name) {
  if (name == "linearized") return Variant::linearized;
  if (name == "exponential") return Variant::exponential;
  throw InputError("unknown stability variant '" + std::string(name) + "'");
}

std::string_view to_string(Variant variant) {
  return variant == Variant::linearized ? "linearized" : "exponential";
}

namespace {

void check_partition(const RandomWalkContext& ctx, const Partition& p) {
  if (p.size() != ctx.size()) {
    throw InputError("partition covers " + std::to_string(p.size()) + " nodes, graph has " +
                     std::to_string(ctx.size()));
  }
}

void check_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw InputError("Markov time must be finite and non-negative");
}

// sum_c (pi_c - pi_c^2) with pi_c accumulated from degrees in index order.
double retention_term(const RandomWalkContext& ctx, const Partition& p) {
  std::vector<double> dsum(p.n_clusters(), 0.0);
  for (std::size_t i = 0; i < ctx.size(); ++i) dsum[static_cast<std::size_t>(p[i])] += ctx.degree()[i];
  double r = 0.0;
  for (double d : dsum) {
    const double pc = d / ctx.total_weight();
    r += pc - pc * pc;
  }
  return r;
}

// sum_c (pi_c - a_c / 2m): probability mass that leaves its cluster in one step.
double one_step_escape(const RandomWalkContext& ctx, const Partition& p) {
  const auto& a = ctx.adjacency();
  std::vector<double> dsum(p.n_clusters(), 0.0);
  std::vector<double> internal(p.n_clusters(), 0.0);
  for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
    const int c = p[static_cast<std::size_t>(i)];
    double s = 0.0;
    for (std::remove_cvref_t<decltype(a)>::InnerIterator it(a, i); it; ++it) {
      if (p[static_cast<std::size_t>(it.col())] == c) s += it.value();
    }
    internal[static_cast<std::size_t>(c)] += s;
    dsum[static_cast<std::size_t>(c)] += ctx.degree()[static_cast<std::size_t>(i)];
  }
  double escape = 0.0;
  for (std::size_t c = 0; c < dsum.size(); ++c) {
    escape += dsum[c] / ctx.total_weight() - internal[c] / ctx.total_weight();
  }
  return escape;
}

}  // namespace

MarkovOperator::MarkovOperator(const RandomWalkContext& ctx, double t, const StabilityOptions& options)
    : ctx_(&ctx), t_(t), variant_(options.variant) {
  check_time(t);
  const std::size_t n = ctx.size();
  const auto& pi = ctx.stationary();
  flow_.mass.assign(pi.data(), pi.data() + pi.size());
  flow_.self.resize(n);
  flow_.offsets.assign(n + 1, 0);

  if (variant_ == Variant::linearized) {
    const auto& a = ctx.adjacency();
    const double scale = t / ctx.total_weight();
    flow_.targets.reserve(static_cast<std::size_t>(a.nonZeros()));
    flow_.weights.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (Eigen::Index i = 0; i < a.outerSize(); ++i) {
      flow_.self[static_cast<std::size_t>(i)] = (1.0 - t) * pi(i);
      if (t > 0.0) {
        for (std::remove_cvref_t<decltype(a)>::InnerIterator it(a, i); it; ++it) {
          flow_.targets.push_back(static_cast<std::uint32_t>(it.col()));
          flow_.weights.push_back(scale * it.value());
        }
      }
      flow_.offsets[static_cast<std::size_t>(i) + 1] = flow_.targets.size();
    }
    return;
  }

  if (n > options.exponential_node_limit) {
    throw InputError("exponential stability refused: " + std::to_string(n) + " nodes exceeds the limit of " +
                     std::to_string(options.exponential_node_limit));
  }
  const Eigen::MatrixXd laplacian =
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
      Eigen::MatrixXd(ctx.transition());
  transition_t_ = expm(-t * laplacian);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    flow_.self[i] = pi(ii) * transition_t_(ii, ii);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto jj = static_cast<Eigen::Index>(j);
      // Pi exp(-tL) is symmetric for a reversible walk; average out rounding.
      const double w = 0.5 * (pi(ii) * transition_t_(ii, jj) + pi(jj) * transition_t_(jj, ii));
      if (w > 0.0) {
        flow_.targets.push_back(static_cast<std::uint32_t>(j));
        flow_.weights.push_back(w);
      }
    }
    flow_.offsets[i + 1] = flow_.targets.size();
  }
}

double MarkovOperator::stability(const Partition& p) const {
  check_partition(*ctx_, p);
  const double retention = retention_term(*ctx_, p);
  if (variant_ == Variant::linearized) return retention - t_ * one_step_escape(*ctx_, p);

  const auto& pi = ctx_->stationary();
  const auto n = static_cast<Eigen::Index>(ctx_->size());
  double escape = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double leave = 0.0;
    const int c = p[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      if (p[static_cast<std::size_t>(j)] != c) leave += transition_t_(i, j);
    }
    escape += pi(i) * leave;
  }
  return retention - escape;
}

double stability(const RandomWalkContext& ctx, const Partition& p, double t, const StabilityOptions& options) {
  check_time(t);
  check_partition(ctx, p);
  if (options.variant == Variant::linearized) return retention_term(ctx, p) - t * one_step_escape(ctx, p);
  return MarkovOperator(ctx, t, options).stability(p);
}

double stability(const RandomWalkContext& ctx, const Partition& p, double t, Variant variant) {
  return stability(ctx, p, t, StabilityOptions{variant, kDefaultExponentialNodeLimit});
}

std::vector<double> MSScanResult::t_grid() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.t);
  return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw InputError("log grid needs 0 < lo < hi and >= 2 points");
  std::vector<double> grid(points);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t k = 0; k < points; ++k) {
    grid[k] = std::pow(10.0, a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> default_t_grid() { return log_grid(1e-2, 1e2, 200); }

namespace {

// Distinct partitions with multiplicities, in order of first occurrence.
struct Distinct {
  std::vector<std::size_t> representative;
  std::vector<std::size_t> multiplicity;
  std::vector<std::size_t> index_of;  // input position -> distinct slot
};

Distinct deduplicate(std::span<const Partition> partitions) {
  Distinct out;
  std::vector<std::uint64_t> hashes;
  for (std::size_t k = 0; k < partitions.size(); ++k) {
    const auto& a = partitions[k].assignment();
    const std::uint64_t h =
        fnv1a(std::string_view(reinterpret_cast<const char*>(a.data()), a.size() * sizeof(int)));
    std::size_t slot = out.representative.size();
    for (std::size_t s = 0; s < out.representative.size(); ++s) {
      if (hashes[s] == h && partitions[out.representative[s]] == partitions[k]) {
        slot = s;
        break;
      }
    }
    if (slot == out.representative.size()) {
      out.representative.push_back(k);
      out.multiplicity.push_back(0);
      hashes.push_back(h);
    }
    ++out.multiplicity[slot];
    out.index_of.push_back(slot);
  }
  return out;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

double mean_pairwise_vi(std::span<const Partition> partitions) {
  if (partitions.size() < 2) return 0.0;
  const Distinct distinct = deduplicate(partitions);
  double sum = 0.0;
  for (std::size_t a = 0; a < distinct.representative.size(); ++a) {
    for (std::size_t b = a + 1; b < distinct.representative.size(); ++b) {
      const double vi = variation_of_information(partitions[distinct.representative[a]],
                                                 partitions[distinct.representative[b]]);
      sum += static_cast<double>(distinct.multiplicity[a] * distinct.multiplicity[b]) * vi;
    }
  }
  const double pairs = static_cast<double>(partitions.size() * (partitions.size() - 1) / 2);
  return sum / pairs;
}

MSScanResult scan(const RandomWalkContext& ctx, const ScanOptions& options) {
  const auto& grid = options.t_grid;
  if (grid.empty()) throw InputError("scan: empty Markov time grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    check_time(grid[k]);
    if (k > 0 && !(grid[k] > grid[k - 1])) throw InputError("scan: Markov times must be strictly increasing");
  }
  if (options.n_runs < 2) throw InputError("scan: n_runs must be at least 2");

  MSScanResult result;
  result.points.resize(grid.size());
  parallel_for(grid.size(), options.jobs, [&](std::size_t ti) {
    const MarkovOperator op(ctx, grid[ti], options.stability);
    std::vector<Partition> runs;
    runs.reserve(options.n_runs);
    ScanPoint& point = result.points[ti];
    point.t = grid[ti];
    for (std::size_t r = 0; r < options.n_runs; ++r) {
      LouvainResult run = louvain_optimize(op, mix_seed(options.seed, ti, r));
      if (r == 0 || run.stability > point.stability) {
        point.stability = run.stability;
        point.partition = run.partition;
      }
      runs.push_back(std::move(run.partition));
    }
    point.n_clusters = point.partition.n_clusters();
    point.ensemble_vi = mean_pairwise_vi(runs);
  });

  const std::size_t t_count = grid.size();
  std::vector<Partition> kept;
  kept.reserve(t_count);
  for (const auto& p : result.points) kept.push_back(p.partition);
  const Distinct distinct = deduplicate(kept);
  const std::size_t u = distinct.representative.size();
  Eigen::MatrixXd unique_vi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u));
  parallel_for(u, options.jobs, [&](std::size_t a) {
    for (std::size_t b = a + 1; b < u; ++b) {
      const double vi = variation_of_information(kept[distinct.representative[a]], kept[distinct.representative[b]]);
      unique_vi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = vi;
    }
  });
  result.cross_vi.resize(static_cast<Eigen::Index>(t_count), static_cast<Eigen::Index>(t_count));
  for (std::size_t i = 0; i < t_count; ++i) {
    for (std::size_t j = 0; j < t_count; ++j) {
      const auto a = std::min(distinct.index_of[i], distinct.index_of[j]);
      const auto b = std::max(distinct.index_of[i], distinct.index_of[j]);
      result.cross_vi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          unique_vi(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    }
  }
  return result;
}

void save_scan_csv(const MSScanResult& scan, const std::filesystem::path& path) {
  std::string out = "t,n_clusters,stability,ensemble_vi\n";
  for (const auto& p : scan.points) {
    out += format_double(p.t) + ',' + std::to_string(p.n_clusters) + ',' + format_double(p.stability) + ',' +
           format_double(p.ensemble_vi) + '\n';
  }
  write_file_atomic(path, out);
}

void save_cross_vi_csv(const MSScanResult& scan, const std::filesystem::path& path) {
  std::string out;
  for (Eigen::Index i = 0; i < scan.cross_vi.rows(); ++i) {
    for (Eigen::Index j = 0; j < scan.cross_vi.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(scan.cross_vi(i, j));
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

void save_scan_partitions(const MSScanResult& scan, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : scan.points) {
    const auto& labels = p.partition.assignment();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i > 0) out += '\t';
      out += std::to_string(labels[i]);
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

template <typename T>
std::vector<T> split_numbers(const std::string& line, char sep, const std::filesystem::path& path,
                             std::size_t line_no) {
  std::vector<T> out;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (p <= end) {
    const char* stop = std::find(p, end, sep);
    T value{};
    auto [ptr, ec] = std::from_chars(p, stop, value);
    if (ec != std::errc{} || ptr != stop) {
      throw InputError(path.filename().string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    out.push_back(value);
    p = stop + 1;
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace

MSScanResult load_scan(const std::filesystem::path& scan_csv, const std::filesystem::path& cross_vi_csv,
                       const std::filesystem::path& partitions_tsv) {
  MSScanResult result;
  const auto scan_lines = read_lines(scan_csv);
  if (scan_lines.empty() || scan_lines[0] != "t,n_clusters,stability,ensemble_vi") {
    throw InputError(scan_csv.filename().string() + ": unexpected header");
  }
  for (std::size_t k = 1; k < scan_lines.size(); ++k) {
    const auto values = split_numbers<double>(scan_lines[k], ',', scan_csv, k + 1);
    if (values.size() != 4) throw InputError(scan_csv.filename().string() + ": expected 4 columns");
    ScanPoint p;
    p.t = values[0];
    p.n_clusters = static_cast<std::size_t>(values[1]);
    p.stability = values[2];
    p.ensemble_vi = values[3];
    result.points.push_back(std::move(p));
  }
  const auto partition_lines = read_lines(partitions_tsv);
  if (partition_lines.size() != result.points.size()) {
    throw InputError(partitions_tsv.filename().string() + ": row count does not match the scan");
  }
  for (std::size_t k = 0; k < partition_lines.size(); ++k) {
    result.points[k].partition = Partition(split_numbers<int>(partition_lines[k], '\t', partitions_tsv, k + 1));
  }
  const auto vi_lines = read_lines(cross_vi_csv);
  const auto t_count = static_cast<Eigen::Index>(result.points.size());
  if (static_cast<Eigen::Index>(vi_lines.size()) != t_count) {
    throw InputError(cross_vi_csv.filename().string() + ": row count does not match the scan");
  }
  result.cross_vi.resize(t_count, t_count);
  for (Eigen::Index i = 0; i < t_count; ++i) {
    const auto row = split_numbers<double>(vi_lines[static_cast<std::size_t>(i)], ',', cross_vi_csv,
                                           static_cast<std::size_t>(i) + 1);
    if (static_cast<Eigen::Index>(row.size()) != t_count) {
      throw InputError(cross_vi_csv.filename().string() + ": row length does not match the scan");
    }
    for (Eigen::Index j = 0; j < t_count; ++j) result.cross_vi(i, j) = row[static_cast<std::size_t>(j)];
  }
  return result;
}

}  // namespace topicgraph
