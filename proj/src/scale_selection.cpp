#include <algorithm>
#include <cmath>

#include "topicgraph/common.hpp"
#include "topicgraph/markov_stability.hpp"

namespace topicgraph {

std::string_view to_string(ScaleLabel label) {
  switch (label) {
    case ScaleLabel::fine: return "fine";
    case ScaleLabel::medium: return "medium";
    case ScaleLabel::coarse: return "coarse";
    case ScaleLabel::other: return "other";
  }
  return "other";
}

namespace {

bool trivial(const ScanPoint& p) { return p.n_clusters <= 1 || p.n_clusters >= p.partition.size(); }

}  // namespace

std::vector<Plateau> find_plateaux(const MSScanResult& scan, double vi_threshold) {
  const auto& pts = scan.points;
  std::vector<Plateau> out;
  for (std::size_t i = 0; i < pts.size();) {
    if (trivial(pts[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < pts.size() && pts[j + 1].n_clusters == pts[i].n_clusters) {
      bool close = true;
      for (std::size_t k = i; k <= j && close; ++k) {
        close = scan.cross_vi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j + 1)) < vi_threshold;
      }
      if (!close) break;
      ++j;
    }
    out.push_back({i, j});
    i = j + 1;
  }
  return out;
}

ScaleSelection select_robust_scales(const MSScanResult& scan, const SelectionOptions& options) {
  const auto& pts = scan.points;
  if (pts.empty()) throw InputError("select_robust_scales: empty scan");
  if (options.n_scales == 0) return {};
  const double n_nodes = static_cast<double>(pts.front().partition.size());
  const double threshold = options.vi_threshold.value_or(0.1 * std::log(n_nodes));

  std::vector<SelectedScale> candidates;
  for (const auto& plateau : find_plateaux(scan, threshold)) {
    if (plateau.end == plateau.begin) continue;
    const double mid = 0.5 * (std::log(pts[plateau.begin].t) + std::log(pts[plateau.end].t));
    std::size_t best = plateau.begin;
    for (std::size_t k = plateau.begin + 1; k <= plateau.end; ++k) {
      const double vk = pts[k].ensemble_vi;
      const double vb = pts[best].ensemble_vi;
      if (vk < vb || (vk == vb && std::abs(std::log(pts[k].t) - mid) < std::abs(std::log(pts[best].t) - mid))) {
        best = k;
      }
    }
    SelectedScale s;
    s.t_index = best;
    s.plateau_begin = plateau.begin;
    s.plateau_end = plateau.end;
    s.plateau_log_length = std::log(pts[plateau.end].t / pts[plateau.begin].t);
    candidates.push_back(s);
  }

  const bool have_plateaux = !candidates.empty();
  if (have_plateaux) {
    std::stable_sort(candidates.begin(), candidates.end(), [&](const SelectedScale& a, const SelectedScale& b) {
      if (a.plateau_log_length != b.plateau_log_length) return a.plateau_log_length > b.plateau_log_length;
      return pts[a.t_index].ensemble_vi < pts[b.t_index].ensemble_vi;
    });
  } else {
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (trivial(pts[k])) continue;
      const double v = pts[k].ensemble_vi;
      const bool left_ok = k == 0 || v <= pts[k - 1].ensemble_vi;
      const bool right_ok = k + 1 == pts.size() || v <= pts[k + 1].ensemble_vi;
      if (!left_ok || !right_ok) continue;
      SelectedScale s;
      s.t_index = k;
      s.plateau_begin = s.plateau_end = k;
      s.from_plateau = false;
      candidates.push_back(s);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](const SelectedScale& a, const SelectedScale& b) {
      return pts[a.t_index].ensemble_vi < pts[b.t_index].ensemble_vi;
    });
  }

  if (candidates.size() < options.n_scales) {
    warn("select_robust_scales: found " + std::to_string(candidates.size()) +
         (have_plateaux ? " plateaux" : " ensemble-VI minima (no plateaux)") + ", requested " +
         std::to_string(options.n_scales));
  }
  if (candidates.size() > options.n_scales) candidates.resize(options.n_scales);

  for (auto& s : candidates) {
    const auto& p = pts[s.t_index];
    s.t = p.t;
    s.partition = p.partition;
    s.n_clusters = p.n_clusters;
    s.ensemble_vi = p.ensemble_vi;
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const SelectedScale& a, const SelectedScale& b) { return a.t_index > b.t_index; });
  const std::size_t count = candidates.size();
  for (std::size_t k = 0; k < count; ++k) {
    if (count == 1) {
      candidates[k].label = ScaleLabel::medium;
    } else if (k == 0) {
      candidates[k].label = ScaleLabel::coarse;
    } else if (k + 1 == count) {
      candidates[k].label = ScaleLabel::fine;
    } else if (k == count / 2) {
      candidates[k].label = ScaleLabel::medium;
    } else {
      candidates[k].label = ScaleLabel::other;
    }
  }
  return ScaleSelection{std::move(candidates)};
}

}  // namespace topicgraph
