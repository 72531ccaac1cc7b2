#include "tmflow/knn.hpp"

#include "tmflow/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <utility>

namespace tmflow {

namespace {

struct Candidate {
  double dist2;
  std::size_t index;
  bool operator<(const Candidate& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
};

double squared_distance(const Positions& p, Eigen::Index a, Eigen::Index b) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    const double d = p(a, j) - p(b, j);
    s += d * d;
  }
  return s;
}

// Keeps the k best candidates seen so far, ordered.
class BestK {
 public:
  explicit BestK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  void offer(Candidate c) {
    if (items_.size() == k_ && !(c < items_.back())) return;
    items_.insert(std::upper_bound(items_.begin(), items_.end(), c), c);
    if (items_.size() > k_) items_.pop_back();
  }

  bool full() const { return items_.size() == k_; }
  const Candidate& worst() const { return items_.back(); }
  const Candidate& first() const { return items_.front(); }

 private:
  std::size_t k_;
  std::vector<Candidate> items_;
};

void brute_force(const Positions& p, std::size_t k, KthNeighbors& out) {
  const Eigen::Index n = p.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    BestK best(k);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      best.offer({squared_distance(p, i, j), static_cast<std::size_t>(j)});
    }
    out.index[i] = best.worst().index;
    out.distance[i] = std::sqrt(best.worst().dist2);
    out.nearest[i] = std::sqrt(best.first().dist2);
  }
}

using CellKey = std::array<long, 3>;

struct CellHash {
  std::size_t operator()(const CellKey& c) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (long v : c) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
    return h;
  }
};

// Uniform cell list; rings of cells are visited in increasing Chebyshev radius
// until no unvisited point can beat the current k-th candidate.
void grid_search(const Positions& p, std::size_t k, KthNeighbors& out) {
  const Eigen::Index n = p.rows();
  const auto d = static_cast<std::size_t>(p.cols());
  const Eigen::RowVectorXd lo = p.colwise().minCoeff();
  const Eigen::RowVectorXd hi = p.colwise().maxCoeff();

  double volume = 1.0;
  std::size_t spread_dims = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double extent = hi[j] - lo[j];
    if (extent > 0.0) {
      volume *= extent;
      ++spread_dims;
    }
  }
  // Aim for roughly k+1 particles per cell.
  double h = 1.0;
  if (spread_dims > 0) {
    h = std::pow(volume * static_cast<double>(k + 1) / static_cast<double>(n), 1.0 / static_cast<double>(spread_dims));
  }
  if (!(h > 0.0) || !std::isfinite(h)) h = 1.0;

  auto cell_of = [&](Eigen::Index i) {
    CellKey c{0, 0, 0};
    for (std::size_t j = 0; j < d; ++j) c[j] = static_cast<long>(std::floor((p(i, j) - lo[j]) / h));
    return c;
  };

  std::unordered_map<CellKey, std::vector<Eigen::Index>, CellHash> cells;
  CellKey max_cell{0, 0, 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const CellKey c = cell_of(i);
    cells[c].push_back(i);
    for (std::size_t j = 0; j < d; ++j) max_cell[j] = std::max(max_cell[j], c[j]);
  }
  long max_radius = 0;
  for (std::size_t j = 0; j < d; ++j) max_radius = std::max(max_radius, max_cell[j]);

  for (Eigen::Index i = 0; i < n; ++i) {
    const CellKey home = cell_of(i);
    BestK best(k);
    for (long r = 0; r <= max_radius + 1; ++r) {
      // Visit cells whose Chebyshev distance from home is exactly r.
      const long lo0 = -r, hi0 = r;
      const long lo1 = d > 1 ? -r : 0, hi1 = d > 1 ? r : 0;
      const long lo2 = d > 2 ? -r : 0, hi2 = d > 2 ? r : 0;
      for (long a = lo0; a <= hi0; ++a) {
        for (long b = lo1; b <= hi1; ++b) {
          for (long c = lo2; c <= hi2; ++c) {
            if (std::max({std::labs(a), std::labs(b), std::labs(c)}) != r) continue;
            const auto it = cells.find({home[0] + a, home[1] + b, home[2] + c});
            if (it == cells.end()) continue;
            for (Eigen::Index j : it->second) {
              if (j == i) continue;
              best.offer({squared_distance(p, i, j), static_cast<std::size_t>(j)});
            }
          }
        }
      }
      // Unvisited points lie at least r·h away.
      const double reach = static_cast<double>(r) * h;
      if (best.full() && best.worst().dist2 < reach * reach) break;
    }
    out.index[i] = best.worst().index;
    out.distance[i] = std::sqrt(best.worst().dist2);
    out.nearest[i] = std::sqrt(best.first().dist2);
  }
}

}  // namespace

KthNeighbors kth_neighbors(const Positions& points, std::size_t k, NeighborSearch method) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k < 1 || k >= n) {
    throw ConfigError("k-NN requires 1 <= k < N (k = " + std::to_string(k) + ", N = " + std::to_string(n) + ")");
  }
  KthNeighbors out;
  out.index.resize(n);
  out.distance.resize(n);
  out.nearest.resize(n);
  if (method == NeighborSearch::grid && points.cols() <= 3) {
    grid_search(points, k, out);
  } else {
    brute_force(points, k, out);
  }
  return out;
}

}  // namespace tmflow
