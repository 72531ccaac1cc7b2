#pragma once

#include "tmflow/ensemble.hpp"

#include <cstddef>
#include <vector>

namespace tmflow {

enum class NeighborSearch { brute_force, grid };

/// For every particle, its k-th nearest other particle.
struct KthNeighbors {
  std::vector<std::size_t> index;    ///< nn_k(i)
  std::vector<double> distance;      ///< ε_k(i)
  std::vector<double> nearest;       ///< distance to the 1st neighbour, for degeneracy checks
};

/// k-th nearest neighbours with ties broken by the smaller particle index.
/// The grid backend is only used for d ≤ 3; it returns the same neighbours as
/// brute force. Requires 1 ≤ k < N.
KthNeighbors kth_neighbors(const Positions& points, std::size_t k,
                           NeighborSearch method = NeighborSearch::brute_force);

}  // namespace tmflow
