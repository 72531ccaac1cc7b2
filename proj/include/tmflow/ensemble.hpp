#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <variant>
#include <vector>

namespace tmflow {

/// Row-major N×d block of particle coordinates; row i is particle i.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Identifies the base sample of μ₀ an ensemble was transported from.
struct LineageTag {
  std::uint64_t value = 0;
  friend bool operator==(LineageTag, LineageTag) = default;
};

/// N equally weighted particles in d dimensions: the sampled images X(x_i) of
/// a transport map over a fixed base sample x_1..x_N of μ₀.
///
/// Immutable after construction. Ensembles sharing a tag and N are "coupled":
/// row i of each refers to the same base point, so indexwise comparisons such
/// as discrepancy() are meaningful.
class Ensemble {
 public:
  /// Wraps positions under a freshly minted lineage tag.
  explicit Ensemble(Positions positions);

  /// New ensemble over the same base sample (same tag); shape must match.
  Ensemble transported(Positions positions) const;

  const Positions& positions() const noexcept { return positions_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(positions_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(positions_.cols()); }
  LineageTag tag() const noexcept { return tag_; }

  bool coupled_with(const Ensemble& other) const noexcept {
    return tag_ == other.tag_ && size() == other.size() && dim() == other.dim();
  }

 private:
  Ensemble(Positions positions, LineageTag tag);

  Positions positions_;
  LineageTag tag_;
};

struct UniformBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
};

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd cov_diag;
};

/// Tensor-product grid with counts[j] evenly spaced nodes from lo[j] to hi[j].
/// Particles are enumerated with the first coordinate varying fastest.
struct Grid {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  std::vector<std::size_t> counts;
};

struct SamplerSpec {
  std::variant<UniformBox, Gaussian, Grid> kind;
  std::uint64_t seed = 0;
};

/// Throws ConfigError when the spec is inconsistent with dim.
void validate(const SamplerSpec& spec, std::size_t dim);

/// Deterministic in (spec, n, dim). For a grid, n must equal the node count.
Ensemble sample_ensemble(const SamplerSpec& spec, std::size_t n, std::size_t dim);

/// D(a, b) = (1/2N) Σ_i ‖a_i − b_i‖². Throws CouplingError unless coupled.
double discrepancy(const Ensemble& a, const Ensemble& b);

Eigen::VectorXd mean(const Ensemble& a);

/// (1/N) Σ_i ‖x_i‖².
double second_moment(const Ensemble& a);

}  // namespace tmflow
