#pragma once

#include "tmflow/ensemble.hpp"
#include "tmflow/functionals.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace tmflow {

/// One Lyapunov evaluation: value = weight·gap + d_term.
struct LyapunovRecord {
  std::size_t n = 0;
  double value = 0.0;
  double gap = 0.0;
  double d_term = 0.0;
  /// Upper bound on gap implied by monotonicity from n = 1; absent at n = 0.
  std::optional<double> certified_bound;
};

/// ℒ_n = nγ(F_n − F*) + D(X_n, X*). Returns nullopt when d_n is unavailable
/// (no reference map). l1 is ℒ_1 when already known; it produces the
/// certificate ℒ_1 / (nγ) for n ≥ 1.
std::optional<LyapunovRecord> lyapunov_gd(std::size_t n, double f_n, double f_star, double gamma,
                                          std::optional<double> d_n, std::optional<double> l1 = std::nullopt);

/// ℒ_n^ac = a_n(F(Y_n) − F*) + D(Z_n, X*), certificate ℒ_1^ac / a_n.
std::optional<LyapunovRecord> lyapunov_acc(std::size_t n, double f_y, double f_star, double a_n,
                                           std::optional<double> d_z, std::optional<double> l1 = std::nullopt);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::pair<std::size_t, std::size_t> window;  ///< first and last series index used
  double residual = 0.0;                       ///< RMS in log–log space
};

/// Least-squares line through (log n, log gap) over the trailing
/// window_fraction of the series. Points with n ≤ 0 or gap ≤ 0 are dropped;
/// nullopt when fewer than 10 remain. Throws ConfigError for a bad fraction.
std::optional<RateFit> fit_rate(const std::vector<std::pair<double, double>>& series, double window_fraction);

enum class MapFamily { affine, radial_perturbation };

struct AffineMap {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Positions apply(const Positions& x) const;
};

/// Images of a base sample under two maps S and T.
struct MapSample {
  Ensemble base;
  Positions s_images;
  Positions t_images;
  /// The generating maps, for the affine family.
  std::optional<std::pair<AffineMap, AffineMap>> affine;
};

/// Affine: x ↦ Ax + b with A = I + magnitude·U(−1,1)^{d×d} (symmetrised when
/// symmetric_linear is set) and b = magnitude·U(−1,1)^d.
/// Radial: x ↦ x + magnitude·α·exp(−‖x − o‖²)(x − o) with random centre o and
/// amplitude α ∈ (−1, 1).
MapSample sample_maps(const Ensemble& base, MapFamily family, double magnitude, std::uint64_t seed,
                      bool symmetric_linear = false);

/// [F(T#μ) − F(S#μ)] − (1/N) Σ ⟨𝒢_F[S#μ](S(x_i)), T(x_i) − S(x_i)⟩. Convexity predicts ≥ 0.
double check_convexity(const FunctionalSpec& spec, const MapSample& sample, const EvalOptions& opts = {});

/// (1/N) Σ ⟨g(S(x_i)), T − S⟩ + (L/2)(1/N) Σ ‖T − S‖² − [F(T#μ) − F(S#μ)].
/// L-smoothness predicts ≥ 0.
double check_smoothness(const FunctionalSpec& spec, const MapSample& sample, double L, const EvalOptions& opts = {});

}  // namespace tmflow
