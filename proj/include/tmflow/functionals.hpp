#pragma once

#include "tmflow/ensemble.hpp"
#include "tmflow/knn.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace tmflow {

// Potential energies 𝒱(μ) = ∫ V dμ.

/// V(x) = ‖x − center‖².
struct ShiftedSquare {
  Eigen::VectorXd center;
};

/// V(x) = ‖x‖² / 2.
struct HalfSquare {};

/// V(x) = xᵀAx + bᵀx with A symmetric positive semidefinite.
struct CustomQuadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

/// 𝒲(μ) = ½ ∫∫ ‖x − y‖² dμ(x) dμ(y), which equals the variance of μ.
struct SquaredDistanceInteraction {};

/// Negative differential entropy, estimated by Kozachenko–Leonenko.
struct KnnNegEntropy {
  std::size_t k = 5;
};

struct FunctionalSpec;

struct Scaled {
  double factor = 1.0;
  std::shared_ptr<const FunctionalSpec> inner;
};

struct Sum {
  std::vector<FunctionalSpec> terms;
};

struct FunctionalSpec {
  std::variant<ShiftedSquare, HalfSquare, CustomQuadratic, SquaredDistanceInteraction, KnnNegEntropy, Scaled, Sum>
      kind;
};

FunctionalSpec shifted_square(Eigen::VectorXd center);
FunctionalSpec half_square();
FunctionalSpec custom_quadratic(Eigen::MatrixXd A, Eigen::VectorXd b);
FunctionalSpec squared_distance_interaction();
FunctionalSpec knn_neg_entropy(std::size_t k = 5);
FunctionalSpec scaled(double factor, FunctionalSpec inner);
FunctionalSpec sum(std::vector<FunctionalSpec> terms);

/// Structural checks (positive factors, non-empty sums, k ≥ 1, PSD A, etc.)
/// against the ambient dimension. Throws ConfigError.
void validate(const FunctionalSpec& spec, std::size_t dim);

/// Per-particle vectors g_i = 𝒢_F[μ](x_i), aligned with the ensemble rows.
///
/// Normalised so that dF/dt = (1/N) Σ ⟨g_i, ẋ_i⟩; equivalently g_i is N times
/// the partial derivative of value() with respect to x_i.
using GradientField = Positions;

struct Evaluation {
  double value;
  GradientField gradient;
};

/// Options for the k-NN entropy term.
struct EvalOptions {
  NeighborSearch search = NeighborSearch::brute_force;
};

double value(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts = {});
GradientField gradient(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts = {});

/// Value and gradient together; shares neighbour searches between the two.
Evaluation evaluate(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts = {});

/// Kozachenko–Leonenko estimate ψ(N) − ψ(k) + log c_d + (d/N) Σ log ε_k(i).
double knn_entropy(const Ensemble& mu, std::size_t k, const EvalOptions& opts = {});

/// Volume of the unit ball in d dimensions.
double unit_ball_volume(std::size_t d);

/// A transport-map smoothness constant L, or nullopt when none is known
/// (entropy terms) or the functional is affine (L would be 0).
///
/// Quadratic potentials give 2·λ_max of their Hessian scale. The squared
/// distance interaction gives 2: 𝒲 is the variance, and Var(T − S) ≤ E‖T − S‖².
std::optional<double> smoothness_constant(const FunctionalSpec& spec);

/// True when the spec contains an entropy term.
bool has_entropy_term(const FunctionalSpec& spec);

}  // namespace tmflow
