#pragma once

#include "tmflow/functionals.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tmflow {

enum class Suite { gradients, convexity, smoothness, lyapunov, rates };

std::optional<Suite> suite_from_string(const std::string& name);
std::string to_string(Suite s);

struct CheckReport {
  Suite suite = Suite::gradients;
  std::uint64_t seed = 0;
  bool passed = true;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::string> failures;

  nlohmann::json to_json() const;
};

struct CheckOptions {
  std::uint64_t seed = 1;
  /// Smoothness suite only: probe with L reduced by 30%, where violations are expected.
  bool stress = false;
  std::size_t samples = 500;
};

/// Runs one property suite with deterministic seeding.
CheckReport run_check(Suite suite, const CheckOptions& opts = {});

/// The Example-1 objective: ½∫∫‖x − y‖² dμdμ + ∫‖x − 1‖² dμ in d dimensions.
FunctionalSpec example1_functional(std::size_t dim = 1);

/// The Example-2 objective: κ·(−Ĥ_k) + ∫‖x‖²/2 dμ.
FunctionalSpec example2_functional(double kappa, std::size_t k = 5);

/// −(κd/2)·log(2πκ): the Example-2 optimum, attained by N(0, κI).
double example2_fstar(double kappa, std::size_t dim);

// Building blocks shared with the acceptance suite.

/// max over particles/coordinates of |g_ic − N·(central difference of value)|,
/// divided by max(1, max|g|).
double fd_gradient_error(const FunctionalSpec& spec, const Ensemble& mu, double h = 1e-5);

/// Same, restricted to probes that leave every k-NN assignment unchanged.
/// `probes_used` receives the number of coordinates that were compared.
double fd_gradient_error_knn(const FunctionalSpec& spec, const Ensemble& mu, std::size_t k, double h,
                             std::size_t& probes_used);

struct SampledInequality {
  double min_convexity = 0.0;
  double min_smoothness = 0.0;
  std::size_t smoothness_violations = 0;
};

/// Draws `samples` seeded map pairs (mixing families, magnitudes and base
/// ensembles) and records the worst residual of each inequality.
SampledInequality sample_inequalities(const FunctionalSpec& spec, std::size_t dim, double L, std::size_t samples,
                                      std::uint64_t seed);

}  // namespace tmflow
