#pragma once

#include "tmflow/ensemble.hpp"
#include "tmflow/errors.hpp"
#include "tmflow/functionals.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tmflow {

enum class Method { gd, accelerated, both, ode, accelerated_ode };

/// X*(x) ≡ center, so μ* is a Dirac mass and D(·, μ*) is computable.
struct ConstantMapReference {
  Eigen::VectorXd center;
};

/// Only F* is known; discrepancy and Lyapunov columns stay blank.
struct AnalyticFStar {
  double value = 0.0;
};

using Reference = std::variant<ConstantMapReference, AnalyticFStar>;

/// Continuous-time settings; each τ of the config is used as the RK4 step.
struct OdeSettings {
  double t0 = 1e-3;
  double t_end = 1.0;
  std::optional<double> r;
};

struct ExperimentConfig {
  std::string name;
  FunctionalSpec functional;
  SamplerSpec sampler;
  std::size_t n_particles = 0;
  std::size_t dim = 0;
  std::vector<double> tau;
  Method method = Method::both;
  std::size_t steps = 0;
  std::optional<Reference> reference;
  std::optional<std::size_t> knn_k;
  std::optional<OdeSettings> ode;
  std::string output_dir;
};

/// Raised with every field-level problem found in a document.
class ConfigParseError : public ConfigError {
 public:
  explicit ConfigParseError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Parses and validates a JSON experiment document. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Serialised forms mirroring the parser's schema.
nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const FunctionalSpec& spec);
nlohmann::json to_json(const SamplerSpec& spec);

std::string to_string(Method m);

/// The functional with every neg_entropy_knn term's k replaced by knn_k (if set).
FunctionalSpec effective_functional(const ExperimentConfig& cfg);

}  // namespace tmflow
