#include "tmflow/ensemble.hpp"

#include "tmflow/errors.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace tmflow {

namespace {

LineageTag fresh_tag() {
  static std::atomic<std::uint64_t> counter{0};
  return LineageTag{++counter};
}

void require_valid(const Positions& p) {
  if (p.rows() < 1 || p.cols() < 1) {
    throw ConfigError("ensemble needs at least one particle and one dimension");
  }
  if (!p.allFinite()) {
    throw ConfigError("ensemble positions must be finite");
  }
}

// Bit-level conversions so samples do not depend on the standard library's
// distribution implementations.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(std::mt19937_64& rng) {
  double u1 = 0.0;
  do {
    u1 = uniform01(rng);
  } while (u1 == 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void require_dim(const Eigen::VectorXd& v, std::size_t dim, const char* field) {
  if (static_cast<std::size_t>(v.size()) != dim) {
    throw ConfigError(std::string("sampler field '") + field + "' has length " + std::to_string(v.size()) +
                      ", expected " + std::to_string(dim));
  }
  if (!v.allFinite()) throw ConfigError(std::string("sampler field '") + field + "' must be finite");
}

}  // namespace

Ensemble::Ensemble(Positions positions) : Ensemble(std::move(positions), fresh_tag()) {}

Ensemble::Ensemble(Positions positions, LineageTag tag) : positions_(std::move(positions)), tag_(tag) {
  require_valid(positions_);
}

Ensemble Ensemble::transported(Positions positions) const {
  if (positions.rows() != positions_.rows() || positions.cols() != positions_.cols()) {
    throw CouplingError("transported positions must keep the shape of the base ensemble");
  }
  return Ensemble(std::move(positions), tag_);
}

void validate(const SamplerSpec& spec, std::size_t dim) {
  if (dim < 1) throw ConfigError("dim must be at least 1");
  std::visit(
      [dim](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, UniformBox>) {
          require_dim(s.lo, dim, "lo");
          require_dim(s.hi, dim, "hi");
          if (!(s.lo.array() < s.hi.array()).all()) throw ConfigError("uniform_box requires lo < hi componentwise");
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          require_dim(s.mean, dim, "mean");
          require_dim(s.cov_diag, dim, "cov_diag");
          if (!(s.cov_diag.array() > 0.0).all()) throw ConfigError("gaussian requires cov_diag > 0");
        } else {
          require_dim(s.lo, dim, "lo");
          require_dim(s.hi, dim, "hi");
          if (s.counts.size() != dim) throw ConfigError("grid counts must have one entry per dimension");
          for (std::size_t c : s.counts) {
            if (c < 1) throw ConfigError("grid counts must be at least 1");
          }
          if (!(s.lo.array() < s.hi.array()).all()) throw ConfigError("grid requires lo < hi componentwise");
        }
      },
      spec.kind);
}

Ensemble sample_ensemble(const SamplerSpec& spec, std::size_t n, std::size_t dim) {
  if (n < 1) throw ConfigError("n must be at least 1");
  validate(spec, dim);

  Positions p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  std::mt19937_64 rng(spec.seed);

  if (const auto* box = std::get_if<UniformBox>(&spec.kind)) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        p(i, j) = box->lo[j] + (box->hi[j] - box->lo[j]) * uniform01(rng);
      }
    }
  } else if (const auto* g = std::get_if<Gaussian>(&spec.kind)) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        p(i, j) = g->mean[j] + std::sqrt(g->cov_diag[j]) * standard_normal(rng);
      }
    }
  } else {
    const auto& grid = std::get<Grid>(spec.kind);
    std::size_t total = 1;
    for (std::size_t c : grid.counts) total *= c;
    if (total != n) {
      throw ConfigError("grid has " + std::to_string(total) + " nodes but n = " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rest = i;
      for (std::size_t j = 0; j < dim; ++j) {
        const std::size_t c = grid.counts[j];
        const std::size_t k = rest % c;
        rest /= c;
        const auto jj = static_cast<Eigen::Index>(j);
        p(static_cast<Eigen::Index>(i), jj) =
            c == 1 ? grid.lo[jj]
                   : grid.lo[jj] + (grid.hi[jj] - grid.lo[jj]) * static_cast<double>(k) / static_cast<double>(c - 1);
      }
    }
  }
  return Ensemble(std::move(p));
}

double discrepancy(const Ensemble& a, const Ensemble& b) {
  if (!a.coupled_with(b)) {
    throw CouplingError("discrepancy requires coupled ensembles (same base sample, N and d)");
  }
  const Positions& pa = a.positions();
  const Positions& pb = b.positions();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pa.rows(); ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < pa.cols(); ++j) {
      const double diff = pa(i, j) - pb(i, j);
      sq += diff * diff;
    }
    sum += sq;
  }
  return sum / (2.0 * static_cast<double>(a.size()));
}

Eigen::VectorXd mean(const Ensemble& a) {
  const Positions& p = a.positions();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) m[j] += p(i, j);
  }
  return m / static_cast<double>(p.rows());
}

double second_moment(const Ensemble& a) {
  const Positions& p = a.positions();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) sum += p(i, j) * p(i, j);
  }
  return sum / static_cast<double>(p.rows());
}

}  // namespace tmflow
