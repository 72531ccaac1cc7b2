#include "tmflow/functionals.hpp"

#include "tmflow/errors.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace tmflow {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kCoincidenceTolerance = 1e-12;

void require_dim(const Eigen::VectorXd& v, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(v.size()) != dim) {
    throw ConfigError(std::string(what) + " has length " + std::to_string(v.size()) + ", expected " +
                      std::to_string(dim));
  }
}

void require_matching(const FunctionalSpec& spec, const Ensemble& mu) { validate(spec, mu.dim()); }

KthNeighbors entropy_neighbors(const Ensemble& mu, std::size_t k, const EvalOptions& opts) {
  if (k >= mu.size()) {
    throw ConfigError("neg_entropy_knn needs k < N (k = " + std::to_string(k) + ", N = " + std::to_string(mu.size()) +
                      ")");
  }
  KthNeighbors nn = kth_neighbors(mu.positions(), k, opts.search);
  for (std::size_t i = 0; i < nn.nearest.size(); ++i) {
    if (nn.nearest[i] <= kCoincidenceTolerance) {
      throw DegenerateConfigurationError("particle " + std::to_string(i) +
                                         " coincides with another; k-NN entropy is undefined");
    }
  }
  return nn;
}

double entropy_from_neighbors(const KthNeighbors& nn, std::size_t n, std::size_t d, std::size_t k) {
  double log_sum = 0.0;
  for (double eps : nn.distance) log_sum += std::log(eps);
  const double nd = static_cast<double>(n);
  return boost::math::digamma(nd) - boost::math::digamma(static_cast<double>(k)) + std::log(unit_ball_volume(d)) +
         static_cast<double>(d) / nd * log_sum;
}

// g_i = N ∂(−Ĥ)/∂x_i. Term i pulls x_i toward its k-th neighbour; the
// neighbour receives the opposite vector.
GradientField neg_entropy_gradient(const Positions& p, const KthNeighbors& nn) {
  const Eigen::Index n = p.rows();
  const double d = static_cast<double>(p.cols());
  GradientField g = GradientField::Zero(n, p.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto j = static_cast<Eigen::Index>(nn.index[i]);
    const double inv = d / (nn.distance[i] * nn.distance[i]);
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double v = inv * (p(i, c) - p(j, c));
      g(i, c) -= v;
      g(j, c) += v;
    }
  }
  return g;
}

double potential_value(const Ensemble& mu, const auto& per_particle) {
  const Positions& p = mu.positions();
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) s += per_particle(p.row(i));
  return s / static_cast<double>(p.rows());
}

// (1/(2N²)) Σ_i Σ_j ‖x_i − x_j‖², summed over all ordered pairs.
double interaction_value(const Positions& p) {
  const Eigen::Index n = p.rows();
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      double sq = 0.0;
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        const double diff = p(i, c) - p(j, c);
        sq += diff * diff;
      }
      row += sq;
    }
    s += row;
  }
  const double nd = static_cast<double>(n);
  return s / (2.0 * nd * nd);
}

Evaluation eval_impl(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts, bool want_value,
                     bool want_gradient) {
  const Positions& p = mu.positions();
  const Eigen::Index n = p.rows();
  const Eigen::Index d = p.cols();
  Evaluation out{0.0, GradientField()};
  if (want_gradient) out.gradient = GradientField::Zero(n, d);

  std::visit(
      overloaded{
          [&](const ShiftedSquare& s) {
            const Eigen::RowVectorXd c = s.center.transpose();
            if (want_value) {
              out.value = potential_value(mu, [&](const auto& x) { return (x - c).squaredNorm(); });
            }
            if (want_gradient) out.gradient = 2.0 * (p.rowwise() - c);
          },
          [&](const HalfSquare&) {
            if (want_value) out.value = potential_value(mu, [](const auto& x) { return 0.5 * x.squaredNorm(); });
            if (want_gradient) out.gradient = p;
          },
          [&](const CustomQuadratic& q) {
            if (want_value) {
              out.value = potential_value(mu, [&](const auto& x) {
                const Eigen::VectorXd xv = x.transpose();
                return xv.dot(q.A * xv) + q.b.dot(xv);
              });
            }
            if (want_gradient) {
              const Eigen::MatrixXd sym = q.A + q.A.transpose();
              out.gradient = (p * sym.transpose()).rowwise() + q.b.transpose();
            }
          },
          [&](const SquaredDistanceInteraction&) {
            if (want_value) out.value = interaction_value(p);
            if (want_gradient) {
              // (1/N) Σ_j 2(x_i − x_j) = 2(x_i − m)
              const Eigen::RowVectorXd m = mean(mu).transpose();
              out.gradient = 2.0 * (p.rowwise() - m);
            }
          },
          [&](const KnnNegEntropy& e) {
            const KthNeighbors nn = entropy_neighbors(mu, e.k, opts);
            if (want_value) out.value = -entropy_from_neighbors(nn, mu.size(), mu.dim(), e.k);
            if (want_gradient) out.gradient = neg_entropy_gradient(p, nn);
          },
          [&](const Scaled& s) {
            Evaluation inner = eval_impl(*s.inner, mu, opts, want_value, want_gradient);
            out.value = s.factor * inner.value;
            if (want_gradient) out.gradient = s.factor * inner.gradient;
          },
          [&](const Sum& s) {
            for (const FunctionalSpec& term : s.terms) {
              Evaluation t = eval_impl(term, mu, opts, want_value, want_gradient);
              out.value += t.value;
              if (want_gradient) out.gradient += t.gradient;
            }
          },
      },
      spec.kind);
  return out;
}

}  // namespace

FunctionalSpec shifted_square(Eigen::VectorXd center) { return {ShiftedSquare{std::move(center)}}; }
FunctionalSpec half_square() { return {HalfSquare{}}; }
FunctionalSpec custom_quadratic(Eigen::MatrixXd A, Eigen::VectorXd b) {
  return {CustomQuadratic{std::move(A), std::move(b)}};
}
FunctionalSpec squared_distance_interaction() { return {SquaredDistanceInteraction{}}; }
FunctionalSpec knn_neg_entropy(std::size_t k) { return {KnnNegEntropy{k}}; }
FunctionalSpec scaled(double factor, FunctionalSpec inner) {
  return {Scaled{factor, std::make_shared<const FunctionalSpec>(std::move(inner))}};
}
FunctionalSpec sum(std::vector<FunctionalSpec> terms) { return {Sum{std::move(terms)}}; }

void validate(const FunctionalSpec& spec, std::size_t dim) {
  std::visit(overloaded{
                 [&](const ShiftedSquare& s) {
                   require_dim(s.center, dim, "shifted_sq center");
                   if (!s.center.allFinite()) throw ConfigError("shifted_sq center must be finite");
                 },
                 [](const HalfSquare&) {},
                 [&](const CustomQuadratic& q) {
                   const auto d = static_cast<Eigen::Index>(dim);
                   if (q.A.rows() != d || q.A.cols() != d) {
                     throw ConfigError("custom_quadratic A must be " + std::to_string(dim) + "x" + std::to_string(dim));
                   }
                   require_dim(q.b, dim, "custom_quadratic b");
                   if (!q.A.allFinite() || !q.b.allFinite()) throw ConfigError("custom_quadratic entries must be finite");
                   const double scale = d > 0 ? std::max(1.0, q.A.cwiseAbs().maxCoeff()) : 1.0;
                   if (((q.A - q.A.transpose()).cwiseAbs().array() > 1e-12 * scale).any()) {
                     throw ConfigError("custom_quadratic A must be symmetric");
                   }
                   if (d > 0) {
                     Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.A, Eigen::EigenvaluesOnly);
                     if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
                       throw ConfigError("custom_quadratic A must be positive semidefinite");
                     }
                   }
                 },
                 [](const SquaredDistanceInteraction&) {},
                 [](const KnnNegEntropy& e) {
                   if (e.k < 1) throw ConfigError("neg_entropy_knn k must be at least 1");
                 },
                 [&](const Scaled& s) {
                   if (!(s.factor > 0.0) || !std::isfinite(s.factor)) {
                     throw ConfigError("scaled factor must be positive and finite");
                   }
                   if (!s.inner) throw ConfigError("scaled needs an inner functional");
                   validate(*s.inner, dim);
                 },
                 [&](const Sum& s) {
                   if (s.terms.empty()) throw ConfigError("sum needs at least one term");
                   for (const auto& t : s.terms) validate(t, dim);
                 },
             },
             spec.kind);
}

double value(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts) {
  require_matching(spec, mu);
  return eval_impl(spec, mu, opts, true, false).value;
}

GradientField gradient(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts) {
  require_matching(spec, mu);
  return eval_impl(spec, mu, opts, false, true).gradient;
}

Evaluation evaluate(const FunctionalSpec& spec, const Ensemble& mu, const EvalOptions& opts) {
  require_matching(spec, mu);
  return eval_impl(spec, mu, opts, true, true);
}

double knn_entropy(const Ensemble& mu, std::size_t k, const EvalOptions& opts) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const KthNeighbors nn = entropy_neighbors(mu, k, opts);
  return entropy_from_neighbors(nn, mu.size(), mu.dim(), k);
}

double unit_ball_volume(std::size_t d) {
  const double half = static_cast<double>(d) / 2.0;
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

std::optional<double> smoothness_constant(const FunctionalSpec& spec) {
  // Raw constants may be 0 for affine pieces; only the top level requires L > 0.
  struct Raw {
    static std::optional<double> of(const FunctionalSpec& s) {
      return std::visit(overloaded{
                            [](const ShiftedSquare&) -> std::optional<double> { return 2.0; },
                            [](const HalfSquare&) -> std::optional<double> { return 1.0; },
                            [](const CustomQuadratic& q) -> std::optional<double> {
                              if (q.A.size() == 0) return 0.0;
                              Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q.A, Eigen::EigenvaluesOnly);
                              return std::max(0.0, 2.0 * es.eigenvalues().maxCoeff());
                            },
                            [](const SquaredDistanceInteraction&) -> std::optional<double> { return 2.0; },
                            [](const KnnNegEntropy&) -> std::optional<double> { return std::nullopt; },
                            [](const Scaled& sc) -> std::optional<double> {
                              auto inner = of(*sc.inner);
                              if (!inner) return std::nullopt;
                              return sc.factor * *inner;
                            },
                            [](const Sum& sm) -> std::optional<double> {
                              double total = 0.0;
                              for (const auto& t : sm.terms) {
                                auto l = of(t);
                                if (!l) return std::nullopt;
                                total += *l;
                              }
                              return total;
                            },
                        },
                        s.kind);
    }
  };
  auto l = Raw::of(spec);
  if (!l || !(*l > 0.0)) return std::nullopt;
  return l;
}

bool has_entropy_term(const FunctionalSpec& spec) {
  return std::visit(overloaded{
                        [](const KnnNegEntropy&) { return true; },
                        [](const Scaled& s) { return has_entropy_term(*s.inner); },
                        [](const Sum& s) {
                          for (const auto& t : s.terms) {
                            if (has_entropy_term(t)) return true;
                          }
                          return false;
                        },
                        [](const auto&) { return false; },
                    },
                    spec.kind);
}

}  // namespace tmflow
