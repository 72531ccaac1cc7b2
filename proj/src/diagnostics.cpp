#include "tmflow/diagnostics.hpp"

#include "tmflow/errors.hpp"

#include <cmath>
#include <random>

namespace tmflow {

namespace {

double uniform_pm1(std::mt19937_64& rng) { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; }

AffineMap random_affine(std::size_t dim, double magnitude, std::mt19937_64& rng, bool symmetric) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd noise(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) noise(i, j) = uniform_pm1(rng);
  }
  if (symmetric) noise = 0.5 * (noise + noise.transpose()).eval();
  Eigen::VectorXd b(d);
  for (Eigen::Index i = 0; i < d; ++i) b[i] = magnitude * uniform_pm1(rng);
  return AffineMap{Eigen::MatrixXd::Identity(d, d) + magnitude * noise, b};
}

Positions radial_perturbation(const Positions& x, double magnitude, std::mt19937_64& rng) {
  const Eigen::Index d = x.cols();
  Eigen::RowVectorXd centre(d);
  for (Eigen::Index j = 0; j < d; ++j) centre[j] = uniform_pm1(rng);
  const double amplitude = uniform_pm1(rng);
  Positions out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::RowVectorXd offset = x.row(i) - centre;
    out.row(i) += magnitude * amplitude * std::exp(-offset.squaredNorm()) * offset;
  }
  return out;
}

struct InequalityTerms {
  double delta_f;    // F(T#μ) − F(S#μ)
  double linear;     // (1/N) Σ ⟨g(S(x_i)), T(x_i) − S(x_i)⟩
  double quadratic;  // (1/N) Σ ‖T(x_i) − S(x_i)‖²
};

InequalityTerms inequality_terms(const FunctionalSpec& spec, const MapSample& sample, const EvalOptions& opts) {
  const Ensemble s = sample.base.transported(sample.s_images);
  const Ensemble t = sample.base.transported(sample.t_images);
  const Evaluation at_s = evaluate(spec, s, opts);
  const double f_t = value(spec, t, opts);

  const Positions step = sample.t_images - sample.s_images;
  double linear = 0.0;
  double quadratic = 0.0;
  for (Eigen::Index i = 0; i < step.rows(); ++i) {
    linear += at_s.gradient.row(i).dot(step.row(i));
    quadratic += step.row(i).squaredNorm();
  }
  const double n = static_cast<double>(step.rows());
  return {f_t - at_s.value, linear / n, quadratic / n};
}

}  // namespace

std::optional<LyapunovRecord> lyapunov_gd(std::size_t n, double f_n, double f_star, double gamma,
                                          std::optional<double> d_n, std::optional<double> l1) {
  if (!d_n) return std::nullopt;
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  const double weight = static_cast<double>(n) * gamma;
  LyapunovRecord rec{n, weight * (f_n - f_star) + *d_n, f_n - f_star, *d_n, std::nullopt};
  if (n >= 1 && l1) rec.certified_bound = *l1 / weight;
  return rec;
}

std::optional<LyapunovRecord> lyapunov_acc(std::size_t n, double f_y, double f_star, double a_n,
                                           std::optional<double> d_z, std::optional<double> l1) {
  if (!d_z) return std::nullopt;
  if (!(a_n > 0.0)) throw ConfigError("a_n must be positive");
  LyapunovRecord rec{n, a_n * (f_y - f_star) + *d_z, f_y - f_star, *d_z, std::nullopt};
  if (n >= 1 && l1) rec.certified_bound = *l1 / a_n;
  return rec;
}

std::optional<RateFit> fit_rate(const std::vector<std::pair<double, double>>& series, double window_fraction) {
  if (!(window_fraction > 0.0 && window_fraction <= 1.0)) {
    throw ConfigError("window_fraction must lie in (0, 1]");
  }
  if (series.empty()) return std::nullopt;
  const std::size_t count = series.size();
  const auto width = static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(count)));
  const std::size_t first = count - std::min(width, count);

  std::vector<double> lx, ly;
  std::size_t used_first = count, used_last = 0;
  for (std::size_t i = first; i < count; ++i) {
    const auto [n, gap] = series[i];
    if (!(n > 0.0) || !(gap > 0.0) || !std::isfinite(gap)) continue;
    lx.push_back(std::log(n));
    ly.push_back(std::log(gap));
    used_first = std::min(used_first, i);
    used_last = i;
  }
  if (lx.size() < 10) return std::nullopt;

  const double m = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) return std::nullopt;
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.window = {used_first, used_last};
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double e = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

Positions AffineMap::apply(const Positions& x) const { return (x * A.transpose()).rowwise() + b.transpose(); }

MapSample sample_maps(const Ensemble& base, MapFamily family, double magnitude, std::uint64_t seed,
                      bool symmetric_linear) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) throw ConfigError("magnitude must be finite and >= 0");
  std::mt19937_64 rng(seed);
  if (family == MapFamily::affine) {
    AffineMap s = random_affine(base.dim(), magnitude, rng, symmetric_linear);
    AffineMap t = random_affine(base.dim(), magnitude, rng, symmetric_linear);
    Positions s_img = s.apply(base.positions());
    Positions t_img = t.apply(base.positions());
    return MapSample{base, std::move(s_img), std::move(t_img), std::make_pair(std::move(s), std::move(t))};
  }
  Positions s_img = radial_perturbation(base.positions(), magnitude, rng);
  Positions t_img = radial_perturbation(base.positions(), magnitude, rng);
  return MapSample{base, std::move(s_img), std::move(t_img), std::nullopt};
}

double check_convexity(const FunctionalSpec& spec, const MapSample& sample, const EvalOptions& opts) {
  const InequalityTerms t = inequality_terms(spec, sample, opts);
  return t.delta_f - t.linear;
}

double check_smoothness(const FunctionalSpec& spec, const MapSample& sample, double L, const EvalOptions& opts) {
  if (!(L >= 0.0) || !std::isfinite(L)) throw ConfigError("L must be finite and non-negative");
  const InequalityTerms t = inequality_terms(spec, sample, opts);
  return (t.linear + 0.5 * L * t.quadratic) - t.delta_f;
}

}  // namespace tmflow
