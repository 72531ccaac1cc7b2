#include "tmflow/checks.hpp"

#include "tmflow/diagnostics.hpp"
#include "tmflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace tmflow {

using nlohmann::json;

namespace {

constexpr double kFdTolerance = 1e-6;
constexpr double kKnnFdTolerance = 1e-3;
constexpr double kResidualTolerance = 1e-9;
constexpr double kLyapunovTolerance = 1e-10;
constexpr double kStressFactor = 0.7;

std::uint64_t mix(std::uint64_t seed, std::uint64_t i) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (i + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Ensemble gaussian_ensemble(std::size_t n, std::size_t d, std::uint64_t seed) {
  const auto dd = static_cast<Eigen::Index>(d);
  return sample_ensemble({Gaussian{Eigen::VectorXd::Zero(dd), Eigen::VectorXd::Ones(dd)}, seed}, n, d);
}

Ensemble uniform_ensemble(std::size_t n, std::size_t d, std::uint64_t seed) {
  const auto dd = static_cast<Eigen::Index>(d);
  return sample_ensemble({UniformBox{-Eigen::VectorXd::Ones(dd), Eigen::VectorXd::Ones(dd)}, seed}, n, d);
}

Positions probe(const Positions& p, Eigen::Index i, Eigen::Index c, double delta) {
  Positions q = p;
  q(i, c) += delta;
  return q;
}

void check_gradients(CheckReport& report, const CheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  double worst = 0.0;
  std::size_t cases = 0;
  for (std::size_t e = 0; e < 20; ++e) {
    const std::size_t n = 2 + rng() % 49;
    const std::size_t d = 1 + rng() % 3;
    const Ensemble mu = uniform_ensemble(n, d, mix(opts.seed, e));
    const auto dd = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd R = Eigen::MatrixXd::Random(dd, dd);
    const std::vector<FunctionalSpec> specs = {
        shifted_square(Eigen::VectorXd::Constant(dd, 0.3)),
        half_square(),
        custom_quadratic(R * R.transpose(), Eigen::VectorXd::LinSpaced(dd, -0.5, 0.5)),
        squared_distance_interaction(),
        scaled(2.5, squared_distance_interaction()),
        example1_functional(d),
    };
    for (const auto& spec : specs) {
      worst = std::max(worst, fd_gradient_error(spec, mu));
      ++cases;
    }
  }
  report.metrics["max_relative_fd_error"] = worst;
  report.metrics["smooth_cases"] = cases;
  if (!(worst <= kFdTolerance)) report.failures.push_back("smooth functional FD error above 1e-6");

  double worst_knn = 0.0;
  std::size_t probes = 0;
  for (std::size_t e = 0; e < 5; ++e) {
    const Ensemble mu = gaussian_ensemble(30, 2, mix(opts.seed ^ 0x5eedull, e));
    std::size_t used = 0;
    worst_knn = std::max(worst_knn, fd_gradient_error_knn(knn_neg_entropy(3), mu, 3, 1e-5, used));
    probes += used;
  }
  report.metrics["max_relative_fd_error_knn"] = worst_knn;
  report.metrics["knn_probes"] = probes;
  if (!(worst_knn <= kKnnFdTolerance)) report.failures.push_back("k-NN entropy FD error above 1e-3");
  if (probes == 0) report.failures.push_back("no assignment-stable k-NN probes");
}

struct NamedSpec {
  std::string name;
  FunctionalSpec spec;
  std::size_t dim;
  double L;
};

std::vector<NamedSpec> inequality_specs() {
  return {
      {"shifted_sq", shifted_square(Eigen::VectorXd::Constant(2, 1.0)), 2, 2.0},
      {"interaction", squared_distance_interaction(), 2, 4.0},
      {"example1", example1_functional(1), 1, 4.0},
  };
}

void check_inequalities(CheckReport& report, const CheckOptions& opts, bool smoothness) {
  std::uint64_t salt = 0;
  for (const NamedSpec& s : inequality_specs()) {
    double L = s.L;
    if (opts.stress) L = kStressFactor * smoothness_constant(s.spec).value();
    const SampledInequality res = sample_inequalities(s.spec, s.dim, L, opts.samples, mix(opts.seed, ++salt));
    if (smoothness) {
      report.metrics[s.name] = {{"L", L}, {"min_residual", res.min_smoothness}, {"violations", res.smoothness_violations}};
      if (!(res.min_smoothness >= -kResidualTolerance)) {
        report.failures.push_back(s.name + ": smoothness residual " + std::to_string(res.min_smoothness) +
                                  " with L = " + std::to_string(L));
      }
    } else {
      report.metrics[s.name] = {{"min_residual", res.min_convexity}};
      if (!(res.min_convexity >= -kResidualTolerance)) {
        report.failures.push_back(s.name + ": convexity residual " + std::to_string(res.min_convexity));
      }
    }
  }
  report.metrics["samples_per_functional"] = opts.samples;
}

void check_lyapunov(CheckReport& report, const CheckOptions& opts) {
  const double tau = 0.0025;
  const FunctionalSpec spec = example1_functional(1);
  const Ensemble init = uniform_ensemble(200, 1, opts.seed);
  DiagnosticsHooks hooks;
  hooks.reference = init.transported(Positions::Ones(200, 1));
  hooks.f_star = 0.0;
  hooks.record_xz = false;

  auto inspect = [&](const FlowTrace& trace, const std::string& name) {
    double max_increase = -std::numeric_limits<double>::infinity();
    double worst_slack = std::numeric_limits<double>::infinity();
    for (std::size_t n = 1; n < trace.records.size(); ++n) {
      const auto& r = trace.records[n];
      worst_slack = std::min(worst_slack, *r.certified_bound - *r.gap);
      if (n + 1 < trace.records.size()) {
        max_increase = std::max(max_increase, *trace.records[n + 1].lyapunov - *r.lyapunov);
      }
    }
    report.metrics[name] = {{"max_lyapunov_increase", max_increase}, {"min_certificate_slack", worst_slack}};
    if (max_increase > kLyapunovTolerance) report.failures.push_back(name + ": Lyapunov value increased");
    if (worst_slack < -kLyapunovTolerance) report.failures.push_back(name + ": gap exceeded its certificate");
  };
  inspect(run_gd(spec, init, {1.5 * tau, 2000}, hooks), "gd");
  inspect(run_accelerated(spec, init, 1.0 / tau, 2000, hooks), "accelerated");
}

void check_rates(CheckReport& report, const CheckOptions& opts) {
  std::vector<std::pair<double, double>> inv, inv_sq;
  for (int n = 1; n <= 1000; ++n) {
    inv.emplace_back(n, 1.0 / n);
    inv_sq.emplace_back(n, 3.0 / (static_cast<double>(n) * n));
  }
  const auto f1 = fit_rate(inv, 1.0);
  const auto f2 = fit_rate(inv_sq, 1.0);
  report.metrics["power_law_1"] = f1->slope;
  report.metrics["power_law_2"] = f2->slope;
  if (std::abs(f1->slope + 1.0) > 1e-9) report.failures.push_back("fit_rate did not recover slope -1");
  if (std::abs(f2->slope + 2.0) > 1e-9) report.failures.push_back("fit_rate did not recover slope -2");

  // certified envelopes: 1/n for GD, 1/n^2 accelerated
  const double tau = 0.0025;
  const FunctionalSpec spec = example1_functional(1);
  const Ensemble init = uniform_ensemble(200, 1, opts.seed);
  DiagnosticsHooks hooks;
  hooks.reference = init.transported(Positions::Ones(200, 1));
  hooks.f_star = 0.0;
  hooks.record_xz = false;
  auto envelope = [](const FlowTrace& t) {
    std::vector<std::pair<double, double>> s;
    for (const auto& r : t.records) {
      if (r.certified_bound) s.emplace_back(static_cast<double>(r.iter), *r.certified_bound);
    }
    return s;
  };
  const auto gd = fit_rate(envelope(run_gd(spec, init, {1.5 * tau, 2000}, hooks)), 0.5);
  const auto acc = fit_rate(envelope(run_accelerated(spec, init, 1.0 / tau, 2000, hooks)), 0.5);
  report.metrics["gd_envelope_slope"] = gd->slope;
  report.metrics["accelerated_envelope_slope"] = acc->slope;
  if (std::abs(gd->slope + 1.0) > 1e-6) report.failures.push_back("GD envelope is not O(1/n)");
  if (acc->slope > -1.99) report.failures.push_back("accelerated envelope is not O(1/n^2)");
}

}  // namespace

std::optional<Suite> suite_from_string(const std::string& name) {
  if (name == "gradients") return Suite::gradients;
  if (name == "convexity") return Suite::convexity;
  if (name == "smoothness") return Suite::smoothness;
  if (name == "lyapunov") return Suite::lyapunov;
  if (name == "rates") return Suite::rates;
  return std::nullopt;
}

std::string to_string(Suite s) {
  switch (s) {
    case Suite::gradients: return "gradients";
    case Suite::convexity: return "convexity";
    case Suite::smoothness: return "smoothness";
    case Suite::lyapunov: return "lyapunov";
    case Suite::rates: return "rates";
  }
  return "unknown";
}

json CheckReport::to_json() const {
  return {{"suite", to_string(suite)}, {"seed", seed}, {"passed", passed}, {"metrics", metrics}, {"failures", failures}};
}

FunctionalSpec example1_functional(std::size_t dim) {
  return sum({squared_distance_interaction(), shifted_square(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(dim)))});
}

FunctionalSpec example2_functional(double kappa, std::size_t k) {
  return sum({scaled(kappa, knn_neg_entropy(k)), half_square()});
}

double example2_fstar(double kappa, std::size_t dim) {
  return -(kappa * static_cast<double>(dim) / 2.0) * std::log(2.0 * std::numbers::pi * kappa);
}

double fd_gradient_error(const FunctionalSpec& spec, const Ensemble& mu, double h) {
  const GradientField g = gradient(spec, mu);
  const Positions& p = mu.positions();
  const double n = static_cast<double>(mu.size());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double up = value(spec, mu.transported(probe(p, i, c, h)));
      const double down = value(spec, mu.transported(probe(p, i, c, -h)));
      worst = std::max(worst, std::abs(g(i, c) - n * (up - down) / (2.0 * h)));
    }
  }
  return worst / std::max(1.0, g.cwiseAbs().maxCoeff());
}

double fd_gradient_error_knn(const FunctionalSpec& spec, const Ensemble& mu, std::size_t k, double h,
                             std::size_t& probes_used) {
  const GradientField g = gradient(spec, mu);
  const Positions& p = mu.positions();
  const KthNeighbors base = kth_neighbors(p, k);
  const double n = static_cast<double>(mu.size());
  double worst = 0.0;
  probes_used = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const Positions plus = probe(p, i, c, h);
      const Positions minus = probe(p, i, c, -h);
      if (kth_neighbors(plus, k).index != base.index || kth_neighbors(minus, k).index != base.index) continue;
      const double up = value(spec, mu.transported(plus));
      const double down = value(spec, mu.transported(minus));
      worst = std::max(worst, std::abs(g(i, c) - n * (up - down) / (2.0 * h)));
      ++probes_used;
    }
  }
  return worst / std::max(1.0, g.cwiseAbs().maxCoeff());
}

SampledInequality sample_inequalities(const FunctionalSpec& spec, std::size_t dim, double L, std::size_t samples,
                                      std::uint64_t seed) {
  static constexpr double kMagnitudes[] = {0.05, 0.2, 0.5, 1.0, 2.0};
  SampledInequality out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0};
  for (std::size_t s = 0; s < samples; ++s) {
    const std::uint64_t sseed = mix(seed, s);
    const std::size_t n = 5 + sseed % 46;
    const Ensemble base = s % 2 == 0 ? gaussian_ensemble(n, dim, sseed) : uniform_ensemble(n, dim, sseed);
    const MapFamily family = (s / 2) % 2 == 0 ? MapFamily::affine : MapFamily::radial_perturbation;
    const MapSample sample = sample_maps(base, family, kMagnitudes[s % 5], mix(sseed, 7));
    out.min_convexity = std::min(out.min_convexity, check_convexity(spec, sample));
    const double smooth = check_smoothness(spec, sample, L);
    out.min_smoothness = std::min(out.min_smoothness, smooth);
    if (smooth < -kResidualTolerance) ++out.smoothness_violations;
  }
  return out;
}

CheckReport run_check(Suite suite, const CheckOptions& opts) {
  CheckReport report;
  report.suite = suite;
  report.seed = opts.seed;
  switch (suite) {
    case Suite::gradients: check_gradients(report, opts); break;
    case Suite::convexity: check_inequalities(report, opts, false); break;
    case Suite::smoothness: check_inequalities(report, opts, true); break;
    case Suite::lyapunov: check_lyapunov(report, opts); break;
    case Suite::rates: check_rates(report, opts); break;
  }
  if (opts.stress) report.metrics["stress"] = true;
  report.passed = report.failures.empty();
  return report;
}

}  // namespace tmflow
