#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tmflow/checks.hpp"
#include "tmflow/diagnostics.hpp"
#include "tmflow/errors.hpp"
#include "tmflow/flows.hpp"

#include <cmath>

using namespace tmflow;

namespace {

Ensemble box(std::size_t n, std::size_t d, std::uint64_t seed) {
  const auto dd = static_cast<Eigen::Index>(d);
  return sample_ensemble({UniformBox{-Eigen::VectorXd::Ones(dd), Eigen::VectorXd::Ones(dd)}, seed}, n, d);
}

std::vector<std::pair<double, double>> series(int count, double (*f)(double)) {
  std::vector<std::pair<double, double>> s;
  for (int n = 1; n <= count; ++n) s.emplace_back(n, f(n));
  return s;
}

}  // namespace

TEST_CASE("GD Lyapunov value") {
  const auto r0 = lyapunov_gd(0, 5.0, 1.0, 0.1, 0.7);
  CHECK(r0->value == 0.7);
  CHECK_FALSE(r0->certified_bound.has_value());
  CHECK(lyapunov_gd(10, 2.0, 2.0, 0.1, 0.0)->value == 0.0);
  const auto r = lyapunov_gd(4, 3.0, 1.0, 0.25, 0.5, 2.0);
  CHECK(r->value == doctest::Approx(4 * 0.25 * 2.0 + 0.5));
  CHECK(*r->certified_bound == doctest::Approx(2.0 / (4 * 0.25)));
  CHECK_FALSE(lyapunov_gd(3, 1.0, 0.0, 0.1, std::nullopt).has_value());
}

TEST_CASE("accelerated Lyapunov value") {
  const MomentumSchedule a(4.0);
  const auto r0 = lyapunov_acc(0, 1.5, 0.5, a(0), 0.25);
  CHECK(r0->value == doctest::Approx(a(0) * 1.0 + 0.25));
  CHECK(lyapunov_acc(7, 0.5, 0.5, a(7), 0.0)->value == 0.0);
  const auto r = lyapunov_acc(5, 1.0, 0.0, a(5), 0.1, 0.9);
  CHECK(*r->certified_bound == doctest::Approx(0.9 / a(5)));
  CHECK_FALSE(lyapunov_acc(5, 1.0, 0.0, a(5), std::nullopt).has_value());
}

TEST_CASE("fit_rate recovers exact power laws") {
  const auto f1 = fit_rate(series(1000, [](double n) { return 1.0 / n; }), 1.0);
  REQUIRE(f1);
  CHECK(std::abs(f1->slope + 1.0) <= 1e-9);
  const auto f2 = fit_rate(series(1000, [](double n) { return 3.0 / (n * n); }), 0.5);
  REQUIRE(f2);
  CHECK(std::abs(f2->slope + 2.0) <= 1e-9);
  CHECK(std::abs(f2->intercept - std::log(3.0)) <= 1e-9);
  CHECK(f2->residual <= 1e-9);
  CHECK(f2->window.first == 500);
  CHECK(f2->window.second == 999);
}

TEST_CASE("fit_rate on a geometric series") {
  auto geometric = [](double n) { return 2.0 * std::pow(0.99, n); };
  const auto small = fit_rate(series(400, geometric), 0.25);
  const auto large = fit_rate(series(400, geometric), 0.75);
  REQUIRE(small);
  REQUIRE(large);
  CHECK(small->slope < large->slope);
  CHECK(large->residual > 1e-2);
}

TEST_CASE("fit_rate drops non-positive gaps and needs ten points") {
  std::vector<std::pair<double, double>> s = series(30, [](double n) { return 1.0 / n; });
  for (std::size_t i = 0; i < s.size(); i += 2) s[i].second = 0.0;
  const auto fit = fit_rate(s, 1.0);
  REQUIRE(fit);
  CHECK(std::abs(fit->slope + 1.0) <= 1e-9);
  CHECK_FALSE(fit_rate(series(9, [](double n) { return 1.0 / n; }), 1.0).has_value());
  CHECK_THROWS_AS(fit_rate(s, 0.0), ConfigError);
  CHECK_THROWS_AS(fit_rate(s, 1.5), ConfigError);
}

TEST_CASE("zero-magnitude affine maps are the identity") {
  const Ensemble base = box(20, 2, 1);
  const MapSample m = sample_maps(base, MapFamily::affine, 0.0, 5);
  CHECK(m.s_images == base.positions());
  CHECK(m.t_images == base.positions());
}

TEST_CASE("map sampling is deterministic") {
  const Ensemble base = box(20, 3, 1);
  for (auto family : {MapFamily::affine, MapFamily::radial_perturbation}) {
    const MapSample a = sample_maps(base, family, 0.5, 42);
    const MapSample b = sample_maps(base, family, 0.5, 42);
    CHECK(a.s_images == b.s_images);
    CHECK(a.t_images == b.t_images);
    CHECK(a.t_images != sample_maps(base, family, 0.5, 43).t_images);
  }
}

TEST_CASE("affine images come from the recorded maps") {
  const Ensemble base = box(15, 2, 3);
  const MapSample m = sample_maps(base, MapFamily::affine, 0.3, 8);
  REQUIRE(m.affine);
  const Eigen::MatrixXd A = m.affine->second.A;
  const Eigen::VectorXd b = m.affine->second.b;
  for (Eigen::Index i = 0; i < 15; ++i) {
    const Eigen::VectorXd x = base.positions().row(i).transpose();
    CHECK((m.t_images.row(i).transpose() - (A * x + b)).norm() <= 1e-14);
  }
}

TEST_CASE("symmetric affine maps near the identity are positive definite") {
  const Ensemble base = box(10, 2, 3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MapSample m = sample_maps(base, MapFamily::affine, 0.3, seed, true);
    for (const AffineMap* map : {&m.affine->first, &m.affine->second}) {
      CHECK((map->A - map->A.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK(map->A.determinant() > 0.0);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(map->A).eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("inequality residuals vanish when S = T") {
  const Ensemble base = box(20, 2, 3);
  MapSample m = sample_maps(base, MapFamily::radial_perturbation, 0.7, 1);
  m.t_images = m.s_images;
  for (const auto& spec : {example1_functional(2), squared_distance_interaction(), half_square()}) {
    CHECK(check_convexity(spec, m) == 0.0);
    CHECK(check_smoothness(spec, m, 4.0) == 0.0);
  }
}

TEST_CASE("convexity residual is the negated zero-L smoothness residual") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Ensemble base = box(12, 1 + seed % 3, seed);
    const MapSample m =
        sample_maps(base, seed % 2 ? MapFamily::affine : MapFamily::radial_perturbation, 0.5, seed + 1);
    for (const auto& spec : {example1_functional(1 + seed % 3), squared_distance_interaction()}) {
      CHECK(check_convexity(spec, m) == -check_smoothness(spec, m, 0.0));
    }
  }
}

TEST_CASE("convexity holds for the potential and the interaction") {
  const auto pot = sample_inequalities(shifted_square(Eigen::VectorXd::Constant(2, 1.0)), 2, 2.0, 500, 1);
  CHECK(pot.min_convexity >= -1e-9);
  const auto inter = sample_inequalities(squared_distance_interaction(), 2, 4.0, 500, 2);
  CHECK(inter.min_convexity >= -1e-9);
}

TEST_CASE("smoothness holds at the certified constants") {
  CHECK(sample_inequalities(shifted_square(Eigen::VectorXd::Constant(2, 1.0)), 2, 2.0, 500, 3).min_smoothness >=
        -1e-9);
  CHECK(sample_inequalities(squared_distance_interaction(), 2, 4.0, 500, 4).min_smoothness >= -1e-9);
  CHECK(sample_inequalities(example1_functional(1), 1, 4.0, 500, 5).min_smoothness >= -1e-9);
}

TEST_CASE("interaction smoothness is tight at 2, not at 4") {
  // Var(T - S) <= E|T - S|^2 holds with room to spare at 2.8
  CHECK(sample_inequalities(squared_distance_interaction(), 2, 2.8, 500, 6).smoothness_violations == 0);
  CHECK(sample_inequalities(squared_distance_interaction(), 2, 1.4, 500, 6).smoothness_violations > 0);
  CHECK(sample_inequalities(example1_functional(1), 1, 2.8, 500, 6).smoothness_violations > 0);
}

TEST_CASE("suites are deterministic") {
  for (auto suite : {Suite::convexity, Suite::smoothness, Suite::gradients}) {
    CHECK(run_check(suite, {7, false, 100}).to_json() == run_check(suite, {7, false, 100}).to_json());
  }
}

TEST_CASE("property suites pass and the stress probe fails") {
  for (auto suite : {Suite::gradients, Suite::convexity, Suite::smoothness, Suite::lyapunov, Suite::rates}) {
    const CheckReport r = run_check(suite, {1, false, 500});
    CHECK_MESSAGE(r.passed, r.to_json().dump());
  }
  const CheckReport stress = run_check(Suite::smoothness, {1, true, 500});
  CHECK_FALSE(stress.passed);
  CHECK_FALSE(stress.failures.empty());
}

TEST_CASE("suite names round-trip") {
  for (auto suite : {Suite::gradients, Suite::convexity, Suite::smoothness, Suite::lyapunov, Suite::rates}) {
    CHECK(suite_from_string(to_string(suite)) == suite);
  }
  CHECK_FALSE(suite_from_string("momenta").has_value());
}
