#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tmflow/ensemble.hpp"
#include "tmflow/errors.hpp"
#include "tmflow/knn.hpp"

#include <cmath>

using namespace tmflow;

namespace {

Ensemble line(std::initializer_list<double> xs) {
  Positions p(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  return Ensemble(p);
}

SamplerSpec box(std::size_t d, std::uint64_t seed) {
  const auto dd = static_cast<Eigen::Index>(d);
  return {UniformBox{-Eigen::VectorXd::Ones(dd), Eigen::VectorXd::Ones(dd)}, seed};
}

}  // namespace

TEST_CASE("grid sampler hits both endpoints") {
  const Ensemble e = sample_ensemble({Grid{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), {3}}, 0}, 3, 1);
  CHECK(e.positions()(0, 0) == 0.0);
  CHECK(e.positions()(1, 0) == 0.5);
  CHECK(e.positions()(2, 0) == 1.0);
}

TEST_CASE("grid sampler enumerates the first coordinate fastest") {
  const Ensemble e =
      sample_ensemble({Grid{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), {2, 3}}, 0}, 6, 2);
  CHECK(e.positions()(1, 0) == 1.0);
  CHECK(e.positions()(1, 1) == 0.0);
  CHECK(e.positions()(2, 0) == 0.0);
  CHECK(e.positions()(2, 1) == 0.5);
  CHECK_THROWS_AS(sample_ensemble({Grid{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), {2, 3}}, 0}, 5, 2),
                  ConfigError);
}

TEST_CASE("sampling is a pure function of spec, n and dim") {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const Ensemble a = sample_ensemble(box(3, seed), 40, 3);
    const Ensemble b = sample_ensemble(box(3, seed), 40, 3);
    CHECK(a.positions() == b.positions());
    CHECK_FALSE(a.coupled_with(b));
  }
  const Gaussian g{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
  CHECK(sample_ensemble({g, 5}, 30, 2).positions() == sample_ensemble({g, 5}, 30, 2).positions());
  CHECK(sample_ensemble({g, 5}, 30, 2).positions() != sample_ensemble({g, 6}, 30, 2).positions());
}

TEST_CASE("gaussian sample mean is within Monte Carlo error") {
  const Ensemble e = sample_ensemble({Gaussian{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}, 11}, 10000, 2);
  const Eigen::VectorXd m = mean(e);
  CHECK(std::abs(m(0)) < 0.05);
  CHECK(std::abs(m(1)) < 0.05);
  // second moment of N(0, I_2) is 2; standard error about 0.03
  CHECK(std::abs(second_moment(e) - 2.0) < 0.15);
}

TEST_CASE("gaussian sampler honours mean and diagonal covariance") {
  Eigen::VectorXd mu(2), var(2);
  mu << 3.0, -1.0;
  var << 4.0, 0.25;
  const Ensemble e = sample_ensemble({Gaussian{mu, var}, 3}, 20000, 2);
  const Eigen::VectorXd m = mean(e);
  CHECK(m(0) == doctest::Approx(3.0).epsilon(0.02));
  CHECK(m(1) == doctest::Approx(-1.0).epsilon(0.02));
  const Positions c = e.positions().rowwise() - m.transpose();
  CHECK(c.col(0).squaredNorm() / 20000 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(c.col(1).squaredNorm() / 20000 == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("uniform box stays inside its bounds") {
  Eigen::VectorXd lo(2), hi(2);
  lo << 0.0, 5.0;
  hi << 1.0, 7.0;
  const Ensemble e = sample_ensemble({UniformBox{lo, hi}, 2}, 1000, 2);
  CHECK(e.positions().col(0).minCoeff() >= 0.0);
  CHECK(e.positions().col(0).maxCoeff() <= 1.0);
  CHECK(e.positions().col(1).minCoeff() >= 5.0);
  CHECK(e.positions().col(1).maxCoeff() <= 7.0);
}

TEST_CASE("invalid sampler specs are rejected") {
  CHECK_THROWS_AS(validate(box(2, 0), 3), ConfigError);
  CHECK_THROWS_AS(validate({UniformBox{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)}, 0}, 1), ConfigError);
  CHECK_THROWS_AS(validate({Gaussian{Eigen::VectorXd::Zero(1), -Eigen::VectorXd::Ones(1)}, 0}, 1), ConfigError);
  CHECK_THROWS_AS(sample_ensemble(box(1, 0), 0, 1), ConfigError);
}

TEST_CASE("discrepancy hand values") {
  const Ensemble a = line({0.0});
  CHECK(discrepancy(a, a.transported(Positions::Constant(1, 1, 1.0))) == 0.5);

  const Ensemble b = line({0.0, 2.0});
  CHECK(discrepancy(b, b.transported(Positions::Constant(2, 1, 1.0))) == 0.5);
  CHECK(discrepancy(b, b) == 0.0);
}

TEST_CASE("discrepancy requires coupled ensembles") {
  const Ensemble a = line({0.0, 1.0});
  const Ensemble b = line({0.0, 1.0});
  CHECK_THROWS_AS(discrepancy(a, b), CouplingError);
  CHECK_THROWS_AS(a.transported(Positions::Zero(3, 1)), CouplingError);
}

TEST_CASE("discrepancy is symmetric, non-negative and zero on the diagonal") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const Ensemble a = sample_ensemble(box(1 + seed % 3, seed), 3 + seed, 1 + seed % 3);
    const Ensemble b = a.transported(sample_ensemble(box(1 + seed % 3, seed + 100), 3 + seed, 1 + seed % 3).positions());
    CHECK(discrepancy(a, b) == discrepancy(b, a));
    CHECK(discrepancy(a, b) >= 0.0);
    CHECK(discrepancy(a, a) == 0.0);
  }
}

TEST_CASE("mean and second moment") {
  CHECK(mean(line({0.0, 2.0}))(0) == 1.0);
  CHECK(mean(line({4.5}))(0) == 4.5);
  CHECK(mean(line({0.0, 0.5, 1.0}))(0) == 0.5);
  CHECK(second_moment(line({0.0, 2.0})) == 2.0);
}

TEST_CASE("transported keeps the lineage") {
  const Ensemble a = line({0.0, 1.0});
  const Ensemble b = a.transported(Positions::Constant(2, 1, 3.0));
  CHECK(a.coupled_with(b));
  CHECK(a.tag() == b.tag());
  CHECK_FALSE(a.coupled_with(line({0.0, 1.0})));
}

TEST_CASE("ensembles reject non-finite or empty positions") {
  CHECK_THROWS_AS(Ensemble{Positions(0, 1)}, ConfigError);
  Positions p = Positions::Zero(2, 1);
  p(1, 0) = std::nan("");
  CHECK_THROWS_AS(Ensemble{p}, ConfigError);
}

TEST_CASE("grid neighbour search agrees with brute force") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const std::size_t d = 1 + seed % 3;
    const std::size_t k = 1 + seed % 6;
    const Positions p = sample_ensemble(box(d, seed), 300, d).positions();
    const KthNeighbors a = kth_neighbors(p, k, NeighborSearch::brute_force);
    const KthNeighbors b = kth_neighbors(p, k, NeighborSearch::grid);
    CHECK(a.index == b.index);
    CHECK(a.distance == b.distance);
    CHECK(a.nearest == b.nearest);
  }
}

TEST_CASE("neighbour ties go to the smaller index") {
  // particle 1 is equidistant from 0 and 2
  Positions p(3, 1);
  p << 0.0, 1.0, 2.0;
  for (auto method : {NeighborSearch::brute_force, NeighborSearch::grid}) {
    const KthNeighbors nn = kth_neighbors(p, 1, method);
    CHECK(nn.index[1] == 0);
    CHECK(nn.index[0] == 1);
    CHECK(nn.index[2] == 1);
    CHECK(kth_neighbors(p, 2, method).index[1] == 2);
  }
  // tie-heavy lattice
  const Positions g =
      sample_ensemble({Grid{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), {10, 10}}, 0}, 100, 2).positions();
  for (std::size_t k = 1; k <= 8; ++k) {
    CHECK(kth_neighbors(g, k, NeighborSearch::brute_force).index == kth_neighbors(g, k, NeighborSearch::grid).index);
  }
}

TEST_CASE("neighbour search requires 1 <= k < N") {
  const Positions p = Positions::Zero(3, 1);
  CHECK_THROWS_AS(kth_neighbors(p, 0), ConfigError);
  CHECK_THROWS_AS(kth_neighbors(p, 3), ConfigError);
}
