// Acceptance criteria 1-10. One line per criterion; exit status is nonzero
// if any criterion fails.

#include "tmflow/checks.hpp"
#include "tmflow/config.hpp"
#include "tmflow/experiment.hpp"
#include "tmflow/flows.hpp"
#include "tmflow/functionals.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

using namespace tmflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kConfigs = fs::path(TMFLOW_SOURCE_DIR) / "configs";

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Ensemble example1_initial() {
  const ExperimentConfig cfg = load_config(kConfigs / "example1.cfg");
  return sample_ensemble(cfg.sampler, cfg.n_particles, cfg.dim);
}

DiagnosticsHooks example1_hooks(const Ensemble& init) {
  DiagnosticsHooks h;
  h.f_star = 0.0;
  h.reference = init.transported(Positions::Ones(static_cast<Eigen::Index>(init.size()), 1));
  h.record_xz = false;
  return h;
}

Outcome gd_certificate() {
  const double tau = 0.0025, gamma = 1.5 * tau;
  const Ensemble init = example1_initial();
  const FlowTrace t = run_gd(example1_functional(1), init, {gamma, 2000}, example1_hooks(init));
  const auto& r1 = t.records.at(1);
  const double l1 = gamma * *r1.gap + *r1.discrepancy;
  double worst_bound = -std::numeric_limits<double>::infinity();
  double worst_rise = -std::numeric_limits<double>::infinity();
  double prev = l1;
  for (std::size_t n = 1; n < t.records.size(); ++n) {
    const auto& r = t.records[n];
    const double nn = static_cast<double>(n);
    worst_bound = std::max(worst_bound, *r.gap - l1 / (nn * gamma));
    const double ln = nn * gamma * *r.gap + *r.discrepancy;
    if (n > 1) worst_rise = std::max(worst_rise, ln - prev);
    prev = ln;
  }
  return {worst_bound <= 1e-10 && worst_rise <= 1e-10,
          fmt("max(gap - bound) = %.3g, max Lyapunov increase = %.3g", worst_bound, worst_rise)};
}

Outcome acc_certificate() {
  const double L = 1.0 / 0.0025;
  const Ensemble init = example1_initial();
  const FlowTrace t = run_accelerated(example1_functional(1), init, L, 2000, example1_hooks(init));
  auto a = [&](std::size_t n) {
    const double m = static_cast<double>(n);
    return (m + 1.0) * (m + 2.0) / (16.0 * L);
  };
  const double l1 = a(1) * *t.records.at(1).gap + *t.records.at(1).discrepancy;
  double worst_bound = -std::numeric_limits<double>::infinity();
  double worst_rise = -std::numeric_limits<double>::infinity();
  double prev = l1;
  for (std::size_t n = 1; n < t.records.size(); ++n) {
    const auto& r = t.records[n];
    worst_bound = std::max(worst_bound, *r.gap * a(n) - l1);
    const double ln = a(n) * *r.gap + *r.discrepancy;
    if (n > 1) worst_rise = std::max(worst_rise, ln - prev);
    prev = ln;
  }
  return {worst_bound <= 1e-10 && worst_rise <= 1e-10,
          fmt("max(a_n gap - L1) = %.3g, max Lyapunov increase = %.3g", worst_bound, worst_rise)};
}

Outcome acceleration_ordering() {
  const Ensemble init = example1_initial();
  bool pass = true;
  std::string detail;
  for (double tau : {0.0025, 0.005, 0.01}) {
    const double gd = *run_gd(example1_functional(1), init, {1.5 * tau, 2000}, example1_hooks(init)).records.back().gap;
    const double acc =
        *run_accelerated(example1_functional(1), init, 1.0 / tau, 2000, example1_hooks(init)).records.back().gap;
    pass = pass && acc < gd;
    detail += fmt("tau=%g: acc %.3g vs gd %.3g; ", tau, acc, gd);
  }
  return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome continuous_envelope() {
  const Ensemble init = example1_initial();
  const DiagnosticsHooks hooks = example1_hooks(init);
  const double d0 = discrepancy(init, *hooks.reference);
  const FlowTrace t = integrate_accelerated_flow(example1_functional(1), init, {2.0, 1e-3, 1e-3, 10.0}, hooks);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : t.records) worst = std::max(worst, r.time * r.time * *r.gap - d0);
  const bool reached = std::abs(t.records.back().time - 10.0) < 1e-12;
  return {reached && worst <= 1e-3,
          fmt("max(t^2 gap - D0) = %.3g with D0 = %.6g over %g samples", worst, d0, double(t.records.size()))};
}

Outcome inequality_suites() {
  struct Item {
    const char* name;
    FunctionalSpec spec;
    std::size_t dim;
    double L;
  };
  const Item items[] = {
      {"shifted_sq", shifted_square(Eigen::VectorXd::Constant(2, 1.0)), 2, 2.0},
      {"interaction", squared_distance_interaction(), 2, 4.0},
      {"example1", example1_functional(1), 1, 4.0},
  };
  bool pass = true;
  std::string detail;
  std::uint64_t seed = 1000;
  for (const Item& it : items) {
    const SampledInequality s = sample_inequalities(it.spec, it.dim, it.L, 500, ++seed);
    pass = pass && s.min_convexity >= -1e-9 && s.min_smoothness >= -1e-9;
    detail += std::string(it.name) + fmt(" conv %.3g smooth %.3g; ", s.min_convexity, s.min_smoothness);
  }
  return {pass, detail.substr(0, detail.size() - 2)};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t d = 1 + seed % 3;
    const std::size_t n = 2 + (seed * 13) % 49;
    const auto dd = static_cast<Eigen::Index>(d);
    const Ensemble e =
        sample_ensemble({Gaussian{Eigen::VectorXd::Zero(dd), Eigen::VectorXd::Ones(dd)}, 500 + seed}, n, d);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(dd, dd) * 1.5;
    A(0, dd - 1) = A(dd - 1, 0) = 0.25;
    if (d == 1) A(0, 0) = 1.5;
    for (const auto& spec : {shifted_square(Eigen::VectorXd::Constant(dd, 0.7)), half_square(),
                             custom_quadratic(A, Eigen::VectorXd::Constant(dd, -0.3)),
                             squared_distance_interaction(), example1_functional(d)}) {
      worst = std::max(worst, fd_gradient_error(spec, e));
    }
  }
  double worst_knn = 0.0;
  std::size_t probes = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Ensemble e = sample_ensemble({Gaussian{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}, 900 + seed}, 50, 2);
    std::size_t used = 0;
    worst_knn = std::max(worst_knn, fd_gradient_error_knn(knn_neg_entropy(5), e, 5, 1e-5, used));
    probes += used;
  }
  return {worst <= 1e-6 && worst_knn <= 1e-3 && probes > 0,
          fmt("smooth max rel err %.3g, k-NN max rel err %.3g over %g probes", worst, worst_knn, double(probes))};
}

Outcome entropy_accuracy() {
  const double truth = std::log(2.0 * std::numbers::pi * std::numbers::e);
  const double hg =
      knn_entropy(sample_ensemble({Gaussian{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}, 77}, 2000, 2), 5);
  const double hu =
      knn_entropy(sample_ensemble({UniformBox{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)}, 78}, 2000, 2), 5);
  const double rel = std::abs(hg - truth) / truth;
  return {rel <= 0.05 && std::abs(hu) <= 0.1,
          fmt("gaussian %.5f (rel err %.3g), uniform %.5f", hg, rel, hu)};
}

Outcome example2_endpoint() {
  const ExperimentConfig cfg = load_config(kConfigs / "example2.cfg");
  const double kappa = 0.1;
  const double f_star = -(kappa * 2.0 / 2.0) * std::log(2.0 * std::numbers::pi * kappa);
  const Ensemble init = sample_ensemble(cfg.sampler, cfg.n_particles, cfg.dim);
  DiagnosticsHooks hooks;
  hooks.record_xz = false;
  hooks.eval.search = NeighborSearch::grid;
  const FlowTrace t = run_accelerated(example2_functional(kappa, 5), init, 1.0 / 0.005, 2000, hooks);
  const double f = t.records.back().f_value;
  const double rel = std::abs(f - f_star) / std::abs(f_star);
  return {rel <= 0.10, fmt("F2 = %.6g vs F2* = %.6g, relative error %.3g", f, f_star, rel)};
}

Outcome variance_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t d = 1 + seed % 3;
    const auto dd = static_cast<Eigen::Index>(d);
    const double s = 0.5 + static_cast<double>(seed % 5);
    const Ensemble e = sample_ensemble({UniformBox{-s * Eigen::VectorXd::Ones(dd), s * Eigen::VectorXd::Ones(dd)}, seed},
                                       3 + seed % 97, d);
    const double var = second_moment(e) - mean(e).squaredNorm();
    worst = std::max(worst, std::abs(value(squared_distance_interaction(), e) - var));
  }
  return {worst <= 1e-12, fmt("max |W - variance| = %.3g", worst)};
}

Outcome reproducibility() {
  const fs::path work = fs::temp_directory_path() / "tmflow_acceptance_repro";
  fs::remove_all(work);
  for (const char* tag : {"a", "b"}) {
    const std::string cmd = std::string("\"") + TMFLOW_CLI + "\" run --config \"" +
                            (kConfigs / "example1.cfg").string() + "\" --seed 12345 --out \"" + (work / tag).string() +
                            "\" > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, std::string("run ") + tag + " failed"};
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(work / "a")) {
    const fs::path other = work / "b" / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
      return {false, entry.path().filename().string() + " differs"};
    }
    ++compared;
  }
  return {compared == 7, fmt("%g files byte-identical", double(compared))};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "GD rate certificate", 60, gd_certificate},
      {2, "accelerated rate certificate", 60, acc_certificate},
      {3, "acceleration ordering at iteration 2000", 0, acceleration_ordering},
      {4, "continuous accelerated envelope", 120, continuous_envelope},
      {5, "convexity and smoothness suites", 30, inequality_suites},
      {6, "gradient correctness", 30, gradient_correctness},
      {7, "entropy estimator accuracy", 10, entropy_accuracy},
      {8, "Example 2 endpoint", 0, example2_endpoint},
      {9, "variance identity", 5, variance_identity},
      {10, "reproducibility", 0, reproducibility},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %g s budget", c.budget_s);
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %s: %s (%s) [%.2f s]\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
