// tmflow: experiment runner and property-suite driver.

#include "tmflow/checks.hpp"
#include "tmflow/config.hpp"
#include "tmflow/diagnostics.hpp"
#include "tmflow/errors.hpp"
#include "tmflow/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kDivergence = 2;
constexpr int kSuiteFailure = 3;

void reseed(tmflow::ExperimentConfig& cfg, std::uint64_t seed) { cfg.sampler.seed = seed; }

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  tmflow::ExperimentConfig cfg;
  try {
    cfg = tmflow::load_config(config_path);
  } catch (const tmflow::ConfigParseError& e) {
    for (const auto& issue : e.issues()) std::cerr << "config: " << issue << "\n";
    return kValidation;
  } catch (const tmflow::Error& e) {
    std::cerr << "config: " << e.what() << "\n";
    return kValidation;
  }
  if (seed) reseed(cfg, *seed);
  const std::filesystem::path dir = out.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out);

  tmflow::RunResult result;
  try {
    result = tmflow::run_experiment(cfg, dir);
  } catch (const tmflow::ConfigError& e) {
    std::cerr << "run: " << e.what() << "\n";
    return kValidation;
  }
  for (const auto& f : result.files) std::cout << f.string() << "\n";
  for (const auto& f : result.failures) {
    std::cerr << "diverged: " << f.method << " tau=" << f.tau << " t=" << f.time << ": " << f.message << "\n";
  }
  return result.failures.empty() ? kOk : kDivergence;
}

int cmd_check(const std::string& suite_name, std::uint64_t seed, bool stress) {
  const auto suite = tmflow::suite_from_string(suite_name);
  if (!suite) {
    std::cerr << "check: unknown suite '" << suite_name << "'\n";
    return kValidation;
  }
  tmflow::CheckOptions opts;
  opts.seed = seed;
  opts.stress = stress;
  const tmflow::CheckReport report = tmflow::run_check(*suite, opts);
  std::cout << report.to_json().dump(2) << "\n";
  return report.passed ? kOk : kSuiteFailure;
}

int cmd_rates(const std::vector<std::string>& files, double window) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& path : files) {
    nlohmann::json entry = {{"file", path}};
    try {
      const auto fit = tmflow::fit_rate(tmflow::read_gap_series(path), window);
      if (fit) {
        entry["slope"] = fit->slope;
        entry["intercept"] = fit->intercept;
        entry["window"] = {fit->window.first, fit->window.second};
        entry["residual"] = fit->residual;
      } else {
        entry["slope"] = nullptr;
        entry["note"] = "fewer than 10 positive gap values in the window";
      }
    } catch (const tmflow::Error& e) {
      std::cerr << "rates: " << path << ": " << e.what() << "\n";
      return kValidation;
    }
    out.push_back(entry);
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle gradient flows on transport maps"};
  app.set_version_flag("--version", std::string(tmflow::kVersion));
  app.require_subcommand(1);

  std::string config_path, out, suite;
  std::uint64_t seed = 1;
  bool stress = false;
  double window = 0.5;
  std::vector<std::string> traces;

  auto* run = app.add_subcommand("run", "Run an experiment config and write traces plus a manifest");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  auto* run_seed = run->add_option("--seed", seed, "Override the sampler seed");
  run->add_option("--out", out, "Output directory (default: output_dir from the config)");

  auto* check = app.add_subcommand("check", "Run a property suite and print a JSON report");
  check->add_option("--suite", suite, "gradients | convexity | smoothness | lyapunov | rates")->required();
  check->add_option("--seed", seed, "Suite seed");
  check->add_flag("--stress", stress, "Smoothness suite: probe with L reduced by 30%");

  auto* rates = app.add_subcommand("rates", "Fit log-log decay rates to the gap column of trace files");
  rates->add_option("traces", traces, "Trace CSV files")->required()->check(CLI::ExistingFile);
  rates->add_option("--window", window, "Trailing fraction of the series used for the fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*run) {
      return cmd_run(config_path, run_seed->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, out);
    }
    if (*check) return cmd_check(suite, seed, stress);
    if (*rates) return cmd_rates(traces, window);
  } catch (const tmflow::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const tmflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
