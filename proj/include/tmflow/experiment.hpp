#pragma once

#include "tmflow/config.hpp"
#include "tmflow/flows.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tmflow {

inline constexpr const char* kVersion = "0.1.0";

/// Trace column header, in order.
inline constexpr const char* kTraceHeader = "iter,time,f_value,gap,discrepancy,lyapunov,certified_bound";

/// CSV text for a trace: header row then one row per record. Doubles use 17
/// significant digits; unavailable diagnostics are empty fields.
std::string format_trace_csv(const FlowTrace& trace);

/// Formats a double with 17 significant digits.
std::string format_double(double v);

struct RunFailure {
  std::string method;
  double tau = 0.0;
  double time = 0.0;
  std::string message;
};

struct RunResult {
  nlohmann::json manifest;
  std::vector<std::filesystem::path> files;  ///< trace files, then the manifest
  std::vector<RunFailure> failures;
};

/// Runs every (method, τ) pair of the config, writes one CSV per pair into
/// out_dir and writes manifest.json last. Runs of one config share the
/// same initial ensemble. GD uses γ = (3/2)τ; the accelerated scheme uses L = 1/τ.
/// Divergent runs are recorded as failures rather than thrown.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Trace file name for a (method, τ) pair, e.g. "gd_tau0.0025.csv".
std::string trace_file_name(const std::string& method, double tau);

/// Reads a trace CSV back as (iter, gap) pairs; rows with an empty gap are skipped.
std::vector<std::pair<double, double>> read_gap_series(const std::filesystem::path& csv);

}  // namespace tmflow
