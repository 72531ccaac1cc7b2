#include "tmflow/experiment.hpp"

#include "tmflow/errors.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace tmflow {

using nlohmann::json;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string short_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Job {
  std::string method;
  double tau;
};

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_trace_csv(const FlowTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const TraceRecord& r : trace.records) {
    out += std::to_string(r.iter);
    out += ',' + format_double(r.time);
    out += ',' + format_double(r.f_value);
    out += ',' + optional_field(r.gap);
    out += ',' + optional_field(r.discrepancy);
    out += ',' + optional_field(r.lyapunov);
    out += ',' + optional_field(r.certified_bound);
    out += '\n';
  }
  return out;
}

std::string trace_file_name(const std::string& method, double tau) {
  return method + "_tau" + short_double(tau) + ".csv";
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const FunctionalSpec spec = effective_functional(cfg);
  const Ensemble init = sample_ensemble(cfg.sampler, cfg.n_particles, cfg.dim);

  DiagnosticsHooks hooks;
  if (cfg.dim <= 3) hooks.eval.search = NeighborSearch::grid;
  if (cfg.reference) {
    if (const auto* c = std::get_if<ConstantMapReference>(&*cfg.reference)) {
      Positions target = c->center.transpose().replicate(static_cast<Eigen::Index>(cfg.n_particles), 1);
      hooks.reference = init.transported(std::move(target));
      hooks.f_star = value(spec, *hooks.reference, hooks.eval);
    } else {
      hooks.f_star = std::get<AnalyticFStar>(*cfg.reference).value;
    }
  }

  std::vector<std::string> methods;
  switch (cfg.method) {
    case Method::gd: methods = {"gd"}; break;
    case Method::accelerated: methods = {"accelerated"}; break;
    case Method::both: methods = {"gd", "accelerated"}; break;
    case Method::ode: methods = {"ode"}; break;
    case Method::accelerated_ode: methods = {"accelerated_ode"}; break;
  }
  std::vector<Job> jobs;
  for (const std::string& m : methods) {
    for (double tau : cfg.tau) jobs.push_back({m, tau});
  }

  RunResult result;
  json runs = json::array();
  for (const Job& job : jobs) {
    json entry{{"method", job.method}, {"tau", job.tau}};
    const std::string file = trace_file_name(job.method, job.tau);
    try {
      FlowTrace trace;
      if (job.method == "gd") {
        const GdConfig gd{1.5 * job.tau, cfg.steps};
        entry["gamma"] = gd.gamma;
        entry["L"] = 1.0 / job.tau;
        entry["steps"] = cfg.steps;
        trace = run_gd(spec, init, gd, hooks);
      } else if (job.method == "accelerated") {
        const double L = 1.0 / job.tau;
        entry["L"] = L;
        entry["steps"] = cfg.steps;
        entry["a_n"] = {{"formula", "(n+1)(n+2)/(16L)"}, {"denominator", 16.0 * L}};
        trace = run_accelerated(spec, init, L, cfg.steps, hooks);
      } else {
        OdeConfig ode{cfg.ode->r, cfg.ode->t0, job.tau, cfg.ode->t_end};
        entry["dt"] = ode.dt;
        entry["t0"] = ode.t0;
        entry["t_end"] = ode.t_end;
        if (ode.r) entry["r"] = *ode.r;
        trace = ode.r ? integrate_accelerated_flow(spec, init, ode, hooks) : integrate_flow(spec, init, ode, hooks);
      }
      write_file(out_dir / file, format_trace_csv(trace));
      result.files.push_back(out_dir / file);
      entry["file"] = file;
      entry["status"] = "ok";
    } catch (const DivergenceError& e) {
      result.failures.push_back({job.method, job.tau, e.time(), e.what()});
      entry["status"] = "diverged";
      entry["diverged_at"] = e.time();
      entry["message"] = e.what();
    }
    runs.push_back(entry);
  }

  json manifest;
  manifest["config"] = to_json(cfg);
  manifest["seed"] = cfg.sampler.seed;
  manifest["version"] = kVersion;
  // Reproducible runs: only an explicitly provided epoch is recorded.
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    manifest["timestamp"] = std::string(epoch);
  } else {
    manifest["timestamp"] = nullptr;
  }
  manifest["initial_ensemble"] = {{"n_particles", cfg.n_particles}, {"dim", cfg.dim}};
  manifest["f_star"] = hooks.f_star ? json(*hooks.f_star) : json(nullptr);
  if (has_entropy_term(spec)) {
    manifest["entropy_force"] = "exact gradient of the Kozachenko-Leonenko k-NN estimator";
  }
  manifest["columns"] = kTraceHeader;
  manifest["runs"] = runs;
  json files = json::array();
  for (const auto& f : result.files) files.push_back(f.filename().string());
  manifest["files"] = files;
  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"method", f.method}, {"tau", f.tau}, {"time", f.time}, {"message", f.message}});
  }
  manifest["failures"] = failures;

  const auto manifest_path = out_dir / "manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  result.files.push_back(manifest_path);
  result.manifest = std::move(manifest);
  return result;
}

std::vector<std::pair<double, double>> read_gap_series(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error("cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw ConfigError(csv.string() + ": header does not match the trace column list");
  }
  std::vector<std::pair<double, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() < 4 || fields[3].empty()) continue;
    out.emplace_back(std::stod(fields[0]), std::stod(fields[3]));
  }
  return out;
}

}  // namespace tmflow
