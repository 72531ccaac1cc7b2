#include "tmflow/flows.hpp"

#include "tmflow/diagnostics.hpp"
#include "tmflow/errors.hpp"

#include <cmath>
#include <string>

namespace tmflow {

namespace {

Ensemble advance(const Ensemble& from, Positions next, double time) {
  if (!next.allFinite()) {
    throw DivergenceError("non-finite positions at t = " + std::to_string(time), time);
  }
  return from.transported(std::move(next));
}

std::optional<double> gap_of(const DiagnosticsHooks& hooks, double f) {
  if (!hooks.f_star) return std::nullopt;
  return f - *hooks.f_star;
}

std::optional<double> discrepancy_to_reference(const DiagnosticsHooks& hooks, const Ensemble& e) {
  if (!hooks.reference) return std::nullopt;
  return discrepancy(e, *hooks.reference);
}

void fill_lyapunov(TraceRecord& rec, const std::optional<LyapunovRecord>& lyap) {
  if (!lyap) return;
  rec.lyapunov = lyap->value;
  rec.certified_bound = lyap->certified_bound;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive and finite");
}

// Shared RK4 driver. `rhs` maps a state to its time derivative.
template <class State, class Rhs, class Record>
void rk4(State state, const OdeConfig& cfg, Rhs&& rhs, Record&& record) {
  const double span = cfg.t_end - cfg.t0;
  const auto steps = static_cast<std::size_t>(std::ceil(span / cfg.dt - 1e-9));
  record(0, cfg.t0, state);
  double t = cfg.t0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t_next = k == steps ? cfg.t_end : cfg.t0 + static_cast<double>(k) * cfg.dt;
    const double h = t_next - t;
    auto stage = [&](double ts, State s) {
      if (!s.allFinite()) throw DivergenceError("integration diverged at t = " + std::to_string(ts), ts);
      return rhs(ts, s);
    };
    const State k1 = stage(t, state);
    const State k2 = stage(t + 0.5 * h, state + (0.5 * h) * k1);
    const State k3 = stage(t + 0.5 * h, state + (0.5 * h) * k2);
    const State k4 = stage(t + h, state + h * k3);
    state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t_next;
    if (!state.allFinite()) {
      throw DivergenceError("integration diverged at t = " + std::to_string(t), t);
    }
    record(k, t, state);
  }
}

}  // namespace

bool exceeds_certified_step(const GdConfig& cfg, double L) { return cfg.gamma > 3.0 / (2.0 * L); }

MomentumSchedule::MomentumSchedule(double L) : L_(L) { require_positive(L, "smoothness constant L"); }

double MomentumSchedule::operator()(std::size_t n) const {
  const double m = static_cast<double>(n);
  return (m + 1.0) * (m + 2.0) / (16.0 * L_);
}

// a(n+1) - a(n) = 2(n+2)/(16L)
double MomentumSchedule::increment(std::size_t n) const { return (static_cast<double>(n) + 2.0) / (8.0 * L_); }

AcceleratedState AcceleratedState::start(const Ensemble& init, double L) {
  require_positive(L, "smoothness constant L");
  return AcceleratedState{init, init, init, 0, L};
}

void validate(const GdConfig& cfg) {
  if (!(cfg.gamma >= 0.0) || !std::isfinite(cfg.gamma)) throw ConfigError("gamma must be finite and non-negative");
}

void validate(const OdeConfig& cfg) {
  if (!(cfg.t0 > 0.0)) throw ConfigError("t0 must be positive");
  if (!(cfg.t_end > cfg.t0)) throw ConfigError("t_end must exceed t0");
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be positive");
  if (cfg.r && !(*cfg.r >= 2.0)) throw ConfigError("r must be at least 2");
}

Ensemble gd_step(const FunctionalSpec& spec, const Ensemble& state, double gamma, const EvalOptions& opts) {
  validate(GdConfig{gamma, 1});
  if (gamma == 0.0) return state;
  const GradientField g = gradient(spec, state, opts);
  return advance(state, state.positions() - gamma * g, 0.0);
}

AcceleratedState accelerated_step(const FunctionalSpec& spec, const AcceleratedState& s, const EvalOptions& opts) {
  if (!s.x.coupled_with(s.y) || !s.x.coupled_with(s.z)) {
    throw CouplingError("accelerated state iterates must share one base sample");
  }
  const MomentumSchedule a(s.L);
  const double a_next = a(s.n + 1);
  const double step = a.increment(s.n);
  const double momentum = step / a_next;
  const double t = static_cast<double>(s.n + 1);

  const Positions& y = s.y.positions();
  const Positions& z = s.z.positions();
  Ensemble x_next = advance(s.x, y + momentum * (z - y), t);
  const GradientField g = gradient(spec, x_next, opts);
  Ensemble z_next = advance(s.z, z - step * g, t);
  Ensemble y_next = advance(s.y, x_next.positions() - (1.0 / s.L) * g, t);
  return AcceleratedState{std::move(x_next), std::move(y_next), std::move(z_next), s.n + 1, s.L};
}

FlowTrace run_gd(const FunctionalSpec& spec, const Ensemble& init, const GdConfig& cfg,
                 const DiagnosticsHooks& hooks) {
  validate(cfg);
  FlowTrace trace;
  trace.records.reserve(cfg.steps + 1);
  std::optional<double> l1;
  Ensemble x = init;
  for (std::size_t n = 0;; ++n) {
    const double time = static_cast<double>(n) * cfg.gamma;
    const Evaluation ev = evaluate(spec, x, hooks.eval);
    TraceRecord rec;
    rec.iter = n;
    rec.time = time;
    rec.f_value = ev.value;
    rec.gap = gap_of(hooks, ev.value);
    rec.discrepancy = discrepancy_to_reference(hooks, x);
    if (rec.gap) {
      auto lyap = lyapunov_gd(n, ev.value, *hooks.f_star, cfg.gamma, rec.discrepancy, l1);
      if (n == 1 && lyap) {
        l1 = lyap->value;
        lyap = lyapunov_gd(n, ev.value, *hooks.f_star, cfg.gamma, rec.discrepancy, l1);
      }
      fill_lyapunov(rec, lyap);
    }
    trace.records.push_back(rec);
    if (n == cfg.steps) break;
    x = advance(x, x.positions() - cfg.gamma * ev.gradient, time + cfg.gamma);
  }
  trace.final_positions = x.positions();
  return trace;
}

FlowTrace run_accelerated(const FunctionalSpec& spec, const Ensemble& init, double L, std::size_t steps,
                          const DiagnosticsHooks& hooks) {
  const MomentumSchedule a(L);
  AcceleratedState state = AcceleratedState::start(init, L);
  FlowTrace trace;
  trace.records.reserve(steps + 1);
  std::optional<double> l1;
  for (std::size_t n = 0;; ++n) {
    TraceRecord rec;
    rec.iter = n;
    rec.time = static_cast<double>(n) / L;
    rec.f_value = value(spec, state.y, hooks.eval);
    if (hooks.record_xz) {
      rec.f_x = n == 0 ? rec.f_value : value(spec, state.x, hooks.eval);
      rec.f_z = n == 0 ? rec.f_value : value(spec, state.z, hooks.eval);
    }
    rec.gap = gap_of(hooks, rec.f_value);
    rec.discrepancy = discrepancy_to_reference(hooks, state.z);
    if (rec.gap) {
      auto lyap = lyapunov_acc(n, rec.f_value, *hooks.f_star, a(n), rec.discrepancy, l1);
      if (n == 1 && lyap) {
        l1 = lyap->value;
        lyap = lyapunov_acc(n, rec.f_value, *hooks.f_star, a(n), rec.discrepancy, l1);
      }
      fill_lyapunov(rec, lyap);
    }
    trace.records.push_back(rec);
    if (n == steps) break;
    state = accelerated_step(spec, state, hooks.eval);
  }
  trace.final_positions = state.y.positions();
  return trace;
}

FlowTrace integrate_flow(const FunctionalSpec& spec, const Ensemble& init, const OdeConfig& cfg,
                         const DiagnosticsHooks& hooks) {
  validate(cfg);
  if (cfg.r) throw ConfigError("integrate_flow integrates the plain flow; r must be absent");
  FlowTrace trace;
  std::optional<double> d0 = discrepancy_to_reference(hooks, init);

  auto rhs = [&](double, const Positions& x) -> Positions {
    return -gradient(spec, init.transported(x), hooks.eval);
  };
  auto record = [&](std::size_t k, double t, const Positions& x) {
    const Ensemble e = init.transported(x);
    TraceRecord rec;
    rec.iter = k;
    rec.time = t;
    rec.f_value = value(spec, e, hooks.eval);
    rec.gap = gap_of(hooks, rec.f_value);
    rec.discrepancy = discrepancy_to_reference(hooks, e);
    if (rec.gap && rec.discrepancy) {
      const double elapsed = t - cfg.t0;
      rec.lyapunov = elapsed * *rec.gap + *rec.discrepancy;
      if (k > 0) rec.certified_bound = *d0 / elapsed;
    }
    trace.records.push_back(rec);
    trace.final_positions = x;
  };
  rk4<Positions>(init.positions(), cfg, rhs, record);
  return trace;
}

FlowTrace integrate_accelerated_flow(const FunctionalSpec& spec, const Ensemble& init, const OdeConfig& cfg,
                                     const DiagnosticsHooks& hooks) {
  validate(cfg);
  if (!cfg.r) throw ConfigError("integrate_accelerated_flow needs r");
  const double r = *cfg.r;
  const Eigen::Index n = init.positions().rows();
  const Eigen::Index d = init.positions().cols();

  // State rows [0, N) hold X, rows [N, 2N) hold Y.
  Positions state(2 * n, d);
  state.topRows(n) = init.positions();
  state.bottomRows(n) = init.positions();

  FlowTrace trace;
  std::optional<double> l0;

  auto rhs = [&](double t, const Positions& s) -> Positions {
    Positions out(2 * n, d);
    const Positions x = s.topRows(n);
    out.topRows(n) = (r / t) * (s.bottomRows(n) - x);
    out.bottomRows(n) = (-r * std::pow(t, r - 1.0)) * gradient(spec, init.transported(x), hooks.eval);
    return out;
  };
  auto record = [&](std::size_t k, double t, const Positions& s) {
    const Ensemble x = init.transported(s.topRows(n));
    const Ensemble y = init.transported(s.bottomRows(n));
    TraceRecord rec;
    rec.iter = k;
    rec.time = t;
    rec.f_value = value(spec, x, hooks.eval);
    rec.gap = gap_of(hooks, rec.f_value);
    rec.discrepancy = discrepancy_to_reference(hooks, y);
    if (rec.gap && rec.discrepancy) {
      const double weight = std::pow(t, r);
      rec.lyapunov = weight * *rec.gap + *rec.discrepancy;
      if (k == 0) l0 = rec.lyapunov;
      rec.certified_bound = *l0 / weight;
    }
    trace.records.push_back(rec);
    trace.final_positions = s.topRows(n);
  };
  rk4<Positions>(state, cfg, rhs, record);
  return trace;
}

}  // namespace tmflow
