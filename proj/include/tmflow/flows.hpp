#pragma once

#include "tmflow/ensemble.hpp"
#include "tmflow/functionals.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace tmflow {

/// Explicit Euler discretisation of ∂X/∂t = −𝒢_F with step γ.
struct GdConfig {
  double gamma = 0.0;
  std::size_t steps = 0;
};

/// True when γ exceeds 3/(2L), the largest step covered by the O(1/n) certificate.
bool exceeds_certified_step(const GdConfig& cfg, double L);

/// a_n = (n+1)(n+2) / (16L).
class MomentumSchedule {
 public:
  explicit MomentumSchedule(double L);

  double operator()(std::size_t n) const;
  /// a_{n+1} − a_n = (n+2) / (8L).
  double increment(std::size_t n) const;
  double smoothness() const noexcept { return L_; }

 private:
  double L_;
};

/// Iterates (X_n, Y_n, Z_n) of the accelerated scheme, all over the same base sample.
struct AcceleratedState {
  Ensemble x;
  Ensemble y;
  Ensemble z;
  std::size_t n = 0;
  double L = 1.0;

  /// X_0 = Y_0 = Z_0 = init.
  static AcceleratedState start(const Ensemble& init, double L);
};

/// Fixed-step integration of the continuous flows. r is set for the
/// accelerated system and absent for the plain gradient flow.
struct OdeConfig {
  std::optional<double> r;
  double t0 = 1e-3;
  double dt = 1e-3;
  double t_end = 1.0;
};

void validate(const GdConfig& cfg);
void validate(const OdeConfig& cfg);

/// What run_* should record besides F. Lyapunov columns need both f_star and
/// reference (the samples of X* over the same base points as init).
struct DiagnosticsHooks {
  std::optional<double> f_star;
  std::optional<Ensemble> reference;
  /// Accelerated runs: also evaluate F on the X and Z iterates.
  bool record_xz = true;
  EvalOptions eval;
};

struct TraceRecord {
  std::size_t iter = 0;
  double time = 0.0;
  double f_value = 0.0;
  std::optional<double> gap;
  std::optional<double> discrepancy;
  std::optional<double> lyapunov;
  std::optional<double> certified_bound;
  std::optional<double> f_x;  ///< accelerated only
  std::optional<double> f_z;  ///< accelerated only
};

struct FlowTrace {
  std::vector<TraceRecord> records;
  /// Positions of the reported ensemble at the end of the run (Y for accelerated).
  Positions final_positions;
};

/// X_{n+1} = X_n − γ 𝒢_F[(X_n)#μ₀](X_n). γ = 0 is the identity.
Ensemble gd_step(const FunctionalSpec& spec, const Ensemble& state, double gamma, const EvalOptions& opts = {});

/// One step of the accelerated scheme: X, then Z, then Y; Z and Y share the
/// single gradient evaluated at X_{n+1}.
AcceleratedState accelerated_step(const FunctionalSpec& spec, const AcceleratedState& state,
                                  const EvalOptions& opts = {});

/// Records n = 0..steps; record n holds F(X_n), time nγ, and the Lyapunov
/// value nγ·gap + D(X_n, X*) with its certificate ℒ_1 / (nγ) when available.
FlowTrace run_gd(const FunctionalSpec& spec, const Ensemble& init, const GdConfig& cfg,
                 const DiagnosticsHooks& hooks = {});

/// Records n = 0..steps; f_value is F(Y_n), the Lyapunov value is
/// a_n·gap(Y_n) + D(Z_n, X*) with certificate ℒ_1 / a_n. Time is n / L.
FlowTrace run_accelerated(const FunctionalSpec& spec, const Ensemble& init, double L, std::size_t steps,
                          const DiagnosticsHooks& hooks = {});

/// Classical RK4 on ∂X/∂t = −𝒢_F from t0 to t_end, one record per step.
/// Lyapunov: (t − t0)·gap + D(X_t, X*), certificate D(init, X*) / (t − t0).
FlowTrace integrate_flow(const FunctionalSpec& spec, const Ensemble& init, const OdeConfig& cfg,
                         const DiagnosticsHooks& hooks = {});

/// Classical RK4 on ∂X/∂t = (r/t)(Y − X), ∂Y/∂t = −r t^{r−1} 𝒢_F[X#μ₀](X) with
/// X(t0) = Y(t0) = init. Records F(X_t); Lyapunov t^r·gap + D(Y_t, X*),
/// certificate ℒ(t0) / t^r where ℒ(t0) = t0^r·gap(init) + D(init, X*).
FlowTrace integrate_accelerated_flow(const FunctionalSpec& spec, const Ensemble& init, const OdeConfig& cfg,
                                     const DiagnosticsHooks& hooks = {});

}  // namespace tmflow
