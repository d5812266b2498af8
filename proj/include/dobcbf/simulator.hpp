#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dobcbf/core_model.hpp"
#include "dobcbf/observer.hpp"
#include "dobcbf/qp.hpp"
#include "dobcbf/safety_filter.hpp"

namespace dobcbf {

enum class Waveform { kSin, kCos };

/// amplitude * wave(frequency * t + phase) added to one channel.
struct DisturbanceTerm {
  int channel = 0;
  double amplitude = 0.0;
  double frequency = 0.0;  // rad/s
  double phase = 0.0;
  Waveform waveform = Waveform::kSin;
};

/// Sum of sinusoids per channel with an exact analytic derivative. A
/// constant is a kCos term with zero frequency.
class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  DisturbanceSignal(int channels, std::vector<DisturbanceTerm> terms);

  int channels() const { return channels_; }
  const std::vector<DisturbanceTerm>& terms() const { return terms_; }

  Vector value(double t) const;
  Vector derivative(double t) const;

 private:
  int channels_ = 0;
  std::vector<DisturbanceTerm> terms_;
};

struct SignalBounds {
  double max_norm = 0.0;             // max_t |d(t)|
  double max_derivative_norm = 0.0;  // max_t |d'(t)|
};

/// Grid search over [t0, t1] followed by golden-section refinement around
/// the best grid point of each quantity.
SignalBounds derive_bounds(const DisturbanceSignal& sig, double t0, double t1,
                           int grid_points = 1000000);

enum class HoldMode {
  kZeroOrder,  // control computed once per dt, held across sub-steps and stages
  kStage,      // control re-evaluated at every RK4 stage
};

struct SimConfig {
  double t0 = 0.0;
  double tf = 20.0;
  double dt = 1e-3;
  int log_stride = 10;
  int substeps = 1;
  HoldMode hold = HoldMode::kZeroOrder;

  void validate() const;
  long steps() const;
};

using OdeRhs = std::function<Vector(double, const Vector&)>;

/// Classical fourth-order Runge-Kutta step. Throws NumericalError (with the
/// time stamp) when a stage evaluates to a non-finite value.
Vector rk4_step(const OdeRhs& rhs, double t, const Vector& state, double dt);

enum class ControlStatus {
  kUnfiltered = 0,
  kInactive = 1,
  kActive = 2,
  kInfeasible = 3,
  kBypassed = 4,  // singularity guard skipped the QP
};

std::string_view to_string(ControlStatus s);
ControlStatus from_qp(QpStatus s);

struct ControlDecision {
  Vector u_nom;
  Vector u;
  double psi0 = 0.0;
  RowVector psi1;  // empty when unfiltered
  ControlStatus status = ControlStatus::kUnfiltered;
  bool guard_event = false;
};

using ControlLaw = std::function<ControlDecision(double t, const Vector& x, const Vector& d_hat)>;

/// Quantities logged alongside the state. `hbar` receives the true
/// estimation error. `s_values` is optional (higher relative degree).
struct BarrierMonitor {
  std::function<double(const Vector&)> h;
  std::function<double(const Vector&, const Vector&)> hbar;
  std::function<std::vector<double>(const Vector&)> s_values;
};

struct ClosedLoopModel {
  ControlAffineSystem plant;
  ObserverConfig observer;
  ControlLaw control;
  BarrierMonitor monitor;
  DisturbanceSignal disturbance;
  // Tracking reference for the state coordinates listed in `tracked`.
  std::function<Vector(double)> reference;
  std::vector<int> tracked;
};

struct LogRow {
  double t = 0.0;
  Vector x;
  Vector u_nom;
  Vector u;
  Vector d;
  Vector d_hat;
  double ed_norm = 0.0;
  double h = 0.0;
  double hbar = 0.0;
  double psi0 = 0.0;
  double psi1u = 0.0;
  ControlStatus status = ControlStatus::kUnfiltered;
  bool guard_event = false;
  std::vector<double> s;
  Vector ref;
};

struct StepCounts {
  long steps = 0;
  long active = 0;
  long infeasible = 0;
  long bypassed = 0;
  long guard_events = 0;
};

struct TrajectoryLog {
  int n = 0;
  int m = 0;
  int p = 0;
  int s_count = 0;
  int ref_count = 0;
  std::vector<int> tracked;  // state index of each ref column
  std::vector<LogRow> rows;
  StepCounts counts;  // over every control step, logged or not

  std::vector<std::string> header() const;
  void write_csv(std::ostream& os) const;
};

enum class RunStatus { kOk, kBlowUp, kNumericalError };

std::string_view to_string(RunStatus s);

struct SimResult {
  TrajectoryLog log;
  RunStatus status = RunStatus::kOk;
  std::string message;
  double max_state_norm = 0.0;
};

/// Integrates [x; z] jointly with the true disturbance injected into the
/// plant. Logs every `log_stride` control steps plus the final step.
/// Aborts with a partial log when |[x; z]| exceeds 1e9.
SimResult run_closed_loop(const ClosedLoopModel& model, const Vector& x0, const ObserverState& z0,
                          const SimConfig& cfg);

/// Envelope inputs for metrics: the observer's kappa/nu/omega plus |e_d(0)|.
struct EnvelopeSpec {
  ObserverConfig observer;
  double e0_norm = 0.0;
};

struct MetricsOptions {
  std::optional<EnvelopeSpec> envelope;
  // Decay rate of the proof inequality hbar' >= -rate hbar (gamma or lambda_r).
  std::optional<double> hbar_rate;
  // When set (kNoOmega params), h(t) is compared with violation_floor(t).
  std::optional<FilterParams> floor;
  double tail_start = 2.0;
};

struct Metrics {
  long rows = 0;
  double min_h = 0.0;
  double min_hbar = 0.0;
  std::vector<double> min_s;
  std::optional<double> max_envelope_residual;
  std::optional<double> rmse;
  std::optional<double> min_proof_rate_residual;
  std::optional<double> min_floor_margin;
  double mean_ed_tail = 0.0;
  double max_ed = 0.0;
  double max_u_norm = 0.0;
  long active_steps = 0;
  long infeasible_steps = 0;
  long bypassed_steps = 0;
  long guard_events = 0;
};

Metrics metrics(const TrajectoryLog& log, const MetricsOptions& opts = {});

/// printf("%.17g"): round-trip exact, locale independent.
std::string format_number(double v);

}  // namespace dobcbf
