#include "dobcbf/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace dobcbf {

namespace {

constexpr double kBlowUpNorm = 1e9;

double wave(Waveform w, double arg) { return w == Waveform::kSin ? std::sin(arg) : std::cos(arg); }

double wave_rate(Waveform w, double arg) {
  return w == Waveform::kSin ? std::cos(arg) : -std::sin(arg);
}

// Golden-section maximization of a scalar function on [a, b].
template <typename F>
double golden_max(F&& fn, double a, double b) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = fn(c);
  double fd = fn(d);
  for (int it = 0; it < 100 && (b - a) > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = fn(d);
    }
  }
  return std::max({fc, fd, fn(0.5 * (a + b))});
}

template <typename F>
double grid_then_refine(F&& fn, double t0, double t1, int grid_points) {
  const double h = (t1 - t0) / (grid_points - 1);
  double best = -std::numeric_limits<double>::infinity();
  int best_i = 0;
  for (int i = 0; i < grid_points; ++i) {
    const double v = fn(t0 + h * i);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  const double lo = std::max(t0, t0 + h * (best_i - 1));
  const double hi = std::min(t1, t0 + h * (best_i + 1));
  return std::max(best, golden_max(fn, lo, hi));
}

}  // namespace

DisturbanceSignal::DisturbanceSignal(int channels, std::vector<DisturbanceTerm> terms)
    : channels_(channels), terms_(std::move(terms)) {
  if (channels_ < 1) throw ParameterError("disturbance needs at least one channel");
  for (const auto& term : terms_) {
    if (term.channel < 0 || term.channel >= channels_) {
      throw ParameterError("disturbance term channel " + std::to_string(term.channel) +
                           " out of range");
    }
    if (!std::isfinite(term.amplitude) || !std::isfinite(term.frequency) ||
        !std::isfinite(term.phase)) {
      throw InputError("disturbance terms must be finite");
    }
  }
}

Vector DisturbanceSignal::value(double t) const {
  Vector d = Vector::Zero(channels_);
  for (const auto& term : terms_) {
    d[term.channel] += term.amplitude * wave(term.waveform, term.frequency * t + term.phase);
  }
  return d;
}

Vector DisturbanceSignal::derivative(double t) const {
  Vector dd = Vector::Zero(channels_);
  for (const auto& term : terms_) {
    dd[term.channel] += term.amplitude * term.frequency *
                        wave_rate(term.waveform, term.frequency * t + term.phase);
  }
  return dd;
}

SignalBounds derive_bounds(const DisturbanceSignal& sig, double t0, double t1, int grid_points) {
  if (!(t1 > t0)) throw ParameterError("derive_bounds needs t1 > t0");
  if (grid_points < 3) throw ParameterError("derive_bounds needs at least 3 grid points");
  SignalBounds out;
  out.max_norm = grid_then_refine([&](double t) { return sig.value(t).norm(); }, t0, t1,
                                  grid_points);
  out.max_derivative_norm = grid_then_refine(
      [&](double t) { return sig.derivative(t).norm(); }, t0, t1, grid_points);
  return out;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ParameterError("sim.dt must be positive");
  if (!(tf > t0)) throw ParameterError("sim.tf must exceed sim.t0");
  if (log_stride < 1) throw ParameterError("sim.log_stride must be >= 1");
  if (substeps < 1) throw ParameterError("sim.substeps must be >= 1");
  const double ratio = (tf - t0) / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 * std::max(1.0, ratio)) {
    throw ParameterError("sim horizon (tf - t0) must be an integer multiple of dt");
  }
}

long SimConfig::steps() const { return std::lround((tf - t0) / dt); }

Vector rk4_step(const OdeRhs& rhs, double t, const Vector& state, double dt) {
  auto checked = [&](double ts, const Vector& s) {
    Vector k = rhs(ts, s);
    if (!k.allFinite()) {
      std::ostringstream os;
      os << "non-finite derivative at t = " << format_number(ts);
      throw NumericalError(os.str());
    }
    return k;
  };
  const Vector k1 = checked(t, state);
  const Vector k2 = checked(t + 0.5 * dt, state + 0.5 * dt * k1);
  const Vector k3 = checked(t + 0.5 * dt, state + 0.5 * dt * k2);
  const Vector k4 = checked(t + dt, state + dt * k3);
  return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::string_view to_string(ControlStatus s) {
  switch (s) {
    case ControlStatus::kUnfiltered:
      return "unfiltered";
    case ControlStatus::kInactive:
      return "inactive";
    case ControlStatus::kActive:
      return "active";
    case ControlStatus::kInfeasible:
      return "infeasible";
    case ControlStatus::kBypassed:
      return "bypassed";
  }
  return "unknown";
}

ControlStatus from_qp(QpStatus s) {
  switch (s) {
    case QpStatus::kInactive:
      return ControlStatus::kInactive;
    case QpStatus::kActive:
      return ControlStatus::kActive;
    case QpStatus::kInfeasible:
      return ControlStatus::kInfeasible;
  }
  return ControlStatus::kInfeasible;
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kOk:
      return "ok";
    case RunStatus::kBlowUp:
      return "blow_up";
    case RunStatus::kNumericalError:
      return "numerical_error";
  }
  return "unknown";
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::vector<std::string> TrajectoryLog::header() const {
  std::vector<std::string> cols{"t"};
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i + 1));
  for (int j = 0; j < m; ++j) cols.push_back("u_nom" + std::to_string(j + 1));
  for (int j = 0; j < m; ++j) cols.push_back("u" + std::to_string(j + 1));
  for (int k = 0; k < p; ++k) cols.push_back("d" + std::to_string(k + 1));
  for (int k = 0; k < p; ++k) cols.push_back("d_hat" + std::to_string(k + 1));
  for (const char* c : {"ed_norm", "h", "hbar", "psi0", "psi1u", "qp_status", "guard_event"}) {
    cols.emplace_back(c);
  }
  for (int k = 0; k < s_count; ++k) cols.push_back("s" + std::to_string(k));
  for (int k = 0; k < ref_count; ++k) cols.push_back("ref" + std::to_string(k + 1));
  return cols;
}

void TrajectoryLog::write_csv(std::ostream& os) const {
  const auto cols = header();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    os << format_number(r.t);
    auto put_vec = [&](const Vector& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << format_number(v[i]);
    };
    put_vec(r.x);
    put_vec(r.u_nom);
    put_vec(r.u);
    put_vec(r.d);
    put_vec(r.d_hat);
    os << ',' << format_number(r.ed_norm) << ',' << format_number(r.h) << ','
       << format_number(r.hbar) << ',' << format_number(r.psi0) << ',' << format_number(r.psi1u)
       << ',' << static_cast<int>(r.status) << ',' << (r.guard_event ? 1 : 0);
    for (double s : r.s) os << ',' << format_number(s);
    put_vec(r.ref);
    os << '\n';
  }
}

SimResult run_closed_loop(const ClosedLoopModel& model, const Vector& x0, const ObserverState& z0,
                          const SimConfig& cfg) {
  cfg.validate();
  const ControlAffineSystem& sys = model.plant;
  const ObserverConfig& obs = model.observer;
  require_dim(x0, sys.n, "x0");
  require_dim(z0.z, sys.p, "z0");
  if (model.disturbance.channels() != sys.p) {
    throw DimensionError("disturbance channels must match plant p");
  }
  if (!model.control) throw ConfigurationError("closed loop needs a control law");

  const int n = sys.n;
  const int p = sys.p;

  SimResult result;
  TrajectoryLog& log = result.log;
  log.n = n;
  log.m = sys.m;
  log.p = p;
  if (model.monitor.s_values) log.s_count = static_cast<int>(model.monitor.s_values(x0).size());
  if (model.reference) {
    log.ref_count = static_cast<int>(model.tracked.size());
    log.tracked = model.tracked;
  }

  auto d_hat_of = [&](const Vector& aug) {
    return estimate(obs, ObserverState{aug.tail(p)}, aug.head(n));
  };

  // Joint RHS of [x; z] under control u.
  auto joint = [&](double t, const Vector& aug, const Vector& u) {
    const Vector x = aug.head(n);
    const ObserverState st{aug.tail(p)};
    Vector out(n + p);
    out.head(n) = sys.rhs(x, u, model.disturbance.value(t));
    out.tail(p) = z_derivative(obs, st, sys, x, u);
    return out;
  };

  auto make_row = [&](double t, const Vector& aug, const ControlDecision& dec) {
    LogRow row;
    row.t = t;
    row.x = aug.head(n);
    row.u_nom = dec.u_nom;
    row.u = dec.u;
    row.d = model.disturbance.value(t);
    row.d_hat = d_hat_of(aug);
    const Vector e_d = row.d_hat - row.d;
    row.ed_norm = e_d.norm();
    row.h = model.monitor.h ? model.monitor.h(row.x) : 0.0;
    row.hbar = model.monitor.hbar ? model.monitor.hbar(row.x, e_d) : 0.0;
    row.psi0 = dec.psi1.size() ? dec.psi0 : 0.0;
    row.psi1u = dec.psi1.size() ? dec.psi1.dot(dec.u) : 0.0;
    row.status = dec.status;
    row.guard_event = dec.guard_event;
    if (model.monitor.s_values) row.s = model.monitor.s_values(row.x);
    if (model.reference) {
      const Vector ref = model.reference(t);
      require_dim(ref, static_cast<Eigen::Index>(model.tracked.size()), "reference(t)");
      row.ref = ref;
    }
    return row;
  };

  auto count = [&](const ControlDecision& dec) {
    ++log.counts.steps;
    if (dec.status == ControlStatus::kActive) ++log.counts.active;
    if (dec.status == ControlStatus::kInfeasible) ++log.counts.infeasible;
    if (dec.status == ControlStatus::kBypassed) ++log.counts.bypassed;
    if (dec.guard_event) ++log.counts.guard_events;
  };

  Vector aug(n + p);
  aug << x0, z0.z;
  const long steps = cfg.steps();
  const double h_sub = cfg.dt / cfg.substeps;

  try {
    for (long k = 0; k <= steps; ++k) {
      const double t = cfg.t0 + k * cfg.dt;
      const ControlDecision dec = model.control(t, aug.head(n), d_hat_of(aug));
      if (k % cfg.log_stride == 0 || k == steps) log.rows.push_back(make_row(t, aug, dec));
      if (k == steps) break;
      count(dec);

      OdeRhs rhs;
      if (cfg.hold == HoldMode::kZeroOrder) {
        rhs = [&](double ts, const Vector& s) { return joint(ts, s, dec.u); };
      } else {
        rhs = [&](double ts, const Vector& s) {
          const Vector u = model.control(ts, s.head(n), d_hat_of(s)).u;
          return joint(ts, s, u);
        };
      }
      for (int j = 0; j < cfg.substeps; ++j) {
        aug = rk4_step(rhs, t + j * h_sub, aug, h_sub);
      }
      const double norm = aug.norm();
      result.max_state_norm = std::max(result.max_state_norm, norm);
      if (!(norm <= kBlowUpNorm)) {
        result.status = RunStatus::kBlowUp;
        result.message = "state norm exceeded 1e9 at t = " + format_number(t + cfg.dt);
        return result;
      }
    }
  } catch (const NumericalError& e) {
    result.status = RunStatus::kNumericalError;
    result.message = e.what();
  }
  return result;
}

Metrics metrics(const TrajectoryLog& log, const MetricsOptions& opts) {
  Metrics out;
  out.rows = static_cast<long>(log.rows.size());
  out.active_steps = log.counts.active;
  out.infeasible_steps = log.counts.infeasible;
  out.bypassed_steps = log.counts.bypassed;
  out.guard_events = log.counts.guard_events;
  if (log.rows.empty()) return out;

  const double inf = std::numeric_limits<double>::infinity();
  out.min_h = inf;
  out.min_hbar = inf;
  out.min_s.assign(log.s_count, inf);
  double env = -inf;
  double sq_err = 0.0;
  long sq_count = 0;
  double tail_sum = 0.0;
  long tail_count = 0;
  double floor_margin = inf;
  const double t_start = log.rows.front().t;

  for (const auto& r : log.rows) {
    out.min_h = std::min(out.min_h, r.h);
    out.min_hbar = std::min(out.min_hbar, r.hbar);
    for (int k = 0; k < log.s_count; ++k) out.min_s[k] = std::min(out.min_s[k], r.s[k]);
    out.max_u_norm = std::max(out.max_u_norm, r.u.norm());
    out.max_ed = std::max(out.max_ed, r.ed_norm);
    if (opts.envelope) {
      const double bound =
          error_envelope(opts.envelope->observer, opts.envelope->e0_norm, r.t - t_start);
      env = std::max(env, r.ed_norm - bound);
    }
    if (r.t >= opts.tail_start) {
      tail_sum += r.ed_norm;
      ++tail_count;
    }
    if (opts.floor) {
      floor_margin = std::min(floor_margin, r.h - violation_floor(*opts.floor, r.t - t_start));
    }
    for (Eigen::Index i = 0; i < r.ref.size(); ++i) {
      const double e = r.x[log.tracked[i]] - r.ref[i];
      sq_err += e * e;
      ++sq_count;
    }
  }
  if (opts.envelope) out.max_envelope_residual = env;
  if (sq_count > 0) out.rmse = std::sqrt(sq_err / sq_count);
  if (tail_count > 0) out.mean_ed_tail = tail_sum / tail_count;
  if (opts.floor) out.min_floor_margin = floor_margin;
  if (opts.hbar_rate && log.rows.size() > 1) {
    double worst = inf;
    for (std::size_t i = 0; i + 1 < log.rows.size(); ++i) {
      const auto& a = log.rows[i];
      const auto& b = log.rows[i + 1];
      const double delta = b.t - a.t;
      worst = std::min(worst, b.hbar - a.hbar * (1.0 - *opts.hbar_rate * delta));
    }
    out.min_proof_rate_residual = worst;
  }
  return out;
}

}  // namespace dobcbf
