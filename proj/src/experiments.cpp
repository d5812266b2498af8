#include "dobcbf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "dobcbf/el_systems.hpp"

namespace dobcbf::experiments {

using nlohmann::json;

namespace {

// Bounds over the simulation horizon of the default arm disturbance,
// produced by derive_bounds(t in [0, 20], 1e6 grid + golden refinement).
constexpr double kArmOmega = 83.51623131426363;
constexpr double kArmDmax = 34.66684912319992;

enum class Family { kScalar, kDoubleInt, kArm };
enum class FilterKind { kNone, kDob, kRobust };

struct ScenarioInfo {
  const char* id;
  Family family;
  FilterKind kind;
};

constexpr ScenarioInfo kScenarios[] = {
    {"scalar-rel1", Family::kScalar, FilterKind::kDob},
    {"doubleint-relr", Family::kDoubleInt, FilterKind::kDob},
    {"el2dof-dob", Family::kArm, FilterKind::kDob},
    {"el2dof-robust", Family::kArm, FilterKind::kRobust},
    {"el2dof-nofilter", Family::kArm, FilterKind::kNone},
    {"el2dof-noomega", Family::kArm, FilterKind::kDob},
};

const ScenarioInfo& info(std::string_view id) {
  for (const auto& s : kScenarios) {
    if (id == s.id) return s;
  }
  std::string known;
  for (const auto& s : kScenarios) known += std::string(known.empty() ? "" : ", ") + s.id;
  throw ConfigError("unknown scenario '" + std::string(id) + "' (known: " + known + ")");
}

const std::set<std::string>& auto_keys() {
  static const std::set<std::string> keys = {"filter.omega", "filter.omega_filter",
                                             "filter.d_max"};
  return keys;
}

json term(int channel, double amplitude, double frequency, const char* waveform) {
  return json{{"channel", channel},
              {"amplitude", amplitude},
              {"frequency", frequency},
              {"phase", 0.0},
              {"waveform", waveform}};
}

const json& term_template() {
  static const json t = term(0, 0.0, 0.0, "sin");
  return t;
}

json sim_section(double tf, int substeps, const char* hold) {
  return json{{"t0", 0.0},       {"tf", tf},         {"dt", 1e-3},
              {"log_stride", 10}, {"substeps", substeps}, {"hold", hold}};
}

json default_doc(const ScenarioInfo& s) {
  json doc;
  doc["scenario"] = s.id;
  doc["seed"] = 1;
  switch (s.family) {
    case Family::kScalar:
      doc["sim"] = sim_section(20.0, 1, "zoh");
      doc["filter"] = {{"alpha", 10.0}, {"beta", 2.0},           {"gamma", 1.0},
                       {"nu", 1.0},     {"omega", "auto"},        {"omega_filter", "auto"},
                       {"mode", "full"}};
      doc["plant"] = {{"x0", {1.0}}};
      doc["disturbance"] = {{"terms", json::array({term(0, -1.0, 0.0, "cos")})}};
      doc["nominal"] = {{"kp", {1.0}},
                        {"kd", {0.0}},
                        {"ref_offset", {-1.0}},
                        {"ref_amplitude", {0.0}},
                        {"ref_frequency", 0.0}};
      break;
    case Family::kDoubleInt:
      doc["sim"] = sim_section(20.0, 1, "zoh");
      doc["filter"] = {{"alpha", 10.0},        {"beta", 2.0},    {"nu", 1.0},
                       {"omega", "auto"},      {"omega_filter", "auto"},
                       {"poles", {1.0, 1.0}},  {"mode", "full"}};
      doc["plant"] = {{"x0", {0.0, 0.0}}, {"limit", 1.0}};
      doc["disturbance"] = {
          {"terms", json::array({term(0, 0.5, 0.0, "cos"), term(0, 0.5, 2.0, "sin")})}};
      doc["nominal"] = {{"kp", {4.0}},
                        {"kd", {4.0}},
                        {"ref_offset", {2.0}},
                        {"ref_amplitude", {0.0}},
                        {"ref_frequency", 0.0}};
      break;
    case Family::kArm: {
      doc["sim"] = sim_section(20.0, 10, "stage");
      const bool noomega = std::string_view(s.id) == "el2dof-noomega";
      json filter = {{"alpha", 500.0},
                     {"alpha_interpretation", "alpha1"},
                     {"beta", 10.0},
                     {"gamma", 2.0},
                     {"nu", 1.0},
                     {"omega", kArmOmega},
                     {"omega_filter", "auto"},
                     {"d_max", kArmDmax},
                     {"eps_singular", 1e-4},
                     {"mu_grid", 10001}};
      if (s.kind == FilterKind::kDob) {
        filter["mode"] = noomega ? "no_omega" : "full";
        if (!noomega) filter["omega_filter"] = 2.0;
      }
      doc["filter"] = filter;
      doc["plant"] = {{"m1", 1.0},        {"m2", 1.0},        {"l", 1.0},     {"g", 9.81},
                      {"radius", 4.0},    {"q0", {2.0, 2.5}}, {"qd0", {0.0, 0.0}}};
      json terms = json::array();
      for (int ch = 0; ch < 2; ++ch) {
        terms.push_back(term(ch, 10.0, 1.0, "sin"));
        terms.push_back(term(ch, 2.0, 2.0, "sin"));
        terms.push_back(term(ch, -5.0, 5.0, "cos"));
        terms.push_back(term(ch, 10.0, 3.0, "cos"));
      }
      doc["disturbance"] = {{"terms", terms}};
      doc["nominal"] = {{"kp", {200.0, 200.0}},
                        {"kd", {35.0, 35.0}},
                        {"ref_offset", {0.0, 0.0}},
                        {"ref_amplitude", {5.0, 5.0}},
                        {"ref_frequency", 1.0},
                        {"gravity_comp", false}};
      break;
    }
  }
  return doc;
}

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

void check_against(const json& tmpl, const json& value, const std::string& path);

void check_terms(const json& value, const std::string& path) {
  if (!value.is_array()) throw ConfigError(path + ": expected an array");
  for (std::size_t i = 0; i < value.size(); ++i) {
    check_against(term_template(), value[i], path + "." + std::to_string(i));
  }
}

void check_against(const json& tmpl, const json& value, const std::string& path) {
  if (auto_keys().count(path)) {
    if (value.is_number() || (value.is_string() && value.get<std::string>() == "auto")) return;
    throw ConfigError(path + ": expected a number or \"auto\"");
  }
  if (path == "disturbance.terms") {
    check_terms(value, path);
    return;
  }
  if (tmpl.is_object()) {
    if (!value.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [k, v] : value.items()) {
      if (!tmpl.contains(k)) throw ConfigError("unknown key '" + join_path(path, k) + "'");
      check_against(tmpl.at(k), v, join_path(path, k));
    }
    return;
  }
  if (tmpl.is_array()) {
    if (!value.is_array()) throw ConfigError(path + ": expected an array");
    for (const auto& v : value) {
      if (!v.is_number()) throw ConfigError(path + ": expected an array of numbers");
    }
    return;
  }
  if (tmpl.is_number_integer() || tmpl.is_number_unsigned()) {
    if (!(value.is_number_integer() || value.is_number_unsigned())) {
      throw ConfigError(path + ": expected an integer");
    }
    return;
  }
  if (tmpl.is_number()) {
    if (!value.is_number()) throw ConfigError(path + ": expected a number");
    return;
  }
  if (tmpl.is_boolean()) {
    if (!value.is_boolean()) throw ConfigError(path + ": expected true or false");
    return;
  }
  if (tmpl.is_string()) {
    if (!value.is_string()) throw ConfigError(path + ": expected a string");
    return;
  }
  throw ConfigError(path + ": unsupported value");
}

json normalize_terms(const json& terms) {
  json out = json::array();
  for (const auto& t : terms) {
    json full = term_template();
    full.update(t);
    out.push_back(full);
  }
  return out;
}

void merge_into(json& dst, const json& src, const std::string& path) {
  for (const auto& [k, v] : src.items()) {
    const std::string p = join_path(path, k);
    if (p == "disturbance.terms") {
      dst[k] = normalize_terms(v);
    } else if (v.is_object() && dst[k].is_object()) {
      merge_into(dst[k], v, p);
    } else {
      dst[k] = v;
    }
  }
}

std::vector<std::string> split_path(std::string_view key) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : key) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts) {
    if (p.empty()) throw ConfigError("malformed key '" + std::string(key) + "'");
  }
  return parts;
}

bool parse_index(const std::string& s, std::size_t& out) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  out = std::stoul(s);
  return true;
}

// ---------------------------------------------------------------- reading

double number(const json& j, const char* key) { return j.at(key).get<double>(); }

std::vector<double> numbers(const json& j, const char* key) {
  return j.at(key).get<std::vector<double>>();
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Vector fixed_vector(const json& j, const char* key, int size, const std::string& where) {
  const auto v = numbers(j, key);
  if (static_cast<int>(v.size()) != size) {
    throw ConfigError(where + "." + key + ": expected " + std::to_string(size) + " entries, got " +
                      std::to_string(v.size()));
  }
  return to_vector(v);
}

SimConfig read_sim(const json& s) {
  SimConfig cfg;
  cfg.t0 = number(s, "t0");
  cfg.tf = number(s, "tf");
  cfg.dt = number(s, "dt");
  cfg.log_stride = s.at("log_stride").get<int>();
  cfg.substeps = s.at("substeps").get<int>();
  const auto hold = s.at("hold").get<std::string>();
  if (hold == "zoh") {
    cfg.hold = HoldMode::kZeroOrder;
  } else if (hold == "stage") {
    cfg.hold = HoldMode::kStage;
  } else {
    throw ConfigError("sim.hold must be \"zoh\" or \"stage\"");
  }
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
  return cfg;
}

DisturbanceSignal read_disturbance(const json& d, int channels) {
  std::vector<DisturbanceTerm> terms;
  for (const auto& t : d.at("terms")) {
    DisturbanceTerm term;
    term.channel = t.at("channel").get<int>();
    if (term.channel < 0 || term.channel >= channels) {
      throw ConfigError("disturbance term channel " + std::to_string(term.channel) +
                        " out of range (plant has " + std::to_string(channels) + ")");
    }
    term.amplitude = number(t, "amplitude");
    term.frequency = number(t, "frequency");
    term.phase = number(t, "phase");
    const auto w = t.at("waveform").get<std::string>();
    if (w == "sin") {
      term.waveform = Waveform::kSin;
    } else if (w == "cos") {
      term.waveform = Waveform::kCos;
    } else {
      throw ConfigError("disturbance waveform must be \"sin\" or \"cos\"");
    }
    terms.push_back(term);
  }
  return DisturbanceSignal(channels, std::move(terms));
}

OmegaMode read_mode(const json& f) {
  if (!f.contains("mode")) return OmegaMode::kFull;
  const auto m = f.at("mode").get<std::string>();
  if (m == "full") return OmegaMode::kFull;
  if (m == "no_omega") return OmegaMode::kNoOmega;
  throw ConfigError("filter.mode must be \"full\" or \"no_omega\"");
}

double resolve_auto(json& f, const char* key, double fallback) {
  if (!f.contains(key)) return fallback;
  if (f.at(key).is_string()) f[key] = fallback;
  const double v = f.at(key).get<double>();
  if (!std::isfinite(v) || v < 0.0) {
    throw ConfigError(std::string("filter.") + key + " must be finite and non-negative");
  }
  return v;
}

void require_positive(double v, const std::string& name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(name + " must be positive and finite");
}

// Tracking reference offset + amplitude cos(frequency t) per position.
struct Reference {
  Vector offset;
  Vector amplitude;
  double frequency = 0.0;

  Vector value(double t) const { return offset + amplitude * std::cos(frequency * t); }
  Vector rate(double t) const { return -amplitude * frequency * std::sin(frequency * t); }
};

Reference read_reference(const json& nom, int size) {
  Reference r;
  r.offset = fixed_vector(nom, "ref_offset", size, "nominal");
  r.amplitude = fixed_vector(nom, "ref_amplitude", size, "nominal");
  r.frequency = number(nom, "ref_frequency");
  return r;
}

Check make_check(std::string name, bool pass, double margin, std::string detail,
                 bool advisory = false) {
  return Check{std::move(name), pass, margin, std::move(detail), advisory};
}

std::string fmt(double v) { return format_number(v); }

void add_bound_checks(Report& rep, const SignalBounds& derived, double omega,
                      std::optional<double> omega_filter, OmegaMode mode) {
  const double slack = 1e-9 * std::max(1.0, derived.max_derivative_norm);
  rep.add(make_check("omega_covers_bound", omega + slack >= derived.max_derivative_norm,
                     omega - derived.max_derivative_norm,
                     "omega " + fmt(omega) + " vs max |d'| " + fmt(derived.max_derivative_norm),
                     true));
  if (mode == OmegaMode::kNoOmega) {
    rep.add(make_check("omega_term_included", false, 0.0,
                       "omega term withheld from the constraint", true));
  } else if (omega_filter) {
    rep.add(make_check("omega_filter_covers_bound", *omega_filter + slack >= omega,
                       *omega_filter - omega,
                       "constraint omega " + fmt(*omega_filter) + " vs bound " + fmt(omega), true));
  }
}

void add_gain_checks(Report& rep, const ObserverConfig& obs, const ControlAffineSystem& sys,
                     const std::vector<Vector>& samples, std::uint64_t seed) {
  rep.add(make_check("kappa_positive", obs.kappa() > 0.0, obs.kappa(),
                     "kappa = alpha - nu/2 = " + fmt(obs.kappa())));
  GainCheckOptions opts;
  opts.seed = seed;
  opts.gain_tol = 1e-9 * std::max(1.0, obs.alpha);
  const GainReport g = validate_gain(obs, sys, samples, opts);
  rep.add(make_check("observer_gain", g.worst_gain_margin >= -opts.gain_tol, g.worst_gain_margin,
                     "min v'L_d g2 v = " + fmt(g.min_decay) + " over " +
                         std::to_string(g.samples) + " samples, alpha = " + fmt(obs.alpha)));
  rep.add(make_check("observer_jacobian", g.worst_jacobian_error <= opts.jacobian_tol,
                     opts.jacobian_tol - g.worst_jacobian_error,
                     "max relative |dp/dx - L_d| = " + fmt(g.worst_jacobian_error)));
}

std::vector<Vector> box_samples(int n, double half, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) {
    Vector x(n);
    for (int k = 0; k < n; ++k) x[k] = u(rng);
    out.push_back(x);
  }
  return out;
}

// Everything needed to simulate and judge one configuration.
struct Built {
  ScenarioInfo info{};
  json resolved;
  json derived = json::object();
  ClosedLoopModel model;
  Vector x0;
  ObserverState z0;
  SimConfig sim;
  MetricsOptions mopts;
  Report validation;
  OmegaMode mode = OmegaMode::kFull;
  bool relr = false;
  std::vector<int> pos;
  std::string position_label;
  std::string input_label;
};

void build_generic(Built& b, json& doc) {
  const bool scalar = b.info.family == Family::kScalar;
  const int n = scalar ? 1 : 2;
  json& f = doc["filter"];
  const json& plant = doc.at("plant");
  b.relr = !scalar;
  b.pos = {0};
  b.position_label = "x";
  b.input_label = "u";

  Matrix gcol(n, 1);
  if (scalar) {
    gcol << 1.0;
  } else {
    gcol << 0.0, 1.0;
  }
  ControlAffineSystem sys;
  sys.n = n;
  sys.m = 1;
  sys.p = 1;
  sys.f = [scalar](const Vector& x) {
    if (scalar) return Vector(Vector::Zero(1));
    Vector dx(2);
    dx << x[1], 0.0;
    return dx;
  };
  sys.g1 = [gcol](const Vector&) { return gcol; };
  sys.g2 = [gcol](const Vector&) { return gcol; };

  BarrierSpec bar;
  if (scalar) {
    bar.h = [](const Vector& x) { return x[0]; };
    bar.grad_h = [](const Vector&) { return RowVector(RowVector::Ones(1)); };
  } else {
    const double limit = number(plant, "limit");
    bar.h = [limit](const Vector& x) { return limit - x[0]; };
    bar.grad_h = [](const Vector&) {
      RowVector g(2);
      g << -1.0, 0.0;
      return g;
    };
    bar.relative_degree = 2;
    bar.lie_f = {[](const Vector& x) { return -x[1]; }, [](const Vector&) { return 0.0; }};
    bar.lie_g1_fr = [](const Vector&) { return RowVector(RowVector::Constant(1, -1.0)); };
    bar.lie_g2_fr = [](const Vector&) { return RowVector(RowVector::Constant(1, -1.0)); };
    bar.poles = numbers(f, "poles");
  }
  try {
    bar.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("barrier: ") + e.what());
  }

  b.x0 = fixed_vector(plant, "x0", n, "plant");
  b.model.disturbance = read_disturbance(doc.at("disturbance"), 1);
  const SignalBounds bounds = derive_bounds(b.model.disturbance, b.sim.t0, b.sim.tf);
  const double omega = resolve_auto(f, "omega", bounds.max_derivative_norm);
  const double omega_filter = resolve_auto(f, "omega_filter", omega);
  b.mode = read_mode(f);

  FilterParams fp;
  fp.alpha = number(f, "alpha");
  fp.beta = number(f, "beta");
  fp.gamma = scalar ? number(f, "gamma") : 0.0;
  fp.nu = number(f, "nu");
  fp.omega = omega_filter;
  fp.mode = b.mode;
  require_positive(fp.alpha, "filter.alpha");
  require_positive(fp.beta, "filter.beta");
  require_positive(fp.nu, "filter.nu");
  if (scalar) require_positive(fp.gamma, "filter.gamma");

  const ObserverConfig obs = constant_gain_observer(gcol, fp.alpha, fp.nu, omega);
  b.model.plant = sys;
  b.model.observer = obs;
  b.z0 = zero_estimate_state(obs, b.x0);

  const json& nom = doc.at("nominal");
  const Vector kp = fixed_vector(nom, "kp", 1, "nominal");
  const Vector kd = fixed_vector(nom, "kd", 1, "nominal");
  const Reference ref = read_reference(nom, 1);
  auto nominal = [kp, kd, ref, scalar](double t, const Vector& x) {
    Vector u(1);
    u[0] = kp[0] * (ref.value(t)[0] - x[0]);
    if (!scalar) u[0] += kd[0] * (ref.rate(t)[0] - x[1]);
    return u;
  };
  const bool relr = b.relr;
  b.model.control = [sys, bar, fp, nominal, relr](double t, const Vector& x, const Vector& dh) {
    ControlDecision d;
    d.u_nom = nominal(t, x);
    const ConstraintCoeffs c = relr ? psi_relr(sys, bar, fp, x, dh) : psi_rel1(sys, bar, fp, x, dh);
    const QpResult r = solve(QpInstance{d.u_nom, c.psi0, c.psi1});
    d.u = r.u;
    d.psi0 = c.psi0;
    d.psi1 = c.psi1;
    d.status = from_qp(r.status);
    return d;
  };
  b.model.monitor.h = bar.h;
  b.model.monitor.hbar = [sys, bar, fp](const Vector& x, const Vector& e) {
    return augmented_barrier(sys, bar, fp, x, e).value;
  };
  if (relr) {
    b.model.monitor.s_values = [sys, bar](const Vector& x) { return s_sequence(sys, bar, x); };
  }
  b.model.reference = [ref](double t) { return ref.value(t); };
  b.model.tracked = b.pos;

  const Vector d0 = b.model.disturbance.value(b.sim.t0);
  const double e0 = (estimate(obs, b.z0, b.x0) - d0).norm();
  const std::vector<double> s0 =
      relr ? s_sequence(sys, bar, b.x0) : std::vector<double>{bar.h(b.x0)};
  b.validation = validate_params(bar, fp, s0, e0);
  add_gain_checks(b.validation, obs, sys, box_samples(n, 5.0, 64, doc.at("seed").get<std::uint64_t>()),
                  doc.at("seed").get<std::uint64_t>());
  const double grad_err = check_gradient(bar, b.x0);
  b.validation.add(make_check("barrier_gradient", grad_err <= 1e-6, 1e-6 - grad_err,
                              "finite-difference mismatch " + fmt(grad_err)));
  add_bound_checks(b.validation, bounds, omega, omega_filter, b.mode);

  b.mopts.envelope = EnvelopeSpec{obs, e0};
  if (b.mode == OmegaMode::kFull) {
    b.mopts.hbar_rate = relr ? bar.poles.back() : fp.gamma;
  } else if (!relr) {
    FilterParams floor = fp;
    floor.omega = omega;
    b.mopts.floor = floor;
  }

  b.derived["omega"] = omega;
  b.derived["omega_filter"] = omega_filter;
  b.derived["derived_max_abs_d"] = bounds.max_norm;
  b.derived["derived_max_abs_d_rate"] = bounds.max_derivative_norm;
  b.derived["kappa"] = obs.kappa();
  b.derived["ultimate_bound"] = ultimate_bound(obs);
  b.derived["e0_norm"] = e0;
}

void build_arm(Built& b, json& doc) {
  json& f = doc["filter"];
  const json& plant = doc.at("plant");
  b.pos = {0, 1};
  b.position_label = "q";
  b.input_label = "tau";

  TwoLinkArm arm;
  arm.m1 = number(plant, "m1");
  arm.m2 = number(plant, "m2");
  arm.l = number(plant, "l");
  arm.g_accel = number(plant, "g");
  require_positive(arm.m1, "plant.m1");
  require_positive(arm.m2, "plant.m2");
  require_positive(arm.l, "plant.l");
  const ELSystem sys = arm.system();
  const double radius = number(plant, "radius");
  require_positive(radius, "plant.radius");
  const ELBarrier bar = disk_barrier(radius);

  const Vector q0 = fixed_vector(plant, "q0", 2, "plant");
  const Vector qd0 = fixed_vector(plant, "qd0", 2, "plant");
  b.x0.resize(4);
  b.x0 << q0, qd0;

  b.model.disturbance = read_disturbance(doc.at("disturbance"), 2);
  const SignalBounds bounds = derive_bounds(b.model.disturbance, b.sim.t0, b.sim.tf);
  const double omega = resolve_auto(f, "omega", bounds.max_derivative_norm);
  const double omega_filter = resolve_auto(f, "omega_filter", omega);
  const double d_max = resolve_auto(f, "d_max", bounds.max_norm);
  b.mode = read_mode(f);

  const int grid = f.at("mu_grid").get<int>();
  if (grid < 3) throw ConfigError("filter.mu_grid must be at least 3");
  const auto [mu1, mu2] = mu_bounds(sys, planar_q2_grid(grid));

  ELFilterParams fp;
  const double alpha = number(f, "alpha");
  require_positive(alpha, "filter.alpha");
  const auto interp = f.at("alpha_interpretation").get<std::string>();
  if (interp == "alpha1") {
    fp.alpha1 = alpha;
  } else if (interp == "effective") {
    fp.alpha1 = alpha / mu1;
  } else {
    throw ConfigError("filter.alpha_interpretation must be \"alpha1\" or \"effective\"");
  }
  fp.mu1 = mu1;
  fp.beta = number(f, "beta");
  fp.gamma = number(f, "gamma");
  fp.nu = number(f, "nu");
  fp.omega = omega_filter;
  fp.eps_singular = number(f, "eps_singular");
  fp.mode = b.mode;
  require_positive(fp.beta, "filter.beta");
  require_positive(fp.gamma, "filter.gamma");
  require_positive(fp.nu, "filter.nu");
  if (!(fp.eps_singular >= 0.0)) throw ConfigError("filter.eps_singular must be non-negative");

  const ControlAffineSystem cas = el_as_control_affine(sys);
  const ObserverConfig obs = el_observer_config(sys, fp, omega);
  b.model.plant = cas;
  b.model.observer = obs;
  b.z0 = zero_estimate_state(obs, b.x0);

  const json& nom = doc.at("nominal");
  const PdGains gains{fixed_vector(nom, "kp", 2, "nominal"), fixed_vector(nom, "kd", 2, "nominal")};
  const Reference ref = read_reference(nom, 2);
  const bool gravity_comp = nom.at("gravity_comp").get<bool>();
  const FilterKind kind = b.info.kind;
  const double beta = fp.beta;
  const double gamma = fp.gamma;

  b.model.control = [sys, bar, fp, gains, ref, gravity_comp, kind, beta, gamma, d_max](
                        double t, const Vector& x, const Vector& dh) {
    const Vector q = x.head(2);
    const Vector qd = x.tail(2);
    ControlDecision d;
    d.u_nom = pd_nominal(gains, q, qd, ref.value(t), ref.rate(t),
                         gravity_comp ? std::optional<Vector>(sys.G(q)) : std::nullopt);
    if (kind == FilterKind::kNone) {
      d.u = d.u_nom;
      d.status = ControlStatus::kUnfiltered;
      return d;
    }
    const ConstraintCoeffs c = kind == FilterKind::kDob
                                   ? el_psi(sys, bar, fp, q, qd, dh)
                                   : el_robust_psi(sys, bar, beta, gamma, d_max, q, qd);
    d.psi0 = c.psi0;
    d.psi1 = c.psi1;
    const GuardDecision g = singularity_guard(fp, qd, c.psi0);
    if (g.bypass) {
      d.u = d.u_nom;
      d.status = ControlStatus::kBypassed;
      d.guard_event = g.infeasible_event;
      return d;
    }
    const QpResult r = solve(QpInstance{d.u_nom, c.psi0, c.psi1});
    d.u = r.u;
    d.status = from_qp(r.status);
    return d;
  };
  b.model.monitor.h = [bar](const Vector& x) { return bar.h(x.head(2)); };
  b.model.monitor.hbar = [sys, bar, beta](const Vector& x, const Vector& e) {
    return el_augmented_barrier(sys, bar, beta, x.head(2), x.tail(2), e);
  };
  b.model.reference = [ref](double t) { return ref.value(t); };
  b.model.tracked = b.pos;

  // Validation.
  const std::uint64_t seed = doc.at("seed").get<std::uint64_t>();
  ModelCheckOptions mco;
  mco.seed = seed;
  b.validation = validate_el_model(sys, mu1, mu2, mco);
  const Vector d0 = b.model.disturbance.value(b.sim.t0);
  const Vector tau_hat0 = estimate(obs, b.z0, b.x0);
  const double e0 = (tau_hat0 - d0).norm();
  const double h0 = bar.h(q0);
  const double ke0 = qd0.dot(sys.M(q0) * qd0);
  b.validation.add(make_check("h_initial_positive", h0 > 0.0, h0, "h_q(q0) = " + fmt(h0)));
  if (kind != FilterKind::kNone) {
    const double a_thr = 0.5 * (fp.gamma + fp.nu);
    b.validation.add(make_check("alpha_bound", fp.alpha() > a_thr, fp.alpha() - a_thr,
                                "alpha1*mu1 = " + fmt(fp.alpha()) + " vs (gamma+nu)/2 = " +
                                    fmt(a_thr)));
  }
  if (kind == FilterKind::kDob) {
    const double b_thr = h0 > 0.0 ? (ke0 + e0 * e0) / (2.0 * h0)
                                   : std::numeric_limits<double>::infinity();
    b.validation.add(make_check("beta_bound", fp.beta > b_thr, fp.beta - b_thr,
                                "beta = " + fmt(fp.beta) + " vs " + fmt(b_thr)));
  }
  if (kind == FilterKind::kRobust) {
    const double v = fp.beta * h0 - 0.5 * ke0;
    b.validation.add(make_check("robust_barrier_initial", v > 0.0, v,
                                "beta h_q - q'Mq'/2 at start = " + fmt(v)));
    const double slack = 1e-9 * std::max(1.0, bounds.max_norm);
    b.validation.add(make_check("d_max_covers_bound", d_max + slack >= bounds.max_norm,
                                d_max - bounds.max_norm,
                                "d_max " + fmt(d_max) + " vs max |d| " + fmt(bounds.max_norm),
                                true));
  }
  std::vector<Vector> samples;
  for (const auto& q : planar_q2_grid(grid)) {
    Vector x(4);
    x << q, Vector::Zero(2);
    samples.push_back(x);
  }
  add_gain_checks(b.validation, obs, cas, samples, seed);
  add_bound_checks(b.validation, bounds, omega,
                   kind == FilterKind::kDob ? std::optional<double>(omega_filter) : std::nullopt,
                   b.mode);

  b.mopts.envelope = EnvelopeSpec{obs, e0};
  if (kind == FilterKind::kDob) {
    if (b.mode == OmegaMode::kFull) {
      b.mopts.hbar_rate = fp.gamma;
    } else {
      FilterParams floor;
      floor.alpha = fp.alpha();
      floor.beta = fp.beta;
      floor.gamma = fp.gamma;
      floor.nu = fp.nu;
      floor.omega = omega;
      floor.mode = OmegaMode::kNoOmega;
      b.mopts.floor = floor;
    }
  }

  b.derived["omega"] = omega;
  b.derived["omega_filter"] = omega_filter;
  b.derived["d_max"] = d_max;
  b.derived["derived_max_abs_d"] = bounds.max_norm;
  b.derived["derived_max_abs_d_rate"] = bounds.max_derivative_norm;
  b.derived["mu1"] = mu1;
  b.derived["mu2"] = mu2;
  b.derived["alpha1"] = fp.alpha1;
  b.derived["alpha_effective"] = fp.alpha();
  b.derived["kappa"] = obs.kappa();
  b.derived["ultimate_bound"] = ultimate_bound(obs);
  b.derived["e0_norm"] = e0;
  b.derived["remark_rest_margin"] =
      h0 - omega_filter * omega_filter / (2.0 * fp.nu * fp.gamma * fp.beta);
}

Built build(const ScenarioConfig& cfg) {
  Built b;
  b.info = info(cfg.scenario());
  json doc = cfg.doc();
  try {
    b.sim = read_sim(doc.at("sim"));
    if (b.info.family == Family::kArm) {
      build_arm(b, doc);
    } else {
      build_generic(b, doc);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(e.what());
  } catch (const ConfigurationError& e) {
    throw ConfigError(e.what());
  }
  b.resolved = doc;
  return b;
}

json check_json(const Check& c) {
  return json{{"name", c.name},
              {"pass", c.pass},
              {"margin", c.margin},
              {"advisory", c.advisory},
              {"detail", c.detail}};
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << text;
  if (!os) throw InputError("failed writing " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> scenario_ids() {
  std::vector<std::string> out;
  for (const auto& s : kScenarios) out.emplace_back(s.id);
  return out;
}

// ---------------------------------------------------------------- config

ScenarioConfig::ScenarioConfig(std::string scenario, json doc)
    : scenario_(std::move(scenario)), doc_(std::move(doc)) {}

ScenarioConfig ScenarioConfig::defaults(std::string_view scenario_id) {
  const ScenarioInfo& s = info(scenario_id);
  return ScenarioConfig(s.id, default_doc(s));
}

ScenarioConfig ScenarioConfig::parse(std::string_view text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!in.is_object()) throw ConfigError("configuration must be a JSON object");
  if (!in.contains("scenario") || !in.at("scenario").is_string()) {
    throw ConfigError("configuration needs a \"scenario\" string");
  }
  ScenarioConfig cfg = defaults(in.at("scenario").get<std::string>());
  check_against(cfg.doc_, in, "");
  merge_into(cfg.doc_, in, "");
  return cfg;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read configuration " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void ScenarioConfig::set(std::string_view key, std::string_view value_text) {
  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = std::string(value_text);
  }
  set_json(key, value);
}

void ScenarioConfig::set_json(std::string_view key, const json& value) {
  const auto parts = split_path(key);
  if (parts.front() == "scenario") throw ConfigError("the scenario id cannot be overridden");
  const json tmpl_root = default_doc(info(scenario_));
  const json* tmpl = &tmpl_root;
  json* node = &doc_;
  std::string path;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& part = parts[i];
    const bool last = i + 1 == parts.size();
    std::size_t idx = 0;
    if (node->is_array() && parse_index(part, idx)) {
      if (idx >= node->size()) throw ConfigError("index out of range in '" + std::string(key) + "'");
      const bool terms = path == "disturbance.terms";
      path = join_path(path, part);
      static const json number_tmpl = 0.0;
      tmpl = terms ? &term_template() : &number_tmpl;
      node = &(*node)[idx];
      if (last) {
        if (terms) {
          check_against(*tmpl, value, path);
          json full = term_template();
          full.update(value);
          *node = full;
        } else {
          if (!value.is_number()) throw ConfigError(path + ": expected a number");
          *node = value;
        }
      }
      continue;
    }
    if (!tmpl->is_object() || !tmpl->contains(part)) {
      throw ConfigError("unknown key '" + std::string(key) + "'");
    }
    path = join_path(path, part);
    tmpl = &tmpl->at(part);
    node = &(*node)[part];
    if (last) {
      check_against(*tmpl, value, path);
      if (path == "disturbance.terms") {
        *node = normalize_terms(value);
      } else if (value.is_object()) {
        merge_into(*node, value, path);
      } else {
        *node = value;
      }
    }
  }
}

std::string ScenarioConfig::serialize() const { return doc_.dump(2) + "\n"; }

// ---------------------------------------------------------------- runs

ExitCode RunOutcome::exit_code() const {
  if (sim.status != RunStatus::kOk) return ExitCode::kNumericalFailure;
  for (const auto& inv : invariants) {
    if (inv.enforced && !inv.check.pass) return ExitCode::kInvariantFailure;
  }
  return ExitCode::kPass;
}

json RunOutcome::metrics_json() const {
  json m;
  m["rows"] = summary.rows;
  m["min_h"] = summary.min_h;
  m["min_hbar"] = summary.min_hbar;
  m["min_s"] = summary.min_s;
  m["max_envelope_residual"] = opt(summary.max_envelope_residual);
  m["rmse"] = opt(summary.rmse);
  m["min_proof_rate_residual"] = opt(summary.min_proof_rate_residual);
  m["min_floor_margin"] = opt(summary.min_floor_margin);
  m["mean_ed_tail"] = summary.mean_ed_tail;
  m["max_ed"] = summary.max_ed;
  m["max_u_norm"] = summary.max_u_norm;
  m["steps"] = sim.log.counts.steps;
  m["active_steps"] = summary.active_steps;
  m["infeasible_steps"] = summary.infeasible_steps;
  m["bypassed_steps"] = summary.bypassed_steps;
  m["guard_events"] = summary.guard_events;

  json inv = json::array();
  for (const auto& i : invariants) {
    json c = check_json(i.check);
    c.erase("advisory");
    c["enforced"] = i.enforced;
    inv.push_back(c);
  }
  return json{{"scenario", scenario},
              {"status", std::string(to_string(sim.status))},
              {"message", sim.message},
              {"exit_code", static_cast<int>(exit_code())},
              {"certified", certified},
              {"metrics", m},
              {"invariants", inv},
              {"derived", derived}};
}

json RunOutcome::validation_json() const {
  json checks = json::array();
  for (const auto& c : validation.checks) checks.push_back(check_json(c));
  return json{{"scenario", scenario},
              {"pass", validation.pass()},
              {"certified", certified},
              {"checks", checks}};
}

Report validate_scenario(const ScenarioConfig& cfg, bool* certified) {
  Built b = build(cfg);
  if (certified) *certified = b.validation.all_pass();
  return b.validation;
}

RunOutcome run_scenario(const ScenarioConfig& cfg) {
  Built b = build(cfg);
  RunOutcome out;
  out.scenario = cfg.scenario();
  out.resolved = b.resolved;
  out.derived = b.derived;
  out.validation = b.validation;
  out.certified = b.validation.all_pass();
  out.position_indices = b.pos;
  out.position_label = b.position_label;
  out.input_label = b.input_label;

  out.sim = run_closed_loop(b.model, b.x0, b.z0, b.sim);
  out.summary = metrics(out.sim.log, b.mopts);
  const Metrics& mt = out.summary;

  const bool ok = out.sim.status == RunStatus::kOk;
  out.invariants.push_back(
      {make_check("run_completed", ok, ok ? 0.0 : -1.0,
                  ok ? "integrated to tf" : out.sim.message),
       true});

  const FilterKind kind = b.info.kind;
  const bool filtered_full = kind != FilterKind::kNone && b.mode == OmegaMode::kFull;
  {
    double worst = mt.min_h;
    std::string detail = "min h = " + fmt(mt.min_h);
    for (std::size_t k = 0; k < mt.min_s.size(); ++k) {
      worst = std::min(worst, mt.min_s[k]);
      detail += ", min s" + std::to_string(k) + " = " + fmt(mt.min_s[k]);
    }
    out.invariants.push_back(
        {make_check("safety", worst >= -1e-6, worst + 1e-6, detail), filtered_full});
  }
  if (mt.max_envelope_residual) {
    const double r = *mt.max_envelope_residual;
    out.invariants.push_back({make_check("observer_envelope", r <= 1e-3, 1e-3 - r,
                                         "max |e_d| - E(t) = " + fmt(r)),
                              true});
  }
  if (mt.min_proof_rate_residual) {
    const double r = *mt.min_proof_rate_residual;
    out.invariants.push_back(
        {make_check("proof_rate", r >= -1e-4, r + 1e-4,
                    "min hbar(t+dt) - (1 - rate dt) hbar(t) = " + fmt(r) +
                        (out.certified ? "" : " (parameters not certified)")),
         out.certified && filtered_full});
  }
  if (mt.min_floor_margin) {
    const double r = *mt.min_floor_margin;
    out.invariants.push_back({make_check("violation_floor", r >= -1e-4, r + 1e-4,
                                         "min h(t) - floor(t) = " + fmt(r)),
                              true});
  }
  if (kind != FilterKind::kNone) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& row : out.sim.log.rows) {
      if (row.status == ControlStatus::kActive || row.status == ControlStatus::kInactive) {
        worst = std::min(worst, row.psi0 + row.psi1u);
      }
    }
    out.invariants.push_back({make_check("qp_constraint", worst >= -1e-9, worst + 1e-9,
                                         "min psi0 + psi1 u over solved rows = " + fmt(worst)),
                              true});
    const long inf = mt.infeasible_steps + mt.guard_events;
    out.invariants.push_back(
        {make_check("feasibility", inf == 0, -static_cast<double>(inf),
                    std::to_string(mt.infeasible_steps) + " infeasible steps, " +
                        std::to_string(mt.guard_events) + " guard events with psi0 < 0"),
         false});
  }
  return out;
}

// ---------------------------------------------------------------- files

void write_outputs(const RunOutcome& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "trajectory.csv", std::ios::binary);
    if (!os) throw InputError("cannot write " + (dir / "trajectory.csv").string());
    out.sim.log.write_csv(os);
  }
  write_text(dir / "metrics.json", out.metrics_json().dump(2) + "\n");
  write_text(dir / "validation.json", out.validation_json().dump(2) + "\n");
  write_text(dir / "config.json", out.resolved.dump(2) + "\n");
  if (!out.sim.log.rows.empty()) emit_plotdata(out, dir / "plots");
}

std::vector<std::filesystem::path> emit_plotdata(const RunOutcome& out,
                                                 const std::filesystem::path& dir) {
  const TrajectoryLog& log = out.sim.log;
  if (log.rows.empty()) throw InputError("emit_plotdata: empty trajectory");
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;

  auto write = [&](const std::string& name, const std::string& header,
                   const std::function<void(std::ostream&, const LogRow&)>& row_fn) {
    const auto path = dir / (name + ".csv");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InputError("cannot write " + path.string());
    os << header << "\n";
    for (const auto& r : log.rows) {
      os << format_number(r.t);
      row_fn(os, r);
      os << "\n";
    }
    written.push_back(path);
  };

  for (std::size_t i = 0; i < out.position_indices.size(); ++i) {
    const int idx = out.position_indices[i];
    const std::string name = out.position_label + std::to_string(i + 1);
    const bool has_ref = static_cast<int>(i) < log.ref_count;
    write(name, "t," + name + (has_ref ? "," + name + "_ref" : ""),
          [&](std::ostream& os, const LogRow& r) {
            os << "," << format_number(r.x[idx]);
            if (has_ref) os << "," << format_number(r.ref[i]);
          });
  }
  write("h", "t,h,hbar", [](std::ostream& os, const LogRow& r) {
    os << "," << format_number(r.h) << "," << format_number(r.hbar);
  });
  {
    std::string header = "t";
    for (int k = 0; k < log.p; ++k) header += ",d" + std::to_string(k + 1);
    for (int k = 0; k < log.p; ++k) header += ",d_hat" + std::to_string(k + 1);
    write("disturbance", header, [&](std::ostream& os, const LogRow& r) {
      for (int k = 0; k < log.p; ++k) os << "," << format_number(r.d[k]);
      for (int k = 0; k < log.p; ++k) os << "," << format_number(r.d_hat[k]);
    });
  }
  for (int j = 0; j < log.m; ++j) {
    const std::string name = out.input_label + std::to_string(j + 1);
    write(name, "t," + name + "," + name + "_nom", [&](std::ostream& os, const LogRow& r) {
      os << "," << format_number(r.u[j]) << "," << format_number(r.u_nom[j]);
    });
  }
  return written;
}

json compare(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b) {
  const json ca = read_json_file(dir_a / "config.json");
  const json cb = read_json_file(dir_b / "config.json");
  const json ma = read_json_file(dir_a / "metrics.json");
  const json mb = read_json_file(dir_b / "metrics.json");
  for (const char* key : {"plant", "disturbance", "nominal", "sim"}) {
    if (!ca.contains(key) || !cb.contains(key)) {
      throw ConfigError(std::string("compare: config.json lacks '") + key + "'");
    }
    if (ca.at(key) != cb.at(key)) {
      throw ConfigError(std::string("compare: runs differ in '") + key +
                        "'; only runs sharing plant, disturbance, nominal law and grid pair up");
    }
  }
  auto summary = [](const std::filesystem::path& dir, const json& m) {
    const json& mt = m.at("metrics");
    return json{{"dir", dir.string()},
                {"scenario", m.at("scenario")},
                {"status", m.at("status")},
                {"certified", m.at("certified")},
                {"min_h", mt.at("min_h")},
                {"rmse", mt.at("rmse")},
                {"max_u_norm", mt.at("max_u_norm")},
                {"active_steps", mt.at("active_steps")},
                {"safe", mt.at("min_h").is_number() && mt.at("min_h").get<double>() >= -1e-6}};
  };
  const json a = summary(dir_a, ma);
  const json b = summary(dir_b, mb);
  json delta;
  json flags;
  const double ha = a.at("min_h").get<double>();
  const double hb = b.at("min_h").get<double>();
  delta["min_h"] = ha - hb;
  flags["a_closer_to_boundary"] = ha < hb;
  if (a.at("rmse").is_number() && b.at("rmse").is_number()) {
    const double ra = a.at("rmse").get<double>();
    const double rb = b.at("rmse").get<double>();
    delta["rmse"] = ra - rb;
    flags["a_tracks_better"] = ra < rb;
  } else {
    delta["rmse"] = nullptr;
  }
  flags["a_safe"] = a.at("safe");
  flags["b_safe"] = b.at("safe");
  return json{{"a", a}, {"b", b}, {"delta", delta}, {"flags", flags}};
}

}  // namespace dobcbf::experiments
