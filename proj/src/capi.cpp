#include "dobcbf/dobcbf.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include "dobcbf/experiments.hpp"
#include "dobcbf/qp.hpp"

struct dobcbf_config {
  dobcbf::experiments::ScenarioConfig cfg;
};

struct dobcbf_run {
  dobcbf::experiments::RunOutcome outcome;
  nlohmann::json metrics;
};

namespace {

thread_local std::string g_last_error;

dobcbf_status fail(dobcbf_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <class Fn>
dobcbf_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    return fn();
  } catch (const dobcbf::experiments::ConfigError& e) {
    return fail(DOBCBF_ERR_CONFIG, e.what());
  } catch (const dobcbf::ConfigurationError& e) {
    return fail(DOBCBF_ERR_CONFIG, e.what());
  } catch (const dobcbf::ParameterError& e) {
    return fail(DOBCBF_ERR_CONFIG, e.what());
  } catch (const dobcbf::NumericalError& e) {
    return fail(DOBCBF_ERR_NUMERICAL, e.what());
  } catch (const dobcbf::ModelError& e) {
    return fail(DOBCBF_ERR_MODEL, e.what());
  } catch (const dobcbf::InputError& e) {
    return fail(DOBCBF_ERR_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(DOBCBF_ERR_IO, e.what());
  } catch (const dobcbf::Error& e) {
    return fail(DOBCBF_ERR_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(DOBCBF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DOBCBF_ERR_INTERNAL, "unknown error");
  }
}

dobcbf_status copy_out(const std::string& text, char* buf, size_t capacity, size_t* needed) {
  if (needed) *needed = text.size() + 1;
  if (!buf) return needed ? DOBCBF_OK : fail(DOBCBF_ERR_ARGUMENT, "no output buffer");
  if (capacity < text.size() + 1) return fail(DOBCBF_ERR_ARGUMENT, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return DOBCBF_OK;
}

dobcbf_status null_arg(const char* what) {
  return fail(DOBCBF_ERR_ARGUMENT, std::string(what) + " must not be null");
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw dobcbf::InputError("cannot write " + path);
  os << text;
}

}  // namespace

extern "C" {

const char* dobcbf_version(void) { return "1.0.0"; }

const char* dobcbf_last_error(void) { return g_last_error.c_str(); }

size_t dobcbf_scenario_count(void) { return dobcbf::experiments::scenario_ids().size(); }

const char* dobcbf_scenario_id(size_t index) {
  static const std::vector<std::string> ids = dobcbf::experiments::scenario_ids();
  return index < ids.size() ? ids[index].c_str() : nullptr;
}

dobcbf_status dobcbf_config_defaults(const char* scenario, dobcbf_config** out) {
  if (!scenario) return null_arg("scenario");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new dobcbf_config{dobcbf::experiments::ScenarioConfig::defaults(scenario)};
    return DOBCBF_OK;
  });
}

dobcbf_status dobcbf_config_parse(const char* json_text, dobcbf_config** out) {
  if (!json_text) return null_arg("json_text");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new dobcbf_config{dobcbf::experiments::ScenarioConfig::parse(json_text)};
    return DOBCBF_OK;
  });
}

dobcbf_status dobcbf_config_load(const char* path, dobcbf_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  return guarded([&] {
    *out = new dobcbf_config{dobcbf::experiments::ScenarioConfig::load(path)};
    return DOBCBF_OK;
  });
}

dobcbf_status dobcbf_config_set(dobcbf_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("cfg");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return guarded([&] {
    cfg->cfg.set(key, value);
    return DOBCBF_OK;
  });
}

dobcbf_status dobcbf_config_serialize(const dobcbf_config* cfg, char* buf, size_t capacity,
                                      size_t* needed) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] { return copy_out(cfg->cfg.serialize(), buf, capacity, needed); });
}

void dobcbf_config_free(dobcbf_config* cfg) { delete cfg; }

dobcbf_status dobcbf_validate(const dobcbf_config* cfg, const char* report_path, int* pass,
                              int* certified) {
  if (!cfg) return null_arg("cfg");
  return guarded([&] {
    bool cert = false;
    const dobcbf::Report rep = dobcbf::experiments::validate_scenario(cfg->cfg, &cert);
    if (pass) *pass = rep.pass() ? 1 : 0;
    if (certified) *certified = cert ? 1 : 0;
    if (report_path) {
      dobcbf::experiments::RunOutcome shell;
      shell.scenario = cfg->cfg.scenario();
      shell.validation = rep;
      shell.certified = cert;
      write_file(report_path, shell.validation_json().dump(2) + "\n");
    }
    return DOBCBF_OK;
  });
}

dobcbf_status dobcbf_run_create(const dobcbf_config* cfg, dobcbf_run** out) {
  if (!cfg) return null_arg("cfg");
  if (!out) return null_arg("out");
  return guarded([&] {
    auto* run = new dobcbf_run{dobcbf::experiments::run_scenario(cfg->cfg), {}};
    run->metrics = run->outcome.metrics_json();
    *out = run;
    return DOBCBF_OK;
  });
}

int dobcbf_run_exit_code(const dobcbf_run* run) {
  if (!run) return static_cast<int>(dobcbf::experiments::ExitCode::kConfigError);
  return static_cast<int>(run->outcome.exit_code());
}

dobcbf_status dobcbf_run_metric(const dobcbf_run* run, const char* name, double* value) {
  if (!run) return null_arg("run");
  if (!name) return null_arg("name");
  if (!value) return null_arg("value");
  return guarded([&] {
    const std::string key(name);
    const nlohmann::json* node = nullptr;
    if (key.rfind("derived.", 0) == 0) {
      const auto& d = run->metrics.at("derived");
      const auto sub = key.substr(8);
      if (d.contains(sub)) node = &d.at(sub);
    } else {
      const auto& m = run->metrics.at("metrics");
      if (m.contains(key)) node = &m.at(key);
    }
    if (!node || !node->is_number()) {
      return fail(DOBCBF_ERR_ARGUMENT, "no numeric metric named '" + key + "'");
    }
    *value = node->get<double>();
    return DOBCBF_OK;
  });
}

dobcbf_status dobcbf_run_summary(const dobcbf_run* run, char* buf, size_t capacity,
                                 size_t* needed) {
  if (!run) return null_arg("run");
  return guarded([&] { return copy_out(run->metrics.dump(2) + "\n", buf, capacity, needed); });
}

dobcbf_status dobcbf_run_write(const dobcbf_run* run, const char* dir) {
  if (!run) return null_arg("run");
  if (!dir) return null_arg("dir");
  return guarded([&] {
    dobcbf::experiments::write_outputs(run->outcome, dir);
    return DOBCBF_OK;
  });
}

void dobcbf_run_free(dobcbf_run* run) { delete run; }

dobcbf_status dobcbf_compare(const char* dir_a, const char* dir_b, const char* out_path,
                             char* buf, size_t capacity, size_t* needed) {
  if (!dir_a) return null_arg("dir_a");
  if (!dir_b) return null_arg("dir_b");
  return guarded([&] {
    const std::string text = dobcbf::experiments::compare(dir_a, dir_b).dump(2) + "\n";
    if (out_path) write_file(out_path, text);
    if (!buf && !needed) return DOBCBF_OK;
    return copy_out(text, buf, capacity, needed);
  });
}

dobcbf_status dobcbf_qp_solve(size_t m, const double* u_nom, double psi0, const double* psi1,
                              double* u_out, dobcbf_qp_status* status) {
  if (m == 0) return fail(DOBCBF_ERR_ARGUMENT, "m must be positive");
  if (!u_nom) return null_arg("u_nom");
  if (!psi1) return null_arg("psi1");
  if (!u_out) return null_arg("u_out");
  return guarded([&] {
    const auto n = static_cast<Eigen::Index>(m);
    dobcbf::QpInstance inst{Eigen::Map<const dobcbf::Vector>(u_nom, n), psi0,
                            Eigen::Map<const dobcbf::RowVector>(psi1, n)};
    const dobcbf::QpResult r = dobcbf::solve(inst);
    for (Eigen::Index i = 0; i < n; ++i) u_out[i] = r.u[i];
    if (status) {
      switch (r.status) {
        case dobcbf::QpStatus::kInactive: *status = DOBCBF_QP_INACTIVE; break;
        case dobcbf::QpStatus::kActive: *status = DOBCBF_QP_ACTIVE; break;
        case dobcbf::QpStatus::kInfeasible: *status = DOBCBF_QP_INFEASIBLE; break;
      }
    }
    return DOBCBF_OK;
  });
}

}  // extern "C"
