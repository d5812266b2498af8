#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dobcbf/dobcbf.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int report(dobcbf_status s) {
  std::cerr << "error: " << dobcbf_last_error() << "\n";
  return s == DOBCBF_ERR_NUMERICAL ? kExitNumerical : kExitConfig;
}

// A path to a JSON file, or a bare scenario id for its defaults.
dobcbf_status open_config(const std::string& source, dobcbf_config** cfg) {
  if (std::filesystem::is_regular_file(source)) return dobcbf_config_load(source.c_str(), cfg);
  return dobcbf_config_defaults(source.c_str(), cfg);
}

dobcbf_status apply_overrides(dobcbf_config* cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: override '%s' is not key=value\n", o.c_str());
      return DOBCBF_ERR_CONFIG;
    }
    const std::string key = o.substr(0, eq);
    const std::string value = o.substr(eq + 1);
    const dobcbf_status s = dobcbf_config_set(cfg, key.c_str(), value.c_str());
    if (s != DOBCBF_OK) return s;
  }
  return DOBCBF_OK;
}

std::string fetch(dobcbf_status (*fn)(const dobcbf_run*, char*, size_t, size_t*),
                  const dobcbf_run* run) {
  size_t needed = 0;
  fn(run, nullptr, 0, &needed);
  std::string buf(needed, '\0');
  fn(run, buf.data(), buf.size(), &needed);
  buf.resize(needed ? needed - 1 : 0);
  return buf;
}

struct ConfigOptions {
  std::string source;
  std::vector<std::string> overrides;
  double dt = 0.0;
  double horizon = 0.0;
};

void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("config", opts.source, "Config JSON file or scenario id")->required();
  cmd->add_option("--override,-o", opts.overrides, "Dotted key=value override (repeatable)");
  cmd->add_option("--dt", opts.dt, "Integration step (sets sim.dt)");
  cmd->add_option("--horizon", opts.horizon, "Final time (sets sim.tf)");
}

// Returns 0 on success, otherwise an exit code.
int prepare(const ConfigOptions& opts, dobcbf_config** cfg) {
  dobcbf_status s = open_config(opts.source, cfg);
  if (s != DOBCBF_OK) return report(s);
  s = apply_overrides(*cfg, opts.overrides);
  if (s == DOBCBF_OK && opts.horizon > 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", opts.horizon);
    s = dobcbf_config_set(*cfg, "sim.tf", buf);
  }
  if (s == DOBCBF_OK && opts.dt > 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", opts.dt);
    s = dobcbf_config_set(*cfg, "sim.dt", buf);
  }
  if (s != DOBCBF_OK) {
    dobcbf_config_free(*cfg);
    *cfg = nullptr;
    return report(s);
  }
  return 0;
}

int cmd_run(const ConfigOptions& opts, const std::string& out_dir, bool quiet) {
  dobcbf_config* cfg = nullptr;
  if (int rc = prepare(opts, &cfg)) return rc;
  dobcbf_run* run = nullptr;
  dobcbf_status s = dobcbf_run_create(cfg, &run);
  dobcbf_config_free(cfg);
  if (s != DOBCBF_OK) return report(s);
  s = dobcbf_run_write(run, out_dir.c_str());
  if (s != DOBCBF_OK) {
    dobcbf_run_free(run);
    return report(s);
  }
  if (!quiet) std::cout << fetch(dobcbf_run_summary, run) << "\n";
  const int rc = dobcbf_run_exit_code(run);
  std::cerr << "outputs written to " << out_dir << " (exit " << rc << ")\n";
  dobcbf_run_free(run);
  return rc;
}

int cmd_validate(const ConfigOptions& opts, const std::string& out_path) {
  dobcbf_config* cfg = nullptr;
  if (int rc = prepare(opts, &cfg)) return rc;
  int pass = 0;
  int certified = 0;
  const dobcbf_status s =
      dobcbf_validate(cfg, out_path.empty() ? nullptr : out_path.c_str(), &pass, &certified);
  dobcbf_config_free(cfg);
  if (s != DOBCBF_OK) return report(s);
  std::cout << "validation " << (pass ? "passed" : "failed")
            << (certified ? " (certified)" : " (not certified)") << "\n";
  return pass ? 0 : 1;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out_path) {
  size_t needed = 0;
  dobcbf_status s = dobcbf_compare(a.c_str(), b.c_str(), out_path.empty() ? nullptr : out_path.c_str(),
                                   nullptr, 0, &needed);
  if (s != DOBCBF_OK) return report(s);
  std::string buf(needed, '\0');
  s = dobcbf_compare(a.c_str(), b.c_str(), nullptr, buf.data(), buf.size(), &needed);
  if (s != DOBCBF_OK) return report(s);
  buf.resize(needed - 1);
  std::cout << buf;
  return 0;
}

int cmd_defaults(const std::string& scenario) {
  dobcbf_config* cfg = nullptr;
  dobcbf_status s = dobcbf_config_defaults(scenario.c_str(), &cfg);
  if (s != DOBCBF_OK) return report(s);
  size_t needed = 0;
  dobcbf_config_serialize(cfg, nullptr, 0, &needed);
  std::string buf(needed, '\0');
  s = dobcbf_config_serialize(cfg, buf.data(), buf.size(), &needed);
  dobcbf_config_free(cfg);
  if (s != DOBCBF_OK) return report(s);
  buf.resize(needed - 1);
  std::cout << buf;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disturbance-observer control barrier function experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dobcbf_version()));

  ConfigOptions run_opts;
  std::string run_out;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Simulate a scenario and write its outputs");
  add_config_options(run, run_opts);
  run->add_option("--out", run_out, "Output directory (default runs/<config>)");
  run->add_flag("--quiet,-q", quiet, "Do not print the metrics summary");

  ConfigOptions val_opts;
  std::string val_out;
  auto* validate = app.add_subcommand("validate", "Check parameters without simulating");
  add_config_options(validate, val_opts);
  validate->add_option("--out", val_out, "Write the validation report to this file");

  std::string dir_a;
  std::string dir_b;
  std::string cmp_out;
  auto* compare = app.add_subcommand("compare", "Compare two run output directories");
  compare->add_option("dir_a", dir_a, "First run directory")->required();
  compare->add_option("dir_b", dir_b, "Second run directory")->required();
  compare->add_option("--out", cmp_out, "Write the comparison report to this file");

  std::string scenario;
  auto* defaults = app.add_subcommand("defaults", "Print a scenario's default configuration");
  defaults->add_option("scenario", scenario, "Scenario id")->required();

  auto* list = app.add_subcommand("scenarios", "List scenario ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (*run) {
    if (run_out.empty()) {
      run_out = "runs/" + std::filesystem::path(run_opts.source).stem().string();
    }
    return cmd_run(run_opts, run_out, quiet);
  }
  if (*validate) return cmd_validate(val_opts, val_out);
  if (*compare) return cmd_compare(dir_a, dir_b, cmp_out);
  if (*defaults) return cmd_defaults(scenario);
  if (*list) {
    for (size_t i = 0; i < dobcbf_scenario_count(); ++i) std::cout << dobcbf_scenario_id(i) << "\n";
    return 0;
  }
  return kExitConfig;
}
