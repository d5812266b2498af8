#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dobcbf/experiments.hpp"

namespace dobcbf::experiments {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dobcbf_unit_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

TEST(Registry, KnowsEveryScenario) {
  const auto ids = scenario_ids();
  for (const char* id : {"scalar-rel1", "doubleint-relr", "el2dof-dob", "el2dof-robust",
                         "el2dof-nofilter", "el2dof-noomega"}) {
    EXPECT_NE(std::find(ids.begin(), ids.end(), id), ids.end()) << id;
    EXPECT_NO_THROW(ScenarioConfig::defaults(id));
  }
  EXPECT_THROW(ScenarioConfig::defaults("nope"), ConfigError);
}

TEST(Registry, ArmConstantsMatchDerivation) {
  const auto cfg = ScenarioConfig::defaults("el2dof-dob");
  const auto& f = cfg.doc().at("filter");
  std::vector<DisturbanceTerm> terms;
  for (const auto& t : cfg.doc().at("disturbance").at("terms")) {
    terms.push_back({t.at("channel").get<int>(), t.at("amplitude").get<double>(),
                     t.at("frequency").get<double>(), t.at("phase").get<double>(),
                     t.at("waveform").get<std::string>() == "sin" ? Waveform::kSin
                                                                   : Waveform::kCos});
  }
  const auto b = derive_bounds(DisturbanceSignal(2, terms), 0.0, 20.0);
  EXPECT_NEAR(f.at("omega").get<double>(), b.max_derivative_norm, 1e-9 * b.max_derivative_norm);
  EXPECT_NEAR(f.at("d_max").get<double>(), b.max_norm, 1e-9 * b.max_norm);
}

TEST(Config, RoundTripIsIdentity) {
  for (const auto& id : scenario_ids()) {
    auto cfg = ScenarioConfig::defaults(id);
    cfg.set("sim.dt", "0.0005");
    const auto again = ScenarioConfig::parse(cfg.serialize());
    EXPECT_EQ(again.doc(), cfg.doc()) << id;
    EXPECT_EQ(again.serialize(), cfg.serialize()) << id;
  }
}

TEST(Config, PartialDocumentMergesOverDefaults) {
  const auto cfg = ScenarioConfig::parse(R"({"scenario": "el2dof-dob", "filter": {"beta": 12}})");
  EXPECT_EQ(cfg.doc().at("filter").at("beta").get<double>(), 12.0);
  EXPECT_EQ(cfg.doc().at("filter").at("gamma").get<double>(), 2.0);
}

TEST(Config, UnknownKeyRejected) {
  EXPECT_THROW(ScenarioConfig::parse(R"({"scenario": "el2dof-dob", "filter": {"betta": 1}})"),
               ConfigError);
  EXPECT_THROW(ScenarioConfig::parse(R"({"scenario": "el2dof-dob", "extra": 1})"), ConfigError);
  auto cfg = ScenarioConfig::defaults("scalar-rel1");
  EXPECT_THROW(cfg.set("plant.m1", "2"), ConfigError);
  try {
    cfg.set("filter.gama", "2");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("filter.gama"), std::string::npos);
  }
}

TEST(Config, TypeMismatchRejected) {
  auto cfg = ScenarioConfig::defaults("el2dof-dob");
  EXPECT_THROW(cfg.set("filter.beta", "ten"), ConfigError);
  EXPECT_THROW(cfg.set("sim.log_stride", "2.5"), ConfigError);
  EXPECT_THROW(cfg.set("nominal.gravity_comp", "1"), ConfigError);
  EXPECT_NO_THROW(cfg.set("filter.omega", "auto"));
  EXPECT_NO_THROW(cfg.set("filter.omega", "3.5"));
}

TEST(Config, MalformedJsonAndMissingScenario) {
  EXPECT_THROW(ScenarioConfig::parse("{not json"), ConfigError);
  EXPECT_THROW(ScenarioConfig::parse(R"({"sim": {}})"), ConfigError);
  EXPECT_THROW(ScenarioConfig::parse(R"([1, 2])"), ConfigError);
}

TEST(Config, IndexedOverrides) {
  auto cfg = ScenarioConfig::defaults("el2dof-dob");
  cfg.set("plant.q0.1", "1.5");
  EXPECT_EQ(cfg.doc().at("plant").at("q0")[1].get<double>(), 1.5);
  cfg.set("disturbance.terms.0.amplitude", "3");
  EXPECT_EQ(cfg.doc().at("disturbance").at("terms")[0].at("amplitude").get<double>(), 3.0);
  EXPECT_THROW(cfg.set("plant.q0.7", "1"), ConfigError);
  cfg.set("disturbance.terms", R"([{"channel": 1, "amplitude": 2}])");
  const auto& terms = cfg.doc().at("disturbance").at("terms");
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0].at("waveform").get<std::string>(), "sin");
}

TEST(Config, ScenarioIdNotOverridable) {
  auto cfg = ScenarioConfig::defaults("el2dof-dob");
  EXPECT_THROW(cfg.set("scenario", "el2dof-robust"), ConfigError);
}

TEST(Build, InvalidValuesAreConfigErrors) {
  auto cfg = ScenarioConfig::defaults("scalar-rel1");
  cfg.set("sim.hold", "\"sometimes\"");
  EXPECT_THROW(run_scenario(cfg), ConfigError);
  cfg = ScenarioConfig::defaults("el2dof-dob");
  cfg.set("plant.q0", "[1, 2, 3]");
  EXPECT_THROW(run_scenario(cfg), ConfigError);
  cfg = ScenarioConfig::defaults("scalar-rel1");
  cfg.set("disturbance.terms.0.channel", "4");
  EXPECT_THROW(run_scenario(cfg), ConfigError);
  cfg = ScenarioConfig::defaults("scalar-rel1");
  cfg.set("filter.beta", "-1");
  EXPECT_THROW(run_scenario(cfg), ConfigError);
}

TEST(Validate, ScalarDefaultsCertified) {
  bool certified = false;
  const auto rep = validate_scenario(ScenarioConfig::defaults("scalar-rel1"), &certified);
  EXPECT_TRUE(rep.pass());
  EXPECT_TRUE(certified);
}

TEST(Validate, ArmDobPassesButOmegaAdvisoryFlags) {
  bool certified = true;
  const auto rep = validate_scenario(ScenarioConfig::defaults("el2dof-dob"), &certified);
  EXPECT_TRUE(rep.pass());
  EXPECT_FALSE(certified);
  ASSERT_NE(rep.find("omega_filter_covers_bound"), nullptr);
  EXPECT_FALSE(rep.find("omega_filter_covers_bound")->pass);
  EXPECT_TRUE(rep.find("beta_bound")->pass);
  EXPECT_TRUE(rep.find("alpha_bound")->pass);
  EXPECT_TRUE(rep.find("skew_symmetry")->pass);
}

TEST(Validate, AlphaBelowThresholdFails) {
  auto cfg = ScenarioConfig::defaults("el2dof-dob");
  cfg.set("filter.alpha", "3");  // alpha1 mu1 ~ 1.02 < 1.5
  EXPECT_FALSE(validate_scenario(cfg).find("alpha_bound")->pass);
}

TEST(Validate, EffectiveAlphaInterpretation) {
  auto cfg = ScenarioConfig::defaults("el2dof-dob");
  cfg.set("filter.alpha_interpretation", "effective");
  cfg.set("sim.tf", "0.05");
  const auto out = run_scenario(cfg);
  EXPECT_NEAR(out.derived.at("alpha_effective").get<double>(), 500.0, 1e-9);
}

TEST(Run, ScalarSafeAndFilterActivates) {
  const auto out = run_scenario(ScenarioConfig::defaults("scalar-rel1"));
  EXPECT_EQ(out.exit_code(), ExitCode::kPass);
  EXPECT_GE(out.summary.min_h, -1e-6);
  EXPECT_GT(out.summary.active_steps, 0);
}

TEST(Run, BlowUpIsNumericalFailure) {
  auto cfg = ScenarioConfig::defaults("el2dof-nofilter");
  cfg.set("sim.dt", "0.01");
  cfg.set("sim.substeps", "1");
  cfg.set("sim.tf", "2");
  const auto out = run_scenario(cfg);
  EXPECT_NE(out.sim.status, RunStatus::kOk);
  EXPECT_EQ(out.exit_code(), ExitCode::kNumericalFailure);
}

TEST(Outputs, FilesAndPlotPanels) {
  auto cfg = ScenarioConfig::defaults("el2dof-dob");
  cfg.set("sim.tf", "0.5");
  const auto out = run_scenario(cfg);
  const auto dir = scratch("outputs");
  write_outputs(out, dir);
  for (const char* f : {"trajectory.csv", "metrics.json", "validation.json", "config.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto panels = emit_plotdata(out, dir / "panels");
  ASSERT_EQ(panels.size(), 6u);
  std::vector<std::string> names;
  for (const auto& p : panels) names.push_back(p.filename().string());
  EXPECT_EQ(names, (std::vector<std::string>{"q1.csv", "q2.csv", "h.csv", "disturbance.csv",
                                             "tau1.csv", "tau2.csv"}));
  const std::string dist = slurp(dir / "panels" / "disturbance.csv");
  EXPECT_EQ(dist.substr(0, dist.find('\n')), "t,d1,d2,d_hat1,d_hat2");
  const std::string q1 = slurp(dir / "panels" / "q1.csv");
  EXPECT_EQ(q1.substr(0, q1.find('\n')), "t,q1,q1_ref");
  // config.json reproduces the run.
  const auto again = ScenarioConfig::load(dir / "config.json");
  EXPECT_EQ(again.doc(), out.resolved);
  fs::remove_all(dir);
}

TEST(Outputs, EmptyLogRejected) {
  RunOutcome empty;
  EXPECT_THROW(emit_plotdata(empty, scratch("empty")), Error);
}

TEST(Compare, IdenticalRunsHaveZeroDeltas) {
  auto cfg = ScenarioConfig::defaults("scalar-rel1");
  cfg.set("sim.tf", "2");
  const auto a = scratch("cmp_a");
  const auto b = scratch("cmp_b");
  write_outputs(run_scenario(cfg), a);
  write_outputs(run_scenario(cfg), b);
  const auto rep = compare(a, b);
  EXPECT_EQ(rep.at("delta").at("min_h").get<double>(), 0.0);
  EXPECT_EQ(rep.at("delta").at("rmse").get<double>(), 0.0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Compare, MismatchedPairingRejected) {
  auto c1 = ScenarioConfig::defaults("scalar-rel1");
  c1.set("sim.tf", "1");
  auto c2 = c1;
  c2.set("disturbance.terms.0.amplitude", "-2");
  const auto a = scratch("mis_a");
  const auto b = scratch("mis_b");
  write_outputs(run_scenario(c1), a);
  write_outputs(run_scenario(c2), b);
  EXPECT_THROW(compare(a, b), ConfigError);
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // namespace
}  // namespace dobcbf::experiments
