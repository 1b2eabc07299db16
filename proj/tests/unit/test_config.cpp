#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "hqao/config.hpp"
#include "hqao/errors.hpp"
#include "hqao/experiment.hpp"

using namespace hqao;

namespace {

std::string read(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_CASE("defaults round-trip through YAML") {
  ExperimentConfig c;
  const auto back = parse_config(to_yaml(c));
  for (const auto& k : config_keys()) CHECK(get_config_value(back, k) == get_config_value(c, k));
}

TEST_CASE("edited config round-trips, including awkward doubles") {
  ExperimentConfig c;
  c.model.mass = 0.1 + 0.2;
  c.model.a = -0.078125;
  c.model.b = 1.0 / 3.0;
  c.beta_grid = {0.5, 1e-3, 2.0 / 7.0};
  c.hierarchy.coupling = "decoupled";
  c.rg.seed = 18446744073709551615ull;
  c.out = "runs/a b";
  const auto back = parse_config(to_yaml(c));
  CHECK(back.model.mass == c.model.mass);
  CHECK(back.model.b == c.model.b);
  CHECK(back.beta_grid == c.beta_grid);
  CHECK(back.rg.seed == c.rg.seed);
  CHECK(back.out == c.out);
  CHECK(to_yaml(back) == to_yaml(c));
}

TEST_CASE("errors point at the offending line") {
  CHECK(error_line("schema_version: 1\nmodel:\n  mass: heavy\n") == 3);
  CHECK(error_line("schema_version: 1\nmodel:\n  mass: 1\n  spin: 2\n") == 4);
  CHECK(error_line("schema_version: 1\nmodel: [1, 2\n") > 0);
  CHECK(error_line("schema_version: 2\n") == 1);
  CHECK(error_line("model:\n  mass: 1\n") == 1);
  CHECK(error_line("schema_version: 1\nrg:\n  population: 1.5\n") == 3);
  CHECK(error_line("schema_version: 1\nmodel:\n  beta_grid: [1, [2]]\n") == 3);
}

TEST_CASE("environment overrides the file") {
  auto c = parse_config("schema_version: 1\nmodel:\n  mass: 3\nout: file\n");
  const std::map<std::string, std::string> env = {{"HQAO_MODEL_MASS", "7"}, {"HQAO_OUT", "env"}};
  apply_env_overrides(c, [&](const char* name) -> const char* {
    const auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  CHECK(c.model.mass == 7.0);
  CHECK(c.out == "env");
  CHECK_THROWS_AS(apply_env_overrides(c, [](const char* n) -> const char* {
                    return std::string(n) == "HQAO_MC_SWEEPS" ? "lots" : nullptr;
                  }),
                  ConfigError);
}

TEST_CASE("validation rejects out-of-range values") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate_config(c));
  auto bad = [&](const std::string& k, const std::string& v) {
    auto d = c;
    set_config_value(d, k, v);
    CHECK_THROWS_AS(validate_config(d), ConfigError);
  };
  bad("hierarchy.delta", "0.5");
  bad("hierarchy.kappa", "1");
  bad("model.mass", "0");
  bad("mc.slices", "63");
  bad("rg.islands", "7");
  bad("bounds.epsilon", "0.2");
  bad("verify.mutation", "flip");
  CHECK_THROWS_AS(set_config_value(c, "model.spin", "1"), ConfigError);
}

TEST_CASE("malformed config file exits 1") {
  const auto dir = std::filesystem::temp_directory_path() / "hqao_cfg_test";
  std::filesystem::create_directories(dir);
  ExperimentConfig c;
  c.subcommand = "spectral";
  c.out = (dir / "out").string();
  c.model.mass = -1.0;
  CHECK(run_experiment(c).exit_code == kExitConfig);
  c.subcommand = "nope";
  c.model.mass = 1.0;
  CHECK(run_experiment(c).exit_code == kExitConfig);
}

TEST_CASE("spectral run is byte-identical apart from metadata") {
  const auto dir = std::filesystem::temp_directory_path() / "hqao_rerun_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig c;
  c.subcommand = "spectral";
  c.beta_grid = {0.5, 2.0};
  c.out = (dir / "a").string();
  const auto ra = run_experiment(c);
  c.out = (dir / "b").string();
  const auto rb = run_experiment(c);
  REQUIRE(ra.exit_code == kExitOk);
  REQUIRE(ra.files.size() == 3);
  CHECK(read(ra.files[0]) == read(rb.files[0]));
  CHECK(read(ra.files[1]) == read(rb.files[1]));
  CHECK(read(ra.files[0]).rfind("beta,u_hat0,eta,rigidity,x0,x0_bound,bounds_checked,bounds_pass\n", 0) == 0);
}
