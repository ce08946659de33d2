#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cotpot/config.hpp"

using namespace cotpot;
using config::ConfigError;
using config::ExperimentConfig;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  auto dir = std::filesystem::temp_directory_path() / "cotpot_cfg_test";
  std::filesystem::create_directories(dir);
  std::string path = (dir / name).string();
  std::ofstream out(path, std::ios::binary);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("defaults resolve and snapshot round trips") {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.resolve();
  std::string snap = cfg.snapshot();
  CHECK(snap.rfind("cotpot-config v1\n", 0) == 0);

  ExperimentConfig reparsed = ExperimentConfig::defaults();
  std::string path = write_temp("snapshot.cfg", snap);
  reparsed.apply_file(path);
  reparsed.resolve();
  CHECK(reparsed.snapshot() == snap);
}

TEST_CASE("file parsing with sections and diagnostics") {
  std::string path = write_temp("good.cfg",
                                "[model]\n"
                                "d_model=64\n"
                                "n_heads = 8\n"
                                "# a comment\n"
                                "[train]\n"
                                "peak_lr=1e-3\n"
                                "[problems]\n"
                                "ops=+-*\n"
                                "step_counts=1,2,3\n");
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.apply_file(path);
  CHECK(cfg.model.d_model == 64);
  CHECK(cfg.model.n_heads == 8);
  CHECK(cfg.train.peak_lr == 1e-3);
  CHECK(cfg.problems.allowed_ops.size() == 3);
  CHECK(cfg.problems.step_counts == std::vector<int>{1, 2, 3});

  std::string bad = write_temp("bad.cfg", "[model]\nwhatever=1\n");
  ExperimentConfig cfg2 = ExperimentConfig::defaults();
  try {
    cfg2.apply_file(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line_number == 2);
    CHECK(std::string(e.what()).find("whatever") != std::string::npos);
  }

  std::string malformed = write_temp("malformed.cfg", "[train]\npeak_lr\n");
  ExperimentConfig cfg3 = ExperimentConfig::defaults();
  CHECK_THROWS_AS(cfg3.apply_file(malformed), ConfigError);
}

TEST_CASE("environment overrides use SECTION__KEY") {
  setenv("MODEL__D_MODEL", "72", 1);
  setenv("RUN__MASTER_SEED", "99", 1);
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.apply_env();
  unsetenv("MODEL__D_MODEL");
  unsetenv("RUN__MASTER_SEED");
  CHECK(cfg.model.d_model == 72);
  CHECK(cfg.master_seed == 99);
}

TEST_CASE("command-line overrides outrank the file") {
  std::string path = write_temp("layered.cfg", "[model]\nd_model=64\n");
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.apply_file(path);
  cfg.apply_override("model.d_model=80");
  CHECK(cfg.model.d_model == 80);
  CHECK_THROWS_AS(cfg.apply_override("model.bogus=1"), ConfigError);
  CHECK_THROWS_AS(cfg.apply_override("not-an-assignment"), ConfigError);
}

TEST_CASE("resolution derives the teacher and validates") {
  ExperimentConfig cfg = ExperimentConfig::defaults();
  cfg.teacher_temperature = 0.5;
  cfg.resolve();
  CHECK(cfg.teacher.arithmetic_error_prob == doctest::Approx(0.1));

  ExperimentConfig bad = ExperimentConfig::defaults();
  bad.retention_fraction = 1.5;
  CHECK_THROWS_AS(bad.resolve(), ConfigError);

  ExperimentConfig bad2 = ExperimentConfig::defaults();
  bad2.strategies = {"no-such-strategy"};
  CHECK_THROWS_AS(bad2.resolve(), ConfigError);

  ExperimentConfig bad3 = ExperimentConfig::defaults();
  bad3.model.d_model = 50;
  bad3.model.n_heads = 4;
  CHECK_THROWS_AS(bad3.resolve(), ConfigError);
}
