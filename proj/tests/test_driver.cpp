#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedprint/config.hpp"
#include "fedprint/driver.hpp"
#include "fedprint/errors.hpp"

using namespace fedprint;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.corpus.num_clients = 10;
  cfg.corpus.feature_dim = 6;
  cfg.corpus.num_classes = 3;
  cfg.corpus.frames_min = 40;
  cfg.corpus.frames_max = 80;
  cfg.corpus.analysis_threshold = 45;
  cfg.corpus.analysis_size = 15;
  cfg.corpus.dev_speakers = 2;
  cfg.corpus.test_speakers = 2;
  cfg.corpus.indicator_utterances = 3;
  cfg.corpus.indicator_frames = 5;
  cfg.corpus.enroll_pool = 20;
  cfg.hidden = {8, 8};
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.num_rounds = 4;
  cfg.clients_per_round = 3;
  cfg.enrollment_speakers = 4;
  cfg.enrollment_frames = 10;
  cfg.attack_layers = {1, 2};
  cfg.attack_rounds = {2, 4};
  cfg.seed = 1234;
  cfg.out = out.string();
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> data_lines(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  }
  return lines;
}

DriverOptions opts_for(const fs::path& out, int threads = 1) {
  DriverOptions opt;
  opt.out_override = out.string();
  opt.threads = threads;
  return opt;
}

// generate + train + attack + report with the stored config
void run_pipeline(const fs::path& out, const ExperimentConfig& cfg, int threads = 1) {
  std::ostringstream sink;
  DriverOptions gen;
  gen.threads = threads;
  const fs::path cfg_file = out.parent_path() / (out.filename().string() + ".ini");
  fs::create_directories(out.parent_path());
  write_config(cfg, cfg_file);
  gen.config_path = cfg_file.string();
  cmd_generate(gen, sink);
  cmd_train(opts_for(out, threads), sink);
  cmd_attack(opts_for(out, threads), sink);
  cmd_report(opts_for(out, threads), sink);
  fs::remove(cfg_file);
}

}  // namespace

TEST_CASE("the full pipeline leaves every artifact in place") {
  const fs::path out = fresh_dir("fp_drv_pipeline");
  run_pipeline(out, tiny_experiment(out));

  for (const char* name :
       {"experiment.ini", "corpus.bin", "manifest.json", "rounds.csv", "trials.csv",
        "eer.csv", "eer_avg.csv", "longitudinal.csv", "local_vs_global.csv",
        "summary.txt"}) {
    CAPTURE(name);
    CHECK(fs::exists(out / name));
  }
  for (int r = 1; r <= 4; ++r) {
    CHECK(fs::exists(out / "snapshots" / ("round_" + std::to_string(r) + ".bin")));
  }
  CHECK(fs::exists(out / "attack_rounds" / "round_2" / "global.bin"));
  CHECK(fs::exists(out / "attack_rounds" / "round_4" / "global.bin"));
  CHECK_FALSE(fs::exists(out / "attack_rounds" / "round_1"));
  CHECK_FALSE(fs::exists(out / "attack_rounds" / "round_3"));

  // 4 rounds logged with both utility columns
  const auto rounds = data_lines(out / "rounds.csv");
  REQUIRE(rounds.size() == 5);
  CHECK(rounds[0] == "round,participant_ids,n_total,test_error,dev_error");
  CHECK(rounds[1].substr(0, 2) == "1,");
  CHECK(rounds[4].substr(0, 2) == "4,");

  // 2 attacked rounds x 2 layers
  const auto eer = data_lines(out / "eer.csv");
  REQUIRE(eer.size() == 5);
  CHECK(eer[0] == "round,layer,eer,num_target,num_nontarget");
  CHECK(eer[1].substr(0, 4) == "2,1,");
  CHECK(eer[2].substr(0, 4) == "2,2,");
  CHECK(eer[3].substr(0, 4) == "4,1,");
  CHECK(eer[4].substr(0, 4) == "4,2,");

  // every (round, layer) block scores all enrollment x participant pairs
  const auto trials = data_lines(out / "trials.csv");
  CHECK(trials.size() == 1 + 4 * (4 * 3));

  const auto avg = data_lines(out / "eer_avg.csv");
  REQUIRE(avg.size() == 3);
  CHECK(avg[0] == "layer,eer");

  const std::string summary = read_file(out / "summary.txt");
  CHECK(summary.find("best round") != std::string::npos);
  CHECK(summary.find("spearman") != std::string::npos);
  CHECK(summary.find("personalization") != std::string::npos);

  fs::remove_all(out);
}

TEST_CASE("regenerating with the same seed is byte-identical") {
  const fs::path out = fresh_dir("fp_drv_regen");
  const ExperimentConfig cfg = tiny_experiment(out);
  const fs::path cfg_file = fresh_dir("fp_drv_regen_cfg.ini");
  write_config(cfg, cfg_file);

  DriverOptions opt;
  opt.config_path = cfg_file.string();
  std::ostringstream sink;
  cmd_generate(opt, sink);
  const std::string corpus1 = read_file(out / "corpus.bin");
  const std::string manifest1 = read_file(out / "manifest.json");
  const std::string ini1 = read_file(out / "experiment.ini");
  cmd_generate(opt, sink);
  CHECK(read_file(out / "corpus.bin") == corpus1);
  CHECK(read_file(out / "manifest.json") == manifest1);
  CHECK(read_file(out / "experiment.ini") == ini1);

  fs::remove(cfg_file);
  fs::remove_all(out);
}

TEST_CASE("repeated runs and parallel execution reproduce the key csv files") {
  const fs::path a = fresh_dir("fp_drv_det_a");
  const fs::path b = fresh_dir("fp_drv_det_b");
  const fs::path c = fresh_dir("fp_drv_det_c");
  ExperimentConfig cfg = tiny_experiment(a);
  run_pipeline(a, cfg);
  cfg.out = b.string();
  run_pipeline(b, cfg);
  cfg.out = c.string();
  run_pipeline(c, cfg, /*threads=*/2);

  for (const char* name : {"rounds.csv", "trials.csv", "eer.csv", "eer_avg.csv",
                           "longitudinal.csv", "local_vs_global.csv"}) {
    CAPTURE(name);
    const std::string reference = read_file(a / name);
    CHECK(read_file(b / name) == reference);  // rerun, same seed
    CHECK(read_file(c / name) == reference);  // parallel schedule
  }

  // the summary names its own output directory on the first line; everything
  // after that must match
  auto summary_body = [](const fs::path& dir) {
    const std::string text = read_file(dir / "summary.txt");
    return text.substr(text.find('\n') + 1);
  };
  const std::string body = summary_body(a);
  CHECK(summary_body(b) == body);
  CHECK(summary_body(c) == body);

  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("train refuses to clobber a previous run unless forced") {
  const fs::path out = fresh_dir("fp_drv_force");
  const ExperimentConfig cfg = tiny_experiment(out);
  std::ostringstream sink;
  DriverOptions gen;
  const fs::path cfg_file = fresh_dir("fp_drv_force_cfg.ini");
  write_config(cfg, cfg_file);
  gen.config_path = cfg_file.string();
  cmd_generate(gen, sink);
  cmd_train(opts_for(out), sink);

  CHECK_THROWS_AS(cmd_train(opts_for(out), sink), io_error);

  DriverOptions forced = opts_for(out);
  forced.force = true;
  cmd_train(forced, sink);  // redo succeeds
  CHECK(fs::exists(out / "rounds.csv"));

  cmd_attack(opts_for(out), sink);
  CHECK_THROWS_AS(cmd_attack(opts_for(out), sink), io_error);
  cmd_attack(forced, sink);

  fs::remove(cfg_file);
  fs::remove_all(out);
}

TEST_CASE("attack demands stored models for every requested round") {
  const fs::path out = fresh_dir("fp_drv_missing_round");
  ExperimentConfig cfg = tiny_experiment(out);
  std::ostringstream sink;
  const fs::path cfg_file = fresh_dir("fp_drv_missing_cfg.ini");
  write_config(cfg, cfg_file);
  DriverOptions gen;
  gen.config_path = cfg_file.string();
  cmd_generate(gen, sink);
  cmd_train(opts_for(out), sink);

  // same corpus, but the attacker now wants a round the trainer never stored
  cfg.attack_rounds = {3};
  write_config(cfg, cfg_file);
  DriverOptions atk;
  atk.config_path = cfg_file.string();
  try {
    cmd_attack(atk, sink);
    FAIL("expected protocol_error");
  } catch (const protocol_error& e) {
    CHECK(std::string(e.what()).find("round 3") != std::string::npos);
  }

  fs::remove(cfg_file);
  fs::remove_all(out);
}

TEST_CASE("report on an empty directory lists what is missing") {
  const fs::path out = fresh_dir("fp_drv_empty");
  fs::create_directories(out);
  std::ostringstream sink;
  try {
    cmd_report(opts_for(out), sink);
    FAIL("expected io_error");
  } catch (const io_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("experiment.ini") != std::string::npos);
    CHECK(msg.find("corpus.bin") != std::string::npos);
    CHECK(msg.find("rounds.csv") != std::string::npos);
    CHECK(msg.find("eer.csv") != std::string::npos);
    CHECK(msg.find("snapshots") != std::string::npos);
  }
  fs::remove_all(out);
}

TEST_CASE("command-line overrides take precedence over the config file") {
  const fs::path out = fresh_dir("fp_drv_override");
  ExperimentConfig cfg = tiny_experiment(out / "original");
  const fs::path cfg_file = fresh_dir("fp_drv_override_cfg.ini");
  write_config(cfg, cfg_file);

  DriverOptions opt;
  opt.config_path = cfg_file.string();
  opt.out_override = (out / "moved").string();
  opt.seed_override = 777;
  const ExperimentConfig resolved = resolve_config(opt, false);
  CHECK(resolved.out == (out / "moved").string());
  CHECK(resolved.seed == 777);
  CHECK(resolved.corpus == cfg.corpus);

  DriverOptions plain;
  plain.config_path = cfg_file.string();
  CHECK(resolve_config(plain, false).seed == 1234);

  CHECK_THROWS_AS(resolve_config(DriverOptions{}, true), io_error);  // nothing stored

  fs::remove(cfg_file);
  fs::remove_all(out);
}

TEST_CASE("a reseeded run rejects the stored corpus") {
  const fs::path out = fresh_dir("fp_drv_reseed");
  const ExperimentConfig cfg = tiny_experiment(out);
  const fs::path cfg_file = fresh_dir("fp_drv_reseed_cfg.ini");
  write_config(cfg, cfg_file);
  std::ostringstream sink;
  DriverOptions gen;
  gen.config_path = cfg_file.string();
  cmd_generate(gen, sink);

  DriverOptions reseeded = opts_for(out);
  reseeded.seed_override = 9999;  // corpus on disk came from seed 1234
  CHECK_THROWS_AS(cmd_train(reseeded, sink), protocol_error);

  fs::remove(cfg_file);
  fs::remove_all(out);
}

TEST_CASE("threads must be nonnegative for every command") {
  DriverOptions opt;
  opt.threads = -2;
  std::ostringstream sink;
  CHECK_THROWS_AS(cmd_generate(opt, sink), config_error);
}
