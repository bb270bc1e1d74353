// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "arsl/checkpoint.hpp"
#include "arsl/cli.hpp"
#include "arsl/errors.hpp"
#include "arsl/records.hpp"

using namespace arsl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("arsl_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kSmallConfig =
    "# small run\n"
    "seed = 4\n"
    "scenes = 24\n"
    "labeled_fraction = 0.25\n"
    "holdout_scenes = 6\n"
    "strides = 4,2,1\n"
    "burn_in_iters = 4\n"
    "total_iters = 9\n"
    "labeled_batch = 2\n"
    "unlabeled_batch = 2\n"
    "checkpoint_every = 3\n";

std::string bytes_of(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(kSmallConfig, "small.conf");
  CHECK(c.seed == 4);
  CHECK(c.train.seed == 4);
  CHECK(c.train.model.strides == std::array<int, 3>{4, 2, 1});
  CHECK(c.train.beta == 2.0);
  CHECK(c.train.lambda == 0.5);
  CHECK(c.train.ema_momentum == 0.9996);
  CHECK(c.train.tsa.tau_neg == 0.1);
  CHECK(c.train.tsa.sigma == 0.5);
  CHECK(c.train.tsa.iou_match_threshold == 0.6);

  CHECK_THROWS_WITH_AS(parse_config("seed = 1\nbeta = -2\n", "a.conf"), doctest::Contains("a.conf:2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("seed = 1\nbeta = -2\n", "a.conf"), doctest::Contains("beta"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("\n\nbogus = 3\n", "b.conf"), doctest::Contains("b.conf:3"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("bogus = 3\n", "b.conf"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("lr = fast\n", "c.conf"), doctest::Contains("lr"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("seed = 1\nseed = 2\n", "d.conf"), doctest::Contains("d.conf:2"), ConfigError);
  CHECK_THROWS_AS(parse_config("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("assigner = anchors\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("image_size = 60\n"), ConfigError);
}

TEST_CASE("config echo round trips") {
  ExperimentConfig c = parse_config(kSmallConfig);
  set_config_value(c, "lr", "0.0123456789012345");
  set_config_value(c, "mining", "off");
  set_config_value(c, "head", "centerness");
  c.finalize();
  const std::string echo = echo_config(c);
  const ExperimentConfig back = parse_config(echo);
  CHECK(echo_config(back) == echo);
  CHECK(back.train.lr == c.train.lr);
  CHECK_FALSE(back.train.tsa.mining);
  CHECK(back.train.head == HeadMode::Centerness);
  for (const ConfigKey& k : config_schema()) CHECK(echo.find(k.name + " = ") != std::string::npos);
}

TEST_CASE("gen-data is byte-identical and creates its output directory") {
  const ExperimentConfig c = parse_config(kSmallConfig);
  const fs::path a = scratch("gen_a") / "nested" / "dir";
  const fs::path b = scratch("gen_b");
  cmd_gen_data(c, a);
  cmd_gen_data(c, b);
  CHECK(bytes_of(a / "annotations.jsonl") == bytes_of(b / "annotations.jsonl"));
  CHECK(bytes_of(a / "images" / "scene_00007.ppm") == bytes_of(b / "images" / "scene_00007.ppm"));
  CHECK(bytes_of(a / "config.txt") == echo_config(c));
  const auto loaded = load_dataset(a);
  const auto generated = training_dataset(c);
  REQUIRE(loaded.size() == generated.size());
  for (std::size_t k = 0; k < loaded.size(); ++k) {
    CHECK(loaded[k].image == generated[k].image);
    CHECK(loaded[k].gt == generated[k].gt);
  }
  ExperimentConfig from_disk = c;
  from_disk.dataset = a.string();
  CHECK(training_dataset(from_disk).size() == loaded.size());
  fs::remove_all(scratch("gen_a"));
  fs::remove_all(b);
}

TEST_CASE("train is deterministic and resumable") {
  const ExperimentConfig c = parse_config(kSmallConfig);
  const fs::path a = scratch("train_a"), b = scratch("train_b");
  const TrainOutcome ra = cmd_train(c, a);
  cmd_train(c, b);
  CHECK(ra.iterations == 9);
  CHECK(bytes_of(a / "train_log.jsonl") == bytes_of(b / "train_log.jsonl"));
  CHECK(bytes_of(a / "final.bin") == bytes_of(b / "final.bin"));
  CHECK(fs::exists(a / "ckpt_000003.bin"));
  CHECK(fs::exists(a / "ckpt_000006.bin"));
  CHECK_FALSE(fs::exists(a / "ckpt_000009.bin"));
  CHECK(load_checkpoint(a / "ckpt_000006.bin").iteration == 6);

  int lines = 0;
  std::istringstream log(bytes_of(a / "train_log.jsonl"));
  for (std::string line; std::getline(log, line); ++lines) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("iteration").get<int>() == lines);
    CHECK(j.at("total").get<double>() == doctest::Approx(j.at("sup_total").get<double>() +
                                                        2.0 * j.at("unsup_total").get<double>()));
  }
  CHECK(lines == 9);

  const fs::path r = scratch("train_resume");
  fs::create_directories(r);
  fs::copy_file(a / "train_log.jsonl", r / "train_log.jsonl");
  cmd_train(c, r, a / "ckpt_000003.bin");
  CHECK(bytes_of(r / "train_log.jsonl") == bytes_of(a / "train_log.jsonl"));
  CHECK(bytes_of(r / "final.bin") == bytes_of(a / "final.bin"));

  CHECK_THROWS_AS(cmd_train(c, r, a / "missing.bin"), ConfigError);
  for (const auto& d : {a, b, r}) fs::remove_all(d);
}

TEST_CASE("eval, diagnose, predict and assign-sim") {
  const ExperimentConfig c = parse_config(kSmallConfig);
  const fs::path run = scratch("pipeline_run");
  cmd_train(c, run);
  const fs::path ev = scratch("pipeline_eval");
  const EvalReport report = cmd_eval(c, run / "final.bin", std::nullopt, ev);
  CHECK(report.images == 6);
  CHECK(nlohmann::json::parse(bytes_of(ev / "metrics.json")).contains("ap50"));
  CHECK(fs::exists(ev / "config.txt"));

  const fs::path dg = scratch("pipeline_diag");
  cmd_diagnose(c, run / "final.bin", std::nullopt, dg);
  CHECK(fs::exists(dg / "diagnostics.json"));
  CHECK(fs::exists(dg / "plot_data.tsv"));

  const fs::path pr = scratch("pipeline_pred");
  cmd_predict(c, run / "final.bin", std::nullopt, pr);
  CHECK(read_predictions(pr / "predictions.jsonl").size() == 6);
  CHECK(read_gt(pr / "gt.jsonl").size() == 6);

  const fs::path s1 = scratch("sim_1"), s2 = scratch("sim_2");
  const AmbiguityCounts a1 = cmd_assign_sim(c, pr / "predictions.jsonl", pr / "gt.jsonl", s1);
  cmd_assign_sim(c, pr / "predictions.jsonl", pr / "gt.jsonl", s2);
  CHECK(bytes_of(s1 / "assignments.jsonl") == bytes_of(s2 / "assignments.jsonl"));
  CHECK(a1.true_positives + a1.false_negatives == a1.oracle_positives);

  std::string dump = bytes_of(pr / "predictions.jsonl");
  const auto second = dump.find('\n') + 1;
  dump.replace(second, 10, "{\"broken\":");
  write_text(pr / "bad.jsonl", dump);
  CHECK_THROWS_WITH_AS(cmd_assign_sim(c, pr / "bad.jsonl", pr / "gt.jsonl", s1), doctest::Contains("line 2"),
                       ParseError);

  std::string ckpt = bytes_of(run / "final.bin");
  ckpt[ckpt.size() / 3] = static_cast<char>(ckpt[ckpt.size() / 3] ^ 0x01);
  write_text(run / "corrupt.bin", ckpt);
  CHECK_THROWS_AS(cmd_eval(c, run / "corrupt.bin", std::nullopt, ev), FormatError);
  for (const auto& d : {run, ev, dg, pr, s1, s2}) fs::remove_all(d);
}

TEST_CASE("assign-sim on the bundled fixture") {
  const fs::path fx = ARSL_FIXTURE_DIR "/assign_sim";
  ExperimentConfig c = load_config(fx / "config.txt");
  const fs::path out = scratch("fixture_sim");
  const AmbiguityCounts mined = cmd_assign_sim(c, fx / "predictions.jsonl", fx / "gt.jsonl", out / "mined");
  const std::string records = bytes_of(out / "mined" / "assignments.jsonl");
  cmd_assign_sim(c, fx / "predictions.jsonl", fx / "gt.jsonl", out / "again");
  CHECK(bytes_of(out / "again" / "assignments.jsonl") == records);
  c.train.tsa.mining = false;
  const AmbiguityCounts plain = cmd_assign_sim(c, fx / "predictions.jsonl", fx / "gt.jsonl", out / "plain");
  c.train.assigner = AssignerMode::BoxBaseline;
  const AmbiguityCounts box = cmd_assign_sim(c, fx / "predictions.jsonl", fx / "gt.jsonl", out / "box");
  CHECK(mined.true_positives >= plain.true_positives);
  CHECK(mined.oracle_positives == plain.oracle_positives);
  CHECK(box.oracle_positives == plain.oracle_positives);
  CHECK(mined.oracle_positives > 0);
  fs::remove_all(out);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  fs::create_directories(dir);
  write_text(dir / "small.conf", kSmallConfig);
  const std::string conf = (dir / "small.conf").string();
  CHECK(run_cli({"config", "--config", conf}) == kExitOk);
  CHECK(run_cli({"gen-data", "--config", conf, "--out", (dir / "data").string()}) == kExitOk);
  CHECK(run_cli({}) == kExitUsage);
  CHECK(run_cli({"train", "--config", conf}) == kExitUsage);
  CHECK(run_cli({"train", "--config", conf, "--assigner", "anchors", "--out", (dir / "x").string()}) == kExitUsage);
  CHECK(run_cli({"train", "--config", conf, "--set", "beta=-1", "--out", (dir / "x").string()}) == kExitUsage);
  CHECK(run_cli({"eval", "--config", conf, "--checkpoint", (dir / "small.conf").string(), "--out",
                 (dir / "x").string()}) == kExitUsage);
  CHECK(run_cli({"train", "--config", conf, "--set", "lr=10", "--set", "weight_decay=1", "--set",
                 "burn_in_iters=50", "--set", "total_iters=50", "--out", (dir / "boom").string()}) == kExitNumeric);
  CHECK(fs::exists(dir / "boom" / "failure.json"));
  CHECK(fs::exists(dir / "boom" / "failure.bin"));
  CHECK(run_cli({"train", "--config", conf, "--seed", "9", "--threads", "1", "--head", "centerness", "--mining",
                 "off", "--out", (dir / "ok").string()}) == kExitOk);
  const ExperimentConfig echoed = load_config(dir / "ok" / "config.txt");
  CHECK(echoed.seed == 9);
  CHECK(echoed.train.head == HeadMode::Centerness);
  CHECK_FALSE(echoed.train.tsa.mining);
  fs::remove_all(dir);
}
