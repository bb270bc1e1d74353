// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/cli.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "arsl/checkpoint.hpp"
#include "arsl/errors.hpp"
#include "arsl/records.hpp"

namespace arsl {

namespace fs = std::filesystem;

namespace {

void echo_into(const ExperimentConfig& config, const fs::path& out) {
  write_text(out / "config.txt", echo_config(config));
}

std::vector<Sample> eval_dataset(const ExperimentConfig& config, const std::optional<fs::path>& dataset) {
  if (dataset) return load_dataset(*dataset);
  return holdout_dataset(config);
}

std::string checkpoint_name(int iteration) {
  char name[32];
  std::snprintf(name, sizeof name, "ckpt_%06d.bin", iteration);
  return name;
}

/// Keeps log lines from before `iteration` so a resumed run extends the log
/// exactly as an uninterrupted run would have written it.
std::string truncated_log(const fs::path& log, int iteration) {
  if (!fs::exists(log)) return {};
  std::istringstream in(read_text(log));
  std::string kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("iteration")) continue;
    if (j["iteration"].get<int>() < iteration) kept += line + '\n';
  }
  return kept;
}

}  // namespace

void cmd_gen_data(const ExperimentConfig& config, const fs::path& out) {
  const auto samples = generate_dataset(config.scenes, config.labeled_fraction, config.seed, config.scene);
  save_dataset(out, samples);
  echo_into(config, out);
}

TrainOutcome cmd_train(const ExperimentConfig& config, const fs::path& out, const std::optional<fs::path>& resume) {
  fs::create_directories(out);
  echo_into(config, out);
  const auto samples = training_dataset(config);
  TrainingSet data = make_training_set(samples);
  const fs::path log_path = out / "train_log.jsonl";

  std::optional<Trainer> trainer;
  std::string log_text;
  if (resume) {
    if (!fs::exists(*resume)) throw ConfigError("resume checkpoint " + resume->string() + " does not exist");
    const Checkpoint ckpt = load_checkpoint(*resume);
    trainer.emplace(config.train, std::move(data), ckpt);
    log_text = truncated_log(log_path, static_cast<int>(ckpt.iteration));
  } else {
    trainer.emplace(config.train, std::move(data), initial_params(config.train));
  }

  std::ofstream log(log_path, std::ios::binary | std::ios::trunc);
  if (!log) throw FormatError("cannot write " + log_path.string());
  log << log_text;

  while (!trainer->done()) {
    const Checkpoint before = trainer->checkpoint();
    StepRecord record;
    try {
      record = trainer->step();
    } catch (const NumericError& e) {
      log.flush();
      save_checkpoint(out / "failure.bin", before);
      nlohmann::ordered_json failure;
      failure["iteration"] = trainer->iteration();
      failure["error"] = e.what();
      write_text(out / "failure.json", failure.dump(2) + '\n');
      throw;
    }
    log << step_record_json(record) << '\n';
    if (trainer->iteration() % config.checkpoint_every == 0 && !trainer->done()) {
      save_checkpoint(out / checkpoint_name(trainer->iteration()), trainer->checkpoint());
    }
  }
  log.close();
  TrainOutcome outcome;
  outcome.final_checkpoint = out / "final.bin";
  outcome.log = log_path;
  outcome.iterations = trainer->iteration();
  save_checkpoint(outcome.final_checkpoint, trainer->checkpoint());
  return outcome;
}

EvalReport cmd_eval(const ExperimentConfig& config, const fs::path& checkpoint, const std::optional<fs::path>& dataset,
                    const fs::path& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto samples = eval_dataset(config, dataset);
  const EvalReport report = evaluate(ckpt.teacher, samples, config.eval_score_threshold, config.eval_nms_threshold);
  fs::create_directories(out);
  echo_into(config, out);
  write_text(out / "metrics.json", report.to_json() + '\n');
  write_text(out / "metrics.txt", report.to_table());
  return report;
}

DiagnosticsReport cmd_diagnose(const ExperimentConfig& config, const fs::path& checkpoint,
                               const std::optional<fs::path>& dataset, const fs::path& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto samples = eval_dataset(config, dataset);
  const DiagnosticsReport report = diagnose(ckpt.teacher, samples, config.train.tsa, config.eval_score_threshold,
                                            config.eval_nms_threshold, config.sweep_sigmas);
  fs::create_directories(out);
  echo_into(config, out);
  write_text(out / "diagnostics.json", report.to_json() + '\n');
  write_text(out / "diagnostics.txt", report.to_table());
  write_text(out / "plot_data.tsv", report.plot_data());
  return report;
}

void cmd_predict(const ExperimentConfig& config, const fs::path& checkpoint, const std::optional<fs::path>& dataset,
                 const fs::path& out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const auto samples = eval_dataset(config, dataset);
  std::vector<ScoreMap> maps;
  std::vector<std::vector<GtObject>> gt;
  for (const Sample& s : samples) {
    maps.push_back(score_map(forward(ckpt.teacher, s.image)));
    gt.push_back(s.gt);
  }
  fs::create_directories(out);
  echo_into(config, out);
  write_predictions(out / "predictions.jsonl", maps);
  write_gt(out / "gt.jsonl", gt);
}

AmbiguityCounts cmd_assign_sim(const ExperimentConfig& config, const fs::path& predictions, const fs::path& gt,
                               const fs::path& out) {
  const auto maps = read_predictions(predictions);
  const auto truth = read_gt(gt);
  if (maps.size() != truth.size()) {
    throw ParseError("prediction dump has " + std::to_string(maps.size()) + " images, GT dump has " +
                     std::to_string(truth.size()));
  }
  fs::create_directories(out);
  echo_into(config, out);
  std::ofstream records(out / "assignments.jsonl", std::ios::binary | std::ios::trunc);
  if (!records) throw FormatError("cannot write " + (out / "assignments.jsonl").string());
  AmbiguityCounts counts;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    for (const GtObject& o : truth[k]) {
      if (o.cls >= maps[k].num_classes) {
        throw ParseError("GT image " + std::to_string(k) + " has class " + std::to_string(o.cls) +
                         " beyond the prediction's " + std::to_string(maps[k].num_classes) + " classes");
      }
    }
    AssignmentResult result =
        config.train.assigner == AssignerMode::Tsa
            ? assign_tsa(maps[k], config.train.tsa)
            : assign_box_baseline(pseudo_boxes(maps[k], config.train.tsa.sigma, config.train.nms_threshold),
                                  maps[k].grid, maps[k].num_classes, config.train.head);
    records << assignment_records(static_cast<int>(k), result);
    counts += assignment_ambiguity_report(result, truth[k]);
  }
  write_text(out / "ambiguity.json", ambiguity_json(counts) + '\n');
  return counts;
}

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string assigner;
  std::string head;
  std::string mining;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_out) {
  cmd->add_option("--config", f.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "override the master seed");
  cmd->add_option("--threads", f.threads, "worker threads; 1 is fully deterministic")->check(CLI::PositiveNumber);
  cmd->add_option("--assigner", f.assigner, "unlabeled assignment")->check(CLI::IsMember({"box", "tsa"}));
  cmd->add_option("--head", f.head, "quality branch")->check(CLI::IsMember({"centerness", "jce"}));
  cmd->add_option("--mining", f.mining, "TSA potential positive mining")->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--set", f.overrides, "extra key=value override, repeatable");
  auto* out = cmd->add_option("--out", f.out, "output directory");
  if (needs_out) out->required();
}

ExperimentConfig resolve(const CommonFlags& f) {
  ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.train.threads = *f.threads;
  if (!f.assigner.empty()) set_config_value(c, "assigner", f.assigner);
  if (!f.head.empty()) set_config_value(c, "head", f.head);
  if (!f.mining.empty()) set_config_value(c, "mining", f.mining);
  for (const std::string& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.finalize();
  return c;
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Semi-supervised dense detection on synthetic shape scenes", "arsl"};
  app.require_subcommand(1);
  CommonFlags f;
  std::string checkpoint;
  std::string dataset;
  std::string resume;
  std::string predictions;
  std::string gt;

  auto* gen = app.add_subcommand("gen-data", "generate and save a synthetic dataset");
  add_common(gen, f, true);

  auto* train = app.add_subcommand("train", "burn-in then teacher-student training");
  add_common(train, f, true);
  train->add_option("--resume", resume, "continue from a checkpoint");

  auto* eval = app.add_subcommand("eval", "AP of a checkpoint's teacher");
  add_common(eval, f, true);
  eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  eval->add_option("--dataset", dataset, "gen-data directory; default is the held-out scenes");

  auto* diag = app.add_subcommand("diagnose", "selection, ambiguity and confidence diagnostics");
  add_common(diag, f, true);
  diag->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  diag->add_option("--dataset", dataset, "gen-data directory; default is the held-out scenes");

  auto* pred = app.add_subcommand("predict", "dump teacher score maps and ground truth");
  add_common(pred, f, true);
  pred->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required();
  pred->add_option("--dataset", dataset, "gen-data directory; default is the held-out scenes");

  auto* sim = app.add_subcommand("assign-sim", "run an assigner on dumped predictions");
  add_common(sim, f, true);
  sim->add_option("--predictions", predictions, "predictions.jsonl written by predict")->required()->check(CLI::ExistingFile);
  sim->add_option("--gt", gt, "gt.jsonl written by predict")->required()->check(CLI::ExistingFile);

  auto* show = app.add_subcommand("config", "print the resolved configuration");
  add_common(show, f, false);

  std::vector<const char*> argv{"arsl"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const ExperimentConfig config = resolve(f);
    const fs::path out = f.out;
    if (*gen) {
      cmd_gen_data(config, out);
      std::cout << "wrote " << config.scenes << " scenes to " << out.string() << '\n';
    } else if (*train) {
      const auto outcome = cmd_train(config, out, optional_path(resume));
      std::cout << "trained " << outcome.iterations << " iterations, checkpoint "
                << outcome.final_checkpoint.string() << '\n';
    } else if (*eval) {
      std::cout << cmd_eval(config, checkpoint, optional_path(dataset), out).to_table();
    } else if (*diag) {
      std::cout << cmd_diagnose(config, checkpoint, optional_path(dataset), out).to_table();
    } else if (*pred) {
      cmd_predict(config, checkpoint, optional_path(dataset), out);
      std::cout << "wrote " << (out / "predictions.jsonl").string() << " and " << (out / "gt.jsonl").string()
                << '\n';
    } else if (*sim) {
      std::cout << ambiguity_json(cmd_assign_sim(config, predictions, gt, out)) << '\n';
    } else if (*show) {
      if (!f.out.empty()) echo_into(config, out);
      std::cout << echo_config(config);
    }
  } catch (const NumericError& e) {
    std::cerr << "arsl: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "arsl: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace arsl
