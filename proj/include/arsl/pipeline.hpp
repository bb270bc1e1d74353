// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "arsl/assignment.hpp"
#include "arsl/checkpoint.hpp"
#include "arsl/data.hpp"
#include "arsl/model.hpp"

namespace arsl {

enum class AssignerMode { BoxBaseline, Tsa };

struct TrainConfig {
  double beta = 2.0;          // unsupervised loss weight
  double lambda = 0.5;        // unlabeled IoU-branch weight
  double ema_momentum = 0.9996;
  double gamma = 2.0;         // focal modulation exponent
  double nms_threshold = 0.6; // pseudo-box NMS
  int burn_in_iters = 1000;
  int total_iters = 3000;
  AssignerMode assigner = AssignerMode::Tsa;
  HeadMode head = HeadMode::Jce;
  TsaConfig tsa;              // tau_neg, iou_match_threshold, sigma, mining
  double lr = 0.01;
  /// Linear learning-rate ramp over the first iterations; 0 disables it.
  int warmup_iters = 0;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int labeled_batch = 4;
  int unlabeled_batch = 4;
  StrongAugConfig strong;
  ModelConfig model;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// Training-side view of a labeled scene.
struct LabeledImage {
  Image image;
  std::vector<GtObject> gt;
};

/// Training-side view of an unlabeled scene: pixels only.
struct UnlabeledImage {
  Image image;
};

struct TrainingSet {
  std::vector<LabeledImage> labeled;
  std::vector<UnlabeledImage> unlabeled;
};

/// Separates samples by split; ground truth of unlabeled samples is dropped.
TrainingSet make_training_set(const std::vector<Sample>& samples);

/// theta_t <- m theta_t + (1 - m) theta_s.
void ema_update(ModelParams& teacher, const ModelParams& student, double m);

struct PseudoLabels {
  DenseMap dense;
  ScoreMap scores;
  std::vector<Detection> boxes;
};

/// Teacher inference on the weak view: the dense map is kept for TSA and the
/// box list is filtered at sigma, then NMSed.
PseudoLabels generate_pseudo_labels(const ModelParams& teacher, const Image& weak_view,
                                    double sigma, double nms_threshold);

struct LossParts {
  double cls = 0.0;
  double loc = 0.0;
  double iou = 0.0;
  int n_cls = 0;
  int n_loc = 0;
};

struct DenseLoss {
  LossParts parts;
  double total = 0.0;
  std::vector<OutputGrads> grads;  // one per image, already normalized and weighted
};

/// (1/N_cls) sum L_cls + (1/N_loc) sum L_loc + (lambda/N_loc) sum L_iou over
/// a batch, N_cls = cls_active count, N_loc = loc_active count. The
/// localization terms vanish when N_loc = 0. Assignments must be materialized.
DenseLoss unsupervised_loss(std::span<const DenseMap> student, std::span<const AssignmentResult> assignment,
                            double lambda, double gamma, HeadMode head);

/// FCOS-normalized supervised loss: every term divided by max(1, positives),
/// IoU-branch weight 1.
DenseLoss supervised_loss(std::span<const DenseMap> student, std::span<const AssignmentResult> assignment,
                          double gamma, HeadMode head);

struct StepRecord {
  int iteration = 0;
  bool burn_in = false;
  LossParts sup;
  LossParts unsup;
  double sup_total = 0.0;
  double unsup_total = 0.0;
  double total = 0.0;
  double tau_pos_mean = 0.0;  // over unlabeled images with finite tau_pos
  int tau_pos_infinite = 0;
  int negatives = 0;
  int candidates = 0;
  int positives = 0;
  int pseudo_boxes = 0;
};

/// Burn-in followed by teacher-student self-training.
class Trainer {
 public:
  Trainer(TrainConfig config, TrainingSet data, ModelParams init);
  /// Continue from a checkpoint written by this trainer.
  Trainer(TrainConfig config, TrainingSet data, const Checkpoint& ckpt);

  int iteration() const { return iteration_; }
  bool done() const { return iteration_ >= config_.total_iters; }
  StepRecord step();
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  const ModelParams& student() const { return student_; }
  const ModelParams& teacher() const { return teacher_; }
  const OptState& opt() const { return opt_; }
  const TrainConfig& config() const { return config_; }
  Checkpoint checkpoint() const;

 private:
  StepRecord supervised_step(StepRecord record, std::vector<double>& grads, std::uint64_t seed);
  void self_training_terms(StepRecord& record, std::vector<double>& grads, std::uint64_t seed);

  TrainConfig config_;
  TrainingSet data_;
  ModelParams student_;
  ModelParams teacher_;
  OptState opt_;
  int iteration_ = 0;
};

/// Supervised pre-training; the teacher is a bitwise copy of the result.
struct BurnInResult {
  ModelParams student;
  ModelParams teacher;
};
BurnInResult burn_in(const ModelParams& student, const std::vector<LabeledImage>& labeled, int iters,
                     const TrainConfig& config);

/// lr * min(1, (iteration + 1) / warmup_iters).
double learning_rate(const TrainConfig& config, int iteration);

/// Initial parameters used for a config (seeded from config.seed).
ModelParams initial_params(const TrainConfig& config);

/// Runs `fn(k)` for k in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

std::string to_string(AssignerMode mode);
std::string to_string(HeadMode mode);

}  // namespace arsl
