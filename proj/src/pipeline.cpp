// Copyright 2026 The ARSL Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "arsl/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "arsl/errors.hpp"
#include "arsl/rng.hpp"

namespace arsl {

void TrainConfig::validate() const {
  if (!(ema_momentum > 0.0 && ema_momentum <= 1.0)) {
    throw ConfigError("train: ema_momentum must be in (0, 1]");
  }
  if (beta < 0.0 || lambda < 0.0) throw ConfigError("train: beta and lambda must be >= 0");
  if (gamma < 0.0) throw ConfigError("train: gamma must be >= 0");
  if (burn_in_iters < 0 || total_iters < 0 || warmup_iters < 0) throw ConfigError("train: iteration counts must be >= 0");
  if (labeled_batch < 1 || unlabeled_batch < 0) throw ConfigError("train: bad batch sizes");
  if (!(lr >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("train: lr, momentum and weight_decay must be >= 0");
  }
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
  tsa.validate();
  model.validate();
}

std::string to_string(AssignerMode mode) { return mode == AssignerMode::Tsa ? "tsa" : "box"; }
std::string to_string(HeadMode mode) { return mode == HeadMode::Jce ? "jce" : "centerness"; }

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(threads, n);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

TrainingSet make_training_set(const std::vector<Sample>& samples) {
  TrainingSet set;
  for (const Sample& s : samples) {
    if (s.split == Split::Labeled) {
      set.labeled.push_back({s.image, s.gt});
    } else {
      set.unlabeled.push_back({s.image});
    }
  }
  return set;
}

void ema_update(ModelParams& teacher, const ModelParams& student, double m) {
  if (teacher.values.size() != student.values.size()) {
    throw ConfigError("ema_update: teacher and student shapes differ");
  }
  for (std::size_t k = 0; k < teacher.values.size(); ++k) {
    teacher.values[k] = m * teacher.values[k] + (1.0 - m) * student.values[k];
  }
}

PseudoLabels generate_pseudo_labels(const ModelParams& teacher, const Image& weak_view, double sigma,
                                    double nms_threshold) {
  PseudoLabels out;
  out.dense = forward(teacher, weak_view);
  out.scores = score_map(out.dense);
  out.boxes = pseudo_boxes(out.scores, sigma, nms_threshold);
  return out;
}

namespace {

struct Normalizers {
  double cls;
  double loc;
  double iou_weight;
};

DenseLoss dense_loss(std::span<const DenseMap> maps, std::span<const AssignmentResult> assignments,
                     double gamma, HeadMode head, const Normalizers& norm) {
  DenseLoss out;
  out.grads.reserve(maps.size());
  double sum_cls = 0.0, sum_loc = 0.0, sum_iou = 0.0;
  for (std::size_t img = 0; img < maps.size(); ++img) {
    const DenseMap& map = maps[img];
    const AssignmentResult& asg = assignments[img];
    OutputGrads g = OutputGrads::zeros(map);
    const int nc = map.num_classes;
    for (int loc = 0; loc < map.size(); ++loc) {
      const LocationAssignment& a = asg.locations[static_cast<std::size_t>(loc)];
      const std::size_t l = static_cast<std::size_t>(loc);
      if (a.cls_active) {
        ++out.parts.n_cls;
        const FocalLossGrad f = head == HeadMode::Jce
                                    ? united_focal_loss(map.cls(loc), map.iou_logits[l], *a.cls_target, gamma)
                                    : class_focal_loss(map.cls(loc), *a.cls_target, gamma);
        sum_cls += f.loss;
        if (norm.cls > 0.0) {
          for (int c = 0; c < nc; ++c) {
            g.cls_logits[l * nc + c] += f.grad_cls_logits[static_cast<std::size_t>(c)] / norm.cls;
          }
          g.iou_logits[l] += f.grad_iou_logit / norm.cls;
        }
      }
      if (a.loc_active) {
        ++out.parts.n_loc;
        const GiouLossGrad gl = giou_loss_and_grad(map.distances(loc), *a.loc_target, map.grid.at(loc));
        const BceLossGrad bl = iou_branch_loss(sigmoid(map.iou_logits[l]), *a.iou_target);
        sum_loc += gl.loss;
        sum_iou += bl.loss;
        if (norm.loc > 0.0) {
          for (int k = 0; k < 4; ++k) g.ltrb[l * 4 + k] += gl.grad[static_cast<std::size_t>(k)] / norm.loc;
          g.iou_logits[l] += norm.iou_weight * bl.grad_logit / norm.loc;
        }
      }
    }
    out.grads.push_back(std::move(g));
  }
  out.parts.cls = norm.cls > 0.0 ? sum_cls / norm.cls : 0.0;
  out.parts.loc = norm.loc > 0.0 ? sum_loc / norm.loc : 0.0;
  out.parts.iou = norm.loc > 0.0 ? sum_iou / norm.loc : 0.0;
  out.total = out.parts.cls + out.parts.loc + norm.iou_weight * out.parts.iou;
  return out;
}

void check_inputs(std::span<const DenseMap> maps, std::span<const AssignmentResult> assignments) {
  if (maps.size() != assignments.size()) throw ConfigError("loss: one assignment per map required");
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].size() != assignments[k].grid.size()) throw ConfigError("loss: grid mismatch");
    for (const LocationAssignment& a : assignments[k].locations) {
      if (a.loc_active && !(a.loc_target && a.iou_target)) {
        throw ConfigError("loss: loc_active location without materialized targets");
      }
      if (a.cls_active && !a.cls_target) throw ConfigError("loss: cls_active location without target");
    }
  }
}

}  // namespace

DenseLoss unsupervised_loss(std::span<const DenseMap> student, std::span<const AssignmentResult> assignment,
                            double lambda, double gamma, HeadMode head) {
  check_inputs(student, assignment);
  int n_cls = 0, n_loc = 0;
  for (const AssignmentResult& a : assignment) {
    const auto c = a.counts();
    n_cls += c.cls_active;
    n_loc += c.loc_active;
  }
  return dense_loss(student, assignment, gamma, head,
                    {static_cast<double>(n_cls), static_cast<double>(n_loc), lambda});
}

DenseLoss supervised_loss(std::span<const DenseMap> student, std::span<const AssignmentResult> assignment,
                          double gamma, HeadMode head) {
  check_inputs(student, assignment);
  int n_pos = 0;
  for (const AssignmentResult& a : assignment) n_pos += a.counts().loc_active;
  const double norm = std::max(1, n_pos);
  return dense_loss(student, assignment, gamma, head, {norm, norm, 1.0});
}

ModelParams initial_params(const TrainConfig& config) {
  return init_params(mix_seed(config.seed, 0x1417), config.model);
}

Trainer::Trainer(TrainConfig config, TrainingSet data, ModelParams init)
    : config_(std::move(config)), data_(std::move(data)), student_(std::move(init)) {
  config_.validate();
  if (data_.labeled.empty()) throw ConfigError("train: no labeled images");
  teacher_ = student_;
  opt_ = make_opt_state(student_, config_.lr, config_.momentum, config_.weight_decay);
}

Trainer::Trainer(TrainConfig config, TrainingSet data, const Checkpoint& ckpt)
    : Trainer(std::move(config), std::move(data), ckpt.student) {
  teacher_ = ckpt.teacher;
  if (!ckpt.momentum.empty()) opt_.momentum = ckpt.momentum;
  iteration_ = static_cast<int>(ckpt.iteration);
}

Checkpoint Trainer::checkpoint() const {
  return {static_cast<std::uint64_t>(iteration_), student_, teacher_, opt_.momentum};
}

namespace {

void accumulate(std::vector<double>& into, const std::vector<double>& g, double scale) {
  for (std::size_t k = 0; k < into.size(); ++k) into[k] += scale * g[k];
}

}  // namespace

StepRecord Trainer::supervised_step(StepRecord record, std::vector<double>& grads, std::uint64_t seed) {
  Rng rng(seed);
  const int n = config_.labeled_batch;
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> aug(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    ids[static_cast<std::size_t>(k)] = rng.uniform_int(0, static_cast<int>(data_.labeled.size()) - 1);
    aug[static_cast<std::size_t>(k)] = rng.next_u64();
  }
  std::vector<DenseMap> maps(static_cast<std::size_t>(n));
  std::vector<ForwardCache> caches(static_cast<std::size_t>(n));
  std::vector<AssignmentResult> assignments(static_cast<std::size_t>(n));
  const int nc = student_.config.num_classes;
  parallel_for(n, config_.threads, [&](int k) {
    const std::size_t s = static_cast<std::size_t>(k);
    const LabeledImage& li = data_.labeled[static_cast<std::size_t>(ids[s])];
    const AugmentedView view = weak_augment(li.image, li.gt, aug[s]);
    maps[s] = forward(student_, view.image, caches[s]);
    assignments[s] = assign_boxes(view.gt, maps[s].grid, nc, config_.head);
    materialize_targets(assignments[s], maps[s], config_.head);
  });
  DenseLoss loss = supervised_loss(maps, assignments, config_.gamma, config_.head);
  std::vector<std::vector<double>> per_image(static_cast<std::size_t>(n));
  parallel_for(n, config_.threads, [&](int k) {
    const std::size_t s = static_cast<std::size_t>(k);
    per_image[s].assign(student_.values.size(), 0.0);
    backward(student_, caches[s], maps[s], loss.grads[s], per_image[s]);
  });
  for (const auto& g : per_image) accumulate(grads, g, 1.0);
  record.sup = loss.parts;
  record.sup_total = loss.total;
  return record;
}

void Trainer::self_training_terms(StepRecord& record, std::vector<double>& grads, std::uint64_t seed) {
  if (data_.unlabeled.empty() || config_.unlabeled_batch == 0) return;
  Rng rng(seed);
  const int n = config_.unlabeled_batch;
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> weak_seed(static_cast<std::size_t>(n));
  std::vector<std::uint64_t> strong_seed(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    ids[static_cast<std::size_t>(k)] = rng.uniform_int(0, static_cast<int>(data_.unlabeled.size()) - 1);
    weak_seed[static_cast<std::size_t>(k)] = rng.next_u64();
    strong_seed[static_cast<std::size_t>(k)] = rng.next_u64();
  }
  std::vector<DenseMap> maps(static_cast<std::size_t>(n));
  std::vector<ForwardCache> caches(static_cast<std::size_t>(n));
  std::vector<AssignmentResult> assignments(static_cast<std::size_t>(n));
  std::vector<int> box_counts(static_cast<std::size_t>(n), 0);
  const int nc = student_.config.num_classes;
  parallel_for(n, config_.threads, [&](int k) {
    const std::size_t s = static_cast<std::size_t>(k);
    const UnlabeledImage& ui = data_.unlabeled[static_cast<std::size_t>(ids[s])];
    const AugmentedView weak = weak_augment(ui.image, {}, weak_seed[s]);
    const StrongView strong = strong_augment(weak, strong_seed[s], config_.strong);
    const DenseMap teacher_map = align_teacher_to_student(forward(teacher_, weak.image), strong.mirrored);
    const ScoreMap scores = score_map(teacher_map);
    if (config_.assigner == AssignerMode::Tsa) {
      assignments[s] = assign_tsa(scores, config_.tsa);
    } else {
      const auto boxes = pseudo_boxes(scores, config_.tsa.sigma, config_.nms_threshold);
      box_counts[s] = static_cast<int>(boxes.size());
      assignments[s] = assign_box_baseline(boxes, scores.grid, nc, config_.head);
    }
    maps[s] = forward(student_, strong.image, caches[s]);
    materialize_targets(assignments[s], maps[s], config_.head);
  });
  DenseLoss loss = unsupervised_loss(maps, assignments, config_.lambda, config_.gamma, config_.head);
  std::vector<std::vector<double>> per_image(static_cast<std::size_t>(n));
  parallel_for(n, config_.threads, [&](int k) {
    const std::size_t s = static_cast<std::size_t>(k);
    per_image[s].assign(student_.values.size(), 0.0);
    backward(student_, caches[s], maps[s], loss.grads[s], per_image[s]);
  });
  for (const auto& g : per_image) accumulate(grads, g, config_.beta);

  record.unsup = loss.parts;
  record.unsup_total = loss.total;
  double tau_sum = 0.0;
  int tau_finite = 0;
  for (std::size_t s = 0; s < assignments.size(); ++s) {
    const auto c = assignments[s].counts();
    record.negatives += c.negative;
    record.candidates += c.candidate;
    record.positives += c.positive;
    record.pseudo_boxes += box_counts[s];
    if (config_.assigner == AssignerMode::Tsa) {
      if (std::isfinite(assignments[s].tau_pos)) {
        tau_sum += assignments[s].tau_pos;
        ++tau_finite;
      } else {
        ++record.tau_pos_infinite;
      }
    }
  }
  record.tau_pos_mean = tau_finite > 0 ? tau_sum / tau_finite : 0.0;
}

StepRecord Trainer::step() {
  if (done()) throw ConfigError("train: step() called after the final iteration");
  StepRecord record;
  record.iteration = iteration_;
  record.burn_in = iteration_ < config_.burn_in_iters;
  const std::uint64_t base = mix_seed(config_.seed, 0x7a11 + static_cast<std::uint64_t>(iteration_));

  std::vector<double> grads(student_.values.size(), 0.0);
  record = supervised_step(record, grads, mix_seed(base, 1));
  if (!record.burn_in && config_.beta > 0.0) self_training_terms(record, grads, mix_seed(base, 2));
  record.total = record.sup_total + config_.beta * record.unsup_total;

  if (!std::isfinite(record.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at iteration " << iteration_ << ": sup(cls=" << record.sup.cls
        << ", loc=" << record.sup.loc << ", iou=" << record.sup.iou << ") unsup(cls=" << record.unsup.cls
        << ", loc=" << record.unsup.loc << ", iou=" << record.unsup.iou << ")";
    throw NumericError(msg.str());
  }
  opt_.lr = learning_rate(config_, iteration_);
  sgd_step(student_, grads, opt_);
  if (!record.burn_in) ema_update(teacher_, student_, config_.ema_momentum);
  ++iteration_;
  if (iteration_ == config_.burn_in_iters) teacher_ = student_;
  return record;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  while (!done()) {
    const StepRecord r = step();
    if (on_step) on_step(r);
  }
}

double learning_rate(const TrainConfig& config, int iteration) {
  if (iteration >= config.warmup_iters) return config.lr;
  return config.lr * static_cast<double>(iteration + 1) / static_cast<double>(config.warmup_iters);
}

BurnInResult burn_in(const ModelParams& student, const std::vector<LabeledImage>& labeled, int iters,
                     const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.burn_in_iters = iters;
  cfg.total_iters = iters;
  Trainer trainer(cfg, TrainingSet{labeled, {}}, student);
  trainer.run();
  return {trainer.student(), trainer.teacher()};
}

}  // namespace arsl
