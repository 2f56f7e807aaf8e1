#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/eval.hpp"
#include "backlab/model.hpp"
#include "backlab/poison.hpp"
#include "backlab/schedule.hpp"
#include "backlab/train.hpp"
#include "backlab/trainlog.hpp"

namespace backlab {

// Deployment scenarios:
//   standalone  — the victim deploys the trained model directly; the defender
//                 fine-tunes it on clean same-distribution data.
//   transfer    — the backdoored model is pre-training for a new task: its
//                 head is replaced and the whole model is fine-tuned on the
//                 downstream task's data.
//   encoder_sim — the backdoored model serves as a feature extractor; the
//                 contrast of interest is fine-tuning only the classifier
//                 head versus fine-tuning the whole model on clean data.
enum class Scenario { standalone, transfer, encoder_sim };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::standalone: return "standalone";
    case Scenario::transfer: return "transfer";
    case Scenario::encoder_sim: return "encoder_sim";
  }
  return "standalone";
}

inline Scenario parse_scenario(const std::string& name) {
  if (name == "standalone") return Scenario::standalone;
  if (name == "transfer") return Scenario::transfer;
  if (name == "encoder_sim") return Scenario::encoder_sim;
  throw Error(ErrKind::config, "unknown scenario '" + name +
                                   "' (expected standalone, transfer, or encoder_sim)");
}

// One defense arm, covering every mitigation the lab implements.
struct DefenseSpec {
  enum class Kind { none, conventional_ft, super_ft, fine_prune };

  Kind kind = Kind::super_ft;
  int epochs = 5;
  int batch_size = 64;
  double lr = 0.01;  // conventional_ft and the fine-tune stage of fine_prune
  ScheduleSpec schedule = ScheduleSpec::superft();  // super_ft only
  float momentum = 0.0f;
  float weight_decay = 0.0f;
  uint64_t seed = 0;
  // fine_prune: fraction of conv channels to zero; negative means "step the
  // fraction up automatically until clean accuracy starts to pay for it".
  double prune_fraction = 0.05;
};

inline std::string to_string(DefenseSpec::Kind k) {
  switch (k) {
    case DefenseSpec::Kind::none: return "none";
    case DefenseSpec::Kind::conventional_ft: return "conventional_ft";
    case DefenseSpec::Kind::super_ft: return "super_ft";
    case DefenseSpec::Kind::fine_prune: return "fine_prune";
  }
  return "none";
}

inline DefenseSpec::Kind parse_defense_kind(const std::string& name) {
  if (name == "none") return DefenseSpec::Kind::none;
  if (name == "conventional_ft") return DefenseSpec::Kind::conventional_ft;
  if (name == "super_ft") return DefenseSpec::Kind::super_ft;
  if (name == "fine_prune") return DefenseSpec::Kind::fine_prune;
  throw Error(ErrKind::config, "unknown defense '" + name +
                                   "' (expected none, conventional_ft, super_ft, or fine_prune)");
}

namespace detail {

inline TrainConfig defense_train_config(const DefenseSpec& d, TrainConfig::Policy policy) {
  TrainConfig cfg;
  cfg.epochs = d.epochs;
  cfg.batch_size = d.batch_size;
  cfg.schedule = d.kind == DefenseSpec::Kind::super_ft ? d.schedule
                                                       : ScheduleSpec::constant_lr(d.lr);
  cfg.momentum = d.momentum;
  cfg.weight_decay = d.weight_decay;
  cfg.seed = d.seed;
  cfg.policy = policy;
  return cfg;
}

}  // namespace detail

// Runs one defense arm in place on `model`, using `clean` as the defender's
// data. `policy` selects which tensors train; pruning only makes sense
// whole-model, while the encoder contrast deliberately reruns the cyclic
// schedule with the head alone, which this dispatcher supports by driving
// train() directly.
inline TrainLog apply_defense(Model& model, const Dataset& clean, const DefenseSpec& d,
                              const EvalHooks& hooks = {},
                              TrainConfig::Policy policy = TrainConfig::Policy::whole_model) {
  switch (d.kind) {
    case DefenseSpec::Kind::none:
      return TrainLog{};
    case DefenseSpec::Kind::conventional_ft:
      return fine_tune(model, clean, detail::defense_train_config(d, policy), hooks);
    case DefenseSpec::Kind::super_ft: {
      if (policy == TrainConfig::Policy::whole_model) {
        return super_fine_tune(model, clean, d.schedule, d.epochs, d.seed, d.batch_size, hooks,
                               d.momentum, d.weight_decay);
      }
      TrainLog log = train(model, clean, detail::defense_train_config(d, policy), hooks);
      require(log.max_lr_seen <= d.schedule.lr_max1 + 1e-12, ErrKind::numeric,
              "schedule produced a learning rate above its declared ceiling");
      return log;
    }
    case DefenseSpec::Kind::fine_prune: {
      require(policy == TrainConfig::Policy::whole_model, ErrKind::config,
              "fine-pruning retrains the whole model");
      const TrainConfig cfg = detail::defense_train_config(d, policy);
      if (d.prune_fraction < 0.0) {
        // The defender only holds the clean fine-tuning set, so the automatic
        // fraction search measures its accuracy cost on that same set.
        return fine_prune_auto(model, clean, clean, cfg, hooks).log;
      }
      return fine_prune(model, clean, d.prune_fraction, cfg, hooks).log;
    }
  }
  return TrainLog{};
}

// Everything one scenario run needs beyond the datasets.
struct ScenarioSpec {
  Scenario scenario = Scenario::standalone;
  ArchSpec arch;
  PoisonSpec poison;
  TrainConfig attack;   // backdoor pre-training
  DefenseSpec defense;  // mitigation arm (or the downstream fine-tune, for transfer)
  int transfer_classes = 0;        // transfer: downstream task's class count
  uint64_t transfer_head_seed = 1; // transfer: init seed for the replacement head
  bool per_epoch_metrics = true;   // score CA/ASR into every training log row
};

// Borrowed datasets; `train`/`defender`/`test` describe the pre-training task
// and `target_*` the downstream task (transfer only).
struct ScenarioData {
  const Dataset* train = nullptr;
  const Dataset* defender = nullptr;
  const Dataset* test = nullptr;
  const Dataset* target_train = nullptr;
  const Dataset* target_test = nullptr;
};

struct ScenarioResult {
  EvalReport report;     // headline numbers; the whole-model arm for encoder_sim
  Model model;           // the defended model the report describes
  TrainLog attack_log;
  TrainLog defense_log;  // same arm as `report`
  // encoder_sim only: the classifier-head-only arm, for the freeze-vs-whole contrast.
  TrainLog head_only_log;
  double head_only_asr_after = -1.0;
  double head_only_ca_after = -1.0;
  // transfer only: source-task metrics of the backdoored model before its head
  // was replaced (the downstream user never sees these; the lab records them).
  double source_asr = -1.0;
  double source_ca = -1.0;
};

// The attack phase is independent of the defense arm, so sweeps train it once
// per seed and fan defense arms out from the frozen result.
struct AttackStage {
  Model model;
  TrainLog log;
  Dataset asr_set;  // source-task triggered evaluation set
};

inline AttackStage run_attack_stage(const ScenarioSpec& spec, const ScenarioData& data) {
  require(data.train && data.test, ErrKind::config,
          "scenario needs a training set and a test set");
  AttackStage stage;
  stage.asr_set =
      build_asr_testset(*data.test, spec.poison.trigger, spec.poison.target_label);
  EvalHooks hooks;
  if (spec.per_epoch_metrics) {
    hooks.ca_set = data.test;
    hooks.asr_set = &stage.asr_set;
    hooks.asr_target = spec.poison.target_label;
  }
  AttackResult atk = train_backdoored(spec.arch, *data.train, spec.poison, spec.attack, hooks);
  stage.model = std::move(atk.model);
  stage.log = std::move(atk.log);
  return stage;
}

namespace detail {

inline void finish_report(ScenarioResult& r, const Model& m, const Dataset& test,
                          const Dataset& asr_set, int target) {
  r.report.asr_after = attack_success_rate(m, asr_set, target);
  r.report.ca_after = clean_accuracy(m, test);
  r.report.cost_seconds = r.defense_log.total_seconds();
  r.report.epochs_used = r.defense_log.epochs();
}

}  // namespace detail

// Deployment + mitigation from a frozen attack stage. The stage stays intact;
// every call starts from a fresh copy of the backdoored model.
inline ScenarioResult run_defense_stage(const ScenarioSpec& spec, const ScenarioData& data,
                                        const AttackStage& stage) {
  require(data.test, ErrKind::config, "scenario needs a test set");
  const int target = spec.poison.target_label;

  ScenarioResult r;
  r.report.scenario = to_string(spec.scenario);
  r.attack_log = stage.log;

  switch (spec.scenario) {
    case Scenario::standalone: {
      require(data.defender, ErrKind::config, "standalone scenario needs a defender set");
      require(data.defender->classes == stage.model.arch.classes, ErrKind::config,
              "defender set class count does not match the model head");
      r.report.asr_before = attack_success_rate(stage.model, stage.asr_set, target);
      r.report.ca_before = clean_accuracy(stage.model, *data.test);
      EvalHooks hooks;
      if (spec.per_epoch_metrics) {
        hooks.ca_set = data.test;
        hooks.asr_set = &stage.asr_set;
        hooks.asr_target = target;
      }
      r.model = stage.model;
      r.defense_log = apply_defense(r.model, *data.defender, spec.defense, hooks);
      detail::finish_report(r, r.model, *data.test, stage.asr_set, target);
      return r;
    }

    case Scenario::encoder_sim: {
      require(data.defender, ErrKind::config, "encoder_sim scenario needs a defender set");
      require(data.defender->classes == stage.model.arch.classes, ErrKind::config,
              "defender set class count does not match the model head");
      require(spec.defense.kind == DefenseSpec::Kind::conventional_ft ||
                  spec.defense.kind == DefenseSpec::Kind::super_ft,
              ErrKind::config,
              "encoder_sim contrasts fine-tuning arms; pick conventional_ft or super_ft");
      r.report.asr_before = attack_success_rate(stage.model, stage.asr_set, target);
      r.report.ca_before = clean_accuracy(stage.model, *data.test);
      EvalHooks hooks;
      if (spec.per_epoch_metrics) {
        hooks.ca_set = data.test;
        hooks.asr_set = &stage.asr_set;
        hooks.asr_target = target;
      }

      Model head_arm = stage.model;
      r.head_only_log = apply_defense(head_arm, *data.defender, spec.defense, hooks,
                                      TrainConfig::Policy::head_only);
      r.head_only_asr_after = attack_success_rate(head_arm, stage.asr_set, target);
      r.head_only_ca_after = clean_accuracy(head_arm, *data.test);

      r.model = stage.model;
      r.defense_log = apply_defense(r.model, *data.defender, spec.defense, hooks,
                                    TrainConfig::Policy::whole_model);
      detail::finish_report(r, r.model, *data.test, stage.asr_set, target);
      return r;
    }

    case Scenario::transfer: {
      require(data.target_train && data.target_test, ErrKind::config,
              "transfer scenario needs downstream train and test sets");
      require(spec.transfer_classes >= 2, ErrKind::config,
              "transfer scenario needs the downstream class count (>= 2)");
      require(data.target_train->classes == spec.transfer_classes &&
                  data.target_test->classes == spec.transfer_classes,
              ErrKind::config, "downstream datasets disagree with transfer_classes");
      require(data.target_train->channels() == data.train->channels() &&
                  data.target_train->height() == data.train->height() &&
                  data.target_train->width() == data.train->width(),
              ErrKind::config, "downstream images must match the source geometry");
      require(target < spec.transfer_classes, ErrKind::config,
              "attack target label is outside the downstream label range");

      r.source_asr = attack_success_rate(stage.model, stage.asr_set, target);
      r.source_ca = clean_accuracy(stage.model, *data.test);

      r.model = stage.model;
      replace_head(r.model, spec.transfer_classes, spec.transfer_head_seed);

      // Both metrics now live on the downstream task: "before" is the freshly
      // re-headed model the downstream user starts from.
      const Dataset target_asr_set =
          build_asr_testset(*data.target_test, spec.poison.trigger, target);
      r.report.asr_before = attack_success_rate(r.model, target_asr_set, target);
      r.report.ca_before = clean_accuracy(r.model, *data.target_test);

      EvalHooks hooks;
      if (spec.per_epoch_metrics) {
        hooks.ca_set = data.target_test;
        hooks.asr_set = &target_asr_set;
        hooks.asr_target = target;
      }
      r.defense_log = apply_defense(r.model, *data.target_train, spec.defense, hooks);
      detail::finish_report(r, r.model, *data.target_test, target_asr_set, target);
      return r;
    }
  }
  throw Error(ErrKind::config, "unreachable scenario");
}

// One end-to-end experiment: poison + pre-train, then the scenario-specific
// deployment and mitigation, measuring ASR/CA before and after.
inline ScenarioResult run_scenario(const ScenarioSpec& spec, const ScenarioData& data) {
  const AttackStage stage = run_attack_stage(spec, data);
  return run_defense_stage(spec, data, stage);
}

}  // namespace backlab
