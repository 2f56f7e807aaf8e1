#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/eval.hpp"
#include "backlab/model.hpp"
#include "backlab/poison.hpp"
#include "backlab/train.hpp"
#include "backlab/trainlog.hpp"

namespace backlab {

// Re-injection: how fast does the SAME attack come back if the attacker gets
// to poison the training pipeline again? Run once from a defended model and
// once from a never-backdoored control; comparing the per-ratio epoch counts
// shows whether mitigation left the model easier to re-infect.

struct ReinjectionSpec {
  // The original attack's poisoning spec; every arm reuses its trigger,
  // target label, and poison seed verbatim and only swaps the ratio, so the
  // re-injected backdoor is the original one by construction.
  PoisonSpec poison;
  std::vector<double> ratios = {0.1, 0.01, 0.001, 0.0001};
  int max_epochs = 20;
  double threshold = 0.9;
};

struct ReinjectionArm {
  double ratio = 0.0;
  // asr[0] is the starting model's ASR; asr[e] the ASR after epoch e.
  std::vector<double> asr;
  std::vector<double> ca;
  // Smallest epoch index with asr >= threshold, or -1 if never reached.
  int epochs_to_threshold = -1;
  TrainLog log;
};

struct ReinjectionReport {
  std::string start_tag;  // "clean" or "defended"
  double threshold = 0.9;
  std::vector<ReinjectionArm> arms;
  // Higher poison ratios should re-install the backdoor at least as fast.
  // Stochastic training can break that ordering, so a violation is flagged
  // for the analyst rather than failed.
  bool monotone_violated = false;
};

inline void validate_reinjection_spec(const ReinjectionSpec& r) {
  require(!r.ratios.empty(), ErrKind::config, "re-injection needs at least one poison ratio");
  for (double q : r.ratios) {
    require(q >= 0.0 && q <= 1.0, ErrKind::config, "poison ratio must lie in [0,1]");
  }
  require(r.max_epochs >= 1, ErrKind::config, "re-injection needs at least one epoch");
  require(r.threshold > 0.0 && r.threshold <= 1.0, ErrKind::config,
          "threshold must lie in (0,1]");
}

// Re-trains a copy of `start` per ratio on a freshly poisoned copy of the
// clean training set, using the original attack's training configuration
// (epoch budget swapped for max_epochs), and records the ASR trajectory.
inline ReinjectionReport reinjection_curve(const Model& start, const std::string& start_tag,
                                           const Dataset& clean_train, const Dataset& test,
                                           const ReinjectionSpec& rspec,
                                           const TrainConfig& attack_cfg) {
  validate_reinjection_spec(rspec);
  require(clean_train.classes == start.arch.classes, ErrKind::config,
          "training set class count does not match the model head");

  const Dataset asr_set =
      build_asr_testset(test, rspec.poison.trigger, rspec.poison.target_label);
  EvalHooks hooks;
  hooks.ca_set = &test;
  hooks.asr_set = &asr_set;
  hooks.asr_target = rspec.poison.target_label;

  ReinjectionReport report;
  report.start_tag = start_tag;
  report.threshold = rspec.threshold;

  for (double ratio : rspec.ratios) {
    PoisonSpec ps = rspec.poison;
    ps.poison_ratio = ratio;

    ReinjectionArm arm;
    arm.ratio = ratio;
    arm.asr.push_back(attack_success_rate(start, asr_set, ps.target_label));
    arm.ca.push_back(clean_accuracy(start, test));

    Model m = start;
    // Momentum from any previous phase belongs to that phase's trajectory.
    for (auto& v : m.momentum) std::fill(v.begin(), v.end(), 0.0f);
    PoisonResult pr = poison_dataset(clean_train, ps);
    TrainConfig cfg = attack_cfg;
    cfg.epochs = rspec.max_epochs;
    arm.log = train(m, pr.dataset, cfg, hooks);
    for (const EpochRow& row : arm.log.rows) {
      arm.asr.push_back(row.asr);
      arm.ca.push_back(row.ca);
    }

    for (size_t e = 0; e < arm.asr.size(); ++e) {
      if (arm.asr[e] >= rspec.threshold) {
        arm.epochs_to_threshold = static_cast<int>(e);
        break;
      }
    }
    report.arms.push_back(std::move(arm));
  }

  // Check the ordering over ratios: more poison should never need more
  // epochs. "Never reached" sorts above every epoch count.
  std::vector<std::pair<double, int>> by_ratio;
  for (const ReinjectionArm& a : report.arms) {
    by_ratio.emplace_back(a.ratio,
                          a.epochs_to_threshold < 0 ? rspec.max_epochs + 1 : a.epochs_to_threshold);
  }
  std::sort(by_ratio.begin(), by_ratio.end());
  for (size_t i = 1; i < by_ratio.size(); ++i) {
    if (by_ratio[i].second > by_ratio[i - 1].second) report.monotone_violated = true;
  }
  return report;
}

}  // namespace backlab
