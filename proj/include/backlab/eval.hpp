#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/model.hpp"
#include "backlab/trainlog.hpp"

namespace backlab {

// Predictions over a whole dataset, chunked to keep activation memory flat.
inline std::vector<int> predict_dataset(const Model& m, const Dataset& d, int chunk = 256) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(d.n()));
  std::vector<int> idx;
  for (int start = 0; start < d.n(); start += chunk) {
    const int stop = std::min(start + chunk, d.n());
    idx.resize(static_cast<size_t>(stop - start));
    for (int i = start; i < stop; ++i) idx[static_cast<size_t>(i - start)] = i;
    const std::vector<int> pred = predict(m, make_batch(d, idx));
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

inline double clean_accuracy(const Model& m, const Dataset& test) {
  require(test.n() > 0, ErrKind::config, "clean accuracy over an empty set is undefined");
  const std::vector<int> pred = predict_dataset(m, test);
  int hits = 0;
  for (int i = 0; i < test.n(); ++i) {
    if (pred[static_cast<size_t>(i)] == test.labels[static_cast<size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / test.n();
}

// Fraction of triggered samples classified as the target. The set must come
// from build_asr_testset; original-target-class samples are rejected here
// again so a miscomposed set cannot inflate the score.
inline double attack_success_rate(const Model& m, const Dataset& asr_set, int target_label) {
  require(asr_set.n() > 0, ErrKind::config, "attack success rate over an empty set is undefined");
  require(asr_set.original_labels.size() == static_cast<size_t>(asr_set.n()), ErrKind::config,
          "attack-success set lacks original labels; build it with build_asr_testset");
  for (int y : asr_set.original_labels) {
    require(y != target_label, ErrKind::config,
            "attack-success set contains an original target-class sample");
  }
  const std::vector<int> pred = predict_dataset(m, asr_set);
  int hits = 0;
  for (int p : pred) {
    if (p == target_label) ++hits;
  }
  return static_cast<double>(hits) / asr_set.n();
}

struct CostSummary {
  double seconds = 0.0;
  int epochs = 0;
  int64_t steps = 0;
};

inline CostSummary cost_report(const TrainLog& log) {
  CostSummary c;
  c.seconds = log.total_seconds();
  c.epochs = log.epochs();
  c.steps = log.total_steps();
  return c;
}

// Before/after metrics for one defense arm.
struct EvalReport {
  double asr_before = 0.0;
  double asr_after = 0.0;
  double ca_before = 0.0;
  double ca_after = 0.0;
  double cost_seconds = 0.0;
  int epochs_used = 0;
  std::string scenario;
  std::string config_digest;
};

}  // namespace backlab
