#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/trigger.hpp"

namespace backlab {

struct PoisonSpec {
  TriggerSpec trigger;
  int target_label = 0;
  double poison_ratio = 0.1;
  uint64_t seed = 0;
};

inline Tensor sample_tensor(const Dataset& d, int i) {
  Tensor t;
  t.shape = {d.channels(), d.height(), d.width()};
  const size_t ss = d.sample_size();
  t.data.assign(d.images.data.begin() + static_cast<int64_t>(i) * static_cast<int64_t>(ss),
                d.images.data.begin() + static_cast<int64_t>(i + 1) * static_cast<int64_t>(ss));
  return t;
}

inline void set_sample(Dataset& d, int i, const Tensor& t) {
  const size_t ss = d.sample_size();
  require(t.data.size() == ss, ErrKind::shape, "sample size mismatch");
  std::copy(t.data.begin(), t.data.end(),
            d.images.data.begin() + static_cast<int64_t>(i) * static_cast<int64_t>(ss));
}

struct PoisonResult {
  Dataset dataset;
  std::vector<int> poisoned_indices;  // sorted ascending
};

// Dirty-label poisoning: floor(ratio*N) seeded-chosen samples get the trigger
// and the target label. Everything else is copied through bit-identically.
inline PoisonResult poison_dataset(const Dataset& d, const PoisonSpec& spec) {
  require(spec.poison_ratio >= 0.0 && spec.poison_ratio <= 1.0, ErrKind::config,
          "poison ratio must lie in [0,1]");
  require(spec.target_label >= 0 && spec.target_label < d.classes, ErrKind::config,
          "target label " + std::to_string(spec.target_label) + " outside [0," +
              std::to_string(d.classes) + ")");
  const size_t count = static_cast<size_t>(std::floor(spec.poison_ratio * d.n() + 1e-9));

  std::vector<int> order(static_cast<size_t>(d.n()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> chosen(order.begin(), order.begin() + static_cast<int64_t>(count));
  std::sort(chosen.begin(), chosen.end());

  PoisonResult r;
  r.dataset = d;
  r.dataset.name = d.name + "/poisoned";
  r.dataset.provenance =
      d.provenance + " poisoned kind=" + trigger_kind_name(spec.trigger.kind) +
      " ratio=" + std::to_string(spec.poison_ratio) + " seed=" + std::to_string(spec.seed);
  for (int i : chosen) {
    set_sample(r.dataset, i, apply_trigger(sample_tensor(d, i), spec.trigger));
    r.dataset.labels[static_cast<size_t>(i)] = spec.target_label;
  }
  r.poisoned_indices = std::move(chosen);
  return r;
}

// Triggered copies of every test sample that is NOT originally of the target
// class; labels are set to the target for attack-success scoring and the true
// labels are preserved in original_labels.
inline Dataset build_asr_testset(const Dataset& test, const TriggerSpec& trigger,
                                 int target_label) {
  require(test.n() > 0, ErrKind::config, "cannot build a triggered set from an empty test set");
  require(target_label >= 0 && target_label < test.classes, ErrKind::config,
          "target label outside the label range");
  std::vector<int> keep;
  for (int i = 0; i < test.n(); ++i) {
    if (test.labels[static_cast<size_t>(i)] != target_label) keep.push_back(i);
  }
  require(!keep.empty(), ErrKind::config,
          "every test sample already has the target label; nothing to evaluate");

  Dataset out = take_indices(test, keep, "triggered");
  out.original_labels = out.labels;
  for (int i = 0; i < out.n(); ++i) {
    set_sample(out, i, apply_trigger(sample_tensor(out, i), trigger));
    out.labels[static_cast<size_t>(i)] = target_label;
  }
  return out;
}

}  // namespace backlab
