#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/eval.hpp"
#include "backlab/model.hpp"
#include "backlab/poison.hpp"
#include "backlab/schedule.hpp"
#include "backlab/trainlog.hpp"

namespace backlab {

struct TrainConfig {
  enum class Policy { whole_model, head_only };

  int epochs = 1;
  int batch_size = 64;
  ScheduleSpec schedule = ScheduleSpec::constant_lr(0.01);
  float momentum = 0.9f;
  // L2 decay folded into the gradient, torch-style. This is the only force
  // that reaches units the fine-tuning data never activates, which is exactly
  // where a trigger detector hides from clean-data gradients.
  float weight_decay = 0.0f;
  uint64_t seed = 0;
  Policy policy = Policy::whole_model;
};

// Optional metric sets scored into the log at every epoch boundary.
struct EvalHooks {
  const Dataset* ca_set = nullptr;
  const Dataset* asr_set = nullptr;
  int asr_target = -1;
};

// Invoked after every optimizer step; fine-pruning uses this to pin pruned
// channels at zero with finer granularity than the per-tensor mask allows.
using StepProjection = std::function<void(Model&)>;

inline void apply_policy(Model& m, TrainConfig::Policy policy) {
  if (policy == TrainConfig::Policy::whole_model) {
    std::fill(m.trainable.begin(), m.trainable.end(), uint8_t{1});
    return;
  }
  require(!m.arch.layers.empty() && m.arch.layers.back().kind == LayerSpec::Kind::dense,
          ErrKind::unsupported, "head_only policy requires a trailing dense layer");
  std::fill(m.trainable.begin(), m.trainable.end(), uint8_t{0});
  m.trainable[m.trainable.size() - 2] = 1;
  m.trainable[m.trainable.size() - 1] = 1;
}

// Core SGD loop: per-epoch seeded shuffle, learning rate from the schedule at
// each global step, per-epoch metric hooks. The model is updated in place.
inline TrainLog train(Model& model, const Dataset& data, const TrainConfig& cfg,
                      const EvalHooks& hooks = {}, const StepProjection& project = {}) {
  require(cfg.epochs >= 1, ErrKind::config, "training needs at least one epoch");
  require(cfg.batch_size >= 1, ErrKind::config, "batch size must be positive");
  require(data.n() > 0, ErrKind::config, "cannot train on an empty dataset");
  require(data.classes == model.arch.classes, ErrKind::config,
          "dataset has " + std::to_string(data.classes) + " classes but the model head has " +
              std::to_string(model.arch.classes));
  validate_schedule(cfg.schedule);
  if (hooks.asr_set) {
    require(hooks.asr_target >= 0, ErrKind::config, "asr hook needs a target label");
  }

  apply_policy(model, cfg.policy);
  if (project) project(model);

  const int n = data.n();
  const int64_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  int64_t global_step = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(start + cfg.batch_size, n);
      const std::vector<int> idx(order.begin() + start, order.begin() + stop);
      const Batch batch = make_batch(data, idx);
      const BackwardResult bw = backward(model, batch);
      require(std::isfinite(bw.loss), ErrKind::divergence,
              "training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                  ", step " + std::to_string(global_step));
      const double lr = lr_at(cfg.schedule, global_step, steps_per_epoch);
      log.max_lr_seen = std::max(log.max_lr_seen, lr);
      sgd_step(model, bw.grads, static_cast<float>(lr), cfg.momentum, cfg.weight_decay);
      if (project) project(model);
      loss_sum += static_cast<double>(bw.loss) * (stop - start);
      ++global_step;
    }
    EpochRow row;
    row.epoch = epoch;
    row.loss = loss_sum / n;
    row.steps = global_step;
    if (hooks.ca_set) row.ca = clean_accuracy(model, *hooks.ca_set);
    if (hooks.asr_set) row.asr = attack_success_rate(model, *hooks.asr_set, hooks.asr_target);
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.rows.push_back(row);
  }
  return log;
}

struct AttackResult {
  Model model;
  TrainLog log;
  Dataset poisoned_train;
  std::vector<int> poisoned_indices;
};

// Poison the training set, then train a fresh model on it.
inline AttackResult train_backdoored(const ArchSpec& arch, const Dataset& clean_train,
                                     const PoisonSpec& poison, const TrainConfig& cfg,
                                     const EvalHooks& hooks = {}) {
  PoisonResult pr = poison_dataset(clean_train, poison);
  AttackResult out;
  out.model = init_model(arch, cfg.seed);
  out.log = train(out.model, pr.dataset, cfg, hooks);
  out.poisoned_train = std::move(pr.dataset);
  out.poisoned_indices = std::move(pr.poisoned_indices);
  return out;
}

inline TrainLog fine_tune(Model& model, const Dataset& clean, const TrainConfig& cfg,
                          const EvalHooks& hooks = {}, const StepProjection& project = {}) {
  return train(model, clean, cfg, hooks, project);
}

// Whole-model fine-tuning under the two-phase cyclic schedule. The observed
// learning rates are asserted against the schedule's declared ceiling.
inline TrainLog super_fine_tune(Model& model, const Dataset& clean, const ScheduleSpec& sft,
                                int epochs, uint64_t seed, int batch_size = 64,
                                const EvalHooks& hooks = {}, float momentum = 0.0f,
                                float weight_decay = 0.0f) {
  require(sft.kind == ScheduleSpec::Kind::superft, ErrKind::config,
          "super_fine_tune needs a superft schedule");
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.schedule = sft;
  cfg.momentum = momentum;
  cfg.weight_decay = weight_decay;
  cfg.seed = seed;
  cfg.policy = TrainConfig::Policy::whole_model;
  TrainLog log = train(model, clean, cfg, hooks);
  require(log.max_lr_seen <= sft.lr_max1 + 1e-12, ErrKind::numeric,
          "schedule produced a learning rate above its declared ceiling");
  return log;
}

// ---------------------------------------------------------------------------
// Fine-pruning: rank conv channels by mean activation magnitude over clean
// data, zero the weakest fraction, keep them pinned at zero while running a
// conventional fine-tune.
// ---------------------------------------------------------------------------

struct ConvChannel {
  size_t weight_tensor = 0;  // index into model.params of the conv W
  int layer = 0;
  int channel = 0;
  double mean_activation = 0.0;
};

inline std::vector<ConvChannel> conv_channel_activations(const Model& m, const Dataset& clean,
                                                         int chunk = 256) {
  const auto shapes = chain_shapes(m.arch);
  // Parameter tensor index per layer, walking the declaration order.
  std::vector<size_t> pidx(m.arch.layers.size(), 0);
  size_t p = 0;
  for (size_t i = 0; i < m.arch.layers.size(); ++i) {
    pidx[i] = p;
    const auto kind = m.arch.layers[i].kind;
    if (kind == LayerSpec::Kind::conv || kind == LayerSpec::Kind::dense) p += 2;
  }

  std::vector<ConvChannel> channels;
  std::vector<std::vector<double>> sums;
  for (size_t i = 0; i < m.arch.layers.size(); ++i) {
    if (m.arch.layers[i].kind == LayerSpec::Kind::conv) {
      sums.push_back(std::vector<double>(static_cast<size_t>(shapes[i + 1].c), 0.0));
    }
  }

  std::vector<int> idx;
  int64_t seen = 0;
  for (int start = 0; start < clean.n(); start += chunk) {
    const int stop = std::min(start + chunk, clean.n());
    idx.resize(static_cast<size_t>(stop - start));
    for (int i = start; i < stop; ++i) idx[static_cast<size_t>(i - start)] = i;
    const Batch batch = make_batch(clean, idx);
    std::vector<float> input(batch.images.data.begin(), batch.images.data.end());
    auto cache = detail::forward_pass<float>(m.arch, m.params, input, batch.n());
    size_t conv_slot = 0;
    for (size_t i = 0; i < m.arch.layers.size(); ++i) {
      if (m.arch.layers[i].kind != LayerSpec::Kind::conv) continue;
      const ActShape& so = shapes[i + 1];
      const std::vector<float>& act = cache.acts[i + 1];
      const int64_t plane = static_cast<int64_t>(so.h) * so.w;
      for (int b = 0; b < batch.n(); ++b) {
        for (int c = 0; c < so.c; ++c) {
          const float* base = act.data() + (static_cast<int64_t>(b) * so.c + c) * plane;
          double s = 0.0;
          for (int64_t j = 0; j < plane; ++j) s += std::abs(static_cast<double>(base[j]));
          sums[conv_slot][static_cast<size_t>(c)] += s / static_cast<double>(plane);
        }
      }
      ++conv_slot;
    }
    seen += batch.n();
  }

  size_t conv_slot = 0;
  for (size_t i = 0; i < m.arch.layers.size(); ++i) {
    if (m.arch.layers[i].kind != LayerSpec::Kind::conv) continue;
    for (size_t c = 0; c < sums[conv_slot].size(); ++c) {
      ConvChannel ch;
      ch.weight_tensor = pidx[i];
      ch.layer = static_cast<int>(i);
      ch.channel = static_cast<int>(c);
      ch.mean_activation = seen > 0 ? sums[conv_slot][c] / static_cast<double>(seen) : 0.0;
      channels.push_back(ch);
    }
    ++conv_slot;
  }
  return channels;
}

namespace detail {

// Zeroes conv channel `ch` of the W/b pair starting at tensor `wi`, along
// with its momentum.
inline void zero_conv_channel(Model& m, size_t wi, int ch) {
  std::vector<float>& w = m.params[wi];
  std::vector<float>& b = m.params[wi + 1];
  const size_t per_channel = w.size() / b.size();
  std::fill(w.begin() + static_cast<int64_t>(per_channel) * ch,
            w.begin() + static_cast<int64_t>(per_channel) * (ch + 1), 0.0f);
  b[static_cast<size_t>(ch)] = 0.0f;
  std::fill(m.momentum[wi].begin() + static_cast<int64_t>(per_channel) * ch,
            m.momentum[wi].begin() + static_cast<int64_t>(per_channel) * (ch + 1), 0.0f);
  m.momentum[wi + 1][static_cast<size_t>(ch)] = 0.0f;
}

}  // namespace detail

struct PruneOutcome {
  std::vector<ConvChannel> pruned;
  TrainLog log;
};

inline PruneOutcome fine_prune(Model& model, const Dataset& clean, double prune_fraction,
                               const TrainConfig& ft_cfg, const EvalHooks& hooks = {}) {
  require(prune_fraction >= 0.0 && prune_fraction < 1.0, ErrKind::config,
          "prune fraction must lie in [0,1)");
  std::vector<ConvChannel> ranked = conv_channel_activations(model, clean);
  std::sort(ranked.begin(), ranked.end(), [](const ConvChannel& a, const ConvChannel& b) {
    if (a.mean_activation != b.mean_activation) return a.mean_activation < b.mean_activation;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.channel < b.channel;
  });
  const size_t count = static_cast<size_t>(std::floor(prune_fraction * ranked.size() + 1e-9));
  std::vector<ConvChannel> pruned(ranked.begin(), ranked.begin() + static_cast<int64_t>(count));

  // A layer losing every channel would sever the forward path.
  std::vector<int> total_per_layer(model.arch.layers.size(), 0);
  std::vector<int> pruned_per_layer(model.arch.layers.size(), 0);
  for (const ConvChannel& ch : ranked) ++total_per_layer[static_cast<size_t>(ch.layer)];
  for (const ConvChannel& ch : pruned) ++pruned_per_layer[static_cast<size_t>(ch.layer)];
  for (size_t i = 0; i < total_per_layer.size(); ++i) {
    require(total_per_layer[i] == 0 || pruned_per_layer[i] < total_per_layer[i],
            ErrKind::config,
            "prune fraction would remove every channel of layer " + std::to_string(i));
  }

  for (const ConvChannel& ch : pruned) detail::zero_conv_channel(model, ch.weight_tensor, ch.channel);
  StepProjection project;
  if (!pruned.empty()) {
    project = [pruned](Model& m) {
      for (const ConvChannel& ch : pruned) detail::zero_conv_channel(m, ch.weight_tensor, ch.channel);
    };
  }

  PruneOutcome out;
  out.pruned = std::move(pruned);
  out.log = fine_tune(model, clean, ft_cfg, hooks, project);
  return out;
}

// Steps the prune fraction upward until pruning alone costs more than
// max_ca_drop of clean accuracy, then runs fine_prune at the last fraction
// that stayed within budget.
inline PruneOutcome fine_prune_auto(Model& model, const Dataset& clean, const Dataset& test,
                                    const TrainConfig& ft_cfg, const EvalHooks& hooks = {},
                                    double step = 0.05, double cap = 0.3,
                                    double max_ca_drop = 0.02) {
  const double base_ca = clean_accuracy(model, test);
  double chosen = 0.0;
  for (double f = step; f <= cap + 1e-9; f += step) {
    Model probe = model;
    std::vector<ConvChannel> ranked = conv_channel_activations(probe, clean);
    std::sort(ranked.begin(), ranked.end(), [](const ConvChannel& a, const ConvChannel& b) {
      if (a.mean_activation != b.mean_activation) return a.mean_activation < b.mean_activation;
      if (a.layer != b.layer) return a.layer < b.layer;
      return a.channel < b.channel;
    });
    const size_t count = static_cast<size_t>(std::floor(f * ranked.size() + 1e-9));
    bool overprunes = false;
    std::vector<int> total(probe.arch.layers.size(), 0), cut(probe.arch.layers.size(), 0);
    for (const ConvChannel& ch : ranked) ++total[static_cast<size_t>(ch.layer)];
    for (size_t i = 0; i < count; ++i) ++cut[static_cast<size_t>(ranked[i].layer)];
    for (size_t i = 0; i < total.size(); ++i) {
      if (total[i] > 0 && cut[i] >= total[i]) overprunes = true;
    }
    if (overprunes) break;
    for (size_t i = 0; i < count; ++i) {
      detail::zero_conv_channel(probe, ranked[i].weight_tensor, ranked[i].channel);
    }
    if (base_ca - clean_accuracy(probe, test) > max_ca_drop) break;
    chosen = f;
  }
  return fine_prune(model, clean, chosen, ft_cfg, hooks);
}

}  // namespace backlab
