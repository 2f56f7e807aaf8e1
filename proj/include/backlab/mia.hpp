#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/eval.hpp"
#include "backlab/model.hpp"
#include "backlab/train.hpp"

namespace backlab {

// Black-box membership inference: an attack network reads the target model's
// posterior vector for a sample and guesses whether that sample was in the
// target's training set. Features are the full softmax posterior sorted
// descending, which strips class identity and keeps only confidence shape.

struct MiaConfig {
  int hidden1 = 64;
  int hidden2 = 32;
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 32;
  float momentum = 0.9f;
  uint64_t seed = 0;
};

inline void validate_mia_config(const MiaConfig& cfg) {
  require(cfg.hidden1 >= 1 && cfg.hidden2 >= 1, ErrKind::config,
          "attack-model hidden sizes must be at least 1");
  require(cfg.epochs >= 1, ErrKind::config, "attack-model training needs at least one epoch");
  require(cfg.lr > 0.0, ErrKind::config, "attack-model learning rate must be positive");
}

// Softmax posterior of every sample, each row sorted descending. Row-major
// n x classes.
inline std::vector<float> sorted_posteriors(const Model& m, const Dataset& d, int chunk = 256) {
  require(d.n() > 0, ErrKind::config, "cannot compute posteriors of an empty dataset");
  const int k = m.arch.classes;
  std::vector<float> out;
  out.reserve(static_cast<size_t>(d.n()) * static_cast<size_t>(k));
  std::vector<int> idx;
  for (int start = 0; start < d.n(); start += chunk) {
    const int stop = std::min(start + chunk, d.n());
    idx.resize(static_cast<size_t>(stop - start));
    for (int i = start; i < stop; ++i) idx[static_cast<size_t>(i - start)] = i;
    const std::vector<float> logits = forward(m, make_batch(d, idx));
    for (int i = 0; i < stop - start; ++i) {
      const float* row = logits.data() + static_cast<int64_t>(i) * k;
      float mx = row[0];
      for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
      double denom = 0.0;
      std::vector<double> e(static_cast<size_t>(k));
      for (int j = 0; j < k; ++j) {
        e[static_cast<size_t>(j)] = std::exp(static_cast<double>(row[j]) - mx);
        denom += e[static_cast<size_t>(j)];
      }
      std::vector<float> p(static_cast<size_t>(k));
      for (int j = 0; j < k; ++j) {
        p[static_cast<size_t>(j)] = static_cast<float>(e[static_cast<size_t>(j)] / denom);
      }
      std::sort(p.begin(), p.end(), std::greater<float>());
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

// Attack-train and attack-eval sets, disjoint in both pools and balanced
// exactly. Features masquerade as (n,1,1,k) images so the ordinary training
// loop drives the attack model; posteriors already live in [0,1].
struct MiaPairs {
  int feature_dim = 0;
  Dataset attack_train;
  Dataset attack_eval;
};

namespace detail {

inline void push_feature_row(Dataset& d, const std::vector<float>& feats, int k, int row,
                             int label) {
  d.images.data.insert(d.images.data.end(),
                       feats.begin() + static_cast<int64_t>(row) * k,
                       feats.begin() + static_cast<int64_t>(row + 1) * k);
  d.labels.push_back(label);
}

}  // namespace detail

// Builds the pairs from precomputed feature matrices (row-major, k wide).
// Members carry label 1, non-members label 0. Each pool is shuffled with
// `seed`, then split in half: first half trains the attack model, second half
// evaluates it. Odd trailing samples are dropped from both pools so the two
// splits stay exactly balanced.
inline MiaPairs mia_pairs_from_features(const std::vector<float>& member_feats,
                                        const std::vector<float>& nonmember_feats, int k,
                                        uint64_t seed) {
  require(k >= 2, ErrKind::config, "posterior features need at least 2 classes");
  require(member_feats.size() % static_cast<size_t>(k) == 0 &&
              nonmember_feats.size() % static_cast<size_t>(k) == 0,
          ErrKind::shape, "feature matrix size is not a multiple of the feature width");
  const int nm = static_cast<int>(member_feats.size() / static_cast<size_t>(k));
  const int nn = static_cast<int>(nonmember_feats.size() / static_cast<size_t>(k));
  require(nm == nn, ErrKind::config,
          "member and non-member pools must be balanced (got " + std::to_string(nm) + " vs " +
              std::to_string(nn) + ")");
  const int half = nm / 2;
  require(half >= 1, ErrKind::config, "pools too small to split into train and eval halves");

  std::mt19937_64 rng(seed);
  std::vector<int> morder(static_cast<size_t>(nm)), norder(static_cast<size_t>(nn));
  std::iota(morder.begin(), morder.end(), 0);
  std::iota(norder.begin(), norder.end(), 0);
  std::shuffle(morder.begin(), morder.end(), rng);
  std::shuffle(norder.begin(), norder.end(), rng);

  MiaPairs pairs;
  pairs.feature_dim = k;
  for (Dataset* d : {&pairs.attack_train, &pairs.attack_eval}) {
    d->classes = 2;
    d->images.shape = {0, 1, 1, k};
  }
  pairs.attack_train.name = "mia-attack-train";
  pairs.attack_eval.name = "mia-attack-eval";
  for (int i = 0; i < half; ++i) {
    detail::push_feature_row(pairs.attack_train, member_feats, k, morder[static_cast<size_t>(i)], 1);
    detail::push_feature_row(pairs.attack_train, nonmember_feats, k, norder[static_cast<size_t>(i)], 0);
    detail::push_feature_row(pairs.attack_eval, member_feats, k,
                             morder[static_cast<size_t>(half + i)], 1);
    detail::push_feature_row(pairs.attack_eval, nonmember_feats, k,
                             norder[static_cast<size_t>(half + i)], 0);
  }
  pairs.attack_train.images.shape[0] = 2 * half;
  pairs.attack_eval.images.shape[0] = 2 * half;
  return pairs;
}

// Queries the target model over both pools and assembles the attack datasets.
// Members must come from the target's training data and non-members from data
// it never saw; the pools must arrive balanced.
inline MiaPairs build_mia_dataset(const Model& target, const Dataset& members,
                                  const Dataset& nonmembers, uint64_t seed = 0) {
  require(members.n() == nonmembers.n(), ErrKind::config,
          "member and non-member pools must be balanced (got " + std::to_string(members.n()) +
              " vs " + std::to_string(nonmembers.n()) + ")");
  const std::vector<float> mf = sorted_posteriors(target, members);
  const std::vector<float> nf = sorted_posteriors(target, nonmembers);
  return mia_pairs_from_features(mf, nf, target.arch.classes, seed);
}

// Three-layer feedforward binary classifier over the sorted posteriors.
inline ArchSpec mia_arch(int feature_dim, const MiaConfig& cfg) {
  ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = feature_dim;
  arch.classes = 2;
  arch.layers = {LayerSpec::flatten(), LayerSpec::dense(cfg.hidden1), LayerSpec::relu(),
                 LayerSpec::dense(cfg.hidden2), LayerSpec::relu(), LayerSpec::dense(2)};
  return arch;
}

inline Model train_mia(const MiaPairs& pairs, const MiaConfig& cfg) {
  validate_mia_config(cfg);
  require(pairs.attack_train.n() > 0, ErrKind::config, "attack-train split is empty");
  Model attack = init_model(mia_arch(pairs.feature_dim, cfg), cfg.seed);
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.schedule = ScheduleSpec::constant_lr(cfg.lr);
  tc.momentum = cfg.momentum;
  tc.seed = cfg.seed;
  train(attack, pairs.attack_train, tc);
  return attack;
}

// Fraction of the balanced eval split labeled correctly.
inline double mia_accuracy(const Model& attack, const Dataset& eval_pairs) {
  require(eval_pairs.n() > 0, ErrKind::config, "attack-eval split is empty");
  int members = 0;
  for (int y : eval_pairs.labels) members += y;
  require(2 * members == eval_pairs.n(), ErrKind::config,
          "attack-eval split must be exactly balanced");
  return clean_accuracy(attack, eval_pairs);
}

struct MiaReport {
  double accuracy = 0.0;
  std::string target_tag;  // e.g. "backdoored" or "defended-by-super_ft"
};

inline MiaReport run_mia(const Model& target, const Dataset& members, const Dataset& nonmembers,
                         const MiaConfig& cfg, const std::string& target_tag) {
  const MiaPairs pairs = build_mia_dataset(target, members, nonmembers, cfg.seed);
  const Model attack = train_mia(pairs, cfg);
  MiaReport r;
  r.accuracy = mia_accuracy(attack, pairs.attack_eval);
  r.target_tag = target_tag;
  return r;
}

}  // namespace backlab
