#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "backlab/arch_json.hpp"
#include "backlab/dataset.hpp"
#include "backlab/errors.hpp"
#include "backlab/mia.hpp"
#include "backlab/poison.hpp"
#include "backlab/reinjection.hpp"
#include "backlab/scenario.hpp"
#include "backlab/train.hpp"

namespace backlab {

// Experiment configuration: one JSON file describes one experiment — dataset,
// architecture, attack, one or more defense arms, and optional sequela
// measurements — expanded over a seed list. Parsing is strict: unknown keys
// are errors that name the offending field, so a typo cannot silently fall
// back to a default.

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  require(j.is_object(), ErrKind::config, where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    require(ok.count(key) != 0, ErrKind::config, where + ": unknown field '" + key + "'");
  }
}

inline const nlohmann::json& need(const nlohmann::json& j, const std::string& where,
                                  const char* key) {
  require(j.contains(key), ErrKind::config, where + ": missing required field '" + key + "'");
  return j[key];
}

inline double get_num(const nlohmann::json& j, const std::string& where, const char* key) {
  const nlohmann::json& v = need(j, where, key);
  require(v.is_number(), ErrKind::config, where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline double get_num_or(const nlohmann::json& j, const std::string& where, const char* key,
                         double fallback) {
  if (!j.contains(key)) return fallback;
  require(j[key].is_number(), ErrKind::config, where + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

inline int get_int(const nlohmann::json& j, const std::string& where, const char* key) {
  const nlohmann::json& v = need(j, where, key);
  require(v.is_number_integer(), ErrKind::config,
          where + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

inline int get_int_or(const nlohmann::json& j, const std::string& where, const char* key,
                      int fallback) {
  if (!j.contains(key)) return fallback;
  require(j[key].is_number_integer(), ErrKind::config,
          where + ": field '" + key + "' must be an integer");
  return j[key].get<int>();
}

inline uint64_t get_u64_or(const nlohmann::json& j, const std::string& where, const char* key,
                           uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  require(j[key].is_number_integer() && j[key].get<int64_t>() >= 0, ErrKind::config,
          where + ": field '" + key + "' must be a non-negative integer");
  return j[key].get<uint64_t>();
}

inline std::string get_str(const nlohmann::json& j, const std::string& where, const char* key) {
  const nlohmann::json& v = need(j, where, key);
  require(v.is_string(), ErrKind::config, where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

inline std::string get_str_or(const nlohmann::json& j, const std::string& where, const char* key,
                              const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  require(j[key].is_string(), ErrKind::config, where + ": field '" + key + "' must be a string");
  return j[key].get<std::string>();
}

inline void require_file(const std::string& path, const std::string& where) {
  require(std::filesystem::exists(path), ErrKind::config,
          where + ": referenced file '" + path + "' does not exist");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset sources
// ---------------------------------------------------------------------------

struct DatasetConfig {
  enum class Kind { synthetic, idx };
  Kind kind = Kind::synthetic;

  // synthetic
  int classes = 5;
  int per_class = 520;
  int image_size = 18;
  uint64_t seed = 42;
  SyntheticOptions options;

  // idx
  std::string train_images, train_labels, test_images, test_labels;

  // split of the (synthetic whole / idx training) pool into train + defender
  // (+ test, synthetic only: idx brings its own test file)
  std::vector<double> fractions;  // synthetic: 3 entries; idx: 2 entries
  uint64_t split_seed = 9;
};

namespace detail {

inline SyntheticOptions synthetic_options_from_json(const nlohmann::json& j,
                                                    const std::string& where) {
  check_keys(j, where,
             {"channels", "noise_sigma", "pattern_band_min", "pattern_band_max", "lo", "hi",
              "clip_lo", "clip_hi", "class_sep"});
  SyntheticOptions o;
  o.channels = get_int_or(j, where, "channels", o.channels);
  o.noise_sigma = get_num_or(j, where, "noise_sigma", o.noise_sigma);
  o.pattern_band_min = get_int_or(j, where, "pattern_band_min", o.pattern_band_min);
  o.pattern_band_max = get_int_or(j, where, "pattern_band_max", o.pattern_band_max);
  o.lo = get_num_or(j, where, "lo", o.lo);
  o.hi = get_num_or(j, where, "hi", o.hi);
  o.clip_lo = get_num_or(j, where, "clip_lo", o.clip_lo);
  o.clip_hi = get_num_or(j, where, "clip_hi", o.clip_hi);
  o.class_sep = get_num_or(j, where, "class_sep", o.class_sep);
  return o;
}

inline std::vector<double> fractions_from_json(const nlohmann::json& j, const std::string& where,
                                               size_t expected) {
  require(j.is_array() && j.size() == expected, ErrKind::config,
          where + ": 'fractions' must be an array of " + std::to_string(expected) + " numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    require(v.is_number(), ErrKind::config, where + ": fractions must be numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline DatasetConfig dataset_config_from_json(const nlohmann::json& j, const std::string& where,
                                              bool with_defender) {
  const std::string kind = detail::get_str(j, where, "kind");
  DatasetConfig d;
  if (kind == "synthetic") {
    detail::check_keys(j, where,
                       {"kind", "classes", "per_class", "image_size", "seed", "options", "split"});
    d.kind = DatasetConfig::Kind::synthetic;
    d.classes = detail::get_int(j, where, "classes");
    d.per_class = detail::get_int(j, where, "per_class");
    d.image_size = detail::get_int(j, where, "image_size");
    d.seed = detail::get_u64_or(j, where, "seed", 42);
    if (j.contains("options")) {
      d.options = detail::synthetic_options_from_json(j["options"], where + ".options");
    }
    const nlohmann::json& sj = detail::need(j, where, "split");
    detail::check_keys(sj, where + ".split", {"fractions", "seed"});
    d.fractions = detail::fractions_from_json(detail::need(sj, where + ".split", "fractions"),
                                              where + ".split", with_defender ? 3 : 2);
    d.split_seed = detail::get_u64_or(sj, where + ".split", "seed", 9);
  } else if (kind == "idx") {
    detail::check_keys(j, where,
                       {"kind", "train_images", "train_labels", "test_images", "test_labels",
                        "classes", "defender_fraction", "split_seed"});
    d.kind = DatasetConfig::Kind::idx;
    d.train_images = detail::get_str(j, where, "train_images");
    d.train_labels = detail::get_str(j, where, "train_labels");
    d.test_images = detail::get_str(j, where, "test_images");
    d.test_labels = detail::get_str(j, where, "test_labels");
    d.classes = detail::get_int(j, where, "classes");
    for (const std::string& p : {d.train_images, d.train_labels, d.test_images, d.test_labels}) {
      detail::require_file(p, where);
    }
    const double df = with_defender ? detail::get_num(j, where, "defender_fraction") : 0.0;
    if (with_defender) {
      require(df > 0.0 && df < 1.0, ErrKind::config,
              where + ": 'defender_fraction' must lie in (0,1)");
      d.fractions = {1.0 - df, df};
    }
    d.split_seed = detail::get_u64_or(j, where, "split_seed", 9);
  } else {
    fail(ErrKind::config, where + ": unknown dataset kind '" + kind + "' (synthetic or idx)");
  }
  return d;
}

// ---------------------------------------------------------------------------
// Attack / defense / sequela blocks
// ---------------------------------------------------------------------------

inline TriggerSpec trigger_from_json(const nlohmann::json& j, const std::string& where) {
  const std::string kind = detail::get_str(j, where, "kind");
  if (kind == "patch") {
    detail::check_keys(j, where, {"kind", "size", "row", "col", "value"});
    return TriggerSpec::patch(detail::get_int_or(j, where, "size", 3),
                              detail::get_int_or(j, where, "row", -1),
                              detail::get_int_or(j, where, "col", -1),
                              static_cast<float>(detail::get_num_or(j, where, "value", 1.0)));
  }
  if (kind == "blended") {
    detail::check_keys(j, where, {"kind", "alpha", "seed"});
    return TriggerSpec::blended(detail::get_num_or(j, where, "alpha", 0.2),
                                detail::get_u64_or(j, where, "seed", 7));
  }
  if (kind == "lowfreq") {
    detail::check_keys(j, where, {"kind", "bands", "amplitude"});
    return TriggerSpec::lowfreq(detail::get_int_or(j, where, "bands", 2),
                                detail::get_num_or(j, where, "amplitude", 0.15));
  }
  if (kind == "warp") {
    detail::check_keys(j, where, {"kind", "grid", "strength", "seed"});
    return TriggerSpec::warp(detail::get_int_or(j, where, "grid", 4),
                             detail::get_num_or(j, where, "strength", 0.5),
                             detail::get_u64_or(j, where, "seed", 11));
  }
  fail(ErrKind::config,
       where + ": unknown trigger kind '" + kind + "' (patch, blended, lowfreq, or warp)");
}

inline nlohmann::json trigger_to_json(const TriggerSpec& t) {
  nlohmann::json j;
  switch (t.kind) {
    case TriggerSpec::Kind::patch:
      j = {{"kind", "patch"}, {"size", t.patch_size}, {"row", t.patch_row},
           {"col", t.patch_col}, {"value", t.patch_value}};
      break;
    case TriggerSpec::Kind::blended:
      j = {{"kind", "blended"}, {"alpha", t.blend_alpha}, {"seed", t.blend_seed}};
      break;
    case TriggerSpec::Kind::lowfreq:
      j = {{"kind", "lowfreq"}, {"bands", t.lf_bands}, {"amplitude", t.lf_amplitude}};
      break;
    case TriggerSpec::Kind::warp:
      j = {{"kind", "warp"}, {"grid", t.warp_grid}, {"strength", t.warp_strength},
           {"seed", t.warp_seed}};
      break;
  }
  return j;
}

// Attack block: poisoning spec plus the pre-training recipe (constant lr).
struct AttackConfig {
  TriggerSpec trigger;
  int target_label = 0;
  double poison_ratio = 0.1;
  int epochs = 30;
  int batch_size = 64;
  double lr = 0.01;
  float momentum = 0.9f;
  float weight_decay = 0.0f;
};

inline AttackConfig attack_from_json(const nlohmann::json& j, const std::string& where) {
  detail::check_keys(j, where, {"trigger", "target_label", "poison_ratio", "train"});
  AttackConfig a;
  a.trigger = trigger_from_json(detail::need(j, where, "trigger"), where + ".trigger");
  a.target_label = detail::get_int(j, where, "target_label");
  a.poison_ratio = detail::get_num(j, where, "poison_ratio");
  const nlohmann::json& tj = detail::need(j, where, "train");
  const std::string tw = where + ".train";
  detail::check_keys(tj, tw, {"epochs", "batch_size", "lr", "momentum", "weight_decay"});
  a.epochs = detail::get_int(tj, tw, "epochs");
  a.batch_size = detail::get_int_or(tj, tw, "batch_size", 64);
  a.lr = detail::get_num(tj, tw, "lr");
  a.momentum = static_cast<float>(detail::get_num_or(tj, tw, "momentum", 0.9));
  a.weight_decay = static_cast<float>(detail::get_num_or(tj, tw, "weight_decay", 0.0));
  require(a.epochs >= 1, ErrKind::config, tw + ": 'epochs' must be at least 1");
  require(a.batch_size >= 1, ErrKind::config, tw + ": 'batch_size' must be at least 1");
  require(a.lr > 0.0, ErrKind::config, tw + ": 'lr' must be positive");
  return a;
}

struct DefenseArm {
  std::string name;  // directory-friendly tag; defaults to the kind
  DefenseSpec spec;  // seed is filled per run as run_seed + seed_offset
  uint64_t seed_offset = 50;
};

inline DefenseArm defense_arm_from_json(const nlohmann::json& j, const std::string& where) {
  const std::string kind_s = detail::get_str(j, where, "kind");
  DefenseArm arm;
  arm.spec.kind = parse_defense_kind(kind_s);
  arm.name = detail::get_str_or(j, where, "name", kind_s);
  for (char c : arm.name) {
    require((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                c == '-' || c == '_',
            ErrKind::config, where + ": arm name '" + arm.name + "' must be [A-Za-z0-9_-]");
  }
  switch (arm.spec.kind) {
    case DefenseSpec::Kind::none:
      detail::check_keys(j, where, {"kind", "name"});
      return arm;
    case DefenseSpec::Kind::conventional_ft:
      detail::check_keys(j, where,
                         {"kind", "name", "epochs", "batch_size", "lr", "momentum",
                          "weight_decay", "seed_offset"});
      arm.spec.lr = detail::get_num(j, where, "lr");
      arm.spec.momentum = static_cast<float>(detail::get_num_or(j, where, "momentum", 0.9));
      break;
    case DefenseSpec::Kind::super_ft: {
      detail::check_keys(j, where,
                         {"kind", "name", "epochs", "batch_size", "momentum", "weight_decay",
                          "schedule", "seed_offset"});
      const nlohmann::json& sj = detail::need(j, where, "schedule");
      const std::string sw = where + ".schedule";
      detail::check_keys(sj, sw,
                         {"lr_base", "lr_max1", "lr_max2", "cycle_len_steps", "phase1_epochs"});
      arm.spec.schedule = ScheduleSpec::superft(
          detail::get_num_or(sj, sw, "lr_base", 3e-4), detail::get_num_or(sj, sw, "lr_max1", 0.1),
          detail::get_num_or(sj, sw, "lr_max2", 1e-3),
          detail::get_int_or(sj, sw, "cycle_len_steps", 24),
          detail::get_int_or(sj, sw, "phase1_epochs", 4));
      validate_schedule(arm.spec.schedule);
      arm.spec.momentum = static_cast<float>(detail::get_num_or(j, where, "momentum", 0.0));
      break;
    }
    case DefenseSpec::Kind::fine_prune:
      detail::check_keys(j, where,
                         {"kind", "name", "epochs", "batch_size", "lr", "momentum",
                          "weight_decay", "prune_fraction", "seed_offset"});
      arm.spec.lr = detail::get_num(j, where, "lr");
      arm.spec.momentum = static_cast<float>(detail::get_num_or(j, where, "momentum", 0.9));
      arm.spec.prune_fraction = detail::get_num_or(j, where, "prune_fraction", 0.05);
      require(arm.spec.prune_fraction < 1.0, ErrKind::config,
              where + ": 'prune_fraction' must be below 1 (negative selects automatic search)");
      break;
  }
  arm.spec.epochs = detail::get_int(j, where, "epochs");
  arm.spec.batch_size = detail::get_int_or(j, where, "batch_size", 64);
  arm.spec.weight_decay = static_cast<float>(detail::get_num_or(j, where, "weight_decay", 0.0));
  arm.seed_offset = detail::get_u64_or(j, where, "seed_offset", 50);
  require(arm.spec.epochs >= 1, ErrKind::config, where + ": 'epochs' must be at least 1");
  require(arm.spec.batch_size >= 1, ErrKind::config, where + ": 'batch_size' must be at least 1");
  return arm;
}

struct MiaOptions {
  bool enabled = false;
  MiaConfig config;        // seed filled per run as run_seed + seed_offset
  int member_count = 0;    // 0 means "match the test-set size"
  uint64_t member_seed = 34;
  uint64_t seed_offset = 90;
};

struct ReinjectionOptions {
  bool enabled = false;
  std::vector<double> ratios = {0.1, 0.01, 0.001, 0.0001};
  int max_epochs = 20;
  double threshold = 0.9;
};

// ---------------------------------------------------------------------------
// Top-level config
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  Scenario scenario = Scenario::standalone;
  std::string output_dir;
  std::vector<uint64_t> seeds;

  DatasetConfig dataset;
  bool has_target_dataset = false;
  DatasetConfig target_dataset;  // transfer only
  int transfer_classes = 0;
  uint64_t transfer_head_seed = 1;

  bool use_reference_arch = true;
  ArchSpec arch;  // valid when !use_reference_arch

  AttackConfig attack;
  std::vector<DefenseArm> defenses;
  bool per_epoch_metrics = true;

  MiaOptions mia;
  ReinjectionOptions reinjection;

  std::string raw_json;  // exact file bytes; the experiment digest covers these
};

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                                    const std::string& raw) {
  const std::string where = "config";
  detail::check_keys(j, where,
                     {"scenario", "output_dir", "seeds", "dataset", "target_dataset", "transfer",
                      "arch", "attack", "defense", "eval", "sequela"});
  ExperimentConfig c;
  c.raw_json = raw;
  c.scenario = parse_scenario(detail::get_str(j, where, "scenario"));
  c.output_dir = detail::get_str(j, where, "output_dir");
  require(!c.output_dir.empty(), ErrKind::config, "config: 'output_dir' must not be empty");

  const nlohmann::json& seeds = detail::need(j, where, "seeds");
  require(seeds.is_array() && !seeds.empty(), ErrKind::config,
          "config: 'seeds' must be a non-empty array of integers");
  for (const auto& s : seeds) {
    require(s.is_number_integer() && s.get<int64_t>() >= 0, ErrKind::config,
            "config: seeds must be non-negative integers");
    c.seeds.push_back(s.get<uint64_t>());
  }

  c.dataset = dataset_config_from_json(detail::need(j, where, "dataset"), "config.dataset",
                                       /*with_defender=*/true);

  if (c.scenario == Scenario::transfer) {
    require(j.contains("target_dataset"), ErrKind::config,
            "config: transfer scenario needs 'target_dataset'");
    c.has_target_dataset = true;
    c.target_dataset = dataset_config_from_json(j["target_dataset"], "config.target_dataset",
                                                /*with_defender=*/false);
    const nlohmann::json& tj = detail::need(j, where, "transfer");
    detail::check_keys(tj, "config.transfer", {"classes", "head_seed"});
    c.transfer_classes = detail::get_int(tj, "config.transfer", "classes");
    c.transfer_head_seed = detail::get_u64_or(tj, "config.transfer", "head_seed", 1);
    require(c.transfer_classes >= 2, ErrKind::config,
            "config.transfer: 'classes' must be at least 2");
  } else {
    require(!j.contains("target_dataset") && !j.contains("transfer"), ErrKind::config,
            "config: 'target_dataset'/'transfer' only apply to the transfer scenario");
  }

  if (j.contains("arch")) {
    const nlohmann::json& aj = j["arch"];
    if (aj.is_string()) {
      require(aj.get<std::string>() == "reference", ErrKind::config,
              "config: 'arch' must be \"reference\" or an arch descriptor object");
      c.use_reference_arch = true;
    } else {
      c.use_reference_arch = false;
      c.arch = arch_from_json(aj);
    }
  }

  c.attack = attack_from_json(detail::need(j, where, "attack"), "config.attack");

  const nlohmann::json& dj = detail::need(j, where, "defense");
  if (dj.is_array()) {
    require(!dj.empty(), ErrKind::config, "config: 'defense' list must not be empty");
    for (size_t i = 0; i < dj.size(); ++i) {
      c.defenses.push_back(
          defense_arm_from_json(dj[i], "config.defense[" + std::to_string(i) + "]"));
    }
  } else {
    c.defenses.push_back(defense_arm_from_json(dj, "config.defense"));
  }
  std::set<std::string> arm_names;
  for (const DefenseArm& arm : c.defenses) {
    require(arm_names.insert(arm.name).second, ErrKind::config,
            "config.defense: duplicate arm name '" + arm.name + "'");
  }

  if (j.contains("eval")) {
    detail::check_keys(j["eval"], "config.eval", {"per_epoch_metrics"});
    if (j["eval"].contains("per_epoch_metrics")) {
      require(j["eval"]["per_epoch_metrics"].is_boolean(), ErrKind::config,
              "config.eval: 'per_epoch_metrics' must be a boolean");
      c.per_epoch_metrics = j["eval"]["per_epoch_metrics"].get<bool>();
    }
  }

  if (j.contains("sequela")) {
    const nlohmann::json& sq = j["sequela"];
    detail::check_keys(sq, "config.sequela", {"mia", "reinjection"});
    if (sq.contains("mia")) {
      const nlohmann::json& mj = sq["mia"];
      const std::string mw = "config.sequela.mia";
      detail::check_keys(mj, mw,
                         {"hidden", "epochs", "lr", "batch_size", "momentum", "member_count",
                          "member_seed", "seed_offset"});
      c.mia.enabled = true;
      if (mj.contains("hidden")) {
        const nlohmann::json& h = mj["hidden"];
        require(h.is_array() && h.size() == 2 && h[0].is_number_integer() &&
                    h[1].is_number_integer(),
                ErrKind::config, mw + ": 'hidden' must be [h1, h2]");
        c.mia.config.hidden1 = h[0].get<int>();
        c.mia.config.hidden2 = h[1].get<int>();
      }
      c.mia.config.epochs = detail::get_int_or(mj, mw, "epochs", c.mia.config.epochs);
      c.mia.config.lr = detail::get_num_or(mj, mw, "lr", c.mia.config.lr);
      c.mia.config.batch_size = detail::get_int_or(mj, mw, "batch_size", c.mia.config.batch_size);
      c.mia.config.momentum =
          static_cast<float>(detail::get_num_or(mj, mw, "momentum", c.mia.config.momentum));
      c.mia.member_count = detail::get_int_or(mj, mw, "member_count", 0);
      c.mia.member_seed = detail::get_u64_or(mj, mw, "member_seed", 34);
      c.mia.seed_offset = detail::get_u64_or(mj, mw, "seed_offset", 90);
      validate_mia_config(c.mia.config);
    }
    if (sq.contains("reinjection")) {
      const nlohmann::json& rj = sq["reinjection"];
      const std::string rw = "config.sequela.reinjection";
      detail::check_keys(rj, rw, {"ratios", "max_epochs", "threshold"});
      c.reinjection.enabled = true;
      if (rj.contains("ratios")) {
        require(rj["ratios"].is_array() && !rj["ratios"].empty(), ErrKind::config,
                rw + ": 'ratios' must be a non-empty array");
        c.reinjection.ratios.clear();
        for (const auto& v : rj["ratios"]) {
          require(v.is_number(), ErrKind::config, rw + ": ratios must be numbers");
          c.reinjection.ratios.push_back(v.get<double>());
        }
      }
      c.reinjection.max_epochs = detail::get_int_or(rj, rw, "max_epochs", 20);
      c.reinjection.threshold = detail::get_num_or(rj, rw, "threshold", 0.9);
      ReinjectionSpec probe;
      probe.ratios = c.reinjection.ratios;
      probe.max_epochs = c.reinjection.max_epochs;
      probe.threshold = c.reinjection.threshold;
      validate_reinjection_spec(probe);
    }
  }

  // Cross-field checks that don't need the data loaded yet.
  require(c.attack.poison_ratio >= 0.0 && c.attack.poison_ratio <= 1.0, ErrKind::config,
          "config.attack: 'poison_ratio' must lie in [0,1]");
  require(c.attack.target_label >= 0, ErrKind::config,
          "config.attack: 'target_label' must be non-negative");
  if (c.dataset.kind == DatasetConfig::Kind::synthetic) {
    require(c.attack.target_label < c.dataset.classes, ErrKind::config,
            "config.attack: 'target_label' outside the dataset's class range");
    if (c.attack.trigger.kind == TriggerSpec::Kind::patch) {
      require(c.attack.trigger.patch_size <= c.dataset.image_size, ErrKind::config,
              "config.attack: patch trigger larger than the image");
    }
  }
  if (c.scenario == Scenario::transfer) {
    require(c.attack.target_label < c.transfer_classes, ErrKind::config,
            "config.attack: 'target_label' outside the downstream class range");
  }
  return c;
}

inline ExperimentConfig parse_experiment_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open config '" + path + "'");
  std::ostringstream raw;
  raw << f.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrKind::config, "config '" + path + "': " + e.what());
  }
  return experiment_config_from_json(j, raw.str());
}

}  // namespace backlab
