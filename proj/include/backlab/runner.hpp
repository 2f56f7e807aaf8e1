#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "backlab/arch_json.hpp"
#include "backlab/config.hpp"
#include "backlab/csv.hpp"
#include "backlab/digest.hpp"
#include "backlab/errors.hpp"
#include "backlab/mia.hpp"
#include "backlab/model_io.hpp"
#include "backlab/reinjection.hpp"
#include "backlab/scenario.hpp"
#include "backlab/svg.hpp"

namespace backlab {

// Orchestration: expands one ExperimentConfig over its seed list and defense
// arms, writes every result under <output_dir>/<config-digest>/, and keeps a
// manifest.json so report generation and re-runs can reason about what is
// there. The attack phase only depends on the seed, so each seed trains its
// backdoored model once and fans the defense arms out from a frozen copy.
//
// Layout of one results directory:
//   manifest.json                       status, digest, file index
//   models/backdoored-s<seed>.bfm       attack-stage model
//   models/<arm>-s<seed>.bfm            defended model
//   logs/attack-s<seed>.csv             attack training log
//   logs/<arm>-s<seed>.csv              defense training log
//   logs/<arm>-s<seed>-head.csv         encoder_sim head-only contrast arm
//   reports/<arm>-s<seed>.json          before/after ASR + CA and cost
//   reports/mia-<arm>-s<seed>.csv       membership-inference accuracies
//   reports/reinjection-<arm>-s<seed>.csv          per-epoch re-poisoning ASR
//   reports/reinjection-summary-<arm>-s<seed>.csv  epochs-to-threshold table
//   plots/…                             written later by emit_report

// ---------------------------------------------------------------------------
// Dataset realization
// ---------------------------------------------------------------------------

struct RealizedData {
  Dataset train;
  Dataset defender;  // empty unless has_defender
  Dataset test;
  bool has_defender = false;
};

inline RealizedData realize_dataset(const DatasetConfig& dc, bool with_defender) {
  RealizedData out;
  out.has_defender = with_defender;
  if (dc.kind == DatasetConfig::Kind::synthetic) {
    const Dataset whole = gen_synthetic(dc.classes, dc.per_class, dc.image_size, dc.seed,
                                        dc.options);
    SplitSpec ss;
    ss.fractions = dc.fractions;
    ss.seed = dc.split_seed;
    std::vector<Dataset> parts = split(whole, ss);
    out.train = std::move(parts[0]);
    if (with_defender) {
      out.defender = std::move(parts[1]);
      out.test = std::move(parts[2]);
    } else {
      out.test = std::move(parts[1]);
    }
  } else {
    Dataset pool = load_idx(dc.train_images, dc.train_labels, dc.classes);
    out.test = load_idx(dc.test_images, dc.test_labels, dc.classes);
    if (with_defender) {
      SplitSpec ss;
      ss.fractions = dc.fractions;
      ss.seed = dc.split_seed;
      std::vector<Dataset> parts = split(pool, ss);
      out.train = std::move(parts[0]);
      out.defender = std::move(parts[1]);
    } else {
      out.train = std::move(pool);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config → engine structs
// ---------------------------------------------------------------------------

inline TrainConfig attack_train_config(const AttackConfig& a, uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.schedule = ScheduleSpec::constant_lr(a.lr);
  cfg.momentum = a.momentum;
  cfg.weight_decay = a.weight_decay;
  cfg.seed = seed;
  return cfg;
}

inline PoisonSpec poison_spec_for(const AttackConfig& a, uint64_t seed) {
  PoisonSpec p;
  p.trigger = a.trigger;
  p.target_label = a.target_label;
  p.poison_ratio = a.poison_ratio;
  p.seed = seed;
  return p;
}

inline nlohmann::json defense_spec_to_json(const DefenseSpec& d) {
  nlohmann::json j;
  j["kind"] = to_string(d.kind);
  j["epochs"] = d.epochs;
  j["batch_size"] = d.batch_size;
  j["momentum"] = d.momentum;
  j["weight_decay"] = d.weight_decay;
  if (d.kind == DefenseSpec::Kind::super_ft) {
    j["schedule"] = {{"lr_base", d.schedule.lr_base},
                     {"lr_max1", d.schedule.lr_max1},
                     {"lr_max2", d.schedule.lr_max2},
                     {"cycle_len_steps", d.schedule.cycle_len_steps},
                     {"phase1_epochs", d.schedule.phase1_epochs}};
  } else {
    j["lr"] = d.lr;
  }
  if (d.kind == DefenseSpec::Kind::fine_prune) j["prune_fraction"] = d.prune_fraction;
  return j;
}

inline DefenseSpec defense_spec_from_json(const nlohmann::json& j, const std::string& where) {
  DefenseSpec d;
  d.kind = parse_defense_kind(detail::get_str(j, where, "kind"));
  d.epochs = detail::get_int(j, where, "epochs");
  d.batch_size = detail::get_int(j, where, "batch_size");
  d.momentum = static_cast<float>(detail::get_num(j, where, "momentum"));
  d.weight_decay = static_cast<float>(detail::get_num(j, where, "weight_decay"));
  if (d.kind == DefenseSpec::Kind::super_ft) {
    const nlohmann::json& sj = detail::need(j, where, "schedule");
    const std::string sw = where + ".schedule";
    d.schedule = ScheduleSpec::superft(
        detail::get_num(sj, sw, "lr_base"), detail::get_num(sj, sw, "lr_max1"),
        detail::get_num(sj, sw, "lr_max2"), detail::get_int(sj, sw, "cycle_len_steps"),
        detail::get_int(sj, sw, "phase1_epochs"));
  } else {
    d.lr = detail::get_num_or(j, where, "lr", d.lr);
  }
  if (d.kind == DefenseSpec::Kind::fine_prune) {
    d.prune_fraction = detail::get_num(j, where, "prune_fraction");
  }
  return d;
}

// ---------------------------------------------------------------------------
// In-memory outcome (the CLI prints from this; files carry the same content)
// ---------------------------------------------------------------------------

struct ArmOutcome {
  std::string arm;
  uint64_t seed = 0;
  ScenarioResult result;
  bool has_mia = false;
  double mia_backdoored = -1.0;
  double mia_defended = -1.0;
  bool has_reinjection = false;
  ReinjectionReport reinj_defended;
};

struct SeedOutcome {
  uint64_t seed = 0;
  double attack_asr = -1.0;  // backdoored model on the source task
  double attack_ca = -1.0;
  std::vector<ArmOutcome> arms;
  bool has_twin_reinjection = false;
  ReinjectionReport reinj_clean_twin;
};

struct RunOutcome {
  std::string dir;
  std::string digest;
  std::vector<SeedOutcome> seeds;
};

// ---------------------------------------------------------------------------
// Internals
// ---------------------------------------------------------------------------

namespace detail {

inline std::string arm_seed_tag(const std::string& arm, uint64_t seed) {
  return arm + "-s" + std::to_string(seed);
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot write '" + path.string() + "'");
  f << j.dump(2) << '\n';
  require(f.good(), ErrKind::io, "failed writing '" + path.string() + "'");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrKind::format, "'" + path.string() + "': " + e.what());
  }
}

inline CsvTable mia_csv(const ArmOutcome& a) {
  CsvTable t;
  t.header = {"target", "accuracy"};
  t.rows.push_back({"backdoored", format_double(a.mia_backdoored)});
  t.rows.push_back({"defended", format_double(a.mia_defended)});
  return t;
}

inline void append_reinjection_rows(CsvTable& curve, CsvTable& summary,
                                    const ReinjectionReport& rep) {
  for (const ReinjectionArm& arm : rep.arms) {
    for (size_t e = 0; e < arm.asr.size(); ++e) {
      curve.rows.push_back({rep.start_tag, format_double(arm.ratio),
                            format_int(static_cast<int64_t>(e)), format_double(arm.asr[e]),
                            format_double(arm.ca[e])});
    }
    summary.rows.push_back({rep.start_tag, format_double(arm.ratio),
                            format_int(arm.epochs_to_threshold)});
  }
}

struct ProgressSink {
  std::ostream* out = nullptr;
  std::mutex mu;
  void line(const std::string& s) {
    if (!out) return;
    std::lock_guard<std::mutex> lock(mu);
    (*out) << s << '\n';
    out->flush();
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// run_config
// ---------------------------------------------------------------------------

inline int runner_worker_count(size_t jobs) {
  int workers = 1;
  if (const char* env = std::getenv("BACKLAB_WORKERS")) {
    workers = std::atoi(env);
    require(workers >= 1, ErrKind::config, "BACKLAB_WORKERS must be a positive integer");
  }
  if (static_cast<size_t>(workers) > jobs) workers = static_cast<int>(jobs);
  return workers;
}

inline RunOutcome run_config(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  require(!cfg.raw_json.empty(), ErrKind::config, "experiment config carries no raw bytes");
  if (cfg.scenario == Scenario::transfer) {
    require(!cfg.mia.enabled && !cfg.reinjection.enabled, ErrKind::config,
            "sequela measurements (mia, reinjection) apply to source-task scenarios only");
  }

  RunOutcome out;
  out.digest = digest_bytes(cfg.raw_json);
  const fs::path dir = fs::path(cfg.output_dir) / out.digest;
  out.dir = dir.string();

  // Refuse to clobber a directory that looks mid-run; anything marked
  // complete or partial is safe to regenerate from scratch.
  if (fs::exists(dir)) {
    const fs::path mpath = dir / "manifest.json";
    if (fs::exists(mpath)) {
      const nlohmann::json m = detail::read_json_file(mpath);
      const std::string status = m.value("status", "unknown");
      require(status != "running", ErrKind::io,
              "results directory '" + dir.string() +
                  "' is marked running; delete it if that run is dead");
    } else {
      require(fs::is_empty(dir), ErrKind::io,
              "refusing to overwrite '" + dir.string() + "': no manifest.json found");
    }
    fs::remove_all(dir);
  }
  for (const char* sub : {"models", "logs", "reports", "plots"}) {
    fs::create_directories(dir / sub);
  }

  // Data and architecture are shared read-only across every job.
  const RealizedData data = realize_dataset(cfg.dataset, /*with_defender=*/true);
  RealizedData target;  // transfer only
  if (cfg.scenario == Scenario::transfer) {
    target = realize_dataset(cfg.target_dataset, /*with_defender=*/false);
  }
  const ArchSpec arch =
      cfg.use_reference_arch
          ? reference_arch(data.train.channels(), data.train.height(), data.train.width(),
                           data.train.classes)
          : cfg.arch;
  require(cfg.attack.target_label < data.train.classes, ErrKind::config,
          "attack target label is outside the dataset's class range");

  nlohmann::json manifest;
  manifest["format"] = "backlab-manifest-v1";
  manifest["status"] = "running";
  manifest["config_digest"] = out.digest;
  manifest["scenario"] = to_string(cfg.scenario);
  manifest["seeds"] = cfg.seeds;
  manifest["per_epoch_metrics"] = cfg.per_epoch_metrics;
  {
    nlohmann::json arms = nlohmann::json::array();
    for (const DefenseArm& arm : cfg.defenses) {
      arms.push_back({{"name", arm.name},
                      {"seed_offset", arm.seed_offset},
                      {"defense", defense_spec_to_json(arm.spec)}});
    }
    manifest["arms"] = arms;
    manifest["arch"] = arch_to_json(arch);
  }
  detail::write_json_file(dir / "manifest.json", manifest);

  detail::ProgressSink sink;
  sink.out = progress;

  // One job per seed: attack once, then every defense arm plus sequela.
  auto run_seed_job = [&](uint64_t seed) -> SeedOutcome {
    SeedOutcome so;
    so.seed = seed;

    ScenarioSpec spec;
    spec.scenario = cfg.scenario;
    spec.arch = arch;
    spec.poison = poison_spec_for(cfg.attack, seed);
    spec.attack = attack_train_config(cfg.attack, seed);
    spec.transfer_classes = cfg.transfer_classes;
    spec.transfer_head_seed = cfg.transfer_head_seed;
    spec.per_epoch_metrics = cfg.per_epoch_metrics;

    ScenarioData sd;
    sd.train = &data.train;
    sd.defender = &data.defender;
    sd.test = &data.test;
    if (cfg.scenario == Scenario::transfer) {
      sd.target_train = &target.train;
      sd.target_test = &target.test;
    }

    const AttackStage stage = run_attack_stage(spec, sd);
    so.attack_asr = attack_success_rate(stage.model, stage.asr_set, cfg.attack.target_label);
    so.attack_ca = clean_accuracy(stage.model, data.test);
    save_model(stage.model, (dir / "models" / ("backdoored-s" + std::to_string(seed) + ".bfm"))
                                .string());
    write_csv((dir / "logs" / ("attack-s" + std::to_string(seed) + ".csv")).string(),
              trainlog_to_csv(stage.log));
    sink.line("[seed " + std::to_string(seed) + "] backdoored: asr=" +
              format_double(so.attack_asr) + " ca=" + format_double(so.attack_ca));

    // Sequela inputs shared across arms for this seed.
    Dataset mia_members, mia_nonmembers;
    if (cfg.mia.enabled) {
      int n = cfg.mia.member_count > 0 ? cfg.mia.member_count : data.test.n();
      require(n <= data.train.n() && n <= data.test.n(), ErrKind::config,
              "mia member_count exceeds the train or test split");
      auto pick = [](const Dataset& d, int count, uint64_t shuffle_seed, const char* tag) {
        std::vector<int> idx(static_cast<size_t>(d.n()));
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
        std::mt19937_64 rng(shuffle_seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<size_t>(count));
        return take_indices(d, idx, tag);
      };
      mia_members = pick(data.train, n, cfg.mia.member_seed, "mia members");
      mia_nonmembers = pick(data.test, n, cfg.mia.member_seed + 1, "mia nonmembers");
    }
    double mia_backdoored = -1.0;
    if (cfg.mia.enabled) {
      MiaConfig mc = cfg.mia.config;
      mc.seed = seed + cfg.mia.seed_offset;
      mia_backdoored = run_mia(stage.model, mia_members, mia_nonmembers, mc, "backdoored")
                           .accuracy;
    }

    ReinjectionSpec rspec;
    TrainConfig reinj_cfg;
    if (cfg.reinjection.enabled) {
      rspec.poison = spec.poison;
      rspec.ratios = cfg.reinjection.ratios;
      rspec.max_epochs = cfg.reinjection.max_epochs;
      rspec.threshold = cfg.reinjection.threshold;
      reinj_cfg = spec.attack;
      reinj_cfg.epochs = cfg.reinjection.max_epochs;
      // The clean twin: same architecture and recipe, never poisoned. Its
      // re-poisoning curve is the baseline the defended model races against.
      Model twin = init_model(arch, seed);
      train(twin, data.train, spec.attack);
      so.reinj_clean_twin = reinjection_curve(twin, "clean_twin", data.train, data.test, rspec,
                                              reinj_cfg);
      so.has_twin_reinjection = true;
    }

    for (const DefenseArm& arm : cfg.defenses) {
      ScenarioSpec aspec = spec;
      aspec.defense = arm.spec;
      aspec.defense.seed = seed + arm.seed_offset;

      ArmOutcome ao;
      ao.arm = arm.name;
      ao.seed = seed;
      ao.result = run_defense_stage(aspec, sd, stage);
      const std::string tag = detail::arm_seed_tag(arm.name, seed);

      save_model(ao.result.model, (dir / "models" / (tag + ".bfm")).string());
      write_csv((dir / "logs" / (tag + ".csv")).string(),
                trainlog_to_csv(ao.result.defense_log));
      if (cfg.scenario == Scenario::encoder_sim) {
        write_csv((dir / "logs" / (tag + "-head.csv")).string(),
                  trainlog_to_csv(ao.result.head_only_log));
      }

      nlohmann::json rj;
      rj["scenario"] = ao.result.report.scenario;
      rj["arm"] = arm.name;
      rj["seed"] = seed;
      rj["config_digest"] = out.digest;
      rj["asr_before"] = ao.result.report.asr_before;
      rj["asr_after"] = ao.result.report.asr_after;
      rj["ca_before"] = ao.result.report.ca_before;
      rj["ca_after"] = ao.result.report.ca_after;
      rj["cost_seconds"] = ao.result.report.cost_seconds;
      rj["epochs_used"] = ao.result.report.epochs_used;
      if (cfg.scenario == Scenario::encoder_sim) {
        rj["head_only"] = {{"asr_after", ao.result.head_only_asr_after},
                           {"ca_after", ao.result.head_only_ca_after}};
      }
      if (cfg.scenario == Scenario::transfer) {
        rj["source"] = {{"asr", ao.result.source_asr}, {"ca", ao.result.source_ca}};
      }

      if (cfg.mia.enabled) {
        MiaConfig mc = cfg.mia.config;
        mc.seed = seed + cfg.mia.seed_offset;
        ao.has_mia = true;
        ao.mia_backdoored = mia_backdoored;
        ao.mia_defended =
            run_mia(ao.result.model, mia_members, mia_nonmembers, mc, "defended").accuracy;
        write_csv((dir / "reports" / ("mia-" + tag + ".csv")).string(), detail::mia_csv(ao));
        rj["mia"] = {{"backdoored", ao.mia_backdoored}, {"defended", ao.mia_defended}};
      }

      if (cfg.reinjection.enabled) {
        ao.has_reinjection = true;
        ao.reinj_defended = reinjection_curve(ao.result.model, "defended", data.train,
                                              data.test, rspec, reinj_cfg);
        CsvTable curve, summary;
        curve.header = {"start", "ratio", "epoch", "asr", "ca"};
        summary.header = {"start", "ratio", "epochs_to_threshold"};
        detail::append_reinjection_rows(curve, summary, ao.reinj_defended);
        detail::append_reinjection_rows(curve, summary, so.reinj_clean_twin);
        write_csv((dir / "reports" / ("reinjection-" + tag + ".csv")).string(), curve);
        write_csv((dir / "reports" / ("reinjection-summary-" + tag + ".csv")).string(), summary);
      }

      detail::write_json_file(dir / "reports" / (tag + ".json"), rj);
      sink.line("[seed " + std::to_string(seed) + "] " + arm.name +
                ": asr " + format_double(ao.result.report.asr_before) + " -> " +
                format_double(ao.result.report.asr_after) + ", ca " +
                format_double(ao.result.report.ca_before) + " -> " +
                format_double(ao.result.report.ca_after));
      so.arms.push_back(std::move(ao));
    }
    return so;
  };

  out.seeds.resize(cfg.seeds.size());
  const int workers = runner_worker_count(cfg.seeds.size());
  std::exception_ptr first_error = nullptr;
  std::mutex error_mu;
  std::atomic<size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= cfg.seeds.size()) return;
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (first_error) return;
      }
      try {
        out.seeds[i] = run_seed_job(cfg.seeds[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  if (first_error) {
    manifest["status"] = "partial";
    detail::write_json_file(dir / "manifest.json", manifest);
    std::rethrow_exception(first_error);
  }

  // Index every file the run produced, then flip the completion marker.
  nlohmann::json runs = nlohmann::json::array();
  for (const SeedOutcome& so : out.seeds) {
    for (const ArmOutcome& ao : so.arms) {
      const std::string tag = detail::arm_seed_tag(ao.arm, ao.seed);
      nlohmann::json r;
      r["seed"] = ao.seed;
      r["arm"] = ao.arm;
      r["report"] = "reports/" + tag + ".json";
      r["attack_log"] = "logs/attack-s" + std::to_string(ao.seed) + ".csv";
      r["defense_log"] = "logs/" + tag + ".csv";
      r["backdoored_model"] = "models/backdoored-s" + std::to_string(ao.seed) + ".bfm";
      r["model"] = "models/" + tag + ".bfm";
      if (cfg.scenario == Scenario::encoder_sim) r["head_log"] = "logs/" + tag + "-head.csv";
      if (ao.has_mia) r["mia"] = "reports/mia-" + tag + ".csv";
      if (ao.has_reinjection) {
        r["reinjection"] = "reports/reinjection-" + tag + ".csv";
        r["reinjection_summary"] = "reports/reinjection-summary-" + tag + ".csv";
      }
      runs.push_back(r);
    }
  }
  manifest["runs"] = runs;
  manifest["status"] = "complete";
  detail::write_json_file(dir / "manifest.json", manifest);
  return out;
}

inline RunOutcome run_config_file(const std::string& path, std::ostream* progress = nullptr) {
  return run_config(parse_experiment_config(path), progress);
}

// ---------------------------------------------------------------------------
// emit_report: CSV series + SVG plots from a completed results directory
// ---------------------------------------------------------------------------

inline void emit_report(const std::string& results_dir, std::ostream* progress = nullptr) {
  namespace fs = std::filesystem;
  const fs::path dir(results_dir);
  const nlohmann::json manifest = detail::read_json_file(dir / "manifest.json");
  require(manifest.value("format", "") == "backlab-manifest-v1", ErrKind::format,
          "'" + (dir / "manifest.json").string() + "' is not a results manifest");
  const std::string status = manifest.value("status", "unknown");
  require(status == "complete", ErrKind::format,
          "results in '" + results_dir + "' are " + status + "; report needs a complete run");

  fs::create_directories(dir / "plots");
  size_t plots_written = 0;
  auto emit_svg = [&](const fs::path& path, const std::string& body) {
    write_text_file(path.string(), body);
    ++plots_written;
  };

  // Defense specs by arm name, for learning-rate traces.
  std::map<std::string, DefenseSpec> arm_specs;
  for (const auto& aj : manifest["arms"]) {
    arm_specs[aj["name"].get<std::string>()] =
        defense_spec_from_json(aj["defense"], "manifest.arms.defense");
  }

  // ASR/CA learning curves: one combined CSV (a row per arm, seed, epoch) and
  // per-arm SVGs with one series per seed. Row 0 carries the pre-defense
  // numbers from the report JSON.
  CsvTable curves;
  curves.header = {"arm", "seed", "epoch", "asr", "ca", "loss"};
  std::map<std::string, std::vector<PlotSeries>> asr_series, ca_series;
  std::map<std::string, std::map<uint64_t, const nlohmann::json*>> arm_runs;

  std::vector<nlohmann::json> run_cache;
  run_cache.reserve(manifest["runs"].size());
  for (const auto& rj : manifest["runs"]) run_cache.push_back(rj);

  for (const nlohmann::json& rj : run_cache) {
    const std::string arm = rj["arm"].get<std::string>();
    const uint64_t seed = rj["seed"].get<uint64_t>();
    const nlohmann::json report = detail::read_json_file(dir / rj["report"].get<std::string>());
    const CsvTable log = read_csv((dir / rj["defense_log"].get<std::string>()).string());
    const TrainLog tl = trainlog_from_csv(log, rj["defense_log"].get<std::string>());

    PlotSeries sa, sc;
    sa.label = "seed " + std::to_string(seed);
    sc.label = sa.label;
    const double asr0 = report["asr_before"].get<double>();
    const double ca0 = report["ca_before"].get<double>();
    curves.rows.push_back({arm, std::to_string(seed), "0", format_double(asr0),
                           format_double(ca0), "nan"});
    sa.points.push_back({0.0, asr0});
    sc.points.push_back({0.0, ca0});
    for (size_t e = 0; e < tl.rows.size(); ++e) {
      const EpochRow& row = tl.rows[e];
      curves.rows.push_back({arm, std::to_string(seed), std::to_string(e + 1),
                             format_double(row.asr), format_double(row.ca),
                             format_double(row.loss)});
      if (!std::isnan(row.asr)) sa.points.push_back({static_cast<double>(e + 1), row.asr});
      if (!std::isnan(row.ca)) sc.points.push_back({static_cast<double>(e + 1), row.ca});
    }
    asr_series[arm].push_back(std::move(sa));
    ca_series[arm].push_back(std::move(sc));
  }
  write_csv((dir / "plots" / "curves.csv").string(), curves);

  for (const auto& [arm, series] : asr_series) {
    PlotOptions opt;
    opt.title = arm + ": attack success during mitigation";
    opt.x_label = "epoch";
    opt.y_label = "attack success rate";
    opt.y_min = 0.0;
    opt.y_max = 1.0;
    emit_svg(dir / "plots" / ("asr-" + arm + ".svg"), svg_line_plot(series, opt));
  }
  for (const auto& [arm, series] : ca_series) {
    PlotOptions opt;
    opt.title = arm + ": clean accuracy during mitigation";
    opt.x_label = "epoch";
    opt.y_label = "clean accuracy";
    opt.y_min = 0.0;
    opt.y_max = 1.0;
    emit_svg(dir / "plots" / ("ca-" + arm + ".svg"), svg_line_plot(series, opt));
  }

  // Learning-rate traces for cyclic arms, reconstructed from the schedule and
  // laid over the steps the log actually took.
  for (const auto& [arm, spec] : arm_specs) {
    if (spec.kind != DefenseSpec::Kind::super_ft) continue;
    // Steps per epoch comes from any one run of this arm (identical across seeds).
    int64_t steps_per_epoch = 0, total_steps = 0;
    for (const nlohmann::json& rj : run_cache) {
      if (rj["arm"].get<std::string>() != arm) continue;
      const CsvTable log = read_csv((dir / rj["defense_log"].get<std::string>()).string());
      const TrainLog tl = trainlog_from_csv(log, "defense log");
      if (!tl.rows.empty()) {
        steps_per_epoch = tl.rows.front().steps;
        total_steps = tl.total_steps();
      }
      break;
    }
    if (steps_per_epoch <= 0) continue;
    const auto trace = schedule_trace(spec.schedule, total_steps, steps_per_epoch);
    CsvTable lr;
    lr.header = {"step", "lr"};
    PlotSeries s;
    s.label = arm;
    for (const auto& [step, value] : trace) {
      lr.rows.push_back({format_int(step), format_double(value)});
      s.points.push_back({static_cast<double>(step), value});
    }
    write_csv((dir / "plots" / ("lr-" + arm + ".csv")).string(), lr);
    PlotOptions opt;
    opt.title = arm + ": learning-rate schedule";
    opt.x_label = "step";
    opt.y_label = "learning rate";
    emit_svg(dir / "plots" / ("lr-" + arm + ".svg"), svg_line_plot({s}, opt));
  }

  // Membership-inference bars and reinjection curves, where the run has them.
  for (const nlohmann::json& rj : run_cache) {
    const std::string arm = rj["arm"].get<std::string>();
    const uint64_t seed = rj["seed"].get<uint64_t>();
    const std::string tag = detail::arm_seed_tag(arm, seed);
    if (rj.contains("mia")) {
      const CsvTable t = read_csv((dir / rj["mia"].get<std::string>()).string());
      std::vector<std::string> labels;
      std::vector<double> values;
      for (const auto& row : t.rows) {
        labels.push_back(row[0]);
        values.push_back(parse_double(row[1], "mia accuracy"));
      }
      PlotOptions opt;
      opt.title = tag + ": membership-inference accuracy";
      opt.y_label = "attack accuracy";
      opt.y_max = 1.0;
      emit_svg(dir / "plots" / ("mia-" + tag + ".svg"), svg_bar_chart(labels, values, opt));
    }
    if (rj.contains("reinjection")) {
      const CsvTable t = read_csv((dir / rj["reinjection"].get<std::string>()).string());
      std::map<std::string, PlotSeries> by_key;  // "start ratio" → series
      for (const auto& row : t.rows) {
        const std::string key = row[0] + " r=" + row[1];
        PlotSeries& s = by_key[key];
        s.label = key;
        s.points.push_back(
            {parse_double(row[2], "reinjection epoch"), parse_double(row[3], "reinjection asr")});
      }
      std::vector<PlotSeries> series;
      for (auto& [_, s] : by_key) series.push_back(std::move(s));
      PlotOptions opt;
      opt.title = tag + ": backdoor reinjection";
      opt.x_label = "epoch";
      opt.y_label = "attack success rate";
      opt.y_min = 0.0;
      opt.y_max = 1.0;
      emit_svg(dir / "plots" / ("reinjection-" + tag + ".svg"), svg_line_plot(series, opt));
    }
  }

  if (progress) {
    (*progress) << "wrote plots/curves.csv and " << plots_written << " svg plot(s) under "
                << (dir / "plots").string() << '\n';
  }
}

}  // namespace backlab
