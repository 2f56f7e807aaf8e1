// backlab — command-line front end for the backdoor attack/defense laboratory.
//
// Subcommands:
//   run <config.json>      execute an experiment, write results + manifest
//   report <results-dir>   emit CSV series and SVG plots from a finished run
//   trace-schedule <spec>  print a cyclic learning-rate schedule as step,lr CSV
//   check-gradients        finite-difference audit of the backprop engine
//
// Exit codes: 0 success, 2 configuration/format error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "backlab/backlab.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const backlab::ExperimentConfig cfg = backlab::parse_experiment_config(config_path);
  const backlab::RunOutcome out = backlab::run_config(cfg, &std::cout);
  std::cout << "results: " << out.dir << '\n';
  return 0;
}

int cmd_report(const std::string& results_dir) {
  backlab::emit_report(results_dir, &std::cout);
  return 0;
}

// The spec argument is either a path to a JSON file or an inline JSON object:
//   {"lr_base":3e-4,"lr_max1":0.1,"lr_max2":1e-3,"cycle_len_steps":24,
//    "phase1_epochs":4,"steps_per_epoch":24,"epochs":5}
int cmd_trace_schedule(const std::string& spec_arg, const std::string& out_path) {
  std::string body = spec_arg;
  if (std::filesystem::exists(spec_arg)) {
    std::ifstream f(spec_arg, std::ios::binary);
    backlab::require(f.good(), backlab::ErrKind::io, "cannot open '" + spec_arg + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    body = ss.str();
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    backlab::fail(backlab::ErrKind::config, std::string("schedule spec: ") + e.what());
  }
  const std::string where = "schedule spec";
  backlab::detail::check_keys(j, where,
                              {"lr_base", "lr_max1", "lr_max2", "cycle_len_steps",
                               "phase1_epochs", "steps_per_epoch", "epochs"});
  const backlab::ScheduleSpec s = backlab::ScheduleSpec::superft(
      backlab::detail::get_num_or(j, where, "lr_base", 3e-4),
      backlab::detail::get_num_or(j, where, "lr_max1", 0.1),
      backlab::detail::get_num_or(j, where, "lr_max2", 1e-3),
      backlab::detail::get_int_or(j, where, "cycle_len_steps", 24),
      backlab::detail::get_int_or(j, where, "phase1_epochs", 4));
  backlab::validate_schedule(s);
  const int64_t steps_per_epoch = backlab::detail::get_int(j, where, "steps_per_epoch");
  const int64_t epochs = backlab::detail::get_int(j, where, "epochs");
  backlab::require(steps_per_epoch > 0 && epochs > 0, backlab::ErrKind::config,
                   "schedule spec: steps_per_epoch and epochs must be positive");

  backlab::CsvTable t;
  t.header = {"step", "lr"};
  for (const auto& [step, lr] :
       backlab::schedule_trace(s, steps_per_epoch * epochs, steps_per_epoch)) {
    t.rows.push_back({backlab::format_int(step), backlab::format_double(lr)});
  }
  if (out_path.empty()) {
    std::cout << backlab::csv_to_string(t);
  } else {
    backlab::write_csv(out_path, t);
    std::cout << "wrote " << out_path << " (" << t.rows.size() << " steps)\n";
  }
  return 0;
}

// A random small architecture covering every layer kind the engine has,
// tracking spatial geometry so every layer fits its input.
backlab::ArchSpec random_probe_arch(std::mt19937_64& rng) {
  using backlab::ArchSpec;
  using backlab::LayerSpec;
  std::uniform_int_distribution<int> size_pick(7, 12), class_pick(2, 5), chan_pick(1, 3),
      conv_pick(2, 4), kern_pick(2, 3), dense_pick(4, 10), coin(0, 1);
  ArchSpec a;
  a.in_channels = chan_pick(rng);
  a.in_h = size_pick(rng);
  a.in_w = size_pick(rng);
  a.classes = class_pick(rng);
  int h = a.in_h, w = a.in_w;
  auto add_conv = [&]() {
    const int k = std::min({kern_pick(rng), h, w});
    a.layers.push_back(LayerSpec::conv(conv_pick(rng), k));
    a.layers.push_back(LayerSpec::relu());
    h = h - k + 1;
    w = w - k + 1;
  };
  add_conv();
  if (coin(rng) && h >= 2 && w >= 2) {
    a.layers.push_back(LayerSpec::maxpool(2));
    h /= 2;
    w /= 2;
  }
  if (coin(rng) && h >= 2 && w >= 2) add_conv();
  a.layers.push_back(LayerSpec::flatten());
  if (coin(rng)) {
    a.layers.push_back(LayerSpec::dense(dense_pick(rng)));
    a.layers.push_back(LayerSpec::relu());
  }
  a.layers.push_back(LayerSpec::dense(a.classes));
  return a;
}

int cmd_check_gradients(int nets, double tolerance, uint64_t seed) {
  using namespace backlab;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  int failures = 0;
  size_t unresolved = 0;
  for (int i = 0; i < nets; ++i) {
    const ArchSpec arch = random_probe_arch(rng);
    Model m = init_model(arch, rng());
    // Zero-initialized biases can park preactivations exactly on relu kinks
    // (behind dead windows), which no finite difference can score; jittering
    // them keeps every tensor checkable without touching the engine.
    std::uniform_real_distribution<float> jitter(-0.05f, 0.05f);
    for (size_t t = 1; t < m.params.size(); t += 2) {
      for (float& v : m.params[t]) v += jitter(rng);
    }
    const int n = 3;
    Batch batch;
    batch.images.shape = {n, arch.in_channels, arch.in_h, arch.in_w};
    batch.images.data.resize(static_cast<size_t>(n) * arch.in_channels * arch.in_h * arch.in_w);
    std::uniform_real_distribution<float> pix(0.0f, 1.0f);
    for (float& v : batch.images.data) v = pix(rng);
    std::uniform_int_distribution<int> lab(0, arch.classes - 1);
    batch.labels.resize(n);
    for (int& l : batch.labels) l = lab(rng);

    GradCheckOptions opt;
    opt.sample_seed = rng();
    const GradCheckResult res = finite_diff_check(m, batch, opt);
    worst = std::max(worst, res.max_rel_err);
    unresolved += res.tensors_unresolved;
    const bool ok = res.max_rel_err <= tolerance;
    if (!ok) ++failures;
    std::printf("net %2d: max_rel_err=%.3e entries=%zu kink_skipped=%zu unresolved=%zu %s\n", i,
                res.max_rel_err, res.entries_checked, res.kink_skipped, res.tensors_unresolved,
                ok ? "ok" : "FAIL");
  }
  std::printf("%d/%d nets within tolerance %.1e (worst %.3e, %zu unresolved tensors)\n",
              nets - failures, nets, tolerance, worst, unresolved);
  if (failures > 0) fail(ErrKind::numeric, "analytic gradients disagree with finite differences");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"backdoor attack/defense laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "execute an experiment config");
  run->add_option("config", config_path, "experiment JSON file")->required();

  std::string results_dir;
  CLI::App* report = app.add_subcommand("report", "emit plots from a finished run");
  report->add_option("dir", results_dir, "results directory (the digest-named one)")->required();

  std::string sched_spec, sched_out;
  CLI::App* trace = app.add_subcommand("trace-schedule", "print a cyclic schedule as CSV");
  trace->add_option("spec", sched_spec, "JSON object or path to one")->required();
  trace->add_option("-o,--out", sched_out, "write CSV here instead of stdout");

  int gc_nets = 20;
  double gc_tol = 1e-3;
  uint64_t gc_seed = 12345;
  CLI::App* gc = app.add_subcommand("check-gradients", "finite-difference backprop audit");
  gc->add_option("--nets", gc_nets, "number of random networks")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gc_tol, "max relative error allowed")
      ->check(CLI::PositiveNumber);
  gc->add_option("--seed", gc_seed, "generator seed");

  try {
    app.parse(argc, argv);
    if (*run) return cmd_run(config_path);
    if (*report) return cmd_report(results_dir);
    if (*trace) return cmd_trace_schedule(sched_spec, sched_out);
    if (*gc) return cmd_check_gradients(gc_nets, gc_tol, gc_seed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const backlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return (e.kind() == backlab::ErrKind::config || e.kind() == backlab::ErrKind::format) ? 2
                                                                                          : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
