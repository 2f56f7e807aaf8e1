// Training loop and mitigation mechanics: determinism, trainable-policy
// freezing, schedule ceilings, divergence reporting, and fine-pruning's
// channel ranking and zero-pinning. Channel activation means are checked
// against a naive convolution written in this file.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "backlab/backlab.hpp"

namespace bl = backlab;

namespace {

// Small, quickly separable world shared by the training tests.
const bl::Dataset& small_world() {
  static const bl::Dataset d = bl::gen_synthetic(3, 40, 12, 5);
  return d;
}

const bl::ArchSpec& small_arch() {
  static const bl::ArchSpec a = bl::reference_arch(1, 12, 12, 3);
  return a;
}

bool params_equal(const bl::Model& a, const bl::Model& b) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t t = 0; t < a.params.size(); ++t) {
    if (a.params[t] != b.params[t]) return false;
  }
  return true;
}

std::vector<double> naive_conv_acts(const bl::Dataset& d, const std::vector<float>& w,
                                    const std::vector<float>& b, int oc, int k) {
  // Mean absolute post-conv activation per output channel over the dataset,
  // valid convolution, stride 1, single input channel.
  const int h = d.height(), wdt = d.width();
  const int oh = h - k + 1, ow = wdt - k + 1;
  std::vector<double> mean(static_cast<size_t>(oc), 0.0);
  for (int i = 0; i < d.n(); ++i) {
    for (int o = 0; o < oc; ++o) {
      double plane_sum = 0.0;
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = b[static_cast<size_t>(o)];
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              acc += static_cast<double>(w[static_cast<size_t>((o * k + dy) * k + dx)]) *
                     d.images.data[static_cast<size_t>(i) * h * wdt +
                                   static_cast<size_t>((y + dy) * wdt + x + dx)];
            }
          plane_sum += std::abs(acc);
        }
      mean[static_cast<size_t>(o)] += plane_sum / (oh * ow);
    }
  }
  for (double& v : mean) v /= d.n();
  return mean;
}

}  // namespace

TEST_CASE("training reduces the loss and learns the task") {
  bl::Model m = bl::init_model(small_arch(), 1);
  bl::TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 32;
  cfg.schedule = bl::ScheduleSpec::constant_lr(0.05);
  cfg.momentum = 0.9f;
  cfg.seed = 1;
  const bl::TrainLog log = bl::train(m, small_world(), cfg);
  REQUIRE(log.rows.size() == 6);
  CHECK(log.rows.back().loss < log.rows.front().loss);
  CHECK(bl::clean_accuracy(m, small_world()) >= 0.9);
}

TEST_CASE("training is seed-deterministic and metric hooks do not perturb it") {
  bl::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.schedule = bl::ScheduleSpec::constant_lr(0.03);
  cfg.seed = 7;

  bl::Model a = bl::init_model(small_arch(), 2);
  bl::Model b = bl::init_model(small_arch(), 2);
  bl::train(a, small_world(), cfg);
  bl::train(b, small_world(), cfg);
  CHECK(params_equal(a, b));

  // Hooks score metrics but must not consume training randomness.
  bl::Model c = bl::init_model(small_arch(), 2);
  bl::EvalHooks hooks;
  hooks.ca_set = &small_world();
  const bl::TrainLog hooked = bl::train(c, small_world(), cfg, hooks);
  CHECK(params_equal(a, c));
  for (const bl::EpochRow& row : hooked.rows) {
    CHECK(std::isfinite(row.ca));
    CHECK(std::isnan(row.asr));  // no asr hook installed
  }

  // A different shuffle seed trains a different model.
  bl::Model d = bl::init_model(small_arch(), 2);
  bl::TrainConfig other = cfg;
  other.seed = 8;
  bl::train(d, small_world(), other);
  CHECK_FALSE(params_equal(a, d));
}

TEST_CASE("training logs cumulative steps and the highest rate the schedule produced") {
  bl::Model m = bl::init_model(small_arch(), 3);
  bl::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 32;  // 120 samples -> 4 steps per epoch
  cfg.schedule = bl::ScheduleSpec::superft(3e-4, 0.05, 1e-3, 8, 2);
  cfg.momentum = 0.0f;
  const bl::TrainLog log = bl::train(m, small_world(), cfg);

  REQUIRE(log.rows.size() == 4);
  for (int e = 0; e < 4; ++e) {
    CHECK(log.rows[static_cast<size_t>(e)].epoch == e);
    CHECK(log.rows[static_cast<size_t>(e)].steps == 4 * (e + 1));
    CHECK(std::isfinite(log.rows[static_cast<size_t>(e)].loss));
    if (e > 0) {
      CHECK(log.rows[static_cast<size_t>(e)].seconds >=
            log.rows[static_cast<size_t>(e - 1)].seconds);
    }
  }
  double want_max = 0.0;
  for (const auto& [step, lr] : bl::schedule_trace(cfg.schedule, 16, 4)) {
    want_max = std::max(want_max, lr);
  }
  CHECK(log.max_lr_seen == want_max);
}

TEST_CASE("head_only policy trains the trailing dense block and freezes the body") {
  bl::Model m = bl::init_model(small_arch(), 4);
  const bl::Model before = m;
  bl::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.schedule = bl::ScheduleSpec::constant_lr(0.05);
  cfg.policy = bl::TrainConfig::Policy::head_only;
  bl::train(m, small_world(), cfg);

  const size_t n = m.params.size();
  for (size_t t = 0; t + 2 < n; ++t) {
    CHECK(m.params[t] == before.params[t]);  // body untouched, bit for bit
  }
  CHECK(m.params[n - 2] != before.params[n - 2]);
  CHECK(m.trainable[n - 2] == 1);
  CHECK(m.trainable[0] == 0);
}

TEST_CASE("training reports divergence as a structured error") {
  bl::Model m = bl::init_model(small_arch(), 5);
  bl::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 32;
  cfg.schedule = bl::ScheduleSpec::constant_lr(1e12);
  try {
    bl::train(m, small_world(), cfg);
    FAIL("expected a divergence error");
  } catch (const bl::Error& e) {
    CHECK(e.kind() == bl::ErrKind::divergence);
  }
}

TEST_CASE("training rejects inconsistent configurations") {
  bl::Model m = bl::init_model(small_arch(), 6);
  bl::TrainConfig cfg;

  SECTION("zero epochs") {
    cfg.epochs = 0;
    REQUIRE_THROWS_AS(bl::train(m, small_world(), cfg), bl::Error);
  }
  SECTION("zero batch size") {
    cfg.batch_size = 0;
    REQUIRE_THROWS_AS(bl::train(m, small_world(), cfg), bl::Error);
  }
  SECTION("class count mismatch") {
    const bl::Dataset other = bl::gen_synthetic(4, 5, 12, 0);
    REQUIRE_THROWS_AS(bl::train(m, other, cfg), bl::Error);
  }
  SECTION("asr hook without a target label") {
    bl::EvalHooks hooks;
    hooks.asr_set = &small_world();
    REQUIRE_THROWS_AS(bl::train(m, small_world(), cfg, hooks), bl::Error);
  }
}

TEST_CASE("super_fine_tune requires a cyclic schedule and obeys its ceiling") {
  bl::Model m = bl::init_model(small_arch(), 7);
  try {
    bl::super_fine_tune(m, small_world(), bl::ScheduleSpec::constant_lr(0.01), 1, 0);
    FAIL("expected a config error");
  } catch (const bl::Error& e) {
    CHECK(e.kind() == bl::ErrKind::config);
  }

  const bl::ScheduleSpec sft = bl::ScheduleSpec::superft(3e-4, 0.05, 1e-3, 8, 1);
  const bl::TrainLog log = bl::super_fine_tune(m, small_world(), sft, 2, 0, 32);
  CHECK(log.max_lr_seen <= 0.05 + 1e-12);
  CHECK(log.rows.size() == 2);
}

TEST_CASE("defense arm 'none' leaves the model untouched") {
  bl::Model m = bl::init_model(small_arch(), 8);
  const bl::Model before = m;
  bl::DefenseSpec d;
  d.kind = bl::DefenseSpec::Kind::none;
  const bl::TrainLog log = bl::apply_defense(m, small_world(), d);
  CHECK(params_equal(m, before));
  CHECK(log.rows.empty());
}

TEST_CASE("conventional fine-tuning arm runs at its configured constant rate") {
  bl::Model m = bl::init_model(small_arch(), 9);
  bl::TrainConfig pre;
  pre.epochs = 2;
  pre.batch_size = 32;
  pre.schedule = bl::ScheduleSpec::constant_lr(0.05);
  bl::train(m, small_world(), pre);

  const bl::Model before = m;
  bl::DefenseSpec d;
  d.kind = bl::DefenseSpec::Kind::conventional_ft;
  d.epochs = 2;
  d.batch_size = 32;
  d.lr = 0.02;
  d.seed = 3;
  const bl::TrainLog log = bl::apply_defense(m, small_world(), d);
  CHECK(log.max_lr_seen == 0.02);
  CHECK_FALSE(params_equal(m, before));
}

TEST_CASE("super-FT defense arm is the cyclic fine-tune, dispatcher included") {
  bl::Model base = bl::init_model(small_arch(), 10);
  bl::TrainConfig pre;
  pre.epochs = 2;
  pre.batch_size = 32;
  pre.schedule = bl::ScheduleSpec::constant_lr(0.05);
  bl::train(base, small_world(), pre);

  bl::DefenseSpec d;
  d.kind = bl::DefenseSpec::Kind::super_ft;
  d.schedule = bl::ScheduleSpec::superft(3e-4, 0.05, 1e-3, 8, 1);
  d.epochs = 2;
  d.batch_size = 16;
  d.weight_decay = 0.1f;
  d.seed = 4;

  bl::Model via_dispatch = base;
  bl::apply_defense(via_dispatch, small_world(), d);

  bl::Model direct = base;
  bl::super_fine_tune(direct, small_world(), d.schedule, d.epochs, d.seed, d.batch_size, {},
                      d.momentum, d.weight_decay);
  CHECK(params_equal(via_dispatch, direct));
}

TEST_CASE("channel activation ranking matches a naive convolution") {
  // One conv layer with controlled weights; the naive reference computes the
  // same mean |activation| per channel directly from the pixels.
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 8;
  arch.in_w = 8;
  arch.classes = 2;
  arch.layers = {bl::LayerSpec::conv(3, 3, 1), bl::LayerSpec::relu(), bl::LayerSpec::flatten(),
                 bl::LayerSpec::dense(2)};
  bl::Model m = bl::init_model(arch, 11);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (float& v : m.params[0]) v = static_cast<float>(u(rng));
  for (float& v : m.params[1]) v = static_cast<float>(u(rng));

  const bl::Dataset d = bl::gen_synthetic(2, 10, 8, 13);
  const std::vector<bl::ConvChannel> got = bl::conv_channel_activations(m, d);
  const std::vector<double> want = naive_conv_acts(d, m.params[0], m.params[1], 3, 3);

  REQUIRE(got.size() == 3);
  for (const bl::ConvChannel& ch : got) {
    CHECK(ch.layer == 0);
    CHECK(ch.weight_tensor == 0);
    CHECK(ch.mean_activation ==
          Catch::Approx(want[static_cast<size_t>(ch.channel)]).epsilon(1e-4));
  }
}

TEST_CASE("fine-pruning zeroes the weakest channels and pins them through training") {
  // Conv channel strength is forced by construction: channel i's weights are
  // scaled by (i+1), so channels 0 and 1 are the weakest of 4.
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 10;
  arch.in_w = 10;
  arch.classes = 3;
  arch.layers = {bl::LayerSpec::conv(4, 3, 1), bl::LayerSpec::relu(), bl::LayerSpec::maxpool(2),
                 bl::LayerSpec::flatten(), bl::LayerSpec::dense(3)};
  bl::Model m = bl::init_model(arch, 14);
  const size_t per_channel = m.params[0].size() / 4;
  for (int ch = 0; ch < 4; ++ch) {
    for (size_t j = 0; j < per_channel; ++j) {
      float& v = m.params[0][static_cast<size_t>(ch) * per_channel + j];
      v = std::abs(v) * static_cast<float>(ch + 1);
    }
    m.params[1][static_cast<size_t>(ch)] = 0.01f * static_cast<float>(ch + 1);
  }

  const bl::Dataset d = bl::gen_synthetic(3, 15, 10, 15);
  bl::TrainConfig ft;
  ft.epochs = 2;
  ft.batch_size = 16;
  ft.schedule = bl::ScheduleSpec::constant_lr(0.05);
  const bl::PruneOutcome out = bl::fine_prune(m, d, 0.5, ft);

  REQUIRE(out.pruned.size() == 2);
  std::set<int> cut;
  for (const bl::ConvChannel& ch : out.pruned) cut.insert(ch.channel);
  CHECK(cut == std::set<int>{0, 1});

  // Pruned channels stay exactly zero after the fine-tune.
  for (int ch : {0, 1}) {
    for (size_t j = 0; j < per_channel; ++j) {
      CHECK(m.params[0][static_cast<size_t>(ch) * per_channel + j] == 0.0f);
    }
    CHECK(m.params[1][static_cast<size_t>(ch)] == 0.0f);
  }
  // Surviving channels trained normally.
  bool survivor_nonzero = false;
  for (size_t j = 0; j < per_channel; ++j) {
    if (m.params[0][static_cast<size_t>(3) * per_channel + j] != 0.0f) survivor_nonzero = true;
  }
  CHECK(survivor_nonzero);
  CHECK(out.log.rows.size() == 2);
}

TEST_CASE("fine-pruning refuses to sever a layer entirely") {
  // First conv made negligible, second conv given a large bias: the weakest
  // channels are then all of layer 0, and cutting all of them would sever the
  // forward path.
  bl::Model m = bl::init_model(small_arch(), 16);
  for (float& v : m.params[0]) v *= 1e-4f;
  std::fill(m.params[1].begin(), m.params[1].end(), 0.0f);
  std::fill(m.params[3].begin(), m.params[3].end(), 1.0f);  // second conv bias

  bl::TrainConfig ft;
  ft.epochs = 1;
  ft.batch_size = 32;
  // 24 channels total; 0.4 wants 9, but layer 0 only has 8 to give.
  try {
    bl::fine_prune(m, small_world(), 0.4, ft);
    FAIL("expected a config error");
  } catch (const bl::Error& e) {
    CHECK(e.kind() == bl::ErrKind::config);
  }
}

TEST_CASE("fine-prune defense arm requires the whole-model policy") {
  bl::Model m = bl::init_model(small_arch(), 17);
  bl::DefenseSpec d;
  d.kind = bl::DefenseSpec::Kind::fine_prune;
  d.prune_fraction = 0.1;
  d.epochs = 1;
  try {
    bl::apply_defense(m, small_world(), d, {}, bl::TrainConfig::Policy::head_only);
    FAIL("expected a config error");
  } catch (const bl::Error& e) {
    CHECK(e.kind() == bl::ErrKind::config);
  }
}

TEST_CASE("automatic prune fraction search returns a usable model") {
  bl::Model m = bl::init_model(small_arch(), 18);
  bl::TrainConfig pre;
  pre.epochs = 4;
  pre.batch_size = 32;
  pre.schedule = bl::ScheduleSpec::constant_lr(0.05);
  pre.momentum = 0.9f;
  bl::train(m, small_world(), pre);

  bl::DefenseSpec d;
  d.kind = bl::DefenseSpec::Kind::fine_prune;
  d.prune_fraction = -1.0;  // automatic
  d.epochs = 2;
  d.batch_size = 32;
  d.lr = 0.05;
  const bl::TrainLog log = bl::apply_defense(m, small_world(), d);
  CHECK(log.rows.size() == 2);
  CHECK(bl::clean_accuracy(m, small_world()) >= 0.85);
}
