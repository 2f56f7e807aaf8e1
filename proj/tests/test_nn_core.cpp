// Forward/backward engine tests. Every numerical comparison here is against
// an independent reference implemented in this file (naive loop nests in
// double precision) or against hand-worked arithmetic, never against the
// engine's own kernels.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "backlab/backlab.hpp"

namespace bl = backlab;

namespace {

// ---------------------------------------------------------------------------
// Naive references (double precision, index arithmetic written independently).
// ---------------------------------------------------------------------------

std::vector<double> naive_conv(const std::vector<double>& in, int n, int ic, int ih, int iw,
                               const std::vector<double>& w, const std::vector<double>& b, int oc,
                               int k, int stride) {
  const int oh = (ih - k) / stride + 1;
  const int ow = (iw - k) / stride + 1;
  std::vector<double> out(static_cast<size_t>(n) * oc * oh * ow, 0.0);
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < oc; ++o)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double acc = b[static_cast<size_t>(o)];
          for (int c = 0; c < ic; ++c)
            for (int dy = 0; dy < k; ++dy)
              for (int dx = 0; dx < k; ++dx) {
                const double wv = w[static_cast<size_t>(((o * ic + c) * k + dy) * k + dx)];
                const double iv =
                    in[static_cast<size_t>(((i * ic + c) * ih + y * stride + dy) * iw +
                                           x * stride + dx)];
                acc += wv * iv;
              }
          out[static_cast<size_t>(((i * oc + o) * oh + y) * ow + x)] = acc;
        }
  return out;
}

std::vector<double> naive_maxpool(const std::vector<double>& in, int n, int c, int ih, int iw,
                                  int k) {
  const int oh = ih / k, ow = iw / k;
  std::vector<double> out(static_cast<size_t>(n) * c * oh * ow);
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          double best = -1e300;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              best = std::max(best, in[static_cast<size_t>(((i * c + ch) * ih + y * k + dy) * iw +
                                                           x * k + dx)]);
            }
          out[static_cast<size_t>(((i * c + ch) * oh + y) * ow + x)] = best;
        }
  return out;
}

std::vector<double> naive_dense(const std::vector<double>& in, int n, int din,
                                const std::vector<double>& w, const std::vector<double>& b,
                                int dout) {
  std::vector<double> out(static_cast<size_t>(n) * dout);
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < dout; ++o) {
      double acc = b[static_cast<size_t>(o)];
      for (int d = 0; d < din; ++d)
        acc += w[static_cast<size_t>(o * din + d)] * in[static_cast<size_t>(i * din + d)];
      out[static_cast<size_t>(i * dout + o)] = acc;
    }
  return out;
}

double naive_softmax_ce(const std::vector<double>& logits, int n, int k,
                        const std::vector<int>& labels) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* row = logits.data() + static_cast<size_t>(i) * k;
    double mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    total += -(row[labels[static_cast<size_t>(i)]] - mx - std::log(denom));
  }
  return total / n;
}

// Builds a model whose trailing dense block is the identity, so the logits
// equal the flattened activations of the layer under test.
bl::Model passthrough_model(bl::ArchSpec arch) {
  const auto shapes = bl::chain_shapes(arch);
  const int flat = static_cast<int>(shapes.back().count());
  arch.layers.push_back(bl::LayerSpec::flatten());
  arch.layers.push_back(bl::LayerSpec::dense(flat));
  arch.classes = flat;
  bl::Model m = bl::init_model(arch, 0);
  auto& w = m.params[m.params.size() - 2];
  std::fill(w.begin(), w.end(), 0.0f);
  for (int i = 0; i < flat; ++i) w[static_cast<size_t>(i) * flat + i] = 1.0f;
  std::fill(m.params.back().begin(), m.params.back().end(), 0.0f);
  return m;
}

std::vector<float> random_floats(size_t n, std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> out(n);
  for (float& v : out) v = static_cast<float>(u(rng));
  return out;
}

std::vector<double> widen(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

bl::Batch make_image_batch(int n, int c, int h, int w, std::mt19937_64& rng, int classes) {
  bl::Batch b;
  b.images = bl::Tensor({n, c, h, w});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (float& v : b.images.data) v = static_cast<float>(u(rng));
  std::uniform_int_distribution<int> lab(0, classes - 1);
  b.labels.resize(static_cast<size_t>(n));
  for (int& y : b.labels) y = lab(rng);
  return b;
}

}  // namespace

TEST_CASE("conv forward matches a hand-worked example") {
  // 1x1x3x3 input, one 2x2 kernel, stride 1: each output is the dot product
  // of the kernel with the window, plus the bias. Worked by hand below.
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 3;
  arch.in_w = 3;
  arch.layers = {bl::LayerSpec::conv(1, 2, 1)};
  bl::Model m = passthrough_model(arch);
  m.params[0] = {1.0f, 2.0f, 3.0f, 4.0f};  // kernel rows (1 2 / 3 4)
  m.params[1] = {0.5f};

  bl::Batch b;
  b.images = bl::Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  b.labels = {0};

  const std::vector<float> out = bl::forward(m, b);
  REQUIRE(out.size() == 4);
  // Window (1 2 / 4 5): 1*1 + 2*2 + 3*4 + 4*5 + 0.5 = 37.5, and so on.
  CHECK(out[0] == Catch::Approx(37.5));
  CHECK(out[1] == Catch::Approx(1 * 2 + 2 * 3 + 3 * 5 + 4 * 6 + 0.5));
  CHECK(out[2] == Catch::Approx(1 * 4 + 2 * 5 + 3 * 7 + 4 * 8 + 0.5));
  CHECK(out[3] == Catch::Approx(1 * 5 + 2 * 6 + 3 * 8 + 4 * 9 + 0.5));
}

TEST_CASE("conv forward matches the naive reference on random tensors") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 3);
    const int ic = 1 + static_cast<int>(rng() % 3);
    const int oc = 1 + static_cast<int>(rng() % 4);
    const int h = 4 + static_cast<int>(rng() % 4);
    const int w = 4 + static_cast<int>(rng() % 4);
    const int k = 1 + static_cast<int>(rng() % 3);
    const int stride = 1 + static_cast<int>(rng() % 2);

    bl::ArchSpec arch;
    arch.in_channels = ic;
    arch.in_h = h;
    arch.in_w = w;
    arch.layers = {bl::LayerSpec::conv(oc, k, stride)};
    bl::Model m = passthrough_model(arch);
    m.params[0] = random_floats(static_cast<size_t>(oc) * ic * k * k, rng);
    m.params[1] = random_floats(static_cast<size_t>(oc), rng);

    bl::Batch b;
    b.images = bl::Tensor({n, ic, h, w});
    b.images.data = random_floats(b.images.data.size(), rng, 0.0, 1.0);
    b.labels.assign(static_cast<size_t>(n), 0);

    const std::vector<float> got = bl::forward(m, b);
    const std::vector<double> want =
        naive_conv(widen(b.images.data), n, ic, h, w, widen(m.params[0]), widen(m.params[1]), oc,
                   k, stride);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK_THAT(static_cast<double>(got[i]),
                 Catch::Matchers::WithinAbs(want[i], 1e-4) ||
                     Catch::Matchers::WithinRel(want[i], 1e-5));
    }
  }
}

TEST_CASE("relu and maxpool forward match the naive reference") {
  std::mt19937_64 rng(202);
  const int n = 2, c = 3, h = 6, w = 4, k = 2;
  bl::ArchSpec arch;
  arch.in_channels = c;
  arch.in_h = h;
  arch.in_w = w;
  arch.layers = {bl::LayerSpec::relu(), bl::LayerSpec::maxpool(k)};
  bl::Model m = passthrough_model(arch);

  bl::Batch b;
  b.images = bl::Tensor({n, c, h, w});
  b.images.data = random_floats(b.images.data.size(), rng);
  b.labels.assign(static_cast<size_t>(n), 0);

  std::vector<double> relu_in = widen(b.images.data);
  for (double& v : relu_in) v = v > 0.0 ? v : 0.0;
  const std::vector<double> want = naive_maxpool(relu_in, n, c, h, w, k);

  const std::vector<float> got = bl::forward(m, b);
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(static_cast<double>(got[i]) == Catch::Approx(want[i]).margin(1e-6));
  }
}

TEST_CASE("maxpool discards trailing rows and columns that do not fill a window") {
  // 5x5 pooled by 2 -> 2x2; row 4 and column 4 must not influence any output.
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 5;
  arch.in_w = 5;
  arch.layers = {bl::LayerSpec::maxpool(2)};
  bl::Model m = passthrough_model(arch);

  bl::Batch b;
  b.images = bl::Tensor({1, 1, 5, 5});
  std::fill(b.images.data.begin(), b.images.data.end(), 0.25f);
  for (int x = 0; x < 5; ++x) b.images.data[static_cast<size_t>(4) * 5 + x] = 9.0f;
  for (int y = 0; y < 5; ++y) b.images.data[static_cast<size_t>(y) * 5 + 4] = 9.0f;
  b.labels = {0};

  const std::vector<float> out = bl::forward(m, b);
  REQUIRE(out.size() == 4);
  for (float v : out) CHECK(v == 0.25f);
}

TEST_CASE("dense forward matches the naive reference") {
  std::mt19937_64 rng(303);
  const int n = 3, din = 7, dout = 4;
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = din;
  arch.classes = dout;
  arch.layers = {bl::LayerSpec::flatten(), bl::LayerSpec::dense(dout)};
  bl::Model m = bl::init_model(arch, 1);
  m.params[0] = random_floats(static_cast<size_t>(dout) * din, rng);
  m.params[1] = random_floats(static_cast<size_t>(dout), rng);

  bl::Batch b;
  b.images = bl::Tensor({n, 1, 1, din});
  b.images.data = random_floats(b.images.data.size(), rng);
  b.labels.assign(static_cast<size_t>(n), 0);

  const std::vector<float> got = bl::forward(m, b);
  const std::vector<double> want =
      naive_dense(widen(b.images.data), n, din, widen(m.params[0]), widen(m.params[1]), dout);
  REQUIRE(got.size() == want.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(static_cast<double>(got[i]) == Catch::Approx(want[i]).margin(1e-5));
  }
}

TEST_CASE("softmax cross-entropy matches a double-precision reference") {
  std::mt19937_64 rng(404);
  const int n = 5, k = 4;
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = k;
  arch.classes = k;
  arch.layers = {bl::LayerSpec::flatten(), bl::LayerSpec::dense(k)};
  bl::Model m = bl::init_model(arch, 2);
  // Identity head: logits equal the raw inputs, so the reference sees the
  // same numbers the engine does.
  std::fill(m.params[0].begin(), m.params[0].end(), 0.0f);
  for (int i = 0; i < k; ++i) m.params[0][static_cast<size_t>(i) * k + i] = 1.0f;
  std::fill(m.params[1].begin(), m.params[1].end(), 0.0f);

  bl::Batch b = make_image_batch(n, 1, 1, k, rng, k);
  // Scale inputs up so the softmax is not near-uniform.
  for (float& v : b.images.data) v = v * 6.0f - 3.0f;

  const float loss = bl::backward(m, b).loss;
  const double want = naive_softmax_ce(widen(b.images.data), n, k, b.labels);
  CHECK(static_cast<double>(loss) == Catch::Approx(want).epsilon(1e-5));
}

TEST_CASE("predict returns the argmax class with ties to the lowest index") {
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = 3;
  arch.classes = 3;
  arch.layers = {bl::LayerSpec::flatten(), bl::LayerSpec::dense(3)};
  bl::Model m = bl::init_model(arch, 3);
  std::fill(m.params[0].begin(), m.params[0].end(), 0.0f);
  for (int i = 0; i < 3; ++i) m.params[0][static_cast<size_t>(i) * 3 + i] = 1.0f;
  std::fill(m.params[1].begin(), m.params[1].end(), 0.0f);

  bl::Batch b;
  b.images = bl::Tensor({3, 1, 1, 3}, {0.1f, 0.9f, 0.3f,   // argmax 1
                                       0.7f, 0.7f, 0.1f,   // tie -> 0
                                       0.0f, 0.2f, 0.2f}); // tie -> 1
  b.labels = {0, 0, 0};
  CHECK(bl::predict(m, b) == std::vector<int>{1, 0, 1});
}

TEST_CASE("analytic gradients agree with central differences") {
  std::mt19937_64 rng(505);
  for (uint64_t seed : {11ull, 22ull, 33ull}) {
    bl::ArchSpec arch;
    arch.in_channels = 1;
    arch.in_h = 7;
    arch.in_w = 7;
    arch.classes = 3;
    arch.layers = {bl::LayerSpec::conv(3, 3, 1), bl::LayerSpec::relu(), bl::LayerSpec::maxpool(2),
                   bl::LayerSpec::flatten(), bl::LayerSpec::dense(5), bl::LayerSpec::relu(),
                   bl::LayerSpec::dense(3)};
    bl::Model m = bl::init_model(arch, seed);
    // Jitter the biases: zero-initialized biases can park preactivations
    // exactly on relu kinks, where no finite difference is conclusive.
    std::uniform_real_distribution<double> jit(-0.05, 0.05);
    for (size_t t = 1; t < m.params.size(); t += 2) {
      for (float& v : m.params[t]) v += static_cast<float>(jit(rng));
    }
    bl::Batch b = make_image_batch(3, 1, 7, 7, rng, 3);

    bl::GradCheckOptions opt;
    opt.sample_seed = seed;
    const bl::GradCheckResult res = bl::finite_diff_check(m, b, opt);
    INFO("seed " << seed << " worst tensor " << res.worst_tensor << " analytic "
                 << res.worst_analytic << " numeric " << res.worst_numeric);
    CHECK(res.entries_checked > 0);
    CHECK(res.tensors_unresolved == 0);
    CHECK(res.max_rel_err < 1e-3);
  }
}

TEST_CASE("gradient check reports kink-parked tensors as unresolved") {
  // Zero conv weights and bias put every relu preactivation exactly at the
  // kink: any +-h probe flips the activation region, so the conv tensors
  // cannot be certified and must be counted, not scored.
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 3;
  arch.in_w = 3;
  arch.classes = 2;
  arch.layers = {bl::LayerSpec::conv(1, 3, 1), bl::LayerSpec::relu(), bl::LayerSpec::flatten(),
                 bl::LayerSpec::dense(2)};
  bl::Model m = bl::init_model(arch, 0);
  std::fill(m.params[0].begin(), m.params[0].end(), 0.0f);
  std::fill(m.params[1].begin(), m.params[1].end(), 0.0f);

  bl::Batch b;
  b.images = bl::Tensor({1, 1, 3, 3});
  std::fill(b.images.data.begin(), b.images.data.end(), 0.5f);
  b.labels = {1};

  const bl::GradCheckResult res = bl::finite_diff_check(m, b);
  CHECK(res.tensors_unresolved == 2);  // conv W and conv b
  CHECK(res.kink_skipped > 0);
  // The dense block sits after a dead relu; its gradients are exactly zero on
  // both sides, which the check scores as perfect agreement.
  CHECK(res.max_rel_err == 0.0);
}

TEST_CASE("init_model is seed-deterministic with zero biases inside the fan bound") {
  const bl::ArchSpec arch = bl::reference_arch(1, 10, 10, 4);
  const bl::Model a = bl::init_model(arch, 42);
  const bl::Model b = bl::init_model(arch, 42);
  const bl::Model c = bl::init_model(arch, 43);

  REQUIRE(a.params.size() == b.params.size());
  for (size_t t = 0; t < a.params.size(); ++t) {
    CHECK(a.params[t] == b.params[t]);
  }
  bool any_diff = false;
  for (size_t t = 0; t < a.params.size(); ++t) {
    if (a.params[t] != c.params[t]) any_diff = true;
  }
  CHECK(any_diff);

  const auto shapes = bl::param_shapes(arch);
  for (size_t t = 0; t < a.params.size(); ++t) {
    if (shapes[t].size() == 1) {
      for (float v : a.params[t]) CHECK(v == 0.0f);
    } else {
      // Uniform(-L, L) with L = sqrt(6 / (fan_in + fan_out)), fans computed
      // here independently.
      double fan_in, fan_out;
      if (shapes[t].size() == 4) {
        fan_in = static_cast<double>(shapes[t][1]) * shapes[t][2] * shapes[t][3];
        fan_out = static_cast<double>(shapes[t][0]) * shapes[t][2] * shapes[t][3];
      } else {
        fan_in = shapes[t][1];
        fan_out = shapes[t][0];
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (float v : a.params[t]) {
        CHECK(std::abs(static_cast<double>(v)) <= limit);
      }
    }
    CHECK(a.momentum[t].size() == a.params[t].size());
    for (float v : a.momentum[t]) CHECK(v == 0.0f);
  }
}

TEST_CASE("sgd_step applies decay-into-momentum semantics") {
  // Reference update simulated here: v <- mu*v + g + wd*p, then p <- p - lr*v.
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = 3;
  arch.classes = 2;
  arch.layers = {bl::LayerSpec::flatten(), bl::LayerSpec::dense(2)};
  bl::Model m = bl::init_model(arch, 7);

  std::mt19937_64 rng(606);
  bl::detail::Params<float> g1(m.params.size()), g2(m.params.size());
  for (size_t t = 0; t < m.params.size(); ++t) {
    g1[t] = random_floats(m.params[t].size(), rng);
    g2[t] = random_floats(m.params[t].size(), rng);
  }

  const float lr = 0.05f, mu = 0.9f, wd = 0.3f;
  // Independent simulation in double.
  std::vector<std::vector<double>> p(m.params.size()), v(m.params.size());
  for (size_t t = 0; t < m.params.size(); ++t) {
    p[t] = widen(m.params[t]);
    v[t].assign(m.params[t].size(), 0.0);
  }
  for (const auto* g : {&g1, &g2}) {
    for (size_t t = 0; t < p.size(); ++t) {
      for (size_t j = 0; j < p[t].size(); ++j) {
        // Mirror the engine's float32 arithmetic order with float casts.
        const float vv = static_cast<float>(mu * static_cast<float>(v[t][j]) + (*g)[t][j] +
                                            wd * static_cast<float>(p[t][j]));
        v[t][j] = vv;
        p[t][j] = static_cast<float>(static_cast<float>(p[t][j]) - lr * vv);
      }
    }
  }

  bl::sgd_step(m, g1, lr, mu, wd);
  bl::sgd_step(m, g2, lr, mu, wd);
  for (size_t t = 0; t < m.params.size(); ++t) {
    for (size_t j = 0; j < m.params[t].size(); ++j) {
      CHECK(m.params[t][j] == Catch::Approx(p[t][j]).margin(1e-7));
      CHECK(m.momentum[t][j] == Catch::Approx(v[t][j]).margin(1e-7));
    }
  }
}

TEST_CASE("sgd_step leaves frozen tensors and their momentum untouched") {
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = 3;
  arch.classes = 2;
  arch.layers = {bl::LayerSpec::flatten(), bl::LayerSpec::dense(4), bl::LayerSpec::relu(),
                 bl::LayerSpec::dense(2)};
  bl::Model m = bl::init_model(arch, 9);
  m.trainable = {0, 0, 1, 1};

  std::mt19937_64 rng(707);
  bl::detail::Params<float> g(m.params.size());
  for (size_t t = 0; t < m.params.size(); ++t) g[t] = random_floats(m.params[t].size(), rng);

  const auto before0 = m.params[0];
  const auto before1 = m.params[1];
  const auto head_before = m.params[2];
  bl::sgd_step(m, g, 0.1f, 0.9f, 0.1f);
  CHECK(m.params[0] == before0);
  CHECK(m.params[1] == before1);
  CHECK(m.params[2] != head_before);
  for (float v : m.momentum[0]) CHECK(v == 0.0f);
}

TEST_CASE("sgd_step with zero momentum and zero decay is plain gradient descent") {
  bl::ArchSpec arch;
  arch.in_channels = 1;
  arch.in_h = 1;
  arch.in_w = 2;
  arch.classes = 2;
  arch.layers = {bl::LayerSpec::flatten(), bl::LayerSpec::dense(2)};
  bl::Model m = bl::init_model(arch, 1);
  const auto before = m.params[0];
  bl::detail::Params<float> g(m.params.size());
  g[0] = {1.0f, -2.0f, 0.5f, 0.0f};
  g[1] = {0.0f, 0.0f};
  bl::sgd_step(m, g, 0.1f, 0.0f, 0.0f);
  for (size_t j = 0; j < before.size(); ++j) {
    CHECK(m.params[0][j] == Catch::Approx(before[j] - 0.1f * g[0][j]).margin(1e-7));
  }
}

TEST_CASE("replace_head reinitializes only the trailing dense block") {
  const bl::ArchSpec arch = bl::reference_arch(1, 10, 10, 5);
  bl::Model m = bl::init_model(arch, 11);
  // Dirty the head momentum so the reset is observable.
  std::fill(m.momentum.back().begin(), m.momentum.back().end(), 0.5f);

  const auto body0 = m.params[0];
  const auto body2 = m.params[2];
  bl::replace_head(m, 3, 99);

  CHECK(m.arch.classes == 3);
  CHECK(m.arch.layers.back().dense_out == 3);
  CHECK(m.params[0] == body0);
  CHECK(m.params[2] == body2);

  const auto shapes = bl::param_shapes(m.arch);
  CHECK(m.params[m.params.size() - 2].size() ==
        static_cast<size_t>(shapes[shapes.size() - 2][0]) *
            static_cast<size_t>(shapes[shapes.size() - 2][1]));
  CHECK(m.params.back().size() == 3);
  for (float v : m.params.back()) CHECK(v == 0.0f);
  for (float v : m.momentum.back()) CHECK(v == 0.0f);

  // Deterministic in the head seed.
  bl::Model m2 = bl::init_model(arch, 11);
  bl::replace_head(m2, 3, 99);
  CHECK(m2.params[m2.params.size() - 2] == m.params[m.params.size() - 2]);

  // A model whose tail is not dense is rejected.
  bl::Model bad = bl::init_model(arch, 1);
  bad.arch.layers.back().kind = bl::LayerSpec::Kind::flatten;
  REQUIRE_THROWS_AS(bl::replace_head(bad, 3, 1), bl::Error);
}

TEST_CASE("model serialization round-trips bit-exactly") {
  const bl::ArchSpec arch = bl::reference_arch(1, 12, 12, 4);
  bl::Model m = bl::init_model(arch, 21);
  // Make the state nontrivial: momentum filled (it must NOT survive the round
  // trip; the container stores parameters only), one tensor frozen.
  std::mt19937_64 rng(808);
  for (auto& t : m.momentum) t = random_floats(t.size(), rng);
  m.trainable[1] = 0;

  const std::string bytes = bl::serialize_model(m);
  CHECK(bl::serialize_model(m) == bytes);  // deterministic serialization

  const bl::Model back = bl::deserialize_model(bytes);
  CHECK(back.arch == m.arch);
  REQUIRE(back.params.size() == m.params.size());
  for (size_t t = 0; t < m.params.size(); ++t) {
    CHECK(back.params[t] == m.params[t]);
    CHECK(back.momentum[t].size() == m.params[t].size());
    for (float v : back.momentum[t]) CHECK(v == 0.0f);
  }
  CHECK(back.trainable == m.trainable);

  const auto dir = std::filesystem::temp_directory_path() / "backlab_test_model_io";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.bfm").string();
  bl::save_model(m, path);
  const bl::Model loaded = bl::load_model(path);
  CHECK(bl::serialize_model(loaded) == bytes);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model deserialization rejects corrupt containers") {
  const bl::ArchSpec arch = bl::reference_arch(1, 10, 10, 3);
  const bl::Model m = bl::init_model(arch, 5);
  std::string bytes = bl::serialize_model(m);

  SECTION("bad magic") {
    bytes[0] = 'X';
    try {
      bl::deserialize_model(bytes);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("truncated payload") {
    bytes.resize(bytes.size() / 2);
    try {
      bl::deserialize_model(bytes);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("trailing garbage") {
    bytes += "extra";
    try {
      bl::deserialize_model(bytes);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("future container version") {
    bytes[3] = '9';
    try {
      bl::deserialize_model(bytes);
      FAIL("expected an unsupported-version error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::unsupported);
    }
  }
}

TEST_CASE("forward rejects mismatched batch geometry") {
  const bl::ArchSpec arch = bl::reference_arch(1, 10, 10, 3);
  const bl::Model m = bl::init_model(arch, 1);
  bl::Batch b;
  b.images = bl::Tensor({1, 1, 9, 9});
  b.labels = {0};
  REQUIRE_THROWS_AS(bl::forward(m, b), bl::Error);
}
