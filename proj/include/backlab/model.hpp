#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "backlab/arch.hpp"
#include "backlab/errors.hpp"
#include "backlab/ops.hpp"
#include "backlab/tensor.hpp"

namespace backlab {

// Parameter tensors live in declaration order (conv W, conv b, ..., dense W,
// dense b). Momentum buffers mirror them; trainable[i] == 0 freezes tensor i.
struct Model {
  ArchSpec arch;
  detail::Params<float> params;
  detail::Params<float> momentum;
  std::vector<uint8_t> trainable;

  size_t tensor_count() const { return params.size(); }
};

namespace detail {

// Rank 1 tensors are biases. Conv weights are (out,in,k,k) with receptive
// field folded into both fans; dense weights are (out,in).
inline double glorot_limit(const std::vector<int>& shape) {
  double fan_in = 0.0, fan_out = 0.0;
  if (shape.size() == 4) {
    const double rf = static_cast<double>(shape[2]) * shape[3];
    fan_in = shape[1] * rf;
    fan_out = shape[0] * rf;
  } else if (shape.size() == 2) {
    fan_in = shape[1];
    fan_out = shape[0];
  } else {
    fail(ErrKind::shape, "weight tensor must have rank 2 or 4");
  }
  return std::sqrt(6.0 / (fan_in + fan_out));
}

inline size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

}  // namespace detail

inline Model init_model(const ArchSpec& arch, uint64_t seed) {
  validate_arch(arch);
  Model m;
  m.arch = arch;
  std::mt19937_64 rng(seed);
  for (const std::vector<int>& shape : param_shapes(arch)) {
    std::vector<float> t(detail::shape_numel(shape), 0.0f);
    if (shape.size() > 1) {
      const double limit = detail::glorot_limit(shape);
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (float& v : t) v = static_cast<float>(dist(rng));
    }
    m.params.push_back(std::move(t));
  }
  m.momentum.resize(m.params.size());
  for (size_t i = 0; i < m.params.size(); ++i) m.momentum[i].assign(m.params[i].size(), 0.0f);
  m.trainable.assign(m.params.size(), 1);
  return m;
}

inline std::vector<float> forward(const Model& m, const Batch& batch) {
  validate_batch(batch, m.arch.classes);
  require(batch.images.shape[1] == m.arch.in_channels && batch.images.shape[2] == m.arch.in_h &&
              batch.images.shape[3] == m.arch.in_w,
          ErrKind::shape, "batch image shape does not match model input " + shape_str({-1,
              m.arch.in_channels, m.arch.in_h, m.arch.in_w}));
  std::vector<float> input(batch.images.data.begin(), batch.images.data.end());
  auto cache = detail::forward_pass<float>(m.arch, m.params, input, batch.n());
  return cache.acts.back();
}

// Argmax per row; ties resolve to the lowest class index.
inline std::vector<int> predict(const Model& m, const Batch& batch) {
  std::vector<float> logits = forward(m, batch);
  const int n = batch.n();
  const int k = m.arch.classes;
  std::vector<int> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + static_cast<int64_t>(i) * k;
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

struct BackwardResult {
  float loss = 0.0f;
  detail::Params<float> grads;
};

// Loss may come back non-finite after a destabilizing step; callers that
// drive optimization decide how to report that.
inline BackwardResult backward(const Model& m, const Batch& batch) {
  validate_batch(batch, m.arch.classes);
  std::vector<float> input(batch.images.data.begin(), batch.images.data.end());
  auto cache = detail::forward_pass<float>(m.arch, m.params, input, batch.n());
  auto bw = detail::backward_pass<float>(m.arch, m.params, cache, batch.labels);
  BackwardResult r;
  r.loss = bw.loss;
  r.grads = std::move(bw.grads);
  return r;
}

// SGD with momentum and L2 weight decay: v <- mu*v + g + wd*p; p <- p - lr*v.
// Decay is folded into the gradient before the momentum update, so it reaches
// units the data never activates. Frozen tensors keep both their parameters
// and their momentum untouched.
inline void sgd_step(Model& m, const detail::Params<float>& grads, float lr, float mu,
                     float wd = 0.0f) {
  require(lr >= 0.0f, ErrKind::config, "learning rate must be non-negative");
  require(wd >= 0.0f, ErrKind::config, "weight decay must be non-negative");
  require(grads.size() == m.params.size(), ErrKind::shape, "gradient tensor count mismatch");
  for (size_t i = 0; i < m.params.size(); ++i) {
    if (!m.trainable[i]) continue;
    require(grads[i].size() == m.params[i].size(), ErrKind::shape,
            "gradient size mismatch at tensor " + std::to_string(i));
    std::vector<float>& p = m.params[i];
    std::vector<float>& v = m.momentum[i];
    const std::vector<float>& g = grads[i];
    for (size_t j = 0; j < p.size(); ++j) {
      v[j] = mu * v[j] + g[j] + wd * p[j];
      p[j] -= lr * v[j];
    }
  }
}

// Swaps the trailing dense block for a freshly initialized one with new_k
// outputs; everything upstream is untouched and the new block's momentum
// starts at zero. Models whose last layer is not dense are rejected.
inline void replace_head(Model& m, int new_k, uint64_t seed) {
  require(!m.arch.layers.empty() && m.arch.layers.back().kind == LayerSpec::Kind::dense,
          ErrKind::unsupported, "replace_head requires a trailing dense layer");
  require(new_k >= 2, ErrKind::config, "replacement head needs at least 2 classes");
  m.arch.layers.back().dense_out = new_k;
  m.arch.classes = new_k;
  validate_arch(m.arch);

  const auto shapes = param_shapes(m.arch);
  const size_t wi = m.params.size() - 2;
  const size_t bi = m.params.size() - 1;
  m.params[wi].assign(detail::shape_numel(shapes[wi]), 0.0f);
  m.params[bi].assign(detail::shape_numel(shapes[bi]), 0.0f);
  std::mt19937_64 rng(seed);
  const double limit = detail::glorot_limit(shapes[wi]);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (float& v : m.params[wi]) v = static_cast<float>(dist(rng));
  m.momentum[wi].assign(m.params[wi].size(), 0.0f);
  m.momentum[bi].assign(m.params[bi].size(), 0.0f);
}

}  // namespace backlab
