#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "backlab/arch.hpp"
#include "backlab/errors.hpp"

// Low-level forward/backward kernels. Templated on the scalar so that
// training runs in float32 while the finite-difference oracle runs the same
// code paths in float64.
namespace backlab::detail {

template <class S>
using Params = std::vector<std::vector<S>>;

template <class S>
struct ForwardCache {
  int n = 0;
  // acts[0] is the input batch; acts[i+1] is the output of layer i.
  std::vector<std::vector<S>> acts;
  // For each maxpool layer (in encounter order): flat index into the layer's
  // input chosen for every output element.
  std::vector<std::vector<int64_t>> pool_argmax;
};

template <class S>
void conv_forward(const S* in, int n, int ic, int ih, int iw, const S* w, const S* b, int oc,
                  int k, int stride, S* out, int oh, int ow) {
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < oc; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          S acc = b[o];
          for (int c = 0; c < ic; ++c) {
            const S* wrow = w + ((static_cast<int64_t>(o) * ic + c) * k) * k;
            const S* irow = in + ((static_cast<int64_t>(i) * ic + c) * ih + oy * stride) * iw +
                            ox * stride;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                acc += wrow[ky * k + kx] * irow[ky * iw + kx];
              }
            }
          }
          out[((static_cast<int64_t>(i) * oc + o) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

template <class S>
void conv_backward(const S* in, int n, int ic, int ih, int iw, const S* w, int oc, int k,
                   int stride, const S* dout, int oh, int ow, S* din, S* dw, S* db) {
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < oc; ++o) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const S g = dout[((static_cast<int64_t>(i) * oc + o) * oh + oy) * ow + ox];
          db[o] += g;
          for (int c = 0; c < ic; ++c) {
            const int64_t wbase = ((static_cast<int64_t>(o) * ic + c) * k) * k;
            const int64_t ibase = ((static_cast<int64_t>(i) * ic + c) * ih + oy * stride) * iw +
                                  ox * stride;
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                dw[wbase + ky * k + kx] += g * in[ibase + ky * iw + kx];
                din[ibase + ky * iw + kx] += g * w[wbase + ky * k + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <class S>
void maxpool_forward(const S* in, int n, int c, int ih, int iw, int k, S* out, int oh, int ow,
                     int64_t* argmax) {
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          int64_t best_idx = -1;
          S best = S(0);
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int64_t idx =
                  ((static_cast<int64_t>(i) * c + ch) * ih + oy * k + ky) * iw + ox * k + kx;
              const S v = in[idx];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          const int64_t oidx = ((static_cast<int64_t>(i) * c + ch) * oh + oy) * ow + ox;
          out[oidx] = best;
          argmax[oidx] = best_idx;
        }
      }
    }
  }
}

template <class S>
void dense_forward(const S* in, int n, int din, const S* w, const S* b, int dout, S* out) {
  for (int i = 0; i < n; ++i) {
    const S* row = in + static_cast<int64_t>(i) * din;
    for (int o = 0; o < dout; ++o) {
      S acc = b[o];
      const S* wrow = w + static_cast<int64_t>(o) * din;
      for (int d = 0; d < din; ++d) acc += wrow[d] * row[d];
      out[static_cast<int64_t>(i) * dout + o] = acc;
    }
  }
}

template <class S>
void dense_backward(const S* in, int n, int din, const S* w, int dout, const S* dgrad, S* dinp,
                    S* dw, S* db) {
  for (int i = 0; i < n; ++i) {
    const S* row = in + static_cast<int64_t>(i) * din;
    S* drow = dinp + static_cast<int64_t>(i) * din;
    for (int o = 0; o < dout; ++o) {
      const S g = dgrad[static_cast<int64_t>(i) * dout + o];
      db[o] += g;
      const S* wrow = w + static_cast<int64_t>(o) * din;
      S* dwrow = dw + static_cast<int64_t>(o) * din;
      for (int d = 0; d < din; ++d) {
        dwrow[d] += g * row[d];
        drow[d] += g * wrow[d];
      }
    }
  }
}

template <class S>
ForwardCache<S> forward_pass(const ArchSpec& arch, const Params<S>& params,
                             const std::vector<S>& input, int n) {
  auto shapes = chain_shapes(arch);
  ForwardCache<S> cache;
  cache.n = n;
  cache.acts.reserve(arch.layers.size() + 1);
  cache.acts.push_back(input);
  size_t p = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    const ActShape& si = shapes[i];
    const ActShape& so = shapes[i + 1];
    const std::vector<S>& in = cache.acts.back();
    std::vector<S> out(static_cast<size_t>(n) * so.count());
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        const std::vector<S>& w = params[p++];
        const std::vector<S>& b = params[p++];
        conv_forward(in.data(), n, si.c, si.h, si.w, w.data(), b.data(), so.c, l.conv_kernel,
                     l.conv_stride, out.data(), so.h, so.w);
        break;
      }
      case LayerSpec::Kind::relu:
        for (size_t j = 0; j < in.size(); ++j) out[j] = in[j] > S(0) ? in[j] : S(0);
        break;
      case LayerSpec::Kind::maxpool: {
        std::vector<int64_t> argmax(out.size());
        maxpool_forward(in.data(), n, si.c, si.h, si.w, l.pool_k, out.data(), so.h, so.w,
                        argmax.data());
        cache.pool_argmax.push_back(std::move(argmax));
        break;
      }
      case LayerSpec::Kind::flatten:
        out = in;
        break;
      case LayerSpec::Kind::dense: {
        const std::vector<S>& w = params[p++];
        const std::vector<S>& b = params[p++];
        dense_forward(in.data(), n, si.c, w.data(), b.data(), so.c, out.data());
        break;
      }
    }
    cache.acts.push_back(std::move(out));
  }
  return cache;
}

// Mean softmax cross-entropy over the batch. Fills dlogits with the loss
// gradient (already divided by n) when non-null.
template <class S>
S softmax_ce(const std::vector<S>& logits, int n, int k, const std::vector<int>& labels,
             std::vector<S>* dlogits) {
  S total = S(0);
  if (dlogits) dlogits->assign(logits.size(), S(0));
  for (int i = 0; i < n; ++i) {
    const S* row = logits.data() + static_cast<int64_t>(i) * k;
    S mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    S sum = S(0);
    for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
    const S logsum = std::log(sum) + mx;
    total += logsum - row[labels[i]];
    if (dlogits) {
      S* drow = dlogits->data() + static_cast<int64_t>(i) * k;
      for (int j = 0; j < k; ++j) {
        drow[j] = std::exp(row[j] - logsum) / S(n);
      }
      drow[labels[i]] -= S(1) / S(n);
    }
  }
  return total / S(n);
}

// Softmax probabilities per sample (row-normalized).
template <class S>
std::vector<S> softmax_rows(const std::vector<S>& logits, int n, int k) {
  std::vector<S> out(logits.size());
  for (int i = 0; i < n; ++i) {
    const S* row = logits.data() + static_cast<int64_t>(i) * k;
    S* orow = out.data() + static_cast<int64_t>(i) * k;
    S mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    S sum = S(0);
    for (int j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (int j = 0; j < k; ++j) orow[j] /= sum;
  }
  return out;
}

template <class S>
struct BackwardOut {
  S loss = S(0);
  Params<S> grads;
};

template <class S>
BackwardOut<S> backward_pass(const ArchSpec& arch, const Params<S>& params,
                             const ForwardCache<S>& cache, const std::vector<int>& labels) {
  auto shapes = chain_shapes(arch);
  const int n = cache.n;
  BackwardOut<S> out;
  out.grads.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) out.grads[i].assign(params[i].size(), S(0));

  std::vector<S> delta;
  out.loss = softmax_ce(cache.acts.back(), n, arch.classes, labels, &delta);

  // Parameter index just past the last tensor of each layer, walking forward.
  std::vector<size_t> pidx(arch.layers.size() + 1, 0);
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const LayerSpec& l = arch.layers[i];
    pidx[i + 1] = pidx[i] + ((l.kind == LayerSpec::Kind::conv || l.kind == LayerSpec::Kind::dense)
                                 ? 2
                                 : 0);
  }
  int pool_cursor = static_cast<int>(cache.pool_argmax.size());

  for (int i = static_cast<int>(arch.layers.size()) - 1; i >= 0; --i) {
    const LayerSpec& l = arch.layers[static_cast<size_t>(i)];
    const ActShape& si = shapes[static_cast<size_t>(i)];
    const std::vector<S>& in = cache.acts[static_cast<size_t>(i)];
    std::vector<S> din(in.size(), S(0));
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        const ActShape& so = shapes[static_cast<size_t>(i) + 1];
        const size_t pw = pidx[static_cast<size_t>(i)];
        conv_backward(in.data(), n, si.c, si.h, si.w, params[pw].data(), so.c, l.conv_kernel,
                      l.conv_stride, delta.data(), so.h, so.w, din.data(), out.grads[pw].data(),
                      out.grads[pw + 1].data());
        break;
      }
      case LayerSpec::Kind::relu:
        for (size_t j = 0; j < in.size(); ++j) din[j] = in[j] > S(0) ? delta[j] : S(0);
        break;
      case LayerSpec::Kind::maxpool: {
        --pool_cursor;
        const std::vector<int64_t>& argmax = cache.pool_argmax[static_cast<size_t>(pool_cursor)];
        for (size_t j = 0; j < argmax.size(); ++j) din[static_cast<size_t>(argmax[j])] += delta[j];
        break;
      }
      case LayerSpec::Kind::flatten:
        din = delta;
        break;
      case LayerSpec::Kind::dense: {
        const ActShape& so = shapes[static_cast<size_t>(i) + 1];
        const size_t pw = pidx[static_cast<size_t>(i)];
        dense_backward(in.data(), n, si.c, params[pw].data(), so.c, delta.data(), din.data(),
                       out.grads[pw].data(), out.grads[pw + 1].data());
        break;
      }
    }
    delta = std::move(din);
  }
  return out;
}

// FNV-1a hash of the piecewise-linear region the forward pass landed in:
// relu sign bits and pool argmax choices. Two parameter points in the same
// region see a smooth (in fact quadratic-free) loss between them.
template <class S>
uint64_t pattern_digest(const ArchSpec& arch, const ForwardCache<S>& cache) {
  uint64_t h = 14695981039346656037ull;
  auto mix = [&h](uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    if (arch.layers[i].kind == LayerSpec::Kind::relu) {
      for (const S& v : cache.acts[i]) mix(v > S(0) ? 1u : 0u);
    }
  }
  for (const auto& argmax : cache.pool_argmax) {
    for (int64_t v : argmax) mix(static_cast<uint64_t>(v));
  }
  return h;
}

// Loss without gradient bookkeeping; used by the finite-difference oracle.
// Optionally reports the activation-pattern digest of the evaluated point.
template <class S>
S loss_only(const ArchSpec& arch, const Params<S>& params, const std::vector<S>& input, int n,
            const std::vector<int>& labels, uint64_t* pattern = nullptr) {
  auto cache = forward_pass(arch, params, input, n);
  if (pattern) *pattern = pattern_digest(arch, cache);
  return softmax_ce<S>(cache.acts.back(), n, arch.classes, labels, nullptr);
}

}  // namespace backlab::detail
