#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "backlab/errors.hpp"

namespace backlab {

struct LayerSpec {
  enum class Kind { conv, relu, maxpool, flatten, dense };
  Kind kind{};
  int conv_out = 0;
  int conv_kernel = 0;
  int conv_stride = 1;
  int pool_k = 0;
  int dense_out = 0;

  static LayerSpec conv(int out, int kernel, int stride = 1) {
    LayerSpec l;
    l.kind = Kind::conv;
    l.conv_out = out;
    l.conv_kernel = kernel;
    l.conv_stride = stride;
    return l;
  }
  static LayerSpec relu() {
    LayerSpec l;
    l.kind = Kind::relu;
    return l;
  }
  static LayerSpec maxpool(int k) {
    LayerSpec l;
    l.kind = Kind::maxpool;
    l.pool_k = k;
    return l;
  }
  static LayerSpec flatten() {
    LayerSpec l;
    l.kind = Kind::flatten;
    return l;
  }
  static LayerSpec dense(int out) {
    LayerSpec l;
    l.kind = Kind::dense;
    l.dense_out = out;
    return l;
  }

  bool operator==(const LayerSpec&) const = default;
};

// Activation shape between layers: (c,h,w) spatially, or a flat vector of
// length c after flatten/dense.
struct ActShape {
  int c = 0;
  int h = 1;
  int w = 1;
  bool flat = false;
  int64_t count() const { return static_cast<int64_t>(c) * h * w; }
};

struct ArchSpec {
  int in_channels = 1;
  int in_h = 0;
  int in_w = 0;
  int classes = 0;
  std::vector<LayerSpec> layers;

  bool operator==(const ArchSpec&) const = default;
};

// Walks the layer list and returns the activation shape after every layer
// (index 0 is the input shape). Throws on any inconsistent chaining.
inline std::vector<ActShape> chain_shapes(const ArchSpec& a) {
  require(a.in_channels >= 1 && a.in_h >= 1 && a.in_w >= 1, ErrKind::shape,
          "arch input shape must be positive");
  std::vector<ActShape> shapes;
  shapes.push_back({a.in_channels, a.in_h, a.in_w, false});
  for (size_t i = 0; i < a.layers.size(); ++i) {
    const LayerSpec& l = a.layers[i];
    ActShape cur = shapes.back();
    const std::string at = "layer " + std::to_string(i);
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        require(!cur.flat, ErrKind::shape, at + ": conv after flatten");
        require(l.conv_out >= 1 && l.conv_kernel >= 1 && l.conv_stride >= 1, ErrKind::shape,
                at + ": conv parameters must be positive");
        require(l.conv_kernel <= cur.h && l.conv_kernel <= cur.w, ErrKind::shape,
                at + ": conv kernel larger than input");
        ActShape nxt;
        nxt.c = l.conv_out;
        nxt.h = (cur.h - l.conv_kernel) / l.conv_stride + 1;
        nxt.w = (cur.w - l.conv_kernel) / l.conv_stride + 1;
        shapes.push_back(nxt);
        break;
      }
      case LayerSpec::Kind::relu:
        shapes.push_back(cur);
        break;
      case LayerSpec::Kind::maxpool: {
        require(!cur.flat, ErrKind::shape, at + ": maxpool after flatten");
        require(l.pool_k >= 1, ErrKind::shape, at + ": pool size must be positive");
        ActShape nxt;
        nxt.c = cur.c;
        nxt.h = cur.h / l.pool_k;
        nxt.w = cur.w / l.pool_k;
        require(nxt.h >= 1 && nxt.w >= 1, ErrKind::shape, at + ": pool collapses activation to zero");
        shapes.push_back(nxt);
        break;
      }
      case LayerSpec::Kind::flatten: {
        require(!cur.flat, ErrKind::shape, at + ": flatten twice");
        ActShape nxt;
        nxt.c = static_cast<int>(cur.count());
        nxt.flat = true;
        shapes.push_back(nxt);
        break;
      }
      case LayerSpec::Kind::dense: {
        require(cur.flat, ErrKind::shape, at + ": dense requires a flattened input");
        require(l.dense_out >= 1, ErrKind::shape, at + ": dense width must be positive");
        ActShape nxt;
        nxt.c = l.dense_out;
        nxt.flat = true;
        shapes.push_back(nxt);
        break;
      }
    }
  }
  return shapes;
}

inline void validate_arch(const ArchSpec& a) {
  require(a.classes >= 2, ErrKind::shape, "arch must declare at least 2 classes");
  require(!a.layers.empty(), ErrKind::shape, "arch has no layers");
  auto shapes = chain_shapes(a);
  require(a.layers.back().kind == LayerSpec::Kind::dense, ErrKind::shape,
          "arch must end with a dense layer");
  require(shapes.back().c == a.classes, ErrKind::shape,
          "final dense width " + std::to_string(shapes.back().c) + " != class count " +
              std::to_string(a.classes));
}

// Small conv net used throughout the desk-scale experiments.
inline ArchSpec reference_arch(int channels, int h, int w, int classes) {
  ArchSpec a;
  a.in_channels = channels;
  a.in_h = h;
  a.in_w = w;
  a.classes = classes;
  a.layers = {LayerSpec::conv(8, 3, 1),  LayerSpec::relu(), LayerSpec::maxpool(2),
              LayerSpec::conv(16, 3, 1), LayerSpec::relu(), LayerSpec::maxpool(2),
              LayerSpec::flatten(),      LayerSpec::dense(classes)};
  validate_arch(a);
  return a;
}

// Per-layer parameter tensor shapes, in declaration order.
// conv contributes W(out,in,k,k) and b(out); dense contributes W(out,in) and b(out).
inline std::vector<std::vector<int>> param_shapes(const ArchSpec& a) {
  auto shapes = chain_shapes(a);
  std::vector<std::vector<int>> out;
  for (size_t i = 0; i < a.layers.size(); ++i) {
    const LayerSpec& l = a.layers[i];
    const ActShape& in = shapes[i];
    if (l.kind == LayerSpec::Kind::conv) {
      out.push_back({l.conv_out, in.c, l.conv_kernel, l.conv_kernel});
      out.push_back({l.conv_out});
    } else if (l.kind == LayerSpec::Kind::dense) {
      out.push_back({l.dense_out, in.c});
      out.push_back({l.dense_out});
    }
  }
  return out;
}

}  // namespace backlab
