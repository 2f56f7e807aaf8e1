#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "backlab/errors.hpp"

namespace backlab {

// Dense row-major float32 tensor. Shapes are small (at most 4-d here), so
// plain vectors keep the engine simple and value-semantic.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_numel(shape), 0.0f) {}
  Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    require(static_cast<int64_t>(data.size()) == checked_numel(shape), ErrKind::shape,
            "tensor data length does not match shape product");
  }

  static int64_t checked_numel(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      require(d >= 0, ErrKind::shape, "negative tensor dimension");
      n *= d;
    }
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (float v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

// A batch of images (n, c, h, w) with integer class labels.
struct Batch {
  Tensor images;
  std::vector<int> labels;

  int n() const { return images.shape.empty() ? 0 : images.shape[0]; }
};

inline void validate_batch(const Batch& b, int class_count) {
  require(b.images.shape.size() == 4, ErrKind::shape,
          "batch images must be (n,c,h,w), got " + shape_str(b.images.shape));
  require(static_cast<int>(b.labels.size()) == b.n(), ErrKind::shape,
          "batch label count does not match image count");
  for (int y : b.labels) {
    require(y >= 0 && y < class_count, ErrKind::shape,
            "label " + std::to_string(y) + " outside [0," + std::to_string(class_count) + ")");
  }
}

}  // namespace backlab
