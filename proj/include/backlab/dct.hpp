#pragma once

#include <cmath>
#include <vector>

#include "backlab/errors.hpp"

namespace backlab {

// Orthonormal 2D DCT-II and its inverse on a single h*w channel, row-major.
// The transform is separable; these are plain O(n^3) loops, fine at the image
// sizes this library works with.
namespace detail {

inline std::vector<double> dct_basis(int n) {
  std::vector<double> c(static_cast<size_t>(n) * n);
  const double pi = std::acos(-1.0);
  for (int k = 0; k < n; ++k) {
    const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / n);
    for (int i = 0; i < n; ++i) {
      c[static_cast<size_t>(k) * n + i] = scale * std::cos(pi * (2 * i + 1) * k / (2.0 * n));
    }
  }
  return c;
}

}  // namespace detail

inline std::vector<double> dct2(const std::vector<double>& img, int h, int w) {
  require(static_cast<int>(img.size()) == h * w, ErrKind::shape, "dct2 size mismatch");
  const auto ch = detail::dct_basis(h);
  const auto cw = detail::dct_basis(w);
  // Rows first.
  std::vector<double> tmp(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int x = 0; x < w; ++x) acc += cw[static_cast<size_t>(u) * w + x] * img[static_cast<size_t>(y) * w + x];
      tmp[static_cast<size_t>(y) * w + u] = acc;
    }
  }
  std::vector<double> out(img.size(), 0.0);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double acc = 0.0;
      for (int y = 0; y < h; ++y) acc += ch[static_cast<size_t>(v) * h + y] * tmp[static_cast<size_t>(y) * w + u];
      out[static_cast<size_t>(v) * w + u] = acc;
    }
  }
  return out;
}

inline std::vector<double> idct2(const std::vector<double>& coef, int h, int w) {
  require(static_cast<int>(coef.size()) == h * w, ErrKind::shape, "idct2 size mismatch");
  const auto ch = detail::dct_basis(h);
  const auto cw = detail::dct_basis(w);
  std::vector<double> tmp(coef.size(), 0.0);
  for (int v = 0; v < h; ++v) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int u = 0; u < w; ++u) acc += cw[static_cast<size_t>(u) * w + x] * coef[static_cast<size_t>(v) * w + u];
      tmp[static_cast<size_t>(v) * w + x] = acc;
    }
  }
  std::vector<double> out(coef.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int v = 0; v < h; ++v) acc += ch[static_cast<size_t>(v) * h + y] * tmp[static_cast<size_t>(v) * w + x];
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

}  // namespace backlab
