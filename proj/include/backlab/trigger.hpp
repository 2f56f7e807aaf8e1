#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "backlab/dct.hpp"
#include "backlab/errors.hpp"
#include "backlab/tensor.hpp"

namespace backlab {

// Four trigger families. All are pure functions of (image, spec): the seeded
// ones fix their pattern/field once per spec, not per call.
struct TriggerSpec {
  enum class Kind { patch, blended, lowfreq, warp };
  Kind kind = Kind::patch;

  // patch: solid square written over the image, every channel.
  int patch_size = 3;
  int patch_row = -1;  // top-left corner; -1 means flush to the bottom edge
  int patch_col = -1;  // -1 means flush to the right edge
  float patch_value = 1.0f;

  // blended: convex blend with a seeded per-pixel noise image.
  uint64_t blend_seed = 7;
  double blend_alpha = 0.2;

  // lowfreq: additive pattern whose DCT support is the band u+v <= lf_bands,
  // DC excluded, scaled to a peak magnitude of lf_amplitude.
  int lf_bands = 2;
  double lf_amplitude = 0.15;

  // warp: coarse seeded displacement grid, bilinearly upsampled, applied as
  // a backward warp with border clamping.
  int warp_grid = 4;
  double warp_strength = 0.5;
  uint64_t warp_seed = 11;

  static TriggerSpec patch(int size = 3, int row = -1, int col = -1, float value = 1.0f) {
    TriggerSpec t;
    t.kind = Kind::patch;
    t.patch_size = size;
    t.patch_row = row;
    t.patch_col = col;
    t.patch_value = value;
    return t;
  }
  static TriggerSpec blended(double alpha = 0.2, uint64_t seed = 7) {
    TriggerSpec t;
    t.kind = Kind::blended;
    t.blend_alpha = alpha;
    t.blend_seed = seed;
    return t;
  }
  static TriggerSpec lowfreq(int bands = 2, double amplitude = 0.15) {
    TriggerSpec t;
    t.kind = Kind::lowfreq;
    t.lf_bands = bands;
    t.lf_amplitude = amplitude;
    return t;
  }
  static TriggerSpec warp(int grid = 4, double strength = 0.5, uint64_t seed = 11) {
    TriggerSpec t;
    t.kind = Kind::warp;
    t.warp_grid = grid;
    t.warp_strength = strength;
    t.warp_seed = seed;
    return t;
  }
};

inline const char* trigger_kind_name(TriggerSpec::Kind k) {
  switch (k) {
    case TriggerSpec::Kind::patch: return "patch";
    case TriggerSpec::Kind::blended: return "blended";
    case TriggerSpec::Kind::lowfreq: return "lowfreq";
    case TriggerSpec::Kind::warp: return "warp";
  }
  return "?";
}

inline void validate_trigger(const TriggerSpec& t, int c, int h, int w) {
  require(c >= 1 && h >= 1 && w >= 1, ErrKind::shape, "trigger target shape must be positive");
  switch (t.kind) {
    case TriggerSpec::Kind::patch: {
      require(t.patch_size >= 1, ErrKind::geometry, "patch size must be positive");
      const int row = t.patch_row < 0 ? h - t.patch_size : t.patch_row;
      const int col = t.patch_col < 0 ? w - t.patch_size : t.patch_col;
      require(row >= 0 && col >= 0 && row + t.patch_size <= h && col + t.patch_size <= w,
              ErrKind::geometry,
              "patch of size " + std::to_string(t.patch_size) + " at (" + std::to_string(row) +
                  "," + std::to_string(col) + ") does not fit a " + std::to_string(h) + "x" +
                  std::to_string(w) + " image");
      break;
    }
    case TriggerSpec::Kind::blended:
      require(t.blend_alpha > 0.0 && t.blend_alpha < 1.0, ErrKind::config,
              "blend alpha must lie strictly inside (0,1)");
      break;
    case TriggerSpec::Kind::lowfreq:
      require(t.lf_bands >= 1, ErrKind::config, "low-frequency band count must be >= 1");
      require(t.lf_amplitude > 0.0, ErrKind::config, "low-frequency amplitude must be positive");
      break;
    case TriggerSpec::Kind::warp:
      require(t.warp_grid >= 2, ErrKind::config, "warp grid must be at least 2x2");
      require(t.warp_strength >= 0.0, ErrKind::config, "warp strength must be non-negative");
      break;
  }
}

// Seeded blend pattern, one value per (channel, pixel), uniform in [0,1].
inline std::vector<float> blend_pattern(int c, int h, int w, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<float> p(static_cast<size_t>(c) * h * w);
  for (float& v : p) v = static_cast<float>(u(rng));
  return p;
}

// Additive low-frequency pattern for one h*w plane. Every DCT coefficient
// with 0 < u+v <= bands is set, then the plane is scaled so its largest
// magnitude equals `amplitude`. Scaling preserves the spectral support.
inline std::vector<float> lowfreq_pattern(int h, int w, int bands, double amplitude) {
  std::vector<double> spect(static_cast<size_t>(h) * w, 0.0);
  for (int v = 0; v < h && v <= bands; ++v) {
    for (int u = 0; u < w && u + v <= bands; ++u) {
      if (u == 0 && v == 0) continue;
      spect[static_cast<size_t>(v) * w + u] = 1.0;
    }
  }
  std::vector<double> img = idct2(spect, h, w);
  double peak = 0.0;
  for (double p : img) peak = std::max(peak, std::abs(p));
  require(peak > 0.0, ErrKind::geometry,
          "low-frequency pattern is empty; image too small for the band count");
  std::vector<float> out(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<float>(img[i] / peak * amplitude);
  }
  return out;
}

// Dense displacement field (dy, dx) per pixel, bilinearly upsampled from a
// seeded warp_grid x warp_grid corner grid with entries in
// [-strength, strength] pixels.
inline std::pair<std::vector<float>, std::vector<float>> warp_field(int h, int w,
                                                                    const TriggerSpec& t) {
  const int g = t.warp_grid;
  std::mt19937_64 rng(t.warp_seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> gy(static_cast<size_t>(g) * g), gx(static_cast<size_t>(g) * g);
  for (auto& v : gy) v = u(rng) * t.warp_strength;
  for (auto& v : gx) v = u(rng) * t.warp_strength;

  auto sample_grid = [&](const std::vector<double>& grid, double fy, double fx) {
    const int y0 = std::min(static_cast<int>(fy), g - 2);
    const int x0 = std::min(static_cast<int>(fx), g - 2);
    const double ay = fy - y0, ax = fx - x0;
    const double v00 = grid[static_cast<size_t>(y0) * g + x0];
    const double v01 = grid[static_cast<size_t>(y0) * g + x0 + 1];
    const double v10 = grid[static_cast<size_t>(y0 + 1) * g + x0];
    const double v11 = grid[static_cast<size_t>(y0 + 1) * g + x0 + 1];
    return (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
  };

  std::vector<float> dy(static_cast<size_t>(h) * w), dx(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double fy = h > 1 ? static_cast<double>(y) / (h - 1) * (g - 1) : 0.0;
      const double fx = w > 1 ? static_cast<double>(x) / (w - 1) * (g - 1) : 0.0;
      dy[static_cast<size_t>(y) * w + x] = static_cast<float>(sample_grid(gy, fy, fx));
      dx[static_cast<size_t>(y) * w + x] = static_cast<float>(sample_grid(gx, fy, fx));
    }
  }
  return {std::move(dy), std::move(dx)};
}

// Applies the trigger to one (c,h,w) image. Output stays in [0,1].
inline Tensor apply_trigger(const Tensor& image, const TriggerSpec& t) {
  require(image.shape.size() == 3, ErrKind::shape,
          "apply_trigger expects a (c,h,w) image, got " + shape_str(image.shape));
  const int c = image.shape[0], h = image.shape[1], w = image.shape[2];
  validate_trigger(t, c, h, w);
  Tensor out = image;
  switch (t.kind) {
    case TriggerSpec::Kind::patch: {
      const int row = t.patch_row < 0 ? h - t.patch_size : t.patch_row;
      const int col = t.patch_col < 0 ? w - t.patch_size : t.patch_col;
      const float v = std::clamp(t.patch_value, 0.0f, 1.0f);
      for (int ch = 0; ch < c; ++ch) {
        for (int y = row; y < row + t.patch_size; ++y) {
          for (int x = col; x < col + t.patch_size; ++x) {
            out.data[(static_cast<size_t>(ch) * h + y) * w + x] = v;
          }
        }
      }
      break;
    }
    case TriggerSpec::Kind::blended: {
      const std::vector<float> p = blend_pattern(c, h, w, t.blend_seed);
      const float a = static_cast<float>(t.blend_alpha);
      for (size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] = std::clamp((1.0f - a) * out.data[i] + a * p[i], 0.0f, 1.0f);
      }
      break;
    }
    case TriggerSpec::Kind::lowfreq: {
      const std::vector<float> p = lowfreq_pattern(h, w, t.lf_bands, t.lf_amplitude);
      for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h * w; ++i) {
          float& px = out.data[static_cast<size_t>(ch) * h * w + static_cast<size_t>(i)];
          px = std::clamp(px + p[static_cast<size_t>(i)], 0.0f, 1.0f);
        }
      }
      break;
    }
    case TriggerSpec::Kind::warp: {
      const auto [dy, dx] = warp_field(h, w, t);
      for (int ch = 0; ch < c; ++ch) {
        const float* src = image.data.data() + static_cast<size_t>(ch) * h * w;
        float* dst = out.data.data() + static_cast<size_t>(ch) * h * w;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const double sy = std::clamp(
                static_cast<double>(y) + dy[static_cast<size_t>(y) * w + x], 0.0,
                static_cast<double>(h - 1));
            const double sx = std::clamp(
                static_cast<double>(x) + dx[static_cast<size_t>(y) * w + x], 0.0,
                static_cast<double>(w - 1));
            const int y0 = std::min(static_cast<int>(sy), h - 2 >= 0 ? h - 2 : 0);
            const int x0 = std::min(static_cast<int>(sx), w - 2 >= 0 ? w - 2 : 0);
            const double ay = sy - y0, ax = sx - x0;
            const int y1 = std::min(y0 + 1, h - 1);
            const int x1 = std::min(x0 + 1, w - 1);
            const double v = (1 - ay) * ((1 - ax) * src[y0 * w + x0] + ax * src[y0 * w + x1]) +
                             ay * ((1 - ax) * src[y1 * w + x0] + ax * src[y1 * w + x1]);
            dst[static_cast<size_t>(y) * w + x] =
                static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace backlab
