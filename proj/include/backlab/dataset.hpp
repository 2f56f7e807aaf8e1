#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "backlab/dct.hpp"
#include "backlab/errors.hpp"
#include "backlab/tensor.hpp"

namespace backlab {

struct Dataset {
  Tensor images;  // (n, c, h, w), values in [0,1]
  std::vector<int> labels;
  int classes = 0;
  std::string name;
  std::string provenance;
  // Filled only for triggered evaluation sets, where `labels` holds the
  // scoring target and this keeps what each sample really was.
  std::vector<int> original_labels;

  int n() const { return images.shape.empty() ? 0 : images.shape[0]; }
  int channels() const { return images.shape.size() == 4 ? images.shape[1] : 0; }
  int height() const { return images.shape.size() == 4 ? images.shape[2] : 0; }
  int width() const { return images.shape.size() == 4 ? images.shape[3] : 0; }
  size_t sample_size() const {
    return static_cast<size_t>(channels()) * height() * width();
  }
};

inline void validate_dataset(const Dataset& d) {
  require(d.images.shape.size() == 4, ErrKind::shape,
          "dataset images must be (n,c,h,w), got " + shape_str(d.images.shape));
  require(static_cast<int>(d.labels.size()) == d.n(), ErrKind::shape,
          "dataset \"" + d.name + "\": label count does not match image count");
  require(d.classes >= 2, ErrKind::shape, "dataset needs at least 2 classes");
  for (int y : d.labels) {
    require(y >= 0 && y < d.classes, ErrKind::shape,
            "dataset \"" + d.name + "\": label " + std::to_string(y) + " outside [0," +
                std::to_string(d.classes) + ")");
  }
  for (float v : d.images.data) {
    require(v >= 0.0f && v <= 1.0f, ErrKind::numeric,
            "dataset \"" + d.name + "\": pixel outside [0,1]");
  }
}

inline Batch make_batch(const Dataset& d, const std::vector<int>& indices) {
  Batch b;
  const size_t ss = d.sample_size();
  b.images.shape = {static_cast<int>(indices.size()), d.channels(), d.height(), d.width()};
  b.images.data.resize(indices.size() * ss);
  b.labels.resize(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    require(idx >= 0 && idx < d.n(), ErrKind::shape, "batch index out of range");
    std::copy_n(d.images.data.begin() + static_cast<int64_t>(idx) * static_cast<int64_t>(ss), ss,
                b.images.data.begin() + static_cast<int64_t>(i) * static_cast<int64_t>(ss));
    b.labels[i] = d.labels[static_cast<size_t>(idx)];
  }
  return b;
}

inline Batch full_batch(const Dataset& d) {
  std::vector<int> all(static_cast<size_t>(d.n()));
  std::iota(all.begin(), all.end(), 0);
  return make_batch(d, all);
}

// ---------------------------------------------------------------------------
// IDX ingestion. Big-endian magic 0x00000803 for images (dims n,h,w, unsigned
// bytes) and 0x00000801 for labels. Grayscale only, treated as one channel.
// ---------------------------------------------------------------------------

namespace detail {

inline uint32_t read_u32be(std::istream& f, const std::string& path, const char* what) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  require(f.good(), ErrKind::format, "\"" + path + "\": truncated reading " + what);
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

inline void write_u32be(std::ostream& f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        int class_count) {
  std::ifstream fi(images_path, std::ios::binary);
  require(fi.good(), ErrKind::io, "cannot open \"" + images_path + "\"");
  const uint32_t imagic = detail::read_u32be(fi, images_path, "magic");
  require(imagic == 0x00000803u, ErrKind::format,
          "\"" + images_path + "\": bad image magic " + std::to_string(imagic));
  const uint32_t n = detail::read_u32be(fi, images_path, "count");
  const uint32_t h = detail::read_u32be(fi, images_path, "height");
  const uint32_t w = detail::read_u32be(fi, images_path, "width");

  std::ifstream fl(labels_path, std::ios::binary);
  require(fl.good(), ErrKind::io, "cannot open \"" + labels_path + "\"");
  const uint32_t lmagic = detail::read_u32be(fl, labels_path, "magic");
  require(lmagic == 0x00000801u, ErrKind::format,
          "\"" + labels_path + "\": bad label magic " + std::to_string(lmagic));
  const uint32_t ln = detail::read_u32be(fl, labels_path, "count");
  require(ln == n, ErrKind::format,
          "\"" + labels_path + "\": holds " + std::to_string(ln) + " labels but \"" + images_path +
              "\" holds " + std::to_string(n) + " images");

  Dataset d;
  d.classes = class_count;
  d.name = images_path;
  d.provenance = images_path + " + " + labels_path;
  d.images.shape = {static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w)};
  const size_t total = static_cast<size_t>(n) * h * w;
  std::vector<unsigned char> raw(total);
  fi.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(total));
  require(static_cast<size_t>(fi.gcount()) == total, ErrKind::format,
          "\"" + images_path + "\": truncated pixel data");
  d.images.data.resize(total);
  for (size_t i = 0; i < total; ++i) d.images.data[i] = raw[i] / 255.0f;

  std::vector<unsigned char> rawl(n);
  fl.read(reinterpret_cast<char*>(rawl.data()), static_cast<std::streamsize>(n));
  require(static_cast<size_t>(fl.gcount()) == n, ErrKind::format,
          "\"" + labels_path + "\": truncated label data");
  d.labels.assign(rawl.begin(), rawl.end());
  validate_dataset(d);
  return d;
}

inline void write_idx(const Dataset& d, const std::string& images_path,
                      const std::string& labels_path) {
  require(d.channels() == 1, ErrKind::unsupported, "IDX export supports single-channel data only");
  std::ofstream fi(images_path, std::ios::binary);
  require(fi.good(), ErrKind::io, "cannot open \"" + images_path + "\" for writing");
  detail::write_u32be(fi, 0x00000803u);
  detail::write_u32be(fi, static_cast<uint32_t>(d.n()));
  detail::write_u32be(fi, static_cast<uint32_t>(d.height()));
  detail::write_u32be(fi, static_cast<uint32_t>(d.width()));
  for (float v : d.images.data) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    fi.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0f))));
  }
  require(fi.good(), ErrKind::io, "write to \"" + images_path + "\" failed");

  std::ofstream fl(labels_path, std::ios::binary);
  require(fl.good(), ErrKind::io, "cannot open \"" + labels_path + "\" for writing");
  detail::write_u32be(fl, 0x00000801u);
  detail::write_u32be(fl, static_cast<uint32_t>(d.n()));
  for (int y : d.labels) fl.put(static_cast<char>(static_cast<unsigned char>(y)));
  require(fl.good(), ErrKind::io, "write to \"" + labels_path + "\" failed");
}

// ---------------------------------------------------------------------------
// Synthetic generator: one smooth low-frequency base pattern per class plus
// per-sample Gaussian noise. Desk-scale models separate these comfortably.
// ---------------------------------------------------------------------------

struct SyntheticOptions {
  int channels = 1;
  double noise_sigma = 0.25;
  // Base patterns use DCT coefficients with band_min <= u+v <= band_max.
  // Moving the band up yields finer textures; keeping it away from the lowest
  // bands leaves those free for low-frequency perturbation studies.
  int pattern_band_min = 1;
  int pattern_band_max = 3;
  // Base pattern range before noise; keeping it inside [0,1] leaves headroom
  // so noise is not mostly clipped away.
  double lo = 0.15;
  double hi = 0.85;
  // Final clamp range. A clip_hi below 1.0 reserves the top of the pixel
  // range, so a saturated overlay stays distinguishable from noise tails.
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  // Blend between a shared base pattern (0) and fully independent per-class
  // patterns (1). Low values make classes genuinely confusable, which keeps
  // training loss away from zero the way natural datasets do.
  double class_sep = 1.0;
};

inline Dataset gen_synthetic(int classes, int per_class, int image_size, uint64_t seed,
                             SyntheticOptions opt = {}) {
  require(classes >= 2, ErrKind::config, "synthetic generator needs at least 2 classes");
  require(per_class >= 0 && image_size >= 1, ErrKind::config, "bad synthetic dimensions");
  const int h = image_size, w = image_size;
  std::mt19937_64 rng(seed);

  require(opt.pattern_band_min >= 1 && opt.pattern_band_max >= opt.pattern_band_min,
          ErrKind::config, "synthetic pattern band range is empty");
  require(opt.class_sep > 0.0 && opt.class_sep <= 1.0, ErrKind::config,
          "synthetic class_sep must lie in (0,1]");

  // Class base patterns, drawn first so sample count does not shift them. A
  // shared spectrum plus a class_sep-scaled private spectrum controls how
  // confusable the classes are.
  std::vector<std::vector<float>> base(static_cast<size_t>(classes));
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<double> shared(static_cast<size_t>(h) * w, 0.0);
  if (opt.class_sep < 1.0) {
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int band = u + v;
        if (band >= opt.pattern_band_min && band <= opt.pattern_band_max) {
          shared[static_cast<size_t>(v) * w + u] = coef(rng);
        }
      }
    }
  }
  for (int cl = 0; cl < classes; ++cl) {
    std::vector<double> spect = shared;
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int band = u + v;
        if (band >= opt.pattern_band_min && band <= opt.pattern_band_max) {
          spect[static_cast<size_t>(v) * w + u] =
              (1.0 - opt.class_sep) * spect[static_cast<size_t>(v) * w + u] +
              opt.class_sep * coef(rng);
        }
      }
    }
    std::vector<double> img = idct2(spect, h, w);
    double mn = img[0], mx = img[0];
    for (double p : img) {
      mn = std::min(mn, p);
      mx = std::max(mx, p);
    }
    const double span = mx - mn;
    std::vector<float> b(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
      const double unit = span > 0.0 ? (img[i] - mn) / span : 0.5;
      b[i] = static_cast<float>(opt.lo + unit * (opt.hi - opt.lo));
    }
    base[static_cast<size_t>(cl)] = std::move(b);
  }

  Dataset d;
  d.classes = classes;
  d.name = "synthetic";
  d.provenance = "synthetic seed=" + std::to_string(seed);
  d.images.shape = {classes * per_class, opt.channels, h, w};
  d.images.data.resize(static_cast<size_t>(classes) * per_class * opt.channels * h * w);
  d.labels.resize(static_cast<size_t>(classes) * per_class);

  std::normal_distribution<double> noise(0.0, opt.noise_sigma);
  size_t cursor = 0;
  size_t sample = 0;
  for (int cl = 0; cl < classes; ++cl) {
    for (int s = 0; s < per_class; ++s) {
      d.labels[sample++] = cl;
      for (int ch = 0; ch < opt.channels; ++ch) {
        for (int i = 0; i < h * w; ++i) {
          const double v = base[static_cast<size_t>(cl)][static_cast<size_t>(i)] + noise(rng);
          d.images.data[cursor++] = static_cast<float>(std::clamp(v, opt.clip_lo, opt.clip_hi));
        }
      }
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Splits and subsampling.
// ---------------------------------------------------------------------------

struct SplitSpec {
  std::vector<double> fractions;  // must sum to 1
  uint64_t seed = 0;
};

inline Dataset take_indices(const Dataset& d, const std::vector<int>& indices,
                            const std::string& tag) {
  Dataset out;
  out.classes = d.classes;
  out.name = d.name + "/" + tag;
  out.provenance = d.provenance;
  const size_t ss = d.sample_size();
  out.images.shape = {static_cast<int>(indices.size()), d.channels(), d.height(), d.width()};
  out.images.data.resize(indices.size() * ss);
  out.labels.resize(indices.size());
  const bool keep_orig = !d.original_labels.empty();
  if (keep_orig) out.original_labels.resize(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    std::copy_n(d.images.data.begin() + static_cast<int64_t>(idx) * static_cast<int64_t>(ss), ss,
                out.images.data.begin() + static_cast<int64_t>(i) * static_cast<int64_t>(ss));
    out.labels[i] = d.labels[static_cast<size_t>(idx)];
    if (keep_orig) out.original_labels[i] = d.original_labels[static_cast<size_t>(idx)];
  }
  return out;
}

// Seeded shuffle, then contiguous cuts of floor(fraction_i * N); the last
// partition absorbs the rounding remainder so the split is exhaustive.
inline std::vector<Dataset> split(const Dataset& d, const SplitSpec& spec) {
  require(!spec.fractions.empty(), ErrKind::config, "split needs at least one fraction");
  double sum = 0.0;
  for (double f : spec.fractions) {
    require(f >= 0.0 && f <= 1.0, ErrKind::config, "split fractions must lie in [0,1]");
    sum += f;
  }
  require(std::abs(sum - 1.0) < 1e-9, ErrKind::config, "split fractions must sum to 1");

  std::vector<int> order(static_cast<size_t>(d.n()));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Dataset> parts;
  size_t start = 0;
  for (size_t p = 0; p < spec.fractions.size(); ++p) {
    size_t count;
    if (p + 1 == spec.fractions.size()) {
      count = order.size() - start;
    } else {
      count = static_cast<size_t>(std::floor(spec.fractions[p] * d.n() + 1e-9));
      count = std::min(count, order.size() - start);
    }
    std::vector<int> idx(order.begin() + static_cast<int64_t>(start),
                         order.begin() + static_cast<int64_t>(start + count));
    parts.push_back(take_indices(d, idx, "part" + std::to_string(p)));
    start += count;
  }
  return parts;
}

// Class-stratified subsample of floor(fraction*N) samples. Quotas follow the
// largest-remainder rule, so each class count is within one of exact
// proportionality.
inline Dataset subsample(const Dataset& d, double fraction, uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, ErrKind::config,
          "subsample fraction must lie in (0,1]");
  const size_t want = static_cast<size_t>(std::floor(fraction * d.n() + 1e-9));

  std::vector<std::vector<int>> by_class(static_cast<size_t>(d.classes));
  for (int i = 0; i < d.n(); ++i) by_class[static_cast<size_t>(d.labels[static_cast<size_t>(i)])].push_back(i);

  std::vector<size_t> quota(static_cast<size_t>(d.classes), 0);
  std::vector<std::pair<double, int>> remainders;
  size_t assigned = 0;
  for (int cl = 0; cl < d.classes; ++cl) {
    const double exact = fraction * static_cast<double>(by_class[static_cast<size_t>(cl)].size());
    quota[static_cast<size_t>(cl)] = static_cast<size_t>(std::floor(exact + 1e-9));
    assigned += quota[static_cast<size_t>(cl)];
    remainders.push_back({exact - std::floor(exact + 1e-9), cl});
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t i = 0; assigned < want && i < remainders.size(); ++i) {
    const size_t cl = static_cast<size_t>(remainders[i].second);
    if (quota[cl] < by_class[cl].size()) {
      ++quota[cl];
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<int> picked;
  for (int cl = 0; cl < d.classes; ++cl) {
    auto& pool = by_class[static_cast<size_t>(cl)];
    std::shuffle(pool.begin(), pool.end(), rng);
    picked.insert(picked.end(), pool.begin(),
                  pool.begin() + static_cast<int64_t>(quota[static_cast<size_t>(cl)]));
  }
  std::sort(picked.begin(), picked.end());
  return take_indices(d, picked, "sub" + std::to_string(fraction));
}

}  // namespace backlab
