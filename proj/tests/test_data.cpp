// Dataset machinery: synthetic generator, splits, stratified subsampling, and
// the big-endian IDX loader. IDX bytes are assembled by hand in these tests so
// the loader is checked against the wire format, not against the writer.
#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "backlab/backlab.hpp"

namespace bl = backlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "backlab_test_data";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void be32(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

// Images: n samples of h x w with pixel value (17*i + j) mod 256 for sample i,
// flat pixel j. Labels: i mod classes.
std::pair<std::string, std::string> make_idx_pair(int n, int h, int w, int classes) {
  std::string images;
  be32(images, 0x00000803u);
  be32(images, static_cast<uint32_t>(n));
  be32(images, static_cast<uint32_t>(h));
  be32(images, static_cast<uint32_t>(w));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < h * w; ++j) {
      images.push_back(static_cast<char>((17 * i + j) % 256));
    }
  }
  std::string labels;
  be32(labels, 0x00000801u);
  be32(labels, static_cast<uint32_t>(n));
  for (int i = 0; i < n; ++i) labels.push_back(static_cast<char>(i % classes));
  return {images, labels};
}

// Multiset fingerprint of (image bytes, label) pairs, order-insensitive.
std::multiset<std::pair<std::vector<float>, int>> sample_multiset(const bl::Dataset& d) {
  std::multiset<std::pair<std::vector<float>, int>> out;
  for (int i = 0; i < d.n(); ++i) {
    const bl::Tensor t = bl::sample_tensor(d, i);
    out.insert({t.data, d.labels[static_cast<size_t>(i)]});
  }
  return out;
}

}  // namespace

TEST_CASE("synthetic generator is deterministic in its seed") {
  const bl::Dataset a = bl::gen_synthetic(3, 10, 8, 42);
  const bl::Dataset b = bl::gen_synthetic(3, 10, 8, 42);
  const bl::Dataset c = bl::gen_synthetic(3, 10, 8, 43);
  CHECK(a.images.data == b.images.data);
  CHECK(a.labels == b.labels);
  CHECK(a.images.data != c.images.data);
}

TEST_CASE("synthetic generator produces the declared geometry and balance") {
  bl::SyntheticOptions opt;
  opt.clip_lo = 0.05;
  opt.clip_hi = 0.9;
  const bl::Dataset d = bl::gen_synthetic(4, 25, 12, 7, opt);
  CHECK(d.n() == 100);
  CHECK(d.channels() == 1);
  CHECK(d.height() == 12);
  CHECK(d.width() == 12);
  CHECK(d.classes == 4);

  std::map<int, int> counts;
  for (int y : d.labels) ++counts[y];
  for (int cl = 0; cl < 4; ++cl) CHECK(counts[cl] == 25);

  for (float v : d.images.data) {
    CHECK(v >= 0.05f);
    CHECK(v <= 0.9f);
  }
}

TEST_CASE("synthetic classes are separable by a nearest-class-mean rule") {
  // The generator's contract is noisy-but-learnable structure. A rule much
  // weaker than a trained network (nearest class mean) should already land
  // well above chance; at the default noise level it is near-perfect.
  const bl::Dataset d = bl::gen_synthetic(5, 60, 14, 42);
  const size_t ss = static_cast<size_t>(d.height()) * d.width();
  std::vector<std::vector<double>> mean(5, std::vector<double>(ss, 0.0));
  std::vector<int> count(5, 0);
  for (int i = 0; i < d.n(); ++i) {
    const int y = d.labels[static_cast<size_t>(i)];
    ++count[static_cast<size_t>(y)];
    for (size_t j = 0; j < ss; ++j) {
      mean[static_cast<size_t>(y)][j] += d.images.data[static_cast<size_t>(i) * ss + j];
    }
  }
  for (int cl = 0; cl < 5; ++cl) {
    for (double& v : mean[static_cast<size_t>(cl)]) v /= count[static_cast<size_t>(cl)];
  }
  int hits = 0;
  for (int i = 0; i < d.n(); ++i) {
    double best = 1e300;
    int arg = -1;
    for (int cl = 0; cl < 5; ++cl) {
      double dist = 0.0;
      for (size_t j = 0; j < ss; ++j) {
        const double diff =
            d.images.data[static_cast<size_t>(i) * ss + j] - mean[static_cast<size_t>(cl)][j];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        arg = cl;
      }
    }
    if (arg == d.labels[static_cast<size_t>(i)]) ++hits;
  }
  CHECK(static_cast<double>(hits) / d.n() >= 0.9);
}

TEST_CASE("synthetic generator rejects bad options") {
  REQUIRE_THROWS_AS(bl::gen_synthetic(1, 10, 8, 0), bl::Error);
  bl::SyntheticOptions opt;
  opt.pattern_band_min = 3;
  opt.pattern_band_max = 2;
  REQUIRE_THROWS_AS(bl::gen_synthetic(3, 10, 8, 0, opt), bl::Error);
  bl::SyntheticOptions sep;
  sep.class_sep = 0.0;
  REQUIRE_THROWS_AS(bl::gen_synthetic(3, 10, 8, 0, sep), bl::Error);
}

TEST_CASE("split partitions the dataset exactly with floor-sized leading parts") {
  const bl::Dataset d = bl::gen_synthetic(3, 35, 6, 1);  // n = 105
  bl::SplitSpec spec;
  spec.fractions = {0.6, 0.25, 0.15};
  spec.seed = 9;
  const std::vector<bl::Dataset> parts = bl::split(d, spec);
  REQUIRE(parts.size() == 3);
  // floor(0.6*105)=63, floor(0.25*105)=26, remainder 16 absorbs rounding.
  CHECK(parts[0].n() == 63);
  CHECK(parts[1].n() == 26);
  CHECK(parts[2].n() == 16);

  // Disjoint and exhaustive: the multiset union equals the source.
  auto whole = sample_multiset(d);
  std::multiset<std::pair<std::vector<float>, int>> rebuilt;
  for (const bl::Dataset& p : parts) {
    for (auto& s : sample_multiset(p)) rebuilt.insert(s);
  }
  CHECK(rebuilt == whole);

  // Deterministic in the split seed.
  const std::vector<bl::Dataset> again = bl::split(d, spec);
  for (size_t p = 0; p < parts.size(); ++p) {
    CHECK(parts[p].images.data == again[p].images.data);
    CHECK(parts[p].labels == again[p].labels);
  }
  bl::SplitSpec other = spec;
  other.seed = 10;
  CHECK(bl::split(d, other)[0].images.data != parts[0].images.data);
}

TEST_CASE("split rejects fractions that do not sum to one") {
  const bl::Dataset d = bl::gen_synthetic(2, 5, 4, 0);
  bl::SplitSpec spec;
  spec.fractions = {0.5, 0.4};
  try {
    bl::split(d, spec);
    FAIL("expected a config error");
  } catch (const bl::Error& e) {
    CHECK(e.kind() == bl::ErrKind::config);
  }
}

TEST_CASE("subsample is class-stratified within one sample of proportionality") {
  // 3 classes with 30 each; fraction 0.4 wants floor(0.4*90)=36 = 12 per class.
  const bl::Dataset d = bl::gen_synthetic(3, 30, 6, 5);
  const bl::Dataset s = bl::subsample(d, 0.4, 77);
  CHECK(s.n() == 36);
  std::map<int, int> counts;
  for (int y : s.labels) ++counts[y];
  for (int cl = 0; cl < 3; ++cl) CHECK(counts[cl] == 12);

  // Every drawn sample exists in the source.
  auto whole = sample_multiset(d);
  for (auto& smp : sample_multiset(s)) CHECK(whole.count(smp) >= 1);

  // Determinism and seed sensitivity.
  CHECK(bl::subsample(d, 0.4, 77).images.data == s.images.data);
  CHECK(bl::subsample(d, 0.4, 78).images.data != s.images.data);

  // Uneven quotas stay within one of exact proportionality.
  const bl::Dataset u = bl::subsample(d, 0.35, 3);  // wants floor(31.5)=31
  CHECK(u.n() == 31);
  std::map<int, int> uc;
  for (int y : u.labels) ++uc[y];
  for (int cl = 0; cl < 3; ++cl) {
    CHECK(uc[cl] >= 10);
    CHECK(uc[cl] <= 11);
  }
}

TEST_CASE("take_indices preserves sample bytes, labels, and original labels") {
  bl::Dataset d = bl::gen_synthetic(3, 4, 5, 11);
  d.original_labels = d.labels;
  d.original_labels[0] = 2;
  const bl::Dataset out = bl::take_indices(d, {0, 5, 3}, "probe");
  REQUIRE(out.n() == 3);
  CHECK(bl::sample_tensor(out, 0).data == bl::sample_tensor(d, 0).data);
  CHECK(bl::sample_tensor(out, 1).data == bl::sample_tensor(d, 5).data);
  CHECK(bl::sample_tensor(out, 2).data == bl::sample_tensor(d, 3).data);
  CHECK(out.labels == std::vector<int>{d.labels[0], d.labels[5], d.labels[3]});
  CHECK(out.original_labels[0] == 2);
}

TEST_CASE("IDX loader decodes hand-assembled big-endian files") {
  const auto dir = scratch_dir();
  const auto [images, labels] = make_idx_pair(5, 3, 4, 3);
  write_bytes(dir / "img.idx", images);
  write_bytes(dir / "lab.idx", labels);

  const bl::Dataset d = bl::load_idx((dir / "img.idx").string(), (dir / "lab.idx").string(), 3);
  CHECK(d.n() == 5);
  CHECK(d.channels() == 1);
  CHECK(d.height() == 3);
  CHECK(d.width() == 4);
  CHECK(d.classes == 3);
  for (int i = 0; i < 5; ++i) {
    CHECK(d.labels[static_cast<size_t>(i)] == i % 3);
    for (int j = 0; j < 12; ++j) {
      const float want = static_cast<float>((17 * i + j) % 256) / 255.0f;
      CHECK(d.images.data[static_cast<size_t>(i) * 12 + static_cast<size_t>(j)] == want);
    }
  }
}

TEST_CASE("IDX loader rejects malformed files with format errors") {
  const auto dir = scratch_dir();
  const auto [images, labels] = make_idx_pair(4, 2, 2, 2);

  SECTION("bad image magic") {
    std::string bad = images;
    bad[3] = 0x07;
    write_bytes(dir / "bad_img.idx", bad);
    write_bytes(dir / "lab1.idx", labels);
    try {
      bl::load_idx((dir / "bad_img.idx").string(), (dir / "lab1.idx").string(), 2);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("bad label magic") {
    std::string bad = labels;
    bad[3] = 0x03;
    write_bytes(dir / "img2.idx", images);
    write_bytes(dir / "bad_lab.idx", bad);
    try {
      bl::load_idx((dir / "img2.idx").string(), (dir / "bad_lab.idx").string(), 2);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("count mismatch between images and labels") {
    std::string fewer = labels;
    fewer[7] = 0x03;  // claims 3 labels for 4 images
    fewer.resize(fewer.size() - 1);
    write_bytes(dir / "img3.idx", images);
    write_bytes(dir / "few_lab.idx", fewer);
    try {
      bl::load_idx((dir / "img3.idx").string(), (dir / "few_lab.idx").string(), 2);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("truncated pixel payload") {
    std::string cut = images;
    cut.resize(cut.size() - 3);
    write_bytes(dir / "cut_img.idx", cut);
    write_bytes(dir / "lab4.idx", labels);
    try {
      bl::load_idx((dir / "cut_img.idx").string(), (dir / "lab4.idx").string(), 2);
      FAIL("expected a format error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::format);
    }
  }
  SECTION("label outside the declared class range") {
    write_bytes(dir / "img5.idx", images);
    write_bytes(dir / "lab5.idx", labels);
    // Labels reach class 1; claiming 1 class must fail validation.
    REQUIRE_THROWS_AS(
        bl::load_idx((dir / "img5.idx").string(), (dir / "lab5.idx").string(), 1), bl::Error);
  }
  SECTION("missing file") {
    try {
      bl::load_idx((dir / "absent.idx").string(), (dir / "lab6.idx").string(), 2);
      FAIL("expected an io error");
    } catch (const bl::Error& e) {
      CHECK(e.kind() == bl::ErrKind::io);
    }
  }
}

TEST_CASE("IDX writer output round-trips through the loader") {
  const auto dir = scratch_dir();
  // Quantization-exact pixels: k/255 survives the u8 round trip bit-for-bit.
  bl::Dataset d;
  d.classes = 2;
  d.name = "quant";
  d.images.shape = {3, 1, 2, 2};
  for (int k = 0; k < 12; ++k) {
    d.images.data.push_back(static_cast<float>(k * 20) / 255.0f);
  }
  d.labels = {0, 1, 1};

  bl::write_idx(d, (dir / "rt_img.idx").string(), (dir / "rt_lab.idx").string());
  const bl::Dataset back =
      bl::load_idx((dir / "rt_img.idx").string(), (dir / "rt_lab.idx").string(), 2);
  CHECK(back.images.data == d.images.data);
  CHECK(back.labels == d.labels);
}

TEST_CASE("dataset validation rejects out-of-range labels and pixels") {
  bl::Dataset d = bl::gen_synthetic(2, 3, 4, 0);
  SECTION("label out of range") {
    d.labels[0] = 7;
    REQUIRE_THROWS_AS(bl::validate_dataset(d), bl::Error);
  }
  SECTION("non-finite pixel") {
    d.images.data[0] = std::numeric_limits<float>::quiet_NaN();
    REQUIRE_THROWS_AS(bl::validate_dataset(d), bl::Error);
  }
}
