#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "backlab/arch_json.hpp"
#include "backlab/errors.hpp"
#include "backlab/model.hpp"

// Model file format (version 1, magic "BFM1"):
//   bytes 0..3   magic
//   bytes 4..7   u32 little-endian byte length of the arch descriptor
//   ...          arch descriptor, UTF-8 JSON
//   ...          all parameter tensors as f32 little-endian, declaration order
//   ...          trainable mask, one bit per tensor, LSB-first, zero-padded
// Momentum buffers are transient and never stored.
namespace backlab {

namespace detail {

inline void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_f32le(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32le(out, v);
}

struct ByteReader {
  const std::string& buf;
  size_t pos = 0;

  void need(size_t n, const char* what) {
    require(pos + n <= buf.size(), ErrKind::format,
            std::string("model file truncated at byte ") + std::to_string(pos) + " reading " +
                what);
  }
  uint32_t u32le(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)]);
    pos += 4;
    return v;
  }
  float f32le(const char* what) {
    const uint32_t v = u32le(what);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
};

}  // namespace detail

inline std::string serialize_model(const Model& m) {
  std::string out = "BFM1";
  const std::string arch = arch_to_json(m.arch).dump();
  detail::put_u32le(out, static_cast<uint32_t>(arch.size()));
  out += arch;
  for (const auto& t : m.params) {
    for (float v : t) detail::put_f32le(out, v);
  }
  uint8_t byte = 0;
  int bit = 0;
  for (size_t i = 0; i < m.trainable.size(); ++i) {
    if (m.trainable[i]) byte |= static_cast<uint8_t>(1u << bit);
    if (++bit == 8) {
      out.push_back(static_cast<char>(byte));
      byte = 0;
      bit = 0;
    }
  }
  if (bit) out.push_back(static_cast<char>(byte));
  return out;
}

inline Model deserialize_model(const std::string& buf) {
  detail::ByteReader r{buf};
  r.need(4, "magic");
  const std::string magic = buf.substr(0, 4);
  if (magic != "BFM1") {
    if (magic.substr(0, 3) == "BFM") {
      fail(ErrKind::unsupported, "unsupported model file version \"" + magic + "\"");
    }
    fail(ErrKind::format, "not a model file (bad magic)");
  }
  r.pos = 4;
  const uint32_t arch_len = r.u32le("arch descriptor length");
  r.need(arch_len, "arch descriptor");
  nlohmann::json aj;
  try {
    aj = nlohmann::json::parse(buf.substr(r.pos, arch_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrKind::format, std::string("arch descriptor is not valid JSON: ") + e.what());
  }
  r.pos += arch_len;

  Model m;
  m.arch = arch_from_json(aj);
  const auto shapes = param_shapes(m.arch);
  for (const auto& shape : shapes) {
    std::vector<float> t(detail::shape_numel(shape));
    for (float& v : t) v = r.f32le("parameter data");
    m.params.push_back(std::move(t));
  }
  const size_t mask_bytes = (shapes.size() + 7) / 8;
  r.need(mask_bytes, "trainable mask");
  m.trainable.resize(shapes.size());
  for (size_t i = 0; i < shapes.size(); ++i) {
    const uint8_t byte = static_cast<uint8_t>(buf[r.pos + i / 8]);
    m.trainable[i] = (byte >> (i % 8)) & 1u;
  }
  r.pos += mask_bytes;
  require(r.pos == buf.size(), ErrKind::format,
          "model file has " + std::to_string(buf.size() - r.pos) + " trailing bytes");

  m.momentum.resize(m.params.size());
  for (size_t i = 0; i < m.params.size(); ++i) m.momentum[i].assign(m.params[i].size(), 0.0f);
  return m;
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open \"" + path + "\" for writing");
  const std::string bytes = serialize_model(m);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  f.flush();
  require(f.good(), ErrKind::io, "write to \"" + path + "\" failed");
}

inline Model load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrKind::io, "cannot open \"" + path + "\" for reading");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace backlab
