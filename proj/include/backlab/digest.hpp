#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace backlab {

// FNV-1a, 64-bit. Used to fingerprint configuration bytes so result
// directories and manifests are keyed by exact content; not collision
// resistant against an adversary, which experiment bookkeeping doesn't need.
inline uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= static_cast<uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex16(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

inline std::string digest_bytes(std::string_view bytes) { return hex16(fnv1a64(bytes)); }

}  // namespace backlab
