#pragma once

#include <stdexcept>
#include <string>

namespace backlab {

// Error taxonomy. The CLI maps config/format to exit code 2 and everything
// else to exit code 3.
enum class ErrKind {
  config,       // bad experiment config or violated precondition
  format,       // malformed file (IDX, model container, CSV)
  shape,        // tensor/architecture shape mismatch
  geometry,     // trigger does not fit inside the image
  numeric,      // non-finite values produced by an operation
  divergence,   // non-finite loss during training
  unsupported,  // version or architecture not handled
  io,           // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrKind kind() const noexcept { return kind_; }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void fail(ErrKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrKind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

}  // namespace backlab
