#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dbvae {

enum class ErrorKind {
  kInvalidArgument,
  kFormat,       // malformed bytes on disk (magic, truncation)
  kConsistency,  // well-formed files that disagree with each other
  kIo,
  kNumeric,      // non-finite values in a computation
  kVersion,
  kDegenerate,   // input valid but the quantity is undefined
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Throws kInvalidArgument with `message` when `condition` is false.
inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::kInvalidArgument, message);
}

}  // namespace dbvae
