#include "dbvae/error.hpp"

namespace dbvae {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kConsistency: return "consistency";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kVersion: return "version";
    case ErrorKind::kDegenerate: return "degenerate";
  }
  return "unknown";
}

}  // namespace dbvae
